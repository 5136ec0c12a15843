#include "threads_runtime.hpp"

#include "cvm/error.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cvm::detail {

using bytecode::Opcode;

namespace {

std::string describe_object(const ObjectInstance& obj) {
    return display_string(Value{const_cast<ObjectInstance*>(&obj)}) + " (object " + std::to_string(obj.id) + ")";
}

ObjectInstance& monitor_operand(const Frame& frame, Opcode op) {
    const Value& top = frame.top();
    if (auto* const* obj = std::get_if<ObjectInstance*>(&top)) return **obj;
    throw Error(ErrorKind::LockTypeError, std::string(bytecode::opcode_info(op).mnemonic) + " needs an object, got " +
                                              class_name_of(top));
}

ObjectInstance& atomic_operand(const Value& target, Opcode op, std::size_t field) {
    auto* const* obj = std::get_if<ObjectInstance*>(&target);
    if (obj == nullptr) {
        throw Error(ErrorKind::AtomicTypeError, std::string(bytecode::opcode_info(op).mnemonic) +
                                                    " needs an object, got " + class_name_of(target));
    }
    if (field >= (*obj)->field_count()) {
        throw Error(ErrorKind::FieldIndexOutOfRange, "field " + std::to_string(field) + " of " + (*obj)->cls->name +
                                                         " (" + std::to_string((*obj)->field_count()) + " fields)");
    }
    return **obj;
}

}  // namespace

ThreadsRuntime::ThreadsRuntime(std::shared_ptr<const Program> program, Heap& heap, const RunOptions& options,
                               OutputSink& output, StepObserver* observer)
    : program_(program), heap_(heap), options_(options), interp_(std::move(program), heap, *this, output) {
    interp_.set_observer(observer);
    interp_.set_step_limit(options.max_steps);
}

ThreadsRuntime::~ThreadsRuntime() {
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : os_threads_) {
        if (t.joinable()) t.join();
    }
}

ThreadsRuntime::VmThread& ThreadsRuntime::spawn_locked(BlockClosure& block) {
    auto thread = std::make_unique<VmThread>();
    thread->id = static_cast<ThreadId>(threads_.size());
    thread->ctx.id = thread->id;
    interp_.activate_block(thread->ctx, block, {});
    VmThread& ref = *thread;
    threads_.push_back(std::move(thread));
    if (options_.backend == Backend::Os) {
        os_threads_.emplace_back([this, &ref] { os_thread_main(ref); });
    }
    return ref;
}

ThreadsRuntime::VmThread& ThreadsRuntime::thread_locked(const ExecutionContext& ctx) { return *threads_.at(ctx.id); }

bool ThreadsRuntime::can_proceed(const VmThread& t) const {
    switch (t.state) {
    case State::Running: return true;
    case State::Waiting: return false;
    case State::BlockedOnLock: {
        ThreadId holder = t.blocked_on->monitor.holder;
        return holder == kNoThread || holder == t.id;
    }
    case State::Reacquiring: return t.blocked_on->monitor.holder == kNoThread;
    case State::Joining: return threads_[t.joining]->state == State::Finished;
    case State::Finished: return false;
    }
    return false;
}

void ThreadsRuntime::prepare(VmThread& t) {
    if (t.state == State::Reacquiring) {
        Monitor& m = t.blocked_on->monitor;
        m.holder = t.id;
        m.entry_count = t.reacquire_count;
        t.held.push_back(t.blocked_on);
        t.reacquire_count = 0;
        t.blocked_on = nullptr;
    }
    if (t.state != State::Finished) t.state = State::Running;
}

bool ThreadsRuntime::all_finished() const {
    return std::all_of(threads_.begin(), threads_.end(),
                       [](const auto& t) { return t->state == State::Finished; });
}

void ThreadsRuntime::note_monitor(ObjectInstance& obj) {
    if (options_.check_invariants && monitor_set_.insert(&obj).second) monitors_.push_back(&obj);
}

void ThreadsRuntime::check_monitors() const {
    auto violation = [](const std::string& what) { throw Error(ErrorKind::InvariantViolation, what); };
    for (const ObjectInstance* obj : monitors_) {
        const Monitor& m = obj->monitor;
        if ((m.holder == kNoThread) != (m.entry_count == 0)) {
            violation("monitor of " + describe_object(*obj) + " has holder/count mismatch");
        }
        if (m.holder != kNoThread) {
            const auto& held = threads_.at(m.holder)->held;
            if (std::count(held.begin(), held.end(), obj) != 1) {
                violation("monitor of " + describe_object(*obj) + " not recorded by its holder");
            }
        }
        for (ThreadId w : m.wait_set) {
            const VmThread& t = *threads_.at(w);
            if (t.state != State::Waiting) violation("thread " + std::to_string(w) + " in wait set is not waiting");
            if (!t.held.empty()) violation("waiting thread " + std::to_string(w) + " holds a monitor");
        }
    }
    for (const auto& t : threads_) {
        for (const ObjectInstance* obj : t->held) {
            if (obj->monitor.holder != t->id) {
                violation("thread " + std::to_string(t->id) + " lists a monitor it does not hold");
            }
        }
    }
}

std::string ThreadsRuntime::describe_stuck_threads() const {
    // Wait-for edges: a thread waits for the holder of the monitor it wants,
    // or for the thread it joins.
    auto edge = [&](const VmThread& t) -> std::optional<ThreadId> {
        switch (t.state) {
        case State::BlockedOnLock:
        case State::Reacquiring:
            if (t.blocked_on->monitor.holder != kNoThread) return t.blocked_on->monitor.holder;
            return std::nullopt;
        case State::Joining: return t.joining;
        default: return std::nullopt;
        }
    };
    auto reason = [&](const VmThread& t) -> std::string {
        std::string name = "thread " + std::to_string(t.id);
        switch (t.state) {
        case State::BlockedOnLock:
        case State::Reacquiring:
            return name + " blocked on " + describe_object(*t.blocked_on) + " held by thread " +
                   std::to_string(t.blocked_on->monitor.holder);
        case State::Joining: return name + " joining thread " + std::to_string(t.joining);
        case State::Waiting: return name + " waiting on " + describe_object(*t.blocked_on) + " with no notifier";
        default: return name + " stuck";
        }
    };

    std::ostringstream out;
    for (const auto& start : threads_) {
        if (start->state == State::Finished) continue;
        std::vector<ThreadId> path;
        std::optional<ThreadId> cur = start->id;
        while (cur && std::find(path.begin(), path.end(), *cur) == path.end() && path.size() <= threads_.size()) {
            path.push_back(*cur);
            cur = edge(*threads_[*cur]);
        }
        if (!cur) continue;
        auto loop_start = std::find(path.begin(), path.end(), *cur);
        if (loop_start == path.end()) continue;
        out << "wait-for cycle: ";
        for (auto it = loop_start; it != path.end(); ++it) out << "thread " << *it << " -> ";
        out << "thread " << *cur;
        for (auto it = loop_start; it != path.end(); ++it) out << "; " << reason(*threads_[*it]);
        return out.str();
    }
    out << "no runnable thread";
    for (const auto& t : threads_) {
        if (t->state != State::Finished) out << "; " << reason(*t);
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Extension instructions

StepStatus ThreadsRuntime::execute_extension(Interpreter& interp, ExecutionContext& ctx, Frame& frame,
                                             const bytecode::Instruction& ins, std::uint32_t next_pc) {
    switch (ins.opcode) {
    case Opcode::Spawn: {
        const Value& top = frame.top();
        auto* const* block = std::get_if<BlockClosure*>(&top);
        if (block == nullptr) throw Error(ErrorKind::SpawnTypeError, "SPAWN needs a block, got " + class_name_of(top));
        if ((*block)->method->num_args != 0) {
            throw Error(ErrorKind::SpawnTypeError, "SPAWN needs a block without arguments, got one taking " +
                                                       std::to_string((*block)->method->num_args));
        }
        BlockClosure& closure = **block;
        frame.pop();
        ThreadId id;
        {
            std::lock_guard lock(mutex_);
            id = spawn_locked(closure).id;
        }
        cv_.notify_all();
        frame.push(ThreadHandle{id});
        break;
    }
    case Opcode::Lock: {
        ObjectInstance& obj = monitor_operand(frame, ins.opcode);
        std::lock_guard lock(mutex_);
        VmThread& self = thread_locked(ctx);
        note_monitor(obj);
        Monitor& m = obj.monitor;
        if (m.holder == self.id) {
            ++m.entry_count;
        } else if (m.holder == kNoThread) {
            m.holder = self.id;
            m.entry_count = 1;
            self.held.push_back(&obj);
        } else {
            self.state = State::BlockedOnLock;
            self.blocked_on = &obj;
            return StepStatus::Retry;
        }
        self.state = State::Running;
        self.blocked_on = nullptr;
        break;
    }
    case Opcode::Unlock: {
        ObjectInstance& obj = monitor_operand(frame, ins.opcode);
        {
            std::lock_guard lock(mutex_);
            VmThread& self = thread_locked(ctx);
            note_monitor(obj);
            Monitor& m = obj.monitor;
            if (m.holder != self.id) {
                throw Error(ErrorKind::IllegalMonitorState, "thread " + std::to_string(self.id) + " unlocked " +
                                                                describe_object(obj) + " without holding it");
            }
            if (--m.entry_count == 0) {
                m.holder = kNoThread;
                self.held.erase(std::find(self.held.begin(), self.held.end(), &obj));
            }
        }
        cv_.notify_all();
        break;
    }
    case Opcode::Wait: {
        ObjectInstance& obj = monitor_operand(frame, ins.opcode);
        {
            std::lock_guard lock(mutex_);
            VmThread& self = thread_locked(ctx);
            note_monitor(obj);
            Monitor& m = obj.monitor;
            if (m.holder != self.id) {
                throw Error(ErrorKind::IllegalMonitorState, "thread " + std::to_string(self.id) + " waited on " +
                                                                describe_object(obj) + " without holding it");
            }
            if (self.held.size() != 1) {
                throw Error(ErrorKind::IllegalMonitorState, "thread " + std::to_string(self.id) + " waited on " +
                                                                describe_object(obj) + " while holding other monitors");
            }
            self.reacquire_count = m.entry_count;
            m.holder = kNoThread;
            m.entry_count = 0;
            self.held.clear();
            m.wait_set.push_back(self.id);
            self.state = State::Waiting;
            self.blocked_on = &obj;
        }
        cv_.notify_all();
        frame.pc = next_pc;
        return StepStatus::Blocked;
    }
    case Opcode::Notify: {
        ObjectInstance& obj = monitor_operand(frame, ins.opcode);
        {
            std::lock_guard lock(mutex_);
            note_monitor(obj);
            for (ThreadId id : obj.monitor.wait_set) threads_[id]->state = State::Reacquiring;
            obj.monitor.wait_set.clear();
        }
        cv_.notify_all();
        break;
    }
    case Opcode::XaddField: {
        Value delta = frame.pop();
        Value target = frame.pop();
        ObjectInstance& obj = atomic_operand(target, ins.opcode, ins.args[0]);
        const auto* d = std::get_if<std::int64_t>(&delta);
        if (d == nullptr) throw Error(ErrorKind::AtomicTypeError, "XADD_FIELD delta is " + class_name_of(delta));
        std::optional<Value> old_value;
        obj.update_field(ins.args[0], [&](Value& slot) {
            if (const auto* cur = std::get_if<std::int64_t>(&slot)) {
                old_value = *cur;
                slot = static_cast<std::int64_t>(static_cast<std::uint64_t>(*cur) + static_cast<std::uint64_t>(*d));
            } else {
                old_value.reset();
            }
            return 0;
        });
        if (!old_value) {
            throw Error(ErrorKind::AtomicTypeError, "XADD_FIELD on field " + std::to_string(ins.args[0]) + " of " +
                                                        obj.cls->name + " holding " +
                                                        class_name_of(obj.load_field(ins.args[0])));
        }
        frame.push(*old_value);
        break;
    }
    case Opcode::CasField: {
        Value replacement = frame.pop();
        Value expected = frame.pop();
        Value target = frame.pop();
        ObjectInstance& obj = atomic_operand(target, ins.opcode, ins.args[0]);
        Value old_value = obj.update_field(ins.args[0], [&](Value& slot) {
            Value old = slot;
            if (same_value(old, expected)) slot = replacement;
            return old;
        });
        frame.push(old_value);
        break;
    }
    default: return RuntimeHooks::execute_extension(interp, ctx, frame, ins, next_pc);
    }
    frame.pc = next_pc;
    return StepStatus::Continued;
}

std::optional<Value> ThreadsRuntime::join(ExecutionContext& ctx, ThreadHandle handle) {
    std::lock_guard lock(mutex_);
    VmThread& self = thread_locked(ctx);
    if (handle.id == self.id) {
        throw Error(ErrorKind::SelfJoinDeadlock, "thread " + std::to_string(self.id) + " joined itself");
    }
    if (handle.id >= threads_.size()) {
        throw Error(ErrorKind::PrimitiveTypeError, "no thread " + std::to_string(handle.id));
    }
    VmThread& target = *threads_[handle.id];
    if (target.state == State::Finished) return target.ctx.result;
    self.state = State::Joining;
    self.joining = target.id;
    return std::nullopt;
}

StepStatus ThreadsRuntime::exit(ExecutionContext& ctx, std::int64_t code) {
    ctx.exit_code = code;
    ctx.halted = true;
    return StepStatus::Halted;
}

// ---------------------------------------------------------------------------
// Schedulers

ExitReport ThreadsRuntime::run(std::vector<Value> entry_args) {
    const LoadedMethod& entry = program_->entry_method();
    if (entry_args.size() != entry.num_args) {
        throw std::invalid_argument("entry method " + entry.display_name() + " takes " +
                                    std::to_string(entry.num_args) + " arguments, got " +
                                    std::to_string(entry_args.size()));
    }
    {
        std::lock_guard lock(mutex_);
        auto main = std::make_unique<VmThread>();
        main->id = 0;
        main->ctx.id = 0;
        ObjectInstance* receiver = interp_.instantiate(main->ctx, program_->entry_class(), 0);
        interp_.activate_method(main->ctx, receiver, entry, std::move(entry_args));
        threads_.push_back(std::move(main));
    }

    if (options_.backend == Backend::Os) {
        run_os();
    } else {
        run_virtual();
    }

    ExitReport report;
    const VmThread& source = halted_by_ != nullptr ? *halted_by_ : *threads_.front();
    report.result = source.ctx.result;
    report.result_text = display_string(report.result);
    report.steps = interp_.total_steps();
    report.exit_code = source.ctx.exit_code;
    report.invariant_checks = options_.check_invariants ? report.steps : 0;
    return report;
}

void ThreadsRuntime::run_virtual() {
    std::mt19937_64 rng(options_.seed);
    const std::uint32_t quantum = std::max<std::uint32_t>(1, options_.preempt_every);
    VmThread* current = nullptr;
    std::uint32_t budget = 0;
    std::vector<VmThread*> candidates;
    while (true) {
        if (all_finished()) return;
        if (current == nullptr || budget == 0 || !can_proceed(*current)) {
            candidates.clear();
            for (auto& t : threads_) {
                if (can_proceed(*t)) candidates.push_back(t.get());
            }
            if (candidates.empty()) throw Error(ErrorKind::Deadlock, describe_stuck_threads());
            current = candidates[rng() % candidates.size()];
            budget = quantum;
        }
        prepare(*current);
        StepStatus status = interp_.step(current->ctx);
        switch (status) {
        case StepStatus::Retry:
            budget = 0;
            continue;
        case StepStatus::Finished:
            current->state = State::Finished;
            budget = 0;
            break;
        case StepStatus::Blocked: budget = 0; break;
        case StepStatus::Halted:
            halted_by_ = current;
            return;
        default: --budget; break;
        }
        if (options_.check_invariants) check_monitors();
    }
}

void ThreadsRuntime::os_thread_main(VmThread& t) {
    std::unique_lock lock(mutex_);
    while (true) {
        cv_.wait(lock, [&] { return stop_ || can_proceed(t); });
        if (stop_) return;
        prepare(t);
        ++active_;
        lock.unlock();
        StepStatus status;
        try {
            status = interp_.step(t.ctx);
        } catch (...) {
            lock.lock();
            --active_;
            if (!error_) error_ = std::current_exception();
            stop_ = true;
            cv_.notify_all();
            return;
        }
        lock.lock();
        --active_;
        switch (status) {
        case StepStatus::Finished:
            t.state = State::Finished;
            cv_.notify_all();
            return;
        case StepStatus::Halted:
            if (halted_by_ == nullptr) halted_by_ = &t;
            stop_ = true;
            cv_.notify_all();
            return;
        case StepStatus::Retry:
        case StepStatus::Blocked: cv_.notify_all(); break;
        default: break;
        }
        if (options_.check_invariants) {
            try {
                check_monitors();
            } catch (...) {
                if (!error_) error_ = std::current_exception();
                stop_ = true;
                cv_.notify_all();
                return;
            }
        }
    }
}

void ThreadsRuntime::run_os() {
    std::unique_lock lock(mutex_);
    os_threads_.emplace_back([this] { os_thread_main(*threads_.front()); });
    std::string deadlock;
    cv_.wait(lock, [&] {
        if (stop_ || all_finished()) return true;
        if (active_ != 0) return false;
        for (const auto& t : threads_) {
            if (can_proceed(*t)) return false;
        }
        deadlock = describe_stuck_threads();
        return true;
    });
    stop_ = true;
    cv_.notify_all();

    std::size_t joined = 0;
    while (joined < os_threads_.size()) {
        std::thread worker = std::move(os_threads_[joined++]);
        lock.unlock();
        worker.join();
        lock.lock();
    }
    if (error_) std::rethrow_exception(error_);
    if (halted_by_ == nullptr && !deadlock.empty()) throw Error(ErrorKind::Deadlock, deadlock);
}

}  // namespace cvm::detail
