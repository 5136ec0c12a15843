#include "cvm/interpreter.hpp"

#include "cvm/error.hpp"

#include <cstdio>
#include <sstream>

namespace cvm {

using bytecode::Instruction;
using bytecode::Opcode;

std::string_view step_status_name(StepStatus status) noexcept {
    switch (status) {
    case StepStatus::Continued: return "continued";
    case StepStatus::Halted: return "halted";
    case StepStatus::Yielded: return "yielded";
    case StepStatus::Blocked: return "blocked";
    case StepStatus::Finished: return "finished";
    case StepStatus::Retry: return "retry";
    }
    return "?";
}

void TraceWriter::on_step(const StepEvent& e) {
    std::lock_guard lock(mutex_);
    out_ << e.step << '\t' << e.context->id << '\t';
    if (mode_ == bytecode::Mode::Actors) out_ << e.context->coroutine << '\t';
    out_ << e.offset << '\t' << bytecode::opcode_info(e.opcode).mnemonic << '\t' << e.depth_after << '\n';
}

void OutputSink::write(std::string_view text) {
    std::lock_guard lock(mutex_);
    out_ << text;
}

// ---------------------------------------------------------------------------
// Default hooks: a runtime without extensions.

std::optional<ActorId> RuntimeHooks::owner_for(const ExecutionContext&) const { return std::nullopt; }

StepStatus RuntimeHooks::execute_extension(Interpreter&, ExecutionContext&, Frame&, const Instruction& ins,
                                           std::uint32_t) {
    throw Error(ErrorKind::InvalidOpcode,
                std::string(bytecode::opcode_info(ins.opcode).mnemonic) + " is not supported by this runtime");
}

StepStatus RuntimeHooks::send_remote(Interpreter&, ExecutionContext&, Frame&, RemoteReference, const SymbolInfo& sel,
                                     std::vector<Value>) {
    throw Error(ErrorKind::DoesNotUnderstand, "RemoteReference does not understand #" + sel.name);
}

std::optional<Value> RuntimeHooks::join(ExecutionContext&, ThreadHandle) {
    throw Error(ErrorKind::PrimitiveTypeError, "join is only available in threads mode");
}

StepStatus RuntimeHooks::exit(ExecutionContext& ctx, std::int64_t code) {
    ctx.exit_code = code;
    ctx.halted = true;
    return StepStatus::Halted;
}

// ---------------------------------------------------------------------------

class ContextHost final : public PrimitiveHost {
public:
    ContextHost(Interpreter& interp, ExecutionContext& ctx) : interp_(interp), ctx_(ctx) {}

    ObjectInstance* instantiate(const Class& cls, std::size_t indexed_size) override {
        return interp_.instantiate(ctx_, cls, indexed_size);
    }
    String make_string(std::string text) override { return interp_.heap_.new_string(std::move(text)); }
    void write_output(std::string_view text) override { interp_.output_.write(text); }

private:
    Interpreter& interp_;
    ExecutionContext& ctx_;
};

Interpreter::Interpreter(std::shared_ptr<const Program> program, Heap& heap, RuntimeHooks& hooks,
                         OutputSink& output)
    : program_(std::move(program)), heap_(heap), hooks_(hooks), output_(output) {}

ObjectInstance* Interpreter::instantiate(const ExecutionContext& ctx, const Class& cls, std::size_t indexed_size) {
    return heap_.instantiate(cls, indexed_size, hooks_.owner_for(ctx));
}

Frame& Interpreter::activate_method(ExecutionContext& ctx, const Value& receiver, const LoadedMethod& method,
                                    std::vector<Value> args) {
    if (args.size() != method.num_args) {
        throw Error(ErrorKind::ArityMismatch, method.display_name() + " takes " + std::to_string(method.num_args) +
                                                  " arguments, got " + std::to_string(args.size()));
    }
    Frame* frame = heap_.new_frame(&method, FrameKind::Method);
    frame->receiver = receiver;
    frame->caller = ctx.frame;
    frame->set_slots(std::move(args), method.num_locals);
    ctx.frame = frame;
    return *frame;
}

Frame& Interpreter::activate_block(ExecutionContext& ctx, BlockClosure& block, std::vector<Value> args) {
    const LoadedMethod& method = *block.method;
    if (args.size() != method.num_args) {
        throw Error(ErrorKind::BlockArityMismatch, "block " + method.display_name() + " takes " +
                                                       std::to_string(method.num_args) + " arguments, got " +
                                                       std::to_string(args.size()));
    }
    Frame* frame = heap_.new_frame(&method, FrameKind::Block);
    frame->receiver = block.home->receiver;
    frame->caller = ctx.frame;
    frame->lexical_outer = block.home;
    frame->set_slots(std::move(args), method.num_locals);
    ctx.frame = frame;
    return *frame;
}

void Interpreter::resume_with(ExecutionContext& ctx, const Value& value) { ctx.frame->push(value); }

StepStatus Interpreter::step(ExecutionContext& ctx) {
    Frame* frame = ctx.frame;
    if (step_limit_ != 0 && steps_.load(std::memory_order_relaxed) >= step_limit_) {
        throw Error(ErrorKind::StepLimitExceeded, "step limit of " + std::to_string(step_limit_) + " reached");
    }
    const LoadedMethod& method = *frame->method;
    const std::uint32_t pc = frame->pc;
    const Instruction ins = bytecode::decode_at(method.code, pc, std::nullopt);
    const auto next_pc = static_cast<std::uint32_t>(pc + ins.encoded_size());

    StepEvent event;
    if (observer_ != nullptr) {
        event.depth_before = frame->depth();
        if (frame->depth() > 0) event.top_before = frame->top();
    }
    const std::uint64_t activation = frame->activation;

    StepStatus status;
    try {
        status = execute(ctx, *frame, ins, next_pc);
    } catch (const TrapError&) {
        throw;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::StepLimitExceeded) throw;
        throw TrapError(e.kind(), e.detail(), backtrace_from(frame, pc));
    }
    if (status == StepStatus::Retry) return status;

    std::uint64_t number = steps_.fetch_add(1, std::memory_order_relaxed) + 1;
    ++ctx.steps;
    if (observer_ != nullptr) {
        event.step = number;
        event.context = &ctx;
        event.method = &method;
        event.offset = pc;
        event.opcode = ins.opcode;
        event.status = status;
        if (frame->alive && frame->activation == activation) {
            event.frame_depth_after = frame->depth();
            if (frame->depth() > 0) event.frame_top_after = frame->top();
        }
        event.depth_after = ctx.frame != nullptr ? ctx.frame->depth() : 0;
        observer_->on_step(event);
    }
    return status;
}

Frame& Interpreter::lexical_frame(Frame& frame, std::uint8_t context_level) const {
    Frame* target = &frame;
    for (std::uint8_t i = 0; i < context_level; ++i) target = target->lexical_outer;
    return *target;
}

Value Interpreter::resolve_global(const Frame& frame, const GlobalBinding& binding) const {
    using K = GlobalBinding::Kind;
    switch (binding.kind) {
    case K::Self: return frame.receiver;
    case K::True: return true;
    case K::False: return false;
    case K::Nil: return Nil{};
    case K::ClassRef: return binding.cls;
    case K::Unbound: break;
    }
    throw Error(ErrorKind::UnknownGlobal, "no global named " + binding.name);
}

namespace {

ObjectInstance& receiver_object(const Frame& frame) {
    if (auto* const* obj = std::get_if<ObjectInstance*>(&frame.receiver)) return **obj;
    throw Error(ErrorKind::FieldIndexOutOfRange, "receiver " + class_name_of(frame.receiver) + " has no fields");
}

}  // namespace

StepStatus Interpreter::execute(ExecutionContext& ctx, Frame& frame, const Instruction& ins, std::uint32_t next_pc) {
    const LoadedMethod& method = *frame.method;
    switch (ins.opcode) {
    case Opcode::Halt:
        ctx.halted = true;
        ctx.result = frame.depth() > 0 ? frame.top() : Value{Nil{}};
        frame.pc = next_pc;
        return StepStatus::Halted;
    case Opcode::Dup: frame.push(frame.top()); break;
    case Opcode::PushLocal: frame.push(lexical_frame(frame, ins.args[1]).load_local(ins.args[0])); break;
    case Opcode::PushArgument: frame.push(lexical_frame(frame, ins.args[1]).load_argument(ins.args[0])); break;
    case Opcode::PushField: frame.push(receiver_object(frame).load_field(ins.args[0])); break;
    case Opcode::PushBlock:
        frame.push(heap_.new_closure(*method.literals[ins.args[0]].block, frame));
        break;
    case Opcode::PushConstant: frame.push(method.literals[ins.args[0]].value); break;
    case Opcode::PushGlobal: frame.push(resolve_global(frame, method.literals[ins.args[0]].global)); break;
    case Opcode::Pop: frame.pop(); break;
    case Opcode::PopLocal: lexical_frame(frame, ins.args[1]).store_local(ins.args[0], frame.pop()); break;
    case Opcode::PopArgument: lexical_frame(frame, ins.args[1]).store_argument(ins.args[0], frame.pop()); break;
    case Opcode::PopField: {
        ObjectInstance& obj = receiver_object(frame);
        obj.store_field(ins.args[0], frame.top());
        frame.pop();
        break;
    }
    case Opcode::Send:
    case Opcode::SuperSend: {
        const SymbolInfo& selector = *std::get<Symbol>(method.literals[ins.args[0]].value).info;
        return send(ctx, frame, selector, ins.opcode == Opcode::SuperSend, next_pc);
    }
    case Opcode::ReturnLocal: {
        Value value = frame.pop();
        Frame* caller = frame.caller;
        heap_.kill_frame(frame);
        return return_to(ctx, caller, std::move(value));
    }
    case Opcode::ReturnNonLocal: return return_non_local(ctx, frame);
    default: return hooks_.execute_extension(*this, ctx, frame, ins, next_pc);
    }
    frame.pc = next_pc;
    return StepStatus::Continued;
}

StepStatus Interpreter::send(ExecutionContext& ctx, Frame& frame, const SymbolInfo& selector, bool super_send,
                             std::uint32_t next_pc) {
    const std::size_t base = frame.depth() - selector.arity - 1;
    const Value receiver = frame.stack[base];
    std::vector<Value> args(frame.stack.begin() + static_cast<std::ptrdiff_t>(base) + 1, frame.stack.end());

    if (const auto* remote = std::get_if<RemoteReference>(&receiver); remote != nullptr && !super_send) {
        frame.stack.resize(base);
        frame.pc = next_pc;
        return hooks_.send_remote(*this, ctx, frame, *remote, selector, std::move(args));
    }

    const LoadedMethod* target = nullptr;
    if (super_send) {
        if (const Class* start = frame.method->holder->superclass) {
            if (auto found = lookup(selector, *start)) target = found->method;
        }
    } else if (auto* const* obj = std::get_if<ObjectInstance*>(&receiver)) {
        if (auto found = lookup(selector, *(*obj)->cls)) target = found->method;
    }
    if (target != nullptr) {
        frame.stack.resize(base);
        frame.pc = next_pc;
        activate_method(ctx, receiver, *target, std::move(args));
        return StepStatus::Continued;
    }

    ContextHost host(*this, ctx);
    PrimitiveResult result = invoke_primitive(selector, receiver, args, *program_, host);
    if (std::holds_alternative<std::monostate>(result)) {
        throw Error(ErrorKind::DoesNotUnderstand, class_name_of(receiver) + " does not understand #" + selector.name);
    }
    if (auto* join = std::get_if<JoinThread>(&result)) {
        std::optional<Value> value = hooks_.join(ctx, join->thread);
        if (!value) return StepStatus::Retry;
        result = *value;
    }

    frame.stack.resize(base);
    frame.pc = next_pc;
    if (auto* value = std::get_if<Value>(&result)) {
        frame.push(*value);
        return StepStatus::Continued;
    }
    if (auto* activate = std::get_if<ActivateBlock>(&result)) {
        activate_block(ctx, *activate->block, std::move(activate->args));
        return StepStatus::Continued;
    }
    if (auto* loop = std::get_if<StartLoop>(&result)) {
        if (loop->condition->method->num_args != 0 || loop->body->method->num_args != 0) {
            throw Error(ErrorKind::BlockArityMismatch, "whileTrue: needs zero-argument blocks");
        }
        Frame* driver = heap_.new_frame(nullptr, FrameKind::Loop);
        driver->receiver = frame.receiver;
        driver->caller = &frame;
        driver->loop = LoopState{loop->condition, loop->body, false};
        ctx.frame = driver;
        activate_block(ctx, *loop->condition, {});
        return StepStatus::Continued;
    }
    auto& exit = std::get<ExitRequest>(result);
    frame.push(Nil{});
    return hooks_.exit(ctx, exit.code);
}

StepStatus Interpreter::return_to(ExecutionContext& ctx, Frame* target, Value value) {
    while (true) {
        if (target == nullptr) {
            ctx.frame = nullptr;
            ctx.finished = true;
            ctx.result = std::move(value);
            return StepStatus::Finished;
        }
        if (target->kind != FrameKind::Loop) {
            target->push(value);
            ctx.frame = target;
            return StepStatus::Continued;
        }
        LoopState& loop = target->loop;
        ctx.frame = target;
        if (loop.in_body) {
            loop.in_body = false;
            activate_block(ctx, *loop.condition, {});
            return StepStatus::Continued;
        }
        const auto* keep_going = std::get_if<bool>(&value);
        if (keep_going == nullptr) {
            throw Error(ErrorKind::PrimitiveTypeError,
                        "whileTrue: condition answered " + class_name_of(value) + ", expected Boolean");
        }
        if (*keep_going) {
            loop.in_body = true;
            activate_block(ctx, *loop.body, {});
            return StepStatus::Continued;
        }
        Frame* up = target->caller;
        heap_.kill_frame(*target);
        target = up;
        value = Nil{};
    }
}

StepStatus Interpreter::return_non_local(ExecutionContext& ctx, Frame& frame) {
    Frame* home = &frame;
    while (home->kind == FrameKind::Block) home = home->lexical_outer;

    // The home activation must still be on this context's call chain.
    Frame* probe = &frame;
    while (probe != nullptr && probe != home) probe = probe->caller;
    if (probe == nullptr) {
        throw Error(ErrorKind::EscapedBlock, "home context " + home->method->display_name() +
                                                 (home->alive ? " is not on this call chain" : " has already returned"));
    }

    Value value = frame.pop();
    Frame* target = home->caller;
    Frame* current = &frame;
    while (true) {
        Frame* up = current->caller;
        bool last = current == home;
        heap_.kill_frame(*current);
        if (last) break;
        current = up;
    }
    return return_to(ctx, target, std::move(value));
}

std::string Interpreter::backtrace_from(const Frame* frame, std::uint32_t top_offset) const {
    std::ostringstream out;
    bool first = true;
    int shown = 0;
    for (const Frame* p = frame; p != nullptr; p = p->caller) {
        if (++shown > 64) {
            out << "  ...\n";
            break;
        }
        if (p->kind == FrameKind::Loop) {
            out << "  in whileTrue: loop\n";
            continue;
        }
        // Callers are suspended just after a two-byte send.
        std::uint32_t offset = first ? top_offset : (p->pc >= 2 ? p->pc - 2 : 0);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04u", offset);
        out << "  at " << p->method->display_name() << " @" << buf << '\n';
        first = false;
    }
    return out.str();
}

std::string Interpreter::backtrace(const ExecutionContext& ctx) const {
    if (ctx.frame == nullptr) return {};
    return backtrace_from(ctx.frame, ctx.frame->pc);
}

}  // namespace cvm
