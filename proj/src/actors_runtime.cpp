#include "actors_runtime.hpp"

#include "cvm/error.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace cvm::detail {

using bytecode::Opcode;

ActorsRuntime::ActorsRuntime(std::shared_ptr<const Program> program, Heap& heap, const RunOptions& options,
                             OutputSink& output, StepObserver* observer)
    : program_(program),
      heap_(heap),
      options_(options),
      interp_(std::move(program), heap, *this, output),
      rng_(options.seed) {
    interp_.set_observer(observer);
    interp_.set_step_limit(options.max_steps);
    message_class_.name = "Message";
    message_class_.superclass = &program_->object_class();
    message_class_.abstract = true;
}

ActorsRuntime::Actor& ActorsRuntime::actor_of(const ExecutionContext& ctx) { return *actors_.at(ctx.id); }

ActorsRuntime::Coroutine& ActorsRuntime::coroutine_of(const ExecutionContext& ctx) {
    return *actor_of(ctx).coroutines.at(ctx.coroutine);
}

std::optional<ActorId> ActorsRuntime::owner_for(const ExecutionContext& ctx) const { return ctx.id; }

ActorsRuntime::Actor& ActorsRuntime::create_actor() {
    auto actor = std::make_unique<Actor>();
    actor->id = static_cast<ActorId>(actors_.size());
    Actor& ref = *actor;
    actors_.push_back(std::move(actor));
    // The seed decides where in the round-robin ring a new actor lands.
    auto position = static_cast<std::ptrdiff_t>(rng_() % (ring_.size() + 1));
    ring_.insert(ring_.begin() + position, ref.id);
    return ref;
}

// ---------------------------------------------------------------------------
// Marshalling

Value ActorsRuntime::marshal(const Value& value, Actor& sender) {
    if (auto* const* obj = std::get_if<ObjectInstance*>(&value)) {
        if ((*obj)->owner != sender.id) {
            throw Error(ErrorKind::InvariantViolation, "actor " + std::to_string(sender.id) + " holds object " +
                                                           std::to_string((*obj)->id) + " owned by another actor");
        }
        sender.exports[(*obj)->id] = *obj;
        return RemoteReference{sender.id, (*obj)->id};
    }
    if (std::holds_alternative<BlockClosure*>(value)) {
        throw Error(ErrorKind::BlockNotSendable, "blocks cannot be sent to another actor");
    }
    return value;
}

Value ActorsRuntime::unmarshal(const Value& value, Actor& receiver) {
    if (const auto* ref = std::get_if<RemoteReference>(&value); ref != nullptr && ref->actor == receiver.id) {
        auto it = receiver.exports.find(ref->object);
        if (it == receiver.exports.end()) {
            throw Error(ErrorKind::InvariantViolation, "actor " + std::to_string(receiver.id) +
                                                           " received a reference to unknown object " +
                                                           std::to_string(ref->object));
        }
        return it->second;
    }
    return value;
}

void ActorsRuntime::enqueue(ActorId target, Message message, Actor& sender) {
    Actor& to = *actors_.at(target);
    if (to.terminated) {
        ++stats_.messages_dropped;
        if (options_.diagnostics != nullptr) {
            *options_.diagnostics << "warning: actor " << sender.id << " sent #"
                                  << (message.selector != nullptr ? message.selector->name : std::string("?"))
                                  << " to terminated actor " << target << "; message dropped\n";
        }
        return;
    }
    to.queue.push_back(std::move(message));
}

void ActorsRuntime::send_reply(const ReplyTo& to, Value payload, std::string error) {
    Actor& requester = *actors_.at(to.actor);
    if (requester.terminated) {
        ++stats_.messages_dropped;
        return;
    }
    Message reply;
    reply.kind = Message::Kind::Reply;
    reply.reply_to = to;
    reply.payload = std::move(payload);
    reply.error = std::move(error);
    requester.queue.push_back(std::move(reply));
}

// ---------------------------------------------------------------------------
// Coroutines

const LoadedMethod& ActorsRuntime::trampoline(const SymbolInfo& selector, bool sync) {
    auto key = std::make_pair(&selector, sync);
    auto it = trampolines_.find(key);
    if (it != trampolines_.end()) return *it->second;

    // A servicing coroutine starts with [receiver args...] on the stack and
    // performs the send itself, so the request shows up in traces.
    auto& code = trampoline_code_.emplace_back(std::vector<std::uint8_t>{
        static_cast<std::uint8_t>(Opcode::Send), 0,
        static_cast<std::uint8_t>(sync ? Opcode::ReturnRemote : Opcode::ReturnLocal)});
    auto method = std::make_unique<LoadedMethod>();
    method->selector = &selector;
    method->holder = &message_class_;
    method->code = code;
    method->max_stack = selector.arity + 1U;
    RuntimeLiteral literal;
    literal.kind = RuntimeLiteral::Kind::Selector;
    literal.value = Symbol{&selector};
    method->literals.push_back(std::move(literal));
    const LoadedMethod& ref = *method;
    trampolines_.emplace(key, std::move(method));
    return ref;
}

ActorsRuntime::Coroutine& ActorsRuntime::start_coroutine(Actor& actor, Message message) {
    bool sync = message.kind == Message::Kind::SyncRequest;
    auto co = std::make_unique<Coroutine>();
    co->id = actor.next_coroutine++;
    co->ctx.id = actor.id;
    co->ctx.coroutine = co->id;
    if (sync) co->servicing = message.reply_to;

    Frame* frame = heap_.new_frame(&trampoline(*message.selector, sync), FrameKind::Method);
    frame->set_slots({}, 0);
    frame->push(actor.exports.at(message.target));
    for (const auto& arg : message.args) frame->push(unmarshal(arg, actor));
    co->ctx.frame = frame;

    Coroutine& ref = *co;
    actor.coroutines.emplace(ref.id, std::move(co));
    actor.runnable.push_back(&ref);
    return ref;
}

ActorsRuntime::Coroutine* ActorsRuntime::dequeue(Actor& actor) {
    Message message = std::move(actor.queue.front());
    actor.queue.pop_front();

    if (message.kind == Message::Kind::Reply) {
        auto it = actor.coroutines.find(message.reply_to.coroutine);
        if (it == actor.coroutines.end() || !it->second->awaiting ||
            it->second->awaiting_request != message.reply_to.request) {
            throw Error(ErrorKind::InvariantViolation, "reply to request " + std::to_string(message.reply_to.request) +
                                                           " has no awaiting coroutine in actor " +
                                                           std::to_string(actor.id));
        }
        Coroutine& co = *it->second;
        co.awaiting = false;
        ++stats_.replies_consumed;
        if (message.error.empty()) {
            interp_.resume_with(co.ctx, unmarshal(message.payload, actor));
        } else {
            co.pending_error = message.error;
        }
        actor.runnable.push_back(&co);
        return nullptr;
    }

    if (actor.exports.find(message.target) == actor.exports.end()) {
        if (message.kind == Message::Kind::SyncRequest) {
            send_reply(message.reply_to, Nil{}, "actor " + std::to_string(actor.id) + " has no object " +
                                                    std::to_string(message.target));
        }
        return nullptr;
    }
    return &start_coroutine(actor, std::move(message));
}

bool ActorsRuntime::has_work(const Actor& actor) const {
    if (actor.terminated) return false;
    return actor.current != nullptr || !actor.runnable.empty() || !actor.queue.empty();
}

void ActorsRuntime::finish_coroutine(Actor& actor, Coroutine& co) {
    if (co.servicing) {
        send_reply(*co.servicing, Nil{}, "request was abandoned without a reply");
        co.servicing.reset();
    }
    if (&co == main_) {
        main_finished_ = true;
        return;
    }
    actor.coroutines.erase(co.id);
}

void ActorsRuntime::terminate(Actor& actor) {
    actor.terminated = true;
    std::string reason = "actor " + std::to_string(actor.id) + " has terminated";
    for (auto& message : actor.queue) {
        if (message.kind == Message::Kind::SyncRequest) {
            send_reply(message.reply_to, Nil{}, reason);
        } else if (message.kind == Message::Kind::Async) {
            ++stats_.messages_dropped;
        }
    }
    actor.queue.clear();
    for (auto& [id, co] : actor.coroutines) {
        if (co->servicing) {
            send_reply(*co->servicing, Nil{}, reason);
            co->servicing.reset();
        }
    }
    actor.runnable.clear();
    actor.current = nullptr;
}

void ActorsRuntime::run_turn(Actor& actor) {
    const std::uint32_t quantum = std::max<std::uint32_t>(1, options_.preempt_every);
    std::uint32_t steps = 0;
    while (steps < quantum && !halted_ && !actor.terminated) {
        Coroutine* co = actor.current;
        if (co == nullptr) {
            if (!actor.runnable.empty()) {
                co = actor.runnable.front();
                actor.runnable.pop_front();
            } else if (!actor.queue.empty()) {
                dequeue(actor);
                continue;
            } else {
                break;
            }
            actor.current = co;
        }
        if (!co->pending_error.empty()) {
            throw TrapError(ErrorKind::DanglingRemote, co->pending_error, interp_.backtrace(co->ctx));
        }

        StepStatus status = interp_.step(co->ctx);
        ++steps;
        if (options_.check_invariants) check_isolation();

        switch (status) {
        case StepStatus::Yielded:
            if (actor.runnable.empty() && !actor.queue.empty()) dequeue(actor);
            if (!actor.runnable.empty()) {
                actor.runnable.push_back(co);
                actor.current = nullptr;
            }
            break;
        case StepStatus::Blocked: actor.current = nullptr; break;
        case StepStatus::Finished:
            actor.current = nullptr;
            finish_coroutine(actor, *co);
            break;
        case StepStatus::Halted:
            if (actor.terminated) {
                actor.coroutines.clear();
                return;
            }
            halted_ = true;
            halted_by_ = &co->ctx;
            return;
        default: break;
        }
    }
}

// ---------------------------------------------------------------------------
// Instructions

StepStatus ActorsRuntime::send_remote(Interpreter&, ExecutionContext& ctx, Frame&, RemoteReference target,
                                      const SymbolInfo& selector, std::vector<Value> args) {
    Actor& self = actor_of(ctx);
    Coroutine& co = coroutine_of(ctx);
    if (target.actor == self.id || target.actor >= actors_.size()) {
        throw Error(ErrorKind::InvariantViolation, "remote reference " + display_string(target) +
                                                       " does not name another actor");
    }
    Message request;
    request.kind = Message::Kind::SyncRequest;
    request.selector = &selector;
    request.target = target.object;
    for (const auto& arg : args) request.args.push_back(marshal(arg, self));
    request.reply_to = ReplyTo{self.id, co.id, next_request_++};
    ++stats_.sync_requests;

    Actor& receiver = *actors_[target.actor];
    if (receiver.terminated) {
        co.pending_error = "actor " + std::to_string(receiver.id) + " has terminated";
        self.runnable.push_back(&co);
        return StepStatus::Blocked;
    }
    co.awaiting = true;
    co.awaiting_request = request.reply_to.request;
    enqueue(receiver.id, std::move(request), self);
    return StepStatus::Blocked;
}

StepStatus ActorsRuntime::execute_extension(Interpreter& interp, ExecutionContext& ctx, Frame& frame,
                                            const bytecode::Instruction& ins, std::uint32_t next_pc) {
    switch (ins.opcode) {
    case Opcode::SendAsync: {
        const SymbolInfo& selector = *std::get<Symbol>(frame.method->literals[ins.args[0]].value).info;
        const std::size_t base = frame.depth() - selector.arity - 1;
        Value receiver = frame.stack[base];
        std::vector<Value> args(frame.stack.begin() + static_cast<std::ptrdiff_t>(base) + 1, frame.stack.end());
        Actor& self = actor_of(ctx);

        Message message;
        message.kind = Message::Kind::Async;
        message.selector = &selector;
        ActorId target_actor = self.id;
        if (const auto* remote = std::get_if<RemoteReference>(&receiver)) {
            target_actor = remote->actor;
            message.target = remote->object;
        } else if (std::holds_alternative<ObjectInstance*>(receiver)) {
            message.target = std::get<RemoteReference>(marshal(receiver, self)).object;
        } else {
            throw Error(ErrorKind::PrimitiveTypeError,
                        "SEND_ASYNC needs an object receiver, got " + class_name_of(receiver));
        }
        for (const auto& arg : args) message.args.push_back(marshal(arg, self));
        frame.stack.resize(base);
        enqueue(target_actor, std::move(message), self);
        frame.push(Nil{});
        break;
    }
    case Opcode::ReturnRemote: {
        Coroutine& co = coroutine_of(ctx);
        if (!co.servicing) {
            throw Error(ErrorKind::NoPendingRequest, "RETURN_REMOTE outside a synchronous request");
        }
        Value value = frame.pop();
        Value payload = marshal(value, actor_of(ctx));
        ReplyTo to = *co.servicing;
        co.servicing.reset();
        for (Frame* f = ctx.frame; f != nullptr;) {
            Frame* up = f->caller;
            heap_.kill_frame(*f);
            f = up;
        }
        ctx.frame = nullptr;
        ctx.finished = true;
        ctx.result = value;
        send_reply(to, std::move(payload), {});
        return StepStatus::Finished;
    }
    case Opcode::Yield: frame.pc = next_pc; return StepStatus::Yielded;
    case Opcode::SpawnActor: {
        const GlobalBinding& binding = frame.method->literals[ins.args[0]].global;
        if (binding.kind != GlobalBinding::Kind::ClassRef || binding.cls->abstract) {
            throw Error(ErrorKind::UnknownClass, "SPAWN_ACTOR needs an instantiable class, got " + binding.name);
        }
        Actor& actor = create_actor();
        ObjectInstance* obj = heap_.instantiate(*binding.cls, 0, actor.id);
        actor.exports[obj->id] = obj;
        frame.push(RemoteReference{actor.id, obj->id});
        break;
    }
    case Opcode::Spawn:
    case Opcode::Lock:
    case Opcode::Unlock:
    case Opcode::Wait:
    case Opcode::Notify:
    case Opcode::XaddField:
    case Opcode::CasField:
        throw Error(ErrorKind::InvariantViolation,
                    std::string(bytecode::opcode_info(ins.opcode).mnemonic) + " executed in actors mode");
    default: return RuntimeHooks::execute_extension(interp, ctx, frame, ins, next_pc);
    }
    frame.pc = next_pc;
    return StepStatus::Continued;
}

StepStatus ActorsRuntime::exit(ExecutionContext& ctx, std::int64_t code) {
    Actor& actor = actor_of(ctx);
    if (actor.id == 0) return RuntimeHooks::exit(ctx, code);
    terminate(actor);
    return StepStatus::Halted;
}

// ---------------------------------------------------------------------------
// Isolation

void ActorsRuntime::check_isolation() const {
    ++const_cast<ExitReport&>(stats_).invariant_checks;
    for (const auto& actor : actors_) {
        std::unordered_set<const ObjectInstance*> seen_objects;
        std::unordered_set<const Frame*> seen_frames;
        std::vector<Value> pending;
        std::vector<const Frame*> frames;

        auto breach = [&](const std::string& what) {
            throw Error(ErrorKind::InvariantViolation, "isolation: actor " + std::to_string(actor->id) + " " + what);
        };
        for (const auto& [id, obj] : actor->exports) pending.emplace_back(obj);
        for (const auto& [id, co] : actor->coroutines) {
            if (co->ctx.frame != nullptr) frames.push_back(co->ctx.frame);
            pending.push_back(co->ctx.result);
        }
        for (const auto& message : actor->queue) {
            for (const auto& v : message.args) {
                if (std::holds_alternative<ObjectInstance*>(v) || std::holds_alternative<BlockClosure*>(v)) {
                    breach("has an unmarshalled value queued");
                }
            }
            if (std::holds_alternative<ObjectInstance*>(message.payload) ||
                std::holds_alternative<BlockClosure*>(message.payload)) {
                breach("has an unmarshalled reply queued");
            }
        }

        while (!pending.empty() || !frames.empty()) {
            if (!frames.empty()) {
                const Frame* f = frames.back();
                frames.pop_back();
                if (f == nullptr || !seen_frames.insert(f).second) continue;
                pending.push_back(f->receiver);
                for (const auto& v : f->stack) pending.push_back(v);
                for (const auto& v : f->slot_snapshot()) pending.push_back(v);
                if (f->kind == FrameKind::Loop) {
                    pending.emplace_back(f->loop.condition);
                    pending.emplace_back(f->loop.body);
                }
                frames.push_back(f->caller);
                frames.push_back(f->lexical_outer);
                continue;
            }
            Value v = pending.back();
            pending.pop_back();
            if (auto* const* obj = std::get_if<ObjectInstance*>(&v)) {
                if (!seen_objects.insert(*obj).second) continue;
                if ((*obj)->owner != actor->id) {
                    breach("reaches object " + std::to_string((*obj)->id) + " owned by actor " +
                           ((*obj)->owner ? std::to_string(*(*obj)->owner) : std::string("none")));
                }
                for (const auto& slot : (*obj)->snapshot()) pending.push_back(slot);
            } else if (auto* const* block = std::get_if<BlockClosure*>(&v)) {
                if (*block != nullptr) frames.push_back((*block)->home);
            } else if (const auto* ref = std::get_if<RemoteReference>(&v)) {
                if (ref->actor == actor->id) breach("holds a remote reference to its own object " + display_string(v));
            }
        }
    }
}

std::string ActorsRuntime::describe_stuck() const {
    std::ostringstream out;
    out << "no actor can make progress";
    if (!main_finished_) out << " before the entry method returned";
    for (const auto& actor : actors_) {
        for (const auto& [id, co] : actor->coroutines) {
            if (co->awaiting) {
                out << "; actor " << actor->id << " coroutine " << id << " awaits reply to request "
                    << co->awaiting_request;
            }
        }
    }
    return out.str();
}

ExitReport ActorsRuntime::run(std::vector<Value> entry_args) {
    const LoadedMethod& entry = program_->entry_method();
    if (entry_args.size() != entry.num_args) {
        throw std::invalid_argument("entry method " + entry.display_name() + " takes " +
                                    std::to_string(entry.num_args) + " arguments, got " +
                                    std::to_string(entry_args.size()));
    }
    Actor& main_actor = create_actor();
    auto co = std::make_unique<Coroutine>();
    co->id = main_actor.next_coroutine++;
    co->ctx.id = main_actor.id;
    co->ctx.coroutine = co->id;
    main_ = co.get();
    ObjectInstance* receiver = heap_.instantiate(program_->entry_class(), 0, main_actor.id);
    interp_.activate_method(co->ctx, receiver, entry, std::move(entry_args));
    main_actor.coroutines.emplace(co->id, std::move(co));
    main_actor.runnable.push_back(main_);

    std::size_t cursor = 0;
    while (!halted_) {
        bool ran = false;
        for (std::size_t k = 0; k < ring_.size(); ++k) {
            std::size_t position = (cursor + k) % ring_.size();
            Actor& actor = *actors_[ring_[position]];
            if (!has_work(actor)) continue;
            run_turn(actor);
            cursor = position + 1;
            ran = true;
            break;
        }
        if (!ran) break;
    }

    if (!halted_) {
        bool awaiting = std::any_of(actors_.begin(), actors_.end(), [](const auto& actor) {
            return std::any_of(actor->coroutines.begin(), actor->coroutines.end(),
                               [](const auto& entry) { return entry.second->awaiting; });
        });
        if (!main_finished_ || awaiting) throw Error(ErrorKind::Deadlock, describe_stuck());
    }

    ExitReport report = stats_;
    const ExecutionContext& source = halted_by_ != nullptr ? *halted_by_ : main_->ctx;
    report.result = source.result;
    report.result_text = display_string(report.result);
    report.exit_code = source.exit_code;
    report.steps = interp_.total_steps();
    return report;
}

}  // namespace cvm::detail
