#pragma once

#include "cvm/interpreter.hpp"
#include "cvm/runtime.hpp"

#include <deque>
#include <map>
#include <memory>
#include <random>
#include <unordered_map>
#include <vector>

namespace cvm::detail {

/// Actors mode on the virtual backend: vats with private heaps and message
/// queues, coroutines inside each vat, and seeded round-robin over vats.
class ActorsRuntime final : public RuntimeHooks {
public:
    ActorsRuntime(std::shared_ptr<const Program> program, Heap& heap, const RunOptions& options, OutputSink& output,
                  StepObserver* observer);

    ExitReport run(std::vector<Value> entry_args);

    std::optional<ActorId> owner_for(const ExecutionContext& ctx) const override;
    StepStatus execute_extension(Interpreter& interp, ExecutionContext& ctx, Frame& frame,
                                 const bytecode::Instruction& ins, std::uint32_t next_pc) override;
    StepStatus send_remote(Interpreter& interp, ExecutionContext& ctx, Frame& frame, RemoteReference target,
                           const SymbolInfo& selector, std::vector<Value> args) override;
    StepStatus exit(ExecutionContext& ctx, std::int64_t code) override;

private:
    struct ReplyTo {
        ActorId actor = 0;
        std::uint32_t coroutine = 0;
        std::uint64_t request = 0;
    };

    struct Message {
        enum class Kind : std::uint8_t { SyncRequest, Async, Reply } kind = Kind::Async;
        const SymbolInfo* selector = nullptr;
        std::uint64_t target = 0;
        std::vector<Value> args;  // marshalled
        ReplyTo reply_to;         // requests: where the reply goes; replies: who waits
        Value payload;            // replies, marshalled
        std::string error;        // replies: non-empty when the request failed
    };

    struct Coroutine {
        std::uint32_t id = 0;
        ExecutionContext ctx;
        bool awaiting = false;
        std::uint64_t awaiting_request = 0;
        std::optional<ReplyTo> servicing;
        std::string pending_error;
    };

    struct Actor {
        ActorId id = 0;
        std::unordered_map<std::uint64_t, ObjectInstance*> exports;
        std::deque<Message> queue;
        std::map<std::uint32_t, std::unique_ptr<Coroutine>> coroutines;
        std::deque<Coroutine*> runnable;
        Coroutine* current = nullptr;
        std::uint32_t next_coroutine = 0;
        bool terminated = false;
    };

    Actor& actor_of(const ExecutionContext& ctx);
    Coroutine& coroutine_of(const ExecutionContext& ctx);
    Actor& create_actor();

    Value marshal(const Value& value, Actor& sender);
    Value unmarshal(const Value& value, Actor& receiver);
    void enqueue(ActorId target, Message message, Actor& sender);
    void send_reply(const ReplyTo& to, Value payload, std::string error);

    const LoadedMethod& trampoline(const SymbolInfo& selector, bool sync);
    Coroutine& start_coroutine(Actor& actor, Message message);
    /// Handles the next queued message. Returns the coroutine it started, if any.
    Coroutine* dequeue(Actor& actor);
    bool has_work(const Actor& actor) const;
    void run_turn(Actor& actor);
    void finish_coroutine(Actor& actor, Coroutine& co);
    void terminate(Actor& actor);
    void check_isolation() const;
    std::string describe_stuck() const;

    std::shared_ptr<const Program> program_;
    Heap& heap_;
    const RunOptions& options_;
    Interpreter interp_;
    std::mt19937_64 rng_;

    std::vector<std::unique_ptr<Actor>> actors_;
    std::vector<ActorId> ring_;
    std::uint64_t next_request_ = 1;
    Coroutine* main_ = nullptr;
    bool main_finished_ = false;
    bool halted_ = false;
    ExecutionContext* halted_by_ = nullptr;

    Class message_class_;
    std::map<std::pair<const SymbolInfo*, bool>, std::unique_ptr<LoadedMethod>> trampolines_;
    std::deque<std::vector<std::uint8_t>> trampoline_code_;

    ExitReport stats_;
};

}  // namespace cvm::detail
