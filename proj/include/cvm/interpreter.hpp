#pragma once
//
// The base-instruction interpreter. It executes one instruction per step()
// over an ExecutionContext and delegates everything mode-specific (extension
// opcodes, remote sends, joins, object ownership) to a RuntimeHooks object.

#include "cvm/bytecode.hpp"
#include "cvm/frame.hpp"
#include "cvm/heap.hpp"
#include "cvm/object_model.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace cvm {

enum class StepStatus : std::uint8_t {
    Continued,
    Halted,
    /// YIELD executed.
    Yielded,
    /// The instruction executed and left the context suspended (WAIT, remote send).
    Blocked,
    /// The bottom frame returned; ExecutionContext::result holds the value.
    Finished,
    /// Nothing executed; the same instruction runs again once the context can
    /// proceed (contended LOCK, join on a running thread).
    Retry,
};

std::string_view step_status_name(StepStatus status) noexcept;

struct StepEvent {
    std::uint64_t step = 0;
    const ExecutionContext* context = nullptr;
    const LoadedMethod* method = nullptr;
    std::uint32_t offset = 0;
    bytecode::Opcode opcode = bytecode::Opcode::Halt;
    StepStatus status = StepStatus::Continued;
    /// Operand stack of the executing frame before the instruction.
    std::size_t depth_before = 0;
    std::optional<Value> top_before;
    /// Same frame after the instruction, when it is still the same live activation.
    std::optional<std::size_t> frame_depth_after;
    std::optional<Value> frame_top_after;
    /// Depth of whichever frame is active after the step (0 if none).
    std::size_t depth_after = 0;
};

/// Called after every executed instruction. Implementations used with the OS
/// backend must be thread-safe.
class StepObserver {
public:
    virtual ~StepObserver() = default;
    virtual void on_step(const StepEvent& event) = 0;
};

/// Writes the tab-separated trace: step, thread (or actor, coroutine),
/// byte offset, mnemonic, stack depth after.
class TraceWriter final : public StepObserver {
public:
    TraceWriter(std::ostream& out, bytecode::Mode mode) : out_(out), mode_(mode) {}
    void on_step(const StepEvent& event) override;

private:
    std::mutex mutex_;
    std::ostream& out_;
    bytecode::Mode mode_;
};

/// Program output (System print: and friends). Thread-safe.
class OutputSink {
public:
    explicit OutputSink(std::ostream& out) : out_(out) {}
    void write(std::string_view text);

private:
    std::mutex mutex_;
    std::ostream& out_;
};

class Interpreter;

class RuntimeHooks {
public:
    virtual ~RuntimeHooks() = default;

    /// Owner recorded on objects created by this context (actors mode).
    virtual std::optional<ActorId> owner_for(const ExecutionContext& ctx) const;

    /// Executes an opcode >= 16. Only reached for opcodes legal in the
    /// program's mode; the default rejects them all.
    virtual StepStatus execute_extension(Interpreter& interp, ExecutionContext& ctx, Frame& frame,
                                         const bytecode::Instruction& ins, std::uint32_t next_pc);

    /// SEND whose receiver is a RemoteReference. Receiver and arguments have
    /// already been popped and the pc advanced.
    virtual StepStatus send_remote(Interpreter& interp, ExecutionContext& ctx, Frame& frame, RemoteReference target,
                                   const SymbolInfo& selector, std::vector<Value> args);

    /// `thread join`; nullopt while the thread is still running.
    virtual std::optional<Value> join(ExecutionContext& ctx, ThreadHandle thread);

    /// `System exit: code`. The default halts this context.
    virtual StepStatus exit(ExecutionContext& ctx, std::int64_t code);
};

class Interpreter {
public:
    Interpreter(std::shared_ptr<const Program> program, Heap& heap, RuntimeHooks& hooks, OutputSink& output);

    const Program& program() const noexcept { return *program_; }
    Heap& heap() noexcept { return heap_; }
    RuntimeHooks& hooks() noexcept { return hooks_; }

    void set_observer(StepObserver* observer) noexcept { observer_ = observer; }
    /// 0 disables the limit. Counted across every context run by this interpreter.
    void set_step_limit(std::uint64_t limit) noexcept { step_limit_ = limit; }
    std::uint64_t total_steps() const noexcept { return steps_.load(std::memory_order_relaxed); }

    /// Pushes an activation of `method` whose caller is the context's current frame.
    Frame& activate_method(ExecutionContext& ctx, const Value& receiver, const LoadedMethod& method,
                           std::vector<Value> args);
    /// Pushes an activation of `block`. Throws BlockArityMismatch.
    Frame& activate_block(ExecutionContext& ctx, BlockClosure& block, std::vector<Value> args);

    /// Executes exactly one instruction of the context's current frame.
    /// Runtime errors surface as TrapError carrying the bytecode backtrace.
    StepStatus step(ExecutionContext& ctx);

    std::string backtrace(const ExecutionContext& ctx) const;

    /// Pushes `value` as the result the current frame was waiting for.
    void resume_with(ExecutionContext& ctx, const Value& value);

    /// Creates an instance owned according to the hooks.
    ObjectInstance* instantiate(const ExecutionContext& ctx, const Class& cls, std::size_t indexed_size);

private:
    friend class ContextHost;

    StepStatus execute(ExecutionContext& ctx, Frame& frame, const bytecode::Instruction& ins, std::uint32_t next_pc);
    StepStatus send(ExecutionContext& ctx, Frame& frame, const SymbolInfo& selector, bool super_send,
                    std::uint32_t next_pc);
    StepStatus return_to(ExecutionContext& ctx, Frame* target, Value value);
    StepStatus return_non_local(ExecutionContext& ctx, Frame& frame);
    Frame& lexical_frame(Frame& frame, std::uint8_t context_level) const;
    Value resolve_global(const Frame& frame, const GlobalBinding& binding) const;
    std::string backtrace_from(const Frame* frame, std::uint32_t top_offset) const;

    std::shared_ptr<const Program> program_;
    Heap& heap_;
    RuntimeHooks& hooks_;
    OutputSink& output_;
    StepObserver* observer_ = nullptr;
    std::uint64_t step_limit_ = 0;
    std::atomic<std::uint64_t> steps_{0};
};

}  // namespace cvm
