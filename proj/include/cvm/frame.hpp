#pragma once

#include "cvm/object_model.hpp"
#include "cvm/value.hpp"

#include <cassert>
#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

namespace cvm {

enum class FrameKind : std::uint8_t {
    Method,
    Block,
    /// Native continuation driving `whileTrue:`; never executes bytecode.
    Loop,
};

struct LoopState {
    BlockClosure* condition = nullptr;
    BlockClosure* body = nullptr;
    bool in_body = false;
};

/// Activation record. The operand stack belongs to the thread of control
/// running the frame; arguments and locals may be reached from blocks running
/// elsewhere, so those slots are accessed under a lock.
struct Frame {
    const LoadedMethod* method = nullptr;
    Value receiver;
    Frame* caller = nullptr;
    Frame* lexical_outer = nullptr;
    std::uint32_t pc = 0;
    FrameKind kind = FrameKind::Method;
    bool alive = true;
    /// A closure refers to this frame, so it must outlive its return.
    bool captured = false;
    /// Distinguishes successive activations that reuse the same storage.
    std::uint64_t activation = 0;
    LoopState loop;
    std::vector<Value> stack;

    void reset(const LoadedMethod* m, FrameKind k);

    std::size_t depth() const noexcept { return stack.size(); }
    void push(const Value& v) { stack.push_back(v); }
    Value pop() {
        assert(!stack.empty());
        Value v = stack.back();
        stack.pop_back();
        return v;
    }
    const Value& top() const {
        assert(!stack.empty());
        return stack.back();
    }

    std::size_t argument_count() const;
    std::size_t local_count() const;
    Value load_argument(std::size_t i) const;
    void store_argument(std::size_t i, const Value& v);
    Value load_local(std::size_t i) const;
    void store_local(std::size_t i, const Value& v);
    void set_slots(std::vector<Value> arguments, std::size_t num_locals);
    /// Arguments then locals, for heap walks.
    std::vector<Value> slot_snapshot() const;

private:
    mutable std::mutex slots_mutex_;
    std::vector<Value> arguments_;
    std::vector<Value> locals_;
};

/// One thread of control: a thread in threads mode, a coroutine in actors mode.
struct ExecutionContext {
    Frame* frame = nullptr;
    /// Instructions this context has executed.
    std::uint64_t steps = 0;
    bool halted = false;
    bool finished = false;
    Value result;
    std::optional<std::int64_t> exit_code;
    /// Thread id (threads mode) or actor id (actors mode).
    std::uint32_t id = 0;
    std::uint32_t coroutine = 0;
};

}  // namespace cvm
