#pragma once
//
// Running a loaded program: picks the threads or actors runtime from the
// program's mode and drives it to completion.

#include "cvm/heap.hpp"
#include "cvm/interpreter.hpp"
#include "cvm/object_model.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cvm {

enum class Backend : std::uint8_t {
    /// Deterministic: one OS thread, seeded interleaving.
    Virtual,
    /// One OS thread per VM thread (threads mode only).
    Os,
};

struct RunOptions {
    Backend backend = Backend::Virtual;
    std::uint64_t seed = 0;
    /// Instructions between scheduling decisions (virtual backend).
    std::uint32_t preempt_every = 1;
    /// 0 means unlimited.
    std::uint64_t max_steps = 0;
    /// Program output; defaults to std::cout.
    std::ostream* out = nullptr;
    /// When set, one trace line per step.
    std::ostream* trace = nullptr;
    /// Warnings; defaults to std::cerr.
    std::ostream* diagnostics = nullptr;
    StepObserver* observer = nullptr;
    /// Check monitor safety (threads) or actor isolation (actors) after every step.
    bool check_invariants = false;
};

struct ExitReport {
    /// The entry method's result, or the value on top of the stack at HALT.
    Value result;
    std::string result_text;
    std::uint64_t steps = 0;
    /// Set when the program called `System exit:`.
    std::optional<std::int64_t> exit_code;

    // actors mode bookkeeping
    std::uint64_t sync_requests = 0;
    std::uint64_t replies_consumed = 0;
    std::uint64_t messages_dropped = 0;
    /// Heap walks performed by invariant checking.
    std::uint64_t invariant_checks = 0;
};

/// Owns the heap of one run, so values in the report stay valid while the
/// Vm exists.
class Vm {
public:
    Vm(std::shared_ptr<const Program> program, RunOptions options);
    ~Vm();
    Vm(const Vm&) = delete;
    Vm& operator=(const Vm&) = delete;

    /// Runs the entry method on a fresh instance of the entry class.
    /// Throws TrapError for runtime traps, Error(Deadlock),
    /// Error(StepLimitExceeded), and std::invalid_argument for options the
    /// program's mode does not support. May be called once.
    ExitReport run(std::vector<Value> entry_args = {});

    Heap& heap() noexcept { return heap_; }
    const Program& program() const noexcept { return *program_; }

private:
    std::shared_ptr<const Program> program_;
    RunOptions options_;
    Heap heap_;
    bool ran_ = false;
};

}  // namespace cvm
