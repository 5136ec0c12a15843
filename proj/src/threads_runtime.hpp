#pragma once

#include "cvm/interpreter.hpp"
#include "cvm/runtime.hpp"

#include <condition_variable>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_set>
#include <vector>

namespace cvm::detail {

/// Threads mode: SPAWN, monitors, atomics and join, on either backend.
class ThreadsRuntime final : public RuntimeHooks {
public:
    ThreadsRuntime(std::shared_ptr<const Program> program, Heap& heap, const RunOptions& options, OutputSink& output,
                   StepObserver* observer);
    ~ThreadsRuntime() override;

    ExitReport run(std::vector<Value> entry_args);

    StepStatus execute_extension(Interpreter& interp, ExecutionContext& ctx, Frame& frame,
                                 const bytecode::Instruction& ins, std::uint32_t next_pc) override;
    std::optional<Value> join(ExecutionContext& ctx, ThreadHandle thread) override;
    StepStatus exit(ExecutionContext& ctx, std::int64_t code) override;

private:
    enum class State : std::uint8_t { Running, Waiting, BlockedOnLock, Reacquiring, Joining, Finished };

    struct VmThread {
        ThreadId id = 0;
        State state = State::Running;
        ExecutionContext ctx;
        /// Monitor wanted (BlockedOnLock, Reacquiring) or waited on (Waiting).
        ObjectInstance* blocked_on = nullptr;
        ThreadId joining = kNoThread;
        std::uint32_t reacquire_count = 0;
        std::vector<ObjectInstance*> held;
    };

    VmThread& spawn_locked(BlockClosure& block);
    VmThread& thread_locked(const ExecutionContext& ctx);
    bool can_proceed(const VmThread& t) const;
    void prepare(VmThread& t);
    bool all_finished() const;
    void note_monitor(ObjectInstance& obj);
    void check_monitors() const;
    std::string describe_stuck_threads() const;

    void run_virtual();
    void run_os();
    void os_thread_main(VmThread& t);

    std::shared_ptr<const Program> program_;
    Heap& heap_;
    const RunOptions& options_;
    Interpreter interp_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::vector<std::unique_ptr<VmThread>> threads_;
    std::vector<ObjectInstance*> monitors_;
    std::unordered_set<const ObjectInstance*> monitor_set_;
    VmThread* halted_by_ = nullptr;
    std::optional<std::int64_t> exit_code_;

    // os backend
    std::vector<std::thread> os_threads_;
    bool stop_ = false;
    std::size_t active_ = 0;
    std::exception_ptr error_;
};

}  // namespace cvm::detail
