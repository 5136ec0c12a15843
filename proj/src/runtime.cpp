#include "cvm/runtime.hpp"

#include "actors_runtime.hpp"
#include "threads_runtime.hpp"

#include <iostream>
#include <stdexcept>

namespace cvm {

namespace {

class FanOut final : public StepObserver {
public:
    void add(StepObserver* observer) {
        if (observer != nullptr) observers_.push_back(observer);
    }
    StepObserver* get() {
        if (observers_.empty()) return nullptr;
        if (observers_.size() == 1) return observers_.front();
        return this;
    }
    void on_step(const StepEvent& event) override {
        for (auto* observer : observers_) observer->on_step(event);
    }

private:
    std::vector<StepObserver*> observers_;
};

}  // namespace

Vm::Vm(std::shared_ptr<const Program> program, RunOptions options)
    : program_(std::move(program)), options_(options) {
    if (options_.out == nullptr) options_.out = &std::cout;
    if (options_.diagnostics == nullptr) options_.diagnostics = &std::cerr;
}

Vm::~Vm() = default;

ExitReport Vm::run(std::vector<Value> entry_args) {
    if (ran_) throw std::logic_error("Vm::run may be called once");
    ran_ = true;

    const bytecode::Mode mode = program_->mode();
    if (mode == bytecode::Mode::Actors && options_.backend == Backend::Os) {
        throw std::invalid_argument("actors mode runs on the virtual backend only");
    }

    OutputSink output(*options_.out);
    std::optional<TraceWriter> trace;
    FanOut fan_out;
    if (options_.trace != nullptr) {
        trace.emplace(*options_.trace, mode);
        fan_out.add(&*trace);
    }
    fan_out.add(options_.observer);

    if (mode == bytecode::Mode::Actors) {
        detail::ActorsRuntime runtime(program_, heap_, options_, output, fan_out.get());
        return runtime.run(std::move(entry_args));
    }
    detail::ThreadsRuntime runtime(program_, heap_, options_, output, fan_out.get());
    return runtime.run(std::move(entry_args));
}

}  // namespace cvm
