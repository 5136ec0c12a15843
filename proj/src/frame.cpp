#include "cvm/frame.hpp"

namespace cvm {

void Frame::reset(const LoadedMethod* m, FrameKind k) {
    method = m;
    receiver = Nil{};
    caller = nullptr;
    lexical_outer = nullptr;
    pc = 0;
    kind = k;
    alive = true;
    captured = false;
    ++activation;
    loop = {};
    stack.clear();
    if (m != nullptr) stack.reserve(m->max_stack);
    std::lock_guard lock(slots_mutex_);
    arguments_.clear();
    locals_.clear();
}

std::size_t Frame::argument_count() const {
    std::lock_guard lock(slots_mutex_);
    return arguments_.size();
}

std::size_t Frame::local_count() const {
    std::lock_guard lock(slots_mutex_);
    return locals_.size();
}

Value Frame::load_argument(std::size_t i) const {
    std::lock_guard lock(slots_mutex_);
    return arguments_.at(i);
}

void Frame::store_argument(std::size_t i, const Value& v) {
    std::lock_guard lock(slots_mutex_);
    arguments_.at(i) = v;
}

Value Frame::load_local(std::size_t i) const {
    std::lock_guard lock(slots_mutex_);
    return locals_.at(i);
}

void Frame::store_local(std::size_t i, const Value& v) {
    std::lock_guard lock(slots_mutex_);
    locals_.at(i) = v;
}

void Frame::set_slots(std::vector<Value> arguments, std::size_t num_locals) {
    std::lock_guard lock(slots_mutex_);
    arguments_ = std::move(arguments);
    locals_.assign(num_locals, Nil{});
}

std::vector<Value> Frame::slot_snapshot() const {
    std::lock_guard lock(slots_mutex_);
    std::vector<Value> out = arguments_;
    out.insert(out.end(), locals_.begin(), locals_.end());
    return out;
}

}  // namespace cvm
