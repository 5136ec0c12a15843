#include "cvm/heap.hpp"

namespace cvm {

ObjectInstance* Heap::instantiate(const Class& cls, std::size_t indexed_size, std::optional<ActorId> owner) {
    std::lock_guard lock(mutex_);
    objects_.push_back(std::make_unique<ObjectInstance>(next_object_id_++, cls, indexed_size, owner));
    return objects_.back().get();
}

BlockClosure* Heap::new_closure(const LoadedMethod& method, Frame& home) {
    std::lock_guard lock(mutex_);
    home.captured = true;
    closures_.push_back(BlockClosure{closures_.size() + 1, &method, &home});
    return &closures_.back();
}

String Heap::new_string(std::string text) {
    std::lock_guard lock(mutex_);
    strings_.push_back(std::move(text));
    return String{&strings_.back()};
}

Frame* Heap::new_frame(const LoadedMethod* method, FrameKind kind) {
    Frame* frame = nullptr;
    {
        std::lock_guard lock(mutex_);
        if (!free_frames_.empty()) {
            frame = free_frames_.back();
            free_frames_.pop_back();
        } else {
            frames_.push_back(std::make_unique<Frame>());
            frame = frames_.back().get();
        }
        ++live_frames_;
    }
    frame->reset(method, kind);
    return frame;
}

void Heap::kill_frame(Frame& frame) {
    frame.alive = false;
    frame.stack.clear();
    std::lock_guard lock(mutex_);
    --live_frames_;
    if (!frame.captured) free_frames_.push_back(&frame);
}

std::size_t Heap::object_count() const {
    std::lock_guard lock(mutex_);
    return objects_.size();
}

std::size_t Heap::live_frame_count() const {
    std::lock_guard lock(mutex_);
    return live_frames_;
}

}  // namespace cvm
