#pragma once

#include "cvm/frame.hpp"
#include "cvm/object_model.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace cvm {

/// Owns every object, closure, runtime string and frame of one VM run.
/// There is no collector: storage is released when the heap is destroyed,
/// except frames that die uncaptured, which are recycled immediately.
/// Allocation is thread-safe.
class Heap {
public:
    Heap() = default;
    Heap(const Heap&) = delete;
    Heap& operator=(const Heap&) = delete;

    /// Fresh instance with every field and indexed slot nil.
    ObjectInstance* instantiate(const Class& cls, std::size_t indexed_size, std::optional<ActorId> owner);
    BlockClosure* new_closure(const LoadedMethod& method, Frame& home);
    String new_string(std::string text);

    Frame* new_frame(const LoadedMethod* method, FrameKind kind);
    /// Marks the frame dead; recycles it when no closure can reach it.
    void kill_frame(Frame& frame);

    std::size_t object_count() const;
    std::size_t live_frame_count() const;

private:
    mutable std::mutex mutex_;
    std::uint64_t next_object_id_ = 1;
    std::size_t live_frames_ = 0;
    std::deque<std::unique_ptr<ObjectInstance>> objects_;
    std::deque<BlockClosure> closures_;
    std::deque<std::string> strings_;
    std::deque<std::unique_ptr<Frame>> frames_;
    std::vector<Frame*> free_frames_;
};

}  // namespace cvm
