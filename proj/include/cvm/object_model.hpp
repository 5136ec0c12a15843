#pragma once
//
// Runtime classes, objects, closures and the linked, verified program.

#include "cvm/bytecode.hpp"
#include "cvm/value.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

namespace cvm {

struct Frame;
struct LoadedMethod;

using ActorId = std::uint32_t;
using ThreadId = std::uint32_t;

inline constexpr ThreadId kNoThread = std::numeric_limits<ThreadId>::max();

class Class {
public:
    std::string name;
    const Class* superclass = nullptr;
    /// Inherited fields first, then the class's own.
    std::vector<std::string> field_names;
    std::unordered_map<const SymbolInfo*, const LoadedMethod*> methods;
    /// Instances carry indexable slots (Array and its subclasses).
    bool indexed = false;
    /// Built-in classes that cannot be instantiated with `new`.
    bool abstract = false;

    std::size_t field_count() const noexcept { return field_names.size(); }
    bool inherits_from(const Class& other) const noexcept;
};

/// Per-object lock state. Only the threads runtime touches it, under its
/// scheduler lock.
struct Monitor {
    ThreadId holder = kNoThread;
    std::uint32_t entry_count = 0;
    std::vector<ThreadId> wait_set;
};

/// A heap object. Field and indexed-slot accesses are individually atomic;
/// `update_field` gives a read-modify-write that is atomic with respect to
/// every other slot access on the same object.
struct ObjectInstance {
    ObjectInstance(std::uint64_t object_id, const Class& klass, std::size_t indexed_size,
                   std::optional<ActorId> owning_actor);

    const std::uint64_t id;
    const Class* const cls;
    const std::optional<ActorId> owner;
    Monitor monitor;

    std::size_t field_count() const noexcept { return field_count_; }
    std::size_t indexed_size() const noexcept { return indexed_size_; }

    Value load_field(std::size_t index) const;
    void store_field(std::size_t index, const Value& value);
    Value load_indexed(std::size_t index) const;
    void store_indexed(std::size_t index, const Value& value);

    template <typename Fn>
    auto update_field(std::size_t index, Fn&& fn) {
        std::lock_guard lock(slots_mutex_);
        return fn(slots_[index]);
    }

    /// Copy of every slot (fields then indexed) for heap walks.
    std::vector<Value> snapshot() const;

private:
    mutable std::mutex slots_mutex_;
    const std::size_t field_count_;
    const std::size_t indexed_size_;
    std::vector<Value> slots_;
};

struct BlockClosure {
    std::uint64_t id = 0;
    const LoadedMethod* method = nullptr;
    /// The activation that executed PUSH_BLOCK. Never reassigned.
    Frame* home = nullptr;
};

/// PUSH_GLOBAL operand, resolved at load time.
struct GlobalBinding {
    enum class Kind : std::uint8_t { Self, True, False, Nil, ClassRef, Unbound };
    Kind kind = Kind::Unbound;
    const Class* cls = nullptr;
    std::string name;
};

struct RuntimeLiteral {
    enum class Kind : std::uint8_t { Constant, Selector, Global, Block };
    Kind kind = Kind::Constant;
    Value value;  // Constant: the value. Selector: the interned Symbol.
    GlobalBinding global;
    const LoadedMethod* block = nullptr;
};

struct LoadedMethod {
    const bytecode::Method* source = nullptr;
    const SymbolInfo* selector = nullptr;  // methods only
    std::string_view label;                // blocks only
    std::uint16_t num_args = 0;
    std::uint16_t num_locals = 0;
    std::span<const std::uint8_t> code;
    std::vector<RuntimeLiteral> literals;
    std::uint32_t max_stack = 0;
    const Class* holder = nullptr;
    const LoadedMethod* lexical_parent = nullptr;
    bool is_block = false;

    /// "Class>>selector" or "Class>>selector[label]".
    std::string display_name() const;
};

/// A linked and verified image. Immutable once loaded, so it can be shared by
/// every thread of control.
class Program {
public:
    /// Links classes and methods, interns selectors, and runs the load-time
    /// verifier. Throws Error(VerifyError, ...) and decode errors.
    static std::shared_ptr<const Program> load(bytecode::ProgramImage image);

    bytecode::Mode mode() const noexcept { return image_.mode; }
    const bytecode::ProgramImage& image() const noexcept { return image_; }

    const Class* find_class(std::string_view name) const noexcept;
    const Class& object_class() const noexcept { return *object_class_; }
    const Class& array_class() const noexcept { return *array_class_; }
    const Class& system_class() const noexcept { return *system_class_; }

    const Class& entry_class() const noexcept { return *entry_class_; }
    const LoadedMethod& entry_method() const noexcept { return *entry_method_; }

    const SymbolInfo* find_symbol(std::string_view name) const noexcept;

    /// Every method and block in load order.
    const std::vector<std::unique_ptr<LoadedMethod>>& methods() const noexcept { return methods_; }

    Program(const Program&) = delete;
    Program& operator=(const Program&) = delete;

private:
    explicit Program(bytecode::ProgramImage image);

    const SymbolInfo& intern(std::string_view name);
    Class& add_class(std::string name, const Class* superclass);
    void link();
    LoadedMethod& link_method(const bytecode::Method& source, Class& holder, const LoadedMethod* parent);

    bytecode::ProgramImage image_;
    std::unordered_map<std::string, std::unique_ptr<SymbolInfo>> symbols_;
    std::vector<std::unique_ptr<Class>> classes_;
    std::unordered_map<std::string_view, const Class*> class_index_;
    std::vector<std::unique_ptr<LoadedMethod>> methods_;
    const Class* object_class_ = nullptr;
    const Class* array_class_ = nullptr;
    const Class* system_class_ = nullptr;
    const Class* entry_class_ = nullptr;
    const LoadedMethod* entry_method_ = nullptr;
};

// ---------------------------------------------------------------------------
// Lookup and primitives

struct LookupResult {
    const LoadedMethod* method = nullptr;
    const Class* holder = nullptr;
};

/// Walks `cls` and then its superclass chain.
std::optional<LookupResult> lookup(const SymbolInfo& selector, const Class& cls) noexcept;

/// Services primitives need from whichever runtime is executing them.
class PrimitiveHost {
public:
    virtual ~PrimitiveHost() = default;
    virtual ObjectInstance* instantiate(const Class& cls, std::size_t indexed_size) = 0;
    virtual String make_string(std::string text) = 0;
    virtual void write_output(std::string_view text) = 0;
};

/// The primitive finished with this block still to be evaluated; its result
/// becomes the result of the send.
struct ActivateBlock {
    BlockClosure* block = nullptr;
    std::vector<Value> args;
};

/// `condition whileTrue: body`.
struct StartLoop {
    BlockClosure* condition = nullptr;
    BlockClosure* body = nullptr;
};

struct JoinThread {
    ThreadHandle thread;
};

struct ExitRequest {
    std::int64_t code = 0;
};

/// monostate means "not a primitive for this receiver"; ordinary lookup follows.
using PrimitiveResult = std::variant<std::monostate, Value, ActivateBlock, StartLoop, JoinThread, ExitRequest>;

PrimitiveResult invoke_primitive(const SymbolInfo& selector, const Value& receiver, std::span<const Value> args,
                                 const Program& program, PrimitiveHost& host);

/// Name used in diagnostics, e.g. "Integer", "Point", "Point class".
std::string class_name_of(const Value& value);

/// What `print` writes.
std::string display_string(const Value& value);

/// Map from selector text to the primitive it names (None if not built in).
Primitive primitive_for_selector(std::string_view selector) noexcept;

}  // namespace cvm
