#pragma once

#include <cstdint>
#include <string>
#include <variant>

namespace cvm {

class Class;
struct ObjectInstance;
struct BlockClosure;

/// Selectors the built-in primitive table answers to. Resolved once when a
/// selector is interned so dispatch does not compare strings.
enum class Primitive : std::uint8_t {
    None,
    Add, Subtract, Multiply, Divide, Modulo, Equal, Less, Greater,
    Print, AsString, Hash,
    IfTrue, IfFalse, IfTrueIfFalse, Not, And, Or,
    BlockValue, BlockValueWith, BlockValueWithWith, WhileTrue,
    New, NewSized, At, AtPut, Length,
    Concat, Join,
    PrintColon, PrintlnColon, ExitColon,
};

/// Interned selector or symbol. Two symbols are equal iff their infos are the
/// same object.
struct SymbolInfo {
    std::string name;
    std::uint8_t arity = 0;
    Primitive primitive = Primitive::None;
};

struct Nil {
    friend bool operator==(Nil, Nil) = default;
};

struct Symbol {
    const SymbolInfo* info = nullptr;
    friend bool operator==(Symbol, Symbol) = default;
};

/// Immutable string; storage is owned by the program or the heap.
struct String {
    const std::string* text = nullptr;
};

struct ThreadHandle {
    std::uint32_t id = 0;
    friend bool operator==(ThreadHandle, ThreadHandle) = default;
};

struct ActorHandle {
    std::uint32_t id = 0;
    friend bool operator==(ActorHandle, ActorHandle) = default;
};

/// Handle on an object owned by another actor.
struct RemoteReference {
    std::uint32_t actor = 0;
    std::uint64_t object = 0;
    friend bool operator==(RemoteReference, RemoteReference) = default;
};

using Value = std::variant<Nil, bool, std::int64_t, Symbol, String, BlockClosure*, ObjectInstance*, const Class*,
                           ThreadHandle, ActorHandle, RemoteReference>;

/// Scalars compare by value (strings by content), everything else by identity.
bool same_value(const Value& a, const Value& b) noexcept;

/// Integers, symbols, strings, booleans and nil can never be mutated.
inline bool is_immutable_scalar(const Value& v) noexcept {
    return std::holds_alternative<Nil>(v) || std::holds_alternative<bool>(v) ||
           std::holds_alternative<std::int64_t>(v) || std::holds_alternative<Symbol>(v) ||
           std::holds_alternative<String>(v);
}

}  // namespace cvm
