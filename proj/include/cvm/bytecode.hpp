#pragma once
//
// Instruction set, encoding, and the in-memory form of a program image.
//
// Base opcodes are 0-15. Threads-mode extension opcodes are 16-22 and
// actors-mode extension opcodes are 23-26; an image declares one mode and
// decoding rejects the other mode's extension opcodes. Every instruction is
// one opcode byte followed by zero, one, or two argument bytes.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cvm::bytecode {

enum class Opcode : std::uint8_t {
    Halt = 0,
    Dup = 1,
    PushLocal = 2,
    PushArgument = 3,
    PushField = 4,
    PushBlock = 5,
    PushConstant = 6,
    PushGlobal = 7,
    Pop = 8,
    PopLocal = 9,
    PopArgument = 10,
    PopField = 11,
    Send = 12,
    SuperSend = 13,
    ReturnLocal = 14,
    ReturnNonLocal = 15,
    // shared-memory extension
    Spawn = 16,
    Lock = 17,
    Unlock = 18,
    Wait = 19,
    Notify = 20,
    XaddField = 21,
    CasField = 22,
    // actor extension
    SendAsync = 23,
    ReturnRemote = 24,
    Yield = 25,
    SpawnActor = 26,
};

inline constexpr std::uint8_t kBaseOpcodeCount = 16;
inline constexpr std::uint8_t kOpcodeCount = 27;

enum class Mode : std::uint8_t { Threads = 0, Actors = 1 };

std::string_view mode_name(Mode mode) noexcept;
std::optional<Mode> parse_mode(std::string_view text) noexcept;

enum class OpcodeFamily : std::uint8_t { Base, Threads, Actors };

/// How an instruction's argument bytes are interpreted.
enum class OperandKind : std::uint8_t {
    None,
    SlotAndContext,  // index byte, lexical-context byte
    Field,           // field index byte
    Literal,         // literal-table index byte
};

struct OpcodeInfo {
    Opcode opcode;
    std::string_view mnemonic;
    std::uint8_t arg_bytes;
    OpcodeFamily family;
    OperandKind operands;
};

/// Table lookup; nullptr for unassigned byte values.
const OpcodeInfo* opcode_info(std::uint8_t code) noexcept;
const OpcodeInfo& opcode_info(Opcode op) noexcept;
const OpcodeInfo* find_mnemonic(std::string_view mnemonic) noexcept;

bool opcode_legal_in(Opcode op, Mode mode) noexcept;

/// True for instructions after which control never falls through.
bool is_terminator(Opcode op) noexcept;

struct Instruction {
    Opcode opcode = Opcode::Halt;
    std::uint8_t argc = 0;
    std::array<std::uint8_t, 2> args{};

    Instruction() = default;
    /// Throws ArityMismatch for more than two argument bytes; a count that
    /// disagrees with the opcode is only rejected by encode().
    Instruction(Opcode op, std::initializer_list<std::uint8_t> operands = {});

    std::span<const std::uint8_t> operands() const noexcept { return {args.data(), argc}; }
    std::size_t encoded_size() const noexcept { return 1U + argc; }

    friend bool operator==(const Instruction& a, const Instruction& b) noexcept;
};

std::vector<std::uint8_t> encode(std::span<const Instruction> instructions);

/// Decodes a whole code stream. With no mode every assigned opcode is
/// accepted. Throws DecodeError (InvalidOpcode, TruncatedInstruction).
std::vector<Instruction> decode(std::span<const std::uint8_t> bytes, std::optional<Mode> mode);

/// Decodes the single instruction at `offset`.
Instruction decode_at(std::span<const std::uint8_t> bytes, std::size_t offset, std::optional<Mode> mode);

// ---------------------------------------------------------------------------
// Literals and methods

struct Method;

struct SymbolLiteral {
    std::string name;
    friend bool operator==(const SymbolLiteral&, const SymbolLiteral&) = default;
};

struct StringLiteral {
    std::string text;
    friend bool operator==(const StringLiteral&, const StringLiteral&) = default;
};

struct GlobalLiteral {
    std::string name;
    friend bool operator==(const GlobalLiteral&, const GlobalLiteral&) = default;
};

/// A block template: the block's body is a nested method whose selector
/// field holds the block's label. Captured variables are reached through
/// lexical-context operands, so no capture list is stored.
struct BlockLiteral {
    std::shared_ptr<const Method> method;
    friend bool operator==(const BlockLiteral& a, const BlockLiteral& b);
};

using Literal = std::variant<std::int64_t, SymbolLiteral, StringLiteral, GlobalLiteral, BlockLiteral>;

struct Method {
    std::string selector;
    std::uint16_t num_args = 0;
    std::uint16_t num_locals = 0;
    std::vector<Literal> literals;
    std::vector<std::uint8_t> code;

    friend bool operator==(const Method&, const Method&) = default;
};

struct CompiledClass {
    std::string name;
    std::string superclass = "Object";
    std::vector<std::string> fields;
    std::vector<Method> methods;

    friend bool operator==(const CompiledClass&, const CompiledClass&) = default;
};

inline constexpr std::array<char, 4> kImageMagic{'C', 'V', 'M', 'I'};
inline constexpr std::uint32_t kImageVersion = 1;

struct ProgramImage {
    std::uint32_t version = kImageVersion;
    Mode mode = Mode::Threads;
    std::vector<CompiledClass> classes;
    std::string entry_class;
    std::string entry_selector;

    friend bool operator==(const ProgramImage&, const ProgramImage&) = default;
};

/// Number of arguments a message with this selector carries: one per colon
/// for keyword selectors, one for binary operators, zero otherwise.
std::size_t selector_arity(std::string_view selector) noexcept;

}  // namespace cvm::bytecode
