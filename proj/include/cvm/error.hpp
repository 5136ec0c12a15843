#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cvm {

enum class ErrorKind : std::uint8_t {
    // encoding and image format
    ArityMismatch,
    InvalidOpcode,
    TruncatedInstruction,
    BadMagic,
    UnsupportedVersion,
    CorruptSection,
    // assembler
    ParseError,
    UnknownMnemonic,
    UndefinedLiteralLabel,
    ModeViolation,
    DuplicateSelector,
    MalformedLiteral,
    // load-time verification
    VerifyError,
    StackUnderflow,
    // execution traps
    DoesNotUnderstand,
    EscapedBlock,
    BlockArityMismatch,
    PrimitiveTypeError,
    DivisionByZero,
    IndexOutOfBounds,
    FieldIndexOutOfRange,
    UnknownGlobal,
    SpawnTypeError,
    LockTypeError,
    IllegalMonitorState,
    AtomicTypeError,
    SelfJoinDeadlock,
    DanglingRemote,
    NoPendingRequest,
    BlockNotSendable,
    UnknownClass,
    InvariantViolation,
    // whole-run outcomes
    StepLimitExceeded,
    Deadlock,
    ModeMismatch,
    Io,
};

std::string_view error_kind_name(ErrorKind kind) noexcept;

/// Base of every error the VM raises. The kind is stable and machine-checkable;
/// the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }
    /// Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

/// Decoding failure at a byte offset within a code stream or image.
class DecodeError : public Error {
public:
    DecodeError(ErrorKind kind, std::size_t offset, const std::string& message);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Assembler diagnostic; line and column are 1-based.
class AsmError : public Error {
public:
    AsmError(ErrorKind kind, std::size_t line, std::size_t column, const std::string& message);
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// A runtime error annotated with the bytecode backtrace of the faulting
/// thread of control, innermost frame first.
class TrapError : public Error {
public:
    TrapError(ErrorKind kind, const std::string& message, std::string backtrace);
    const std::string& backtrace() const noexcept { return backtrace_; }

private:
    std::string backtrace_;
};

}  // namespace cvm
