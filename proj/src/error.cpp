#include "cvm/error.hpp"

#include <utility>

namespace cvm {

std::string_view error_kind_name(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::ArityMismatch: return "ArityMismatch";
    case ErrorKind::InvalidOpcode: return "InvalidOpcode";
    case ErrorKind::TruncatedInstruction: return "TruncatedInstruction";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::CorruptSection: return "CorruptSection";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownMnemonic: return "UnknownMnemonic";
    case ErrorKind::UndefinedLiteralLabel: return "UndefinedLiteralLabel";
    case ErrorKind::ModeViolation: return "ModeViolation";
    case ErrorKind::DuplicateSelector: return "DuplicateSelector";
    case ErrorKind::MalformedLiteral: return "MalformedLiteral";
    case ErrorKind::VerifyError: return "VerifyError";
    case ErrorKind::StackUnderflow: return "StackUnderflow";
    case ErrorKind::DoesNotUnderstand: return "DoesNotUnderstand";
    case ErrorKind::EscapedBlock: return "EscapedBlock";
    case ErrorKind::BlockArityMismatch: return "BlockArityMismatch";
    case ErrorKind::PrimitiveTypeError: return "PrimitiveTypeError";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::IndexOutOfBounds: return "IndexOutOfBounds";
    case ErrorKind::FieldIndexOutOfRange: return "FieldIndexOutOfRange";
    case ErrorKind::UnknownGlobal: return "UnknownGlobal";
    case ErrorKind::SpawnTypeError: return "SpawnTypeError";
    case ErrorKind::LockTypeError: return "LockTypeError";
    case ErrorKind::IllegalMonitorState: return "IllegalMonitorState";
    case ErrorKind::AtomicTypeError: return "AtomicTypeError";
    case ErrorKind::SelfJoinDeadlock: return "SelfJoinDeadlock";
    case ErrorKind::DanglingRemote: return "DanglingRemote";
    case ErrorKind::NoPendingRequest: return "NoPendingRequest";
    case ErrorKind::BlockNotSendable: return "BlockNotSendable";
    case ErrorKind::UnknownClass: return "UnknownClass";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::StepLimitExceeded: return "StepLimitExceeded";
    case ErrorKind::Deadlock: return "Deadlock";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
      kind_(kind),
      detail_(message) {}

DecodeError::DecodeError(ErrorKind kind, std::size_t offset, const std::string& message)
    : Error(kind, message + " at offset " + std::to_string(offset)), offset_(offset) {}

AsmError::AsmError(ErrorKind kind, std::size_t line, std::size_t column, const std::string& message)
    : Error(kind, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

TrapError::TrapError(ErrorKind kind, const std::string& message, std::string backtrace)
    : Error(kind, message), backtrace_(std::move(backtrace)) {}

}  // namespace cvm
