#pragma once

#include "cvm/bytecode.hpp"

#include <optional>
#include <string>

namespace cvm {

/// One line per instruction, "0000 MNEMONIC operand", no trailing newline.
/// Literal operands are shown resolved. Propagates DecodeError.
std::string disassemble(const bytecode::Method& method, std::optional<bytecode::Mode> mode = std::nullopt);

/// A complete .cva source that assembles back to `image`.
std::string disassemble_image(const bytecode::ProgramImage& image);

/// The assembler token for a literal.
std::string format_literal(const bytecode::Literal& literal);

}  // namespace cvm
