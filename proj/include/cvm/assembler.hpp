#pragma once
//
// Textual assembly (.cva) to ProgramImage. The grammar is documented in
// docs/assembly.md. Diagnostics are AsmError with 1-based line and column.

#include "cvm/bytecode.hpp"

#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace cvm {

bytecode::ProgramImage assemble(std::string_view source);

/// Parses one literal token: `42`, `#sym`, `"text"`, `$Global`, `@label`,
/// or the quoted forms `#"..."`, `$"..."`, `@"..."`. Block labels resolve
/// against `blocks` by selector. Throws AsmError (MalformedLiteral,
/// UndefinedLiteralLabel) positioned at line 1.
bytecode::Literal parse_literal(std::string_view token,
                                std::span<const std::shared_ptr<const bytecode::Method>> blocks = {});

/// Escapes and quotes `text` as a string token.
std::string quote(std::string_view text);

}  // namespace cvm
