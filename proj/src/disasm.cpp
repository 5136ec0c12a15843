#include "cvm/disasm.hpp"

#include "cvm/assembler.hpp"

#include <cstdio>
#include <set>
#include <sstream>

namespace cvm {

using bytecode::Literal;
using bytecode::Method;

namespace {

bool needs_quotes(std::string_view name) {
    if (name.empty()) return true;
    for (char c : name) {
        auto u = static_cast<unsigned char>(c);
        if (u <= 0x20 || u == 0x7f || c == '"' || c == ';') return true;
    }
    return false;
}

std::string name_token(std::string_view name) {
    return needs_quotes(name) ? quote(name) : std::string(name);
}

std::string offset_text(std::size_t offset) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", offset);
    return buf;
}

bool same_pool_entry(const Literal& a, const Literal& b) {
    const auto* ba = std::get_if<bytecode::BlockLiteral>(&a);
    const auto* bb = std::get_if<bytecode::BlockLiteral>(&b);
    if (ba != nullptr || bb != nullptr) {
        return ba != nullptr && bb != nullptr && ba->method && bb->method && ba->method->selector == bb->method->selector;
    }
    return a == b;
}

/// Operand text; with `exact`, literal references the assembler would not
/// map back to the same pool slot are written as %index.
std::string operand_text(const bytecode::Instruction& ins, const Method& method, bool exact) {
    const auto& info = bytecode::opcode_info(ins.opcode);
    switch (info.operands) {
    case bytecode::OperandKind::None: return {};
    case bytecode::OperandKind::SlotAndContext:
        return " " + std::to_string(ins.args[0]) + " " + std::to_string(ins.args[1]);
    case bytecode::OperandKind::Field: return " " + std::to_string(ins.args[0]);
    case bytecode::OperandKind::Literal: {
        std::size_t index = ins.args[0];
        if (index >= method.literals.size()) return " %" + std::to_string(index);
        if (exact) {
            for (std::size_t i = 0; i < index; ++i) {
                if (same_pool_entry(method.literals[i], method.literals[index])) return " %" + std::to_string(index);
            }
        }
        return " " + format_literal(method.literals[index]);
    }
    }
    return {};
}

void emit_body(std::ostream& out, const Method& method, bytecode::Mode mode, const std::string& indent) {
    std::set<const Method*> emitted;
    for (const auto& literal : method.literals) {
        const auto* block = std::get_if<bytecode::BlockLiteral>(&literal);
        if (block == nullptr || !block->method || !emitted.insert(block->method.get()).second) continue;
        const Method& inner = *block->method;
        out << indent << ".block " << name_token(inner.selector) << " args " << inner.num_args << " locals "
            << inner.num_locals << '\n';
        emit_body(out, inner, mode, indent + "  ");
        out << indent << ".end\n";
    }
    for (const auto& literal : method.literals) out << indent << ".literal " << format_literal(literal) << '\n';

    std::size_t offset = 0;
    for (const auto& ins : bytecode::decode(method.code, mode)) {
        out << indent << offset_text(offset) << ' ' << bytecode::opcode_info(ins.opcode).mnemonic
            << operand_text(ins, method, true) << '\n';
        offset += ins.encoded_size();
    }
}

}  // namespace

std::string format_literal(const Literal& literal) {
    return std::visit(
        [](const auto& lit) -> std::string {
            using T = std::decay_t<decltype(lit)>;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(lit);
            } else if constexpr (std::is_same_v<T, bytecode::SymbolLiteral>) {
                return "#" + name_token(lit.name);
            } else if constexpr (std::is_same_v<T, bytecode::StringLiteral>) {
                return quote(lit.text);
            } else if constexpr (std::is_same_v<T, bytecode::GlobalLiteral>) {
                return "$" + name_token(lit.name);
            } else {
                return "@" + name_token(lit.method ? lit.method->selector : std::string());
            }
        },
        literal);
}

std::string disassemble(const Method& method, std::optional<bytecode::Mode> mode) {
    std::string out;
    std::size_t offset = 0;
    for (const auto& ins : bytecode::decode(method.code, mode)) {
        if (!out.empty()) out += '\n';
        out += offset_text(offset);
        out += ' ';
        out += bytecode::opcode_info(ins.opcode).mnemonic;
        out += operand_text(ins, method, false);
        offset += ins.encoded_size();
    }
    return out;
}

std::string disassemble_image(const bytecode::ProgramImage& image) {
    std::ostringstream out;
    out << ".mode " << bytecode::mode_name(image.mode) << '\n';
    for (const auto& cls : image.classes) {
        out << '\n' << ".class " << name_token(cls.name) << ' ' << name_token(cls.superclass) << '\n';
        if (!cls.fields.empty()) {
            out << "  .fields";
            for (const auto& field : cls.fields) out << ' ' << name_token(field);
            out << '\n';
        }
        for (const auto& method : cls.methods) {
            out << "  .method " << name_token(method.selector) << " args " << method.num_args << " locals "
                << method.num_locals << '\n';
            emit_body(out, method, image.mode, "    ");
            out << "  .end\n";
        }
        out << ".end\n";
    }
    out << '\n' << ".entry " << name_token(image.entry_class) << ' ' << name_token(image.entry_selector) << '\n';
    return out.str();
}

}  // namespace cvm
