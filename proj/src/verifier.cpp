#include "cvm/verifier.hpp"

#include "cvm/error.hpp"

#include <algorithm>
#include <string>

namespace cvm {

namespace {

using bytecode::Instruction;
using bytecode::Opcode;

[[noreturn]] void reject(const LoadedMethod& method, std::uint32_t offset, const std::string& message) {
    throw Error(ErrorKind::VerifyError,
                method.display_name() + " at offset " + std::to_string(offset) + ": " + message);
}

const SymbolInfo* selector_literal(const LoadedMethod& method, std::uint8_t index) {
    if (index >= method.literals.size()) return nullptr;
    const RuntimeLiteral& lit = method.literals[index];
    if (lit.kind != RuntimeLiteral::Kind::Selector) return nullptr;
    return std::get<Symbol>(lit.value).info;
}

void check_operands(const LoadedMethod& method, const Instruction& ins, std::uint32_t offset) {
    auto literal_kind = [&](std::uint8_t index) -> const RuntimeLiteral& {
        if (index >= method.literals.size()) {
            reject(method, offset,
                   "literal index " + std::to_string(index) + " out of range (" +
                       std::to_string(method.literals.size()) + " literals)");
        }
        return method.literals[index];
    };

    switch (ins.opcode) {
    case Opcode::PushLocal:
    case Opcode::PushArgument:
    case Opcode::PopLocal:
    case Opcode::PopArgument: {
        const LoadedMethod* target = &method;
        for (std::uint8_t hop = 0; hop < ins.args[1]; ++hop) {
            target = target->lexical_parent;
            if (target == nullptr) {
                reject(method, offset, "context level " + std::to_string(ins.args[1]) + " exceeds block nesting");
            }
        }
        bool local = ins.opcode == Opcode::PushLocal || ins.opcode == Opcode::PopLocal;
        std::size_t limit = local ? target->num_locals : target->num_args;
        if (ins.args[0] >= limit) {
            reject(method, offset,
                   std::string(local ? "local" : "argument") + " index " + std::to_string(ins.args[0]) +
                       " out of range (" + std::to_string(limit) + (local ? " locals)" : " arguments)"));
        }
        break;
    }
    case Opcode::PushField:
    case Opcode::PopField:
        if (ins.args[0] >= method.holder->field_count()) {
            reject(method, offset,
                   "field index " + std::to_string(ins.args[0]) + " out of range (" + method.holder->name + " has " +
                       std::to_string(method.holder->field_count()) + " fields)");
        }
        break;
    case Opcode::PushBlock:
        if (literal_kind(ins.args[0]).kind != RuntimeLiteral::Kind::Block) {
            reject(method, offset, "PUSH_BLOCK operand is not a block literal");
        }
        break;
    case Opcode::PushConstant: {
        auto kind = literal_kind(ins.args[0]).kind;
        if (kind != RuntimeLiteral::Kind::Constant && kind != RuntimeLiteral::Kind::Selector) {
            reject(method, offset, "PUSH_CONSTANT operand is not an integer, symbol or string literal");
        }
        break;
    }
    case Opcode::PushGlobal:
    case Opcode::SpawnActor:
        if (literal_kind(ins.args[0]).kind != RuntimeLiteral::Kind::Global) {
            reject(method, offset, std::string(bytecode::opcode_info(ins.opcode).mnemonic) +
                                       " operand is not a global literal");
        }
        break;
    case Opcode::Send:
    case Opcode::SuperSend:
    case Opcode::SendAsync:
        literal_kind(ins.args[0]);
        if (selector_literal(method, ins.args[0]) == nullptr) {
            reject(method, offset, std::string(bytecode::opcode_info(ins.opcode).mnemonic) +
                                       " operand is not a symbol literal");
        }
        break;
    default:
        break;
    }
}

}  // namespace

StackEffect stack_effect(const Instruction& ins, const LoadedMethod& method) {
    switch (ins.opcode) {
    case Opcode::Halt: return {0, 0};
    case Opcode::Dup: return {1, 2};
    case Opcode::PushLocal:
    case Opcode::PushArgument:
    case Opcode::PushField:
    case Opcode::PushBlock:
    case Opcode::PushConstant:
    case Opcode::PushGlobal:
    case Opcode::SpawnActor: return {0, 1};
    case Opcode::Pop:
    case Opcode::PopLocal:
    case Opcode::PopArgument:
    case Opcode::PopField: return {1, 0};
    case Opcode::Send:
    case Opcode::SuperSend:
    case Opcode::SendAsync: {
        const SymbolInfo* sel = selector_literal(method, ins.args[0]);
        int n = sel == nullptr ? 0 : sel->arity;
        return {n + 1, 1};
    }
    case Opcode::ReturnLocal:
    case Opcode::ReturnNonLocal:
    case Opcode::ReturnRemote: return {1, 0};
    case Opcode::Spawn: return {1, 1};
    case Opcode::Lock:
    case Opcode::Unlock:
    case Opcode::Wait:
    case Opcode::Notify: return {1, 1};
    case Opcode::XaddField: return {2, 1};
    case Opcode::CasField: return {3, 1};
    case Opcode::Yield: return {0, 0};
    }
    return {0, 0};
}

std::uint32_t verify_method(const LoadedMethod& method, bytecode::Mode mode) {
    std::vector<Instruction> code = bytecode::decode(method.code, mode);
    if (code.empty()) reject(method, 0, "empty code");

    std::uint32_t offset = 0;
    int depth = 0;
    int max_depth = 0;
    for (std::size_t i = 0; i < code.size(); ++i) {
        const Instruction& ins = code[i];
        bool last = i + 1 == code.size();
        check_operands(method, ins, offset);

        StackEffect effect = stack_effect(ins, method);
        if (depth < effect.pops) {
            throw Error(ErrorKind::StackUnderflow, method.display_name() + " at offset " + std::to_string(offset) +
                                                       ": " + std::string(bytecode::opcode_info(ins.opcode).mnemonic) +
                                                       " needs " + std::to_string(effect.pops) + " operands, stack has " +
                                                       std::to_string(depth));
        }
        if (bytecode::is_terminator(ins.opcode)) {
            if (!last) reject(method, offset, "code after terminating instruction");
            if (ins.opcode != Opcode::Halt && depth != 1) {
                reject(method, offset, "stack depth at return is " + std::to_string(depth) + ", expected 1");
            }
        } else if (last) {
            reject(method, offset, "code does not end in a return or HALT");
        }
        depth += effect.pushes - effect.pops;
        max_depth = std::max(max_depth, depth);
        offset += static_cast<std::uint32_t>(ins.encoded_size());
    }
    return static_cast<std::uint32_t>(max_depth);
}

}  // namespace cvm
