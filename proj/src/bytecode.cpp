#include "cvm/bytecode.hpp"

#include "cvm/error.hpp"

#include <algorithm>
#include <string>

namespace cvm::bytecode {

namespace {

constexpr std::array<OpcodeInfo, kOpcodeCount> kOpcodeTable{{
    {Opcode::Halt, "HALT", 0, OpcodeFamily::Base, OperandKind::None},
    {Opcode::Dup, "DUP", 0, OpcodeFamily::Base, OperandKind::None},
    {Opcode::PushLocal, "PUSH_LOCAL", 2, OpcodeFamily::Base, OperandKind::SlotAndContext},
    {Opcode::PushArgument, "PUSH_ARGUMENT", 2, OpcodeFamily::Base, OperandKind::SlotAndContext},
    {Opcode::PushField, "PUSH_FIELD", 1, OpcodeFamily::Base, OperandKind::Field},
    {Opcode::PushBlock, "PUSH_BLOCK", 1, OpcodeFamily::Base, OperandKind::Literal},
    {Opcode::PushConstant, "PUSH_CONSTANT", 1, OpcodeFamily::Base, OperandKind::Literal},
    {Opcode::PushGlobal, "PUSH_GLOBAL", 1, OpcodeFamily::Base, OperandKind::Literal},
    {Opcode::Pop, "POP", 0, OpcodeFamily::Base, OperandKind::None},
    {Opcode::PopLocal, "POP_LOCAL", 2, OpcodeFamily::Base, OperandKind::SlotAndContext},
    {Opcode::PopArgument, "POP_ARGUMENT", 2, OpcodeFamily::Base, OperandKind::SlotAndContext},
    {Opcode::PopField, "POP_FIELD", 1, OpcodeFamily::Base, OperandKind::Field},
    {Opcode::Send, "SEND", 1, OpcodeFamily::Base, OperandKind::Literal},
    {Opcode::SuperSend, "SUPER_SEND", 1, OpcodeFamily::Base, OperandKind::Literal},
    {Opcode::ReturnLocal, "RETURN_LOCAL", 0, OpcodeFamily::Base, OperandKind::None},
    {Opcode::ReturnNonLocal, "RETURN_NON_LOCAL", 0, OpcodeFamily::Base, OperandKind::None},
    {Opcode::Spawn, "SPAWN", 0, OpcodeFamily::Threads, OperandKind::None},
    {Opcode::Lock, "LOCK", 0, OpcodeFamily::Threads, OperandKind::None},
    {Opcode::Unlock, "UNLOCK", 0, OpcodeFamily::Threads, OperandKind::None},
    {Opcode::Wait, "WAIT", 0, OpcodeFamily::Threads, OperandKind::None},
    {Opcode::Notify, "NOTIFY", 0, OpcodeFamily::Threads, OperandKind::None},
    {Opcode::XaddField, "XADD_FIELD", 1, OpcodeFamily::Threads, OperandKind::Field},
    {Opcode::CasField, "CAS_FIELD", 1, OpcodeFamily::Threads, OperandKind::Field},
    {Opcode::SendAsync, "SEND_ASYNC", 1, OpcodeFamily::Actors, OperandKind::Literal},
    {Opcode::ReturnRemote, "RETURN_REMOTE", 0, OpcodeFamily::Actors, OperandKind::None},
    {Opcode::Yield, "YIELD", 0, OpcodeFamily::Actors, OperandKind::None},
    {Opcode::SpawnActor, "SPAWN_ACTOR", 1, OpcodeFamily::Actors, OperandKind::Literal},
}};

bool is_binary_char(char c) {
    return std::string_view("+-*/%<>=~&|,@\\!?").find(c) != std::string_view::npos;
}

}  // namespace

std::string_view mode_name(Mode mode) noexcept {
    return mode == Mode::Threads ? "threads" : "actors";
}

std::optional<Mode> parse_mode(std::string_view text) noexcept {
    if (text == "threads") return Mode::Threads;
    if (text == "actors") return Mode::Actors;
    return std::nullopt;
}

const OpcodeInfo* opcode_info(std::uint8_t code) noexcept {
    return code < kOpcodeCount ? &kOpcodeTable[code] : nullptr;
}

const OpcodeInfo& opcode_info(Opcode op) noexcept {
    return kOpcodeTable[static_cast<std::uint8_t>(op)];
}

const OpcodeInfo* find_mnemonic(std::string_view mnemonic) noexcept {
    auto it = std::find_if(kOpcodeTable.begin(), kOpcodeTable.end(),
                           [&](const OpcodeInfo& info) { return info.mnemonic == mnemonic; });
    return it == kOpcodeTable.end() ? nullptr : &*it;
}

bool opcode_legal_in(Opcode op, Mode mode) noexcept {
    switch (opcode_info(op).family) {
    case OpcodeFamily::Base: return true;
    case OpcodeFamily::Threads: return mode == Mode::Threads;
    case OpcodeFamily::Actors: return mode == Mode::Actors;
    }
    return false;
}

bool is_terminator(Opcode op) noexcept {
    return op == Opcode::Halt || op == Opcode::ReturnLocal || op == Opcode::ReturnNonLocal ||
           op == Opcode::ReturnRemote;
}

Instruction::Instruction(Opcode op, std::initializer_list<std::uint8_t> operands) : opcode(op) {
    if (operands.size() > args.size()) {
        throw Error(ErrorKind::ArityMismatch, "an instruction carries at most two argument bytes");
    }
    argc = static_cast<std::uint8_t>(operands.size());
    std::copy(operands.begin(), operands.end(), args.begin());
}

bool operator==(const Instruction& a, const Instruction& b) noexcept {
    return a.opcode == b.opcode && a.argc == b.argc &&
           std::equal(a.args.begin(), a.args.begin() + a.argc, b.args.begin());
}

std::vector<std::uint8_t> encode(std::span<const Instruction> instructions) {
    std::vector<std::uint8_t> out;
    out.reserve(instructions.size() * 2);
    for (const Instruction& ins : instructions) {
        const auto* info = opcode_info(static_cast<std::uint8_t>(ins.opcode));
        if (info == nullptr) {
            throw Error(ErrorKind::InvalidOpcode,
                        "opcode " + std::to_string(static_cast<int>(ins.opcode)) + " is not assigned");
        }
        if (info->arg_bytes != ins.argc) {
            throw Error(ErrorKind::ArityMismatch, std::string(info->mnemonic) + " takes " +
                                                      std::to_string(info->arg_bytes) + " argument byte(s), got " +
                                                      std::to_string(ins.argc));
        }
        out.push_back(static_cast<std::uint8_t>(ins.opcode));
        for (std::uint8_t b : ins.operands()) out.push_back(b);
    }
    return out;
}

Instruction decode_at(std::span<const std::uint8_t> bytes, std::size_t offset, std::optional<Mode> mode) {
    const std::uint8_t code = bytes[offset];
    const OpcodeInfo* info = opcode_info(code);
    if (info == nullptr) {
        throw DecodeError(ErrorKind::InvalidOpcode, offset, "byte " + std::to_string(code) + " is not an opcode");
    }
    if (mode && !opcode_legal_in(info->opcode, *mode)) {
        throw DecodeError(ErrorKind::InvalidOpcode, offset,
                          std::string(info->mnemonic) + " is not legal in " + std::string(mode_name(*mode)) +
                              " mode");
    }
    if (offset + info->arg_bytes >= bytes.size()) {
        throw DecodeError(ErrorKind::TruncatedInstruction, offset,
                          std::string(info->mnemonic) + " needs " + std::to_string(info->arg_bytes) +
                              " argument byte(s)");
    }
    Instruction ins;
    ins.opcode = info->opcode;
    ins.argc = info->arg_bytes;
    for (std::uint8_t i = 0; i < info->arg_bytes; ++i) ins.args[i] = bytes[offset + 1 + i];
    return ins;
}

std::vector<Instruction> decode(std::span<const std::uint8_t> bytes, std::optional<Mode> mode) {
    std::vector<Instruction> out;
    std::size_t offset = 0;
    while (offset < bytes.size()) {
        out.push_back(decode_at(bytes, offset, mode));
        offset += out.back().encoded_size();
    }
    return out;
}

bool operator==(const BlockLiteral& a, const BlockLiteral& b) {
    if (a.method == b.method) return true;
    if (!a.method || !b.method) return false;
    return *a.method == *b.method;
}

std::size_t selector_arity(std::string_view selector) noexcept {
    if (selector.empty()) return 0;
    if (is_binary_char(selector.front())) return 1;
    return static_cast<std::size_t>(std::count(selector.begin(), selector.end(), ':'));
}

}  // namespace cvm::bytecode
