#include "support.hpp"

#include "cvm/object_model.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cvm::test {

namespace fs = std::filesystem;
using namespace cvm::bytecode;

fs::path corpus_dir() { return fs::path(CVM_CORPUS_DIR); }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<fs::path> corpus_files() {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(corpus_dir())) {
        if (entry.path().extension() == ".cva") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

RunResult run_source(std::string_view source, RunOptions options, bool with_trace) {
    std::ostringstream out;
    std::ostringstream trace;
    std::ostringstream diagnostics;
    options.out = &out;
    if (with_trace) options.trace = &trace;
    if (options.diagnostics == nullptr) options.diagnostics = &diagnostics;
    Vm vm(Program::load(assemble(source)), options);
    RunResult result;
    result.report = vm.run();
    result.out = out.str();
    result.trace = trace.str();
    return result;
}

RunResult run_corpus(std::string_view name, RunOptions options, bool with_trace) {
    return run_source(read_file(corpus_dir() / (std::string(name) + ".cva")), options, with_trace);
}

std::string main_program(std::string_view body, std::string_view locals, std::string_view extra,
                         std::string_view mode) {
    std::string text = ".mode " + std::string(mode) + "\n" + std::string(extra) + "\n.class Main\n.method main locals " +
                       std::string(locals) + "\n" + std::string(body) + "\n.end\n.end\n.entry Main main\n";
    return text;
}

std::vector<Instruction> random_instructions(Rng& rng, Mode mode, std::size_t count, std::size_t pool_size) {
    std::vector<const OpcodeInfo*> legal;
    for (std::uint8_t code = 0; code < kOpcodeCount; ++code) {
        const OpcodeInfo* info = opcode_info(code);
        if (!opcode_legal_in(info->opcode, mode)) continue;
        if (info->operands == OperandKind::Literal && pool_size == 0) continue;
        legal.push_back(info);
    }
    std::vector<Instruction> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const OpcodeInfo& info = *legal[rng() % legal.size()];
        Instruction ins;
        ins.opcode = info.opcode;
        ins.argc = info.arg_bytes;
        for (std::uint8_t k = 0; k < info.arg_bytes; ++k) {
            ins.args[k] = info.operands == OperandKind::Literal ? static_cast<std::uint8_t>(rng() % pool_size)
                                                                : static_cast<std::uint8_t>(rng() % 256);
        }
        out.push_back(ins);
    }
    return out;
}

std::string random_name(Rng& rng, std::size_t max_len) {
    static constexpr std::string_view first = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_";
    static constexpr std::string_view rest = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_0123456789";
    std::string name(1, first[rng() % first.size()]);
    std::size_t len = rng() % max_len;
    for (std::size_t i = 0; i < len; ++i) name += rest[rng() % rest.size()];
    return name;
}

namespace {

std::string random_text(Rng& rng) {
    std::string text;
    std::size_t len = rng() % 12;
    for (std::size_t i = 0; i < len; ++i) {
        switch (rng() % 6) {
        case 0: text += static_cast<char>(rng() % 256); break;
        case 1: text += "\"\\\n\t;"[rng() % 5]; break;
        default: text += static_cast<char>('a' + rng() % 26); break;
        }
    }
    return text;
}

std::string random_selector(Rng& rng) {
    switch (rng() % 4) {
    case 0: return random_name(rng);
    case 1: return std::string(1, "+-*/<>=%"[rng() % 8]);
    case 2: return random_name(rng) + ":";
    default: return random_name(rng, 4) + ":" + random_name(rng, 4) + ":";
    }
}

void fill_method(Rng& rng, Method& method, Mode mode, int depth, int& label_counter) {
    std::size_t pool = rng() % 6;
    for (std::size_t i = 0; i < pool; ++i) {
        if (depth < 2 && rng() % 5 == 0) {
            auto block = std::make_shared<Method>();
            block->selector = "b" + std::to_string(label_counter++);
            block->num_args = static_cast<std::uint16_t>(rng() % 3);
            block->num_locals = static_cast<std::uint16_t>(rng() % 3);
            fill_method(rng, *block, mode, depth + 1, label_counter);
            method.literals.emplace_back(BlockLiteral{block});
        } else {
            method.literals.push_back(random_scalar_literal(rng));
        }
    }
    method.code = encode(random_instructions(rng, mode, 1 + rng() % 12, method.literals.size()));
}

}  // namespace

Literal random_scalar_literal(Rng& rng) {
    switch (rng() % 4) {
    case 0: {
        static constexpr std::int64_t edges[] = {0, 1, -1, INT64_MIN, INT64_MAX};
        if (rng() % 3 == 0) return edges[rng() % 5];
        return static_cast<std::int64_t>(rng());
    }
    case 1: return SymbolLiteral{rng() % 4 == 0 ? random_text(rng) : random_selector(rng)};
    case 2: return StringLiteral{random_text(rng)};
    default: return GlobalLiteral{rng() % 4 == 0 ? random_text(rng) : random_name(rng)};
    }
}

ProgramImage random_image(Rng& rng) {
    ProgramImage image;
    image.mode = rng() % 2 == 0 ? Mode::Threads : Mode::Actors;
    std::set<std::string> class_names;
    int label_counter = 0;
    std::size_t classes = 1 + rng() % 4;
    for (std::size_t c = 0; c < classes; ++c) {
        CompiledClass cls;
        do {
            cls.name = random_name(rng);
        } while (!class_names.insert(cls.name).second);
        if (c > 0 && rng() % 2 == 0) cls.superclass = image.classes[rng() % c].name;
        std::size_t fields = rng() % 4;
        for (std::size_t f = 0; f < fields; ++f) cls.fields.push_back(random_name(rng));
        std::set<std::string> selectors;
        std::size_t methods = rng() % 4;
        for (std::size_t m = 0; m < methods; ++m) {
            Method method;
            do {
                method.selector = random_selector(rng);
            } while (!selectors.insert(method.selector).second);
            method.num_args = static_cast<std::uint16_t>(selector_arity(method.selector));
            method.num_locals = static_cast<std::uint16_t>(rng() % 4);
            fill_method(rng, method, image.mode, 0, label_counter);
            cls.methods.push_back(std::move(method));
        }
        image.classes.push_back(std::move(cls));
    }
    image.entry_class = image.classes.front().name;
    image.entry_selector = random_selector(rng);
    return image;
}

}  // namespace cvm::test
