#pragma once

#include "cvm/assembler.hpp"
#include "cvm/bytecode.hpp"
#include "cvm/error.hpp"
#include "cvm/runtime.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace cvm::test {

std::filesystem::path corpus_dir();
std::string read_file(const std::filesystem::path& path);
std::vector<std::filesystem::path> corpus_files();

struct RunResult {
    std::string out;
    std::string trace;
    ExitReport report;
};

/// Assembles, loads and runs `source`, capturing program output and, when
/// `with_trace` is set, the trace.
RunResult run_source(std::string_view source, RunOptions options = {}, bool with_trace = false);
RunResult run_corpus(std::string_view name, RunOptions options = {}, bool with_trace = false);

/// A threads-mode program whose Main>>main has the given body.
std::string main_program(std::string_view body, std::string_view locals = "0", std::string_view extra = "",
                         std::string_view mode = "threads");

/// Kind of the Error thrown by `fn`, or nullopt when it returns normally.
template <typename Fn>
std::optional<ErrorKind> error_kind_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Generators

using Rng = std::mt19937_64;

std::vector<bytecode::Instruction> random_instructions(Rng& rng, bytecode::Mode mode, std::size_t count,
                                                       std::size_t pool_size = 256);
bytecode::Literal random_scalar_literal(Rng& rng);
std::string random_name(Rng& rng, std::size_t max_len = 8);
/// A structurally valid image whose code decodes in its mode and whose
/// literal operands stay inside their pools. It is not meant to verify.
bytecode::ProgramImage random_image(Rng& rng);

}  // namespace cvm::test
