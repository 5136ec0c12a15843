#include "cvm/assembler.hpp"
#include "cvm/disasm.hpp"
#include "cvm/error.hpp"
#include "cvm/image.hpp"
#include "cvm/runtime.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using namespace cvm;

enum Exit : int {
    kOk = 0,
    kUsage = 1,
    kAssembly = 2,
    kLoad = 3,
    kModeMismatch = 4,
    kTrap = 5,
    kDeadlock = 6,
    kStepLimit = 7,
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// .cva sources are assembled on the fly; anything else is read as an image.
bytecode::ProgramImage load_any(const fs::path& path) {
    if (path.extension() == ".cva") return assemble(read_text(path));
    return bytecode::load_image_file(path);
}

int report_error(const Error& e) {
    std::cerr << "cvm: " << e.what() << '\n';
    if (const auto* trap = dynamic_cast<const TrapError*>(&e); trap != nullptr && !trap->backtrace().empty()) {
        std::cerr << trap->backtrace();
        if (trap->backtrace().back() != '\n') std::cerr << '\n';
    }
    switch (e.kind()) {
    case ErrorKind::ParseError:
    case ErrorKind::UnknownMnemonic:
    case ErrorKind::UndefinedLiteralLabel:
    case ErrorKind::ModeViolation:
    case ErrorKind::DuplicateSelector:
    case ErrorKind::MalformedLiteral: return kAssembly;
    case ErrorKind::ArityMismatch:
    case ErrorKind::InvalidOpcode:
    case ErrorKind::TruncatedInstruction:
    case ErrorKind::BadMagic:
    case ErrorKind::UnsupportedVersion:
    case ErrorKind::CorruptSection:
    case ErrorKind::VerifyError:
    case ErrorKind::StackUnderflow:
    case ErrorKind::Io: return kLoad;
    case ErrorKind::ModeMismatch: return kModeMismatch;
    case ErrorKind::Deadlock: return kDeadlock;
    case ErrorKind::StepLimitExceeded: return kStepLimit;
    default: return kTrap;
    }
}

struct RunArgs {
    std::string input;
    std::string backend = "virtual";
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> preempt_every;
    std::uint64_t max_steps = 0;
    bool trace = false;
    bool check_invariants = false;
    std::string mode;
};

int do_asm(const std::string& input, std::string output, bool verify) {
    auto image = assemble(read_text(input));
    if (verify) Program::load(image);
    if (output.empty()) output = fs::path(input).replace_extension(".cvmi").string();
    bytecode::save_image_file(output, image);
    return kOk;
}

int do_disasm(const std::string& input) {
    std::cout << disassemble_image(load_any(input));
    return kOk;
}

int do_run(const RunArgs& args) {
    RunOptions options;
    if (args.backend == "os") {
        if (args.seed || args.preempt_every) {
            std::cerr << "cvm: --seed and --preempt-every apply to the virtual backend only\n";
            return kUsage;
        }
        options.backend = Backend::Os;
    } else {
        options.backend = Backend::Virtual;
        if (args.seed) {
            options.seed = *args.seed;
        } else if (const char* env = std::getenv("CVM_SEED"); env != nullptr && *env != '\0') {
            try {
                options.seed = std::stoull(env);
            } catch (const std::exception&) {
                std::cerr << "cvm: CVM_SEED is not a number: " << env << '\n';
                return kUsage;
            }
        }
        if (args.preempt_every) options.preempt_every = *args.preempt_every;
    }
    options.max_steps = args.max_steps;
    options.check_invariants = args.check_invariants;
    if (args.trace) options.trace = &std::cerr;

    auto image = load_any(args.input);
    if (!args.mode.empty()) {
        auto wanted = bytecode::parse_mode(args.mode);
        if (!wanted) {
            std::cerr << "cvm: unknown mode " << args.mode << '\n';
            return kUsage;
        }
        if (*wanted != image.mode) {
            throw Error(ErrorKind::ModeMismatch, "image is " + std::string(bytecode::mode_name(image.mode)) +
                                                     " mode, --mode asked for " + args.mode);
        }
    }
    if (image.mode == bytecode::Mode::Actors && options.backend == Backend::Os) {
        std::cerr << "cvm: actors mode runs on the virtual backend only\n";
        return kUsage;
    }

    Vm vm(Program::load(std::move(image)), options);
    ExitReport report = vm.run();
    std::cout.flush();
    if (args.trace) {
        std::cerr << "result: " << report.result_text << "\nsteps: " << report.steps << '\n';
        if (vm.program().mode() == bytecode::Mode::Actors) {
            std::cerr << "sync requests: " << report.sync_requests << "\nreplies consumed: " << report.replies_consumed
                      << "\nmessages dropped: " << report.messages_dropped << '\n';
        }
    }
    if (report.exit_code) return static_cast<int>(*report.exit_code & 0xff);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cvm: assembler, disassembler and virtual machine for .cva/.cvmi programs"};
    app.require_subcommand(1);

    std::string asm_input;
    std::string asm_output;
    bool no_verify = false;
    auto* asm_cmd = app.add_subcommand("asm", "Assemble a .cva source into a .cvmi image");
    asm_cmd->add_option("src", asm_input, "Assembly source")->required();
    asm_cmd->add_option("-o,--output", asm_output, "Output image (default: source with .cvmi extension)");
    asm_cmd->add_flag("--no-verify", no_verify, "Skip load-time verification");

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Run an image or .cva source");
    run_cmd->add_option("image", run_args.input, "Image (.cvmi) or source (.cva)")->required();
    run_cmd->add_option("--backend", run_args.backend, "Scheduler backend")
        ->check(CLI::IsMember({"os", "virtual"}));
    run_cmd->add_option("--seed", run_args.seed, "Scheduler seed (virtual backend; default $CVM_SEED or 0)");
    run_cmd->add_option("--preempt-every", run_args.preempt_every, "Instructions per scheduling decision")
        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--max-steps", run_args.max_steps, "Stop after N instructions (0: no limit)");
    run_cmd->add_flag("--trace", run_args.trace, "Write one trace line per step to standard error");
    run_cmd->add_flag("--check-invariants", run_args.check_invariants,
                      "Check monitor or isolation invariants after every step");
    run_cmd->add_option("--mode", run_args.mode, "Refuse to run unless the image has this mode")
        ->check(CLI::IsMember({"threads", "actors"}));

    std::string disasm_input;
    auto* disasm_cmd = app.add_subcommand("disasm", "Disassemble an image or .cva source");
    disasm_cmd->add_option("image", disasm_input, "Image (.cvmi) or source (.cva)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*asm_cmd) return do_asm(asm_input, asm_output, !no_verify);
        if (*run_cmd) return do_run(run_args);
        if (*disasm_cmd) return do_disasm(disasm_input);
    } catch (const Error& e) {
        return report_error(e);
    } catch (const std::invalid_argument& e) {
        std::cerr << "cvm: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
