#include "support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

namespace fs = std::filesystem;
using cvm::test::corpus_dir;
using cvm::test::read_file;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch() {
    fs::path dir = fs::temp_directory_path() / ("cvm_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

CliResult cvm_cli(const std::string& args, const std::string& env = "") {
    fs::path dir = scratch();
    std::string command = env + " '" + std::string(CVM_EXE) + "' " + args + " >'" + (dir / "out").string() + "' 2>'" +
                          (dir / "err").string() + "'";
    int status = std::system(command.c_str());
    CliResult result;
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file(dir / "out");
    result.err = read_file(dir / "err");
    return result;
}

std::string corpus(const std::string& name) { return "'" + (corpus_dir() / (name + ".cva")).string() + "'"; }

}  // namespace

TEST_CASE("cli: run prints program output only") {
    auto r = cvm_cli("run " + corpus("fib"));
    CHECK(r.code == 0);
    CHECK(r.out == "55\n");
    CHECK(r.err.empty());
}

TEST_CASE("cli: asm writes an image that runs and disassembles") {
    fs::path image = scratch() / "fib.cvmi";
    auto a = cvm_cli("asm " + corpus("fib") + " -o '" + image.string() + "'");
    CHECK(a.code == 0);
    REQUIRE(fs::exists(image));
    CHECK(cvm_cli("run '" + image.string() + "'").out == "55\n");
    auto d = cvm_cli("disasm '" + image.string() + "'");
    CHECK(d.code == 0);
    CHECK(d.out.rfind(".mode threads\n", 0) == 0);
    CHECK(d.out.find("SEND #fib:") != std::string::npos);
}

TEST_CASE("cli: trace goes to standard error") {
    auto r = cvm_cli("run --trace " + corpus("const42"));
    CHECK(r.out == "42\n");
    CHECK(r.err.rfind("1\t0\t0\tPUSH_GLOBAL\t1\n", 0) == 0);
    CHECK(r.err.find("result: 42") != std::string::npos);
}

TEST_CASE("cli: seeds come from --seed or CVM_SEED") {
    auto flag = cvm_cli("run --seed 5 " + corpus("unlocked_counter"));
    auto env = cvm_cli("run " + corpus("unlocked_counter"), "CVM_SEED=5");
    auto other = cvm_cli("run --seed 6 " + corpus("unlocked_counter"));
    CHECK(flag.code == 0);
    CHECK(flag.out == env.out);
    CHECK(cvm_cli("run " + corpus("unlocked_counter"), "CVM_SEED=banana").code == 1);
    CHECK_FALSE(other.out.empty());
}

TEST_CASE("cli: backend options") {
    CHECK(cvm_cli("run --backend=os " + corpus("locked_counter")).out == "4000\n");
    CHECK(cvm_cli("run --backend os --seed 3 " + corpus("locked_counter")).code == 1);
    CHECK(cvm_cli("run --backend os --preempt-every 3 " + corpus("locked_counter")).code == 1);
    CHECK(cvm_cli("run --backend os " + corpus("ping_pong")).code == 1);
    CHECK(cvm_cli("run --backend fibers " + corpus("fib")).code == 1);
    CHECK(cvm_cli("run --preempt-every 0 " + corpus("fib")).code == 1);
}

TEST_CASE("cli: exit codes") {
    CHECK(cvm_cli("").code == 1);
    CHECK(cvm_cli("run").code == 1);
    CHECK(cvm_cli("run /nonexistent/file.cvmi").code == 3);
    CHECK(cvm_cli("run --mode actors " + corpus("fib")).code == 4);
    CHECK(cvm_cli("run --mode threads " + corpus("fib")).code == 0);
    auto trap = cvm_cli("run " + corpus("block_send"));
    CHECK(trap.code == 5);
    CHECK(trap.err.find("BlockNotSendable") != std::string::npos);
    CHECK(trap.err.find("at Main>>main") != std::string::npos);
    auto deadlock = cvm_cli("run " + corpus("deadlock"));
    CHECK(deadlock.code == 6);
    CHECK(deadlock.err.find("wait-for cycle") != std::string::npos);
    CHECK(cvm_cli("run --max-steps 10 " + corpus("fib")).code == 7);
}

TEST_CASE("cli: assembly errors report the line") {
    fs::path bad = scratch() / "bad.cva";
    {
        std::FILE* f = std::fopen(bad.string().c_str(), "w");
        std::fputs(".mode threads\n.class Main\n.method main\n  FROB\n.end\n.end\n.entry Main main\n", f);
        std::fclose(f);
    }
    auto r = cvm_cli("asm '" + bad.string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("line 4") != std::string::npos);
    CHECK(cvm_cli("run '" + bad.string() + "'").code == 2);
}

TEST_CASE("cli: verification runs at asm time unless disabled") {
    fs::path bad = scratch() / "unbalanced.cva";
    fs::path image = scratch() / "unbalanced.cvmi";
    {
        std::FILE* f = std::fopen(bad.string().c_str(), "w");
        std::fputs(".mode threads\n.class Main\n.method main\n  RETURN_LOCAL\n.end\n.end\n.entry Main main\n", f);
        std::fclose(f);
    }
    CHECK(cvm_cli("asm '" + bad.string() + "' -o '" + image.string() + "'").code == 3);
    CHECK(cvm_cli("asm --no-verify '" + bad.string() + "' -o '" + image.string() + "'").code == 0);
    CHECK(cvm_cli("run '" + image.string() + "'").code == 3);
}

TEST_CASE("cli: exit: becomes the process exit code") {
    fs::path src = scratch() / "exit.cva";
    {
        std::FILE* f = std::fopen(src.string().c_str(), "w");
        std::fputs(".mode threads\n.class Main\n.method main\n  PUSH_GLOBAL $System\n  PUSH_CONSTANT 42\n"
                   "  SEND #exit:\n  RETURN_LOCAL\n.end\n.end\n.entry Main main\n",
                   f);
        std::fclose(f);
    }
    CHECK(cvm_cli("run '" + src.string() + "'").code == 42);
}
