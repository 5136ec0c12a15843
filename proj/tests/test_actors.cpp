#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace cvm;

namespace {

RunOptions seeded(std::uint64_t seed, std::uint32_t preempt = 1) {
    RunOptions options;
    options.seed = seed;
    options.preempt_every = preempt;
    options.check_invariants = true;
    return options;
}

std::optional<ErrorKind> run_kind(std::string_view source, RunOptions options = seeded(0)) {
    return test::error_kind_of([&] { test::run_source(source, options); });
}

std::string actors_program(std::string_view body, std::string_view locals = "0", std::string_view extra = "") {
    return test::main_program(body, locals, extra, "actors");
}

const std::string kEcho = R"(.class Echo
.method bounce:
  PUSH_ARGUMENT 0
  RETURN_LOCAL
.end
.method quit
  PUSH_GLOBAL $System
  PUSH_CONSTANT 0
  SEND #exit:
  RETURN_LOCAL
.end
.end)";

}  // namespace

TEST_CASE("ping-pong resumes each sender with its reply") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto result = test::run_corpus("ping_pong", seeded(seed, 1 + seed % 4));
        CHECK(result.out == "10\n20\n30\ndone\n");
        CHECK(result.report.sync_requests == 4);
        CHECK(result.report.replies_consumed == 4);
        CHECK(result.report.messages_dropped == 0);
    }
}

TEST_CASE("a pending synchronous send does not block its actor") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CHECK(test::run_corpus("nonblocking_sync", seeded(seed)).out == "42\n");
    }
}

TEST_CASE("asynchronous sends between two actors arrive in order") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CHECK(test::run_corpus("async_fifo", seeded(seed, 1 + seed % 5)).out == "3\n");
    }
}

TEST_CASE("YIELD alternates coroutines of one actor") {
    auto result = test::run_corpus("yield_alternation", seeded(0), true);
    CHECK(result.out == "a\nb\na\nb\na\nb\n");
    std::vector<std::string> yielders;
    std::istringstream lines(result.trace);
    std::string line;
    while (std::getline(lines, line)) {
        std::vector<std::string> cols;
        std::istringstream fields(line);
        std::string col;
        while (std::getline(fields, col, '\t')) cols.push_back(col);
        REQUIRE(cols.size() == 6);
        if (cols[4] == "YIELD") yielders.push_back(cols[1] + ":" + cols[2]);
    }
    CHECK(yielders == std::vector<std::string>{"1:0", "1:1", "1:0", "1:1", "1:0", "1:1"});
}

TEST_CASE("objects cross actors as remote references and come back as themselves") {
    auto source = actors_program(R"(PUSH_GLOBAL $System
SPAWN_ACTOR $Echo
PUSH_GLOBAL $self
SEND #bounce:
PUSH_GLOBAL $self
SEND #=
SEND #println:
POP
PUSH_GLOBAL $System
SPAWN_ACTOR $Echo
SEND #println:
RETURN_LOCAL)",
                                 "0", kEcho);
    auto result = test::run_source(source, seeded(0));
    CHECK(result.out.substr(0, 5) == "true\n");
    CHECK(result.out.find("a RemoteReference(2:") != std::string::npos);
}

TEST_CASE("blocks cannot be sent") {
    CHECK(run_kind(test::read_file(test::corpus_dir() / "block_send.cva")) == ErrorKind::BlockNotSendable);
    CHECK(run_kind(actors_program("SPAWN_ACTOR $Echo\nPUSH_BLOCK @b\nSEND_ASYNC #bounce:\nRETURN_LOCAL\n"
                                  ".block b\nPUSH_CONSTANT 1\nRETURN_LOCAL\n.end",
                                  "0", kEcho)) == ErrorKind::BlockNotSendable);
}

TEST_CASE("sending to an actor that exited traps with DanglingRemote") {
    auto source = actors_program("SPAWN_ACTOR $Echo\nPOP_LOCAL 0\nPUSH_LOCAL 0\nSEND_ASYNC #quit\nPOP\n"
                                 "PUSH_LOCAL 0\nPUSH_CONSTANT 1\nSEND #bounce:\nRETURN_LOCAL",
                                 "1", kEcho);
    for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(run_kind(source, seeded(seed)) == ErrorKind::DanglingRemote);
}

TEST_CASE("asynchronous sends to an exited actor are dropped") {
    auto source = actors_program("SPAWN_ACTOR $Echo\nPOP_LOCAL 0\nPUSH_LOCAL 0\nSEND_ASYNC #quit\nPOP\n"
                                 "PUSH_LOCAL 0\nPUSH_CONSTANT 1\nSEND_ASYNC #bounce:\nPOP\n"
                                 "PUSH_LOCAL 0\nPUSH_CONSTANT 2\nSEND_ASYNC #bounce:\nRETURN_LOCAL",
                                 "1", kEcho);
    std::ostringstream diagnostics;
    auto options = seeded(0);
    options.diagnostics = &diagnostics;
    auto result = test::run_source(source, options);
    CHECK(result.report.messages_dropped == 2);
    CHECK_FALSE(result.report.exit_code.has_value());
}

TEST_CASE("exit: in actor 0 ends the program") {
    auto result = test::run_source(actors_program("PUSH_GLOBAL $System\nPUSH_CONSTANT 9\nSEND #exit:\nRETURN_LOCAL"));
    CHECK(result.report.exit_code == 9);
}

TEST_CASE("actor instruction misuse") {
    CHECK(run_kind(actors_program("PUSH_CONSTANT 1\nRETURN_REMOTE")) == ErrorKind::NoPendingRequest);
    CHECK(run_kind(actors_program("PUSH_CONSTANT 1\nSEND_ASYNC #foo\nRETURN_LOCAL")) == ErrorKind::PrimitiveTypeError);
    CHECK(run_kind(actors_program("SPAWN_ACTOR $Nope\nRETURN_LOCAL")) == ErrorKind::UnknownClass);
    CHECK(run_kind(actors_program("SPAWN_ACTOR $System\nRETURN_LOCAL")) == ErrorKind::UnknownClass);
    CHECK(run_kind(actors_program("SPAWN_ACTOR $Echo\nSEND #frob\nRETURN_LOCAL", "0", kEcho)) ==
          ErrorKind::DoesNotUnderstand);
}

TEST_CASE("asynchronous sends to own objects run in a new coroutine") {
    auto source = R"(.mode actors
.class Main
.method hello
  PUSH_GLOBAL $System
  PUSH_CONSTANT "later"
  SEND #println:
  RETURN_LOCAL
.end
.method main
  PUSH_GLOBAL $self
  SEND_ASYNC #hello
  POP
  PUSH_GLOBAL $System
  PUSH_CONSTANT "first"
  SEND #println:
  RETURN_LOCAL
.end
.end
.entry Main main
)";
    CHECK(test::run_source(source, seeded(0)).out == "first\nlater\n");
}

TEST_CASE("isolation is checked after every step") {
    for (const char* name : {"ping_pong", "nonblocking_sync", "async_fifo", "yield_alternation"}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            auto result = test::run_corpus(name, seeded(seed));
            CHECK(result.report.invariant_checks == result.report.steps);
        }
    }
}

TEST_CASE("actors need the virtual backend") {
    RunOptions options;
    options.backend = Backend::Os;
    CHECK_THROWS_AS(test::run_corpus("ping_pong", options), std::invalid_argument);
}

TEST_CASE("actor runs are reproducible per seed") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto a = test::run_corpus("ping_pong", seeded(seed, 2), true);
        auto b = test::run_corpus("ping_pong", seeded(seed, 2), true);
        CHECK(a.trace == b.trace);
    }
}
