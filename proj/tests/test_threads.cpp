#include "support.hpp"

#include "cvm/object_model.hpp"

#include <doctest.h>

#include <mutex>
#include <set>
#include <sstream>

using namespace cvm;
using bytecode::Opcode;

namespace {

RunOptions virtual_options(std::uint64_t seed, std::uint32_t preempt = 1) {
    RunOptions options;
    options.seed = seed;
    options.preempt_every = preempt;
    options.check_invariants = true;
    return options;
}

RunOptions os_options() {
    RunOptions options;
    options.backend = Backend::Os;
    options.check_invariants = true;
    return options;
}

std::optional<ErrorKind> run_kind(std::string_view source, RunOptions options = {}) {
    return test::error_kind_of([&] { test::run_source(source, options); });
}

/// Records every monitor instruction's stack effect on its own frame.
class NeutralityObserver final : public StepObserver {
public:
    void on_step(const StepEvent& e) override {
        if (e.opcode != Opcode::Lock && e.opcode != Opcode::Unlock && e.opcode != Opcode::Wait &&
            e.opcode != Opcode::Notify) {
            return;
        }
        std::lock_guard lock(mutex_);
        ++checked;
        bool same_depth = e.frame_depth_after && *e.frame_depth_after == e.depth_before;
        bool same_top = e.frame_top_after && e.top_before && same_value(*e.frame_top_after, *e.top_before);
        if (!same_depth || !same_top) ++violations;
    }
    std::mutex mutex_;
    std::size_t checked = 0;
    std::size_t violations = 0;
};

const std::string kSelfJoin = R"(.mode threads
.class Box
.fields handle
.method handle
  PUSH_FIELD 0
  RETURN_LOCAL
.end
.method handle:
  PUSH_ARGUMENT 0
  POP_FIELD 0
  PUSH_GLOBAL $self
  RETURN_LOCAL
.end
.end
.class Main
.method main locals 1
  PUSH_GLOBAL $Box
  SEND #new
  POP_LOCAL 0
  PUSH_LOCAL 0
  PUSH_BLOCK @self
  SPAWN
  SEND #handle:
  SEND #handle
  SEND #join
  RETURN_LOCAL
  .block self
    PUSH_BLOCK @unset
    PUSH_BLOCK @idle
    SEND #whileTrue:
    POP
    PUSH_LOCAL 0 1
    SEND #handle
    SEND #join
    RETURN_LOCAL
    .block unset
      PUSH_LOCAL 0 2
      SEND #handle
      PUSH_GLOBAL $nil
      SEND #=
      RETURN_LOCAL
    .end
    .block idle
      PUSH_GLOBAL $nil
      RETURN_LOCAL
    .end
  .end
.end
.end
.entry Main main
)";

}  // namespace

TEST_CASE("locked counter reaches N*M on every seed") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CHECK(test::run_corpus("locked_counter", virtual_options(seed)).out == "4000\n");
    }
    CHECK(test::run_corpus("locked_counter", virtual_options(3, 7)).out == "4000\n");
}

TEST_CASE("locked counter on the os backend") {
    for (int run = 0; run < 5; ++run) CHECK(test::run_corpus("locked_counter", os_options()).out == "4000\n");
}

TEST_CASE("unlocked counter loses updates under some seed") {
    bool lost = false;
    for (std::uint64_t seed = 0; seed < 20 && !lost; ++seed) {
        auto out = test::run_corpus("unlocked_counter", virtual_options(seed)).out;
        lost = std::stoll(out) < 4000;
    }
    CHECK(lost);
}

TEST_CASE("monitor instructions leave their frame's stack unchanged") {
    for (const char* name : {"locked_counter", "notify_all", "producer_consumer"}) {
        NeutralityObserver observer;
        auto options = virtual_options(5);
        options.observer = &observer;
        test::run_corpus(name, options);
        CHECK(observer.checked > 0);
        CHECK(observer.violations == 0);
    }
}

TEST_CASE("notify wakes every waiter") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CHECK(test::run_corpus("notify_all", virtual_options(seed)).out == "3\n");
    }
    CHECK(test::run_corpus("notify_all", os_options()).out == "3\n");
}

TEST_CASE("producer and consumer hand over every item") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CHECK(test::run_corpus("producer_consumer", virtual_options(seed, 1 + seed % 3)).out == "15\n");
    }
    CHECK(test::run_corpus("producer_consumer", os_options()).out == "15\n");
}

TEST_CASE("fetch-and-add needs no lock") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CHECK(test::run_corpus("xadd_counter", virtual_options(seed)).out == "300\n");
    }
    CHECK(test::run_corpus("xadd_counter", os_options()).out == "300\n");
}

TEST_CASE("deadlocks are detected on both backends") {
    for (auto options : {virtual_options(0), virtual_options(9, 4), os_options()}) {
        try {
            test::run_corpus("deadlock", options);
            FAIL("expected a deadlock");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Deadlock);
            CHECK(std::string(e.what()).find("wait-for cycle") != std::string::npos);
        }
    }
}

TEST_CASE("waiting with nobody to notify is a deadlock") {
    auto source = test::main_program("PUSH_GLOBAL $self\nLOCK\nWAIT\nRETURN_LOCAL");
    CHECK(run_kind(source) == ErrorKind::Deadlock);
    CHECK(run_kind(source, os_options()) == ErrorKind::Deadlock);
}

TEST_CASE("monitors are reentrant") {
    auto source = test::main_program(R"(PUSH_GLOBAL $self
LOCK
LOCK
UNLOCK
UNLOCK
POP
PUSH_BLOCK @other
SPAWN
SEND #join
RETURN_LOCAL
.block other
  PUSH_GLOBAL $self
  LOCK
  UNLOCK
  RETURN_LOCAL
.end)");
    CHECK(test::run_source(source, virtual_options(1)).report.result_text == "a Main");
}

TEST_CASE("monitor misuse") {
    CHECK(run_kind(test::main_program("PUSH_GLOBAL $self\nUNLOCK\nRETURN_LOCAL")) == ErrorKind::IllegalMonitorState);
    CHECK(run_kind(test::main_program("PUSH_GLOBAL $self\nWAIT\nRETURN_LOCAL")) == ErrorKind::IllegalMonitorState);
    CHECK(run_kind(test::main_program("PUSH_GLOBAL $Object\nSEND #new\nLOCK\nPOP\nPUSH_GLOBAL $self\nLOCK\nWAIT\n"
                                      "RETURN_LOCAL")) == ErrorKind::IllegalMonitorState);
    CHECK(run_kind(test::main_program("PUSH_CONSTANT 3\nLOCK\nRETURN_LOCAL")) == ErrorKind::LockTypeError);
    CHECK_FALSE(run_kind(test::main_program("PUSH_GLOBAL $self\nNOTIFY\nRETURN_LOCAL")).has_value());
}

TEST_CASE("spawn and join") {
    CHECK(run_kind(test::main_program("PUSH_CONSTANT 3\nSPAWN\nRETURN_LOCAL")) == ErrorKind::SpawnTypeError);
    CHECK(run_kind(test::main_program("PUSH_BLOCK @b\nSPAWN\nRETURN_LOCAL\n.block b args 1\nPUSH_ARGUMENT 0\n"
                                      "RETURN_LOCAL\n.end")) == ErrorKind::SpawnTypeError);
    auto result = test::run_source(test::main_program(
        "PUSH_BLOCK @b\nSPAWN\nPOP_LOCAL 0\nPUSH_GLOBAL $System\nPUSH_LOCAL 0\nSEND #println:\nPOP\n"
        "PUSH_LOCAL 0\nSEND #join\nRETURN_LOCAL\n.block b\nPUSH_CONSTANT 6\nRETURN_LOCAL\n.end",
        "1"));
    CHECK(result.out == "a Thread(1)\n");
    CHECK(result.report.result_text == "6");
    CHECK(run_kind(kSelfJoin, virtual_options(2)) == ErrorKind::SelfJoinDeadlock);
}

TEST_CASE("atomics check their operands") {
    std::string extra = ".class Cell\n.fields v\n.end";
    CHECK(run_kind(test::main_program("PUSH_GLOBAL $Cell\nSEND #new\nPUSH_CONSTANT 1\nXADD_FIELD 0\nRETURN_LOCAL", "0",
                                      extra)) == ErrorKind::AtomicTypeError);
    CHECK(run_kind(test::main_program("PUSH_GLOBAL $Cell\nSEND #new\nPUSH_CONSTANT 1\nXADD_FIELD 3\nRETURN_LOCAL", "0",
                                      extra)) == ErrorKind::FieldIndexOutOfRange);
    CHECK(run_kind(test::main_program("PUSH_CONSTANT 5\nPUSH_CONSTANT 1\nXADD_FIELD 0\nRETURN_LOCAL")) ==
          ErrorKind::AtomicTypeError);
    CHECK(run_kind(test::main_program("PUSH_GLOBAL $Cell\nSEND #new\nPUSH_CONSTANT \"x\"\nXADD_FIELD 0\nRETURN_LOCAL",
                                      "0", extra)) == ErrorKind::AtomicTypeError);
    auto result = test::run_source(test::main_program(
        "PUSH_GLOBAL $Cell\nSEND #new\nPUSH_GLOBAL $nil\nPUSH_CONSTANT 4\nCAS_FIELD 0\nRETURN_LOCAL", "0", extra));
    CHECK(result.report.result_text == "nil");
}

TEST_CASE("exit: in a spawned thread stops the program") {
    auto result = test::run_source(test::main_program(
        "PUSH_BLOCK @b\nSPAWN\nSEND #join\nPOP\nPUSH_GLOBAL $System\nPUSH_CONSTANT 1\nSEND #println:\nRETURN_LOCAL\n"
        ".block b\nPUSH_GLOBAL $System\nPUSH_CONSTANT 4\nSEND #exit:\nRETURN_LOCAL\n.end"));
    CHECK(result.report.exit_code == 4);
    CHECK(result.out.empty());
}

TEST_CASE("traps in spawned threads name the thread's frames") {
    try {
        test::run_source(test::main_program("PUSH_BLOCK @b\nSPAWN\nSEND #join\nRETURN_LOCAL\n"
                                            ".block b\nPUSH_CONSTANT 1\nSEND #frob\nRETURN_LOCAL\n.end"));
        FAIL("expected a trap");
    } catch (const TrapError& e) {
        CHECK(e.kind() == ErrorKind::DoesNotUnderstand);
        CHECK(e.backtrace().find("Main>>main[b] @0002") != std::string::npos);
    }
}

TEST_CASE("the seed alone decides the interleaving") {
    auto a = test::run_corpus("unlocked_counter", virtual_options(4), true);
    auto b = test::run_corpus("unlocked_counter", virtual_options(4), true);
    CHECK(a.out == b.out);
    CHECK(a.trace == b.trace);
    std::set<std::string> traces;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        traces.insert(test::run_corpus("unlocked_counter", virtual_options(seed), true).trace);
    }
    CHECK(traces.size() > 1);
}

TEST_CASE("trace names threads") {
    auto result = test::run_corpus("xadd_counter", virtual_options(0), true);
    std::set<std::string> ids;
    std::istringstream lines(result.trace);
    std::string line;
    while (std::getline(lines, line)) {
        auto first = line.find('\t');
        ids.insert(line.substr(first + 1, line.find('\t', first + 1) - first - 1));
    }
    CHECK(ids == std::set<std::string>{"0", "1", "2", "3"});
}

TEST_CASE("entry argument count is checked") {
    auto program = Program::load(assemble(test::main_program("PUSH_CONSTANT 1\nRETURN_LOCAL")));
    std::ostringstream out;
    RunOptions options;
    options.out = &out;
    Vm vm(program, options);
    CHECK_THROWS_AS(vm.run({Value{std::int64_t{1}}}), std::invalid_argument);
}
