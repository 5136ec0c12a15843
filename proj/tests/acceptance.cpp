// One PASS/FAIL line per acceptance criterion. Exit status is 0 only when
// every criterion passes within its time limit.

#include "support.hpp"

#include "cvm/disasm.hpp"
#include "cvm/frame.hpp"
#include "cvm/image.hpp"
#include "cvm/object_model.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_set>

namespace {

using namespace cvm;
using namespace cvm::bytecode;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool ok = true;
    std::string detail;
    void fail(const std::string& why) {
        if (ok) detail = why;
        ok = false;
    }
    void expect(bool condition, const std::string& why) {
        if (!condition) fail(why);
    }
};

int failures = 0;

void criterion(int number, std::string_view title, double limit_seconds, const std::function<void(Outcome&)>& body) {
    Outcome outcome;
    auto start = Clock::now();
    try {
        body(outcome);
    } catch (const std::exception& e) {
        outcome.fail(std::string("exception: ") + e.what());
    }
    double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (limit_seconds > 0 && seconds >= limit_seconds) {
        outcome.fail("took " + std::to_string(seconds) + " s");
    }
    char timing[64];
    if (limit_seconds > 0) {
        std::snprintf(timing, sizeof timing, "%.3f s, limit %.0f s", seconds, limit_seconds);
    } else {
        std::snprintf(timing, sizeof timing, "%.3f s", seconds);
    }
    std::cout << (outcome.ok ? "PASS" : "FAIL") << " [" << number << "] " << title << " (" << timing << ")";
    if (!outcome.ok) {
        std::cout << ": " << outcome.detail;
        ++failures;
    }
    std::cout << '\n';
}

RunOptions seeded(std::uint64_t seed, std::uint32_t preempt = 1) {
    RunOptions options;
    options.seed = seed;
    options.preempt_every = preempt;
    return options;
}

std::int64_t fib_oracle(std::int64_t n) { return n < 2 ? n : fib_oracle(n - 1) + fib_oracle(n - 2); }

std::int64_t factorial_oracle(std::int64_t n) {
    std::int64_t product = 1;
    for (std::int64_t i = 2; i <= n; ++i) product *= i;
    return product;
}

// Every outcome of corpus/cas_race.cva over all interleavings of the two
// threads' CAS operations: thread a does 0->1 then 1->2, thread b does 1->5
// then 0->7; each answers old1 * 100 + old2, then the cell is printed.
std::set<std::string> cas_oracle() {
    struct Op {
        std::int64_t expected;
        std::int64_t replacement;
    };
    const std::vector<Op> a{{0, 1}, {1, 2}};
    const std::vector<Op> b{{1, 5}, {0, 7}};
    std::set<std::string> outcomes;
    // Each interleaving is a choice of which 2 of the 4 slots belong to a.
    for (unsigned mask = 0; mask < 16; ++mask) {
        if (__builtin_popcount(mask) != 2) continue;
        std::int64_t cell = 0;
        std::vector<std::int64_t> olds_a;
        std::vector<std::int64_t> olds_b;
        std::size_t ia = 0;
        std::size_t ib = 0;
        for (unsigned slot = 0; slot < 4; ++slot) {
            bool from_a = (mask >> slot) & 1U;
            const Op& op = from_a ? a[ia++] : b[ib++];
            std::int64_t old = cell;
            if (old == op.expected) cell = op.replacement;
            (from_a ? olds_a : olds_b).push_back(old);
        }
        outcomes.insert(std::to_string(olds_a[0] * 100 + olds_a[1]) + "\n" +
                        std::to_string(olds_b[0] * 100 + olds_b[1]) + "\n" + std::to_string(cell) + "\n");
    }
    return outcomes;
}

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

// Walks everything the stepping coroutine can reach after each step and
// records any object owned by a different actor, or any reference to its
// own actor that was not turned back into the object itself.
class IsolationObserver final : public StepObserver {
public:
    void on_step(const StepEvent& e) override {
        ++walks;
        const ExecutionContext& ctx = *e.context;
        std::unordered_set<const Frame*> frames_seen;
        std::unordered_set<const ObjectInstance*> objects_seen;
        std::vector<const Frame*> frames{ctx.frame};
        std::vector<Value> values{ctx.result};
        while (!frames.empty() || !values.empty()) {
            if (!frames.empty()) {
                const Frame* f = frames.back();
                frames.pop_back();
                if (f == nullptr || !frames_seen.insert(f).second) continue;
                values.push_back(f->receiver);
                values.insert(values.end(), f->stack.begin(), f->stack.end());
                auto slots = f->slot_snapshot();
                values.insert(values.end(), slots.begin(), slots.end());
                if (f->loop.condition != nullptr) frames.push_back(f->loop.condition->home);
                if (f->loop.body != nullptr) frames.push_back(f->loop.body->home);
                frames.push_back(f->caller);
                frames.push_back(f->lexical_outer);
                continue;
            }
            Value v = values.back();
            values.pop_back();
            if (auto* const* obj = std::get_if<ObjectInstance*>(&v)) {
                if (!objects_seen.insert(*obj).second) continue;
                if ((*obj)->owner != ctx.id) ++violations;
                auto slots = (*obj)->snapshot();
                values.insert(values.end(), slots.begin(), slots.end());
            } else if (auto* const* block = std::get_if<BlockClosure*>(&v)) {
                frames.push_back((*block)->home);
            } else if (const auto* ref = std::get_if<RemoteReference>(&v)) {
                if (ref->actor == ctx.id) ++violations;
            }
        }
    }
    std::size_t walks = 0;
    std::size_t violations = 0;
};

const std::vector<std::string> kActorCorpus{"ping_pong", "nonblocking_sync", "async_fifo", "yield_alternation"};

std::string golden(const std::string& name, const std::string& ext = ".out") {
    return test::read_file(test::corpus_dir() / "golden" / (name + ext));
}

}  // namespace

int main() {
    criterion(1, "instruction-set fidelity: 16 base opcodes 0-15, lengths 1-3, 10000 random round trips", 5.0,
              [](Outcome& o) {
                  std::size_t base = 0;
                  for (unsigned code = 0; code < 256; ++code) {
                      const OpcodeInfo* info = opcode_info(static_cast<std::uint8_t>(code));
                      if (info == nullptr) continue;
                      o.expect(static_cast<unsigned>(info->opcode) == code, "table entry out of place");
                      o.expect(1U + info->arg_bytes >= 1 && 1U + info->arg_bytes <= 3, "encoded length outside 1-3");
                      if (info->family == OpcodeFamily::Base) {
                          ++base;
                          o.expect(code <= 15, "base opcode above 15");
                      }
                  }
                  o.expect(base == 16, "base opcode count is " + std::to_string(base));
                  test::Rng rng(1);
                  for (int trial = 0; trial < 10000; ++trial) {
                      Mode mode = trial % 2 == 0 ? Mode::Threads : Mode::Actors;
                      auto program = test::random_instructions(rng, mode, 1 + rng() % 32);
                      if (decode(encode(program), mode) != program) {
                          o.fail("round trip failed on trial " + std::to_string(trial));
                          return;
                      }
                  }
              });

    criterion(2, "base-set correctness: constant, fib(10), factorial(5), non-local return", 1.0, [](Outcome& o) {
        const std::vector<std::pair<std::string, std::string>> expected{
            {"const42", "42\n"},
            {"fib", std::to_string(fib_oracle(10)) + "\n"},
            {"factorial", std::to_string(factorial_oracle(5)) + "\n"},
            {"nonlocal", "42\n"},
        };
        for (const auto& [name, want] : expected) {
            for (int run = 0; run < 3; ++run) {
                auto out = test::run_corpus(name).out;
                o.expect(out == want, name + " printed " + out);
            }
            o.expect(golden(name) == want, name + " golden file disagrees with the oracle");
        }
    });

    criterion(3, "monitors: stack neutrality, 4x1000 locked = 4000 on both backends x 20, lost update, notify all",
              30.0, [](Outcome& o) {
                  for (const char* name : {"locked_counter", "notify_all", "producer_consumer"}) {
                      NeutralityObserver observer;
                      auto options = seeded(11);
                      options.observer = &observer;
                      test::run_corpus(name, options);
                      o.expect(observer.checked > 0, std::string(name) + " executed no monitor instruction");
                      o.expect(observer.violations == 0, std::string(name) + " changed the stack in a monitor op");
                  }
                  for (std::uint64_t seed = 0; seed < 20; ++seed) {
                      auto out = test::run_corpus("locked_counter", seeded(seed)).out;
                      o.expect(out == "4000\n", "virtual seed " + std::to_string(seed) + " printed " + out);
                      RunOptions os;
                      os.backend = Backend::Os;
                      out = test::run_corpus("locked_counter", os).out;
                      o.expect(out == "4000\n", "os run printed " + out);
                  }
                  bool lost = false;
                  for (std::uint64_t seed = 0; seed < 20 && !lost; ++seed) {
                      lost = std::stoll(test::run_corpus("unlocked_counter", seeded(seed)).out) < 4000;
                  }
                  o.expect(lost, "no seed lost an update without the lock");
                  for (std::uint64_t seed = 0; seed < 20; ++seed) {
                      auto out = test::run_corpus("notify_all", seeded(seed)).out;
                      o.expect(out == "3\n", "notify woke " + out);
                  }
              });

    criterion(4, "atomics: 3x100 XADD = 300, CAS outcomes within the interleaving oracle", 10.0, [](Outcome& o) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto out = test::run_corpus("xadd_counter", seeded(seed, 1 + seed % 3)).out;
            o.expect(out == "300\n", "xadd printed " + out);
        }
        RunOptions os;
        os.backend = Backend::Os;
        o.expect(test::run_corpus("xadd_counter", os).out == "300\n", "xadd on the os backend");
        const auto allowed = cas_oracle();
        std::set<std::string> seen;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            auto out = test::run_corpus("cas_race", seeded(seed, 1 + seed % 4)).out;
            seen.insert(out);
            o.expect(allowed.count(out) == 1, "CAS outcome outside the oracle: " + out);
        }
        for (int run = 0; run < 10; ++run) {
            auto out = test::run_corpus("cas_race", os).out;
            o.expect(allowed.count(out) == 1, "os CAS outcome outside the oracle: " + out);
        }
        o.expect(seen.size() > 1, "the seeds never produced a second CAS outcome");
    });

    criterion(5, "actors: ping-pong replies, non-blocking sync send, async FIFO = 3, YIELD trace golden", 5.0,
              [](Outcome& o) {
                  auto ping = test::run_corpus("ping_pong", seeded(0));
                  o.expect(ping.out == "10\n20\n30\ndone\n", "ping-pong printed " + ping.out);
                  o.expect(ping.report.replies_consumed == ping.report.sync_requests, "unanswered request");
                  for (std::uint64_t seed = 0; seed < 10; ++seed) {
                      auto out = test::run_corpus("nonblocking_sync", seeded(seed)).out;
                      o.expect(out == "42\n", "non-blocking sync printed " + out);
                      out = test::run_corpus("async_fifo", seeded(seed, 1 + seed % 3)).out;
                      o.expect(out == "3\n", "async FIFO printed " + out);
                  }
                  auto yield = test::run_corpus("yield_alternation", seeded(0), true);
                  o.expect(yield.out == golden("yield_alternation"), "YIELD output differs from golden");
                  o.expect(yield.trace == golden("yield_alternation", ".trace"), "YIELD trace differs from golden");
              });

    criterion(6, "isolation: heap walk after every actor step, BlockNotSendable", 10.0, [](Outcome& o) {
        std::size_t walks = 0;
        for (const auto& name : kActorCorpus) {
            for (std::uint64_t seed = 0; seed < 10; ++seed) {
                IsolationObserver observer;
                auto options = seeded(seed, 1 + seed % 3);
                options.observer = &observer;
                options.check_invariants = true;
                auto result = test::run_corpus(name, options);
                o.expect(observer.violations == 0, name + " shares an object between actors");
                o.expect(observer.walks == result.report.steps, name + " skipped a walk");
                o.expect(result.report.invariant_checks == result.report.steps, name + " skipped a runtime check");
                walks += observer.walks;
            }
        }
        o.expect(walks > 0, "no steps observed");
        auto kind = test::error_kind_of([] { test::run_corpus("block_send", seeded(0)); });
        o.expect(kind == ErrorKind::BlockNotSendable, "sending a block did not raise BlockNotSendable");
    });

    criterion(7, "determinism: 5 runs per corpus program give identical output and trace", 0.0, [](Outcome& o) {
        for (const auto& path : test::corpus_files()) {
            std::string source = test::read_file(path);
            std::string first;
            for (int run = 0; run < 5; ++run) {
                std::ostringstream record;
                try {
                    auto result = test::run_source(source, seeded(42, 2), true);
                    record << result.out << "\x1f" << result.trace << "\x1f" << result.report.result_text;
                } catch (const Error& e) {
                    record << "error " << e.what();
                }
                if (run == 0) {
                    first = record.str();
                } else if (record.str() != first) {
                    o.fail(path.filename().string() + " differs on run " + std::to_string(run + 1));
                }
            }
            auto golden_path = test::corpus_dir() / "golden" / (path.stem().string() + ".out");
            std::string out;
            try {
                out = test::run_source(source).out;
            } catch (const Error&) {
            }
            o.expect(out == test::read_file(golden_path), path.filename().string() + " differs from its golden output");
        }
    });

    criterion(8, "tooling: disassemble then assemble, and read_image of write_image, are identities", 0.0,
              [](Outcome& o) {
                  std::size_t checked = 0;
                  for (const auto& path : test::corpus_files()) {
                      auto image = assemble(test::read_file(path));
                      std::string text = disassemble_image(image);
                      o.expect(assemble(text) == image, path.filename().string() + ": disassembly does not reassemble");
                      o.expect(disassemble_image(assemble(text)) == text,
                               path.filename().string() + ": disassembly is not a fixed point");
                      auto bytes = write_image(image);
                      o.expect(read_image(bytes) == image, path.filename().string() + ": image does not read back");
                      o.expect(write_image(read_image(bytes)) == bytes,
                               path.filename().string() + ": image bytes are not a fixed point");
                      ++checked;
                  }
                  o.expect(checked >= 17, "corpus has only " + std::to_string(checked) + " programs");
              });

    return failures == 0 ? 0 : 1;
}
