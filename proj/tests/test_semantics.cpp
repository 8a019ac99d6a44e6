#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "pitc/generator.hpp"
#include "pitc/semantics.hpp"

using namespace pitc;

namespace {

const Name x{"x"}, y{"y"}, z{"z"}, a{"a"}, b{"b"};
const EffectModel kId = identity_model();
const IdentifierEnv kEnv;

SemCtx ctx_for(const Process& p) { return SemCtx(kId, kEnv, free_names(p)); }

std::map<std::string, Rat> distribution(const Process& p) {
    SemCtx ctx = ctx_for(p);
    std::map<std::string, Rat> out;
    for (const auto& o : prob_transitions(Config{p, {}}, ctx))
        out[repr(o.target.process)] += o.weight;
    return out;
}

}  // namespace

TEST_CASE("probabilistic resolution marks enabled prefixes") {
    Process p = Process::tau(Process::out(a, x, Process::nil()));
    auto outs = prob_transitions(Config{p, {}}, ctx_for(p));
    REQUIRE(outs.size() == 1);
    CHECK(outs[0].weight == Rat(1));
    CHECK(outs[0].target.process == Process::marked(p));
}

TEST_CASE("box-sum resolution splits weight exactly") {
    Process l = Process::out(a, x, Process::nil());
    Process r = Process::out(b, x, Process::nil());
    Process p = Process::box_sum(Rat(1, 3), l, r);
    auto outs = prob_transitions(Config{p, {}}, ctx_for(p));
    REQUIRE(outs.size() == 2);
    CHECK(outs[0].weight == Rat(1, 3));
    CHECK(outs[0].target.process == Process::marked(l));
    CHECK(outs[1].weight == Rat(2, 3));
    CHECK(outs[1].target.process == Process::marked(r));
}

TEST_CASE("PPAR resolves both sides together with one outcome") {
    Process p = Process::par(Process::out(a, x, Process::nil()),
                             Process::in(b, y, Process::nil()));
    auto outs = prob_transitions(Config{p, {}}, ctx_for(p));
    REQUIRE(outs.size() == 1);
    CHECK(outs[0].weight == Rat(1));
    CHECK(outs[0].target.process ==
          Process::par(Process::marked(Process::out(a, x, Process::nil())),
                       Process::marked(Process::in(b, y, Process::nil()))));
}

TEST_CASE("resolution of a process with nothing to resolve is the identity") {
    Process p = Process::nil();
    auto outs = prob_transitions(Config{p, {}}, ctx_for(p));
    REQUIRE(outs.size() == 1);
    CHECK(outs[0].weight == Rat(1));
    CHECK(outs[0].target.process == p);
}

TEST_CASE("unbound identifiers are reported during resolution") {
    Process p = Process::ident(Name{"A"}, {});
    CHECK_THROWS_AS(prob_transitions(Config{p, {}}, ctx_for(p)), PitcError);
}

TEST_CASE("weights always sum to one (random corpus)") {
    TermGen gen(321);
    for (int i = 0; i < 200; ++i) {
        Process p = gen.next();
        auto outs = prob_transitions(Config{p, {}}, ctx_for(p));
        Rat total(0);
        for (const auto& o : outs) total += o.weight;
        REQUIRE(total == Rat(1));
    }
}

TEST_CASE("box-sum coherence: the BS3 recombination gives the same distribution") {
    TermGen gen(99);
    for (int i = 0; i < 100; ++i) {
        Process p = gen.next(), q = gen.next(), r = gen.next();
        Rat pi = gen.weight(), rho = gen.weight();
        Rat denom = pi + rho - pi * rho;
        Process lhs = Process::box_sum(pi, p, Process::box_sum(rho, q, r));
        Process rhs =
            Process::box_sum(denom, Process::box_sum(pi / denom, p, q), r);
        CHECK(distribution(lhs) == distribution(rhs));
    }
}

TEST_CASE("tau firing keys the prefix and applies the tau effect") {
    EffectModel m;
    Name g{"g"};
    m.alphabet = {g};
    DataState s0{}, s1{{g}};
    m.named_states = {{"s0", s0}, {"s1", s1}};
    m.table[{kTauKind, s0}] = s1;

    Process body = Process::out(a, x, Process::nil());
    Process p = Process::marked(Process::tau(body));
    SemCtx ctx(m, kEnv, free_names(p));
    auto steps = forward_transitions(Config{p, s0}, {}, ctx);
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].label == StepLabel::single(ActionLabel::tau()));
    CHECK(steps[0].target.process == Process::keyed_tau(1, body));
    CHECK(steps[0].target.state == s1);
}

TEST_CASE("two parallel outputs fire as one step, never interleaved") {
    Process p = Process::par(Process::marked(Process::out(a, x, Process::nil())),
                             Process::marked(Process::out(b, y, Process::nil())));
    auto steps = forward_transitions(Config{p, {}}, {}, ctx_for(p));
    REQUIRE(steps.size() == 1);
    StepLabel expect;
    expect.actions = {ActionLabel::free_out(a, x), ActionLabel::free_out(b, y)};
    expect.normalize();
    CHECK(steps[0].label == expect);
}

TEST_CASE("COM synchronizes an output with the matching input") {
    Process p = Process::par(Process::marked(Process::out(x, z, Process::nil())),
                             Process::marked(Process::in(x, y, Process::nil())));
    auto steps = forward_transitions(Config{p, {}}, {}, ctx_for(p));
    bool found = false;
    for (const auto& s : steps) {
        if (s.label == StepLabel::single(ActionLabel::tau())) {
            found = true;
            CHECK(s.target.process ==
                  Process::par(Process::keyed_out(x, z, 1, Process::nil()),
                               Process::keyed_in(x, z, y, 2, Process::nil())));
        }
    }
    CHECK(found);
}

TEST_CASE("reverse of a keyed output restores the snapshot") {
    Process before = Process::marked(Process::out(a, x, Process::nil()));
    DataState s0{};
    SemCtx ctx = ctx_for(before);
    auto fwd = forward_transitions(Config{before, s0}, {}, ctx);
    REQUIRE(fwd.size() == 1);
    auto rev = reverse_transitions(fwd[0].target, fwd[0].memory, ctx);
    REQUIRE(rev.size() == 1);
    StepLabel lbl = StepLabel::single(ActionLabel::free_out(a, x).with_key(1));
    CHECK(rev[0].label == lbl);
    CHECK(rev[0].target.process == before);
    CHECK(rev[0].target.state == s0);
    CHECK(rev[0].memory.empty());
}

TEST_CASE("nothing reverses in a key-free process") {
    Process p = Process::nil();
    CHECK(reverse_transitions(Config{p, {}}, {}, ctx_for(p)).empty());
}

TEST_CASE("a key without a memory record is an error") {
    Process p = Process::keyed_tau(5, Process::nil());
    CHECK_THROWS_AS(reverse_transitions(Config{p, {}}, {}, ctx_for(p)), PitcError);
}

TEST_CASE("reverse of COM undoes both ends and the substitution") {
    Process p = Process::par(Process::marked(Process::out(x, z, Process::nil())),
                             Process::marked(Process::in(x, y, Process::out(y, b, Process::nil()))));
    SemCtx ctx = ctx_for(p);
    auto fwd = forward_transitions(Config{p, {}}, {}, ctx);
    REQUIRE(!fwd.empty());
    const Step* com = nullptr;
    for (const auto& s : fwd)
        if (s.label == StepLabel::single(ActionLabel::tau())) com = &s;
    REQUIRE(com != nullptr);
    auto rev = reverse_transitions(com->target, com->memory, ctx);
    REQUIRE(rev.size() == 1);
    CHECK(rev[0].label == StepLabel::single(ActionLabel::tau()));
    CHECK(alpha_equivalent(rev[0].target.process, p));
}

TEST_CASE("nested keys must be undone inside-out") {
    Process p = Process::marked(
        Process::out(a, x, Process::tau(Process::nil())));
    SemCtx ctx = ctx_for(p);
    auto s1 = forward_transitions(Config{p, {}}, {}, ctx);
    REQUIRE(s1.size() == 1);
    auto resolved = prob_transitions(s1[0].target, ctx);
    REQUIRE(resolved.size() == 1);
    auto s2 = forward_transitions(resolved[0].target, s1[0].memory, ctx);
    REQUIRE(s2.size() == 1);
    // Only the inner tau (key 2) may reverse now.
    auto rev = reverse_transitions(s2[0].target, s2[0].memory, ctx);
    REQUIRE(rev.size() == 1);
    CHECK(rev[0].label == StepLabel::single(ActionLabel::tau()));
    CHECK(alpha_equivalent(rev[0].target.process, resolved[0].target.process));
}

TEST_CASE("loop lemma on a random corpus") {
    TermGen gen(777);
    int checked = 0;
    for (int i = 0; i < 120; ++i) {
        Process p0 = gen.next();
        SemCtx ctx = ctx_for(p0);
        for (const auto& o : prob_transitions(Config{p0, {}}, ctx)) {
            for (const auto& s : forward_transitions(o.target, {}, ctx)) {
                ++checked;
                bool restored = false;
                for (const auto& r : reverse_transitions(s.target, s.memory, ctx))
                    if (alpha_equivalent(r.target.process, o.target.process) &&
                        r.target.state == o.target.state)
                        restored = true;
                CHECK(restored);
                // And every undo step can be redone exactly.
                for (const auto& r : reverse_transitions(s.target, s.memory, ctx)) {
                    bool redone = false;
                    for (const auto& f2 : forward_transitions(r.target, r.memory, ctx))
                        if (alpha_equivalent(f2.target.process, s.target.process) &&
                            f2.target.state == s.target.state)
                            redone = true;
                    CHECK(redone);
                }
            }
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("transition name discipline (fn of label within fn of source)") {
    TermGen gen(555);
    for (int i = 0; i < 120; ++i) {
        Process p0 = gen.next();
        SemCtx ctx = ctx_for(p0);
        for (const auto& o : prob_transitions(Config{p0, {}}, ctx)) {
            NameSet fnp = free_names(o.target.process);
            for (const auto& s : forward_transitions(o.target, {}, ctx)) {
                NameSet bn;
                for (const auto& l : s.label.actions) {
                    for (const auto& n : l.free_names()) CHECK(fnp.count(n));
                    auto lb = l.bound_names();
                    bn.insert(lb.begin(), lb.end());
                }
                // fn(P') within fn(P) u bn(labels); received universe names
                // count as bound objects of their input labels here.
                NameSet allowed = set_union(fnp, bn);
                for (const auto& n : free_names(s.target.process)) CHECK(allowed.count(n));
            }
        }
    }
}

TEST_CASE("emitted placeholders respect freshness side conditions") {
    TermGen gen(4242);
    for (int i = 0; i < 120; ++i) {
        Process p0 = gen.next();
        SemCtx ctx = ctx_for(p0);
        for (const auto& o : prob_transitions(Config{p0, {}}, ctx)) {
            NameSet fnp = free_names(o.target.process);
            for (const auto& s : forward_transitions(o.target, {}, ctx))
                for (const auto& l : s.label.actions)
                    if (l.obj_is_placeholder) CHECK_FALSE(fnp.count(l.obj));
        }
    }
}

TEST_CASE("sum discards are reopened by full reversal") {
    // (tau.a!x + b!x): fire the left tau, then undo; the right branch must
    // still be available afterwards.
    Process p = Process::sum(Process::tau(Process::out(a, x, Process::nil())),
                             Process::out(b, x, Process::nil()));
    SemCtx ctx = ctx_for(p);
    auto outs = prob_transitions(Config{p, {}}, ctx);
    REQUIRE(outs.size() == 1);
    auto steps = forward_transitions(outs[0].target, {}, ctx);
    REQUIRE(steps.size() == 2);  // tau or b!x
    auto rev = reverse_transitions(steps[0].target, steps[0].memory, ctx);
    REQUIRE(rev.size() == 1);
    auto redo = forward_transitions(rev[0].target, rev[0].memory, ctx);
    CHECK(redo.size() == 2);
}

TEST_CASE("features: without reversibility prefixes are consumed") {
    Process p = Process::marked(Process::out(a, x, Process::tau(Process::nil())));
    Features f;
    f.reversibility = false;
    SemCtx ctx(kId, kEnv, free_names(p), f);
    auto steps = forward_transitions(Config{p, {}}, {}, ctx);
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].target.process == Process::tau(Process::nil()));
    CHECK(reverse_transitions(steps[0].target, steps[0].memory, ctx).empty());
}

TEST_CASE("features: without probabilism unmarked prefixes fire directly") {
    Process p = Process::out(a, x, Process::nil());
    Features f;
    f.probability = false;
    SemCtx ctx(kId, kEnv, free_names(p), f);
    auto outs = prob_transitions(Config{p, {}}, ctx);
    REQUIRE(outs.size() == 1);
    CHECK(outs[0].target.process == p);
    auto steps = forward_transitions(Config{p, {}}, {}, ctx);
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].label == StepLabel::single(ActionLabel::free_out(a, x)));
}

TEST_CASE("guard prefixes gate the action phase silently") {
    Name g{"g"};
    EffectModel m;
    m.alphabet = {g};
    DataState s0{}, s1{{g}};
    m.named_states = {{"s0", s0}, {"s1", s1}};

    Process p = Process::guard_prefix(Guard::atom(g),
                                      Process::marked(Process::out(a, x, Process::nil())));
    SemCtx ctx(m, kEnv, free_names(p));
    CHECK(forward_transitions(Config{p, s0}, {}, ctx).empty());
    auto steps = forward_transitions(Config{p, s1}, {}, ctx);
    REQUIRE(steps.size() == 1);
    // No label for the guard itself.
    CHECK(steps[0].label == StepLabel::single(ActionLabel::free_out(a, x)));
}
