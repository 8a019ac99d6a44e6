#include <catch2/catch_amalgamated.hpp>

#include "pitc/generator.hpp"
#include "pitc/state.hpp"

using namespace pitc;

namespace {

const Name g1{"g1"}, g2{"g2"}, chan_a{"a"}, chan_b{"b"};

EffectModel small_model() {
    EffectModel m;
    m.alphabet = {g1, g2};
    DataState s0{};
    DataState s1{{g1}};
    DataState s2{{g1, g2}};
    m.named_states = {{"s0", s0}, {"s1", s1}, {"s2", s2}};
    m.table[{chan_a, s0}] = s1;
    m.table[{kTauKind, s1}] = s2;
    return m;
}

}  // namespace

TEST_CASE("test evaluates guards over a data state") {
    EffectModel m = small_model();
    DataState s{{g1}};
    CHECK(test(Guard::tt(), s, m));
    CHECK_FALSE(test(Guard::ff(), s, m));
    CHECK(test(Guard::atom(g1), s, m));
    CHECK_FALSE(test(Guard::atom(g2), s, m));
    CHECK_FALSE(test(Guard::negate(Guard::atom(g1)), s, m));
    CHECK(test(Guard::disj(Guard::atom(g2), Guard::atom(g1)), s, m));
    CHECK_FALSE(test(Guard::conj(Guard::atom(g2), Guard::atom(g1)), s, m));
    CHECK_THROWS(test(Guard::atom(Name{"nope"}), s, m));
}

TEST_CASE("effect is a table lookup with identity default") {
    EffectModel m = small_model();
    DataState s0{};
    CHECK(effect(kTauKind, s0, identity_model()) == s0);
    CHECK(effect(chan_a, s0, m) == DataState{{g1}});
    CHECK(effect(chan_b, s0, m) == s0);  // no entry: identity
}

TEST_CASE("wp quantifies over the whole state universe") {
    EffectModel m = small_model();
    CHECK(wp(chan_a, Guard::tt(), m));
    CHECK_FALSE(wp(chan_a, Guard::ff(), m));

    // A model sending every state to {g1} satisfies wp(a, g1).
    EffectModel all;
    all.alphabet = {g1};
    DataState s0{}, s1{{g1}};
    all.named_states = {{"s0", s0}, {"s1", s1}};
    all.table[{chan_a, s0}] = s1;
    all.table[{chan_a, s1}] = s1;
    CHECK(wp(chan_a, Guard::atom(g1), all));
    // Brute-force cross-check.
    bool expected = true;
    for (const auto& s : all.states())
        if (!test(Guard::atom(g1), effect(chan_a, s, all), all)) expected = false;
    CHECK(wp(chan_a, Guard::atom(g1), all) == expected);

    CHECK_FALSE(wp(chan_b, Guard::atom(g1), all));
}

TEST_CASE("test is a boolean-algebra homomorphism (random sampling)") {
    EffectModel m = small_model();
    GenOptions opt;
    opt.guard_atoms = m.alphabet;
    TermGen gen(7, opt);
    auto states = m.states();
    for (int i = 0; i < 300; ++i) {
        Guard a = gen.guard(), b = gen.guard();
        const DataState& s = states[gen.pick(static_cast<int>(states.size()))];
        CHECK(test(Guard::negate(a), s, m) == !test(a, s, m));
        CHECK(test(Guard::disj(a, b), s, m) == (test(a, s, m) || test(b, s, m)));
        CHECK(test(Guard::conj(a, b), s, m) == (test(a, s, m) && test(b, s, m)));
    }
}

TEST_CASE("wp equals direct enumeration on random guards") {
    EffectModel m = small_model();
    GenOptions opt;
    opt.guard_atoms = m.alphabet;
    TermGen gen(11, opt);
    for (int i = 0; i < 200; ++i) {
        Guard phi = gen.guard();
        Name kind = gen.pick(2) == 0 ? kTauKind : chan_a;
        bool direct = true;
        for (const auto& s : m.states())
            if (!test(phi, effect(kind, s, m), m)) direct = false;
        CHECK(wp(kind, phi, m) == direct);
    }
}
