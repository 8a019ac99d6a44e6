#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "pitc/generator.hpp"
#include "pitc/lts.hpp"

using namespace pitc;

namespace {

const Name x{"x"}, a{"a"};
const EffectModel kId = identity_model();
const IdentifierEnv kEnv;

SemCtx ctx_for(const Process& p) { return SemCtx(kId, kEnv, free_names(p)); }

}  // namespace

TEST_CASE("weak guardedness of identifier environments") {
    IdentifierEnv env;
    env.defs[Name{"A"}] = {{x}, Process::out(a, x, Process::ident(Name{"A"}, {x}))};
    CHECK(check_weakly_guarded(env));

    IdentifierEnv bad;
    bad.defs[Name{"A"}] = {{}, Process::sum(Process::ident(Name{"A"}, {}), Process::nil())};
    CHECK_FALSE(check_weakly_guarded(bad));

    IdentifierEnv two;
    two.defs[Name{"A"}] = {{},
                           Process::par(Process::tau(Process::ident(Name{"B"}, {})),
                                        Process::nil())};
    two.defs[Name{"B"}] = {{}, Process::tau(Process::nil())};
    CHECK(check_weakly_guarded(two));
}

TEST_CASE("identifier unfolding substitutes actuals for formals") {
    IdentifierEnv env;
    Name z{"z"}, yy{"y"};
    env.defs[Name{"A"}] = {{x}, Process::out(x, z, Process::nil())};
    Process call = Process::ident(Name{"A"}, {yy});
    CHECK(unfold_identifier(call, env) == Process::out(yy, z, Process::nil()));

    env.defs[Name{"N"}] = {{}, Process::nil()};
    CHECK(unfold_identifier(Process::ident(Name{"N"}, {}), env) == Process::nil());

    // Capture avoidance: A(x) := x?(z).0 called as A(z).
    env.defs[Name{"C"}] = {{x}, Process::in(x, z, Process::out(z, z, Process::nil()))};
    Process unfolded = unfold_identifier(Process::ident(Name{"C"}, {z}), env);
    CHECK(alpha_equivalent(
        unfolded, Process::in(z, Name{"q"}, Process::out(Name{"q"}, Name{"q"}, Process::nil()))));

    CHECK_THROWS_AS(unfold_identifier(Process::ident(Name{"Zed"}, {}), env), PitcError);
    CHECK_THROWS_AS(unfold_identifier(Process::ident(Name{"A"}, {yy, z}), env), PitcError);
}

TEST_CASE("lts of tau.0 is the three-node spine plus the undo edge") {
    Process p = Process::tau(Process::nil());
    Lts lts = build_lts(Config{p, {}}, ctx_for(p));
    CHECK(lts.nodes.size() == 3);
    CHECK(lts.prob_edges.size() == 1);
    REQUIRE(lts.act_edges.size() == 2);
    int fwd = 0, rev = 0;
    for (const auto& e : lts.act_edges) (e.forward ? fwd : rev)++;
    CHECK(fwd == 1);
    CHECK(rev == 1);
    CHECK_FALSE(lts.truncated());
}

TEST_CASE("lts of nil is a single node with no edges") {
    Process p = Process::nil();
    Lts lts = build_lts(Config{p, {}}, ctx_for(p));
    CHECK(lts.nodes.size() == 1);
    CHECK(lts.prob_edges.empty());
    CHECK(lts.act_edges.empty());
}

TEST_CASE("bounded unfolding of a recursive identifier truncates explicitly") {
    IdentifierEnv env;
    env.defs[Name{"A"}] = {{}, Process::tau(Process::ident(Name{"A"}, {}))};
    Process p = Process::ident(Name{"A"}, {});
    SemCtx ctx(kId, env, free_names(p));
    LtsBounds bounds;
    bounds.max_depth = 4;
    Lts lts = build_lts(Config{p, {}}, ctx, bounds);
    CHECK(lts.truncated());
    CHECK(lts.nodes.size() >= 3);
}

TEST_CASE("build_lts refuses unguarded environments") {
    IdentifierEnv env;
    env.defs[Name{"A"}] = {{}, Process::ident(Name{"A"}, {})};
    Process p = Process::ident(Name{"A"}, {});
    SemCtx ctx(kId, env, {});
    CHECK_THROWS_AS(build_lts(Config{p, {}}, ctx), PitcError);
}

TEST_CASE("prob-phase out-weights sum to one; act edges only at act nodes") {
    TermGen gen(2024);
    for (int i = 0; i < 80; ++i) {
        Process p = gen.next();
        Lts lts = build_lts(Config{p, {}}, ctx_for(p));
        auto pidx = lts.prob_out_index();
        auto aidx = lts.act_out_index();
        for (size_t n = 0; n < lts.nodes.size(); ++n) {
            if (lts.nodes[n].prob_phase) {
                CHECK(aidx[n].empty());
                Rat total(0);
                for (int e : pidx[n]) total += lts.prob_edges[e].weight;
                if (!lts.nodes[n].truncated) CHECK(total == Rat(1));
            } else {
                CHECK(pidx[n].empty());
            }
        }
    }
}

namespace {

// Act-phase nodes reachable from `n` through probabilistic edges alone
// (n itself when it is already an act node).
std::set<int> prob_closure(const Lts& lts, int n) {
    std::set<int> out;
    std::vector<int> todo{n};
    auto pidx = lts.prob_out_index();
    std::set<int> seen;
    while (!todo.empty()) {
        int cur = todo.back();
        todo.pop_back();
        if (!seen.insert(cur).second) continue;
        if (!lts.nodes[cur].prob_phase) {
            out.insert(cur);
            continue;
        }
        for (int e : pidx[cur]) todo.push_back(lts.prob_edges[e].to);
    }
    return out;
}

}  // namespace

TEST_CASE("graph-level loop lemma inside the explored region") {
    TermGen gen(31337);
    for (int i = 0; i < 60; ++i) {
        Process p = gen.next();
        Lts lts = build_lts(Config{p, {}}, ctx_for(p));
        if (lts.truncated()) continue;
        std::set<std::pair<int, int>> fwd, rev;
        for (const auto& e : lts.act_edges)
            (e.forward ? fwd : rev).insert({e.from, e.to});
        // Every forward edge u->v has an undo from each act node behind v's
        // probabilistic phase, landing exactly on u.
        for (const auto& [u, v] : fwd)
            for (int x : prob_closure(lts, v)) CHECK(rev.count({x, u}));
        // Every reverse edge x->u can be redone: a forward edge from u leads
        // to a node whose probabilistic closure contains x.
        for (const auto& [x, u] : rev) {
            bool redone = false;
            for (const auto& [u2, v2] : fwd)
                if (u2 == u && prob_closure(lts, v2).count(x)) redone = true;
            CHECK(redone);
        }
    }
}

TEST_CASE("canonicalization merges alpha-variant configurations") {
    Name y{"y"}, w{"w"};
    Process p1 = Process::in(x, y, Process::out(y, a, Process::nil()));
    Process p2 = Process::in(x, w, Process::out(w, a, Process::nil()));
    CHECK(canonical_key(Config{p1, {}}, {}) == canonical_key(Config{p2, {}}, {}));
    Process q = Process::in(x, y, Process::out(a, a, Process::nil()));
    CHECK(canonical_key(Config{p1, {}}, {}) != canonical_key(Config{q, {}}, {}));
}

TEST_CASE("enlarging bounds never removes nodes or edges") {
    TermGen gen(5150);
    for (int i = 0; i < 40; ++i) {
        Process p = gen.next();
        SemCtx ctx = ctx_for(p);
        LtsBounds small{12, 3};
        Lts lo = build_lts(Config{p, {}}, ctx, small);
        Lts hi = build_lts(Config{p, {}}, ctx);
        std::set<std::string> hi_keys;
        for (const auto& n : hi.nodes) hi_keys.insert(canonical_key(n.config, n.memory));
        for (const auto& n : lo.nodes)
            CHECK(hi_keys.count(canonical_key(n.config, n.memory)));
        CHECK(hi.nodes.size() >= lo.nodes.size());
        CHECK(hi.act_edges.size() >= lo.act_edges.size());
    }
}

TEST_CASE("dot and json exports mention every edge") {
    Process p = Process::tau(Process::nil());
    Lts lts = build_lts(Config{p, {}}, ctx_for(p));
    std::string dot = lts_to_dot(lts);
    CHECK(dot.find("p=1") != std::string::npos);
    CHECK(dot.find("tau") != std::string::npos);
    auto j = lts_to_json(lts);
    CHECK(j["nodes"].size() == 3);
    CHECK(j["act_edges"].size() == 2);
    CHECK(j["prob_edges"][0]["weight"] == "1");
}
