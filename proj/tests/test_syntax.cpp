#include <catch2/catch_amalgamated.hpp>

#include "pitc/generator.hpp"
#include "pitc/process.hpp"

using namespace pitc;

namespace {
const Name x{"x"}, y{"y"}, z{"z"}, w{"w"}, a{"a"}, b{"b"};
}

TEST_CASE("free names follow the clause-by-clause definition") {
    CHECK(free_names(Process::out(x, y, Process::nil())) == NameSet{x, y});
    CHECK(free_names(Process::nil()) == NameSet{});
    // fn(x(y).P) = fn(P) u {x} - {y}
    CHECK(free_names(Process::in(x, y, Process::out(y, z, Process::nil()))) == NameSet{x, z});
    CHECK(free_names(Process::res(z, Process::out(x, z, Process::nil()))) == NameSet{x});
    CHECK(free_names(Process::keyed_out(x, y, 1, Process::nil())) == NameSet{x, y});
    CHECK(free_names(Process::ident(Name{"A"}, {x, y})) == NameSet{x, y});
}

TEST_CASE("bound names are n(P) minus fn(P)") {
    CHECK(bound_names(Process::in(x, y, Process::nil())) == NameSet{y});
    CHECK(bound_names(Process::out(x, y, Process::nil())) == NameSet{});
    CHECK(bound_names(Process::res(z, Process::out(x, z, Process::nil()))) == NameSet{z});
}

TEST_CASE("substitution follows the clauses and avoids capture") {
    // x!y.0 {z/x} = z!y.0
    CHECK(substitute(Process::out(x, y, Process::nil()), Subst{{x, z}}) ==
          Process::out(z, y, Process::nil()));
    CHECK(substitute(Process::nil(), Subst{{x, z}}) == Process::nil());

    // x?(y).z!w.0 {y/w}: the binder would capture the incoming y, so it is
    // renamed first.
    Process p = Process::in(x, y, Process::out(z, w, Process::nil()));
    Process q = substitute(p, Subst{{w, y}});
    CHECK(alpha_equivalent(q, Process::in(x, Name{"u"}, Process::out(z, y, Process::nil()))));
    CHECK(free_names(q) == NameSet{x, z, y});
}

TEST_CASE("substitution never alters keys") {
    Process p = Process::keyed_out(x, y, 7, Process::keyed_tau(3, Process::nil()));
    Process q = substitute(p, Subst{{x, z}, {y, w}});
    CHECK(keys_of(q) == std::set<Key>{3, 7});
}

TEST_CASE("alpha equivalence") {
    Process p1 = Process::in(x, y, Process::out(y, z, Process::nil()));
    Process p2 = Process::in(x, w, Process::out(w, z, Process::nil()));
    CHECK(alpha_equivalent(p1, p2));

    CHECK_FALSE(alpha_equivalent(Process::in(x, y, Process::nil()),
                                 Process::in(z, y, Process::nil())));

    CHECK(alpha_equivalent(Process::res(a, Process::out(x, a, Process::nil())),
                           Process::res(b, Process::out(x, b, Process::nil()))));

    // Keys must match exactly.
    CHECK_FALSE(alpha_equivalent(Process::keyed_tau(1, Process::nil()),
                                 Process::keyed_tau(2, Process::nil())));
}

TEST_CASE("fresh name generation is deterministic") {
    CHECK(fresh_name({}) == Name{"w0"});
    CHECK(fresh_name({Name{"w0"}}) == Name{"w1"});

    Process p = Process::in(Name{"w0"}, Name{"w1"}, Process::out(Name{"w2"}, z, Process::nil()));
    NameSet avoid = set_union(free_names(p), bound_names(p));
    Name f = fresh_name(avoid);
    CHECK_FALSE(all_names(p).count(f));
}

TEST_CASE("box-sum weights must lie strictly inside (0,1)") {
    CHECK_THROWS(Process::box_sum(Rat(1), Process::nil(), Process::nil()));
    CHECK_THROWS(Process::box_sum(Rat(0), Process::nil(), Process::nil()));
    CHECK_NOTHROW(Process::box_sum(Rat(1, 2), Process::nil(), Process::nil()));
}

TEST_CASE("marking is restricted to action prefixes") {
    CHECK_THROWS(Process::marked(Process::nil()));
    CHECK_THROWS(Process::marked(Process::sum(Process::nil(), Process::nil())));
    CHECK_NOTHROW(Process::marked(Process::tau(Process::nil())));
}

TEST_CASE("substitution and alpha form: random properties") {
    TermGen gen(20240701);
    for (int i = 0; i < 200; ++i) {
        Process p = gen.next();

        // identity substitution
        CHECK(alpha_equivalent(substitute(p, Subst{}), p));
        CHECK(alpha_equivalent(substitute(p, Subst{{x, x}}), p));

        // Barendregt form: after alpha canonicalization fn and bn are disjoint
        Process canon = alpha_normal(p);
        NameSet fn = free_names(canon), bn = bound_names(canon);
        for (const auto& n : fn) CHECK_FALSE(bn.count(n));

        // reflexivity
        CHECK(alpha_equivalent(p, p));

        // fn(P sigma) = sigma(fn(P))
        Name from = gen.name(), to = gen.name();
        Process q = substitute(p, Subst{{from, to}});
        NameSet expect;
        for (const auto& n : free_names(p)) expect.insert(n == from ? to : n);
        CHECK(free_names(q) == expect);

        // substitution respects alpha equivalence
        Process variant = alpha_normal(p);
        CHECK(alpha_equivalent(substitute(p, Subst{{from, to}}),
                               substitute(variant, Subst{{from, to}})));
    }
}

TEST_CASE("alpha equivalence is symmetric and transitive on renaming chains") {
    TermGen gen(42);
    for (int i = 0; i < 100; ++i) {
        Process p = gen.next();
        Process q = alpha_normal(p);
        Process r = alpha_normal(q);
        CHECK(alpha_equivalent(p, q));
        CHECK(alpha_equivalent(q, p));
        CHECK(alpha_equivalent(p, r));
    }
}
