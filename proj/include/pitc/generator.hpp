#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "guards.hpp"
#include "process.hpp"

namespace pitc {

// Deterministic generator of small recursion-free terms. Defaults follow
// the desk-scale corpus used by the law and acceptance suites: at most six
// prefixes, two parallel components, two box-sums, four names.
struct GenOptions {
    int max_prefixes = 6;
    int max_par_nodes = 1;
    int max_boxsums = 2;
    int name_count = 4;
    bool with_restriction = true;
    bool with_probability = true;
    bool with_guards = false;
    NameSet guard_atoms;  // alphabet for guard generation when enabled
};

class TermGen {
public:
    explicit TermGen(uint64_t seed, GenOptions opt = {}) : rng_(seed), opt_(opt) {}

    Process next() {
        Budget b{opt_.max_prefixes, opt_.max_par_nodes, opt_.max_boxsums};
        Process p = gen(b, 0);
        // Avoid trivially dead terms dominating the corpus.
        if (p == Process::nil()) p = Process::tau(Process::nil());
        return p;
    }

    Name name() { return pool()[pick(static_cast<int>(pool().size()))]; }

    Guard guard(int depth = 2) {
        if (depth == 0 || opt_.guard_atoms.empty()) {
            switch (pick(3)) {
                case 0: return Guard::tt();
                case 1: return Guard::ff();
                default:
                    if (opt_.guard_atoms.empty()) return Guard::tt();
                    return Guard::atom(pick_atom());
            }
        }
        switch (pick(6)) {
            case 0: return Guard::tt();
            case 1: return Guard::ff();
            case 2: return Guard::atom(pick_atom());
            case 3: return Guard::negate(guard(depth - 1));
            case 4: return Guard::disj(guard(depth - 1), guard(depth - 1));
            default: return Guard::conj(guard(depth - 1), guard(depth - 1));
        }
    }

    Rat weight() {
        // Exact rationals strictly inside (0,1) with small denominators.
        static const std::pair<int, int> table[] = {{1, 2}, {1, 3}, {2, 3}, {1, 4},
                                                    {3, 4}, {2, 5}, {1, 5}};
        auto [n, d] = table[pick(7)];
        return Rat(n, d);
    }

    uint64_t raw() { return rng_(); }
    int pick(int n) { return static_cast<int>(rng_() % static_cast<uint64_t>(n)); }

private:
    struct Budget {
        int prefixes;
        int pars;
        int boxsums;
    };

    const std::vector<Name>& pool() {
        if (pool_.empty()) {
            const char* base[] = {"a", "b", "c", "d", "e", "f", "g", "h"};
            for (int i = 0; i < opt_.name_count && i < 8; ++i) pool_.emplace_back(base[i]);
        }
        return pool_;
    }

    Name pick_atom() {
        std::vector<Name> atoms(opt_.guard_atoms.begin(), opt_.guard_atoms.end());
        if (atoms.empty()) return Name{"g"};
        return atoms[pick(static_cast<int>(atoms.size()))];
    }

    Process gen(Budget& b, int depth) {
        if (b.prefixes <= 0 || depth > 6) return Process::nil();
        int roll = pick(100);
        if (roll < 12) return Process::nil();
        if (roll < 52) {  // action prefix
            b.prefixes--;
            switch (pick(3)) {
                case 0: return Process::tau(gen(b, depth + 1));
                case 1: return Process::out(name(), name(), gen(b, depth + 1));
                default: return Process::in(name(), name(), gen(b, depth + 1));
            }
        }
        if (roll < 64) {  // sum
            Process l = gen(b, depth + 1);
            Process r = gen(b, depth + 1);
            return Process::sum(l, r);
        }
        if (roll < 74 && opt_.with_probability && b.boxsums > 0) {
            b.boxsums--;
            Process l = gen(b, depth + 1);
            Process r = gen(b, depth + 1);
            return Process::box_sum(weight(), l, r);
        }
        if (roll < 84 && b.pars > 0) {
            b.pars--;
            Process l = gen(b, depth + 1);
            Process r = gen(b, depth + 1);
            return Process::par(l, r);
        }
        if (roll < 92 && opt_.with_restriction) return Process::res(name(), gen(b, depth + 1));
        if (opt_.with_guards) return Process::guard_prefix(guard(), gen(b, depth + 1));
        b.prefixes--;
        return Process::tau(gen(b, depth + 1));
    }

    std::mt19937_64 rng_;
    GenOptions opt_;
    std::vector<Name> pool_;
};

}  // namespace pitc
