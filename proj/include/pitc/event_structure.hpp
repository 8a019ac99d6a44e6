#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "errors.hpp"
#include "labels.hpp"
#include "process.hpp"
#include "semantics.hpp"
#include "state.hpp"

namespace pitc {

// Prime event structure with silent events, guard gates and probabilistic
// choices, built from recursion-free key-free terms. Events store their full
// strict cause set, so the causality tests are set lookups.
struct PesEvent {
    ActionLabel label;
    Guard gate = Guard::tt();  // conjunction of the guard prefixes on the path
    std::set<int> causes;      // strict causes, downward closed
    bool sync = false;         // derived communication (tau) event
};

// One box-sum occurrence: a weighted binary conflict between two event sets.
struct ProbChoice {
    Rat left_weight;
    std::set<int> left_events, right_events;
};

struct Pes {
    std::vector<PesEvent> events;
    std::set<std::pair<int, int>> conflicts;  // normalized pairs (a < b)
    std::vector<ProbChoice> choices;

    int size() const { return static_cast<int>(events.size()); }

    bool le(int a, int b) const { return a == b || events[b].causes.count(a) != 0; }

    bool in_conflict(int a, int b) const {
        if (a == b) return false;
        auto [x, y] = std::minmax(a, b);
        return conflicts.count({x, y}) != 0;
    }

    bool in_prob_conflict(int a, int b) const {
        for (const auto& c : choices) {
            if (c.left_events.count(a) && c.right_events.count(b)) return true;
            if (c.left_events.count(b) && c.right_events.count(a)) return true;
        }
        return false;
    }

    bool concurrent(int a, int b) const {
        return a != b && !le(a, b) && !le(b, a) && !in_conflict(a, b) &&
               !in_prob_conflict(a, b);
    }

    void add_conflict(int a, int b) {
        if (a == b) return;
        auto [x, y] = std::minmax(a, b);
        conflicts.insert({x, y});
    }

    // e # e' <= e'' implies e # e''.
    void close_conflicts() {
        bool changed = true;
        while (changed) {
            changed = false;
            std::vector<std::pair<int, int>> add;
            for (const auto& [a, b] : conflicts) {
                for (int c = 0; c < size(); ++c) {
                    if (le(b, c) && c != b && !in_conflict(a, c)) add.push_back({a, c});
                    if (le(a, c) && c != a && !in_conflict(b, c)) add.push_back({b, c});
                }
            }
            for (auto [a, b] : add) {
                add_conflict(a, b);
                changed = true;
            }
        }
    }

    bool consistent(const std::set<int>& xs) const {
        for (int a : xs)
            for (int b : xs) {
                if (a >= b) continue;
                if (in_conflict(a, b) || in_prob_conflict(a, b)) return false;
            }
        return true;
    }

    bool causally_closed(const std::set<int>& xs) const {
        for (int e : xs)
            for (int c : events[e].causes)
                if (!xs.count(c)) return false;
        return true;
    }

    // Structural axioms: partial order with finite causes, irreflexive
    // symmetric hereditary conflict.
    bool check_axioms(std::string* why = nullptr) const {
        for (int e = 0; e < size(); ++e) {
            if (events[e].causes.count(e)) {
                if (why) *why = "causality is not irreflexive";
                return false;
            }
            for (int c : events[e].causes)
                for (int cc : events[c].causes)
                    if (!events[e].causes.count(cc)) {
                        if (why) *why = "cause sets are not transitively closed";
                        return false;
                    }
        }
        for (const auto& [a, b] : conflicts) {
            if (a == b) {
                if (why) *why = "conflict is not irreflexive";
                return false;
            }
            for (int c = 0; c < size(); ++c) {
                if (le(b, c) && c != b && !in_conflict(a, c)) {
                    if (why) *why = "conflict is not hereditary";
                    return false;
                }
                if (le(a, c) && c != a && !in_conflict(b, c)) {
                    if (why) *why = "conflict is not hereditary";
                    return false;
                }
            }
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Term-to-PES construction.

namespace detail {

struct PesBuilder {
    const NameSet& universe;
    NameSet global_avoid;  // universe plus free names of the whole term
    Pes pes;
    int budget;

    int new_event(ActionLabel label, Guard gate, std::set<int> causes, bool sync = false) {
        if (pes.size() >= budget)
            fail("SearchBudgetExceeded", "event structure exceeds the construction budget");
        pes.events.push_back(PesEvent{std::move(label), std::move(gate), std::move(causes), sync});
        return pes.size() - 1;
    }

    std::set<int> build(const Process& p, const std::set<int>& causes, const NameSet& scope,
                        const Guard& gate) {
        using K = Process::Kind;
        switch (p.kind()) {
            case K::Nil: return {};
            case K::Ident:
                fail("UnsupportedRecursion", "event structures require recursion-free terms");
            case K::KeyedTau:
            case K::KeyedOut:
            case K::KeyedIn:
            case K::Marked:
                fail("UnsupportedTerm", "event structures require key-free unmarked terms");
            case K::GuardPfx:
                return build(p.cont(), causes, scope,
                             gate.kind() == Guard::Kind::True
                                 ? p.guard()
                                 : Guard::conj(gate, p.guard()));
            case K::Tau: {
                int e = new_event(ActionLabel::tau(), gate, causes);
                std::set<int> next = causes;
                next.insert(e);
                std::set<int> r = build(p.cont(), next, scope, Guard::tt());
                r.insert(e);
                return r;
            }
            case K::Out: {
                int e = new_event(ActionLabel::free_out(p.subject(), p.object()), gate, causes);
                std::set<int> next = causes;
                next.insert(e);
                std::set<int> r = build(p.cont(), next, scope, Guard::tt());
                r.insert(e);
                return r;
            }
            case K::In: {
                // One event per possible received name; the family is mutually
                // conflicting and each instantiation owns its continuation copy.
                NameSet basis = set_union(universe, scope);
                std::vector<std::pair<Name, bool>> received;
                for (const auto& w : basis) received.emplace_back(w, false);
                NameSet excluded = free_names(p.cont());
                excluded.erase(p.binder());
                received.emplace_back(fresh_name(set_union(global_avoid, excluded)), true);
                std::set<int> all;
                std::vector<int> family;
                for (const auto& [w, is_fresh] : received) {
                    ActionLabel l = ActionLabel::input(p.subject(), w);
                    l.obj_is_placeholder = is_fresh;
                    int e = new_event(l, gate, causes);
                    family.push_back(e);
                    std::set<int> next = causes;
                    next.insert(e);
                    Process cont = substitute(p.cont(), Subst{{p.binder(), w}});
                    std::set<int> r = build(cont, next, scope, Guard::tt());
                    all.insert(e);
                    all.insert(r.begin(), r.end());
                }
                for (size_t i = 0; i < family.size(); ++i)
                    for (size_t j = i + 1; j < family.size(); ++j)
                        pes.add_conflict(family[i], family[j]);
                return all;
            }
            case K::Res: {
                NameSet inner = scope;
                inner.insert(p.binder());
                std::set<int> region = build(p.cont(), causes, inner, gate);
                apply_restriction(region, p.binder());
                return region;
            }
            case K::Sum: {
                std::set<int> l = build(p.left(), causes, scope, gate);
                std::set<int> r = build(p.right(), causes, scope, gate);
                for (int a : l)
                    for (int b : r) pes.add_conflict(a, b);
                std::set<int> all = l;
                all.insert(r.begin(), r.end());
                return all;
            }
            case K::BoxSum: {
                std::set<int> l = build(p.left(), causes, scope, gate);
                std::set<int> r = build(p.right(), causes, scope, gate);
                pes.choices.push_back(ProbChoice{p.weight(), l, r});
                std::set<int> all = l;
                all.insert(r.begin(), r.end());
                return all;
            }
            case K::Par: {
                std::set<int> l = build(p.left(), causes, scope, gate);
                std::set<int> r = build(p.right(), causes, scope, gate);
                std::set<int> all = l;
                all.insert(r.begin(), r.end());
                synchronize(l, r, all);
                return all;
            }
        }
        return {};
    }

    // Scope discipline at a restriction boundary: outputs of the restricted
    // name become bound outputs sharing one extruded placeholder, their
    // descendants are renamed, and every event still mentioning the name is
    // deleted together with everything it causes.
    void apply_restriction(std::set<int>& region, const Name& y) {
        std::vector<int> opened;
        for (int e : region) {
            auto& ev = pes.events[e];
            if (ev.label.sort == ActionLabel::Sort::FreeOut && ev.label.obj == y &&
                !(ev.label.subj == y))
                opened.push_back(e);
        }
        if (!opened.empty()) {
            NameSet avoid = global_avoid;
            for (int e : region) {
                auto ns = pes.events[e].label.names();
                avoid.insert(ns.begin(), ns.end());
            }
            Name w = fresh_name(avoid);
            for (int e : opened) {
                auto& ev = pes.events[e];
                ev.label = ActionLabel::bound_out(ev.label.subj, w);
            }
            for (int e : region) {
                auto& ev = pes.events[e];
                bool after_open = false;
                for (int o : opened)
                    if (ev.causes.count(o)) after_open = true;
                if (!after_open) continue;
                if (ev.label.subj == y) ev.label.subj = w;
                if (ev.label.obj == y) ev.label.obj = w;
            }
        }
        std::set<int> doomed;
        for (int e : region)
            if (pes.events[e].label.names().count(y)) doomed.insert(e);
        if (doomed.empty()) return;
        bool grew = true;
        while (grew) {
            grew = false;
            for (int e : region) {
                if (doomed.count(e)) continue;
                for (int d : doomed)
                    if (pes.events[e].causes.count(d)) {
                        doomed.insert(e);
                        grew = true;
                        break;
                    }
            }
        }
        erase_events(doomed);
        for (int d : doomed) region.erase(d);
        std::set<int> renumbered;
        for (int e : region) renumbered.insert(new_index(e, doomed));
        region = renumbered;
    }

    static int new_index(int e, const std::set<int>& removed) {
        int shift = 0;
        for (int d : removed)
            if (d < e) ++shift;
        return e - shift;
    }

    void erase_events(const std::set<int>& doomed) {
        if (doomed.empty()) return;
        Pes next;
        next.choices = pes.choices;
        std::map<int, int> remap;
        for (int e = 0; e < pes.size(); ++e) {
            if (doomed.count(e)) continue;
            remap[e] = static_cast<int>(next.events.size());
            next.events.push_back(pes.events[e]);
        }
        for (auto& ev : next.events) {
            std::set<int> causes;
            for (int c : ev.causes) {
                auto it = remap.find(c);
                if (it != remap.end()) causes.insert(it->second);
            }
            ev.causes = std::move(causes);
        }
        for (const auto& [a, b] : pes.conflicts) {
            auto ia = remap.find(a), ib = remap.find(b);
            if (ia != remap.end() && ib != remap.end()) next.add_conflict(ia->second, ib->second);
        }
        next.choices.clear();
        for (const auto& c : pes.choices) {
            ProbChoice nc;
            nc.left_weight = c.left_weight;
            for (int e : c.left_events)
                if (remap.count(e)) nc.left_events.insert(remap[e]);
            for (int e : c.right_events)
                if (remap.count(e)) nc.right_events.insert(remap[e]);
            if (!nc.left_events.empty() || !nc.right_events.empty()) next.choices.push_back(nc);
        }
        pes = std::move(next);
    }

    // COM/CLOSE pairs across a parallel composition become derived tau
    // events conflicting with both solo uses; the continuations behind the
    // synchronized prefixes are duplicated onto the tau.
    void synchronize(std::set<int>& left, std::set<int>& right, std::set<int>& all) {
        std::set<std::pair<int, int>> done;
        bool progress = true;
        while (progress) {
            progress = false;
            std::vector<std::pair<int, int>> pairs;
            auto scan = [&](const std::set<int>& outs, const std::set<int>& ins) {
                for (int o : outs)
                    for (int i : ins) {
                        if (done.count({o, i})) continue;
                        const auto& lo = pes.events[o].label;
                        const auto& li = pes.events[i].label;
                        if (li.sort != ActionLabel::Sort::Input) continue;
                        bool free_case = lo.sort == ActionLabel::Sort::FreeOut &&
                                         !li.obj_is_placeholder && lo.obj == li.obj;
                        bool close_case = lo.sort == ActionLabel::Sort::BoundOut &&
                                          li.obj_is_placeholder && lo.obj == li.obj;
                        if (!(free_case || close_case)) continue;
                        if (!(lo.subj == li.subj)) continue;
                        std::set<int> causes = pes.events[o].causes;
                        causes.insert(pes.events[i].causes.begin(), pes.events[i].causes.end());
                        if (!pes.consistent(causes)) continue;
                        pairs.emplace_back(o, i);
                    }
            };
            scan(left, right);
            scan(right, left);
            for (auto [o, i] : pairs) {
                done.insert({o, i});
                sync_pair(o, i, left, right, all);
                progress = true;
            }
        }
    }

    void sync_pair(int o, int i, std::set<int>& left, std::set<int>& right, std::set<int>& all) {
        std::set<int> causes = pes.events[o].causes;
        causes.insert(pes.events[i].causes.begin(), pes.events[i].causes.end());
        Guard gate = pes.events[o].gate;
        if (!(pes.events[i].gate == Guard::tt()))
            gate = gate == Guard::tt() ? pes.events[i].gate
                                       : Guard::conj(gate, pes.events[i].gate);
        int tau = new_event(ActionLabel::tau(), gate, causes, true);
        pes.add_conflict(tau, o);
        pes.add_conflict(tau, i);
        all.insert(tau);
        (left.count(o) ? left : right).insert(tau);

        // Duplicate the continuations of both prefixes onto the tau.
        std::map<int, int> copy;
        std::vector<int> order;
        for (int e = 0; e < pes.size(); ++e)
            if (pes.events[e].causes.count(o) || pes.events[e].causes.count(i))
                order.push_back(e);
        for (int e : order) {
            PesEvent ev = pes.events[e];
            std::set<int> causes2;
            for (int c : ev.causes) {
                if (c == o || c == i) {
                    causes2.insert(tau);
                    continue;
                }
                auto it = copy.find(c);
                causes2.insert(it == copy.end() ? c : it->second);
            }
            ev.causes = std::move(causes2);
            int e2 = new_event(ev.label, ev.gate, ev.causes, ev.sync);
            copy[e] = e2;
            all.insert(e2);
            if (left.count(e)) left.insert(e2);
            if (right.count(e)) right.insert(e2);
        }
        for (const auto& [orig, dup] : copy) {
            for (int other = 0; other < pes.size(); ++other) {
                if (other == dup) continue;
                if (pes.in_conflict(orig, other)) {
                    auto it = copy.find(other);
                    pes.add_conflict(dup, it == copy.end() ? other : it->second);
                }
            }
            for (auto& c : pes.choices) {
                if (c.left_events.count(orig)) c.left_events.insert(dup);
                if (c.right_events.count(orig)) c.right_events.insert(dup);
            }
        }
    }
};

}  // namespace detail

// Builds the prime event structure of a recursion-free, key-free term.
// Events are prefix occurrences (inputs: one per possible received name),
// causality is prefix nesting, conflict comes from sums and input families,
// probabilistic conflict from box-sums, and synchronizations appear as
// derived tau events.
inline Pes term_to_pes(const Process& p, const NameSet& universe, int budget = 4000) {
    detail::PesBuilder b{universe, set_union(universe, free_names(p)), {}, budget};
    b.build(p, {}, {}, Guard::tt());
    b.pes.close_conflicts();
    return b.pes;
}

inline Pes term_to_pes(const Process& p) { return term_to_pes(p, free_names(p)); }

// ---------------------------------------------------------------------------
// Configurations and pomset transitions.

using PesConfig = std::set<int>;

inline bool is_configuration(const Pes& pes, const PesConfig& c) {
    return pes.consistent(c) && pes.causally_closed(c);
}

// All finite configurations in canonical order.
inline std::vector<PesConfig> configurations(const Pes& pes, size_t cap = 200000) {
    std::set<PesConfig> seen{{}};
    std::vector<PesConfig> todo{{}};
    while (!todo.empty()) {
        PesConfig c = todo.back();
        todo.pop_back();
        for (int e = 0; e < pes.size(); ++e) {
            if (c.count(e)) continue;
            bool ok = true;
            for (int cause : pes.events[e].causes)
                if (!c.count(cause)) ok = false;
            if (!ok) continue;
            PesConfig c2 = c;
            c2.insert(e);
            if (!pes.consistent(c2)) continue;
            if (seen.insert(c2).second) {
                if (seen.size() > cap)
                    fail("SearchBudgetExceeded", "configuration space exceeds the budget");
                todo.push_back(c2);
            }
        }
    }
    return {seen.begin(), seen.end()};
}

struct PomsetTransition {
    std::set<int> fired;  // the events of X
    PesConfig target;
    bool forward = true;
    bool step = false;  // pairwise concurrent X
};

namespace detail {
inline void subsets_rec(const std::vector<int>& pool, size_t idx, std::set<int>& acc,
                        std::vector<std::set<int>>& out, size_t cap) {
    if (idx == pool.size()) {
        if (!acc.empty()) out.push_back(acc);
        return;
    }
    if (out.size() > cap) fail("SearchBudgetExceeded", "pomset transition enumeration budget");
    subsets_rec(pool, idx + 1, acc, out, cap);
    acc.insert(pool[idx]);
    subsets_rec(pool, idx + 1, acc, out, cap);
    acc.erase(pool[idx]);
}
}  // namespace detail

// All forward pomset transitions from C (nonempty X with C u X a
// configuration) and all reverse ones (X removable with C \ X closed).
inline std::vector<PomsetTransition> pomset_transitions(const Pes& pes, const PesConfig& c,
                                                        size_t cap = 100000) {
    std::vector<PomsetTransition> out;
    // Forward: the pool is every event eventually addable on top of C.
    std::vector<int> pool;
    {
        std::set<int> grown = c;
        bool more = true;
        while (more) {
            more = false;
            for (int e = 0; e < pes.size(); ++e) {
                if (grown.count(e)) continue;
                bool causes_ok = true;
                for (int cause : pes.events[e].causes)
                    if (!grown.count(cause)) causes_ok = false;
                if (!causes_ok) continue;
                bool consistent_here = true;
                for (int f : grown)
                    if (pes.in_conflict(e, f) || pes.in_prob_conflict(e, f))
                        consistent_here = false;
                if (!consistent_here) continue;
                grown.insert(e);
                pool.push_back(e);
                more = true;
            }
        }
    }
    std::vector<std::set<int>> xs;
    std::set<int> acc;
    detail::subsets_rec(pool, 0, acc, xs, cap);
    for (auto& x : xs) {
        PesConfig c2 = c;
        c2.insert(x.begin(), x.end());
        if (!is_configuration(pes, c2)) continue;
        bool step = true;
        for (int a : x)
            for (int b : x)
                if (a < b && (pes.le(a, b) || pes.le(b, a))) step = false;
        out.push_back(PomsetTransition{x, c2, true, step});
    }
    // Reverse: X within C whose removal stays causally closed.
    std::vector<int> inside(c.begin(), c.end());
    std::vector<std::set<int>> rs;
    acc.clear();
    detail::subsets_rec(inside, 0, acc, rs, cap);
    for (auto& x : rs) {
        PesConfig c2;
        for (int e : c)
            if (!x.count(e)) c2.insert(e);
        bool closed = true;
        for (int e : c2)
            for (int cause : pes.events[e].causes)
                if (x.count(cause)) closed = false;
        if (!closed) continue;
        bool step = true;
        for (int a : x)
            for (int b : x)
                if (a < b && (pes.le(a, b) || pes.le(b, a))) step = false;
        out.push_back(PomsetTransition{x, c2, false, step});
    }
    return out;
}

// Canonical serialization of the labelled pomset X (labels plus the induced
// order), used to compare transitions up to pomset isomorphism. Keys never
// appear (PES events are their own keys).
inline std::string pomset_signature(const Pes& pes, const std::set<int>& x) {
    std::vector<int> perm(x.begin(), x.end());
    std::sort(perm.begin(), perm.end());
    std::string best;
    do {
        std::string sig;
        for (size_t i = 0; i < perm.size(); ++i) {
            sig += pes.events[perm[i]].label.text() + "<";
            for (size_t j = 0; j < perm.size(); ++j)
                if (j != i && pes.le(perm[j], perm[i])) sig += std::to_string(j) + ",";
            sig += ";";
        }
        if (best.empty() || sig < best) best = sig;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace pitc
