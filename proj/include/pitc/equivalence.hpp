#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "event_structure.hpp"
#include "lts.hpp"
#include "semantics.hpp"

namespace pitc {

struct EquivOptions {
    enum class Relation { Step, Pomset, Hp, Hhp };
    Relation relation = Relation::Step;
    LtsBounds bounds;
    std::vector<DataState> initial_states;  // empty: every state of the model
    std::optional<NameSet> universe_override;
    Features features;
    long long search_budget = 2000000;  // hp/hhp node budget
};

struct EquivResult {
    bool equivalent = false;
    std::string summary;
    // Replay script: one line per move, ending with the move one side
    // cannot match. Empty when equivalent.
    std::vector<std::string> counterexample;
};

// ---------------------------------------------------------------------------
// FR strongly probabilistic step bisimilarity via partition refinement on
// the disjoint union of the two LTSs. Act blocks split on (direction, step
// label, target block); prob blocks split on the exact distribution over
// blocks, realizing the mu-equality clause.

namespace detail {

struct RefineState {
    const Lts* l1;
    const Lts* l2;
    int n1 = 0, n = 0;
    std::vector<std::vector<int>> act_out, prob_out;  // merged indices
    std::vector<int> block;                    // current block per node
    std::vector<std::vector<int>> history;     // block per round per node

    const Lts::Node& node(int i) const { return i < n1 ? l1->nodes[i] : l2->nodes[i - n1]; }

    struct ActMove {
        bool forward;
        std::string label;
        int to;
    };
    std::vector<std::vector<ActMove>> act_moves;
    std::vector<std::vector<std::pair<Rat, int>>> prob_moves;

    // Keys on reverse labels identify which residue is undone; the
    // bisimulation compares label pomsets only, so they are stripped here.
    static std::string keyless(const StepLabel& l) {
        StepLabel copy = l;
        for (auto& a : copy.actions) a.key.reset();
        copy.normalize();
        return copy.text();
    }

    RefineState(const Lts& a, const Lts& b) : l1(&a), l2(&b) {
        n1 = static_cast<int>(a.nodes.size());
        n = n1 + static_cast<int>(b.nodes.size());
        act_moves.resize(n);
        prob_moves.resize(n);
        for (const auto& e : a.act_edges)
            act_moves[e.from].push_back({e.forward, keyless(e.label), e.to});
        for (const auto& e : b.act_edges)
            act_moves[e.from + n1].push_back({e.forward, keyless(e.label), e.to + n1});
        for (const auto& e : a.prob_edges) prob_moves[e.from].push_back({e.weight, e.to});
        for (const auto& e : b.prob_edges)
            prob_moves[e.from + n1].push_back({e.weight, e.to + n1});
    }

    bool terminated(int i) const {
        return !node(i).prob_phase && act_moves[i].empty() &&
               keys_of(node(i).config.process).empty();
    }

    std::string act_signature(int i) const {
        std::set<std::string> sig;
        for (const auto& m : act_moves[i])
            sig.insert((m.forward ? "f/" : "r/") + m.label + "/" + std::to_string(block[m.to]));
        std::string out;
        for (const auto& s : sig) out += s + ";";
        return out;
    }

    // An action-phase node resolves to itself with weight one, which lets a
    // vacuous probabilistic phase on one side match its absence on the other.
    std::string prob_signature(int i) const {
        std::map<int, Rat> dist;
        if (node(i).prob_phase)
            for (const auto& [w, to] : prob_moves[i]) dist[block[to]] += w;
        else
            dist[block[i]] = Rat(1);
        std::string out;
        for (const auto& [b, w] : dist) out += std::to_string(b) + ":" + to_string(w) + ";";
        return out;
    }

    std::string signature(int i) const {
        return act_signature(i) + "|" + prob_signature(i);
    }

    void run() {
        block.assign(n, 0);
        history.push_back(block);
        for (;;) {
            std::map<std::string, int> fresh;
            std::vector<int> next(n);
            for (int i = 0; i < n; ++i) {
                std::string key = std::to_string(block[i]) + "|" + signature(i);
                auto it = fresh.find(key);
                if (it == fresh.end()) it = fresh.emplace(key, static_cast<int>(fresh.size())).first;
                next[i] = it->second;
            }
            bool changed = next != block;
            block = std::move(next);
            history.push_back(block);
            if (!changed) break;
        }
    }

    // Sanity pass: within every block all nodes offer the same
    // (direction, label, target-block) set and the same distribution over
    // blocks.
    bool validate() const {
        std::map<int, std::string> rep;
        for (int i = 0; i < n; ++i) {
            auto [it, fresh_entry] = rep.emplace(block[i], signature(i));
            if (!fresh_entry && it->second != signature(i)) return false;
        }
        return true;
    }

    int split_round(int u, int v) const {
        for (size_t r = 0; r < history.size(); ++r)
            if (history[r][u] != history[r][v]) return static_cast<int>(r);
        return -1;
    }

    // Builds a replayable script from a distinguishing pair.
    std::vector<std::string> counterexample(int u, int v) const {
        std::vector<std::string> script;
        int guard = 0;
        while (guard++ < 1000) {
            int r = split_round(u, v);
            if (r < 0) break;  // should not happen for distinguishable pairs
            const auto& prev = history[r == 0 ? 0 : r - 1];
            if (terminated(u) != terminated(v)) {
                script.push_back(std::string(terminated(u) ? "left" : "right") +
                                 " is terminated, the other side is not");
                return script;
            }
            // Resolution distributions over classes; an act node resolves to
            // itself with weight one.
            auto dist_of = [&](int i) {
                std::map<int, Rat> d;
                if (node(i).prob_phase)
                    for (const auto& [w, to] : prob_moves[i]) d[prev[to]] += w;
                else
                    d[prev[i]] = Rat(1);
                return d;
            };
            std::map<int, Rat> du = dist_of(u), dv = dist_of(v);
            if (du != dv) {
                int cls = -1;
                Rat wl(0), wr(0);
                for (const auto& [c, w] : du) {
                    auto it = dv.find(c);
                    Rat other = it == dv.end() ? Rat(0) : it->second;
                    if (w != other) {
                        cls = c;
                        wl = w;
                        wr = other;
                        break;
                    }
                }
                if (cls < 0)
                    for (const auto& [c, w] : dv)
                        if (!du.count(c)) {
                            cls = c;
                            wr = w;
                        }
                script.push_back("prob: left reaches a class with weight " + to_string(wl) +
                                 ", right with " + to_string(wr));
                if (wl != Rat(0) && wr != Rat(0)) {
                    int u2 = node(u).prob_phase ? -1 : u;
                    int v2 = node(v).prob_phase ? -1 : v;
                    if (node(u).prob_phase)
                        for (const auto& [w2, to] : prob_moves[u])
                            if (prev[to] == cls) u2 = to;
                    if (node(v).prob_phase)
                        for (const auto& [w2, to] : prob_moves[v])
                            if (prev[to] == cls) v2 = to;
                    if (u2 >= 0 && v2 >= 0 && split_round(u2, v2) >= 0) {
                        u = u2;
                        v = v2;
                        continue;
                    }
                }
                return script;
            }
            // Action phase: find a move one side has into a class the other
            // cannot reach with the same label and direction.
            auto moves_into = [&](int node_id, bool fwd, const std::string& lab) {
                std::set<int> classes;
                for (const auto& m : act_moves[node_id])
                    if (m.forward == fwd && m.label == lab) classes.insert(prev[m.to]);
                return classes;
            };
            std::set<std::pair<bool, std::string>> labels;
            for (const auto& m : act_moves[u]) labels.insert({m.forward, m.label});
            for (const auto& m : act_moves[v]) labels.insert({m.forward, m.label});
            for (const auto& [fwd, lab] : labels) {
                std::set<int> cu = moves_into(u, fwd, lab), cv = moves_into(v, fwd, lab);
                std::string dir = fwd ? "forward" : "reverse";
                for (int cls : cu)
                    if (!cv.count(cls)) {
                        script.push_back(dir + " " + lab);
                        if (cv.empty()) {
                            script.back() += "   # left offers this; right cannot";
                            return script;
                        }
                        int u2 = -1, v2 = -1;
                        for (const auto& m : act_moves[u])
                            if (m.forward == fwd && m.label == lab && prev[m.to] == cls) u2 = m.to;
                        for (const auto& m : act_moves[v])
                            if (m.forward == fwd && m.label == lab) v2 = m.to;
                        u = u2;
                        v = v2;
                        goto next_round;
                    }
                for (int cls : cv)
                    if (!cu.count(cls)) {
                        script.push_back(dir + " " + lab + "   # right offers this; left " +
                                         (cu.empty() ? "cannot" : "reaches a different class"));
                        if (cu.empty()) return script;
                        int u2 = -1, v2 = -1;
                        for (const auto& m : act_moves[v])
                            if (m.forward == fwd && m.label == lab && prev[m.to] == cls) v2 = m.to;
                        for (const auto& m : act_moves[u])
                            if (m.forward == fwd && m.label == lab) u2 = m.to;
                        u = u2;
                        v = v2;
                        goto next_round;
                    }
            }
            script.push_back("states split but no distinguishing move found");
            return script;
        next_round:;
        }
        return script;
    }
};

}  // namespace detail

inline std::vector<DataState> effective_initial_states(const EffectModel& m,
                                                       const EquivOptions& opts) {
    if (!opts.initial_states.empty()) return opts.initial_states;
    return m.states();
}

inline EquivResult step_bisimilar_fr(const Process& p, const Process& q,
                                     const IdentifierEnv& env, const EffectModel& model,
                                     const EquivOptions& opts = {}) {
    NameSet universe = opts.universe_override
                           ? *opts.universe_override
                           : set_union(free_names(p), free_names(q));
    EquivResult result;
    result.equivalent = true;
    for (const DataState& s0 : effective_initial_states(model, opts)) {
        SemCtx ctx(model, env, universe, opts.features);
        Lts l1 = build_lts(Config{p, s0}, ctx, opts.bounds);
        Lts l2 = build_lts(Config{q, s0}, ctx, opts.bounds);
        if (l1.truncated() || l2.truncated())
            fail("Truncated", "bounds cut the state space; enlarge max-nodes/max-depth");
        detail::RefineState re(l1, l2);
        re.run();
        if (!re.validate()) fail("InvariantViolation", "refinement produced an unstable partition");
        int u0 = l1.initial, v0 = l2.initial + re.n1;
        if (re.block[u0] != re.block[v0]) {
            result.equivalent = false;
            result.summary = "distinguished at initial state " + s0.text();
            result.counterexample = re.counterexample(u0, v0);
            return result;
        }
        result.summary = "bisimilar: " + std::to_string(l1.nodes.size()) + "+" +
                         std::to_string(l2.nodes.size()) + " states, " +
                         std::to_string(*std::max_element(re.block.begin(), re.block.end()) + 1) +
                         " classes";
    }
    return result;
}

}  // namespace pitc
