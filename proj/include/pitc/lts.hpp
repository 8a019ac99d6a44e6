#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "printer.hpp"
#include "semantics.hpp"

namespace pitc {

namespace detail {

// Canonical serialization of a config together with its key memory. Binders
// are renamed to the canonical family on the fly; stored continuations are
// serialized in the scope of their keyed node so that histories reaching the
// same behavior collapse to the same node.
struct CanonWriter {
    const KeyMemory* mem;
    std::map<Name, Name> env;
    int next = 0;
    std::string out;

    std::string name(const Name& n) {
        auto it = env.find(n);
        return (it == env.end() ? n : it->second).id;
    }

    void binder_scope(const Name& binder, const Process& body, const char* tag) {
        Name canon = canonical_binder(next++);
        auto saved = env;
        env[binder] = canon;
        out += tag;
        out += '(' + canon.id + ')';
        walk(body);
        env = saved;
    }

    void memory_of(Key k) {
        if (!mem) return;
        auto it = mem->keys.find(k);
        if (it == mem->keys.end()) return;
        const KeyRecord& rec = it->second;
        out += "{m:";
        walk(rec.original);
        if (rec.fresh_input) out += ";f";
        if (rec.open)
            out += ";o(" + rec.open->orig_binder.id + "," + rec.open->placeholder.id + "," +
                   std::to_string(rec.open->offset) + ")";
        out += '}';
    }

    void walk(const Process& p) {
        using K = Process::Kind;
        switch (p.kind()) {
            case K::Nil: out += '0'; return;
            case K::Ident: {
                out += 'A' + p.constant().id + '(';
                for (const auto& a : p.args()) out += name(a) + ',';
                out += ')';
                return;
            }
            case K::GuardPfx:
                out += "g[" + p.guard().text() + "].";
                walk(p.cont());
                return;
            case K::Tau:
                out += "t.";
                walk(p.cont());
                return;
            case K::Out:
                out += "o(" + name(p.subject()) + ',' + name(p.object()) + ").";
                walk(p.cont());
                return;
            case K::In: {
                Name canon = canonical_binder(next++);
                auto saved = env;
                env[p.binder()] = canon;
                out += "i(" + name(p.subject()) + ';' + canon.id + ").";
                walk(p.cont());
                env = saved;
                return;
            }
            case K::KeyedTau:
                out += "T[" + std::to_string(p.key()) + ']';
                memory_of(p.key());
                out += '.';
                walk(p.cont());
                return;
            case K::KeyedOut:
                out += "O(" + name(p.subject()) + ',' + name(p.object()) + ")[" +
                       std::to_string(p.key()) + ']';
                memory_of(p.key());
                out += '.';
                walk(p.cont());
                return;
            case K::KeyedIn:
                out += "I(" + name(p.subject()) + ',' + name(p.received()) + ";" +
                       p.binder().id + ")[" + std::to_string(p.key()) + ']';
                memory_of(p.key());
                out += '.';
                walk(p.cont());
                return;
            case K::Marked:
                out += '^';
                walk(p.cont());
                return;
            case K::Res: binder_scope(p.binder(), p.cont(), "r"); return;
            case K::Sum:
                out += "(+ ";
                walk(p.left());
                out += ' ';
                walk(p.right());
                out += ')';
                return;
            case K::BoxSum:
                out += "(# " + to_string(p.weight()) + ' ';
                walk(p.left());
                out += ' ';
                walk(p.right());
                out += ')';
                return;
            case K::Par:
                out += "(| ";
                walk(p.left());
                out += ' ';
                walk(p.right());
                out += ')';
                return;
        }
    }
};

}  // namespace detail

// Stable identity of an operational state: alpha-normal process, data state,
// and the behavior-relevant part of the memory (groups renumbered
// canonically, firing order kept as relative ranks).
inline std::string canonical_key(const Config& c, const KeyMemory& mem) {
    detail::CanonWriter w{&mem};
    w.walk(c.process);
    std::string out = w.out + "|" + c.state.text();

    std::vector<const GroupRecord*> groups;
    for (const auto& [_, g] : mem.groups) groups.push_back(&g);
    std::sort(groups.begin(), groups.end(),
              [](const GroupRecord* a, const GroupRecord* b) { return a->keys < b->keys; });
    std::vector<const GroupRecord*> by_seq = groups;
    std::sort(by_seq.begin(), by_seq.end(),
              [](const GroupRecord* a, const GroupRecord* b) { return a->seq < b->seq; });
    auto rank = [&](const GroupRecord* g) {
        for (size_t i = 0; i < by_seq.size(); ++i)
            if (by_seq[i] == g) return i;
        return size_t(0);
    };
    for (const GroupRecord* g : groups) {
        out += "|G[";
        for (Key k : g->keys) out += std::to_string(k) + ",";
        out += "]s" + g->snapshot.text() + "r" + std::to_string(rank(g));
        for (auto& [o, i] : g->com_pairs)
            out += "c(" + std::to_string(o) + "," + std::to_string(i) + ")";
        if (g->close_binder) out += "w(" + g->close_binder->id + ")";
    }
    return out;
}

struct LtsBounds {
    int max_nodes = 100000;
    int max_depth = 10000;
};

// Alternating probabilistic/action transition graph, explored breadth-first
// up to explicit bounds. Truncation is recorded on the node whose expansion
// was cut, never silent.
struct Lts {
    struct Node {
        Config config;
        KeyMemory memory;
        bool prob_phase = false;
        bool truncated = false;
        int depth = 0;
    };
    struct ProbEdge {
        int from, to;
        Rat weight;
    };
    struct ActEdge {
        int from, to;
        StepLabel label;
        bool forward = true;
    };

    std::vector<Node> nodes;
    std::vector<ProbEdge> prob_edges;
    std::vector<ActEdge> act_edges;
    int initial = 0;

    bool truncated() const {
        for (const auto& n : nodes)
            if (n.truncated) return true;
        return false;
    }

    std::vector<std::vector<int>> prob_out_index() const {
        std::vector<std::vector<int>> idx(nodes.size());
        for (int i = 0; i < static_cast<int>(prob_edges.size()); ++i)
            idx[prob_edges[i].from].push_back(i);
        return idx;
    }
    std::vector<std::vector<int>> act_out_index() const {
        std::vector<std::vector<int>> idx(nodes.size());
        for (int i = 0; i < static_cast<int>(act_edges.size()); ++i)
            idx[act_edges[i].from].push_back(i);
        return idx;
    }
};

inline Lts build_lts(const Config& c0, const SemCtx& ctx, LtsBounds bounds = {}) {
    if (!check_weakly_guarded(*ctx.env))
        fail("NotWeaklyGuarded", "identifier environment is not weakly guarded");

    Lts lts;
    std::map<std::string, int> ids;

    struct WorkItem {
        int id;
    };
    std::deque<int> frontier;

    auto intern = [&](const Config& c, const KeyMemory& mem, int depth,
                      int* from_for_trunc) -> int {
        std::string key = canonical_key(c, mem);
        auto it = ids.find(key);
        if (it != ids.end()) return it->second;
        if (static_cast<int>(lts.nodes.size()) >= bounds.max_nodes) {
            if (from_for_trunc) lts.nodes[*from_for_trunc].truncated = true;
            return -1;
        }
        int id = static_cast<int>(lts.nodes.size());
        ids.emplace(std::move(key), id);
        Lts::Node node;
        node.config = c;
        node.memory = mem;
        node.depth = depth;
        node.prob_phase = !prob_resolved(c, ctx);
        lts.nodes.push_back(std::move(node));
        frontier.push_back(id);
        return id;
    };

    lts.initial = intern(c0, KeyMemory{}, 0, nullptr);
    while (!frontier.empty()) {
        int id = frontier.front();
        frontier.pop_front();
        // Copies: intern() may grow the node vector while we expand.
        Config config = lts.nodes[id].config;
        KeyMemory memory = lts.nodes[id].memory;
        int depth = lts.nodes[id].depth;
        if (depth >= bounds.max_depth) {
            lts.nodes[id].truncated = true;
            continue;
        }
        if (lts.nodes[id].prob_phase) {
            for (const auto& o : prob_transitions(config, ctx)) {
                int to = intern(o.target, memory, depth + 1, &id);
                if (to < 0) continue;
                lts.prob_edges.push_back({id, to, o.weight});
            }
            continue;
        }
        for (const auto& s : forward_transitions(config, memory, ctx)) {
            int to = intern(s.target, s.memory, depth + 1, &id);
            if (to < 0) continue;
            lts.act_edges.push_back({id, to, s.label, true});
        }
        for (const auto& s : reverse_transitions(config, memory, ctx)) {
            int to = intern(s.target, s.memory, depth + 1, &id);
            if (to < 0) continue;
            lts.act_edges.push_back({id, to, s.label, false});
        }
    }
    return lts;
}

// ---------------------------------------------------------------------------
// Exports.

inline std::string lts_to_dot(const Lts& lts) {
    std::string out = "digraph lts {\n";
    for (size_t i = 0; i < lts.nodes.size(); ++i) {
        const auto& n = lts.nodes[i];
        std::string label = pretty_print(n.config.process) + "\\n" + n.config.state.text();
        out += "  n" + std::to_string(i) + " [shape=" +
               (n.prob_phase ? std::string("ellipse") : std::string("box")) + ", label=\"" +
               label + (n.truncated ? " (truncated)" : "") + "\"";
        if (static_cast<int>(i) == lts.initial) out += ", penwidth=2";
        out += "];\n";
    }
    for (const auto& e : lts.prob_edges)
        out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) +
               " [style=dashed, label=\"p=" + to_string(e.weight) + "\"];\n";
    for (const auto& e : lts.act_edges)
        out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) + " [label=\"" +
               e.label.text() + "\"" + (e.forward ? "" : ", color=gray, style=bold") + "];\n";
    out += "}\n";
    return out;
}

inline nlohmann::json lts_to_json(const Lts& lts) {
    nlohmann::json j;
    j["initial"] = lts.initial;
    j["truncated"] = lts.truncated();
    j["nodes"] = nlohmann::json::array();
    for (size_t i = 0; i < lts.nodes.size(); ++i) {
        const auto& n = lts.nodes[i];
        j["nodes"].push_back({{"id", i},
                              {"process", pretty_print(n.config.process)},
                              {"state", n.config.state.text()},
                              {"phase", n.prob_phase ? "prob" : "act"},
                              {"truncated", n.truncated}});
    }
    j["prob_edges"] = nlohmann::json::array();
    for (const auto& e : lts.prob_edges)
        j["prob_edges"].push_back(
            {{"from", e.from}, {"to", e.to}, {"weight", to_string(e.weight)}});
    j["act_edges"] = nlohmann::json::array();
    for (const auto& e : lts.act_edges)
        j["act_edges"].push_back({{"from", e.from},
                                  {"to", e.to},
                                  {"label", e.label.text()},
                                  {"dir", e.forward ? "forward" : "reverse"}});
    return j;
}

}  // namespace pitc
