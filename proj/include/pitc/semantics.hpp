#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "errors.hpp"
#include "identifiers.hpp"
#include "labels.hpp"
#include "process.hpp"
#include "state.hpp"

namespace pitc {

// Operational state: a process paired with a data state.
struct Config {
    Process process;
    DataState state;

    bool operator==(const Config& o) const {
        return process == o.process && state == o.state;
    }
};

struct ProbOutcome {
    Rat weight;
    Config target;
};

// Which sub-calculus is active. Disabling a feature removes the
// corresponding rules: without reversibility prefixes are consumed rather
// than keyed, without probabilism there is no resolution phase, without
// guards the grammar rejects guard prefixes.
struct Features {
    bool reversibility = true;
    bool probability = true;
    bool guards = true;
};

// ---------------------------------------------------------------------------
// Key memory: everything a step needs to run backwards. Each forward step
// forms one group; a group is undone atomically (the reverse table pairs
// all premises of a joint step on one key).

struct OpenInfo {
    Name orig_binder;   // the restriction that was opened
    Name placeholder;   // the extruded name in the label
    int offset = 0;     // term nodes between the prefix and the removed binder
};

struct KeyRecord {
    int group = 0;
    Process original;   // continuation at firing time, before any substitution
    bool fresh_input = false;
    std::optional<OpenInfo> open;
};

struct GroupRecord {
    int id = 0;
    int seq = 0;  // firing order, monotone within one memory
    std::vector<Key> keys;  // traversal order of the fired prefixes
    DataState snapshot;     // data state the step fired from
    std::vector<std::pair<Key, Key>> com_pairs;  // (output key, input key) -> tau
    std::optional<Name> close_binder;            // CLOSE reinstalled this restriction
};

struct KeyMemory {
    std::map<Key, KeyRecord> keys;
    std::map<int, GroupRecord> groups;
    int next_group = 1;
    int next_seq = 1;

    bool empty() const { return keys.empty(); }
};

// Evaluation context shared by the transition functions.
struct SemCtx {
    const EffectModel* model;
    const IdentifierEnv* env;
    NameSet universe;  // input instantiation basis (callers usually pass fn of the term(s))
    Features features;

    SemCtx(const EffectModel& m, const IdentifierEnv& e, NameSet uni, Features f = {})
        : model(&m), env(&e), universe(std::move(uni)), features(f) {}
};

// ---------------------------------------------------------------------------
// Probabilistic phase.

namespace detail {

using Weighted = std::vector<std::pair<Rat, Process>>;

inline Weighted resolve_rec(const Process& p, const SemCtx& ctx, int depth) {
    using K = Process::Kind;
    if (depth > 4096) fail("DepthExceeded", "identifier unfolding does not converge");
    switch (p.kind()) {
        case K::Nil: return {{Rat(1), p}};
        case K::Ident: return resolve_rec(unfold_identifier(p, *ctx.env), ctx, depth + 1);
        case K::GuardPfx: {
            Weighted out;
            for (auto& [w, q] : resolve_rec(p.cont(), ctx, depth))
                out.emplace_back(w, Process::guard_prefix(p.guard(), q));
            return out;
        }
        case K::Tau:
        case K::Out:
        case K::In:
            if (!ctx.features.probability) return {{Rat(1), p}};
            return {{Rat(1), Process::marked(p)}};
        case K::Marked: return {{Rat(1), p}};
        case K::KeyedTau: {
            Weighted out;
            for (auto& [w, q] : resolve_rec(p.cont(), ctx, depth))
                out.emplace_back(w, Process::keyed_tau(p.key(), q));
            return out;
        }
        case K::KeyedOut: {
            Weighted out;
            for (auto& [w, q] : resolve_rec(p.cont(), ctx, depth))
                out.emplace_back(w, Process::keyed_out(p.subject(), p.object(), p.key(), q));
            return out;
        }
        case K::KeyedIn: {
            Weighted out;
            for (auto& [w, q] : resolve_rec(p.cont(), ctx, depth))
                out.emplace_back(
                    w, Process::keyed_in(p.subject(), p.received(), p.binder(), p.key(), q));
            return out;
        }
        case K::Res: {
            Weighted out;
            for (auto& [w, q] : resolve_rec(p.cont(), ctx, depth))
                out.emplace_back(w, Process::res(p.binder(), q));
            return out;
        }
        case K::Sum: {
            // A side holding keys is the branch already taken; only it keeps
            // resolving. A fresh sum resolves both sides together (PSUM).
            if (has_keys(p.left())) {
                Weighted out;
                for (auto& [w, q] : resolve_rec(p.left(), ctx, depth))
                    out.emplace_back(w, Process::sum(q, p.right()));
                return out;
            }
            if (has_keys(p.right())) {
                Weighted out;
                for (auto& [w, q] : resolve_rec(p.right(), ctx, depth))
                    out.emplace_back(w, Process::sum(p.left(), q));
                return out;
            }
            Weighted out;
            for (auto& [wl, l] : resolve_rec(p.left(), ctx, depth))
                for (auto& [wr, r] : resolve_rec(p.right(), ctx, depth))
                    out.emplace_back(wl * wr, Process::sum(l, r));
            return out;
        }
        case K::BoxSum: {
            Weighted out;
            for (auto& [w, q] : resolve_rec(p.left(), ctx, depth))
                out.emplace_back(p.weight() * w, q);
            for (auto& [w, q] : resolve_rec(p.right(), ctx, depth))
                out.emplace_back((Rat(1) - p.weight()) * w, q);
            return out;
        }
        case K::Par: {
            Weighted out;
            for (auto& [wl, l] : resolve_rec(p.left(), ctx, depth))
                for (auto& [wr, r] : resolve_rec(p.right(), ctx, depth))
                    out.emplace_back(wl * wr, Process::par(l, r));
            return out;
        }
    }
    return {{Rat(1), p}};
}

}  // namespace detail

// Resolves every box-sum (each outcome keeps one branch; weights multiply
// across independent box-sums), unfolds identifiers, and marks the enabled
// unkeyed prefixes. Outcomes with the same target are merged; outcomes that
// can never act again (no mark, no key) are dropped and the rest
// renormalized, which is what makes the nil branch of a box-sum vacuous.
inline std::vector<ProbOutcome> prob_transitions(const Config& c, const SemCtx& ctx) {
    if (!ctx.features.probability) return {{Rat(1), c}};
    auto raw = detail::resolve_rec(c.process, ctx, 0);

    std::map<std::string, size_t> index;
    std::vector<std::pair<Rat, Process>> merged;
    for (auto& [w, q] : raw) {
        std::string k = repr(q);
        auto it = index.find(k);
        if (it == index.end()) {
            index.emplace(std::move(k), merged.size());
            merged.emplace_back(w, q);
        } else {
            merged[it->second].first += w;
        }
    }

    auto alive = [](const Process& q) { return has_marks(q) || has_keys(q); };
    Rat live_mass(0);
    bool any_alive = false;
    for (auto& [w, q] : merged)
        if (alive(q)) {
            any_alive = true;
            live_mass += w;
        }

    std::vector<ProbOutcome> out;
    for (auto& [w, q] : merged) {
        if (any_alive && !alive(q)) continue;
        Rat weight = any_alive ? w / live_mass : w;
        out.push_back(ProbOutcome{weight, Config{q, c.state}});
    }
    return out;
}

// True when the probabilistic phase is the identity on this config, i.e.
// the config is ready for (or past) the action phase.
inline bool prob_resolved(const Config& c, const SemCtx& ctx) {
    auto outs = prob_transitions(c, ctx);
    return outs.size() == 1 && outs.front().target.process == c.process;
}

// ---------------------------------------------------------------------------
// Forward action phase.

struct Step {
    StepLabel label;
    Config target;
    KeyMemory memory;
};

namespace detail {

// Temporary keys are negative until the step is emitted.
struct ActionInstance {
    ActionLabel label;  // evolves as the candidate is lifted (OPEN rewrites it)
    int tmp_key = 0;    // negative placeholder, 0 when reversibility is off
    int lift = 0;       // enclosing nodes passed, for open-offset bookkeeping
    Process original;   // continuation at the prefix before substitution
    Name input_binder;  // for inputs: the original bound name
    bool fresh_input = false;
    std::optional<OpenInfo> open;
};

struct Candidate {
    std::vector<ActionInstance> actions;  // traversal order
    Process term;
    std::vector<std::pair<int, int>> com_pairs;  // tmp keys (out, in)
    std::vector<std::pair<int, Name>> close_recs;  // out tmp key -> binder
    NameSet placeholders;  // fresh names used by opens / fresh inputs

    bool com_consumed(int tmp) const {
        for (auto& [o, i] : com_pairs)
            if (o == tmp || i == tmp) return true;
        return false;
    }

    // The visible multiset of actions: com pairs collapse to tau.
    std::vector<ActionLabel> labels() const {
        std::vector<ActionLabel> out;
        for (const auto& a : actions)
            if (!com_consumed(a.tmp_key)) out.push_back(a.label);
        for (size_t i = 0; i < com_pairs.size(); ++i) out.push_back(ActionLabel::tau());
        return out;
    }
};

inline void lift_through_node(Candidate& c) {
    for (auto& a : c.actions) ++a.lift;
}

inline bool labels_mention(const std::vector<ActionLabel>& labels, const Name& y) {
    for (const auto& l : labels)
        if (l.names().count(y)) return true;
    return false;
}

// Rename one placeholder everywhere in a candidate (terms, labels, records).
inline void rename_placeholder(Candidate& c, const Name& from, const Name& to) {
    Subst s{{from, to}};
    c.term = substitute(c.term, s);
    for (auto& a : c.actions) {
        if (a.label.obj == from) a.label.obj = to;
        if (a.open && a.open->placeholder == from) a.open->placeholder = to;
    }
    c.placeholders.erase(from);
    c.placeholders.insert(to);
}

struct ForwardWalk {
    const SemCtx& ctx;
    const DataState& state;
    NameSet config_names;  // all names of the whole config's process
    Name fresh;            // canonical fresh instantiation/extrusion name
    mutable int tmp_seq = 0;  // temporary key supply, unique per enumeration

    ForwardWalk(const SemCtx& c, const Config& cfg) : ctx(c), state(cfg.state) {
        // Placeholders avoid the universe and the free names only. Bound
        // names need no avoidance (substitution is capture-avoiding), and
        // keeping the choice independent of binder spellings makes matched
        // runs of bisimilar terms pick identical placeholders.
        config_names = set_union(free_names(cfg.process), ctx.universe);
        fresh = fresh_name(config_names);
    }

    Name next_placeholder(const Candidate& a, const Candidate& b) const {
        NameSet avoid = set_union(config_names, ctx.universe);
        avoid.insert(a.placeholders.begin(), a.placeholders.end());
        avoid.insert(b.placeholders.begin(), b.placeholders.end());
        return fresh_name(avoid);
    }

    std::vector<Candidate> enumerate(const Process& p, const NameSet& scope) const {
        using K = Process::Kind;
        switch (p.kind()) {
            case K::Nil:
            case K::Ident:   // identifiers are unfolded by the probabilistic phase
            case K::BoxSum:  // unresolved box-sums cannot act
                return {};
            case K::Tau:
            case K::Out:
            case K::In:
                // Without the probabilistic phase there is no marking; the
                // plain prefixes fire directly.
                if (!ctx.features.probability) return fire_prefix(p, scope);
                return {};
            case K::Marked: return fire_prefix(p.cont(), scope);
            case K::GuardPfx: {
                if (!test(p.guard(), state, *ctx.model)) return {};
                auto inner = enumerate(p.cont(), scope);
                for (auto& c : inner) {
                    c.term = Process::guard_prefix(p.guard(), c.term);
                    lift_through_node(c);
                }
                return inner;
            }
            case K::KeyedTau:
            case K::KeyedOut:
            case K::KeyedIn: {
                auto inner = enumerate(p.cont(), scope);
                for (auto& c : inner) {
                    c.term = rewrap_keyed(p, c.term);
                    lift_through_node(c);
                }
                return inner;
            }
            case K::Res: return through_restriction(p, scope);
            case K::Sum: return through_sum(p, scope);
            case K::Par: return through_par(p, scope);
        }
        return {};
    }

    std::vector<Candidate> fire_prefix(const Process& pfx, const NameSet& scope) const {
        std::vector<Candidate> out;
        const bool rev = ctx.features.reversibility;
        switch (pfx.kind()) {
            case Process::Kind::Tau: {
                Candidate c;
                ActionInstance a;
                a.label = ActionLabel::tau();
                a.tmp_key = rev ? --tmp_seq : 0;
                a.original = pfx.cont();
                c.actions.push_back(a);
                c.term = rev ? Process::keyed_tau(a.tmp_key, pfx.cont()) : pfx.cont();
                out.push_back(std::move(c));
                return out;
            }
            case Process::Kind::Out: {
                Candidate c;
                ActionInstance a;
                a.label = ActionLabel::free_out(pfx.subject(), pfx.object());
                a.tmp_key = rev ? --tmp_seq : 0;
                a.original = pfx.cont();
                c.actions.push_back(a);
                c.term = rev ? Process::keyed_out(pfx.subject(), pfx.object(), a.tmp_key,
                                                  pfx.cont())
                             : pfx.cont();
                out.push_back(std::move(c));
                return out;
            }
            case Process::Kind::In: {
                // One instance per name of the instantiation basis (the
                // configured universe plus restriction binders in scope)
                // plus one fresh placeholder.
                NameSet basis = set_union(ctx.universe, scope);
                std::vector<std::pair<Name, bool>> received;
                for (const auto& w : basis) received.emplace_back(w, false);
                received.emplace_back(fresh, true);
                for (auto& [w, is_fresh] : received) {
                    if (is_fresh) {
                        // w must satisfy w not in fn((z)P); shadowed binders
                        // can force the next member of the family.
                        NameSet excluded = free_names(pfx.cont());
                        excluded.erase(pfx.binder());
                        if (excluded.count(w))
                            w = fresh_name(set_union(config_names, excluded));
                    }
                    Candidate c;
                    ActionInstance a;
                    a.label = ActionLabel::input(pfx.subject(), w);
                    a.label.obj_is_placeholder = is_fresh;
                    a.fresh_input = is_fresh;
                    a.input_binder = pfx.binder();
                    a.tmp_key = rev ? --tmp_seq : 0;
                    a.original = pfx.cont();
                    Process body = substitute(pfx.cont(), Subst{{pfx.binder(), w}});
                    c.actions.push_back(a);
                    c.term = rev ? Process::keyed_in(pfx.subject(), w, pfx.binder(), a.tmp_key,
                                                     body)
                                 : body;
                    if (is_fresh) c.placeholders.insert(w);
                    out.push_back(std::move(c));
                }
                return out;
            }
            default: return out;
        }
    }

    static Process rewrap_keyed(const Process& node, Process inner) {
        switch (node.kind()) {
            case Process::Kind::KeyedTau: return Process::keyed_tau(node.key(), std::move(inner));
            case Process::Kind::KeyedOut:
                return Process::keyed_out(node.subject(), node.object(), node.key(),
                                          std::move(inner));
            case Process::Kind::KeyedIn:
                return Process::keyed_in(node.subject(), node.received(), node.binder(),
                                         node.key(), std::move(inner));
            default: return inner;
        }
    }

    std::vector<Candidate> through_restriction(const Process& p, const NameSet& scope) const {
        const Name& y = p.binder();
        NameSet inner_scope = scope;
        inner_scope.insert(y);
        auto inner = enumerate(p.cont(), inner_scope);
        std::vector<Candidate> out;
        for (auto& c : inner) {
            std::vector<size_t> open_idx;
            bool blocked = false;
            for (size_t i = 0; i < c.actions.size(); ++i) {
                const auto& a = c.actions[i];
                if (c.com_consumed(a.tmp_key)) continue;  // synchronized below; label is tau
                if (a.label.sort == ActionLabel::Sort::FreeOut && a.label.obj == y) {
                    if (a.label.subj == y) {
                        blocked = true;  // the subject cannot be extruded
                        break;
                    }
                    open_idx.push_back(i);
                } else if (a.label.names().count(y)) {
                    blocked = true;  // RES: y must not occur in the label
                    break;
                }
            }
            if (blocked) continue;
            if (open_idx.empty()) {
                c.term = Process::res(y, c.term);
                lift_through_node(c);
                out.push_back(std::move(c));
                continue;
            }
            // OPEN: every output of y converts to a bound output sharing one
            // placeholder; the restriction is removed and the subterm renamed.
            // w not in fn((y)P'), which here can also contain names bound
            // further out.
            NameSet avoid = set_union(config_names, free_names(c.term));
            avoid.insert(c.placeholders.begin(), c.placeholders.end());
            Name w = fresh_name(avoid);
            for (size_t i : open_idx) {
                auto& a = c.actions[i];
                a.label = ActionLabel::bound_out(a.label.subj, w);
                a.label.obj_is_placeholder = true;
                a.open = OpenInfo{y, w, a.lift};
            }
            c.term = substitute(c.term, Subst{{y, w}});
            c.placeholders.insert(w);
            out.push_back(std::move(c));
        }
        return out;
    }

    std::vector<Candidate> through_sum(const Process& p, const NameSet& scope) const {
        Process l = p.left(), r = p.right();
        bool lk = has_keys(l), rk = has_keys(r);
        std::vector<Candidate> out;
        if (!rk) {  // left side available unless the right was already chosen
            for (auto& c : enumerate(l, scope)) {
                c.term = Process::sum(c.term, r);
                lift_through_node(c);
                out.push_back(std::move(c));
            }
        }
        if (!lk) {
            for (auto& c : enumerate(r, scope)) {
                c.term = Process::sum(l, c.term);
                lift_through_node(c);
                out.push_back(std::move(c));
            }
        }
        if (lk && rk) fail("InvariantViolation", "both sides of a sum carry keys");
        return out;
    }

    std::vector<Candidate> through_par(const Process& p, const NameSet& scope) const {
        Process l = p.left(), r = p.right();
        auto cl = enumerate(l, scope);
        auto cr = enumerate(r, scope);
        NameSet fl = free_names(l), fr = free_names(r);
        std::vector<Candidate> out;

        if (cr.empty()) {  // PAR1: the right side cannot act
            for (auto& c : cl) {
                if (!disjoint(bound_of(c), fr)) continue;
                c.term = Process::par(c.term, r);
                lift_through_node(c);
                out.push_back(std::move(c));
            }
            return out;
        }
        if (cl.empty()) {  // PAR2
            for (auto& c : cr) {
                if (!disjoint(bound_of(c), fl)) continue;
                c.term = Process::par(l, c.term);
                lift_through_node(c);
                out.push_back(std::move(c));
            }
            return out;
        }

        // Both sides act: joint steps (PAR3/PAR4) and synchronizations
        // (COM/CLOSE). No interleaving is derivable here.
        for (const auto& a : cl)
            for (const auto& b : cr) {
                if (auto sync = try_sync(a, b, fl, fr)) out.push_back(std::move(*sync));
                else if (auto joint = try_joint(a, b, fl, fr)) out.push_back(std::move(*joint));
            }
        return out;
    }

    static NameSet bound_of(const Candidate& c) {
        NameSet out;
        for (const auto& lab : c.labels()) {
            auto b = lab.bound_names();
            out.insert(b.begin(), b.end());
        }
        return out;
    }

    static bool disjoint(const NameSet& a, const NameSet& b) {
        for (const auto& x : a)
            if (b.count(x)) return false;
        return true;
    }

    // COM / CLOSE: both sides contribute a single complementary action.
    std::optional<Candidate> try_sync(const Candidate& a, const Candidate& b, const NameSet& fl,
                                      const NameSet& fr) const {
        auto la = a.labels(), lb = b.labels();
        if (la.size() != 1 || lb.size() != 1) return std::nullopt;

        auto make = [&](const Candidate& sender, const Candidate& receiver,
                        bool sender_left) -> std::optional<Candidate> {
            ActionLabel send = sender.labels()[0], recv = receiver.labels()[0];
            if (recv.sort != ActionLabel::Sort::Input) return std::nullopt;
            bool close = send.sort == ActionLabel::Sort::BoundOut;
            if (!close && send.sort != ActionLabel::Sort::FreeOut) return std::nullopt;
            if (send.subj != recv.subj) return std::nullopt;

            Candidate rcv = receiver;
            if (close) {
                // CLOSE needs the shared placeholder; the fresh input is
                // generic, so align it with the extruded name.
                if (!recv.obj_is_placeholder) return std::nullopt;
                if (recv.obj != send.obj) rename_placeholder(rcv, recv.obj, send.obj);
            } else {
                // COM: the receiver must have been instantiated with the
                // name actually sent.
                if (recv.obj_is_placeholder || !(recv.obj == send.obj)) return std::nullopt;
            }

            Candidate c;
            const Candidate& lhs = sender_left ? sender : rcv;
            const Candidate& rhs = sender_left ? rcv : sender;
            c.actions = lhs.actions;
            c.actions.insert(c.actions.end(), rhs.actions.begin(), rhs.actions.end());
            c.com_pairs = lhs.com_pairs;
            c.com_pairs.insert(c.com_pairs.end(), rhs.com_pairs.begin(), rhs.com_pairs.end());
            c.close_recs = lhs.close_recs;
            c.close_recs.insert(c.close_recs.end(), rhs.close_recs.begin(),
                                rhs.close_recs.end());
            c.placeholders = set_union(lhs.placeholders, rhs.placeholders);
            int out_tmp = sender.actions.empty() ? 0 : only_action(sender).tmp_key;
            int in_tmp = rcv.actions.empty() ? 0 : only_action(rcv).tmp_key;
            c.com_pairs.emplace_back(out_tmp, in_tmp);
            c.term = Process::par(lhs.term, rhs.term);
            lift_through_node(c);
            if (close) {
                c.close_recs.emplace_back(out_tmp, send.obj);
                c.term = Process::res(send.obj, c.term);
                lift_through_node(c);
            }
            return c;
        };

        if (auto c = make(a, b, true)) return c;
        if (auto c = make(b, a, false)) return c;
        return std::nullopt;
    }

    static const ActionInstance& only_action(const Candidate& c) {
        // For sync pairing the candidate has exactly one unconsumed action.
        for (const auto& a : c.actions)
            if (!c.com_consumed(a.tmp_key)) return a;
        return c.actions.front();
    }

    // PAR3 (and PAR4 when two fresh inputs share the placeholder).
    std::optional<Candidate> try_joint(Candidate a, Candidate b, const NameSet& fl,
                                       const NameSet& fr) const {
        auto la = a.labels(), lb = b.labels();
        for (const auto& x : la)
            for (const auto& y : lb)
                if (ActionLabel::complementary(x, y)) return std::nullopt;

        // Fresh-placeholder hygiene across the two sides: a name used only by
        // fresh inputs on both realizes PAR4 and stays shared; any other
        // placeholder collision is two distinct fresh names and the right
        // side is renamed apart.
        NameSet shared;
        for (const auto& w : a.placeholders)
            if (b.placeholders.count(w)) shared.insert(w);
        for (const auto& w : shared) {
            bool a_par4 = placeholder_only_fresh_input(a, w);
            bool b_par4 = placeholder_only_fresh_input(b, w);
            if (a_par4 && b_par4) continue;
            rename_placeholder(b, w, next_placeholder(a, b));
        }

        // PAR3 needs the bound names of the two sides disjoint; PAR4 admits a
        // shared input object w provided w is not free under either binder.
        NameSet ba = bound_of(a), bb = bound_of(b);
        NameSet shared_inputs;
        for (const auto& w : ba) {
            if (!bb.count(w)) continue;
            if (!par4_shareable(a, w) || !par4_shareable(b, w)) return std::nullopt;
            shared_inputs.insert(w);
        }
        for (const auto& w : ba)
            if (!shared_inputs.count(w) && fr.count(w)) return std::nullopt;
        for (const auto& w : bb)
            if (!shared_inputs.count(w) && fl.count(w)) return std::nullopt;

        Candidate c;
        c.actions = a.actions;
        c.actions.insert(c.actions.end(), b.actions.begin(), b.actions.end());
        c.com_pairs = a.com_pairs;
        c.com_pairs.insert(c.com_pairs.end(), b.com_pairs.begin(), b.com_pairs.end());
        c.close_recs = a.close_recs;
        c.close_recs.insert(c.close_recs.end(), b.close_recs.begin(), b.close_recs.end());
        c.placeholders = set_union(a.placeholders, b.placeholders);
        c.term = Process::par(a.term, b.term);
        lift_through_node(c);
        return c;
    }

    static bool placeholder_only_fresh_input(const Candidate& c, const Name& w) {
        for (const auto& a : c.actions) {
            if (a.open && a.open->placeholder == w) return false;
            if (a.label.obj == w && a.label.sort == ActionLabel::Sort::BoundOut) return false;
        }
        for (const auto& a : c.actions)
            if (a.fresh_input && a.label.obj == w) return true;
        return false;
    }

    // PAR4: a bound object may be shared across the two sides only when
    // every use of it is an input receiving w with w not free under the
    // input's binder.
    static bool par4_shareable(const Candidate& c, const Name& w) {
        bool used = false;
        for (const auto& a : c.actions) {
            if (c.com_consumed(a.tmp_key)) continue;
            if (a.label.subj == w) return false;
            if (!(a.label.obj == w)) continue;
            if (a.label.sort != ActionLabel::Sort::Input) return false;
            NameSet fnz = free_names(a.original);
            fnz.erase(a.input_binder);
            if (fnz.count(w)) return false;
            used = true;
        }
        return used;
    }
};

inline Process rekey(const Process& p, const std::map<int, Key>& keymap) {
    using K = Process::Kind;
    switch (p.kind()) {
        case K::Nil:
        case K::Ident: return p;
        case K::GuardPfx: return Process::guard_prefix(p.guard(), rekey(p.cont(), keymap));
        case K::Tau: return Process::tau(rekey(p.cont(), keymap));
        case K::Out: return Process::out(p.subject(), p.object(), rekey(p.cont(), keymap));
        case K::In: return Process::in(p.subject(), p.binder(), rekey(p.cont(), keymap));
        case K::KeyedTau: {
            auto it = keymap.find(p.key());
            return Process::keyed_tau(it == keymap.end() ? p.key() : it->second,
                                      rekey(p.cont(), keymap));
        }
        case K::KeyedOut: {
            auto it = keymap.find(p.key());
            return Process::keyed_out(p.subject(), p.object(),
                                      it == keymap.end() ? p.key() : it->second,
                                      rekey(p.cont(), keymap));
        }
        case K::KeyedIn: {
            auto it = keymap.find(p.key());
            return Process::keyed_in(p.subject(), p.received(), p.binder(),
                                     it == keymap.end() ? p.key() : it->second,
                                     rekey(p.cont(), keymap));
        }
        case K::Marked: return Process::marked(rekey(p.cont(), keymap));
        case K::Res: return Process::res(p.binder(), rekey(p.cont(), keymap));
        case K::Sum: return Process::sum(rekey(p.left(), keymap), rekey(p.right(), keymap));
        case K::BoxSum:
            return Process::box_sum(p.weight(), rekey(p.left(), keymap),
                                    rekey(p.right(), keymap));
        case K::Par: return Process::par(rekey(p.left(), keymap), rekey(p.right(), keymap));
    }
    return p;
}

}  // namespace detail

// Enumerates all forward steps of a config whose enabled prefixes have been
// marked by the probabilistic phase. Fired prefixes keep a keyed residue;
// the memory gains one group per step with everything reversal needs.
inline std::vector<Step> forward_transitions(const Config& c, const KeyMemory& mem,
                                             const SemCtx& ctx) {
    detail::ForwardWalk walk(ctx, c);
    auto candidates = walk.enumerate(c.process, {});
    std::vector<Step> out;
    for (auto& cand : candidates) {
        Step step;
        // Data state: every fired action applies its channel effect to the
        // source state; results combine by union.
        bool first = true;
        DataState combined;
        for (const auto& a : cand.actions) {
            DataState d = effect(a.label.effect_kind(), c.state, *ctx.model);
            combined = first ? d : state_union(combined, d);
            first = false;
        }
        if (first) combined = c.state;

        // Visible label: unkeyed actions, com pairs as tau.
        StepLabel label;
        for (const auto& l : cand.labels()) label.actions.push_back(l);
        label.normalize();
        step.label = label;

        step.memory = mem;
        Process term = cand.term;
        if (ctx.features.reversibility) {
            // Replace temporary keys by the smallest unused real keys, in
            // traversal order of the fired prefixes.
            std::vector<Key> fresh_keys =
                allocate_keys(c.process, static_cast<int>(cand.actions.size()));
            std::map<int, Key> keymap;
            for (size_t i = 0; i < cand.actions.size(); ++i)
                keymap[cand.actions[i].tmp_key] = fresh_keys[i];

            GroupRecord group;
            group.id = step.memory.next_group++;
            group.seq = step.memory.next_seq++;
            group.snapshot = c.state;
            for (size_t i = 0; i < cand.actions.size(); ++i) {
                const auto& a = cand.actions[i];
                Key k = keymap[a.tmp_key];
                group.keys.push_back(k);
                KeyRecord rec;
                rec.group = group.id;
                rec.original = a.original;
                rec.fresh_input = a.fresh_input;
                rec.open = a.open;
                step.memory.keys[k] = rec;
            }
            for (auto& [o, i] : cand.com_pairs) group.com_pairs.emplace_back(keymap[o], keymap[i]);
            if (!cand.close_recs.empty()) group.close_binder = cand.close_recs.front().second;
            step.memory.groups[group.id] = group;

            term = detail::rekey(term, keymap);
        }
        step.target = Config{term, combined};
        out.push_back(std::move(step));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reverse action phase. A whole step group is undone at once: every key of
// the group must be maximal (nothing executed after it in its component),
// sibling components untouched by the group must be unable to act (the
// mirrored PAR premise, evaluated at the group's snapshot state), and the
// structural records in the memory must replay cleanly.

namespace detail {

struct PendingOpen {
    Name orig_binder;
    Name placeholder;
    int remaining;
};

struct UndoPiece {
    Process term;
    std::vector<ActionLabel> labels;  // keyed reverse labels; com pairs merged to tau
    std::set<Key> covered;
    std::vector<PendingOpen> opens;
    std::set<Key> merged;  // keys whose labels were collapsed into a tau
    bool close_removed = false;
};

// Keys that have no key executed after them in their own component.
inline std::set<Key> maximal_keys(const Process& p) {
    std::set<Key> out;
    struct Rec {
        std::set<Key>* out;
        std::set<Key> operator()(const Process& q) {
            using K = Process::Kind;
            switch (q.kind()) {
                case K::Nil:
                case K::Ident: return {};
                case K::KeyedTau:
                case K::KeyedOut:
                case K::KeyedIn: {
                    std::set<Key> below = (*this)(q.cont());
                    if (below.empty()) out->insert(q.key());
                    below.insert(q.key());
                    return below;
                }
                case K::GuardPfx:
                case K::Tau:
                case K::Out:
                case K::In:
                case K::Marked:
                case K::Res: return (*this)(q.cont());
                case K::Sum:
                case K::BoxSum:
                case K::Par: {
                    std::set<Key> l = (*this)(q.left());
                    std::set<Key> r = (*this)(q.right());
                    l.insert(r.begin(), r.end());
                    return l;
                }
            }
            return {};
        }
    } rec{&out};
    rec(p);
    return out;
}

struct ReverseWalk {
    const SemCtx& ctx;
    const KeyMemory& mem;
    const GroupRecord& group;

    bool key_in_group(Key k) const {
        return std::find(group.keys.begin(), group.keys.end(), k) != group.keys.end();
    }

    std::optional<Key> com_partner_merged(UndoPiece& piece) const {
        // Merge com pairs whose two ends are both covered; returns nothing.
        for (const auto& [o, i] : group.com_pairs) {
            if (piece.merged.count(o)) continue;
            if (piece.covered.count(o) && piece.covered.count(i)) {
                std::vector<ActionLabel> kept;
                for (auto& l : piece.labels)
                    if (!(l.key && (*l.key == o || *l.key == i))) kept.push_back(l);
                kept.push_back(ActionLabel::tau());
                piece.labels = std::move(kept);
                piece.merged.insert(o);
                piece.merged.insert(i);
            }
        }
        return std::nullopt;
    }

    // The un-rename of an opened restriction must not cross memory written
    // after this group fired, otherwise stored continuations would change
    // frame under it.
    bool frame_safe(const Process& region) const {
        for (Key k : keys_of(region)) {
            auto it = mem.keys.find(k);
            if (it == mem.keys.end()) continue;
            auto git = mem.groups.find(it->second.group);
            if (git != mem.groups.end() && git->second.seq > group.seq) return false;
        }
        return true;
    }

    bool settle_opens(UndoPiece& piece) const {
        for (auto it = piece.opens.begin(); it != piece.opens.end();) {
            if (it->remaining == 0) {
                if (!frame_safe(piece.term)) return false;
                Process renamed = substitute(piece.term, Subst{{it->placeholder, it->orig_binder}});
                piece.term = Process::res(it->orig_binder, renamed);
                it = piece.opens.erase(it);
            } else {
                ++it;
            }
        }
        return true;
    }

    bool lift_piece(UndoPiece& piece) const {
        for (auto& o : piece.opens) --o.remaining;
        return settle_opens(piece);
    }

    std::optional<UndoPiece> undo(const Process& p) const {
        using K = Process::Kind;
        std::set<Key> here = keys_of(p);
        bool touches = false;
        for (Key k : group.keys)
            if (here.count(k)) touches = true;
        if (!touches) return UndoPiece{p, {}, {}, {}, {}, false};

        switch (p.kind()) {
            case K::KeyedTau:
            case K::KeyedOut:
            case K::KeyedIn: {
                if (key_in_group(p.key())) {
                    if (has_keys(p.cont())) return std::nullopt;  // not maximal
                    auto rit = mem.keys.find(p.key());
                    if (rit == mem.keys.end())
                        fail("MissingKeyMemory",
                             "key " + std::to_string(p.key()) + " has no memory record");
                    const KeyRecord& rec = rit->second;
                    UndoPiece piece;
                    piece.covered.insert(p.key());
                    if (p.kind() == K::KeyedTau) {
                        piece.term = Process::marked(Process::tau(rec.original));
                        // The reverse table labels an undone tau as plain tau.
                        piece.labels.push_back(ActionLabel::tau());
                    } else if (p.kind() == K::KeyedOut) {
                        piece.term =
                            Process::marked(Process::out(p.subject(), p.object(), rec.original));
                        ActionLabel l = rec.open
                                            ? ActionLabel::bound_out(p.subject(), p.object())
                                            : ActionLabel::free_out(p.subject(), p.object());
                        if (rec.open) l.obj_is_placeholder = true;
                        piece.labels.push_back(l.with_key(p.key()));
                    } else {
                        piece.term =
                            Process::marked(Process::in(p.subject(), p.binder(), rec.original));
                        ActionLabel l = ActionLabel::input(p.subject(), p.received());
                        l.obj_is_placeholder = rec.fresh_input;
                        piece.labels.push_back(l.with_key(p.key()));
                    }
                    if (rec.open)
                        piece.opens.push_back(
                            PendingOpen{rec.open->orig_binder, rec.open->placeholder,
                                        rec.open->offset});
                    if (!settle_opens(piece)) return std::nullopt;
                    return piece;
                }
                auto inner = undo(p.cont());
                if (!inner) return std::nullopt;
                inner->term = ForwardWalk::rewrap_keyed(p, inner->term);
                if (!lift_piece(*inner)) return std::nullopt;
                return inner;
            }
            case K::GuardPfx: {
                // Undo ignores guards; the step it reverts already passed them.
                auto inner = undo(p.cont());
                if (!inner) return std::nullopt;
                inner->term = Process::guard_prefix(p.guard(), inner->term);
                if (!lift_piece(*inner)) return std::nullopt;
                return inner;
            }
            case K::Res: {
                auto inner = undo(p.cont());
                if (!inner) return std::nullopt;
                if (group.close_binder && *group.close_binder == p.binder() &&
                    !inner->close_removed && group_pair_covered(*inner)) {
                    // RCLOSE: drop the restriction the synchronization installed.
                    inner->close_removed = true;
                    if (!lift_piece(*inner)) return std::nullopt;
                    return inner;
                }
                for (const auto& l : inner->labels)
                    if (l.names().count(p.binder())) return std::nullopt;  // RRES side condition
                inner->term = Process::res(p.binder(), inner->term);
                if (!lift_piece(*inner)) return std::nullopt;
                return inner;
            }
            case K::Sum: {
                bool in_left = false;
                for (Key k : keys_of(p.left()))
                    if (key_in_group(k)) in_left = true;
                auto inner = undo(in_left ? p.left() : p.right());
                if (!inner) return std::nullopt;
                inner->term = in_left ? Process::sum(inner->term, p.right())
                                      : Process::sum(p.left(), inner->term);
                if (!lift_piece(*inner)) return std::nullopt;
                return inner;
            }
            case K::Par: {
                auto pl = undo(p.left());
                auto pr = undo(p.right());
                if (!pl || !pr) return std::nullopt;
                bool lc = !pl->covered.empty(), rc = !pr->covered.empty();
                if (lc && !rc) {
                    // Mirrored PAR1 premise: the untouched side cannot act,
                    // judged at the state the step fired from.
                    if (side_can_act(p.right())) return std::nullopt;
                    if (!bn_ok(*pl, p.right())) return std::nullopt;
                } else if (rc && !lc) {
                    if (side_can_act(p.left())) return std::nullopt;
                    if (!bn_ok(*pr, p.left())) return std::nullopt;
                }
                UndoPiece piece;
                piece.term = Process::par(pl->term, pr->term);
                piece.labels = pl->labels;
                piece.labels.insert(piece.labels.end(), pr->labels.begin(), pr->labels.end());
                piece.covered = pl->covered;
                piece.covered.insert(pr->covered.begin(), pr->covered.end());
                piece.opens = pl->opens;
                piece.opens.insert(piece.opens.end(), pr->opens.begin(), pr->opens.end());
                piece.merged = pl->merged;
                piece.merged.insert(pr->merged.begin(), pr->merged.end());
                piece.close_removed = pl->close_removed || pr->close_removed;
                com_partner_merged(piece);
                if (!lift_piece(piece)) return std::nullopt;
                return piece;
            }
            default: return std::nullopt;  // keys of the group under a construct they cannot be under
        }
    }

    bool group_pair_covered(const UndoPiece& piece) const {
        for (const auto& [o, i] : group.com_pairs)
            if (piece.covered.count(o) && piece.covered.count(i)) return true;
        return false;
    }

    bool side_can_act(const Process& side) const {
        Config probe{side, group.snapshot};
        ForwardWalk walk(ctx, probe);
        return !walk.enumerate(side, {}).empty();
    }

    bool bn_ok(const UndoPiece& piece, const Process& other) const {
        NameSet fn = free_names(other);
        for (const auto& l : piece.labels)
            for (const auto& b : l.bound_names())
                if (fn.count(b)) return false;
        return true;
    }
};

}  // namespace detail

// Enumerates undo steps: one per step group whose keys are all maximal and
// whose structural replay succeeds. The undone group's records disappear
// from the memory and the data state reverts to the group's snapshot.
inline std::vector<Step> reverse_transitions(const Config& c, const KeyMemory& mem,
                                             const SemCtx& ctx) {
    if (!ctx.features.reversibility) return {};
    std::set<Key> term_keys = keys_of(c.process);
    for (Key k : term_keys)
        if (!mem.keys.count(k))
            fail("MissingKeyMemory", "key " + std::to_string(k) + " has no memory record");

    std::set<Key> maximal = detail::maximal_keys(c.process);
    std::vector<Step> out;
    for (const auto& [gid, group] : mem.groups) {
        bool eligible = true;
        for (Key k : group.keys)
            if (!term_keys.count(k) || !maximal.count(k)) eligible = false;
        if (!eligible) continue;

        detail::ReverseWalk walk{ctx, mem, group};
        auto piece = walk.undo(c.process);
        if (!piece) continue;
        if (piece->covered != std::set<Key>(group.keys.begin(), group.keys.end())) continue;
        if (!piece->opens.empty()) continue;  // structural replay diverged
        if (group.close_binder && !piece->close_removed) continue;

        Step step;
        for (const auto& l : piece->labels) step.label.actions.push_back(l);
        step.label.normalize();
        step.target = Config{piece->term, group.snapshot};
        step.memory = mem;
        for (Key k : group.keys) step.memory.keys.erase(k);
        step.memory.groups.erase(gid);
        out.push_back(std::move(step));
    }
    return out;
}

}  // namespace pitc
