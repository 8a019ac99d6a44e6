#pragma once

#include <cassert>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "guards.hpp"
#include "names.hpp"
#include "rational.hpp"

namespace pitc {

// Key attached to an executed prefix. Positive, unique within one process
// term; allocation is the responsibility of the semantics layer.
using Key = int;

class Process;

namespace detail {
struct ProcessNode;
}

// Immutable process term. Handles share subtrees; all mutation is
// rebuild-on-the-way-up, so values are safe to share across threads.
//
//   0 | A(x~) | [phi].P | tau.P | x!y.P | x?(z).P
//     | tau[m].P | x!y[m].P | x?(z=w)[m].P      (executed prefixes)
//     | ^pfx.P                                  (probabilistically chosen)
//     | (new z)P | P+Q | P +[pi] Q | P|Q
class Process {
public:
    enum class Kind {
        Nil,
        Ident,
        GuardPfx,
        Tau,
        Out,
        In,
        KeyedTau,
        KeyedOut,
        KeyedIn,
        Marked,
        Res,
        Sum,
        BoxSum,
        Par,
    };

    Process();  // nil

    static Process nil();
    static Process ident(Name constant, std::vector<Name> args);
    static Process guard_prefix(Guard g, Process cont);
    static Process tau(Process cont);
    static Process out(Name subj, Name obj, Process cont);
    static Process in(Name subj, Name binder, Process cont);
    static Process keyed_tau(Key k, Process cont);
    static Process keyed_out(Name subj, Name obj, Key k, Process cont);
    // `received` is the name the input was instantiated with; `binder` is
    // the original bound name, kept so the step can be undone.
    static Process keyed_in(Name subj, Name received, Name binder, Key k, Process cont);
    static Process marked(Process prefix);
    static Process res(Name binder, Process cont);
    static Process sum(Process left, Process right);
    static Process box_sum(Rat weight, Process left, Process right);
    static Process par(Process left, Process right);

    Kind kind() const;

    // Accessors; each is valid only for the kinds that carry the field.
    const Name& subject() const;
    const Name& object() const;
    const Name& binder() const;
    const Name& received() const;
    const Name& constant() const;
    const std::vector<Name>& args() const;
    const Guard& guard() const;
    Key key() const;
    const Rat& weight() const;
    Process cont() const;   // prefix/guard/res/marked continuation
    Process left() const;   // sum/boxsum/par
    Process right() const;

    bool is_action_prefix() const {
        Kind k = kind();
        return k == Kind::Tau || k == Kind::Out || k == Kind::In;
    }
    bool is_keyed_prefix() const {
        Kind k = kind();
        return k == Kind::KeyedTau || k == Kind::KeyedOut || k == Kind::KeyedIn;
    }

    bool operator==(const Process& other) const;

private:
    explicit Process(std::shared_ptr<const detail::ProcessNode> n) : node_(std::move(n)) {}
    std::shared_ptr<const detail::ProcessNode> node_;
    friend struct detail::ProcessNode;
    friend std::string repr(const Process&);
};

namespace detail {
struct ProcessNode {
    Process::Kind kind = Process::Kind::Nil;
    Name a, b, c;            // subject / object-or-received / binder
    std::vector<Name> args;  // identifier arguments (a = constant)
    Guard guard = Guard::tt();
    Key key = 0;
    Rat weight;
    std::shared_ptr<const ProcessNode> sub0, sub1;

    static Process wrap(std::shared_ptr<const ProcessNode> n) { return Process(std::move(n)); }
    static const std::shared_ptr<const detail::ProcessNode>& unwrap(const Process& p) {
        return p.node_;
    }
};
}  // namespace detail

inline Process::Process() : node_(std::make_shared<detail::ProcessNode>()) {}

inline Process Process::nil() { return Process(); }

inline Process Process::ident(Name constant, std::vector<Name> args) {
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::Ident;
    n->a = std::move(constant);
    n->args = std::move(args);
    return Process(std::move(n));
}

inline Process Process::guard_prefix(Guard g, Process cont) {
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::GuardPfx;
    n->guard = std::move(g);
    n->sub0 = detail::ProcessNode::unwrap(cont);
    return Process(std::move(n));
}

inline Process Process::tau(Process cont) {
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::Tau;
    n->sub0 = detail::ProcessNode::unwrap(cont);
    return Process(std::move(n));
}

inline Process Process::out(Name subj, Name obj, Process cont) {
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::Out;
    n->a = std::move(subj);
    n->b = std::move(obj);
    n->sub0 = detail::ProcessNode::unwrap(cont);
    return Process(std::move(n));
}

inline Process Process::in(Name subj, Name binder, Process cont) {
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::In;
    n->a = std::move(subj);
    n->c = std::move(binder);
    n->sub0 = detail::ProcessNode::unwrap(cont);
    return Process(std::move(n));
}

inline Process Process::keyed_tau(Key k, Process cont) {
    if (k == 0) throw std::invalid_argument("key must be nonzero");
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::KeyedTau;
    n->key = k;
    n->sub0 = detail::ProcessNode::unwrap(cont);
    return Process(std::move(n));
}

inline Process Process::keyed_out(Name subj, Name obj, Key k, Process cont) {
    if (k == 0) throw std::invalid_argument("key must be nonzero");
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::KeyedOut;
    n->a = std::move(subj);
    n->b = std::move(obj);
    n->key = k;
    n->sub0 = detail::ProcessNode::unwrap(cont);
    return Process(std::move(n));
}

inline Process Process::keyed_in(Name subj, Name received, Name binder, Key k, Process cont) {
    if (k == 0) throw std::invalid_argument("key must be nonzero");
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::KeyedIn;
    n->a = std::move(subj);
    n->b = std::move(received);
    n->c = std::move(binder);
    n->key = k;
    n->sub0 = detail::ProcessNode::unwrap(cont);
    return Process(std::move(n));
}

inline Process Process::marked(Process prefix) {
    if (!prefix.is_action_prefix())
        throw std::invalid_argument("marking is only defined on unkeyed action prefixes");
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::Marked;
    n->sub0 = detail::ProcessNode::unwrap(prefix);
    return Process(std::move(n));
}

inline Process Process::res(Name binder, Process cont) {
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::Res;
    n->c = std::move(binder);
    n->sub0 = detail::ProcessNode::unwrap(cont);
    return Process(std::move(n));
}

inline Process Process::sum(Process left, Process right) {
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::Sum;
    n->sub0 = detail::ProcessNode::unwrap(left);
    n->sub1 = detail::ProcessNode::unwrap(right);
    return Process(std::move(n));
}

inline Process Process::box_sum(Rat weight, Process left, Process right) {
    if (!(weight > Rat(0) && weight < Rat(1)))
        throw std::invalid_argument("box-sum weight must lie strictly between 0 and 1");
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::BoxSum;
    n->weight = weight;
    n->sub0 = detail::ProcessNode::unwrap(left);
    n->sub1 = detail::ProcessNode::unwrap(right);
    return Process(std::move(n));
}

inline Process Process::par(Process left, Process right) {
    auto n = std::make_shared<detail::ProcessNode>();
    n->kind = Kind::Par;
    n->sub0 = detail::ProcessNode::unwrap(left);
    n->sub1 = detail::ProcessNode::unwrap(right);
    return Process(std::move(n));
}

inline Process::Kind Process::kind() const { return node_->kind; }
inline const Name& Process::subject() const { return node_->a; }
inline const Name& Process::object() const { return node_->b; }
inline const Name& Process::binder() const { return node_->c; }
inline const Name& Process::received() const { return node_->b; }
inline const Name& Process::constant() const { return node_->a; }
inline const std::vector<Name>& Process::args() const { return node_->args; }
inline const Guard& Process::guard() const { return node_->guard; }
inline Key Process::key() const { return node_->key; }
inline const Rat& Process::weight() const { return node_->weight; }

inline Process Process::cont() const { return detail::ProcessNode::wrap(node_->sub0); }
inline Process Process::left() const { return detail::ProcessNode::wrap(node_->sub0); }
inline Process Process::right() const { return detail::ProcessNode::wrap(node_->sub1); }

// ---------------------------------------------------------------------------
// Serialization used for structural equality, hashing and the total term
// order. Unambiguous, not meant for humans (see printer.hpp for that).

std::string repr(const Process& p);

namespace detail {
inline void repr_into(const ProcessNode& n, std::string& out) {
    using K = Process::Kind;
    switch (n.kind) {
        case K::Nil: out += '0'; return;
        case K::Ident:
            out += 'A';
            out += n.a.id;
            out += '(';
            for (const auto& x : n.args) {
                out += x.id;
                out += ',';
            }
            out += ')';
            return;
        case K::GuardPfx:
            out += "g[";
            out += n.guard.text();
            out += "].";
            repr_into(*n.sub0, out);
            return;
        case K::Tau:
            out += "t.";
            repr_into(*n.sub0, out);
            return;
        case K::Out:
            out += "o(" + n.a.id + "," + n.b.id + ").";
            repr_into(*n.sub0, out);
            return;
        case K::In:
            out += "i(" + n.a.id + ";" + n.c.id + ").";
            repr_into(*n.sub0, out);
            return;
        case K::KeyedTau:
            out += "T[" + std::to_string(n.key) + "].";
            repr_into(*n.sub0, out);
            return;
        case K::KeyedOut:
            out += "O(" + n.a.id + "," + n.b.id + ")[" + std::to_string(n.key) + "].";
            repr_into(*n.sub0, out);
            return;
        case K::KeyedIn:
            out += "I(" + n.a.id + "," + n.b.id + ";" + n.c.id + ")[" + std::to_string(n.key) +
                   "].";
            repr_into(*n.sub0, out);
            return;
        case K::Marked:
            out += '^';
            repr_into(*n.sub0, out);
            return;
        case K::Res:
            out += "r(" + n.c.id + ")";
            repr_into(*n.sub0, out);
            return;
        case K::Sum:
            out += "(+ ";
            repr_into(*n.sub0, out);
            out += ' ';
            repr_into(*n.sub1, out);
            out += ')';
            return;
        case K::BoxSum:
            out += "(# " + to_string(n.weight) + " ";
            repr_into(*n.sub0, out);
            out += ' ';
            repr_into(*n.sub1, out);
            out += ')';
            return;
        case K::Par:
            out += "(| ";
            repr_into(*n.sub0, out);
            out += ' ';
            repr_into(*n.sub1, out);
            out += ')';
            return;
    }
}
}  // namespace detail

inline std::string repr(const Process& p) {
    std::string out;
    detail::repr_into(*p.node_, out);
    return out;
}

inline bool Process::operator==(const Process& other) const {
    if (node_ == other.node_) return true;
    return repr(*this) == repr(other);
}

// Total order: constructor tag first (via the serialization tag), then
// labels, then subterms.
inline bool process_less(const Process& a, const Process& b) { return repr(a) < repr(b); }

// ---------------------------------------------------------------------------
// Name functions.

inline void free_names_into(const Process& p, NameSet& out) {
    using K = Process::Kind;
    switch (p.kind()) {
        case K::Nil: return;
        case K::Ident:
            for (const auto& x : p.args()) out.insert(x);
            return;
        case K::GuardPfx:
        case K::Tau:
        case K::KeyedTau:
        case K::Marked: free_names_into(p.cont(), out); return;
        case K::Out:
        case K::KeyedOut:
            out.insert(p.subject());
            out.insert(p.object());
            free_names_into(p.cont(), out);
            return;
        case K::In: {
            NameSet inner;
            free_names_into(p.cont(), inner);
            inner.erase(p.binder());
            out.insert(inner.begin(), inner.end());
            out.insert(p.subject());
            return;
        }
        case K::KeyedIn:
            // The original binder is spent; the received name is live.
            out.insert(p.subject());
            out.insert(p.received());
            free_names_into(p.cont(), out);
            return;
        case K::Res: {
            NameSet inner;
            free_names_into(p.cont(), inner);
            inner.erase(p.binder());
            out.insert(inner.begin(), inner.end());
            return;
        }
        case K::Sum:
        case K::BoxSum:
        case K::Par:
            free_names_into(p.left(), out);
            free_names_into(p.right(), out);
            return;
    }
}

inline NameSet free_names(const Process& p) {
    NameSet out;
    free_names_into(p, out);
    return out;
}

// n(P): every name occurring syntactically in an action or binder position.
// Guard atoms live in a separate alphabet and are not process names.
inline void all_names_into(const Process& p, NameSet& out) {
    using K = Process::Kind;
    switch (p.kind()) {
        case K::Nil: return;
        case K::Ident:
            for (const auto& x : p.args()) out.insert(x);
            return;
        case K::GuardPfx:
        case K::Tau:
        case K::KeyedTau:
        case K::Marked: all_names_into(p.cont(), out); return;
        case K::Out:
        case K::KeyedOut:
            out.insert(p.subject());
            out.insert(p.object());
            all_names_into(p.cont(), out);
            return;
        case K::In:
            out.insert(p.subject());
            out.insert(p.binder());
            all_names_into(p.cont(), out);
            return;
        case K::KeyedIn:
            out.insert(p.subject());
            out.insert(p.received());
            out.insert(p.binder());
            all_names_into(p.cont(), out);
            return;
        case K::Res:
            out.insert(p.binder());
            all_names_into(p.cont(), out);
            return;
        case K::Sum:
        case K::BoxSum:
        case K::Par:
            all_names_into(p.left(), out);
            all_names_into(p.right(), out);
            return;
    }
}

inline NameSet all_names(const Process& p) {
    NameSet out;
    all_names_into(p, out);
    return out;
}

inline NameSet bound_names(const Process& p) {
    NameSet n = all_names(p);
    for (const auto& f : free_names(p)) n.erase(f);
    return n;
}

// ---------------------------------------------------------------------------
// Keys and marks.

inline void collect_keys(const Process& p, std::set<Key>& out) {
    using K = Process::Kind;
    switch (p.kind()) {
        case K::Nil:
        case K::Ident: return;
        case K::KeyedTau:
        case K::KeyedOut:
        case K::KeyedIn:
            out.insert(p.key());
            collect_keys(p.cont(), out);
            return;
        case K::GuardPfx:
        case K::Tau:
        case K::Out:
        case K::In:
        case K::Marked:
        case K::Res: collect_keys(p.cont(), out); return;
        case K::Sum:
        case K::BoxSum:
        case K::Par:
            collect_keys(p.left(), out);
            collect_keys(p.right(), out);
            return;
    }
}

inline std::set<Key> keys_of(const Process& p) {
    std::set<Key> out;
    collect_keys(p, out);
    return out;
}

inline bool has_keys(const Process& p) { return !keys_of(p).empty(); }

inline bool has_marks(const Process& p) {
    using K = Process::Kind;
    switch (p.kind()) {
        case K::Marked: return true;
        case K::Nil:
        case K::Ident: return false;
        case K::GuardPfx:
        case K::Tau:
        case K::Out:
        case K::In:
        case K::KeyedTau:
        case K::KeyedOut:
        case K::KeyedIn:
        case K::Res: return has_marks(p.cont());
        case K::Sum:
        case K::BoxSum:
        case K::Par: return has_marks(p.left()) || has_marks(p.right());
    }
    return false;
}

// ---------------------------------------------------------------------------
// Substitution.

// Finite-support name substitution; identity outside the map.
using Subst = std::map<Name, Name>;

inline Name apply(const Subst& s, const Name& n) {
    auto it = s.find(n);
    return it == s.end() ? n : it->second;
}

namespace detail {

inline NameSet subst_range(const Subst& s) {
    NameSet r;
    for (const auto& [k, v] : s) r.insert(v);
    return r;
}

inline Process substitute_rec(const Process& p, const Subst& sigma);

// Shared handling of In/Res binders: drop the binder from sigma, rename it
// first when it would capture a name in sigma's range.
inline std::pair<Name, Process> through_binder(const Name& binder, const Process& body,
                                               const Subst& sigma_full, Subst& sigma_out) {
    Subst sigma = sigma_full;
    sigma.erase(binder);
    for (auto it = sigma.begin(); it != sigma.end();) {
        if (it->first == it->second)
            it = sigma.erase(it);
        else
            ++it;
    }
    sigma_out = sigma;
    if (sigma.empty()) return {binder, body};
    NameSet range = subst_range(sigma);
    if (!range.count(binder)) return {binder, body};
    NameSet avoid = all_names(body);
    for (const auto& [k, v] : sigma) {
        avoid.insert(k);
        avoid.insert(v);
    }
    avoid.insert(binder);
    Name fresh = fresh_name(avoid);
    Subst rename{{binder, fresh}};
    return {fresh, substitute_rec(body, rename)};
}

inline Process substitute_rec(const Process& p, const Subst& sigma) {
    using K = Process::Kind;
    if (sigma.empty()) return p;
    switch (p.kind()) {
        case K::Nil: return p;
        case K::Ident: {
            std::vector<Name> args;
            args.reserve(p.args().size());
            for (const auto& x : p.args()) args.push_back(apply(sigma, x));
            return Process::ident(p.constant(), std::move(args));
        }
        case K::GuardPfx:
            return Process::guard_prefix(p.guard(), substitute_rec(p.cont(), sigma));
        case K::Tau: return Process::tau(substitute_rec(p.cont(), sigma));
        case K::Out:
            return Process::out(apply(sigma, p.subject()), apply(sigma, p.object()),
                                substitute_rec(p.cont(), sigma));
        case K::In: {
            Subst inner;
            auto [binder, body] = through_binder(p.binder(), p.cont(), sigma, inner);
            return Process::in(apply(sigma, p.subject()), binder, substitute_rec(body, inner));
        }
        case K::KeyedTau: return Process::keyed_tau(p.key(), substitute_rec(p.cont(), sigma));
        case K::KeyedOut:
            return Process::keyed_out(apply(sigma, p.subject()), apply(sigma, p.object()), p.key(),
                                      substitute_rec(p.cont(), sigma));
        case K::KeyedIn:
            // The stored binder is history, not a live binding occurrence.
            return Process::keyed_in(apply(sigma, p.subject()), apply(sigma, p.received()),
                                     p.binder(), p.key(), substitute_rec(p.cont(), sigma));
        case K::Marked: return Process::marked(substitute_rec(p.cont(), sigma));
        case K::Res: {
            Subst inner;
            auto [binder, body] = through_binder(p.binder(), p.cont(), sigma, inner);
            return Process::res(binder, substitute_rec(body, inner));
        }
        case K::Sum:
            return Process::sum(substitute_rec(p.left(), sigma),
                                substitute_rec(p.right(), sigma));
        case K::BoxSum:
            return Process::box_sum(p.weight(), substitute_rec(p.left(), sigma),
                                    substitute_rec(p.right(), sigma));
        case K::Par:
            return Process::par(substitute_rec(p.left(), sigma),
                                substitute_rec(p.right(), sigma));
    }
    return p;
}

}  // namespace detail

// Capture-avoiding substitution. Keys are never altered; binders that would
// capture a name in sigma's range are alpha-renamed first.
inline Process substitute(const Process& p, const Subst& sigma) {
    Subst cleaned;
    for (const auto& [k, v] : sigma)
        if (!(k == v)) cleaned.emplace(k, v);
    return detail::substitute_rec(p, cleaned);
}

// ---------------------------------------------------------------------------
// Alpha canonical form.

namespace detail {

struct AlphaCtx {
    std::map<Name, Name> env;
    int next = 0;
};

inline Name alpha_apply(const AlphaCtx& ctx, const Name& n) {
    auto it = ctx.env.find(n);
    return it == ctx.env.end() ? n : it->second;
}

inline Process alpha_rec(const Process& p, AlphaCtx& ctx) {
    using K = Process::Kind;
    switch (p.kind()) {
        case K::Nil: return p;
        case K::Ident: {
            std::vector<Name> args;
            for (const auto& x : p.args()) args.push_back(alpha_apply(ctx, x));
            return Process::ident(p.constant(), std::move(args));
        }
        case K::GuardPfx: return Process::guard_prefix(p.guard(), alpha_rec(p.cont(), ctx));
        case K::Tau: return Process::tau(alpha_rec(p.cont(), ctx));
        case K::Out:
            return Process::out(alpha_apply(ctx, p.subject()), alpha_apply(ctx, p.object()),
                                alpha_rec(p.cont(), ctx));
        case K::In: {
            Name canon = canonical_binder(ctx.next++);
            auto saved = ctx.env;
            ctx.env[p.binder()] = canon;
            Process body = alpha_rec(p.cont(), ctx);
            ctx.env = saved;
            return Process::in(alpha_apply(ctx, p.subject()), canon, body);
        }
        case K::KeyedTau: return Process::keyed_tau(p.key(), alpha_rec(p.cont(), ctx));
        case K::KeyedOut:
            return Process::keyed_out(alpha_apply(ctx, p.subject()), alpha_apply(ctx, p.object()),
                                      p.key(), alpha_rec(p.cont(), ctx));
        case K::KeyedIn:
            // The spent binder is inert metadata and is compared exactly.
            return Process::keyed_in(alpha_apply(ctx, p.subject()),
                                     alpha_apply(ctx, p.received()), p.binder(), p.key(),
                                     alpha_rec(p.cont(), ctx));
        case K::Marked: return Process::marked(alpha_rec(p.cont(), ctx));
        case K::Res: {
            Name canon = canonical_binder(ctx.next++);
            auto saved = ctx.env;
            ctx.env[p.binder()] = canon;
            Process body = alpha_rec(p.cont(), ctx);
            ctx.env = saved;
            return Process::res(canon, body);
        }
        case K::Sum: return Process::sum(alpha_rec(p.left(), ctx), alpha_rec(p.right(), ctx));
        case K::BoxSum:
            return Process::box_sum(p.weight(), alpha_rec(p.left(), ctx),
                                    alpha_rec(p.right(), ctx));
        case K::Par: return Process::par(alpha_rec(p.left(), ctx), alpha_rec(p.right(), ctx));
    }
    return p;
}

}  // namespace detail

// Renames every binder to the reserved canonical family (#0, #1, ...) in
// preorder. Two terms are alpha-equivalent iff their canonical forms are
// structurally equal; keys and free names must match exactly.
inline Process alpha_normal(const Process& p) {
    detail::AlphaCtx ctx;
    return detail::alpha_rec(p, ctx);
}

inline bool alpha_equivalent(const Process& a, const Process& b) {
    return alpha_normal(a) == alpha_normal(b);
}

// Smallest positive keys not used in `p`, in increasing order.
inline std::vector<Key> allocate_keys(const Process& p, int count) {
    std::set<Key> used = keys_of(p);
    std::vector<Key> out;
    Key k = 1;
    while (static_cast<int>(out.size()) < count) {
        if (!used.count(k)) out.push_back(k);
        ++k;
    }
    return out;
}

}  // namespace pitc
