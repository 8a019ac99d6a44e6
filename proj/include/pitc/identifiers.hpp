#pragma once

#include <map>
#include <vector>

#include "errors.hpp"
#include "process.hpp"

namespace pitc {

// Defining equations A(x~) := P with fn(P) within the formals.
struct IdentifierDef {
    std::vector<Name> formals;
    Process body;
};

struct IdentifierEnv {
    std::map<Name, IdentifierDef> defs;

    bool empty() const { return defs.empty(); }

    const IdentifierDef* find(const Name& constant) const {
        auto it = defs.find(constant);
        return it == defs.end() ? nullptr : &it->second;
    }
};

namespace detail {
inline bool occurrences_guarded(const Process& p, bool guarded) {
    using K = Process::Kind;
    switch (p.kind()) {
        case K::Nil: return true;
        case K::Ident: return guarded;
        case K::Tau:
        case K::Out:
        case K::In:
        case K::KeyedTau:
        case K::KeyedOut:
        case K::KeyedIn: return occurrences_guarded(p.cont(), true);
        case K::GuardPfx:  // a guard is not an action prefix
        case K::Marked:
        case K::Res: return occurrences_guarded(p.cont(), guarded);
        case K::Sum:
        case K::BoxSum:
        case K::Par:
            return occurrences_guarded(p.left(), guarded) &&
                   occurrences_guarded(p.right(), guarded);
    }
    return true;
}
}  // namespace detail

// Every identifier occurrence in every defining body sits under at least
// one action prefix.
inline bool check_weakly_guarded(const IdentifierEnv& env) {
    for (const auto& [_, def] : env.defs)
        if (!detail::occurrences_guarded(def.body, false)) return false;
    return true;
}

// A(y~) -> body{y~/x~}, capture-avoidingly.
inline Process unfold_identifier(const Process& id, const IdentifierEnv& env) {
    if (id.kind() != Process::Kind::Ident) fail("UnboundIdentifier", "not an identifier term");
    const IdentifierDef* def = env.find(id.constant());
    if (!def)
        fail("UnboundIdentifier", "no defining equation for '" + id.constant().id + "'");
    if (def->formals.size() != id.args().size())
        fail("ArityMismatch", "'" + id.constant().id + "' expects " +
                                  std::to_string(def->formals.size()) + " argument(s), got " +
                                  std::to_string(id.args().size()));
    Subst sigma;
    for (size_t i = 0; i < def->formals.size(); ++i) sigma[def->formals[i]] = id.args()[i];
    return substitute(def->body, sigma);
}

}  // namespace pitc
