#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "guards.hpp"
#include "names.hpp"

namespace pitc {

// A data state: the set of atomic guards currently true.
struct DataState {
    NameSet props;

    auto operator<=>(const DataState&) const = default;

    std::string text() const {
        std::string out = "{";
        bool first = true;
        for (const auto& p : props) {
            if (!first) out += ",";
            out += p.id;
            first = false;
        }
        return out + "}";
    }
};

inline DataState state_union(const DataState& a, const DataState& b) {
    return DataState{set_union(a.props, b.props)};
}

// The action kind driving an effect: tau or a channel name. "tau" is a
// keyword in the concrete grammar, so the spelling cannot collide with a
// channel.
inline const Name kTauKind{"tau"};

// Finite effect model: a guard alphabet, a finite state universe and a
// partial (action-kind, state) -> state table, identity where undefined.
struct EffectModel {
    NameSet alphabet;
    std::vector<std::pair<std::string, DataState>> named_states;  // declaration order
    std::map<std::pair<Name, DataState>, DataState> table;

    std::vector<DataState> states() const {
        std::vector<DataState> out;
        for (const auto& [_, s] : named_states) out.push_back(s);
        if (out.empty()) out.push_back(DataState{});
        return out;
    }

    const DataState* find_state(const std::string& name) const {
        for (const auto& [n, s] : named_states)
            if (n == name) return &s;
        return nullptr;
    }

    DataState initial_state() const {
        auto all = states();
        return all.front();
    }
};

inline EffectModel identity_model() { return EffectModel{}; }

// test(phi, s): does phi hold in s?
inline bool test(const Guard& phi, const DataState& s, const EffectModel& m) {
    using K = Guard::Kind;
    switch (phi.kind()) {
        case K::True: return true;
        case K::False: return false;
        case K::Atom:
            if (!m.alphabet.empty() && !m.alphabet.count(phi.atom_name()))
                fail("UnknownAtom", "guard atom '" + phi.atom_name().id +
                                        "' is not in the declared alphabet");
            return s.props.count(phi.atom_name()) != 0;
        case K::Not: return !test(phi.lhs(), s, m);
        case K::Or: return test(phi.lhs(), s, m) || test(phi.rhs(), s, m);
        case K::And: return test(phi.lhs(), s, m) && test(phi.rhs(), s, m);
    }
    return false;
}

// effect(e, s): table lookup with identity default.
inline DataState effect(const Name& action_kind, const DataState& s, const EffectModel& m) {
    auto it = m.table.find({action_kind, s});
    return it == m.table.end() ? s : it->second;
}

// wp(e, phi): phi holds after e from every state of the model.
inline bool wp(const Name& action_kind, const Guard& phi, const EffectModel& m) {
    for (const auto& s : m.states())
        if (!test(phi, effect(action_kind, s, m), m)) return false;
    return true;
}

}  // namespace pitc
