#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "names.hpp"
#include "process.hpp"
#include "state.hpp"

namespace pitc {

// One action: tau, free output x!y, input x?(w), or bound output x!(w).
// Reverse labels carry the key of the prefix being undone.
struct ActionLabel {
    enum class Sort { Tau, FreeOut, Input, BoundOut };

    Sort sort = Sort::Tau;
    Name subj;
    Name obj;  // object, received name, or extruded placeholder
    // True when obj is a generic fresh placeholder (bound in the label)
    // rather than a concrete name from the instantiation universe.
    bool obj_is_placeholder = false;
    std::optional<Key> key;

    static ActionLabel tau() { return ActionLabel{}; }
    static ActionLabel free_out(Name x, Name y) {
        return ActionLabel{Sort::FreeOut, std::move(x), std::move(y), false, std::nullopt};
    }
    static ActionLabel input(Name x, Name w) {
        return ActionLabel{Sort::Input, std::move(x), std::move(w), false, std::nullopt};
    }
    static ActionLabel bound_out(Name x, Name w) {
        return ActionLabel{Sort::BoundOut, std::move(x), std::move(w), true, std::nullopt};
    }

    ActionLabel with_key(Key k) const {
        ActionLabel r = *this;
        r.key = k;
        return r;
    }

    bool is_tau() const { return sort == Sort::Tau; }

    // Channel driving the state effect; tau for silent steps.
    Name effect_kind() const { return is_tau() ? kTauKind : subj; }

    NameSet free_names() const {
        switch (sort) {
            case Sort::Tau: return {};
            case Sort::FreeOut: return {subj, obj};
            case Sort::Input:
            case Sort::BoundOut: return {subj};
        }
        return {};
    }
    NameSet bound_names() const {
        // Late convention: the object of an input is bound in the label.
        if (sort == Sort::BoundOut || sort == Sort::Input) return {obj};
        return {};
    }
    NameSet names() const { return set_union(free_names(), bound_names()); }

    // An output and an input on the same channel are complementary; PAR3
    // refuses to run them as one concurrent step.
    static bool complementary(const ActionLabel& a, const ActionLabel& b) {
        auto out_in = [](const ActionLabel& o, const ActionLabel& i) {
            return (o.sort == Sort::FreeOut || o.sort == Sort::BoundOut) &&
                   i.sort == Sort::Input && o.subj == i.subj;
        };
        return out_in(a, b) || out_in(b, a);
    }

    std::string text() const {
        std::string base;
        switch (sort) {
            case Sort::Tau: base = "tau"; break;
            case Sort::FreeOut: base = subj.id + "!" + obj.id; break;
            case Sort::Input: base = subj.id + "?(" + obj.id + ")"; break;
            case Sort::BoundOut: base = subj.id + "!(" + obj.id + ")"; break;
        }
        if (key) base += "[" + std::to_string(*key) + "]";
        return base;
    }

    auto as_tuple() const {
        return std::tuple(sort, subj, obj, obj_is_placeholder, key ? *key : 0);
    }
    bool operator==(const ActionLabel& o) const { return as_tuple() == o.as_tuple(); }
    bool operator<(const ActionLabel& o) const { return as_tuple() < o.as_tuple(); }
};

// A finite multiset of pairwise-concurrent actions fired together, kept
// sorted so equal steps compare equal.
struct StepLabel {
    std::vector<ActionLabel> actions;

    static StepLabel single(ActionLabel a) {
        StepLabel s;
        s.actions.push_back(std::move(a));
        return s;
    }

    void normalize() { std::sort(actions.begin(), actions.end()); }

    NameSet bound_names() const {
        NameSet out;
        for (const auto& a : actions) {
            auto b = a.bound_names();
            out.insert(b.begin(), b.end());
        }
        return out;
    }
    NameSet names() const {
        NameSet out;
        for (const auto& a : actions) {
            auto n = a.names();
            out.insert(n.begin(), n.end());
        }
        return out;
    }

    std::string text() const {
        if (actions.size() == 1) return actions.front().text();
        std::string out = "{";
        for (size_t i = 0; i < actions.size(); ++i) {
            if (i) out += ", ";
            out += actions[i].text();
        }
        return out + "}";
    }

    bool operator==(const StepLabel& o) const { return actions == o.actions; }
    bool operator<(const StepLabel& o) const { return actions < o.actions; }
};

}  // namespace pitc
