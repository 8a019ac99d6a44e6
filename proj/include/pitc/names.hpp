#pragma once

#include <compare>
#include <set>
#include <string>

namespace pitc {

// An action/channel name. Total order is lexicographic on the spelling, so
// every canonicalization and enumeration in the library is deterministic.
struct Name {
    std::string id;

    Name() = default;
    explicit Name(std::string s) : id(std::move(s)) {}

    auto operator<=>(const Name&) const = default;
    bool operator==(const Name&) const = default;
};

using NameSet = std::set<Name>;

inline NameSet set_union(const NameSet& a, const NameSet& b) {
    NameSet r = a;
    r.insert(b.begin(), b.end());
    return r;
}

inline bool contains(const NameSet& s, const Name& n) { return s.count(n) != 0; }

// Deterministic fresh-name supply: w0, w1, ... Returns the first member of
// the generator family not present in `avoid`.
inline Name fresh_name(const NameSet& avoid) {
    for (int k = 0;; ++k) {
        Name candidate("w" + std::to_string(k));
        if (!avoid.count(candidate)) return candidate;
    }
}

// Fresh binder family used by the canonical alpha form. '#' is not a legal
// identifier character in the concrete grammar, so these can never collide
// with user names.
inline Name canonical_binder(int index) { return Name("#" + std::to_string(index)); }

}  // namespace pitc
