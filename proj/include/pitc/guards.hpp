#pragma once

#include <memory>
#include <string>

#include "names.hpp"

namespace pitc {

// Boolean conditions over data states:
//   ff | tt | g | !phi | phi + psi | phi * psi
// where g ranges over a declared alphabet of atomic guards. `+` and `*`
// are disjunction and conjunction.
class Guard {
public:
    enum class Kind { False, True, Atom, Not, Or, And };

    static Guard ff() { return Guard(Kind::False); }
    static Guard tt() { return Guard(Kind::True); }
    static Guard atom(Name n) {
        Guard g(Kind::Atom);
        g.atom_ = std::move(n);
        return g;
    }
    static Guard negate(Guard g) {
        Guard r(Kind::Not);
        r.left_ = std::make_shared<Guard>(std::move(g));
        return r;
    }
    static Guard disj(Guard a, Guard b) { return binary(Kind::Or, std::move(a), std::move(b)); }
    static Guard conj(Guard a, Guard b) { return binary(Kind::And, std::move(a), std::move(b)); }

    Kind kind() const { return kind_; }
    const Name& atom_name() const { return atom_; }
    const Guard& lhs() const { return *left_; }
    const Guard& rhs() const { return *right_; }

    void collect_atoms(NameSet& out) const {
        switch (kind_) {
            case Kind::Atom: out.insert(atom_); break;
            case Kind::Not: left_->collect_atoms(out); break;
            case Kind::Or:
            case Kind::And:
                left_->collect_atoms(out);
                right_->collect_atoms(out);
                break;
            default: break;
        }
    }

    bool operator==(const Guard& o) const {
        if (kind_ != o.kind_) return false;
        switch (kind_) {
            case Kind::False:
            case Kind::True: return true;
            case Kind::Atom: return atom_ == o.atom_;
            case Kind::Not: return *left_ == *o.left_;
            case Kind::Or:
            case Kind::And: return *left_ == *o.left_ && *right_ == *o.right_;
        }
        return false;
    }

    std::string text() const {
        switch (kind_) {
            case Kind::False: return "ff";
            case Kind::True: return "tt";
            case Kind::Atom: return atom_.id;
            case Kind::Not: return "!" + wrap(*left_);
            case Kind::Or: return wrap(*left_) + "+" + wrap(*right_);
            case Kind::And: return wrap(*left_) + "*" + wrap(*right_);
        }
        return "?";
    }

private:
    explicit Guard(Kind k) : kind_(k) {}

    static Guard binary(Kind k, Guard a, Guard b) {
        Guard r(k);
        r.left_ = std::make_shared<Guard>(std::move(a));
        r.right_ = std::make_shared<Guard>(std::move(b));
        return r;
    }

    static std::string wrap(const Guard& g) {
        if (g.kind_ == Kind::Or || g.kind_ == Kind::And) return "(" + g.text() + ")";
        return g.text();
    }

    Kind kind_;
    Name atom_;
    std::shared_ptr<Guard> left_;
    std::shared_ptr<Guard> right_;
};

}  // namespace pitc
