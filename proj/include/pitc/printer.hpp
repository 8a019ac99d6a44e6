#pragma once

#include <string>

#include "process.hpp"

namespace pitc {

namespace detail {

// Binding strength: sum < box-sum < par < prefix-like. A subterm is
// parenthesized when its level is below what its position requires.
inline int print_level(const Process& p) {
    switch (p.kind()) {
        case Process::Kind::Sum: return 0;
        case Process::Kind::BoxSum: return 1;
        case Process::Kind::Par: return 2;
        default: return 3;
    }
}

inline std::string print_rec(const Process& p, int require) {
    using K = Process::Kind;
    int lvl = print_level(p);
    std::string out;
    switch (p.kind()) {
        case K::Nil: out = "0"; break;
        case K::Ident: {
            out = p.constant().id + "(";
            const auto& as = p.args();
            for (size_t i = 0; i < as.size(); ++i) {
                if (i) out += ",";
                out += as[i].id;
            }
            out += ")";
            break;
        }
        case K::GuardPfx: out = "[" + p.guard().text() + "]." + print_rec(p.cont(), 3); break;
        case K::Tau: out = "tau." + print_rec(p.cont(), 3); break;
        case K::Out:
            out = p.subject().id + "!" + p.object().id + "." + print_rec(p.cont(), 3);
            break;
        case K::In:
            out = p.subject().id + "?(" + p.binder().id + ")." + print_rec(p.cont(), 3);
            break;
        case K::KeyedTau:
            out = "tau[" + std::to_string(p.key()) + "]." + print_rec(p.cont(), 3);
            break;
        case K::KeyedOut:
            out = p.subject().id + "!" + p.object().id + "[" + std::to_string(p.key()) + "]." +
                  print_rec(p.cont(), 3);
            break;
        case K::KeyedIn:
            out = p.subject().id + "?(" + p.binder().id + "=" + p.received().id + ")[" +
                  std::to_string(p.key()) + "]." + print_rec(p.cont(), 3);
            break;
        case K::Marked: out = "^" + print_rec(p.cont(), 3); break;
        case K::Res: out = "(new " + p.binder().id + ")" + print_rec(p.cont(), 3); break;
        case K::Sum: out = print_rec(p.left(), 0) + " + " + print_rec(p.right(), 1); break;
        case K::BoxSum:
            out = print_rec(p.left(), 1) + " +[" + to_string(p.weight()) + "] " +
                  print_rec(p.right(), 2);
            break;
        case K::Par: out = print_rec(p.left(), 2) + " | " + print_rec(p.right(), 3); break;
    }
    if (lvl < require) return "(" + out + ")";
    return out;
}

}  // namespace detail

// Concrete syntax with minimal parentheses; parse(pretty_print(P)) is
// alpha-equivalent (in fact equal) to P.
inline std::string pretty_print(const Process& p) { return detail::print_rec(p, 0); }

}  // namespace pitc
