#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "guards.hpp"
#include "process.hpp"
#include "rational.hpp"

namespace pitc {

// Recursive-descent parser for the concrete grammar:
//
//   proc  := "0" | ident "(" names ")" | "tau" key? "." proc
//          | name "!" name key? "." proc
//          | name "?" "(" name ("=" name)? ")" key? "." proc
//          | "(" "new" name ")" proc | "[" guard "]" "." proc | "^" proc
//          | proc "+" proc | proc "+[" rational "]" proc | proc "|" proc
//          | "(" proc ")"
//   guard := "tt" | "ff" | atom | "!" guard | guard "+" guard
//          | guard "*" guard | "(" guard ")"
//
// Precedence: prefix > "|" > "+[pi]" > "+", all binary operators
// left-associative. Lines starting with '#' are comments.

namespace detail {

struct Token {
    enum class Kind { Ident, Int, Sym, End };
    Kind kind = Kind::End;
    std::string text;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {  // comment to end of line
                while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
                continue;
            }
            if (c == '\n') {
                ++line_;
                col_ = 1;
                ++pos_;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++col_;
                ++pos_;
                continue;
            }
            break;
        }
        tok_ = Token{};
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= src_.size()) {
            tok_.kind = Token::Kind::End;
            return;
        }
        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' ||
                    src_[pos_] == '\''))
                ++pos_;
            tok_.kind = Token::Kind::Ident;
            tok_.text = src_.substr(start, pos_ - start);
            col_ += static_cast<int>(tok_.text.size());
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                ++pos_;
            tok_.kind = Token::Kind::Int;
            tok_.text = src_.substr(start, pos_ - start);
            col_ += static_cast<int>(tok_.text.size());
            return;
        }
        tok_.kind = Token::Kind::Sym;
        tok_.text = std::string(1, c);
        ++pos_;
        ++col_;
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) {}

    Process parse_process() {
        Process p = parse_sum();
        expect_end();
        return p;
    }

    Guard parse_guard_only() {
        Guard g = parse_guard();
        expect_end();
        return g;
    }

private:
    [[noreturn]] void error(const std::string& expected) {
        const Token& t = lex_.peek();
        std::string got = t.kind == Token::Kind::End ? "end of input" : "'" + t.text + "'";
        fail("ParseError", "line " + std::to_string(t.line) + ", column " +
                               std::to_string(t.col) + ": expected " + expected + ", found " +
                               got);
    }

    bool at_sym(const std::string& s) const {
        return lex_.peek().kind == Token::Kind::Sym && lex_.peek().text == s;
    }
    bool at_ident(const std::string& s) const {
        return lex_.peek().kind == Token::Kind::Ident && lex_.peek().text == s;
    }

    void eat_sym(const std::string& s) {
        if (!at_sym(s)) error("'" + s + "'");
        lex_.next();
    }

    std::string eat_name() {
        if (lex_.peek().kind != Token::Kind::Ident) error("a name");
        std::string t = lex_.next().text;
        if (t == "tau" || t == "new" || t == "tt" || t == "ff")
            fail("ParseError", "'" + t + "' is a keyword, not a name");
        return t;
    }

    void expect_end() {
        if (lex_.peek().kind != Token::Kind::End) error("end of input");
    }

    long long eat_int() {
        if (lex_.peek().kind != Token::Kind::Int) error("an integer");
        return std::stoll(lex_.next().text);
    }

    Rat parse_rational() {
        long long num = eat_int();
        if (at_sym("/")) {
            lex_.next();
            long long den = eat_int();
            if (den == 0) fail("ParseError", "rational with zero denominator");
            return Rat(num, den);
        }
        return Rat(num);
    }

    std::optional<Key> parse_key_opt() {
        if (!at_sym("[")) return std::nullopt;
        lex_.next();
        long long k = eat_int();
        eat_sym("]");
        if (k <= 0) fail("ParseError", "keys are positive integers");
        return static_cast<Key>(k);
    }

    // sum := boxsum ("+" boxsum)*      (but "+[" starts a box-sum)
    Process parse_sum() {
        Process p = parse_boxsum();
        while (at_sym("+") && !peek_boxsum()) {
            lex_.next();
            p = Process::sum(p, parse_boxsum());
        }
        return p;
    }

    bool peek_boxsum() {
        // Distinguish "P + Q" and "P + [g].Q" from "P +[pi] Q": a box-sum
        // is '+' followed by '[' followed by an integer.
        Lexer copy = lex_;
        copy.next();  // '+'
        if (!(copy.peek().kind == Token::Kind::Sym && copy.peek().text == "[")) return false;
        copy.next();  // '['
        return copy.peek().kind == Token::Kind::Int;
    }

    Process parse_boxsum() {
        Process p = parse_par();
        while (at_sym("+") && peek_boxsum()) {
            lex_.next();  // '+'
            eat_sym("[");
            Rat w = parse_rational();
            eat_sym("]");
            if (!(w > Rat(0) && w < Rat(1)))
                fail("ParseError", "box-sum weight must lie strictly between 0 and 1");
            p = Process::box_sum(w, p, parse_par());
        }
        return p;
    }

    Process parse_par() {
        Process p = parse_prefix();
        while (at_sym("|")) {
            lex_.next();
            p = Process::par(p, parse_prefix());
        }
        return p;
    }

    Process parse_prefix() {
        const Token& t = lex_.peek();
        if (t.kind == Token::Kind::Int && t.text == "0") {
            lex_.next();
            return Process::nil();
        }
        if (at_sym("^")) {
            lex_.next();
            Process pfx = parse_prefix();
            if (!pfx.is_action_prefix())
                fail("ParseError", "'^' must mark an unkeyed action prefix");
            return Process::marked(pfx);
        }
        if (at_sym("(")) {
            lex_.next();
            if (at_ident("new")) {
                lex_.next();
                Name binder{eat_name()};
                eat_sym(")");
                return Process::res(binder, parse_prefix());
            }
            Process p = parse_sum();
            eat_sym(")");
            return p;
        }
        if (at_sym("[")) {  // guard prefix
            lex_.next();
            Guard g = parse_guard();
            eat_sym("]");
            eat_sym(".");
            return Process::guard_prefix(g, parse_prefix());
        }
        if (at_ident("tau")) {
            lex_.next();
            auto key = parse_key_opt();
            eat_sym(".");
            Process cont = parse_prefix();
            return key ? Process::keyed_tau(*key, cont) : Process::tau(cont);
        }
        if (t.kind == Token::Kind::Ident) {
            std::string head = eat_name();
            if (at_sym("(")) {  // identifier call
                lex_.next();
                std::vector<Name> args;
                if (!at_sym(")")) {
                    args.emplace_back(eat_name());
                    while (at_sym(",")) {
                        lex_.next();
                        args.emplace_back(eat_name());
                    }
                }
                eat_sym(")");
                return Process::ident(Name{head}, std::move(args));
            }
            if (at_sym("!")) {
                lex_.next();
                Name obj{eat_name()};
                auto key = parse_key_opt();
                eat_sym(".");
                Process cont = parse_prefix();
                return key ? Process::keyed_out(Name{head}, obj, *key, cont)
                           : Process::out(Name{head}, obj, cont);
            }
            if (at_sym("?")) {
                lex_.next();
                eat_sym("(");
                Name binder{eat_name()};
                std::optional<Name> received;
                if (at_sym("=")) {
                    lex_.next();
                    received = Name{eat_name()};
                }
                eat_sym(")");
                auto key = parse_key_opt();
                eat_sym(".");
                Process cont = parse_prefix();
                if (key)
                    return Process::keyed_in(Name{head}, received.value_or(binder), binder, *key,
                                             cont);
                if (received)
                    fail("ParseError", "'=' received-name form requires a key");
                return Process::in(Name{head}, binder, cont);
            }
            error("'(' for an identifier call, or '!'/'?' for a prefix");
        }
        error("a process term");
    }

    // guard or-level := and-level ("+" and-level)*
    Guard parse_guard() {
        Guard g = parse_guard_and();
        while (at_sym("+")) {
            lex_.next();
            g = Guard::disj(g, parse_guard_and());
        }
        return g;
    }

    Guard parse_guard_and() {
        Guard g = parse_guard_atom();
        while (at_sym("*")) {
            lex_.next();
            g = Guard::conj(g, parse_guard_atom());
        }
        return g;
    }

    Guard parse_guard_atom() {
        if (at_sym("!")) {
            lex_.next();
            return Guard::negate(parse_guard_atom());
        }
        if (at_sym("(")) {
            lex_.next();
            Guard g = parse_guard();
            eat_sym(")");
            return g;
        }
        if (at_ident("tt")) {
            lex_.next();
            return Guard::tt();
        }
        if (at_ident("ff")) {
            lex_.next();
            return Guard::ff();
        }
        if (lex_.peek().kind == Token::Kind::Ident) return Guard::atom(Name{lex_.next().text});
        error("a guard");
    }

    Lexer lex_;
};

}  // namespace detail

inline Process parse(const std::string& src) { return detail::Parser(src).parse_process(); }

inline Guard parse_guard(const std::string& src) {
    return detail::Parser(src).parse_guard_only();
}

}  // namespace pitc
