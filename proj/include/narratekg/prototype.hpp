#pragma once

// Narrative prototype language.
//
//   prototype  := "MATCH" pattern binds? "WHERE" expr
//   pattern    := "EVENT" ident | "TYPE" ident | "SUPERTYPE" ident
//   binds      := "BIND" ident ("," ident)*
//   expr       := expr "OR" term | term
//   term       := term "AND" factor | factor
//   factor     := "NOT" factor | "(" expr ")" | atom
//   atom       := "EXISTS" "(" atom ")"
//               | ident "(" args? ")" fromclause?
//               | ident "(" args? ")" comparator literal
//   fromclause := "FROM" "{" ident ("," ident)* "}"
//   args       := arg ("," arg)*      arg := ident | string | number
//   literal    := string | number | ident
//
// Bound variables range over the participants of the candidate event.
// Inside EXISTS the identifier `_` stands for "some participant".

#include "narratekg/box.hpp"
#include "narratekg/error.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace narratekg::dsl {

struct Var {
    std::string name;
    bool operator==(const Var&) const = default;
};

struct Wildcard {
    bool operator==(const Wildcard&) const = default;
};

struct Symbol {
    std::string name;
    bool operator==(const Symbol&) const = default;
};

using Literal = std::variant<std::string, double, Symbol>;
using Arg = std::variant<Var, Wildcard, std::string, double>;

enum class Comparator { Eq, Ne, Lt, Le, Gt, Ge };
std::string_view to_string(Comparator c);

/// Call without a viewpoint qualifier. Whether it is objective or an
/// unqualified subjective attribution is decided against the schema when
/// planning.
struct ObjectiveCall {
    std::string name;
    std::vector<Arg> args;
    bool operator==(const ObjectiveCall&) const = default;
};

/// Call qualified with FROM {viewpoints}; the attribution must hold in every
/// listed viewpoint.
struct SubjectiveCall {
    std::string name;
    std::vector<Arg> args;
    std::vector<std::string> viewpoints;
    bool operator==(const SubjectiveCall&) const = default;
};

/// role(x) = label
struct RoleBinding {
    Arg subject;  // Var or Wildcard
    std::string role;
    bool operator==(const RoleBinding&) const = default;
};

/// attribute(x) <cmp> literal, or event_function() <cmp> literal when
/// `subject` is absent.
struct AttributeTest {
    std::optional<Arg> subject;
    std::string function;
    Comparator comparator = Comparator::Eq;
    Literal value;
    bool operator==(const AttributeTest&) const = default;
};

struct Atom;

struct ExistsParticipant {
    Box<Atom> inner;
    bool operator==(const ExistsParticipant&) const = default;
};

struct Atom {
    std::variant<ObjectiveCall, SubjectiveCall, RoleBinding, AttributeTest, ExistsParticipant> node;
    bool operator==(const Atom&) const = default;
};

struct Expr {
    enum class Op { Atom, Not, And, Or };
    Op op = Op::Atom;
    std::optional<Atom> atom;    // Op::Atom
    std::vector<Expr> children;  // 1 for Not, 2 for And/Or

    static Expr leaf(Atom a);
    static Expr negate(Expr e);
    static Expr conj(Expr l, Expr r);
    static Expr disj(Expr l, Expr r);

    bool operator==(const Expr&) const = default;
};

struct Pattern {
    enum class Kind { Event, Type, Supertype };
    Kind kind = Kind::Event;
    std::string name;
    bool operator==(const Pattern&) const = default;
};

struct Prototype {
    Pattern pattern;
    std::vector<std::string> variables;
    Expr where;
    bool operator==(const Prototype&) const = default;
};

class ParseError : public Error {
public:
    ParseError(int line, int column, std::string message, std::vector<std::string> expected = {});

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    const std::string& message() const noexcept { return message_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    int line_;
    int column_;
    std::string message_;
    std::vector<std::string> expected_;
};

/// Throws ParseError. Never aborts on arbitrary input.
Prototype parse(std::string_view text);

/// Canonical text; parse(render(p)) == p for every valid prototype.
std::string render(const Prototype& p);
std::string render(const Expr& e);
std::string render(const Atom& a);

/// Multi-line diagnostic with the offending source line and a caret.
std::string format_diagnostic(std::string_view source, const ParseError& err);

bool is_keyword(std::string_view word);
bool is_identifier(std::string_view word);

}  // namespace narratekg::dsl
