#include "narratekg/prototype.hpp"

#include "narratekg/knowledge_graph.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace narratekg::dsl {

namespace {

constexpr std::array<std::string_view, 11> kKeywords = {"MATCH", "EVENT", "TYPE", "SUPERTYPE", "BIND", "WHERE",
                                                        "AND",   "OR",    "NOT",  "FROM",      "EXISTS"};
constexpr int kMaxDepth = 200;

enum class Tok { Ident, Keyword, String, Number, LParen, RParen, LBrace, RBrace, Comma, Cmp, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;  // identifier/keyword text, decoded string, number or comparator spelling
    double number = 0.0;
    int line = 1;
    int column = 1;
};

std::string describe(const Token& t) {
    switch (t.kind) {
        case Tok::Ident: return "identifier '" + t.text + "'";
        case Tok::Keyword: return "'" + t.text + "'";
        case Tok::String: return "string literal";
        case Tok::Number: return "number";
        case Tok::LParen: return "'('";
        case Tok::RParen: return "')'";
        case Tok::LBrace: return "'{'";
        case Tok::RBrace: return "'}'";
        case Tok::Comma: return "','";
        case Tok::Cmp: return "'" + t.text + "'";
        case Tok::End: return "end of input";
    }
    return "token";
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            Token t;
            t.line = line_;
            t.column = column_;
            if (pos_ >= src_.size()) {
                t.kind = Tok::End;
                out.push_back(std::move(t));
                return out;
            }
            const char c = src_[pos_];
            const auto uc = static_cast<unsigned char>(c);
            if (std::isalpha(uc) || c == '_') {
                std::size_t start = pos_;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                    advance();
                }
                t.text = std::string(src_.substr(start, pos_ - start));
                t.kind = is_keyword(t.text) ? Tok::Keyword : Tok::Ident;
            } else if (std::isdigit(uc) || (c == '-' && pos_ + 1 < src_.size() &&
                                            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                lex_number(t);
            } else if (c == '"') {
                lex_string(t);
            } else {
                advance();
                switch (c) {
                    case '(': t.kind = Tok::LParen; break;
                    case ')': t.kind = Tok::RParen; break;
                    case '{': t.kind = Tok::LBrace; break;
                    case '}': t.kind = Tok::RBrace; break;
                    case ',': t.kind = Tok::Comma; break;
                    case '=': t.kind = Tok::Cmp; t.text = "="; break;
                    case '!':
                        if (peek() != '=') throw ParseError(t.line, t.column, "unexpected character '!'", {"'!='"});
                        advance();
                        t.kind = Tok::Cmp;
                        t.text = "!=";
                        break;
                    case '<':
                    case '>':
                        t.kind = Tok::Cmp;
                        t.text = std::string(1, c);
                        if (peek() == '=') {
                            advance();
                            t.text += '=';
                        }
                        break;
                    default: {
                        std::string shown = std::isprint(uc) ? std::string(1, c) : "\\x" + hex(uc);
                        throw ParseError(t.line, t.column, "unexpected character '" + shown + "'");
                    }
                }
            }
            out.push_back(std::move(t));
        }
    }

private:
    static std::string hex(unsigned char c) {
        const char* digits = "0123456789abcdef";
        return {digits[c >> 4], digits[c & 15]};
    }

    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
    }

    void lex_number(Token& t) {
        std::size_t start = pos_;
        if (src_[pos_] == '-') advance();
        auto digits = [&] {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        };
        digits();
        if (peek() == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
            advance();
            digits();
        }
        if (peek() == 'e' || peek() == 'E') {
            std::size_t save_pos = pos_;
            int save_col = column_;
            advance();
            if (peek() == '+' || peek() == '-') advance();
            if (std::isdigit(static_cast<unsigned char>(peek()))) {
                digits();
            } else {
                pos_ = save_pos;
                column_ = save_col;
            }
        }
        t.kind = Tok::Number;
        t.text = std::string(src_.substr(start, pos_ - start));
        auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
        if (ec != std::errc() || ptr != t.text.data() + t.text.size()) {
            throw ParseError(t.line, t.column, "number out of range '" + t.text + "'");
        }
    }

    void lex_string(Token& t) {
        advance();  // opening quote
        std::string value;
        while (true) {
            if (pos_ >= src_.size()) throw ParseError(t.line, t.column, "unterminated string literal", {"'\"'"});
            char c = src_[pos_];
            if (c == '"') {
                advance();
                break;
            }
            if (c == '\\') {
                int esc_line = line_, esc_col = column_;
                advance();
                if (pos_ >= src_.size()) throw ParseError(t.line, t.column, "unterminated string literal", {"'\"'"});
                char e = src_[pos_];
                switch (e) {
                    case '"': value += '"'; break;
                    case '\\': value += '\\'; break;
                    case 'n': value += '\n'; break;
                    case 't': value += '\t'; break;
                    case 'r': value += '\r'; break;
                    default:
                        throw ParseError(esc_line, esc_col, "unknown escape sequence",
                                         {"'\\\"'", "'\\\\'", "'\\n'", "'\\t'", "'\\r'"});
                }
                advance();
                continue;
            }
            value += c;
            advance();
        }
        t.kind = Tok::String;
        t.text = std::move(value);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    Prototype prototype() {
        Prototype p;
        expect_keyword("MATCH");
        p.pattern = pattern();
        if (at_keyword("BIND")) {
            next();
            do {
                const Token& t = expect(Tok::Ident, "variable name");
                if (t.text == "_") throw ParseError(t.line, t.column, "'_' cannot be declared as a variable");
                if (std::find(p.variables.begin(), p.variables.end(), t.text) != p.variables.end()) {
                    throw ParseError(t.line, t.column, "duplicate variable " + t.text);
                }
                p.variables.push_back(t.text);
            } while (accept(Tok::Comma));
        }
        declared_ = std::set<std::string>(p.variables.begin(), p.variables.end());
        if (!at_keyword("WHERE")) fail(p.variables.empty() ? std::vector<std::string>{"'BIND'", "'WHERE'"}
                                                            : std::vector<std::string>{"','", "'WHERE'"});
        next();
        p.where = expr(0);
        if (cur().kind != Tok::End) fail({"'AND'", "'OR'", "end of input"});
        return p;
    }

private:
    const Token& cur() const { return toks_[pos_]; }
    const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
    bool at_keyword(std::string_view kw) const { return cur().kind == Tok::Keyword && cur().text == kw; }

    bool accept(Tok kind) {
        if (cur().kind != kind) return false;
        next();
        return true;
    }

    [[noreturn]] void fail(std::vector<std::string> expected) const {
        const Token& t = cur();
        throw ParseError(t.line, t.column, "unexpected " + describe(t), std::move(expected));
    }

    const Token& expect(Tok kind, const std::string& what) {
        if (cur().kind != kind) fail({what});
        return next();
    }

    void expect_keyword(std::string_view kw) {
        if (!at_keyword(kw)) fail({"'" + std::string(kw) + "'"});
        next();
    }

    void enter(const Token& t) {
        if (++depth_ > kMaxDepth) throw ParseError(t.line, t.column, "expression nesting too deep");
    }

    Pattern pattern() {
        Pattern p;
        if (at_keyword("EVENT")) {
            p.kind = Pattern::Kind::Event;
        } else if (at_keyword("TYPE")) {
            p.kind = Pattern::Kind::Type;
        } else if (at_keyword("SUPERTYPE")) {
            p.kind = Pattern::Kind::Supertype;
        } else {
            fail({"'EVENT'", "'TYPE'", "'SUPERTYPE'"});
        }
        next();
        p.name = expect(Tok::Ident, p.kind == Pattern::Kind::Event ? "event label" : "event type").text;
        return p;
    }

    // expr := term (OR term)* ; term := factor (AND factor)*
    Expr expr(int) {
        enter(cur());
        Expr lhs = term();
        while (at_keyword("OR")) {
            next();
            lhs = Expr::disj(std::move(lhs), term());
        }
        --depth_;
        return lhs;
    }

    Expr term() {
        Expr lhs = factor();
        while (at_keyword("AND")) {
            next();
            lhs = Expr::conj(std::move(lhs), factor());
        }
        return lhs;
    }

    Expr factor() {
        enter(cur());
        Expr out;
        if (at_keyword("NOT")) {
            next();
            out = Expr::negate(factor());
        } else if (accept(Tok::LParen)) {
            out = expr(0);
            expect(Tok::RParen, "')'");
        } else {
            out = Expr::leaf(atom());
        }
        --depth_;
        return out;
    }

    Arg argument() {
        const Token& t = cur();
        switch (t.kind) {
            case Tok::Ident: {
                next();
                return subject_ref(t);
            }
            case Tok::String: next(); return t.text;
            case Tok::Number: next(); return t.number;
            default: fail({"identifier", "string literal", "number"});
        }
    }

    Arg subject_ref(const Token& t) {
        if (t.text == "_") {
            if (!in_exists_) throw ParseError(t.line, t.column, "'_' is only allowed inside EXISTS");
            saw_wildcard_ = true;
            return Wildcard{};
        }
        if (!declared_.contains(t.text)) throw ParseError(t.line, t.column, "unbound variable " + t.text);
        return Var{t.text};
    }

    Literal literal() {
        const Token& t = cur();
        switch (t.kind) {
            case Tok::Ident: next(); return Symbol{t.text};
            case Tok::String: next(); return t.text;
            case Tok::Number: next(); return t.number;
            default: fail({"string literal", "number", "identifier"});
        }
    }

    static Comparator comparator(const std::string& s) {
        if (s == "=") return Comparator::Eq;
        if (s == "!=") return Comparator::Ne;
        if (s == "<") return Comparator::Lt;
        if (s == "<=") return Comparator::Le;
        if (s == ">") return Comparator::Gt;
        return Comparator::Ge;
    }

    Atom atom() {
        if (at_keyword("EXISTS")) {
            const Token kw = next();
            if (in_exists_) throw ParseError(kw.line, kw.column, "EXISTS cannot be nested");
            expect(Tok::LParen, "'('");
            in_exists_ = true;
            saw_wildcard_ = false;
            Atom inner = atom();
            in_exists_ = false;
            if (!saw_wildcard_) throw ParseError(kw.line, kw.column, "EXISTS body must refer to a participant with '_'");
            expect(Tok::RParen, "')'");
            return Atom{ExistsParticipant{std::move(inner)}};
        }
        const Token name = cur();
        if (name.kind != Tok::Ident) fail({"'NOT'", "'('", "'EXISTS'", "identifier"});
        next();
        expect(Tok::LParen, "'('");
        std::vector<Arg> args;
        std::vector<Token> arg_tokens;
        if (cur().kind != Tok::RParen) {
            do {
                arg_tokens.push_back(cur());
                args.push_back(argument());
            } while (accept(Tok::Comma));
        }
        expect(Tok::RParen, args.empty() ? "')' or argument" : "',' or ')'");

        if (cur().kind == Tok::Cmp) {
            const Comparator cmp = comparator(next().text);
            if (args.size() > 1) {
                throw ParseError(arg_tokens[1].line, arg_tokens[1].column,
                                 "comparison functions take at most one participant argument");
            }
            if (args.size() == 1 && !std::holds_alternative<Var>(args[0]) && !std::holds_alternative<Wildcard>(args[0])) {
                throw ParseError(arg_tokens[0].line, arg_tokens[0].column,
                                 "comparison function argument must be a variable");
            }
            Literal value = literal();
            if (at_keyword("FROM")) {
                throw ParseError(cur().line, cur().column, "viewpoint qualifier on objective atom '" + name.text + "'");
            }
            if (name.text == "role") {
                if (args.size() != 1) throw ParseError(name.line, name.column, "role() takes exactly one participant");
                if (cmp != Comparator::Eq) {
                    throw ParseError(name.line, name.column, "role() only supports '='; use NOT for negation");
                }
                std::string role;
                if (const auto* sym = std::get_if<Symbol>(&value)) {
                    role = sym->name;
                } else if (const auto* str = std::get_if<std::string>(&value)) {
                    role = *str;
                } else {
                    throw ParseError(name.line, name.column, "role label must be an identifier or string");
                }
                return Atom{RoleBinding{args[0], std::move(role)}};
            }
            AttributeTest test;
            if (!args.empty()) test.subject = args[0];
            test.function = name.text;
            test.comparator = cmp;
            test.value = std::move(value);
            return Atom{std::move(test)};
        }

        if (at_keyword("FROM")) {
            const Token from = next();
            if (is_builtin_predicate(name.text)) {
                throw ParseError(from.line, from.column, "viewpoint qualifier on objective atom '" + name.text + "'");
            }
            expect(Tok::LBrace, "'{'");
            std::vector<std::string> viewpoints;
            do {
                viewpoints.push_back(expect(Tok::Ident, "viewpoint").text);
            } while (accept(Tok::Comma));
            expect(Tok::RBrace, "',' or '}'");
            return Atom{SubjectiveCall{name.text, std::move(args), std::move(viewpoints)}};
        }
        return Atom{ObjectiveCall{name.text, std::move(args)}};
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::set<std::string> declared_;
    int depth_ = 0;
    bool in_exists_ = false;
    bool saw_wildcard_ = false;
};

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

std::string number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string symbol_or_string(const std::string& s) { return is_identifier(s) && s != "_" ? s : quote(s); }

std::string render_arg(const Arg& a) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Var>) return x.name;
            else if constexpr (std::is_same_v<T, Wildcard>) return "_";
            else if constexpr (std::is_same_v<T, std::string>) return quote(x);
            else return number(x);
        },
        a);
}

std::string render_literal(const Literal& l) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Symbol>) return x.name;
            else if constexpr (std::is_same_v<T, std::string>) return quote(x);
            else return number(x);
        },
        l);
}

std::string render_args(const std::vector<Arg>& args) {
    std::string out = "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ", ";
        out += render_arg(args[i]);
    }
    return out + ")";
}

int precedence(Expr::Op op) {
    switch (op) {
        case Expr::Op::Or: return 1;
        case Expr::Op::And: return 2;
        case Expr::Op::Not: return 3;
        case Expr::Op::Atom: return 4;
    }
    return 4;
}

std::string render_expr(const Expr& e, int min_prec) {
    std::string out;
    switch (e.op) {
        case Expr::Op::Atom: out = render(*e.atom); break;
        case Expr::Op::Not: out = "NOT " + render_expr(e.children[0], 3); break;
        case Expr::Op::And: out = render_expr(e.children[0], 2) + " AND " + render_expr(e.children[1], 3); break;
        case Expr::Op::Or: out = render_expr(e.children[0], 1) + " OR " + render_expr(e.children[1], 2); break;
    }
    return precedence(e.op) < min_prec ? "(" + out + ")" : out;
}

}  // namespace

std::string_view to_string(Comparator c) {
    switch (c) {
        case Comparator::Eq: return "=";
        case Comparator::Ne: return "!=";
        case Comparator::Lt: return "<";
        case Comparator::Le: return "<=";
        case Comparator::Gt: return ">";
        case Comparator::Ge: return ">=";
    }
    return "=";
}

Expr Expr::leaf(Atom a) {
    Expr e;
    e.op = Op::Atom;
    e.atom = std::move(a);
    return e;
}

Expr Expr::negate(Expr inner) {
    Expr e;
    e.op = Op::Not;
    e.children.push_back(std::move(inner));
    return e;
}

Expr Expr::conj(Expr l, Expr r) {
    Expr e;
    e.op = Op::And;
    e.children.push_back(std::move(l));
    e.children.push_back(std::move(r));
    return e;
}

Expr Expr::disj(Expr l, Expr r) {
    Expr e;
    e.op = Op::Or;
    e.children.push_back(std::move(l));
    e.children.push_back(std::move(r));
    return e;
}

ParseError::ParseError(int line, int column, std::string message, std::vector<std::string> expected)
    : Error([&] {
          std::string w = std::to_string(line) + ":" + std::to_string(column) + ": " + message;
          if (!expected.empty()) {
              w += " (expected ";
              for (std::size_t i = 0; i < expected.size(); ++i) w += (i ? ", " : "") + expected[i];
              w += ")";
          }
          return w;
      }()),
      line_(line),
      column_(column),
      message_(std::move(message)),
      expected_(std::move(expected)) {}

bool is_keyword(std::string_view word) {
    return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

bool is_identifier(std::string_view word) {
    if (word.empty() || is_keyword(word)) return false;
    if (!std::isalpha(static_cast<unsigned char>(word[0])) && word[0] != '_') return false;
    return std::all_of(word.begin(), word.end(),
                       [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

Prototype parse(std::string_view text) {
    Parser parser(Lexer(text).run());
    return parser.prototype();
}

std::string render(const Atom& a) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, ObjectiveCall>) {
                return x.name + render_args(x.args);
            } else if constexpr (std::is_same_v<T, SubjectiveCall>) {
                std::string out = x.name + render_args(x.args) + " FROM {";
                for (std::size_t i = 0; i < x.viewpoints.size(); ++i) out += (i ? ", " : "") + x.viewpoints[i];
                return out + "}";
            } else if constexpr (std::is_same_v<T, RoleBinding>) {
                return "role(" + render_arg(x.subject) + ") = " + symbol_or_string(x.role);
            } else if constexpr (std::is_same_v<T, AttributeTest>) {
                std::string out = x.function + "(" + (x.subject ? render_arg(*x.subject) : "") + ") ";
                return out + std::string(to_string(x.comparator)) + " " + render_literal(x.value);
            } else {
                return "EXISTS(" + render(*x.inner) + ")";
            }
        },
        a.node);
}

std::string render(const Expr& e) { return render_expr(e, 0); }

std::string render(const Prototype& p) {
    std::string out = "MATCH ";
    switch (p.pattern.kind) {
        case Pattern::Kind::Event: out += "EVENT "; break;
        case Pattern::Kind::Type: out += "TYPE "; break;
        case Pattern::Kind::Supertype: out += "SUPERTYPE "; break;
    }
    out += p.pattern.name;
    if (!p.variables.empty()) {
        out += " BIND ";
        for (std::size_t i = 0; i < p.variables.size(); ++i) out += (i ? ", " : "") + p.variables[i];
    }
    return out + " WHERE " + render(p.where);
}

std::string format_diagnostic(std::string_view source, const ParseError& err) {
    std::string line_text;
    int line = 1;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= source.size(); ++i) {
        if (i == source.size() || source[i] == '\n') {
            if (line == err.line()) {
                line_text = std::string(source.substr(start, i - start));
                break;
            }
            ++line;
            start = i + 1;
        }
    }
    std::ostringstream os;
    os << "error: " << err.what() << '\n';
    os << "  " << line_text << '\n';
    os << "  " << std::string(static_cast<std::size_t>(std::max(0, err.column() - 1)), ' ') << "^\n";
    return os.str();
}

}  // namespace narratekg::dsl
