#include "derivkit/parser.hpp"

#include <cctype>
#include <set>

namespace derivkit {

namespace {

enum class Tok { Ident, Int, Decimal, Sym, End };

struct Token {
    Tok type;
    std::string text;
    int line, col;
    int end_line, end_col;  // position just past the token
};

const std::set<std::string> kStepWords = {
    "rw",          "unfold",      "field_normalize",      "ring",        "intro",
    "specialize",  "use",         "apply",                "series_geom", "series_geom_weighted",
    "index_shift", "deriv_rule",  "antideriv",            "antideriv_const", "limit_witness",
    "qed"};

const std::set<std::string> kReserved = {
    "theory", "vars", "fns", "const", "hyp", "let", "goal", "proof", "forall", "exists",
    "deriv", "diff", "sum", "diverges_left", "Real", "State"};

bool reserved(const std::string& s) { return kReserved.count(s) || kStepWords.count(s); }

std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else if ((static_cast<unsigned char>(src[i]) & 0xC0) != 0x80) {
                ++col;
            }
            ++i;
        }
    };
    auto push = [&](Tok t, std::string text, std::size_t len) {
        int l = line, c = col;
        advance(len);
        out.push_back({t, std::move(text), l, c, line, col});
    };
    // multi-byte aliases accepted on input
    static const std::vector<std::pair<std::string, std::pair<Tok, std::string>>> unicode = {
        {"Σ", {Tok::Ident, "sum"}},   {"≥", {Tok::Sym, ">="}},     {"∀", {Tok::Ident, "forall"}},
        {"∃", {Tok::Ident, "exists"}}, {"≠", {Tok::Sym, "!="}},     {"→", {Tok::Sym, "->"}},
        {"∧", {Tok::Sym, "/\\"}},      {"←", {Tok::Sym, "<-"}},
    };
    static const std::vector<std::string> syms = {":=", "!=", "<-", "->", "/\\", ">=", "(", ")", "[", "]",
                                                  ",", ":",  "=",  "<",  "+",   "-",  "*", "/", "^"};
    while (i < src.size()) {
        char ch = src[i];
        if (std::isspace(static_cast<unsigned char>(ch))) {
            advance(1);
            continue;
        }
        if (src.compare(i, 2, "--") == 0) {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
            std::size_t j = i + 1;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' || src[j] == '\''))
                ++j;
            push(Tok::Ident, src.substr(i, j - i), j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(ch))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
                push(Tok::Decimal, src.substr(i, j - i), j - i);
            } else {
                push(Tok::Int, src.substr(i, j - i), j - i);
            }
            continue;
        }
        bool matched = false;
        for (const auto& [u, tk] : unicode) {
            if (src.compare(i, u.size(), u) == 0) {
                push(tk.first, tk.second, u.size());
                matched = true;
                break;
            }
        }
        if (matched) continue;
        for (const auto& s : syms) {
            if (src.compare(i, s.size(), s) == 0) {
                push(Tok::Sym, s, s.size());
                matched = true;
                break;
            }
        }
        if (matched) continue;
        throw SyntaxError(line, col, "a token (unexpected character)");
    }
    out.push_back({Tok::End, "<end of input>", line, col, line, col});
    return out;
}

Rational decimal_value(const std::string& text) {
    auto dot = text.find('.');
    if (dot == std::string::npos) return Rational(BigInt(text));
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    BigInt den = 1;
    for (std::size_t k = dot + 1; k < text.size(); ++k) den *= 10;
    return Rational(BigInt(digits), den);
}

class Parser {
public:
    explicit Parser(const std::string& text) : toks_(lex(text)) {}

    DerivationScript script();

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;

    std::map<std::string, Sort> symbols_;
    std::set<std::string> all_lets_;
    std::set<std::string> hyp_names_;
    std::set<std::string> introduced_;
    std::vector<std::string> bound_;
    std::string defining_let_;
    std::set<std::string> defined_lets_;
    bool in_let_ = false;

    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at(const std::string& s) const { return peek().type != Tok::End && peek().text == s && peek().type != Tok::Int; }
    bool at_sym(const std::string& s) const { return peek().type == Tok::Sym && peek().text == s; }
    bool at_word(const std::string& s) const { return peek().type == Tok::Ident && peek().text == s; }

    [[noreturn]] void fail(const std::string& expected) const {
        // reported just past the last consumed token
        if (pos_ == 0) throw SyntaxError(peek().line, peek().col, expected);
        const Token& prev = toks_[pos_ - 1];
        throw SyntaxError(prev.end_line, prev.end_col, expected);
    }

    const Token& next() { return toks_[pos_++]; }

    void expect_sym(const std::string& s) {
        if (!at_sym(s)) fail("'" + s + "'");
        ++pos_;
    }

    void expect_word(const std::string& s) {
        if (!at_word(s)) fail("'" + s + "'");
        ++pos_;
    }

    std::string ident(const std::string& what) {
        if (peek().type != Tok::Ident || reserved(peek().text)) fail(what);
        return next().text;
    }

    bool is_bound(const std::string& n) const {
        return std::find(bound_.begin(), bound_.end(), n) != bound_.end();
    }

    bool is_fn(const std::string& n) const {
        auto it = symbols_.find(n);
        return it != symbols_.end() && (it->second == Sort::FnState || it->second == Sort::FnReal);
    }

    void declare(const Token& t, Sort s) {
        if (symbols_.count(t.text) || (all_lets_.count(t.text) && s != Sort::Let))
            throw DuplicateName(t.text, t.line, t.col);
        symbols_[t.text] = s;
    }

    // ---- expressions
    Expr expr() { return additive(); }

    Expr additive() {
        Expr e = multiplicative();
        while (at_sym("+") || at_sym("-")) {
            bool plus = next().text == "+";
            Expr r = multiplicative();
            e = plus ? add(e, r) : sub(e, r);
        }
        return e;
    }

    Expr multiplicative() {
        Expr e = unary();
        while (at_sym("*") || at_sym("/")) {
            bool times = next().text == "*";
            Expr r = unary();
            if (!times && e->kind == Kind::Const && r->kind == Kind::Const && r->value != 0)
                e = num(e->value / r->value);
            else
                e = times ? mul(e, r) : div(e, r);
        }
        return e;
    }

    Expr unary() {
        if (at_sym("-")) {
            ++pos_;
            bool literal = peek().type == Tok::Int || peek().type == Tok::Decimal;
            if (literal && !(peek(1).type == Tok::Sym && peek(1).text == "^"))
                return num(-decimal_value(next().text));
            return neg(unary());
        }
        return power();
    }

    Expr power() {
        Expr base = primary();
        if (!at_sym("^")) return base;
        ++pos_;
        if (peek().type == Tok::Int) return pow(base, std::stol(next().text));
        if (at_sym("-") && peek(1).type == Tok::Int) {
            ++pos_;
            return pow(base, -std::stol(next().text));
        }
        if (peek().type == Tok::Ident && is_bound(peek().text)) return pow_index(base, next().text);
        fail("integer exponent or series index");
    }

    Expr primary() {
        const Token& t = peek();
        if (t.type == Tok::Int || t.type == Tok::Decimal) {
            ++pos_;
            return num(decimal_value(t.text));
        }
        if (at_sym("(")) {
            ++pos_;
            Expr e = expr();
            expect_sym(")");
            return e;
        }
        if (at_word("sum")) {
            ++pos_;
            expect_sym("[");
            std::string idx = ident("series index");
            expect_sym(">=");
            if (peek().type != Tok::Int || (peek().text != "0" && peek().text != "1")) fail("start index 0 or 1");
            int start = std::stoi(next().text);
            expect_sym("]");
            expect_sym("(");
            bound_.push_back(idx);
            Expr body = expr();
            bound_.pop_back();
            expect_sym(")");
            return series(idx, start, body);
        }
        if (at_word("deriv")) {
            ++pos_;
            expect_sym("(");
            const Token& f = peek();
            std::string fn = ident("function symbol");
            if (!is_fn(fn)) throw UndeclaredSymbol(fn, f.line, f.col);
            expect_sym(",");
            Expr arg = expr();
            expect_sym(")");
            return deriv_app(fn, arg);
        }
        if (at_word("diff")) {
            ++pos_;
            expect_sym("[");
            std::string u = ident("binder");
            expect_sym("]");
            expect_sym("(");
            bound_.push_back(u);
            Expr body = expr();
            bound_.pop_back();
            expect_sym(",");
            Expr point = expr();
            expect_sym(")");
            return diff(u, body, point);
        }
        if (t.type == Tok::Ident && !reserved(t.text)) {
            ++pos_;
            if (is_bound(t.text)) return var(t.text);
            if (is_fn(t.text)) {
                expect_sym("(");
                Expr arg = expr();
                expect_sym(")");
                return app(t.text, arg);
            }
            if (all_lets_.count(t.text)) {
                if (in_let_ && (t.text == defining_let_ || !defined_lets_.count(t.text)))
                    throw UndeclaredSymbol(t.text, t.line, t.col);
                return var(t.text);
            }
            if (symbols_.count(t.text) || introduced_.count(t.text)) return var(t.text);
            throw UndeclaredSymbol(t.text, t.line, t.col);
        }
        fail("expression");
    }

    // ---- formulas
    Formula formula() {
        Formula lhs = conjunction();
        if (at_sym("->")) {
            ++pos_;
            return f_implies(lhs, formula());
        }
        return lhs;
    }

    Formula conjunction() {
        Formula f = atomic_formula();
        while (at_sym("/\\")) {
            ++pos_;
            f = f_and(f, atomic_formula());
        }
        return f;
    }

    Formula binder_formula(bool universal) {
        ++pos_;
        std::vector<std::string> names;
        names.push_back(ident("bound variable"));
        while (universal && peek().type == Tok::Ident && !reserved(peek().text)) names.push_back(next().text);
        expect_sym(",");
        for (const auto& n : names) bound_.push_back(n);
        Formula body = formula();
        bound_.resize(bound_.size() - names.size());
        return universal ? f_forall(names, body) : f_exists(names[0], body);
    }

    Formula atomic_formula() {
        if (at_word("forall")) return binder_formula(true);
        if (at_word("exists")) return binder_formula(false);
        if (at_word("diverges_left")) {
            ++pos_;
            expect_sym("(");
            const Token& t = peek();
            std::string fn = ident("definition name");
            if (!all_lets_.count(fn)) throw UndeclaredSymbol(fn, t.line, t.col);
            expect_sym(",");
            Expr p = expr();
            expect_sym(")");
            return f_diverges_left(fn, p);
        }
        if (at_sym("(")) {
            std::size_t save = pos_;
            std::size_t depth = bound_.size();
            try {
                ++pos_;
                Formula f = formula();
                expect_sym(")");
                static const std::set<std::string> continues = {"=", "!=", "<", "+", "-", "*", "/", "^"};
                if (!(peek().type == Tok::Sym && continues.count(peek().text))) return f;
            } catch (const UndeclaredSymbol&) {
                // the expression reading binds no more names, so this is final
                throw;
            } catch (const ParseError&) {
            }
            pos_ = save;
            bound_.resize(depth);
        }
        Expr l = expr();
        if (at_sym("=")) {
            ++pos_;
            return f_eq(l, expr());
        }
        if (at_sym("!=")) {
            ++pos_;
            Expr r = expr();
            return is_const(r, 0) ? f_ne0(l) : f_ne0(sub(l, r));
        }
        if (at_sym("<")) {
            ++pos_;
            return f_lt(l, expr());
        }
        fail("'=', '!=' or '<'");
    }

    // ---- proof steps
    bool at_step_end() const { return peek().type == Tok::End || (peek().type == Tok::Ident && kStepWords.count(peek().text)); }

    ProofStep step() {
        const Token& kw = peek();
        if (kw.type != Tok::Ident || !kStepWords.count(kw.text) || kw.text == "qed") fail("proof step");
        ++pos_;
        ProofStep s;
        s.line = kw.line;
        const std::string& w = kw.text;
        if (w == "rw") {
            s.kind = StepKind::Rewrite;
            s.name = ident("hypothesis name");
            if (at_sym("<-")) {
                ++pos_;
                s.reverse = true;
            }
        } else if (w == "unfold") {
            s.kind = StepKind::Unfold;
            const Token& t = peek();
            s.name = ident("definition name");
            if (!all_lets_.count(s.name)) throw UndeclaredSymbol(s.name, t.line, t.col);
        } else if (w == "field_normalize") {
            s.kind = StepKind::FieldNormalize;
        } else if (w == "ring") {
            s.kind = StepKind::Ring;
        } else if (w == "intro") {
            s.kind = StepKind::Intro;
            s.names.push_back(ident("name"));
            while (!at_step_end()) s.names.push_back(ident("name"));
            introduced_.insert(s.names.begin(), s.names.end());
        } else if (w == "specialize") {
            s.kind = StepKind::Specialize;
            s.name = ident("hypothesis name");
            s.terms.push_back(expr());
            while (!at_step_end()) s.terms.push_back(expr());
        } else if (w == "use") {
            s.kind = StepKind::Use;
            s.terms.push_back(expr());
        } else if (w == "apply") {
            s.kind = StepKind::Apply;
            s.name = ident("theory name");
        } else if (w == "series_geom") {
            s.kind = StepKind::SeriesGeom;
        } else if (w == "series_geom_weighted") {
            s.kind = StepKind::SeriesGeomWeighted;
        } else if (w == "index_shift") {
            s.kind = StepKind::IndexShift;
        } else if (w == "deriv_rule") {
            s.kind = StepKind::DerivRule;
            static const std::set<std::string> rules = {"const", "id", "pow", "linear", "scalar"};
            if (peek().type != Tok::Ident || !rules.count(peek().text)) fail("derivative rule (const, id, pow, linear, scalar)");
            s.name = next().text;
        } else if (w == "antideriv") {
            s.kind = StepKind::Antideriv;
        } else if (w == "antideriv_const") {
            s.kind = StepKind::AntiderivConst;
        } else if (w == "limit_witness") {
            s.kind = StepKind::LimitWitness;
            if (peek().type != Tok::Int) fail("point count");
            s.count = std::stol(next().text);
            if (s.count < 1) fail("positive point count");
        }
        return s;
    }

    void prescan_lets() {
        for (std::size_t k = 0; k + 1 < toks_.size(); ++k)
            if (toks_[k].type == Tok::Ident && toks_[k].text == "let" && toks_[k + 1].type == Tok::Ident &&
                !reserved(toks_[k + 1].text))
                all_lets_.insert(toks_[k + 1].text);
    }
};

DerivationScript Parser::script() {
    prescan_lets();
    DerivationScript s;
    expect_word("theory");
    s.name = ident("theory name");

    bool uses_state = false;
    while (at_word("vars") || at_word("fns") || at_word("const")) {
        Decl d;
        std::string kw = next().text;
        d.kind = kw == "vars" ? Decl::Kind::Vars : kw == "fns" ? Decl::Kind::Fns : Decl::Kind::Const;
        std::vector<Token> names;
        do {
            if (peek().type != Tok::Ident || reserved(peek().text)) fail("identifier");
            names.push_back(next());
        } while (!at_sym(":"));
        expect_sym(":");
        std::string from;
        if (at_word("Real") || at_word("State")) from = next().text;
        else fail("'Real' or 'State'");
        Sort sort;
        if (d.kind == Decl::Kind::Fns) {
            expect_sym("->");
            expect_word("Real");
            d.sort = from + "->Real";
            sort = from == "State" ? Sort::FnState : Sort::FnReal;
            uses_state = uses_state || from == "State";
        } else if (d.kind == Decl::Kind::Const) {
            if (from != "Real") fail("'Real'");
            d.sort = from;
            sort = Sort::Const;
        } else {
            d.sort = from;
            sort = from == "State" ? Sort::State : Sort::Real;
            uses_state = uses_state || from == "State";
        }
        for (const auto& t : names) {
            declare(t, sort);
            d.names.push_back(t.text);
        }
        s.decls.push_back(std::move(d));
    }
    if (uses_state) {
        for (const char* st : {"s1", "s2"})
            if (!symbols_.count(st)) symbols_[st] = Sort::State;
    }

    while (at_word("hyp")) {
        ++pos_;
        const Token& t = peek();
        std::string name = ident("hypothesis name");
        if (hyp_names_.count(name)) throw DuplicateName(name, t.line, t.col);
        hyp_names_.insert(name);
        expect_sym(":");
        s.hyps.push_back({name, formula()});
    }

    while (at_word("let")) {
        ++pos_;
        const Token& t = peek();
        std::string name = ident("definition name");
        if (symbols_.count(name) || defined_lets_.count(name)) throw DuplicateName(name, t.line, t.col);
        expect_sym(":=");
        in_let_ = true;
        defining_let_ = name;
        Expr body = expr();
        in_let_ = false;
        defined_lets_.insert(name);
        s.lets.push_back({name, body});
    }

    expect_word("goal");
    s.goal = formula();
    expect_word("proof");
    do {
        s.steps.push_back(step());
    } while (!at_word("qed"));
    expect_word("qed");
    if (peek().type != Tok::End) fail("end of input");
    return s;
}

}  // namespace

DerivationScript parse_script(const std::string& text) {
    Parser p(text);
    return p.script();
}

Context make_context(const DerivationScript& s) {
    Context ctx;
    bool states = false;
    for (const auto& d : s.decls) {
        for (const auto& n : d.names) {
            Sort sort = Sort::Real;
            if (d.kind == Decl::Kind::Const) sort = Sort::Const;
            else if (d.kind == Decl::Kind::Fns) sort = d.sort == "State->Real" ? Sort::FnState : Sort::FnReal;
            else if (d.sort == "State") sort = Sort::State;
            ctx.declare(n, sort);
            if (sort == Sort::State || sort == Sort::FnState) states = true;
        }
    }
    if (states) ctx.ensure_states();
    for (const auto& l : s.lets) {
        ctx.declare(l.name, Sort::Let);
        ctx.lets.emplace_back(l.name, l.body);
    }
    for (const auto& h : s.hyps) ctx.add_hyp(h.name, h.statement);
    return ctx;
}

}  // namespace derivkit
