#include "derivkit/parser.hpp"

#include <sstream>

namespace derivkit {

namespace {

// precedence: 1 additive, 2 multiplicative, 3 unary minus, 4 power, 5 atom
std::string paren(const std::string& s, bool wrap) { return wrap ? "(" + s + ")" : s; }

std::string print_const(const Rational& v) {
    BigInt n = numerator(v), d = denominator(v);
    if (d == 1) return n < 0 ? "(" + n.str() + ")" : n.str();
    return "(" + n.str() + "/" + d.str() + ")";
}

std::string pr(const Expr& e, int ctx) {
    switch (e->kind) {
    case Kind::Var: return e->name;
    case Kind::Const: return print_const(e->value);
    case Kind::Add: return paren(pr(e->a, 1) + " + " + pr(e->b, 2), ctx > 1);
    case Kind::Sub: return paren(pr(e->a, 1) + " - " + pr(e->b, 2), ctx > 1);
    case Kind::Mul: return paren(pr(e->a, 2) + " * " + pr(e->b, 3), ctx > 2);
    case Kind::Div: return paren(pr(e->a, 2) + " / " + pr(e->b, 3), ctx > 2);
    case Kind::Neg: {
        // a bare literal after '-' would read back as a negative constant
        std::string inner = e->a->kind == Kind::Const ? "(" + pr(e->a, 0) + ")" : pr(e->a, 4);
        return paren("-" + inner, ctx > 1);
    }
    case Kind::Pow: {
        std::string ex = e->name.empty() ? std::to_string(e->exponent) : e->name;
        return paren(pr(e->a, 5) + "^" + ex, ctx > 4);
    }
    case Kind::Sum:
        return "sum[" + e->name + ">=" + std::to_string(e->start) + "](" + pr(e->a, 0) + ")";
    case Kind::App:
        if (e->deriv) return "deriv(" + e->name + ", " + pr(e->a, 0) + ")";
        return e->name + "(" + pr(e->a, 0) + ")";
    case Kind::Diff: return "diff[" + e->name + "](" + pr(e->a, 0) + ", " + pr(e->b, 0) + ")";
    }
    return "?";
}

bool binds_far(const Formula& f) {
    return f->kind == FKind::Implies || f->kind == FKind::Forall || f->kind == FKind::Exists;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + v[i];
    return out;
}

std::string prf(const Formula& f, const char* ne) {
    switch (f->kind) {
    case FKind::Eq: return pr(f->l, 0) + " = " + pr(f->r, 0);
    case FKind::Ne0: return pr(f->l, 0) + ne;
    case FKind::Lt: return pr(f->l, 0) + " < " + pr(f->r, 0);
    case FKind::Forall: return "forall " + join(f->vars) + ", " + prf(f->p, ne);
    case FKind::Exists: return "exists " + f->vars[0] + ", " + prf(f->p, ne);
    case FKind::Implies: return paren(prf(f->p, ne), binds_far(f->p)) + " -> " + prf(f->q, ne);
    case FKind::And:
        return paren(prf(f->p, ne), binds_far(f->p)) + " /\\ " +
               paren(prf(f->q, ne), binds_far(f->q) || f->q->kind == FKind::And);
    case FKind::DivergesLeft: return "diverges_left(" + f->fn + ", " + pr(f->l, 0) + ")";
    }
    return "?";
}

std::string term(const Expr& e) {
    bool atomic = e->kind == Kind::Var || e->kind == Kind::App || e->kind == Kind::Sum ||
                  e->kind == Kind::Diff || (e->kind == Kind::Const && e->value >= 0 && denominator(e->value) == 1);
    return atomic ? pr(e, 0) : "(" + pr(e, 0) + ")";
}

const char* decl_keyword(Decl::Kind k) {
    switch (k) {
    case Decl::Kind::Vars: return "vars";
    case Decl::Kind::Fns: return "fns";
    case Decl::Kind::Const: return "const";
    }
    return "vars";
}

}  // namespace

std::string to_string(const Expr& e) { return pr(e, 0); }
std::string to_string(const Formula& f) { return prf(f, " != 0"); }
std::string display(const Formula& f) { return prf(f, " ≠ 0"); }

std::string to_string(const ProofStep& s) {
    switch (s.kind) {
    case StepKind::Rewrite: return "rw " + s.name + (s.reverse ? " <-" : "");
    case StepKind::Unfold: return "unfold " + s.name;
    case StepKind::FieldNormalize: return "field_normalize";
    case StepKind::Ring: return "ring";
    case StepKind::Intro: return "intro " + join(s.names);
    case StepKind::Specialize: {
        std::string out = "specialize " + s.name;
        for (const auto& t : s.terms) out += " " + term(t);
        return out;
    }
    case StepKind::Use: return "use " + pr(s.terms.at(0), 0);
    case StepKind::Apply: return "apply " + s.name;
    case StepKind::SeriesGeom: return "series_geom";
    case StepKind::SeriesGeomWeighted: return "series_geom_weighted";
    case StepKind::IndexShift: return "index_shift";
    case StepKind::DerivRule: return "deriv_rule " + s.name;
    case StepKind::Antideriv: return "antideriv";
    case StepKind::AntiderivConst: return "antideriv_const";
    case StepKind::LimitWitness: return "limit_witness " + std::to_string(s.count);
    }
    return "?";
}

std::string print_script(const DerivationScript& s) {
    std::ostringstream out;
    out << "theory " << s.name << "\n";
    for (const auto& d : s.decls) out << decl_keyword(d.kind) << " " << join(d.names) << " : " << d.sort << "\n";
    for (const auto& h : s.hyps) out << "hyp " << h.name << " : " << to_string(h.statement) << "\n";
    for (const auto& l : s.lets) out << "let " << l.name << " := " << to_string(l.body) << "\n";
    out << "goal " << to_string(s.goal) << "\n";
    out << "proof\n";
    for (const auto& st : s.steps) out << "  " << to_string(st) << "\n";
    out << "qed\n";
    return out.str();
}

bool equal(const DerivationScript& a, const DerivationScript& b) {
    if (a.name != b.name || !(a.decls == b.decls)) return false;
    if (a.hyps.size() != b.hyps.size() || a.lets.size() != b.lets.size() || a.steps.size() != b.steps.size())
        return false;
    for (std::size_t i = 0; i < a.hyps.size(); ++i)
        if (a.hyps[i].name != b.hyps[i].name || !equal(a.hyps[i].statement, b.hyps[i].statement)) return false;
    for (std::size_t i = 0; i < a.lets.size(); ++i)
        if (a.lets[i].name != b.lets[i].name || !equal(a.lets[i].body, b.lets[i].body)) return false;
    if (!equal(a.goal, b.goal)) return false;
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        const auto &x = a.steps[i], &y = b.steps[i];
        if (x.kind != y.kind || x.name != y.name || x.reverse != y.reverse || x.names != y.names ||
            x.count != y.count || x.terms.size() != y.terms.size())
            return false;
        for (std::size_t k = 0; k < x.terms.size(); ++k)
            if (!equal(x.terms[k], y.terms[k])) return false;
    }
    return true;
}

}  // namespace derivkit
