#include "derivkit/logic.hpp"
#include "derivkit/poly.hpp"

#include <algorithm>

namespace derivkit {

void Context::declare(const std::string& name, Sort s) { symbols[name] = s; }

void Context::add_hyp(const std::string& name, Formula f) { hyps.push_back({name, std::move(f)}); }

const Hypothesis* Context::find_hyp(const std::string& name) const {
    for (auto it = hyps.rbegin(); it != hyps.rend(); ++it)
        if (it->name == name) return &*it;
    return nullptr;
}

void Context::replace_hyp(const std::string& name, Formula f) {
    for (auto it = hyps.rbegin(); it != hyps.rend(); ++it) {
        if (it->name == name) {
            it->statement = std::move(f);
            return;
        }
    }
    add_hyp(name, std::move(f));
}

std::optional<Expr> Context::let_body(const std::string& name) const {
    for (const auto& [n, body] : lets)
        if (n == name) return body;
    return std::nullopt;
}

Expr Context::expand_lets(const Expr& e) const {
    Expr out = e;
    // lets may refer to earlier lets, so a bounded fixpoint suffices
    for (std::size_t round = 0; round <= lets.size(); ++round) {
        auto fv = free_vars(out);
        bool changed = false;
        for (auto it = lets.rbegin(); it != lets.rend(); ++it) {
            if (fv.count(it->first)) {
                out = substitute(out, it->first, it->second);
                changed = true;
            }
        }
        if (!changed) break;
    }
    return out;
}

void Context::ensure_states() {
    for (const char* s : {"s1", "s2"}) {
        if (!declared(s)) {
            declare(s, Sort::State);
            state_constants.push_back(s);
        }
    }
}

// ---------------------------------------------------------------------------
// atoms

namespace {

Expr canonical_binders(const Expr& e, int depth) {
    switch (e->kind) {
    case Kind::Var:
    case Kind::Const: return e;
    case Kind::Sum:
    case Kind::Diff: {
        std::string nb = "_" + std::to_string(depth);
        Expr body = canonical_binders(substitute(e->a, e->name, var(nb)), depth + 1);
        if (e->kind == Kind::Sum) return series(nb, e->start, body);
        return diff(nb, body, canonical_binders(e->b, depth));
    }
    case Kind::Pow:
        if (e->name.empty()) return pow(canonical_binders(e->a, depth), e->exponent);
        return pow_index(canonical_binders(e->a, depth), e->name);
    case Kind::Neg: return neg(canonical_binders(e->a, depth));
    case Kind::App:
        return e->deriv ? deriv_app(e->name, canonical_binders(e->a, depth))
                        : app(e->name, canonical_binders(e->a, depth));
    case Kind::Add: return add(canonical_binders(e->a, depth), canonical_binders(e->b, depth));
    case Kind::Sub: return sub(canonical_binders(e->a, depth), canonical_binders(e->b, depth));
    case Kind::Mul: return mul(canonical_binders(e->a, depth), canonical_binders(e->b, depth));
    case Kind::Div: return div(canonical_binders(e->a, depth), canonical_binders(e->b, depth));
    }
    return e;
}

}  // namespace

Expr abstract_atoms(const Expr& e, std::map<std::string, Expr>& atoms) {
    bool atom = e->kind == Kind::Sum || e->kind == Kind::App || e->kind == Kind::Diff ||
                (e->kind == Kind::Pow && !e->name.empty());
    if (atom) {
        std::string key = "@" + to_string(canonical_binders(e, 0));
        atoms.emplace(key, e);
        return var(key);
    }
    switch (e->kind) {
    case Kind::Var:
    case Kind::Const: return e;
    case Kind::Pow: return pow(abstract_atoms(e->a, atoms), e->exponent);
    case Kind::Neg: return neg(abstract_atoms(e->a, atoms));
    case Kind::Add: return add(abstract_atoms(e->a, atoms), abstract_atoms(e->b, atoms));
    case Kind::Sub: return sub(abstract_atoms(e->a, atoms), abstract_atoms(e->b, atoms));
    case Kind::Mul: return mul(abstract_atoms(e->a, atoms), abstract_atoms(e->b, atoms));
    case Kind::Div: return div(abstract_atoms(e->a, atoms), abstract_atoms(e->b, atoms));
    default: return e;
    }
}

Expr restore_atoms(const Expr& e, const std::map<std::string, Expr>& atoms) {
    Expr out = e;
    for (const auto& v : free_vars(e)) {
        auto it = atoms.find(v);
        if (it != atoms.end()) out = substitute(out, v, it->second);
    }
    return out;
}

Expr normalize_atoms(const Expr& e) {
    std::map<std::string, Expr> atoms;
    return restore_atoms(ring_normalize(abstract_atoms(e, atoms)), atoms);
}

bool same_normal_form(const Expr& a, const Expr& b) {
    std::map<std::string, Expr> atoms;
    Expr d = ring_normalize(sub(abstract_atoms(a, atoms), abstract_atoms(b, atoms)));
    return is_const(d, 0);
}

// ---------------------------------------------------------------------------
// discharge

namespace {

struct PatternFact {
    std::vector<std::string> vars;
    Formula body;  // Ne0 or Lt
};

class Prover {
public:
    explicit Prover(const Context& ctx) : ctx_(ctx) {
        for (const auto& h : ctx.hyps) absorb(h.statement);
    }

    bool ne0(const Expr& e, int depth);
    bool positive(const Expr& e, int depth);

    std::vector<std::string> trace;

private:
    const Context& ctx_;
    std::vector<Expr> pos_;
    std::vector<Expr> ne_;
    std::vector<PatternFact> patterns_;

    void absorb(const Formula& f) {
        switch (f->kind) {
        case FKind::And:
            absorb(f->p);
            absorb(f->q);
            return;
        case FKind::Lt:
            pos_.push_back(ctx_.expand_lets(is_const(f->l, 0) ? f->r : sub(f->r, f->l)));
            return;
        case FKind::Ne0: ne_.push_back(ctx_.expand_lets(f->l)); return;
        case FKind::Forall:
            if (f->p->kind == FKind::Ne0 || f->p->kind == FKind::Lt) patterns_.push_back({f->vars, f->p});
            return;
        default: return;
        }
    }

    bool note(bool ok, const std::string& rule, const Expr& e, const char* rel, std::size_t mark) {
        if (!ok) {
            trace.resize(mark);
            return false;
        }
        trace.push_back(rule + ": " + to_string(e) + rel);
        return true;
    }

    bool same_divfree(const Expr& a, const Expr& b) const {
        if (equal(a, b)) return true;
        if (has_division(a) || has_division(b)) return false;
        return same_normal_form(a, b);
    }

    bool nonneg(const Expr& e, int depth);
    bool by_normal_form(const Expr& e, bool want_positive, int depth);
};

bool Prover::ne0(const Expr& e, int depth) {
    if (depth > 24) return false;
    std::size_t mark = trace.size();
    static const char* rel = " != 0";

    // (a) hypothesis lookup up to sign
    for (const auto& f : ne_) {
        if (same_divfree(f, e) || same_divfree(neg(f), e) ||
            (e->kind == Kind::Neg && equal(e->a, f)))
            return note(true, "hyp", e, rel, mark);
    }
    for (const auto& pf : patterns_) {
        if (pf.body->kind != FKind::Ne0) continue;
        std::set<std::string> metas(pf.vars.begin(), pf.vars.end());
        std::map<std::string, Expr> sigma;
        if (match_expr(pf.body->l, e, metas, sigma)) return note(true, "hyp-instance", e, rel, mark);
    }
    // (b) literal or constant normal form
    if (e->kind == Kind::Const) return note(e->value != 0, "literal", e, rel, mark);
    if (is_rational(e) && !has_division(e)) {
        Expr n = ring_normalize(e);
        if (n->kind == Kind::Const && n->value != 0) return note(true, "constant", e, rel, mark);
    }
    // (c) products, powers, negation; (d) quotients
    switch (e->kind) {
    case Kind::Mul:
    case Kind::Div:
        if (ne0(e->a, depth + 1) && ne0(e->b, depth + 1))
            return note(true, e->kind == Kind::Mul ? "product" : "quotient", e, rel, mark);
        trace.resize(mark);
        break;
    case Kind::Pow:
        if (e->name.empty() && e->exponent == 0) return note(true, "power", e, rel, mark);
        if (ne0(e->a, depth + 1)) return note(true, "power", e, rel, mark);
        trace.resize(mark);
        break;
    case Kind::Neg:
        if (ne0(e->a, depth + 1)) return note(true, "negation", e, rel, mark);
        trace.resize(mark);
        break;
    default: break;
    }
    // (e) strict sign
    if (positive(e, depth + 1)) return note(true, "positive", e, rel, mark);
    trace.resize(mark);
    if (positive(neg(e), depth + 1)) return note(true, "negative", e, rel, mark);
    trace.resize(mark);
    // (k) normal form
    if (by_normal_form(e, false, depth + 1)) return note(true, "normal-form", e, rel, mark);
    trace.resize(mark);
    return false;
}

bool Prover::nonneg(const Expr& e, int depth) {
    if (e->kind == Kind::Const) return e->value >= 0;
    if (e->kind == Kind::Pow && e->name.empty() && e->exponent % 2 == 0) return true;
    if (e->kind == Kind::Mul && equal(e->a, e->b)) return true;
    if (e->kind == Kind::Add || e->kind == Kind::Mul)
        if (nonneg(e->a, depth) && nonneg(e->b, depth)) return true;
    return positive(e, depth + 1);
}

bool Prover::positive(const Expr& e, int depth) {
    if (depth > 24) return false;
    std::size_t mark = trace.size();
    static const char* rel = " > 0";

    // (a) lookup
    for (const auto& f : pos_)
        if (same_divfree(f, e)) return note(true, "hyp", e, rel, mark);
    for (const auto& pf : patterns_) {
        if (pf.body->kind != FKind::Lt || !is_const(pf.body->l, 0)) continue;
        std::set<std::string> metas(pf.vars.begin(), pf.vars.end());
        std::map<std::string, Expr> sigma;
        if (match_expr(pf.body->r, e, metas, sigma)) return note(true, "hyp-instance", e, rel, mark);
    }
    // (h) literal
    if (e->kind == Kind::Const) return note(e->value > 0, "literal", e, rel, mark);
    // (i) e - h is a nonnegative constant for a positive fact h
    if (is_rational(e) && !has_division(e)) {
        for (const auto& f : pos_) {
            if (!is_rational(f) || has_division(f)) continue;
            Expr d = ring_normalize(sub(e, f));
            if (d->kind == Kind::Const && d->value >= 0) return note(true, "hyp-shift", e, rel, mark);
        }
    }
    switch (e->kind) {
    case Kind::Mul:
    case Kind::Div:  // (f), (j)
        if (positive(e->a, depth + 1) && positive(e->b, depth + 1))
            return note(true, e->kind == Kind::Mul ? "product" : "quotient", e, rel, mark);
        trace.resize(mark);
        break;
    case Kind::Pow:
        if (e->name.empty() && e->exponent == 0) return note(true, "power", e, rel, mark);
        if (e->name.empty() && e->exponent % 2 == 0 && ne0(e->a, depth + 1))
            return note(true, "even-power", e, rel, mark);
        trace.resize(mark);
        if (positive(e->a, depth + 1)) return note(true, "power", e, rel, mark);
        trace.resize(mark);
        break;
    case Kind::Add:  // (g)
        if ((positive(e->a, depth + 1) && nonneg(e->b, depth + 1)) ||
            (nonneg(e->a, depth + 1) && positive(e->b, depth + 1)))
            return note(true, "sum", e, rel, mark);
        trace.resize(mark);
        break;
    case Kind::Sum: {
        // every term positive, given the range of the index
        Expr bound_fact = e->start == 1 ? var(e->name) : add(var(e->name), num(1));
        pos_.push_back(bound_fact);
        bool ok = positive(e->a, depth + 1);
        pos_.pop_back();
        if (ok) return note(true, "series", e, rel, mark);
        trace.resize(mark);
        break;
    }
    default: break;
    }
    if (by_normal_form(e, true, depth + 1)) return note(true, "normal-form", e, rel, mark);
    trace.resize(mark);
    return false;
}

// Sign analysis on the reduced fraction N/D of e, with series and function
// applications treated as opaque atoms. Sound only once every syntactic
// denominator of e is known to be nonzero.
class SignAnalysis {
public:
    SignAnalysis(const std::vector<Expr>& pos, const std::vector<Expr>& ne, const Expr& target,
                 std::map<std::string, Expr>& atoms) {
        target_ = abstract_atoms(target, atoms);
        std::vector<Expr> pa, na;
        for (const auto& f : pos)
            if (is_rational(abstract_atoms(f, atoms)) && !has_division(f)) pa.push_back(abstract_atoms(f, atoms));
        for (const auto& f : ne)
            if (!has_division(f)) na.push_back(abstract_atoms(f, atoms));
        std::set<std::string> vs = free_vars(target_);
        for (const auto& f : pa) {
            auto s = free_vars(f);
            vs.insert(s.begin(), s.end());
        }
        for (const auto& f : na) {
            auto s = free_vars(f);
            vs.insert(s.begin(), s.end());
        }
        vars_.assign(vs.begin(), vs.end());
        for (const auto& f : pa) pos_polys_.push_back(to_ratfunc(f, vars_).num);
        pos_atoms_.assign(vars_.size(), false);
        nz_atoms_.assign(vars_.size(), false);
        for (const auto& f : na) {
            Poly p = to_ratfunc(f, vars_).num;
            if (p.terms().size() == 1) {
                const Mono& m = p.leading_mono();
                for (std::size_t i = 0; i < m.size(); ++i)
                    if (m[i] > 0) nz_atoms_[i] = true;
            }
        }
        close_atoms();
    }

    const Expr& target() const { return target_; }
    RatFunc target_fraction() const { return to_ratfunc(target_, vars_); }

    bool mono_pos(const Mono& m) const {
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i] == 0) continue;
            if (m[i] % 2 == 1 && !pos_atoms_[i]) return false;
            if (m[i] % 2 == 0 && !nz_atoms_[i]) return false;
        }
        return true;
    }

    bool mono_nonneg(const Mono& m) const {
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i] % 2 == 1 && !pos_atoms_[i]) return false;
        return true;
    }

    bool all_terms(const Poly& p, bool strict) const {
        if (p.is_zero()) return false;
        for (const auto& [m, c] : p.terms()) {
            if (c < 0) return false;
            if (strict ? !mono_pos(m) : !mono_nonneg(m)) return false;
        }
        return true;
    }

    bool pos_poly(const Poly& p) const {
        if (p.is_zero()) return false;
        if (p.is_constant()) return p.constant_value() > 0;
        if (all_terms(p, true)) return true;
        for (const auto& f : pos_polys_) {
            Poly r = p - f;
            if (r.is_zero()) return true;
            if (all_terms(r, false)) return true;
        }
        return false;
    }

    bool nonzero_mono(const Poly& p) const {
        if (p.terms().size() != 1) return false;
        const Mono& m = p.leading_mono();
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i] > 0 && !nz_atoms_[i]) return false;
        return true;
    }

private:
    Expr target_;
    std::vector<std::string> vars_;
    std::vector<Poly> pos_polys_;
    std::vector<bool> pos_atoms_, nz_atoms_;

    void close_atoms() {
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& f : pos_polys_) {
                if (f.terms().size() != 1 || f.leading_coeff() < 0) continue;
                const Mono& m = f.leading_mono();
                std::vector<std::size_t> unknown;
                for (std::size_t i = 0; i < m.size(); ++i) {
                    if (m[i] == 0) continue;
                    if (!nz_atoms_[i]) {
                        nz_atoms_[i] = true;
                        changed = true;
                    }
                    if (m[i] % 2 == 1 && !pos_atoms_[i]) unknown.push_back(i);
                }
                if (unknown.size() == 1) {
                    pos_atoms_[unknown[0]] = true;
                    changed = true;
                }
            }
        }
    }
};

bool Prover::by_normal_form(const Expr& e, bool want_positive, int depth) {
    std::map<std::string, Expr> atoms;
    Expr abstracted = abstract_atoms(e, atoms);
    if (!is_rational(abstracted)) return false;
    std::vector<Expr> dens;
    collect_denominators(abstracted, dens);
    for (const auto& d : dens)
        if (!ne0(restore_atoms(d, atoms), depth + 1)) return false;
    SignAnalysis sa(pos_, ne_, e, atoms);
    RatFunc rf = sa.target_fraction();
    if (rf.num.is_zero()) return false;
    bool pos = sa.pos_poly(rf.num) && sa.pos_poly(rf.den);
    bool negv = sa.pos_poly(-rf.num) && sa.pos_poly(rf.den);
    if (want_positive) return pos;
    return pos || negv || sa.nonzero_mono(rf.num) ||
           (sa.pos_poly(-rf.num) && sa.pos_poly(-rf.den)) || (sa.pos_poly(rf.num) && sa.pos_poly(-rf.den));
}

}  // namespace

std::optional<Discharge> try_discharge(const Context& ctx, const Formula& obligation) {
    Prover pr(ctx);
    bool ok = false;
    switch (obligation->kind) {
    case FKind::Ne0: ok = pr.ne0(ctx.expand_lets(obligation->l), 0); break;
    case FKind::Lt:
        ok = pr.positive(ctx.expand_lets(is_const(obligation->l, 0) ? obligation->r
                                                                     : sub(obligation->r, obligation->l)),
                         0);
        break;
    default: return std::nullopt;
    }
    if (!ok) return std::nullopt;
    return Discharge{pr.trace};
}

Discharge discharge(const Context& ctx, const Formula& obligation) {
    auto d = try_discharge(ctx, obligation);
    if (!d) throw NotDerivable(obligation);
    return *d;
}

}  // namespace derivkit
