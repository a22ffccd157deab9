#include "derivkit/kernel.hpp"
#include "derivkit/poly.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

namespace derivkit {

std::string CheckReport::verdict_line() const {
    if (accepted)
        return soundness == Soundness::NumericCertified ? "Accepted (NumericCertified)" : "Accepted (Symbolic)";
    if (!failure) return "Failed";
    switch (failure->kind) {
    case Failure::Kind::ObligationFailed:
    case Failure::Kind::StepFailed: return failure->reason + " at step " + std::to_string(failure->step);
    case Failure::Kind::GoalNotClosed: return failure->reason;
    }
    return "Failed";
}

std::string goal_string(const GoalState& gs) {
    if (gs.goals.empty()) return "no goals";
    std::string out;
    for (std::size_t i = 0; i < gs.goals.size(); ++i) out += (i ? " ;; " : "") + display(gs.goals[i]);
    return out;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw StepFailed("StepFailed: " + msg); }

void split_focus(GoalState& gs) {
    while (!gs.goals.empty() && gs.goals.front()->kind == FKind::And) {
        Formula f = gs.goals.front();
        gs.goals.erase(gs.goals.begin());
        gs.goals.insert(gs.goals.begin(), {f->p, f->q});
    }
}

Formula& focus(GoalState& gs) {
    if (gs.goals.empty()) fail("no goals remain");
    return gs.goals.front();
}

void close_focus(GoalState& gs) {
    gs.goals.erase(gs.goals.begin());
    split_focus(gs);
}

void prove(const Context& ctx, const Formula& ob, StepRecord& rec) {
    auto d = try_discharge(ctx, ob);
    if (!d) throw ObligationFailed(ob);
    rec.obligations.push_back({display(ob), d->trace});
}

Formula binder_fact(const Expr& sum) {
    if (sum->start == 1) return f_lt(num(0), var(sum->name));
    return f_lt(num(0), add(var(sum->name), num(1)));
}

// ---------------------------------------------------------------------------
// rewriting

struct Rewriter {
    const Context& ctx;
    StepRecord& rec;
    Expr pattern, rhs;
    std::set<std::string> metas;
    Formula guard;          // optional premise, instantiated and discharged per match
    bool by_normal_form = false;
    bool mul_div = false;   // also try a*(b/c) at (a*b)/c
    bool fill_unmatched = false;
    std::function<void(const std::map<std::string, Expr>&)> on_match;
    std::vector<Formula> facts;
    int count = 0;

    std::optional<Expr> here(const Expr& e) {
        std::map<std::string, Expr> sigma;
        if (by_normal_form) {
            if (e->kind == Kind::Const || e->kind == Kind::Var) return std::nullopt;
            std::map<std::string, Expr> atoms;
            Expr ea = abstract_atoms(e, atoms);
            if (!is_rational(ea) || has_division(ea)) return std::nullopt;
            if (!same_normal_form(e, pattern)) return std::nullopt;
        } else if (!match_expr(pattern, e, metas, sigma)) {
            return std::nullopt;
        }
        for (const auto& m : metas) {
            if (sigma.count(m)) continue;
            bool needed = free_vars(rhs).count(m) || (guard && free_vars(guard).count(m));
            if (fill_unmatched) sigma[m] = var(m);
            else if (needed) fail("metavariable " + m + " is not determined by the match");
        }
        if (guard) {
            Context local = ctx;
            for (std::size_t k = 0; k < facts.size(); ++k) local.add_hyp("_index" + std::to_string(k), facts[k]);
            prove(local, instantiate(guard, sigma), rec);
        }
        if (on_match) on_match(sigma);
        ++count;
        return instantiate(rhs, sigma);
    }

    Expr run(const Expr& e) {
        if (auto r = here(e)) return *r;
        if (mul_div && e->kind == Kind::Div && e->a->kind == Kind::Mul) {
            if (auto r = here(div(e->a->b, e->b))) return mul(e->a->a, *r);
        }
        switch (e->kind) {
        case Kind::Var:
        case Kind::Const: return e;
        case Kind::Pow: {
            Expr b = run(e->a);
            if (b == e->a) return e;
            return e->name.empty() ? pow(b, e->exponent) : pow_index(b, e->name);
        }
        case Kind::Neg: {
            Expr a = run(e->a);
            return a == e->a ? e : neg(a);
        }
        case Kind::App: {
            Expr a = run(e->a);
            if (a == e->a) return e;
            return e->deriv ? deriv_app(e->name, a) : app(e->name, a);
        }
        case Kind::Sum: {
            facts.push_back(binder_fact(e));
            Expr body = run(e->a);
            facts.pop_back();
            return body == e->a ? e : series(e->name, e->start, body);
        }
        case Kind::Diff: {
            Expr body = run(e->a);
            Expr pt = run(e->b);
            return (body == e->a && pt == e->b) ? e : diff(e->name, body, pt);
        }
        default: {
            Expr a = run(e->a);
            Expr b = run(e->b);
            if (a == e->a && b == e->b) return e;
            switch (e->kind) {
            case Kind::Add: return add(a, b);
            case Kind::Sub: return sub(a, b);
            case Kind::Mul: return mul(a, b);
            default: return div(a, b);
            }
        }
        }
    }

    Formula run(const Formula& f) {
        switch (f->kind) {
        case FKind::Eq: {
            Expr l = run(f->l);
            return f_eq(l, run(f->r));
        }
        case FKind::Lt: {
            Expr l = run(f->l);
            return f_lt(l, run(f->r));
        }
        case FKind::Ne0: return f_ne0(run(f->l));
        default: fail("goal is not an equation or inequality");
        }
    }
};

// Splits a rewrite hypothesis into binders, optional guard and equation.
struct RewriteRule {
    std::vector<std::string> vars;
    Formula guard;
    Expr lhs, rhs;
};

RewriteRule rule_of(const Formula& h) {
    RewriteRule r;
    Formula f = h;
    if (f->kind == FKind::Forall) {
        r.vars = f->vars;
        f = f->p;
    }
    if (f->kind == FKind::Implies) {
        r.guard = f->p;
        f = f->q;
    }
    if (f->kind != FKind::Eq) fail("hypothesis is not an equation");
    r.lhs = f->l;
    r.rhs = f->r;
    return r;
}

void step_rewrite(GoalState& gs, const ProofStep& st, StepRecord& rec) {
    const Hypothesis* h = gs.ctx.find_hyp(st.name);
    if (!h) fail("no hypothesis named " + st.name);
    RewriteRule rule = rule_of(h->statement);
    if (st.reverse) std::swap(rule.lhs, rule.rhs);
    Formula goal = focus(gs);

    auto attempt = [&](const Expr& pattern, bool nf) -> bool {
        Rewriter rw{gs.ctx, rec, pattern, rule.rhs, {rule.vars.begin(), rule.vars.end()}, rule.guard};
        rw.by_normal_form = nf;
        Formula out = rw.run(goal);
        if (rw.count == 0) return false;
        focus(gs) = out;
        return true;
    };

    if (attempt(rule.lhs, false)) return;
    Expr expanded = gs.ctx.expand_lets(rule.lhs);
    if (!equal(expanded, rule.lhs) && attempt(expanded, false)) return;
    if (rule.vars.empty()) {
        std::map<std::string, Expr> atoms;
        bool ground_rational = is_rational(abstract_atoms(rule.lhs, atoms));
        if (ground_rational && attempt(rule.lhs, true)) return;
        if (ground_rational && !equal(expanded, rule.lhs) && attempt(expanded, true)) return;
    }
    fail("rw " + st.name + ": pattern " + to_string(rule.lhs) + " not found");
}

void step_unfold(GoalState& gs, const ProofStep& st) {
    auto body = gs.ctx.let_body(st.name);
    if (!body) fail("no definition named " + st.name);
    Formula g = focus(gs);
    if (!free_vars(g).count(st.name)) fail("unfold " + st.name + ": name does not occur in goal");
    focus(gs) = substitute(g, st.name, *body);
}

std::vector<Expr> distinct_denominators(const std::vector<Expr>& sides, std::map<std::string, Expr>& atoms) {
    std::vector<Expr> dens;
    for (const auto& s : sides) {
        std::vector<Expr> found;
        collect_denominators(abstract_atoms(s, atoms), found);
        for (const auto& d : found) {
            bool dup = false;
            for (const auto& x : dens) dup = dup || equal(x, d);
            if (!dup) dens.push_back(d);
        }
    }
    return dens;
}

std::vector<std::string> sorted_vars(const std::vector<Expr>& es) {
    std::set<std::string> vs;
    for (const auto& e : es) {
        auto f = free_vars(e);
        vs.insert(f.begin(), f.end());
    }
    return {vs.begin(), vs.end()};
}

void step_field_normalize(GoalState& gs, StepRecord& rec) {
    Formula g = focus(gs);
    if (g->kind != FKind::Eq) fail("field_normalize expects an equation goal");
    std::map<std::string, Expr> atoms;
    Expr l = abstract_atoms(g->l, atoms), r = abstract_atoms(g->r, atoms);
    if (!is_rational(l) || !is_rational(r)) fail("field_normalize: non-rational term");
    auto dens = distinct_denominators({g->l, g->r}, atoms);
    std::size_t before = rec.obligations.size();
    for (const auto& d : dens) prove(gs.ctx, f_ne0(restore_atoms(d, atoms)), rec);
    if (rec.obligations.size() - before != dens.size())
        throw std::logic_error("field_normalize: obligation count mismatch");

    auto vars = sorted_vars({l, r});
    RatFunc rl = to_ratfunc(l, vars), rr = to_ratfunc(r, vars);
    Poly d = rl.num * rr.den - rr.num * rl.den;
    Poly lhs(vars.size()), rhs(vars.size());
    if (!d.is_zero()) {
        d = d.divide_int(d.integer_content()).divide_mono(d.monomial_content());
        for (const auto& [m, c] : d.terms()) {
            if (c > 0) lhs.add_term(m, c);
            else rhs.add_term(m, -c);
        }
    }
    focus(gs) = f_eq(restore_atoms(poly_to_expr(lhs, vars), atoms), restore_atoms(poly_to_expr(rhs, vars), atoms));
}

// closes an Eq goal by normal-form comparison, or an atomic goal by discharge
bool try_close(GoalState& gs, StepRecord& rec, bool throw_on_fail) {
    Formula g = focus(gs);
    if (g->kind == FKind::Ne0 || g->kind == FKind::Lt) {
        prove(gs.ctx, g, rec);
        close_focus(gs);
        return true;
    }
    if (g->kind != FKind::Eq) {
        if (throw_on_fail) fail("ring expects an equation goal");
        return false;
    }
    std::map<std::string, Expr> atoms;
    Expr l = abstract_atoms(g->l, atoms), r = abstract_atoms(g->r, atoms);
    if (!is_rational(l) || !is_rational(r)) {
        if (throw_on_fail) fail("ring: non-rational term");
        return false;
    }
    auto vars = sorted_vars({l, r});
    RatFunc diff_rf = to_ratfunc(sub(l, r), vars);
    if (!diff_rf.num.is_zero()) {
        if (throw_on_fail) fail("ring: sides differ (" + to_string(g->l) + " vs " + to_string(g->r) + ")");
        return false;
    }
    for (const auto& d : distinct_denominators({g->l, g->r}, atoms)) {
        if (d->kind == Kind::Const && d->value != 0) continue;
        prove(gs.ctx, f_ne0(restore_atoms(d, atoms)), rec);
    }
    close_focus(gs);
    return true;
}

bool name_in_use(const GoalState& gs, const std::string& n) {
    return gs.ctx.declared(n) || gs.ctx.find_hyp(n) != nullptr;
}

void step_intro(GoalState& gs, const ProofStep& st) {
    for (const auto& n : st.names) {
        Formula g = focus(gs);
        if (g->kind == FKind::Forall) {
            if (name_in_use(gs, n)) fail("intro: name " + n + " already in use");
            Formula body = substitute(g->p, g->vars[0], var(n));
            std::vector<std::string> rest(g->vars.begin() + 1, g->vars.end());
            focus(gs) = rest.empty() ? body : f_forall(rest, body);
            gs.ctx.declare(n, Sort::Bound);
        } else if (g->kind == FKind::Implies) {
            Formula prem = g->p;
            if (prem->kind == FKind::Exists) {
                if (name_in_use(gs, n)) fail("intro: name " + n + " already in use");
                focus(gs) = f_implies(substitute(prem->p, prem->vars[0], var(n)), g->q);
                gs.ctx.declare(n, Sort::Bound);
            } else if (prem->kind == FKind::And) {
                gs.ctx.add_hyp(n, prem->p);
                focus(gs) = f_implies(prem->q, g->q);
            } else {
                gs.ctx.add_hyp(n, prem);
                focus(gs) = g->q;
            }
        } else {
            fail("intro: goal has no binder or premise");
        }
    }
    split_focus(gs);
}

void step_specialize(GoalState& gs, const ProofStep& st) {
    const Hypothesis* h = gs.ctx.find_hyp(st.name);
    if (!h) fail("no hypothesis named " + st.name);
    try {
        gs.ctx.replace_hyp(st.name, specialize(h->statement, st.terms));
    } catch (const ArityMismatch& e) {
        fail(std::string("ArityMismatch: ") + e.what());
    }
}

void step_use(GoalState& gs, const ProofStep& st) {
    Formula g = focus(gs);
    if (g->kind != FKind::Exists) fail("use: goal is not existential");
    focus(gs) = exists_intro(g, st.terms.at(0));
    split_focus(gs);
}

// ---------------------------------------------------------------------------
// lemma application

std::set<std::string> lets_used(const DerivationScript& lemma) {
    std::set<std::string> names;
    for (const auto& l : lemma.lets) names.insert(l.name);
    std::set<std::string> used;
    std::vector<std::string> todo;
    auto scan = [&](const std::set<std::string>& fv) {
        for (const auto& v : fv)
            if (names.count(v) && used.insert(v).second) todo.push_back(v);
    };
    scan(free_vars(lemma.goal));
    for (const auto& h : lemma.hyps) scan(free_vars(h.statement));
    while (!todo.empty()) {
        std::string n = todo.back();
        todo.pop_back();
        for (const auto& l : lemma.lets)
            if (l.name == n) scan(free_vars(l.body));
    }
    return used;
}

void step_apply(GoalState& gs, const ProofStep& st, StepRecord& rec, const LemmaStore& lemmas) {
    auto it = lemmas.find(st.name);
    if (it == lemmas.end()) fail("apply: " + st.name + " is not an accepted lemma in this run");
    const DerivationScript& lemma = it->second;

    for (const auto& n : lets_used(lemma)) {
        const Expr* lb = nullptr;
        for (const auto& l : lemma.lets)
            if (l.name == n) lb = &l.body;
        auto mine = gs.ctx.let_body(n);
        if (!mine || !equal(*mine, *lb)) fail("apply: definition " + n + " differs from the lemma's");
    }

    std::set<std::string> metas;
    for (const auto& d : lemma.decls)
        if (d.kind == Decl::Kind::Vars)
            for (const auto& n : d.names) metas.insert(n);

    auto check_hyps = [&](const std::map<std::string, Expr>& sigma_in) {
        std::map<std::string, Expr> sigma;
        for (const auto& m : metas) {
            auto f = sigma_in.find(m);
            sigma[m] = f != sigma_in.end() ? f->second : var(m);
        }
        for (const auto& h : lemma.hyps) {
            Formula need = instantiate(h.statement, sigma);
            if (need->kind == FKind::Ne0 || need->kind == FKind::Lt) {
                bool found = false;
                for (const auto& mine : gs.ctx.hyps) found = found || alpha_equal(mine.statement, need);
                if (!found) prove(gs.ctx, need, rec);
                continue;
            }
            bool found = false;
            for (const auto& mine : gs.ctx.hyps) found = found || alpha_equal(mine.statement, need);
            if (!found) fail("apply " + st.name + ": hypothesis " + h.name + " (" + to_string(need) + ") not available");
        }
    };

    Formula g = focus(gs);
    std::map<std::string, Expr> sigma;
    if (match_formula(lemma.goal, g, metas, sigma)) {
        check_hyps(sigma);
        close_focus(gs);
        return;
    }
    if (lemma.goal->kind == FKind::Implies) {
        sigma.clear();
        if (match_formula(lemma.goal->q, g, metas, sigma)) {
            check_hyps(sigma);
            for (const auto& m : metas)
                if (!sigma.count(m)) sigma[m] = var(m);
            focus(gs) = instantiate(lemma.goal->p, sigma);
            split_focus(gs);
            return;
        }
    }
    Formula body = lemma.goal;
    std::set<std::string> all = metas;
    if (body->kind == FKind::Forall) {
        all.insert(body->vars.begin(), body->vars.end());
        body = body->p;
    }
    if (body->kind != FKind::Eq) fail("apply " + st.name + ": lemma does not match the goal");
    Rewriter rw{gs.ctx, rec, body->l, body->r, all, nullptr};
    rw.mul_div = true;
    rw.fill_unmatched = true;
    rw.on_match = check_hyps;
    Formula out = rw.run(g);
    if (rw.count == 0) fail("apply " + st.name + ": lemma does not match the goal");
    focus(gs) = out;
}

// ---------------------------------------------------------------------------
// series

void flatten_mul(const Expr& e, std::vector<Expr>& out) {
    if (e->kind == Kind::Mul) {
        flatten_mul(e->a, out);
        flatten_mul(e->b, out);
    } else {
        out.push_back(e);
    }
}

struct GeomShape {
    Expr base;
    Expr coeff;  // nullptr when 1
};

std::optional<GeomShape> geom_shape(const Expr& sum, bool weighted) {
    if (sum->kind != Kind::Sum || sum->start != 1) return std::nullopt;
    const std::string& i = sum->name;
    std::vector<Expr> fs;
    flatten_mul(sum->a, fs);
    Expr base;
    int index_factors = 0;
    Expr coeff;
    for (const auto& f : fs) {
        if (f->kind == Kind::Pow && f->name == i && !contains_var(f->a, i)) {
            if (base) return std::nullopt;
            base = f->a;
        } else if (f->kind == Kind::Var && f->name == i) {
            ++index_factors;
        } else if (!contains_var(f, i)) {
            coeff = coeff ? mul(coeff, f) : f;
        } else {
            return std::nullopt;
        }
    }
    if (!base || index_factors != (weighted ? 1 : 0)) return std::nullopt;
    return GeomShape{base, coeff};
}

void step_series(GoalState& gs, StepRecord& rec, bool weighted) {
    std::vector<Expr> bases;
    std::function<Expr(const Expr&)> walk = [&](const Expr& e) -> Expr {
        if (auto shape = geom_shape(e, weighted)) {
            bases.push_back(shape->base);
            Expr one_minus = sub(num(1), shape->base);
            Expr closed = div(shape->base, weighted ? pow(one_minus, 2) : one_minus);
            return shape->coeff ? mul(shape->coeff, closed) : closed;
        }
        switch (e->kind) {
        case Kind::Var:
        case Kind::Const: return e;
        case Kind::Pow: return e->name.empty() ? pow(walk(e->a), e->exponent) : pow_index(walk(e->a), e->name);
        case Kind::Neg: return neg(walk(e->a));
        case Kind::App: return e->deriv ? deriv_app(e->name, walk(e->a)) : app(e->name, walk(e->a));
        case Kind::Sum: return series(e->name, e->start, walk(e->a));
        case Kind::Diff: return diff(e->name, walk(e->a), walk(e->b));
        case Kind::Add: return add(walk(e->a), walk(e->b));
        case Kind::Sub: return sub(walk(e->a), walk(e->b));
        case Kind::Mul: return mul(walk(e->a), walk(e->b));
        case Kind::Div: return div(walk(e->a), walk(e->b));
        }
        return e;
    };
    Formula g = focus(gs);
    if (g->kind != FKind::Eq) fail("series step expects an equation goal");
    Formula out = f_eq(walk(g->l), walk(g->r));
    if (bases.empty())
        fail(weighted ? "series_geom_weighted: no series of the form sum[i>=1](c * i * x^i)"
                      : "series_geom: no series of the form sum[i>=1](c * x^i)");
    std::vector<Expr> distinct;
    for (const auto& b : bases) {
        bool dup = false;
        for (const auto& d : distinct) dup = dup || equal(d, b);
        if (!dup) distinct.push_back(b);
    }
    for (const auto& b : distinct) {
        prove(gs.ctx, f_lt(num(0), b), rec);
        prove(gs.ctx, f_lt(b, num(1)), rec);
    }
    focus(gs) = out;
}

bool has_zero_factor(const Expr& e) {
    std::vector<Expr> fs;
    flatten_mul(e, fs);
    for (const auto& f : fs)
        if (is_const(f, 0)) return true;
    return false;
}

void step_index_shift(GoalState& gs) {
    int count = 0;
    std::function<Expr(const Expr&)> walk = [&](const Expr& e) -> Expr {
        if (e->kind == Kind::Sum && e->start == 0) {
            ++count;
            Expr first = substitute(e->a, e->name, num(0));
            Expr rest = series(e->name, 1, e->a);
            if (has_zero_factor(first) || is_const(first, 0)) return rest;
            return add(first, rest);
        }
        switch (e->kind) {
        case Kind::Var:
        case Kind::Const: return e;
        case Kind::Pow: return e->name.empty() ? pow(walk(e->a), e->exponent) : pow_index(walk(e->a), e->name);
        case Kind::Neg: return neg(walk(e->a));
        case Kind::App: return e->deriv ? deriv_app(e->name, walk(e->a)) : app(e->name, walk(e->a));
        case Kind::Sum: return series(e->name, e->start, walk(e->a));
        case Kind::Diff: return diff(e->name, walk(e->a), walk(e->b));
        case Kind::Add: return add(walk(e->a), walk(e->b));
        case Kind::Sub: return sub(walk(e->a), walk(e->b));
        case Kind::Mul: return mul(walk(e->a), walk(e->b));
        case Kind::Div: return div(walk(e->a), walk(e->b));
        }
        return e;
    };
    Formula g = focus(gs);
    if (g->kind != FKind::Eq) fail("index_shift expects an equation goal");
    Formula out = f_eq(walk(g->l), walk(g->r));
    if (count == 0) fail("index_shift: no series starting at 0");
    focus(gs) = out;
}

// ---------------------------------------------------------------------------
// derivatives

std::optional<Expr> deriv_rewrite(const std::string& rule, const Expr& d) {
    const std::string& u = d->name;
    const Expr& body = d->a;
    const Expr& pt = d->b;
    auto D = [&](const Expr& e) { return diff(u, e, pt); };
    if (rule == "const") {
        if (!contains_var(body, u)) return num(0);
    } else if (rule == "id") {
        if (body->kind == Kind::Var && body->name == u) return num(1);
    } else if (rule == "pow") {
        if (body->kind == Kind::Pow && body->name.empty() && body->a->kind == Kind::Var && body->a->name == u)
            return mul(num(body->exponent), pow(pt, body->exponent - 1));
    } else if (rule == "linear") {
        if (body->kind == Kind::Add) return add(D(body->a), D(body->b));
        if (body->kind == Kind::Sub) return sub(D(body->a), D(body->b));
        if (body->kind == Kind::Neg) return neg(D(body->a));
    } else if (rule == "scalar") {
        if (body->kind == Kind::Mul && !contains_var(body->a, u)) return mul(body->a, D(body->b));
        if (body->kind == Kind::Mul && !contains_var(body->b, u)) return mul(D(body->a), body->b);
        if (body->kind == Kind::Div && !contains_var(body->b, u)) return div(D(body->a), body->b);
    }
    return std::nullopt;
}

void step_deriv_rule(GoalState& gs, const ProofStep& st) {
    int count = 0;
    std::function<Expr(const Expr&)> walk = [&](const Expr& e) -> Expr {
        if (e->kind == Kind::Diff) {
            if (auto r = deriv_rewrite(st.name, e)) {
                ++count;
                return *r;
            }
            return diff(e->name, walk(e->a), walk(e->b));
        }
        switch (e->kind) {
        case Kind::Var:
        case Kind::Const: return e;
        case Kind::Pow: return e->name.empty() ? pow(walk(e->a), e->exponent) : pow_index(walk(e->a), e->name);
        case Kind::Neg: return neg(walk(e->a));
        case Kind::App: return e->deriv ? deriv_app(e->name, walk(e->a)) : app(e->name, walk(e->a));
        case Kind::Sum: return series(e->name, e->start, walk(e->a));
        case Kind::Add: return add(walk(e->a), walk(e->b));
        case Kind::Sub: return sub(walk(e->a), walk(e->b));
        case Kind::Mul: return mul(walk(e->a), walk(e->b));
        case Kind::Div: return div(walk(e->a), walk(e->b));
        default: return e;
        }
    };
    Formula g = focus(gs);
    if (g->kind != FKind::Eq) fail("deriv_rule expects an equation goal");
    Formula out = f_eq(walk(g->l), walk(g->r));
    if (count == 0) fail("deriv_rule " + st.name + ": no derivative matches the rule");
    focus(gs) = out;
}

// g must be a polynomial in t with t-free coefficients (atoms may not mention t)
bool polynomial_class(const Expr& g, const std::string& t) {
    std::map<std::string, Expr> atoms;
    Expr a = abstract_atoms(g, atoms);
    if (!is_rational(a)) return false;
    for (const auto& [k, v] : atoms)
        if (contains_var(v, t)) return false;
    std::vector<Expr> dens;
    collect_denominators(a, dens);
    for (const auto& d : dens)
        if (contains_var(d, t)) return false;
    return true;
}

struct AntiderivShape {
    std::string t, fn;
    Expr g;
    Expr f;  // derivative of fn at t
};

AntiderivShape antideriv_shape(const GoalState& gs) {
    Formula goal = gs.goals.front();
    if (goal->kind != FKind::Forall || goal->vars.size() != 1 || goal->p->kind != FKind::Eq)
        fail("antideriv: goal must be forall t, F(t) = g + F(0)");
    const std::string& t = goal->vars[0];
    Expr l = goal->p->l, r = goal->p->r;
    if (l->kind != Kind::App || l->deriv || l->a->kind != Kind::Var || l->a->name != t)
        fail("antideriv: left side must be F(t)");
    if (r->kind != Kind::Add || r->b->kind != Kind::App || r->b->name != l->name || r->b->deriv ||
        !is_const(r->b->a, 0))
        fail("antideriv: right side must be g + F(0)");
    AntiderivShape s{t, l->name, r->a, nullptr};
    for (const auto& h : gs.ctx.hyps) {
        Formula f = h.statement;
        if (f->kind != FKind::Forall || f->vars.size() != 1 || f->p->kind != FKind::Eq) continue;
        Expr hl = f->p->l;
        if (hl->kind == Kind::App && hl->deriv && hl->name == s.fn && hl->a->kind == Kind::Var &&
            hl->a->name == f->vars[0]) {
            s.f = substitute(f->p->r, f->vars[0], var(t));
            break;
        }
    }
    if (!s.f) fail("antideriv: no hypothesis forall t, deriv(" + s.fn + ", t) = f(t)");
    if (!polynomial_class(s.g, t)) fail("antideriv: " + to_string(s.g) + " is not polynomial in " + t);
    return s;
}

void step_antideriv(GoalState& gs) {
    focus(gs);
    AntiderivShape s = antideriv_shape(gs);
    std::set<std::string> avoid = free_vars(s.g);
    avoid.insert(s.t);
    std::string u = fresh_name("u", avoid);
    Formula deriv_goal = f_forall({s.t}, f_eq(diff(u, substitute(s.g, s.t, var(u)), var(s.t)), s.f));
    Formula zero_goal = f_eq(substitute(s.g, s.t, num(0)), num(0));
    focus(gs) = f_and(deriv_goal, zero_goal);
    split_focus(gs);
}

void step_antideriv_const(GoalState& gs) {
    focus(gs);
    AntiderivShape s = antideriv_shape(gs);
    if (contains_var(s.f, s.t)) fail("antideriv_const: derivative depends on " + s.t);
    std::map<std::string, Expr> atoms;
    if (!is_rational(abstract_atoms(s.f, atoms)) || !same_normal_form(s.g, mul(var(s.t), s.f)))
        fail("antideriv_const: " + to_string(s.g) + " is not " + s.t + " * " + to_string(s.f));
    close_focus(gs);
}

// ---------------------------------------------------------------------------
// numeric limit witness

void step_limit_witness(GoalState& gs, const ProofStep& st, StepRecord& rec) {
    Formula g = focus(gs);
    if (g->kind != FKind::DivergesLeft) fail("limit_witness: goal is not diverges_left");
    Expr fn = gs.ctx.expand_lets(var(g->fn));
    Expr point = gs.ctx.expand_lets(g->l);

    Env env;
    bool progress = true;
    while (progress) {
        progress = false;
        for (const auto& h : gs.ctx.hyps) {
            Formula f = h.statement;
            if (f->kind != FKind::Eq || f->l->kind != Kind::Var || env.vars.count(f->l->name)) continue;
            Expr rhs = gs.ctx.expand_lets(f->r);
            bool closed = true;
            for (const auto& v : free_vars(rhs)) closed = closed && env.vars.count(v);
            if (!closed || !free_fns(rhs).empty()) continue;
            env.vars[f->l->name] = eval(rhs, env, 1);
            progress = true;
        }
    }
    std::vector<std::string> open;
    for (const auto& v : free_vars(fn))
        if (!env.vars.count(v)) open.push_back(v);
    if (open.size() != 1) fail("limit_witness: expected exactly one free variable after pinning constants, found " + std::to_string(open.size()));
    for (const auto& v : free_vars(point))
        if (!env.vars.count(v)) fail("limit_witness: point depends on unpinned symbol " + v);
    double p = eval(point, env, 1);
    std::vector<double> values;
    std::ostringstream table;
    table << "divergence witness for " << g->fn << " at " << open[0] << " -> " << p << " from the left:";
    for (long j = 1; j <= st.count; ++j) {
        env.vars[open[0]] = p - std::pow(10.0, -static_cast<double>(j));
        values.push_back(eval(fn, env, 1));
        table << " " << values.back();
    }
    rec.notes.push_back(table.str());
    rec.notes.push_back("criterion: strictly increasing over " + std::to_string(st.count) +
                        " points and final value > 1e6");
    gs.divergence_table = values;
    for (std::size_t k = 1; k < values.size(); ++k)
        if (!(values[k] > values[k - 1])) fail("limit_witness: values not strictly increasing");
    if (!(values.back() > kDivergenceCap)) fail("limit_witness: final value does not exceed 1e6");
    gs.soundness = Soundness::NumericCertified;
    close_focus(gs);
}

}  // namespace

GoalState initial_state(const DerivationScript& s) {
    GoalState gs;
    gs.ctx = make_context(s);
    gs.goals.push_back(s.goal);
    split_focus(gs);
    return gs;
}

void apply_step(GoalState& gs, const ProofStep& st, const LemmaStore& lemmas) {
    StepRecord rec;
    rec.step = to_string(st);
    rec.goal_before = goal_string(gs);
    if (gs.goals.empty()) fail("no goals remain");
    switch (st.kind) {
    case StepKind::Rewrite: step_rewrite(gs, st, rec); break;
    case StepKind::Unfold: step_unfold(gs, st); break;
    case StepKind::FieldNormalize: step_field_normalize(gs, rec); break;
    case StepKind::Ring: try_close(gs, rec, true); break;
    case StepKind::Intro: step_intro(gs, st); break;
    case StepKind::Specialize: step_specialize(gs, st); break;
    case StepKind::Use: step_use(gs, st); break;
    case StepKind::Apply: step_apply(gs, st, rec, lemmas); break;
    case StepKind::SeriesGeom: step_series(gs, rec, false); break;
    case StepKind::SeriesGeomWeighted: step_series(gs, rec, true); break;
    case StepKind::IndexShift: step_index_shift(gs); break;
    case StepKind::DerivRule: step_deriv_rule(gs, st); break;
    case StepKind::Antideriv: step_antideriv(gs); break;
    case StepKind::AntiderivConst: step_antideriv_const(gs); break;
    case StepKind::LimitWitness: step_limit_witness(gs, st, rec); break;
    }
    split_focus(gs);
    rec.goal_after = goal_string(gs);
    gs.trace.push_back(std::move(rec));
}

CheckReport check(const DerivationScript& s, const LemmaStore& lemmas) {
    auto t0 = std::chrono::steady_clock::now();
    CheckReport rep;
    rep.theory = s.name;
    GoalState gs = initial_state(s);
    auto finish = [&]() {
        rep.steps = gs.trace;
        rep.soundness = gs.soundness;
        rep.divergence_table = gs.divergence_table;
        rep.ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    };
    for (std::size_t i = 0; i < s.steps.size(); ++i) {
        std::string goal = goal_string(gs);
        try {
            apply_step(gs, s.steps[i], lemmas);
        } catch (const ObligationFailed& e) {
            rep.failure = Failure{Failure::Kind::ObligationFailed, static_cast<int>(i + 1), e.what(), goal};
        } catch (const StepFailed& e) {
            rep.failure = Failure{Failure::Kind::StepFailed, static_cast<int>(i + 1), e.what(), goal};
        } catch (const std::exception& e) {
            rep.failure = Failure{Failure::Kind::StepFailed, static_cast<int>(i + 1),
                                  std::string("StepFailed: ") + e.what(), goal};
        }
        if (rep.failure) return finish();
    }
    // remaining goals must close by normalization or discharge
    if (!gs.goals.empty()) {
        StepRecord rec;
        rec.step = "qed";
        rec.goal_before = goal_string(gs);
        while (!gs.goals.empty()) {
            std::string goal = goal_string(gs);
            bool ok = false;
            try {
                ok = try_close(gs, rec, false);
            } catch (const std::exception&) {
                ok = false;
            }
            if (!ok) {
                rep.failure = Failure{Failure::Kind::GoalNotClosed, static_cast<int>(s.steps.size() + 1),
                                      "GoalNotClosed: " + display(gs.goals.front()), goal};
                return finish();
            }
        }
        rec.goal_after = goal_string(gs);
        gs.trace.push_back(rec);
    }
    rep.accepted = true;
    return finish();
}

}  // namespace derivkit
