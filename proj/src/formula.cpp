#include "derivkit/logic.hpp"

#include <algorithm>
#include <functional>

namespace derivkit {

namespace {

Formula make(FNode n) { return std::make_shared<const FNode>(std::move(n)); }

FNode blank(FKind k) {
    FNode n;
    n.kind = k;
    return n;
}

}  // namespace

Formula f_eq(Expr l, Expr r) {
    FNode n = blank(FKind::Eq);
    n.l = std::move(l);
    n.r = std::move(r);
    return make(std::move(n));
}

Formula f_ne0(Expr e) {
    FNode n = blank(FKind::Ne0);
    n.l = std::move(e);
    return make(std::move(n));
}

Formula f_lt(Expr l, Expr r) {
    FNode n = blank(FKind::Lt);
    n.l = std::move(l);
    n.r = std::move(r);
    return make(std::move(n));
}

Formula f_forall(std::vector<std::string> vars, Formula body) {
    FNode n = blank(FKind::Forall);
    n.vars = std::move(vars);
    n.p = std::move(body);
    return make(std::move(n));
}

Formula f_exists(std::string v, Formula body) {
    FNode n = blank(FKind::Exists);
    n.vars = {std::move(v)};
    n.p = std::move(body);
    return make(std::move(n));
}

Formula f_implies(Formula a, Formula b) {
    FNode n = blank(FKind::Implies);
    n.p = std::move(a);
    n.q = std::move(b);
    return make(std::move(n));
}

Formula f_and(Formula a, Formula b) {
    FNode n = blank(FKind::And);
    n.p = std::move(a);
    n.q = std::move(b);
    return make(std::move(n));
}

Formula f_diverges_left(std::string fn, Expr point) {
    FNode n = blank(FKind::DivergesLeft);
    n.fn = std::move(fn);
    n.l = std::move(point);
    return make(std::move(n));
}

bool equal(const Formula& a, const Formula& b) {
    if (a == b) return true;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
    case FKind::Eq:
    case FKind::Lt: return equal(a->l, b->l) && equal(a->r, b->r);
    case FKind::Ne0: return equal(a->l, b->l);
    case FKind::Forall:
    case FKind::Exists: return a->vars == b->vars && equal(a->p, b->p);
    case FKind::Implies:
    case FKind::And: return equal(a->p, b->p) && equal(a->q, b->q);
    case FKind::DivergesLeft: return a->fn == b->fn && equal(a->l, b->l);
    }
    return false;
}

std::set<std::string> free_vars(const Formula& f) {
    std::set<std::string> out;
    switch (f->kind) {
    case FKind::Eq:
    case FKind::Lt: {
        out = free_vars(f->l);
        auto r = free_vars(f->r);
        out.insert(r.begin(), r.end());
        return out;
    }
    case FKind::Ne0: return free_vars(f->l);
    case FKind::DivergesLeft:
        out = free_vars(f->l);
        out.insert(f->fn);
        return out;
    case FKind::Forall:
    case FKind::Exists:
        out = free_vars(f->p);
        for (const auto& v : f->vars) out.erase(v);
        return out;
    case FKind::Implies:
    case FKind::And: {
        out = free_vars(f->p);
        auto r = free_vars(f->q);
        out.insert(r.begin(), r.end());
        return out;
    }
    }
    return out;
}

std::set<std::string> free_fns(const Formula& f) {
    std::set<std::string> out;
    std::function<void(const Formula&)> walk = [&](const Formula& g) {
        if (!g) return;
        for (const Expr* e : {&g->l, &g->r}) {
            if (*e) {
                auto s = free_fns(*e);
                out.insert(s.begin(), s.end());
            }
        }
        walk(g->p);
        walk(g->q);
    };
    walk(f);
    return out;
}

Formula substitute(const Formula& f, const std::string& id, const Expr& r) {
    switch (f->kind) {
    case FKind::Eq: return f_eq(substitute(f->l, id, r), substitute(f->r, id, r));
    case FKind::Lt: return f_lt(substitute(f->l, id, r), substitute(f->r, id, r));
    case FKind::Ne0: return f_ne0(substitute(f->l, id, r));
    case FKind::DivergesLeft: return f_diverges_left(f->fn, substitute(f->l, id, r));
    case FKind::Implies: return f_implies(substitute(f->p, id, r), substitute(f->q, id, r));
    case FKind::And: return f_and(substitute(f->p, id, r), substitute(f->q, id, r));
    case FKind::Forall:
    case FKind::Exists: {
        if (std::find(f->vars.begin(), f->vars.end(), id) != f->vars.end()) return f;
        auto rv = free_vars(r);
        std::vector<std::string> vars = f->vars;
        Formula body = f->p;
        if (free_vars(body).count(id)) {
            for (auto& v : vars) {
                if (!rv.count(v)) continue;
                auto avoid = free_vars(body);
                avoid.insert(rv.begin(), rv.end());
                avoid.insert(vars.begin(), vars.end());
                avoid.insert(id);
                std::string nv = fresh_name(v, avoid);
                body = substitute(body, v, var(nv));
                v = nv;
            }
        }
        body = substitute(body, id, r);
        if (f->kind == FKind::Forall) return f_forall(vars, body);
        return f_exists(vars[0], body);
    }
    }
    return f;
}

namespace {

struct Binders {
    std::vector<std::pair<std::string, std::string>> pairs;  // pattern -> target

    // 0: both free, 1: bound and corresponding, -1: mismatch
    int relate(const std::string& p, const std::string& t) const {
        for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) {
            bool pb = it->first == p, tb = it->second == t;
            if (pb && tb) return 1;
            if (pb || tb) return -1;
        }
        return 0;
    }
};

bool match_rec(const Expr& p, const Expr& t, const std::set<std::string>& metas,
               std::map<std::string, Expr>& sigma, Binders& b) {
    if (p->kind == Kind::Var) {
        int rel = b.relate(p->name, t->kind == Kind::Var ? t->name : std::string("\x01"));
        if (rel == 1) return true;
        if (rel == 0 && metas.count(p->name)) {
            // a metavariable must not capture a locally bound variable
            for (const auto& v : free_vars(t))
                for (const auto& pr : b.pairs)
                    if (pr.second == v) return false;
            auto it = sigma.find(p->name);
            if (it != sigma.end()) return equal(it->second, t);
            sigma[p->name] = t;
            return true;
        }
        if (t->kind != Kind::Var) return false;
        if (b.relate(p->name, t->name) != 0) return false;
        return p->name == t->name;
    }
    if (p->kind != t->kind) return false;
    switch (p->kind) {
    case Kind::Const: return p->value == t->value;
    case Kind::Pow:
        if (p->exponent != t->exponent || p->name.empty() != t->name.empty()) return false;
        if (!p->name.empty()) {
            int rel = b.relate(p->name, t->name);
            if (rel == -1 || (rel == 0 && p->name != t->name)) return false;
        }
        return match_rec(p->a, t->a, metas, sigma, b);
    case Kind::Neg: return match_rec(p->a, t->a, metas, sigma, b);
    case Kind::App:
        return p->name == t->name && p->deriv == t->deriv && match_rec(p->a, t->a, metas, sigma, b);
    case Kind::Sum:
    case Kind::Diff: {
        if (p->start != t->start) return false;
        if (p->kind == Kind::Diff && !match_rec(p->b, t->b, metas, sigma, b)) return false;
        b.pairs.emplace_back(p->name, t->name);
        bool ok = match_rec(p->a, t->a, metas, sigma, b);
        b.pairs.pop_back();
        return ok;
    }
    default:
        return match_rec(p->a, t->a, metas, sigma, b) && match_rec(p->b, t->b, metas, sigma, b);
    }
}

bool match_formula_rec(const Formula& p, const Formula& t, const std::set<std::string>& metas,
                       std::map<std::string, Expr>& sigma, Binders& b) {
    if (p->kind != t->kind) return false;
    switch (p->kind) {
    case FKind::Eq:
    case FKind::Lt:
        return match_rec(p->l, t->l, metas, sigma, b) && match_rec(p->r, t->r, metas, sigma, b);
    case FKind::Ne0: return match_rec(p->l, t->l, metas, sigma, b);
    case FKind::DivergesLeft: return p->fn == t->fn && match_rec(p->l, t->l, metas, sigma, b);
    case FKind::Implies:
    case FKind::And:
        return match_formula_rec(p->p, t->p, metas, sigma, b) &&
               match_formula_rec(p->q, t->q, metas, sigma, b);
    case FKind::Forall:
    case FKind::Exists: {
        if (p->vars.size() != t->vars.size()) return false;
        for (std::size_t i = 0; i < p->vars.size(); ++i) b.pairs.emplace_back(p->vars[i], t->vars[i]);
        bool ok = match_formula_rec(p->p, t->p, metas, sigma, b);
        for (std::size_t i = 0; i < p->vars.size(); ++i) b.pairs.pop_back();
        return ok;
    }
    }
    return false;
}

}  // namespace

bool match_expr(const Expr& pattern, const Expr& target, const std::set<std::string>& metas,
                std::map<std::string, Expr>& sigma) {
    Binders b;
    auto saved = sigma;
    if (match_rec(pattern, target, metas, sigma, b)) return true;
    sigma = saved;
    return false;
}

bool match_formula(const Formula& pattern, const Formula& target, const std::set<std::string>& metas,
                   std::map<std::string, Expr>& sigma) {
    Binders b;
    auto saved = sigma;
    if (match_formula_rec(pattern, target, metas, sigma, b)) return true;
    sigma = saved;
    return false;
}

bool alpha_equal(const Formula& a, const Formula& b) {
    std::map<std::string, Expr> sigma;
    return match_formula(a, b, {}, sigma);
}

Expr instantiate(const Expr& e, const std::map<std::string, Expr>& sigma) {
    // simultaneous substitution via temporary names
    Expr out = e;
    std::map<std::string, Expr> stage;
    std::set<std::string> avoid = free_vars(e);
    for (const auto& [k, v] : sigma) {
        auto fv = free_vars(v);
        avoid.insert(fv.begin(), fv.end());
    }
    int n = 0;
    for (const auto& [k, v] : sigma) {
        std::string tmp = fresh_name("_meta" + std::to_string(n++), avoid);
        avoid.insert(tmp);
        out = substitute(out, k, var(tmp));
        stage[tmp] = v;
    }
    for (const auto& [k, v] : stage) out = substitute(out, k, v);
    return out;
}

Formula instantiate(const Formula& f, const std::map<std::string, Expr>& sigma) {
    Formula out = f;
    std::map<std::string, Expr> stage;
    std::set<std::string> avoid = free_vars(f);
    for (const auto& [k, v] : sigma) {
        auto fv = free_vars(v);
        avoid.insert(fv.begin(), fv.end());
    }
    int n = 0;
    for (const auto& [k, v] : sigma) {
        std::string tmp = fresh_name("_meta" + std::to_string(n++), avoid);
        avoid.insert(tmp);
        out = substitute(out, k, var(tmp));
        stage[tmp] = v;
    }
    for (const auto& [k, v] : stage) out = substitute(out, k, v);
    return out;
}

Formula specialize(const Formula& f, const std::vector<Expr>& terms) {
    if (f->kind != FKind::Forall)
        throw ArityMismatch("specialize: hypothesis is not universally quantified");
    if (terms.size() != f->vars.size())
        throw ArityMismatch("specialize: expected " + std::to_string(f->vars.size()) + " terms, got " +
                            std::to_string(terms.size()));
    std::map<std::string, Expr> sigma;
    for (std::size_t i = 0; i < terms.size(); ++i) sigma[f->vars[i]] = terms[i];
    return instantiate(f->p, sigma);
}

Formula exists_intro(const Formula& goal, const Expr& witness) {
    if (goal->kind != FKind::Exists) throw std::invalid_argument("exists_intro: goal is not existential");
    return substitute(goal->p, goal->vars[0], witness);
}

}  // namespace derivkit
