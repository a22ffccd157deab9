#include "derivkit/expr.hpp"
#include "derivkit/poly.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

namespace derivkit {

namespace {

Expr make(Node n) { return std::make_shared<const Node>(std::move(n)); }

Node blank(Kind k) {
    Node n;
    n.kind = k;
    return n;
}

}  // namespace

Expr var(const std::string& id) {
    Node n = blank(Kind::Var);
    n.name = id;
    return make(std::move(n));
}

Expr num(const Rational& v) {
    Node n = blank(Kind::Const);
    n.value = v;
    return make(std::move(n));
}

Expr num(long v) { return num(Rational(v)); }

static Expr binary(Kind k, Expr l, Expr r) {
    Node n = blank(k);
    n.a = std::move(l);
    n.b = std::move(r);
    return make(std::move(n));
}

Expr add(Expr l, Expr r) { return binary(Kind::Add, std::move(l), std::move(r)); }
Expr sub(Expr l, Expr r) { return binary(Kind::Sub, std::move(l), std::move(r)); }
Expr mul(Expr l, Expr r) { return binary(Kind::Mul, std::move(l), std::move(r)); }
Expr div(Expr n, Expr d) { return binary(Kind::Div, std::move(n), std::move(d)); }

Expr pow(Expr base, long exponent) {
    Node n = blank(Kind::Pow);
    n.a = std::move(base);
    n.exponent = exponent;
    return make(std::move(n));
}

Expr pow_index(Expr base, const std::string& index) {
    Node n = blank(Kind::Pow);
    n.a = std::move(base);
    n.name = index;
    return make(std::move(n));
}

Expr neg(Expr e) {
    Node n = blank(Kind::Neg);
    n.a = std::move(e);
    return make(std::move(n));
}

Expr series(const std::string& index, int start, Expr body) {
    if (start != 0 && start != 1) throw std::invalid_argument("series start must be 0 or 1");
    Node n = blank(Kind::Sum);
    n.name = index;
    n.start = start;
    n.a = std::move(body);
    return make(std::move(n));
}

Expr app(const std::string& fn, Expr arg) {
    Node n = blank(Kind::App);
    n.name = fn;
    n.a = std::move(arg);
    return make(std::move(n));
}

Expr deriv_app(const std::string& fn, Expr arg) {
    Node n = blank(Kind::App);
    n.name = fn;
    n.deriv = true;
    n.a = std::move(arg);
    return make(std::move(n));
}

Expr diff(const std::string& binder, Expr body, Expr point) {
    Node n = blank(Kind::Diff);
    n.name = binder;
    n.a = std::move(body);
    n.b = std::move(point);
    return make(std::move(n));
}

bool is_const(const Expr& e) { return e->kind == Kind::Const; }
bool is_const(const Expr& e, long v) { return e->kind == Kind::Const && e->value == v; }

bool equal(const Expr& x, const Expr& y) {
    if (x == y) return true;
    if (x->kind != y->kind) return false;
    switch (x->kind) {
    case Kind::Var: return x->name == y->name;
    case Kind::Const: return x->value == y->value;
    case Kind::Pow:
        return x->name == y->name && x->exponent == y->exponent && equal(x->a, y->a);
    case Kind::Neg: return equal(x->a, y->a);
    case Kind::Sum:
        return x->name == y->name && x->start == y->start && equal(x->a, y->a);
    case Kind::App: return x->name == y->name && x->deriv == y->deriv && equal(x->a, y->a);
    case Kind::Diff:
        return x->name == y->name && equal(x->a, y->a) && equal(x->b, y->b);
    default: return equal(x->a, y->a) && equal(x->b, y->b);
    }
}

bool operator_less(const Expr& x, const Expr& y) { return to_string(x) < to_string(y); }

namespace {

double eval_rec(const Expr& e, Env& env, int cutoff) {
    switch (e->kind) {
    case Kind::Var: {
        auto it = env.vars.find(e->name);
        if (it == env.vars.end()) throw UnboundSymbol(e->name);
        return it->second;
    }
    case Kind::Const: return static_cast<double>(e->value);
    case Kind::Add: return eval_rec(e->a, env, cutoff) + eval_rec(e->b, env, cutoff);
    case Kind::Sub: return eval_rec(e->a, env, cutoff) - eval_rec(e->b, env, cutoff);
    case Kind::Mul: return eval_rec(e->a, env, cutoff) * eval_rec(e->b, env, cutoff);
    case Kind::Div: {
        double n = eval_rec(e->a, env, cutoff);
        double d = eval_rec(e->b, env, cutoff);
        return d == 0.0 ? 0.0 : n / d;
    }
    case Kind::Pow: {
        double base = eval_rec(e->a, env, cutoff);
        double k;
        if (!e->name.empty()) {
            auto it = env.vars.find(e->name);
            if (it == env.vars.end()) throw UnboundSymbol(e->name);
            k = it->second;
        } else {
            k = static_cast<double>(e->exponent);
        }
        if (base == 0.0 && k < 0) return 0.0;
        return std::pow(base, k);
    }
    case Kind::Neg: return -eval_rec(e->a, env, cutoff);
    case Kind::Sum: {
        auto saved = env.vars.find(e->name) != env.vars.end()
                         ? std::optional<double>(env.vars[e->name])
                         : std::nullopt;
        double total = 0.0;
        for (int k = 0; k < cutoff; ++k) {
            env.vars[e->name] = static_cast<double>(e->start + k);
            total += eval_rec(e->a, env, cutoff);
        }
        if (saved) env.vars[e->name] = *saved;
        else env.vars.erase(e->name);
        return total;
    }
    case Kind::App: {
        double arg = eval_rec(e->a, env, cutoff);
        const auto& table = e->deriv ? env.derivs : env.fns;
        auto it = table.find(e->name);
        if (it == table.end()) throw UnboundSymbol(e->deriv ? "deriv " + e->name : e->name);
        return it->second(arg);
    }
    case Kind::Diff: {
        double p = eval_rec(e->b, env, cutoff);
        double h = 1e-5 * std::max(1.0, std::fabs(p));
        auto saved = env.vars.find(e->name) != env.vars.end()
                         ? std::optional<double>(env.vars[e->name])
                         : std::nullopt;
        env.vars[e->name] = p + h;
        double hi = eval_rec(e->a, env, cutoff);
        env.vars[e->name] = p - h;
        double lo = eval_rec(e->a, env, cutoff);
        if (saved) env.vars[e->name] = *saved;
        else env.vars.erase(e->name);
        return (hi - lo) / (2 * h);
    }
    }
    return 0.0;
}

void free_rec(const Expr& e, std::set<std::string>& bound, std::set<std::string>& out) {
    switch (e->kind) {
    case Kind::Var:
        if (!bound.count(e->name)) out.insert(e->name);
        return;
    case Kind::Const: return;
    case Kind::Pow:
        if (!e->name.empty() && !bound.count(e->name)) out.insert(e->name);
        free_rec(e->a, bound, out);
        return;
    case Kind::Neg:
    case Kind::App: free_rec(e->a, bound, out); return;
    case Kind::Sum:
    case Kind::Diff: {
        bool fresh = bound.insert(e->name).second;
        free_rec(e->a, bound, out);
        if (fresh) bound.erase(e->name);
        if (e->kind == Kind::Diff) free_rec(e->b, bound, out);
        return;
    }
    default:
        free_rec(e->a, bound, out);
        free_rec(e->b, bound, out);
    }
}

}  // namespace

double eval(const Expr& e, const Env& env, int series_cutoff) {
    if (series_cutoff < 1) throw std::invalid_argument("series cutoff must be >= 1");
    Env local = env;
    return eval_rec(e, local, series_cutoff);
}

double eval_in_place(const Expr& e, Env& env, int series_cutoff) {
    if (series_cutoff < 1) throw std::invalid_argument("series cutoff must be >= 1");
    return eval_rec(e, env, series_cutoff);
}

std::set<std::string> free_vars(const Expr& e) {
    std::set<std::string> bound, out;
    free_rec(e, bound, out);
    return out;
}

std::set<std::string> free_fns(const Expr& e) {
    std::set<std::string> out;
    std::function<void(const Expr&)> walk = [&](const Expr& x) {
        if (!x) return;
        if (x->kind == Kind::App) out.insert(x->name);
        walk(x->a);
        walk(x->b);
    };
    walk(e);
    return out;
}

bool contains_var(const Expr& e, const std::string& id) { return free_vars(e).count(id) > 0; }

bool is_rational(const Expr& e) {
    switch (e->kind) {
    case Kind::Var:
    case Kind::Const: return true;
    case Kind::Sum:
    case Kind::App:
    case Kind::Diff: return false;
    case Kind::Pow: return e->name.empty() && is_rational(e->a);
    case Kind::Neg: return is_rational(e->a);
    default: return is_rational(e->a) && is_rational(e->b);
    }
}

bool has_division(const Expr& e) {
    if (!e) return false;
    if (e->kind == Kind::Div) return true;
    if (e->kind == Kind::Pow && e->exponent < 0) return true;
    return has_division(e->a) || has_division(e->b);
}

std::string fresh_name(const std::string& base, const std::set<std::string>& avoid) {
    if (!avoid.count(base)) return base;
    for (int k = 1;; ++k) {
        std::string cand = base + std::to_string(k);
        if (!avoid.count(cand)) return cand;
    }
}

Expr substitute(const Expr& e, const std::string& id, const Expr& r) {
    switch (e->kind) {
    case Kind::Var: return e->name == id ? r : e;
    case Kind::Const: return e;
    case Kind::Pow: {
        Expr base = substitute(e->a, id, r);
        if (!e->name.empty() && e->name == id) {
            if (r->kind == Kind::Var) return pow_index(base, r->name);
            if (r->kind == Kind::Const && denominator(r->value) == 1)
                return pow(base, static_cast<long>(numerator(r->value)));
            throw UnsupportedNode("series index exponent replaced by non-integer term");
        }
        if (base == e->a) return e;
        return e->name.empty() ? pow(base, e->exponent) : pow_index(base, e->name);
    }
    case Kind::Neg: return neg(substitute(e->a, id, r));
    case Kind::App:
        return e->deriv ? deriv_app(e->name, substitute(e->a, id, r))
                        : app(e->name, substitute(e->a, id, r));
    case Kind::Sum:
    case Kind::Diff: {
        Expr point = e->kind == Kind::Diff ? substitute(e->b, id, r) : nullptr;
        std::string binder = e->name;
        Expr body = e->a;
        if (binder != id) {
            auto rv = free_vars(r);
            if (rv.count(binder) && contains_var(body, id)) {
                auto avoid = free_vars(body);
                avoid.insert(rv.begin(), rv.end());
                avoid.insert(id);
                std::string nb = fresh_name(binder, avoid);
                body = substitute(body, binder, var(nb));
                binder = nb;
            }
            body = substitute(body, id, r);
        }
        if (e->kind == Kind::Sum) return series(binder, e->start, body);
        return diff(binder, body, point);
    }
    case Kind::Add: return add(substitute(e->a, id, r), substitute(e->b, id, r));
    case Kind::Sub: return sub(substitute(e->a, id, r), substitute(e->b, id, r));
    case Kind::Mul: return mul(substitute(e->a, id, r), substitute(e->b, id, r));
    case Kind::Div: return div(substitute(e->a, id, r), substitute(e->b, id, r));
    }
    return e;
}

void collect_denominators(const Expr& e, std::vector<Expr>& out) {
    if (!e) return;
    if (e->kind == Kind::Div) out.push_back(e->b);
    if (e->kind == Kind::Pow && e->exponent < 0) out.push_back(e->a);
    collect_denominators(e->a, out);
    collect_denominators(e->b, out);
}

Expr ring_normalize(const Expr& e) {
    if (!is_rational(e)) throw UnsupportedNode("ring_normalize: series, application or derivative node");
    auto fv = free_vars(e);
    std::vector<std::string> vars(fv.begin(), fv.end());
    return ratfunc_to_expr(to_ratfunc(e, vars), vars);
}

}  // namespace derivkit
