#include "derivkit/numcheck.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

namespace derivkit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(12) << v;
    return out.str();
}

bool has_series(const Expr& e) {
    if (!e) return false;
    if (e->kind == Kind::Sum) return true;
    return has_series(e->a) || has_series(e->b) || has_series(e->c);
}

bool has_series(const Formula& f) {
    if (!f) return false;
    return has_series(f->l) || has_series(f->r) || has_series(f->p) || has_series(f->q);
}

Expr rebuild(const Expr& e, const std::function<Expr(const Expr&)>& child) {
    if (!e->a && !e->b && !e->c) return e;
    auto n = std::make_shared<Node>(*e);
    if (n->a) n->a = child(n->a);
    if (n->b) n->b = child(n->b);
    if (n->c) n->c = child(n->c);
    return n;
}

Formula rebuild(const Formula& f, const std::function<Expr(const Expr&)>& ex,
                const std::function<Formula(const Formula&)>& sub) {
    auto n = std::make_shared<FNode>(*f);
    if (n->l) n->l = ex(n->l);
    if (n->r) n->r = ex(n->r);
    if (n->p) n->p = sub(n->p);
    if (n->q) n->q = sub(n->q);
    return n;
}

// binder values are restored on scope exit
class Bind {
public:
    Bind(Env& env, const std::string& name, double v) : env_(env), name_(name) {
        auto it = env.vars.find(name);
        if (it != env.vars.end()) old_ = it->second;
        env.vars[name] = v;
    }
    ~Bind() {
        if (old_) env_.vars[name_] = *old_;
        else env_.vars.erase(name_);
    }
    Bind(const Bind&) = delete;
    Bind& operator=(const Bind&) = delete;

private:
    Env& env_;
    std::string name_;
    std::optional<double> old_;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double integrate(const std::function<double(double)>& f, double a, double b) {
    using boost::math::quadrature::gauss;
    if (a == b) return 0.0;
    if (a > b) return -gauss<double, 20>::integrate(f, b, a);
    return gauss<double, 20>::integrate(f, a, b);
}

// quantifier-free truth, used for case conditions and rejection tests
bool simple_truth(const Formula& f, Env& env, int cutoff, double abs_tol) {
    switch (f->kind) {
    case FKind::Eq: {
        double l = eval_in_place(f->l, env, cutoff), r = eval_in_place(f->r, env, cutoff);
        return std::fabs(l - r) <= std::max(abs_tol, 1e-9 * std::max(std::fabs(l), std::fabs(r)));
    }
    case FKind::Ne0: return std::fabs(eval_in_place(f->l, env, cutoff)) > abs_tol;
    case FKind::Lt: return eval_in_place(f->l, env, cutoff) < eval_in_place(f->r, env, cutoff);
    case FKind::And: return simple_truth(f->p, env, cutoff, abs_tol) && simple_truth(f->q, env, cutoff, abs_tol);
    case FKind::Implies: return !simple_truth(f->p, env, cutoff, abs_tol) || simple_truth(f->q, env, cutoff, abs_tol);
    default: throw std::logic_error("quantified condition in a function case");
    }
}

std::string env_dump(const Env& env) {
    std::string out;
    for (const auto& [k, v] : env.vars) out += (out.empty() ? "" : ", ") + k + "=" + fmt(v);
    return out;
}

}  // namespace

void validate(const SamplePlan& plan) {
    if (plan.samples < 1) throw InvalidPlan("sample count must be at least 1");
    if (!(plan.lo < plan.hi) || !(plan.pos_lo < plan.pos_hi)) throw InvalidPlan("empty sampling range");
    if (plan.series_cutoff < 1) throw InvalidPlan("series cutoff must be at least 1");
    if (!(plan.rel_tol > 0) || !(plan.abs_tol > 0)) throw InvalidPlan("tolerances must be positive");
    if (plan.max_draws < plan.samples) throw InvalidPlan("draw budget below sample count");
    if (plan.points_per_sample < 1) throw InvalidPlan("points per sample must be at least 1");
}

std::mt19937_64 rng_for(std::uint64_t seed, const std::string& check) {
    std::vector<std::uint32_t> words = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (unsigned char ch : check) words.push_back(ch);
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

bool within_tol(double l, double r, const SamplePlan& plan) {
    if (!std::isfinite(l) || !std::isfinite(r)) return false;
    return std::fabs(l - r) <= std::max(plan.abs_tol, plan.rel_tol * std::max(std::fabs(l), std::fabs(r)));
}

double rel_residual(double l, double r) {
    if (!std::isfinite(l) || !std::isfinite(r)) return std::numeric_limits<double>::infinity();
    double d = std::fabs(l - r);
    if (d == 0) return 0;
    double s = std::max(std::fabs(l), std::fabs(r));
    return s > 1 ? d / s : d;
}

// ---------------------------------------------------------------- model

Model::Fn* Model::find_fn(const std::string& name) {
    for (auto& f : fns_)
        if (f.name == name) return &f;
    return nullptr;
}

void Model::add_sampled(const std::string& name) {
    for (const auto& v : sampled_)
        if (v.name == name) return;
    sampled_.push_back({name, false});
}

std::vector<std::string> Model::sampled_names() const {
    std::vector<std::string> out;
    for (const auto& v : sampled_) out.push_back(v.name);
    return out;
}

Expr Model::let_body(const std::string& name) const {
    for (const auto& [n, b] : lets_)
        if (n == name) return b;
    throw std::out_of_range("no definition " + name);
}

Expr Model::substitute_defs(const Expr& e) const {
    Expr out = e;
    for (const auto& [v, d] : defs_) out = substitute(out, v, d);
    return out;
}

Expr Model::cellify(const Expr& e) const {
    if (e->kind == Kind::App && !e->deriv && state_fns_.count(e->name) && e->a->kind == Kind::Const)
        return var(e->name + "@" + e->a->value.str());
    return rebuild(e, [this](const Expr& c) { return cellify(c); });
}

Formula Model::cellify(const Formula& f) const {
    return rebuild(
        f, [this](const Expr& e) { return cellify(e); }, [this](const Formula& g) { return cellify(g); });
}

Expr Model::ground(const Expr& e) const {
    Expr out = e;
    for (auto it = lets_.rbegin(); it != lets_.rend(); ++it) out = substitute(out, it->first, it->second);
    for (const auto& [name, idx] : state_consts_) out = substitute(out, name, num(idx));
    return cellify(out);
}

Formula Model::ground(const Formula& f) const {
    Formula out = f;
    for (auto it = lets_.rbegin(); it != lets_.rend(); ++it) out = substitute(out, it->first, it->second);
    for (const auto& [name, idx] : state_consts_) out = substitute(out, name, num(idx));
    return cellify(out);
}

bool Model::is_state_binder(const std::string& v, const Formula& body) const {
    if (states_ == 0) return false;
    bool found = false;
    std::function<void(const Expr&)> walk = [&](const Expr& e) {
        if (!e || found) return;
        if (e->kind == Kind::App && state_fns_.count(e->name) && e->a->kind == Kind::Var && e->a->name == v) {
            found = true;
            return;
        }
        walk(e->a);
        walk(e->b);
        walk(e->c);
    };
    std::function<void(const Formula&)> fwalk = [&](const Formula& f) {
        if (!f) return;
        walk(f->l);
        walk(f->r);
        fwalk(f->p);
        fwalk(f->q);
    };
    fwalk(body);
    return found;
}

void Model::absorb(const Formula& f, std::vector<Formula>& equations) {
    switch (f->kind) {
    case FKind::And:
        absorb(f->p, equations);
        absorb(f->q, equations);
        return;
    case FKind::Exists: {
        std::string v = f->vars[0] + "#" + std::to_string(fresh_++);
        add_sampled(v);
        absorb(substitute(f->p, f->vars[0], var(v)), equations);
        return;
    }
    case FKind::Forall: {
        bool states = std::all_of(f->vars.begin(), f->vars.end(),
                                  [&](const std::string& v) { return is_state_binder(v, f->p); });
        if (states) {
            std::function<void(std::size_t, Formula)> expand = [&](std::size_t k, Formula body) {
                if (k == f->vars.size()) {
                    absorb(cellify(body), equations);
                    return;
                }
                for (int s = 0; s < states_; ++s) expand(k + 1, substitute(body, f->vars[k], num(s)));
            };
            expand(0, f->p);
            return;
        }
        if (f->vars.size() == 1) {
            const std::string& v = f->vars[0];
            Formula body = f->p, cond;
            if (body->kind == FKind::Implies) {
                cond = body->p;
                body = body->q;
            }
            if (body->kind == FKind::Eq && body->l->kind == Kind::App && body->l->a->kind == Kind::Var &&
                body->l->a->name == v) {
                if (Fn* fn = find_fn(body->l->name)) {
                    if (body->l->deriv && !cond && fn->deriv_var.empty()) {
                        fn->deriv_var = v;
                        fn->deriv_rhs = body->r;
                        deriv_fns_.push_back(fn->name);
                        return;
                    }
                    if (!body->l->deriv) {
                        fn->cases.push_back({v, cond, body->r});
                        return;
                    }
                }
            }
        }
        tests_.push_back(f);
        return;
    }
    case FKind::Eq:
        if (f->l->kind == Kind::App && !f->l->deriv && free_vars(f->l->a).empty()) {
            if (Fn* fn = find_fn(f->l->name)) {
                fn->ground.emplace_back(f->l->a, f->r);
                return;
            }
        }
        equations.push_back(f);
        return;
    default: tests_.push_back(f); return;
    }
}

void Model::solve_equations(std::vector<Formula> pending) {
    auto is_free = [&](const std::string& v) {
        return std::any_of(sampled_.begin(), sampled_.end(), [&](const Var& s) { return s.name == v; });
    };
    auto drop = [&](const std::string& v) {
        sampled_.erase(std::remove_if(sampled_.begin(), sampled_.end(), [&](const Var& s) { return s.name == v; }),
                       sampled_.end());
    };

    // pass 1: equations with a bare variable on one side
    bool changed = true;
    while (changed) {
        changed = false;
        for (auto it = pending.begin(); it != pending.end();) {
            Expr l = substitute_defs((*it)->l), r = substitute_defs((*it)->r);
            if (equal(l, r)) {
                it = pending.erase(it);
                continue;
            }
            std::optional<std::pair<std::string, Expr>> def;
            if (l->kind == Kind::Var && is_free(l->name) && !free_vars(r).count(l->name)) def = {{l->name, r}};
            else if (r->kind == Kind::Var && is_free(r->name) && !free_vars(l).count(r->name)) def = {{r->name, l}};
            if (!def) {
                ++it;
                continue;
            }
            for (auto& [v, d] : defs_) d = substitute(d, def->first, def->second);
            for (auto& s : solves_) s.residual = substitute(s.residual, def->first, def->second);
            defs_.push_back(*def);
            drop(def->first);
            it = pending.erase(it);
            changed = true;
        }
    }

    // pass 2: solve each remaining equation for one variable
    std::vector<Expr> residuals;
    for (const auto& eq : pending) residuals.push_back(sub(substitute_defs(eq->l), substitute_defs(eq->r)));
    std::set<std::string> used_by_solves;
    for (std::size_t k = 0; k < pending.size(); ++k) {
        auto fv = free_vars(residuals[k]);
        std::set<std::string> elsewhere;
        for (std::size_t j = k + 1; j < pending.size(); ++j)
            for (const auto& v : free_vars(residuals[j])) elsewhere.insert(v);
        std::string pick, fallback;
        for (const auto& s : sampled_) {
            if (!fv.count(s.name) || used_by_solves.count(s.name)) continue;
            fallback = s.name;
            if (!elsewhere.count(s.name)) pick = s.name;
        }
        if (pick.empty()) pick = fallback;
        if (pick.empty()) {
            tests_.push_back(pending[k]);
            continue;
        }
        for (const auto& v : fv) used_by_solves.insert(v);
        solves_.push_back({pick, residuals[k]});
        drop(pick);
    }
}

Model Model::from_hyps(const std::vector<std::string>& vars, const std::vector<Formula>& hyps) {
    Model m;
    for (const auto& v : vars) m.add_sampled(v);
    std::vector<Formula> equations;
    for (const auto& h : hyps) m.absorb(h, equations);
    m.solve_equations(equations);
    for (const auto& t : m.tests_)
        if (t->kind == FKind::Lt && is_const(t->l, 0) && t->r->kind == Kind::Var)
            for (auto& s : m.sampled_)
                if (s.name == t->r->name) s.positive = true;
    return m;
}

Model Model::from_script(const DerivationScript& s, int states) {
    Model m;
    bool uses_states = false;
    for (const auto& d : s.decls)
        if (d.sort == "State" || d.sort == "State->Real") uses_states = true;
    m.states_ = uses_states ? std::max(states, 2) : 0;
    if (uses_states) {
        m.state_consts_["s1"] = 0;
        m.state_consts_["s2"] = 1;
    }
    int next_state = 2;
    for (const auto& d : s.decls) {
        for (const auto& n : d.names) {
            if (d.sort == "Real" && d.kind != Decl::Kind::Fns) {
                m.add_sampled(n);
            } else if (d.sort == "State") {
                if (!m.state_consts_.count(n)) m.state_consts_[n] = next_state++ % m.states_;
            } else if (d.sort == "State->Real") {
                m.state_fns_.insert(n);
            } else {
                m.fns_.push_back(Fn{n, {}, nullptr, {}, {}, {}, {}});
            }
        }
    }
    for (const auto& fn : m.state_fns_)
        for (int k = 0; k < m.states_; ++k) m.add_sampled(fn + "@" + std::to_string(k));
    for (const auto& l : s.lets) m.lets_.emplace_back(l.name, l.body);

    std::vector<Formula> equations;
    for (const auto& h : s.hyps) m.absorb(m.ground(h.statement), equations);
    Formula g = m.ground(s.goal);
    while (g->kind == FKind::Implies) {
        m.absorb(g->p, equations);
        g = g->q;
    }
    m.goal_ = g;

    for (auto& fn : m.fns_) {
        if (fn.deriv_rhs) {
            if (fn.ground.empty()) {
                fn.init_var = fn.name + "@init";
                m.add_sampled(fn.init_var);
            }
        } else if (fn.cases.empty() && fn.ground.empty()) {
            for (int k = 0; k < 4; ++k) {
                fn.coeffs.push_back(fn.name + "@c" + std::to_string(k));
                m.add_sampled(fn.coeffs.back());
            }
        }
    }
    m.solve_equations(equations);
    for (const auto& t : m.tests_)
        if (t->kind == FKind::Lt && is_const(t->l, 0) && t->r->kind == Kind::Var)
            for (auto& v : m.sampled_)
                if (v.name == t->r->name) v.positive = true;
    return m;
}

void Model::bind_functions(Env& env, int cutoff) const {
    Env* e = &env;
    for (const auto& fn : fns_) {
        const Fn* f = &fn;
        if (f->deriv_rhs) {
            auto rhs = [e, f, cutoff](double u) {
                Bind b(*e, f->deriv_var, u);
                return eval_in_place(f->deriv_rhs, *e, cutoff);
            };
            env.derivs[f->name] = rhs;
            env.fns[f->name] = [e, f, rhs, cutoff](double t) {
                double base_point = 0, base_value;
                if (!f->ground.empty()) {
                    base_point = eval_in_place(f->ground[0].first, *e, cutoff);
                    base_value = eval_in_place(f->ground[0].second, *e, cutoff);
                } else {
                    base_value = e->vars.at(f->init_var);
                }
                return base_value + integrate(rhs, base_point, t);
            };
        } else if (!f->coeffs.empty()) {
            env.fns[f->name] = [e, f](double t) {
                double acc = 0;
                for (auto it = f->coeffs.rbegin(); it != f->coeffs.rend(); ++it) acc = acc * t + e->vars.at(*it);
                return acc;
            };
        } else {
            env.fns[f->name] = [e, f, cutoff](double a) {
                for (const auto& [arg, val] : f->ground)
                    if (std::fabs(eval_in_place(arg, *e, cutoff) - a) < 1e-12) return eval_in_place(val, *e, cutoff);
                for (const auto& c : f->cases) {
                    Bind b(*e, c.var, a);
                    if (!c.cond || simple_truth(c.cond, *e, cutoff, 0.0)) return eval_in_place(c.rhs, *e, cutoff);
                }
                return kNaN;
            };
        }
    }
}

long Model::draw(std::mt19937_64& rng, const SamplePlan& plan, Sample& out, long budget) const {
    for (long draws = 1;; ++draws) {
        if (draws > budget)
            throw RejectionStarvation("fewer than " + std::to_string(plan.samples) +
                                      " hypothesis-satisfying samples in " + std::to_string(plan.max_draws) +
                                      " draws");
        auto env = std::make_unique<Env>();
        for (const auto& v : sampled_)
            env->vars[v.name] = v.positive ? uniform(rng, plan.pos_lo, plan.pos_hi) : uniform(rng, plan.lo, plan.hi);
        bind_functions(*env, plan.series_cutoff);

        bool ok = true;
        for (const auto& s : solves_) {
            auto r = [&](double v) {
                env->vars[s.var] = v;
                return eval_in_place(s.residual, *env, plan.series_cutoff);
            };
            double r0 = r(0), r1 = r(1), r2 = r(2);
            double scale = std::fabs(r0) + std::fabs(r1) + std::fabs(r2);
            double slope = r1 - r0;
            // only affine equations are solved; anything else is redrawn
            if (!std::isfinite(scale) || std::fabs(slope) <= 1e-12 * scale ||
                std::fabs(r2 - 2 * r1 + r0) > 1e-9 * scale) {
                ok = false;
                break;
            }
            double root = -r0 / slope;
            double check = r(root);
            if (!std::isfinite(check) || std::fabs(check) > 1e-9 * std::max(1.0, scale)) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        for (const auto& [v, d] : defs_) env->vars[v] = eval_in_place(d, *env, plan.series_cutoff);
        for (const auto& t : tests_) {
            double res = 0;
            bool unreliable = false;
            if (!holds(t, *env, rng, plan, res, unreliable) || unreliable) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        out.env = std::move(env);
        return draws;
    }
}

bool Model::holds(const Formula& f, Env& env, std::mt19937_64& rng, const SamplePlan& plan, double& residual,
                  bool& unreliable) const {
    const int n = plan.series_cutoff;
    auto value = [&](const Expr& e) {
        double v = eval_in_place(e, env, n);
        if (has_series(e)) {
            double half = eval_in_place(e, env, std::max(1, n / 2));
            if (!within_tol(v, half, plan)) unreliable = true;
        }
        return v;
    };
    switch (f->kind) {
    case FKind::Eq: {
        double l = value(f->l), r = value(f->r);
        residual = std::max(residual, rel_residual(l, r));
        return within_tol(l, r, plan);
    }
    case FKind::Ne0: {
        double v = value(f->l);
        return std::isfinite(v) && std::fabs(v) > plan.abs_tol;
    }
    case FKind::Lt: return value(f->l) < value(f->r);
    case FKind::And: {
        bool a = holds(f->p, env, rng, plan, residual, unreliable);
        bool b = holds(f->q, env, rng, plan, residual, unreliable);
        return a && b;
    }
    case FKind::Implies: {
        double ignored = 0;
        if (!holds(f->p, env, rng, plan, ignored, unreliable)) return true;
        return holds(f->q, env, rng, plan, residual, unreliable);
    }
    case FKind::Forall: {
        bool states = std::all_of(f->vars.begin(), f->vars.end(),
                                  [&](const std::string& v) { return is_state_binder(v, f->p); });
        if (states) {
            bool ok = true;
            std::function<void(std::size_t, Formula)> expand = [&](std::size_t k, Formula body) {
                if (k == f->vars.size()) {
                    ok = holds(cellify(body), env, rng, plan, residual, unreliable) && ok;
                    return;
                }
                for (int s = 0; s < states_; ++s) expand(k + 1, substitute(body, f->vars[k], num(s)));
            };
            expand(0, f->p);
            return ok;
        }
        bool ok = true;
        for (int k = 0; k < plan.points_per_sample; ++k) {
            std::vector<std::unique_ptr<Bind>> binds;
            for (const auto& v : f->vars) binds.push_back(std::make_unique<Bind>(env, v, uniform(rng, plan.lo, plan.hi)));
            ok = holds(f->p, env, rng, plan, residual, unreliable) && ok;
        }
        return ok;
    }
    case FKind::Exists: {
        const std::string& v = f->vars[0];
        // witness: read k off an equation k = e inside the body
        std::function<std::optional<double>(const Formula&)> witness = [&](const Formula& g) -> std::optional<double> {
            switch (g->kind) {
            case FKind::Eq:
                if (g->l->kind == Kind::Var && g->l->name == v && !free_vars(g->r).count(v))
                    return eval_in_place(g->r, env, n);
                if (g->r->kind == Kind::Var && g->r->name == v && !free_vars(g->l).count(v))
                    return eval_in_place(g->l, env, n);
                return std::nullopt;
            case FKind::And: {
                auto w = witness(g->p);
                return w ? w : witness(g->q);
            }
            case FKind::Implies: return witness(g->q);
            case FKind::Forall: {
                Formula body = g->p;
                std::vector<std::unique_ptr<Bind>> binds;
                for (const auto& b : g->vars) {
                    if (is_state_binder(b, g->p)) body = substitute(body, b, num(0));
                    else binds.push_back(std::make_unique<Bind>(env, b, uniform(rng, plan.lo, plan.hi)));
                }
                return witness(cellify(body));
            }
            default: return std::nullopt;
            }
        };
        auto w = witness(f->p);
        if (!w) return false;
        Bind b(env, v, *w);
        return holds(f->p, env, rng, plan, residual, unreliable);
    }
    case FKind::DivergesLeft: return false;
    }
    return false;
}

// ---------------------------------------------------------------- checks

CheckResult formula_check(const Formula& goal, const Model& model, const SamplePlan& plan, const std::string& name) {
    validate(plan);
    auto rng = rng_for(plan.seed, name);
    CheckResult res;
    res.routine = "formula_check";
    res.subject = to_string(goal);
    res.pass = true;
    long unsettled = 0;
    while (res.samples < plan.samples) {
        Sample s;
        res.draws += model.draw(rng, plan, s, plan.max_draws - res.draws);
        double r = 0;
        bool unreliable = false;
        bool ok = model.holds(goal, *s.env, rng, plan, r, unreliable);
        if (unreliable) {
            ++unsettled;
            continue;
        }
        ++res.samples;
        res.worst_residual = std::max(res.worst_residual, r);
        if (!ok && res.pass) {
            res.pass = false;
            res.log.push_back("counterexample: " + env_dump(*s.env));
        }
    }
    std::ostringstream rate;
    rate << "accepted " << res.samples << " of " << res.draws << " draws (rate "
         << std::setprecision(3) << static_cast<double>(res.samples + unsettled) / res.draws << ")";
    res.log.push_back(rate.str());
    if (unsettled) res.log.push_back(std::to_string(unsettled) + " samples redrawn: series not settled at the cutoff");
    return res;
}

CheckResult identity_check(const Expr& lhs, const Expr& rhs, const Model& model, const SamplePlan& plan,
                           const std::string& name) {
    CheckResult r = formula_check(f_eq(model.ground(lhs), model.ground(rhs)), model, plan, name);
    r.routine = "identity_check";
    return r;
}

CheckResult gas_law_check(const Formula& goal, const Model& model, const SamplePlan& plan) {
    CheckResult r = formula_check(goal, model, plan, "gas_law/" + to_string(goal));
    r.routine = "gas_law_check";
    return r;
}

TruncationTable series_truncation_check(const Expr& sum, const Expr& closed, const Env& env,
                                        const std::vector<int>& cutoffs, double tol) {
    TruncationTable t;
    t.cutoffs = cutoffs;
    double target = eval(closed, env, cutoffs.empty() ? 1 : cutoffs.back());
    for (int c : cutoffs) {
        double err = std::fabs(eval(sum, env, c) - target);
        // a few ulps of wobble once the partial sums have converged
        double noise = 64 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(target));
        if (!t.errors.empty() && err > t.errors.back() + noise) {
            std::string table;
            for (std::size_t k = 0; k < t.errors.size(); ++k)
                table += " N=" + std::to_string(cutoffs[k]) + ":" + fmt(t.errors[k]);
            throw NonConvergent("truncation error grew at N=" + std::to_string(c) + " (" + fmt(err) + ");" + table);
        }
        t.errors.push_back(err);
    }
    t.pass = !t.errors.empty() && t.errors.back() < tol;
    return t;
}

CheckResult finite_difference_check(const std::function<double(double)>& fn,
                                     const std::function<double(double)>& claimed, const std::vector<double>& ts,
                                     double rel_tol, const std::string& name) {
    const double h = 1e-5;
    CheckResult res;
    res.routine = "finite_difference_check";
    res.subject = name;
    res.pass = true;
    for (double t : ts) {
        double fd = (fn(t + h) - fn(t - h)) / (2 * h);
        double c = claimed(t);
        double err = std::fabs(fd - c) / std::max(1.0, std::fabs(c));
        res.worst_residual = std::max(res.worst_residual, err);
        ++res.samples;
        if (!(err <= rel_tol) && res.pass) {
            res.pass = false;
            res.log.push_back("t=" + fmt(t) + ": difference quotient " + fmt(fd) + " vs " + fmt(c));
        }
    }
    return res;
}

CheckResult vector_kinematics_check(const Eigen::Vector3d& a, const Eigen::Vector3d& v0, const Eigen::Vector3d& x0,
                                    const std::vector<double>& ts, const SamplePlan& plan) {
    VecFn3 m{a, v0, x0};
    CheckResult res;
    res.routine = "vector_kinematics_check";
    res.subject = "v.v = v0.v0 + 2 A.(x - x0)";
    res.pass = true;
    auto rng = rng_for(plan.seed, "inner_product_linearity");
    for (double t : ts) {
        Eigen::Vector3d v = m.velocity(t);
        double lhs = v.dot(v);
        double rhs = v0.dot(v0) + 2 * a.dot(m.position(t) - x0);
        res.worst_residual = std::max(res.worst_residual, rel_residual(lhs, rhs));
        ++res.samples;
        if (!within_tol(lhs, rhs, plan) && res.pass) {
            res.pass = false;
            res.log.push_back("t=" + fmt(t) + ": " + fmt(lhs) + " vs " + fmt(rhs));
        }
        // velocity is the derivative of position, componentwise
        const double h = 1e-5;
        Eigen::Vector3d fd = (m.position(t + h) - m.position(t - h)) / (2 * h);
        if ((fd - v).cwiseAbs().maxCoeff() > 1e-5 * std::max(1.0, v.cwiseAbs().maxCoeff()) && res.pass) {
            res.pass = false;
            res.log.push_back("t=" + fmt(t) + ": position difference quotient disagrees with velocity");
        }
        Eigen::Vector3d u = Eigen::Vector3d::NullaryExpr([&] { return uniform(rng, -5, 5); });
        Eigen::Vector3d w = Eigen::Vector3d::NullaryExpr([&] { return uniform(rng, -5, 5); });
        Eigen::Vector3d z = Eigen::Vector3d::NullaryExpr([&] { return uniform(rng, -5, 5); });
        double alpha = uniform(rng, -5, 5), beta = uniform(rng, -5, 5);
        double l2 = (alpha * u + beta * w).dot(z), r2 = alpha * u.dot(z) + beta * w.dot(z);
        if (!within_tol(l2, r2, plan) && res.pass) {
            res.pass = false;
            res.log.push_back("inner product not linear in its first argument at a sample");
        }
    }
    return res;
}

CheckResult vector_kinematics_suite(const SamplePlan& plan) {
    validate(plan);
    auto rng = rng_for(plan.seed, "vector_kinematics");
    CheckResult total;
    total.routine = "vector_kinematics_check";
    total.subject = "R^3 Torricelli identity";
    total.pass = true;
    auto vec = [&] { return Eigen::Vector3d::NullaryExpr([&] { return uniform(rng, -5, 5); }); };
    for (long k = 0; k < plan.samples; ++k) {
        Eigen::Vector3d a = vec(), v0 = vec(), x0 = vec();
        double t = uniform(rng, plan.lo, plan.hi);
        CheckResult one = vector_kinematics_check(a, v0, x0, {t}, plan);
        total.samples += one.samples;
        total.worst_residual = std::max(total.worst_residual, one.worst_residual);
        if (!one.pass && total.pass) {
            total.pass = false;
            total.log = one.log;
        }
    }
    total.draws = total.samples;
    return total;
}

DivergenceTable divergence_witness(const Expr& fn, const std::string& v, double point, int m, const Env& env,
                                   double cap) {
    DivergenceTable t;
    Env local = env;
    for (int j = 1; j <= m; ++j) {
        double d = std::pow(10.0, -j);
        t.offsets.push_back(d);
        local.vars[v] = point - d;
        t.left.push_back(eval_in_place(fn, local, 1));
        local.vars[v] = point + d;
        t.right.push_back(eval_in_place(fn, local, 1));
    }
    t.increasing = !t.left.empty();
    for (std::size_t k = 1; k < t.left.size(); ++k)
        if (!(t.left[k] > t.left[k - 1])) t.increasing = false;
    t.pass = t.increasing && t.left.back() > cap;
    return t;
}

// ---------------------------------------------------------------- bindings

NumericSummary run_numeric(const DerivationScript& s, const SamplePlan& plan) {
    validate(plan);
    NumericSummary sum;
    sum.seed = plan.seed;
    Model model = Model::from_script(s);
    const Formula& goal = model.goal();

    auto record = [&](CheckResult r) {
        sum.worst_residual = std::max(sum.worst_residual, r.worst_residual);
        sum.pass = sum.pass && r.pass;
        sum.checks.push_back(std::move(r));
    };

    if (goal->kind == FKind::DivergesLeft) {
        int m = 6;
        for (const auto& st : s.steps)
            if (st.kind == StepKind::LimitWitness) m = static_cast<int>(st.count);
        Expr fn = model.substitute_defs(model.ground(model.let_body(goal->fn)));
        Expr point = model.substitute_defs(model.ground(goal->l));
        auto fv = free_vars(fn);
        CheckResult r;
        r.routine = "divergence_witness";
        r.subject = goal->fn;
        if (fv.size() != 1 || !free_vars(point).empty()) {
            r.log.push_back("constants are not pinned by the hypotheses");
            record(r);
            return sum;
        }
        double p = eval(point, Env{}, 1);
        DivergenceTable t = divergence_witness(fn, *fv.begin(), p, m, Env{});
        r.pass = t.pass;
        r.samples = m;
        for (std::size_t k = 0; k < t.offsets.size(); ++k)
            r.log.push_back("delta=" + fmt(t.offsets[k]) + "  left=" + fmt(t.left[k]) + "  right=" + fmt(t.right[k]));
        bool right_negative = std::all_of(t.right.begin(), t.right.end(), [](double v) { return v < 0; });
        r.log.push_back(std::string("left values ") + (t.increasing ? "strictly increasing" : "not increasing") +
                        ", last " + fmt(t.left.back()) + (t.pass ? " > " : " <= ") + fmt(1e6));
        r.log.push_back(std::string("right-side values ") + (right_negative ? "all negative" : "not all negative"));
        sum.samples = m;
        record(r);
        return sum;
    }

    CheckResult main = formula_check(goal, model, plan, s.name);
    main.routine = model.states() > 0 ? "gas_law_check" : goal->kind == FKind::Eq ? "identity_check" : "formula_check";
    sum.samples = main.samples;
    record(main);

    // derivative hypotheses hold for the sampled functions
    for (const auto& fname : model.deriv_fns()) {
        auto rng = rng_for(plan.seed, s.name + "/fd/" + fname);
        std::vector<double> ts;
        Sample smp;
        model.draw(rng, plan, smp, plan.max_draws);
        for (int k = 0; k < 10; ++k) ts.push_back(uniform(rng, plan.lo, plan.hi));
        record(finite_difference_check(smp.env->fns.at(fname), smp.env->derivs.at(fname), ts, 1e-5, fname));
    }

    if (goal->kind == FKind::Eq && has_series(goal)) {
        bool lhs_series = has_series(goal->l);
        const Expr& series_side = lhs_series ? goal->l : goal->r;
        const Expr& closed_side = lhs_series ? goal->r : goal->l;
        auto rng = rng_for(plan.seed, s.name + "/truncation");
        int c = plan.series_cutoff;
        std::vector<int> cutoffs = {std::max(1, c / 8), std::max(1, c / 4), std::max(1, c / 2), c};
        CheckResult r;
        r.routine = "series_truncation_check";
        r.subject = to_string(series_side);
        r.pass = true;
        int done = 0;
        long draws = 0;
        while (done < 5) {
            Sample smp;
            draws += model.draw(rng, plan, smp, plan.max_draws - draws);
            double res = 0;
            bool unreliable = false;
            model.holds(goal, *smp.env, rng, plan, res, unreliable);
            if (unreliable) continue;
            try {
                TruncationTable t = series_truncation_check(series_side, closed_side, *smp.env, cutoffs, 1e-9);
                std::string line = "errors:";
                for (double e : t.errors) line += " " + fmt(e);
                if (smp.env->vars.count("x") == 0) {
                    try {
                        double x = eval(model.ground(var("x")), *smp.env, 1);
                        if (x > 0 && x < 1)
                            line += "  tail bound x^(N+1)/(1-x) = " + fmt(std::pow(x, c + 1) / (1 - x));
                    } catch (const UnboundSymbol&) {
                    }
                }
                r.log.push_back(line);
                r.worst_residual = std::max(r.worst_residual, t.errors.back());
                r.pass = r.pass && t.pass;
            } catch (const NonConvergent& e) {
                r.pass = false;
                r.log.push_back(e.what());
            }
            ++done;
            ++r.samples;
        }
        r.draws = draws;
        record(r);
    }

    if (s.name == "torricelli_scalar") record(vector_kinematics_suite(plan));
    return sum;
}

}  // namespace derivkit
