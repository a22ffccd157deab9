// Prints one PASS/FAIL line per acceptance criterion and exits nonzero if
// any criterion fails.

#include "gen.hpp"

#include "derivkit/cli.hpp"
#include "derivkit/numcheck.hpp"
#include "derivkit/theories.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace derivkit;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

const TheoryEntry& entry(const std::vector<TheoryEntry>& es, const std::string& name) {
    for (const auto& e : es)
        if (e.name == name) return e;
    throw std::runtime_error("no entry " + name);
}

LemmaStore accepted_lemmas(const std::vector<TheoryEntry>& es) {
    LemmaStore lemmas;
    auto order = dependency_order(es);
    auto reports = run_builtins(es);
    for (std::size_t i = 0; i < reports.size(); ++i)
        if (reports[i].accepted) lemmas[reports[i].theory] = order[i]->script;
    return lemmas;
}

Outcome corpus() {
    const char* argv[] = {"derivkit", "builtin", "--all", "--seed", "42", "--json"};
    std::ostringstream out, err;
    auto t0 = std::chrono::steady_clock::now();
    int code = run_cli(6, argv, out, err);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json j = json::parse(out.str());
    int accepted = 0, symbolic = 0, numeric_ok = 0;
    bool b27_certified = false;
    for (const auto& r : j) {
        if (r["verdict"] == "accepted") ++accepted;
        if (r["soundness"] == "symbolic") ++symbolic;
        if (r["theory"] == "brunauer_27") b27_certified = r["soundness"] == "numeric_certified";
        if (r.contains("numeric") && r["numeric"]["worst_residual"].is_number()) ++numeric_ok;
    }
    int n = int(j.size());
    // the listed corpus has 20 entries: 15 numbered singles, the paired
    // const_accel'' variants, torricelli_scalar and two demos
    bool pass = code == 0 && n == 20 && accepted == n && symbolic == n - 1 && b27_certified && secs < 10;
    return {pass, std::to_string(accepted) + "/" + std::to_string(n) + " accepted, " + std::to_string(symbolic) +
                      " symbolic, brunauer_27 " + (b27_certified ? "numeric_certified" : "not certified") +
                      ", exit " + std::to_string(code) + ", " + fmt(secs) + " s"};
}

Outcome mutation() {
    auto es = registry(theory_dir());
    LemmaStore lemmas = accepted_lemmas(es);
    int mutants = 0, killed = 0;
    std::string survivors;
    for (std::size_t i = 0; i < 11; ++i) {
        const auto& base = es[i].script;
        for (std::size_t h = 0; h < base.hyps.size(); ++h) {
            DerivationScript m = base;
            m.hyps.erase(m.hyps.begin() + long(h));
            ++mutants;
            bool rejected = true;
            try {
                rejected = !check(parse_script(print_script(m)), lemmas).accepted;
            } catch (const ParseError&) {
            }
            if (rejected)
                ++killed;
            else
                survivors += " " + es[i].name + "-" + base.hyps[h].name;
        }
    }
    return {mutants > 0 && killed == mutants,
            std::to_string(killed) + "/" + std::to_string(mutants) + " mutants killed" + survivors};
}

Outcome langmuir() {
    auto es = registry(theory_dir());
    double worst = 0;
    bool zero = true;
    for (const char* name : {"langmuir_kinetic_let", "langmuir_model_derivation"}) {
        const auto& s = entry(es, name).script;
        Model m = Model::from_script(s);
        Env env;
        env.vars = {{"k_ad", 2}, {"k_d", 1}, {"P", 3}, {"S", 1}, {"A", 6}};
        for (const auto& side : {s.goal->l, s.goal->r})
            worst = std::max(worst, std::fabs(eval(m.ground(side), env, 1) - 6.0 / 7));
        env.vars["P"] = 0;
        env.vars["A"] = 0;
        for (const auto& side : {s.goal->l, s.goal->r}) zero = zero && eval(m.ground(side), env, 1) == 0.0;
    }
    const auto& zp = entry(es, "langmuir_zero_pressure").script;
    Env env;
    env.vars = {{"K", 3.7}, {"P", 0}};
    zero = zero && eval(Model::from_script(zp).ground(zp.goal->l), env, 1) == 0.0;
    return {worst < 1e-12 && zero, "max |theta - 6/7| = " + fmt(worst) + ", theta(0) " + (zero ? "= 0" : "!= 0")};
}

Outcome bet() {
    auto es = registry(theory_dir());
    const auto& s = entry(es, "brunauer_26_from_seq").script;
    Model m = Model::from_script(s);
    Env env;
    env.vars = {{"C_L", 1}, {"C_1", 10}, {"s_0", 1}, {"P", 0.5}, {"V_0", 1}};
    Expr case_rhs = m.ground(s.hyps[5].statement->p->q->r);
    env.fns["seq"] = [&, case_rhs](double i) {
        if (i == 0) return 1.0;
        Env local = env;
        local.vars["i"] = i;
        return eval(case_rhs, local, 1);
    };
    double series_ratio = eval(m.ground(s.goal->l), env, 2000);
    double closed = 10 * 0.5 / (0.5 * (0.5 + 5));
    double err = std::fabs(series_ratio - closed);
    return {err < 1e-9, "series " + fmt(series_ratio) + " vs closed " + fmt(closed) + ", error " + fmt(err)};
}

Outcome geometric() {
    Expr plain = series("i", 1, pow_index(var("x"), "i"));
    Expr weighted = series("i", 1, mul(var("i"), pow_index(var("x"), "i")));
    Expr plain_closed = div(var("x"), sub(num(1), var("x")));
    Expr weighted_closed = div(var("x"), pow(sub(num(1), var("x")), 2));
    const std::vector<int> cutoffs = {125, 250, 500, 1000, 2000};
    bool pass = true;
    double worst = 0;
    std::string why;
    for (double x : {0.1, 0.5, 0.9}) {
        Env env;
        env.vars["x"] = x;
        for (auto [sum, closed] : {std::pair{plain, plain_closed}, std::pair{weighted, weighted_closed}}) {
            try {
                // throws if the error grows beyond rounding noise
                auto t = series_truncation_check(sum, closed, env, cutoffs);
                worst = std::max(worst, t.errors.back());
                pass = pass && t.pass;
            } catch (const NonConvergent& e) {
                pass = false;
                why += std::string(" ") + e.what();
            }
        }
    }
    return {pass, "worst error at N=2000: " + fmt(worst) + why};
}

Outcome divergence() {
    Expr x = mul(var("C_L"), var("P"));
    Expr c = num(10);
    Expr b26 = div(mul(c, x), mul(sub(num(1), x), add(sub(num(1), x), mul(c, x))));
    Env env;
    env.vars["C_L"] = 2;
    auto t = divergence_witness(b26, "P", 0.5, 6, env);
    bool right_negative = true;
    for (double r : t.right) right_negative = right_negative && r < 0;
    std::string table;
    for (double v : t.left) table += " " + fmt(v);
    bool pass = t.increasing && t.left.back() > 1e6 && right_negative;
    return {pass, std::string(t.increasing ? "increasing" : "not increasing") + ", left values" + table +
                      " (final " + (t.left.back() > 1e6 ? "above" : "below") + " 1e6), right side " +
                      (right_negative ? "negative" : "not negative")};
}

Outcome kinematics() {
    auto es = registry(theory_dir());
    LemmaStore lemmas = accepted_lemmas(es);
    std::string rejected;
    SamplePlan plan;
    plan.seed = 42;
    int fd_checks = 0;
    bool fd_ok = true;
    for (const char* name : {"const_accel", "const_accel'", "const_accel''_minus", "const_accel''_plus",
                             "torricelli_scalar"}) {
        const auto& s = entry(es, name).script;
        if (!check(s, lemmas).accepted) rejected += std::string(" ") + name;
        for (const auto& c : run_numeric(s, plan).checks) {
            if (c.routine != "finite_difference_check") continue;
            ++fd_checks;
            fd_ok = fd_ok && c.pass;
        }
    }
    plan.samples = 100;
    plan.rel_tol = 1e-9;
    auto vec = vector_kinematics_suite(plan);
    bool pass = rejected.empty() && vec.pass && vec.samples >= 100 && fd_checks > 0 && fd_ok;
    return {pass, "symbolic " + (rejected.empty() ? std::string("all accepted") : "rejected:" + rejected) +
                      ", R^3 Torricelli " + (vec.pass ? "pass" : "FAIL") + " at " + std::to_string(vec.samples) +
                      " samples (worst " + fmt(vec.worst_residual) + "), " + std::to_string(fd_checks) +
                      " finite-difference checks " + (fd_ok ? "pass" : "FAIL")};
}

Outcome normalizer() {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> val(-10, 10);
    int equal_pairs = 0, unequal_pairs = 0, false_eq = 0, false_ineq = 0;
    for (int pair = 0; pair < 200;) {
        Expr e1 = gen::rational_expr(rng, 3);
        Expr e2 = pair % 2 ? gen::equal_variant(rng, e1)
                           : (pair % 4 == 0 ? gen::unequal_variant(rng, e1) : gen::rational_expr(rng, 3));
        std::vector<Expr> dens;
        collect_denominators(e1, dens);
        collect_denominators(e2, dens);
        bool eval_equal = true;
        int envs = 0;
        for (int tries = 0; envs < 50 && tries < 5000; ++tries) {
            Env env;
            for (const auto& v : gen::kVars) env.vars[v] = val(rng);
            bool near_pole = false;
            for (const auto& d : dens) near_pole = near_pole || std::fabs(eval(d, env, 1)) < 1e-6;
            if (near_pole) continue;
            ++envs;
            double a = eval(e1, env, 1), b = eval(e2, env, 1);
            if (std::fabs(a - b) > 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)})) eval_equal = false;
        }
        if (envs < 50) continue;
        ++pair;
        bool nf_equal = equal(ring_normalize(e1), ring_normalize(e2));
        (nf_equal ? equal_pairs : unequal_pairs)++;
        if (nf_equal && !eval_equal) ++false_eq;
        if (!nf_equal && eval_equal) ++false_ineq;
    }
    return {false_eq == 0 && false_ineq == 0,
            "200 pairs: " + std::to_string(equal_pairs) + " equal, " + std::to_string(unequal_pairs) +
                " unequal, " + std::to_string(false_eq) + " false equalities, " + std::to_string(false_ineq) +
                " false inequalities"};
}

Outcome round_trip() {
    int builtin_ok = 0, builtin_n = 0, fuzz_ok = 0;
    for (const auto& e : registry(theory_dir())) {
        ++builtin_n;
        if (equal(parse_script(print_script(e.script)), e.script)) ++builtin_ok;
    }
    std::mt19937_64 rng(314);
    for (int id = 0; id < 100; ++id) {
        try {
            auto s = parse_script(gen::random_script(rng, id));
            if (equal(parse_script(print_script(s)), s)) ++fuzz_ok;
        } catch (const ParseError&) {
        }
    }
    return {builtin_ok == builtin_n && fuzz_ok == 100,
            std::to_string(builtin_ok) + "/" + std::to_string(builtin_n) + " builtin, " + std::to_string(fuzz_ok) +
                "/100 fuzz"};
}

}  // namespace

int main() {
    const std::vector<std::function<Outcome()>> criteria = {corpus,     mutation,   langmuir,   bet,       geometric,
                                                            divergence, kinematics, normalizer, round_trip};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << "Criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
