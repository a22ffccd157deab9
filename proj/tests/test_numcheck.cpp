#include "derivkit/numcheck.hpp"
#include "derivkit/theories.hpp"

#include <doctest.h>

#include <cmath>

using namespace derivkit;

namespace {

const TheoryEntry& entry(const std::vector<TheoryEntry>& es, const std::string& name) {
    for (const auto& e : es)
        if (e.name == name) return e;
    throw std::runtime_error("no entry " + name);
}

Expr closed_b26() {
    // C * x / ((1 - x) * (1 - x + C * x)) with x = C_L * P and C = 10
    Expr x = mul(var("C_L"), var("P"));
    Expr c = num(10);
    return div(mul(c, x), mul(sub(num(1), x), add(sub(num(1), x), mul(c, x))));
}

}  // namespace

TEST_SUITE("numcheck") {

TEST_CASE("Langmuir sides at a fixed point") {
    auto es = registry(theory_dir());
    for (const char* name : {"langmuir_kinetic_let", "langmuir_model_derivation"}) {
        const auto& s = entry(es, name).script;
        Model m = Model::from_script(s);
        Expr lhs = m.ground(s.goal->l), rhs = m.ground(s.goal->r);
        Env env;
        env.vars = {{"k_ad", 2}, {"k_d", 1}, {"P", 3}, {"S", 1}};
        env.vars["A"] = 2.0 * 3 * 1 / 1;  // from k_ad P S = k_d A
        CHECK(std::fabs(eval(lhs, env, 1) - 6.0 / 7) < 1e-12);
        CHECK(std::fabs(eval(rhs, env, 1) - 6.0 / 7) < 1e-12);

        env.vars["P"] = 0;
        env.vars["A"] = 0;
        CHECK(eval(lhs, env, 1) == 0.0);
        CHECK(eval(rhs, env, 1) == 0.0);
    }
}

TEST_CASE("BET ratio against a plain partial sum") {
    auto es = registry(theory_dir());
    const auto& s = entry(es, "brunauer_26_from_seq").script;
    Model m = Model::from_script(s);
    Env env;
    env.vars = {{"C_L", 1}, {"C_1", 10}, {"s_0", 1}, {"P", 0.5}, {"V_0", 1}};
    // seq from its defining hypotheses
    Expr case_rhs = m.ground(s.hyps[5].statement->p->q->r);
    env.fns["seq"] = [&, case_rhs](double i) {
        if (i == 0) return 1.0;
        Env local = env;
        local.vars["i"] = i;
        return eval(case_rhs, local, 1);
    };
    double got = eval(m.ground(s.goal->l), env, 2000);

    double x = 0.5, c = 10, num_sum = 0, den_sum = 1;
    for (int i = 1; i <= 2000; ++i) {
        double term = std::pow(x, i) * c;
        num_sum += i * term;
        den_sum += term;
    }
    CHECK(std::fabs(num_sum / den_sum - 1.8181818181818181) < 1e-9);
    CHECK(std::fabs(got - 1.8181818181818181) < 1e-9);
    CHECK(std::fabs(eval(m.ground(s.goal->r), env, 1) - 20.0 / 11) < 1e-12);
}

TEST_CASE("truncation tables") {
    Expr plain = series("i", 1, pow_index(var("x"), "i"));
    Expr weighted = series("i", 1, mul(var("i"), pow_index(var("x"), "i")));
    Expr plain_closed = div(var("x"), sub(num(1), var("x")));
    Expr weighted_closed = div(var("x"), pow(sub(num(1), var("x")), 2));
    const std::vector<int> cutoffs = {250, 500, 1000, 2000};
    for (double x : {0.1, 0.5, 0.9}) {
        Env env;
        env.vars["x"] = x;
        for (auto [sum, closed, expect] : {std::tuple{plain, plain_closed, x / (1 - x)},
                                           std::tuple{weighted, weighted_closed, x / ((1 - x) * (1 - x))}}) {
            auto t = series_truncation_check(sum, closed, env, cutoffs);
            CHECK(t.pass);
            CHECK(t.errors.back() < 1e-9);
            // direct partial sum at the last cutoff
            double partial = 0;
            for (int i = 1; i <= 2000; ++i) partial += (sum == weighted ? i : 1) * std::pow(x, i);
            CHECK(std::fabs(partial - expect) < 1e-9);
        }
    }
    Env half;
    half.vars["x"] = 0.5;
    CHECK(series_truncation_check(plain, plain_closed, half, {60}).errors[0] < 1e-12);
    CHECK(eval(weighted_closed, half, 1) == 2.0);

    Env zero;
    zero.vars["x"] = 0;
    auto z = series_truncation_check(plain, plain_closed, zero, {1, 10, 100});
    for (double e : z.errors) CHECK(e == 0.0);
}

TEST_CASE("truncation error that grows is reported") {
    // x = 1.1 diverges; the partial sums move away from the formula value
    Env env;
    env.vars["x"] = 1.1;
    Expr plain = series("i", 1, pow_index(var("x"), "i"));
    CHECK_THROWS_AS(series_truncation_check(plain, div(var("x"), sub(num(1), var("x"))), env, {10, 20, 40}),
                    NonConvergent);
}

TEST_CASE("finite differences") {
    double A = 2, v0 = 3, x0 = 1;
    auto pos = [&](double t) { return t * t / 2 * A + v0 * t + x0; };
    auto vel = [&](double t) { return A * t + v0; };
    CHECK(vel(2) == 7.0);
    auto r = finite_difference_check(pos, vel, {2.0});
    CHECK(r.pass);
    CHECK(r.worst_residual < 1e-5);

    CHECK(finite_difference_check([](double) { return 4.0; }, [](double) { return 0.0; }, {-3, 0, 8}).pass);
    CHECK_FALSE(finite_difference_check(pos, [](double) { return 0.0; }, {2.0}).pass);

    // F' = 5 with F(0) = 2
    auto F = [](double x) { return x * 5 + 2; };
    CHECK(F(3) == 17.0);
    CHECK(finite_difference_check(F, [](double) { return 5.0; }, {0, 1.5, 3}).pass);
}

TEST_CASE("Torricelli in three dimensions") {
    Eigen::Vector3d a(2, 0, 0), v0(3, 0, 0), x0(1, 0, 0);
    VecFn3 f{a, v0, x0};
    CHECK(f.position(2).x() == 11.0);
    double lhs = f.velocity(2).squaredNorm();
    double rhs = v0.squaredNorm() + 2 * a.dot(f.position(2) - x0);
    CHECK(lhs == 49.0);
    CHECK(rhs == 49.0);
    SamplePlan plan;
    CHECK(vector_kinematics_check(a, v0, x0, {0.0, 2.0}, plan).pass);

    plan.samples = 100;
    plan.seed = 8;
    auto suite = vector_kinematics_suite(plan);
    CHECK(suite.pass);
    CHECK(suite.samples >= 100);

    // a wrong acceleration breaks it
    VecFn3 g{a, v0, x0};
    g.a = Eigen::Vector3d(2, 1, 0);
    Eigen::Vector3d moved = f.position(2);
    CHECK(std::fabs(g.velocity(2).squaredNorm() - (v0.squaredNorm() + 2 * g.a.dot(moved - x0))) > 1);
}

TEST_CASE("divergence from the left") {
    Env env;
    env.vars["C_L"] = 2;
    auto t = divergence_witness(closed_b26(), "P", 0.5, 6, env);
    REQUIRE(t.left.size() == 6);
    CHECK(t.increasing);
    // at P = 0.5 - 1e-6: 1 - x = 2e-6, so the value is about 10 / (2e-6 * 10) = 5e5
    double d = 2e-6, x = 1 - d;
    double direct = 10 * x / (d * (d + 10 * x));
    CHECK(t.left.back() == doctest::Approx(direct).epsilon(1e-6));
    CHECK(t.left.back() < 1e6);
    CHECK_FALSE(t.pass);
    for (double r : t.right) CHECK(r < 0);

    // one more step clears the threshold
    auto seven = divergence_witness(closed_b26(), "P", 0.5, 7, env);
    CHECK(seven.increasing);
    CHECK(seven.left.back() > 1e6);
    CHECK(seven.pass);
}

TEST_CASE("constant function does not diverge") {
    auto t = divergence_witness(num(3), "P", 0.5, 6, {});
    CHECK_FALSE(t.increasing);
    CHECK_FALSE(t.pass);
}

TEST_CASE("same seed gives the same run") {
    auto es = registry(theory_dir());
    SamplePlan plan;
    plan.seed = 42;
    for (const char* name : {"langmuir_kinetic_fig1", "bet_sequence_math", "boyles_from_ideal_gas", "const_accel'"}) {
        auto a = run_numeric(entry(es, name).script, plan);
        auto b = run_numeric(entry(es, name).script, plan);
        CHECK(a.worst_residual == b.worst_residual);
        REQUIRE(a.checks.size() == b.checks.size());
        for (std::size_t i = 0; i < a.checks.size(); ++i) {
            CHECK(a.checks[i].log == b.checks[i].log);
            CHECK(a.checks[i].draws == b.checks[i].draws);
        }
    }
    auto r1 = rng_for(1, "x"), r2 = rng_for(1, "x"), r3 = rng_for(2, "x");
    auto v1 = r1(), v2 = r2(), v3 = r3();
    CHECK(v1 == v2);
    CHECK(v1 != v3);
}

TEST_CASE("impossible hypotheses starve the sampler") {
    Model m = Model::from_hyps({"x"}, {f_lt(var("x"), num(-20))});
    SamplePlan plan;
    plan.max_draws = 1000;
    CHECK_THROWS_AS(identity_check(var("x"), var("x"), m, plan), RejectionStarvation);
}

TEST_CASE("invalid plans") {
    SamplePlan plan;
    plan.samples = 0;
    CHECK_THROWS_AS(validate(plan), InvalidPlan);
    plan = {};
    plan.rel_tol = -1;
    CHECK_THROWS_AS(validate(plan), InvalidPlan);
}

TEST_CASE("a false identity is caught") {
    Model m = Model::from_hyps({"x", "y"}, {f_lt(num(0), var("x"))});
    SamplePlan plan;
    plan.seed = 3;
    auto ok = identity_check(mul(var("x"), add(var("y"), num(1))), add(mul(var("x"), var("y")), var("x")), m, plan);
    CHECK(ok.pass);
    CHECK(ok.samples == 100);
    auto bad = identity_check(mul(var("x"), var("y")), mul(var("y"), add(var("x"), div(num(1), num(1000000)))), m, plan);
    CHECK_FALSE(bad.pass);
}

TEST_CASE("every accepted theory has a passing numeric run") {
    auto es = registry(theory_dir());
    auto reports = run_builtins(es);
    SamplePlan plan;
    plan.seed = 42;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        REQUIRE(r.accepted);
        auto sum = run_numeric(entry(es, r.theory).script, plan);
        CHECK_MESSAGE(sum.pass, r.theory);
        REQUIRE_FALSE(sum.checks.empty());
        bool divergence = false;
        for (const auto& c : sum.checks) {
            divergence = divergence || c.routine == "divergence_witness";
            if (c.routine == "identity_check" || c.routine == "formula_check" || c.routine == "gas_law_check")
                CHECK_MESSAGE(c.samples >= 100, r.theory);
        }
        CHECK(divergence == (r.soundness == Soundness::NumericCertified));
    }
}

TEST_CASE("numcheck does not use the kernel's normalizer") {
    for (const char* f : {"/src/numcheck.cpp", "/include/derivkit/numcheck.hpp"}) {
        std::string src = read_file(std::string(DERIVKIT_SOURCE_DIR) + f);
        for (const char* banned : {"ring_normalize", "normalize_atoms", "same_normal_form", "kernel.hpp", "discharge",
                                   "poly.hpp", "RatFunc"})
            CHECK_MESSAGE(src.find(banned) == std::string::npos, f, " mentions ", banned);
    }
}

}
