#include "gen.hpp"

#include "derivkit/parser.hpp"

#include <doctest.h>

#include <cmath>

using namespace derivkit;

namespace {

Expr parse_expr(const std::string& text, const std::string& vars = "x y z A S k_ad k_d P K") {
    auto s = parse_script("theory t\nvars " + vars + " : Real\ngoal " + text + " = 0\nproof ring qed");
    return s.goal->l;
}

}  // namespace

TEST_SUITE("expr") {

TEST_CASE("eval follows the total division convention") {
    CHECK(eval(div(num(1), num(0)), {}, 100) == 0.0);
    Env env;
    env.vars["x"] = 3;
    CHECK(eval(add(var("x"), num(0)), env, 100) == 3.0);
}

TEST_CASE("eval truncates series at the cutoff") {
    Env env;
    env.vars["x"] = 0.5;
    Expr s = series("i", 1, pow_index(var("x"), "i"));
    // x/(1-x) = 1; the tail after 60 terms is 2^-60
    CHECK(std::fabs(eval(s, env, 60) - 1.0) < 1e-12);
    CHECK(eval(s, env, 1) == doctest::Approx(0.5));
}

TEST_CASE("unbound symbols are errors") {
    CHECK_THROWS_AS(eval(var("q"), {}, 10), UnboundSymbol);
    CHECK_THROWS_AS(eval(app("f", num(1)), {}, 10), UnboundSymbol);
}

TEST_CASE("free_vars") {
    CHECK(free_vars(num(5)).empty());
    Expr body = mul(var("x"), pow(var("i"), 2));
    CHECK(free_vars(series("i", 1, body)) == std::set<std::string>{"x"});
    CHECK(free_vars(parse_expr("A / (S + A)")) == std::set<std::string>{"A", "S"});
}

TEST_CASE("substitute") {
    CHECK(equal(substitute(var("x"), "x", num(2)), num(2)));
    CHECK(equal(substitute(num(7), "x", var("y")), num(7)));
    Expr e = parse_expr("K * P / (1 + K * P)");
    Expr got = substitute(e, "K", parse_expr("k_ad / k_d"));
    CHECK(to_string(got) == "k_ad / k_d * P / (1 + k_ad / k_d * P)");
}

TEST_CASE("substitute avoids capturing a series index") {
    Expr s = series("i", 1, mul(var("x"), var("i")));
    Expr got = substitute(s, "x", var("i"));
    // the free i in the replacement must stay free
    CHECK(free_vars(got).count("i") == 1);
    Env env;
    env.vars["i"] = 2;
    CHECK(eval(got, env, 3) == doctest::Approx(2 * (1 + 2 + 3)));
}

TEST_CASE("ring_normalize examples") {
    CHECK(equal(ring_normalize(add(var("x"), num(0))), var("x")));
    Expr a = parse_expr("A / (k_ad / k_d * P) + A");
    Expr b = parse_expr("(A * k_d + A * k_ad * P) / (k_ad * P)");
    CHECK(equal(ring_normalize(a), ring_normalize(b)));
}

TEST_CASE("ring_normalize rejects series and applications") {
    CHECK_THROWS_AS(ring_normalize(series("i", 0, var("i"))), UnsupportedNode);
    CHECK_THROWS_AS(ring_normalize(app("f", var("x"))), UnsupportedNode);
}

TEST_CASE("normal form equality agrees with random evaluation") {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> val(-10, 10);
    int equal_pairs = 0, unequal_pairs = 0, disagreements = 0;
    for (int pair = 0; pair < 200;) {
        Expr e1 = gen::rational_expr(rng, 3);
        Expr e2 = pair % 2 ? gen::equal_variant(rng, e1)
                           : (pair % 4 == 0 ? gen::unequal_variant(rng, e1) : gen::rational_expr(rng, 3));
        bool nf_equal = equal(ring_normalize(e1), ring_normalize(e2));

        std::vector<Expr> dens;
        collect_denominators(e1, dens);
        collect_denominators(e2, dens);
        bool eval_equal = true;
        int envs = 0;
        for (int tries = 0; envs < 50 && tries < 5000; ++tries) {
            Env env;
            for (const auto& v : gen::kVars) env.vars[v] = val(rng);
            bool near_pole = false;
            for (const auto& d : dens)
                if (std::fabs(eval(d, env, 1)) < 1e-6) near_pole = true;
            if (near_pole) continue;
            ++envs;
            double a = eval(e1, env, 1), b = eval(e2, env, 1);
            if (std::fabs(a - b) > 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)})) eval_equal = false;
        }
        // a denominator that vanishes identically leaves nothing to compare
        if (envs < 50) continue;
        ++pair;
        if (nf_equal) {
            // a false equality would be a soundness bug
            CHECK_MESSAGE(eval_equal, to_string(e1), " vs ", to_string(e2));
            ++equal_pairs;
        } else {
            ++unequal_pairs;
            if (eval_equal) ++disagreements;
        }
    }
    CHECK(disagreements == 0);
    CHECK(equal_pairs >= 50);
    CHECK(unequal_pairs >= 50);
}

TEST_CASE("ring_normalize is idempotent") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 200; ++k) {
        Expr e = gen::rational_expr(rng, 3);
        Expr n = ring_normalize(e);
        CHECK(equal(ring_normalize(n), n));
    }
}

TEST_CASE("eval of a substitution equals eval in the extended environment") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> val(-10, 10);
    int compared = 0;
    for (int k = 0; k < 200; ++k) {
        Expr e = gen::rational_expr(rng, 3);
        Expr r = gen::rational_expr(rng, 2);
        Env env;
        for (const auto& v : gen::kVars) env.vars[v] = val(rng);
        std::vector<Expr> dens;
        collect_denominators(e, dens);
        collect_denominators(r, dens);
        Env ext = env;
        ext.vars["x"] = eval(r, env, 1);
        Expr sub_e = substitute(e, "x", r);
        collect_denominators(sub_e, dens);
        bool near_pole = false;
        for (const auto& d : dens)
            if (std::fabs(eval(d, env, 1)) < 1e-6) near_pole = true;
        if (near_pole) continue;
        double a = eval(sub_e, env, 1), b = eval(e, ext, 1);
        CHECK(std::fabs(a - b) <= 1e-12 * std::max({1.0, std::fabs(a), std::fabs(b)}) * 1e3);
        ++compared;
    }
    CHECK(compared > 100);
}

}
