#pragma once

// Numeric falsification oracle. Works on raw parsed expressions only: lets
// are expanded by substitution and everything else is plain evaluation.

#include "derivkit/parser.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace derivkit {

struct SamplePlan {
    std::uint64_t seed = 0;
    long samples = 100;
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    int series_cutoff = 2000;
    double lo = -10, hi = 10;         // default range
    double pos_lo = 1e-3, pos_hi = 10;  // variables with a 0 < v hypothesis
    long max_draws = 100000;
    int points_per_sample = 3;  // draws of a real-valued forall binder
};

class InvalidPlan : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RejectionStarvation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonConvergent : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void validate(const SamplePlan& plan);

// Independent stream per (seed, check name).
std::mt19937_64 rng_for(std::uint64_t seed, const std::string& check);

bool within_tol(double l, double r, const SamplePlan& plan);
double rel_residual(double l, double r);

struct CheckResult {
    std::string routine;  // identity_check, finite_difference_check, ...
    std::string subject;
    bool pass = false;
    long samples = 0;
    long draws = 0;
    double worst_residual = 0;
    std::vector<std::string> log;
};

// One hypothesis-satisfying environment. Function closures point into env,
// so it is kept behind a stable address.
struct Sample {
    std::unique_ptr<Env> env;
};

// Sampler built from declarations and hypotheses:
//  - equations whose one side is a variable define it,
//  - remaining equations are solved for a variable they are affine in,
//  - forall statements over states are expanded over a finite state set,
//  - real functions come from derivative hypotheses (by quadrature) or
//    from case hypotheses like f(0) = a and forall i, 0 < i -> f(i) = ...,
//  - everything else is a rejection test.
class Model {
public:
    // A real function of one real argument.
    struct Fn {
        std::string name;
        std::string deriv_var;  // forall v, deriv(F, v) = deriv_rhs
        Expr deriv_rhs;
        std::vector<std::pair<Expr, Expr>> ground;  // F(c) = e
        struct Case {
            std::string var;
            Formula cond;  // may be null
            Expr rhs;
        };
        std::vector<Case> cases;
        std::string init_var;             // sampled F(0) when nothing pins it
        std::vector<std::string> coeffs;  // unconstrained: random cubic
    };
    struct Solve {
        std::string var;
        Expr residual;
    };

    static Model from_script(const DerivationScript& s, int states = 4);
    // Plain real variables and hypotheses, no lets or functions.
    static Model from_hyps(const std::vector<std::string>& vars, const std::vector<Formula>& hyps);

    // Draws until the hypotheses hold; returns the number of draws used.
    // Throws RejectionStarvation once budget draws are spent.
    long draw(std::mt19937_64& rng, const SamplePlan& plan, Sample& out, long budget) const;

    // Lets expanded, state constants replaced by state indices, state
    // function applications at fixed states turned into cell variables.
    Expr ground(const Expr& e) const;
    Formula ground(const Formula& f) const;

    // Goal after moving top-level antecedents into the model.
    const Formula& goal() const { return goal_; }
    int states() const { return states_; }
    const std::vector<std::string>& deriv_fns() const { return deriv_fns_; }
    Expr let_body(const std::string& name) const;
    // Replaces defined variables by their defining expressions.
    Expr substitute_defs(const Expr& e) const;
    std::vector<std::string> sampled_names() const;

    // Truth of f in env; residual is the worst relative residual seen.
    // Returns false on violation. unreliable is set when a series has not
    // settled at the cutoff.
    bool holds(const Formula& f, Env& env, std::mt19937_64& rng, const SamplePlan& plan, double& residual,
               bool& unreliable) const;

private:
    struct Var {
        std::string name;
        bool positive = false;
    };
    std::vector<Var> sampled_;
    std::vector<std::pair<std::string, Expr>> defs_;
    std::vector<Solve> solves_;
    std::vector<Formula> tests_;
    std::vector<Fn> fns_;
    std::vector<std::pair<std::string, Expr>> lets_;
    std::set<std::string> state_fns_;
    std::map<std::string, int> state_consts_;
    std::vector<std::string> deriv_fns_;
    Formula goal_;
    int states_ = 0;
    int fresh_ = 0;

    Fn* find_fn(const std::string& name);
    void add_sampled(const std::string& name);
    void absorb(const Formula& f, std::vector<Formula>& equations);
    void solve_equations(std::vector<Formula> equations);
    bool is_state_binder(const std::string& v, const Formula& body) const;
    Expr cellify(const Expr& e) const;
    Formula cellify(const Formula& f) const;
    void bind_functions(Env& env, int cutoff) const;
};

CheckResult identity_check(const Expr& lhs, const Expr& rhs, const Model& model, const SamplePlan& plan,
                           const std::string& name = "identity");

// Like identity_check but for any goal formula (quantifiers over states or
// reals, existentials with a computed witness).
CheckResult formula_check(const Formula& goal, const Model& model, const SamplePlan& plan,
                          const std::string& name = "formula");

// Same routine, named for state-indexed gas-law goals.
CheckResult gas_law_check(const Formula& goal, const Model& model, const SamplePlan& plan);

struct TruncationTable {
    std::vector<int> cutoffs;
    std::vector<double> errors;
    double tail_bound = 0;  // x^(N+1)/(1-x) for the last cutoff, when x is known
    bool pass = false;
};

// |partial(N) - closed| for each cutoff. Throws NonConvergent if the errors
// grow (beyond rounding noise).
TruncationTable series_truncation_check(const Expr& sum, const Expr& closed, const Env& env,
                                        const std::vector<int>& cutoffs, double tol = 1e-9);

// Central difference with h = 1e-5 against the claimed derivative.
CheckResult finite_difference_check(const std::function<double(double)>& fn,
                                     const std::function<double(double)>& claimed, const std::vector<double>& ts,
                                     double rel_tol = 1e-5, const std::string& name = "fd");

// Componentwise quadratic motion from coefficient vectors.
struct VecFn3 {
    Eigen::Vector3d a, v0, x0;
    Eigen::Vector3d position(double t) const { return t * t / 2 * a + t * v0 + x0; }
    Eigen::Vector3d velocity(double t) const { return t * a + v0; }
    Eigen::Vector3d acceleration(double) const { return a; }
};

CheckResult vector_kinematics_check(const Eigen::Vector3d& a, const Eigen::Vector3d& v0, const Eigen::Vector3d& x0,
                                    const std::vector<double>& ts, const SamplePlan& plan);
// Random (A, v0, x0) in (-5,5)^3 and random t, plan.samples times.
CheckResult vector_kinematics_suite(const SamplePlan& plan);

struct DivergenceTable {
    std::vector<double> offsets;  // 10^-j
    std::vector<double> left;     // f(point - 10^-j)
    std::vector<double> right;    // f(point + 10^-j)
    bool increasing = false;
    bool pass = false;
};

// fn has exactly one free variable; other symbols are taken from env.
DivergenceTable divergence_witness(const Expr& fn, const std::string& var, double point, int m, const Env& env,
                                   double cap = 1e6);

struct NumericSummary {
    std::uint64_t seed = 0;
    long samples = 0;
    double worst_residual = 0;
    bool pass = true;
    std::vector<CheckResult> checks;
    std::vector<std::string> notes;
};

// Runs every routine bound to the theory.
NumericSummary run_numeric(const DerivationScript& s, const SamplePlan& plan);

}  // namespace derivkit
