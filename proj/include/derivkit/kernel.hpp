#pragma once

#include "derivkit/parser.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace derivkit {

enum class Soundness { Symbolic, NumericCertified };

struct ObligationRecord {
    std::string obligation;  // display form, e.g. "S + A ≠ 0"
    std::vector<std::string> trace;
};

struct StepRecord {
    std::string step;
    std::string goal_before;
    std::string goal_after;
    std::vector<ObligationRecord> obligations;
    std::vector<std::string> notes;  // numeric tables and similar
};

struct Failure {
    enum class Kind { StepFailed, ObligationFailed, GoalNotClosed } kind;
    int step = 0;        // 1-based; steps.size()+1 for GoalNotClosed
    std::string reason;  // human text
    std::string goal;    // goal at failure time
};

struct CheckReport {
    std::string theory;
    bool accepted = false;
    Soundness soundness = Soundness::Symbolic;
    std::optional<Failure> failure;
    std::vector<StepRecord> steps;
    std::vector<double> divergence_table;  // filled by limit_witness
    long ms = 0;

    std::string verdict_line() const;  // "Accepted (Symbolic)" or "ObligationFailed: ... at step k"
};

class StepFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ObligationFailed : public std::runtime_error {
public:
    explicit ObligationFailed(const Formula& ob)
        : std::runtime_error("ObligationFailed: " + display(ob)), obligation(ob) {}
    Formula obligation;
};

// Lemmas accepted earlier in the same run, available to `apply`.
using LemmaStore = std::map<std::string, DerivationScript>;

struct GoalState {
    Context ctx;
    std::vector<Formula> goals;  // front is the focus
    std::vector<StepRecord> trace;
    Soundness soundness = Soundness::Symbolic;
    std::vector<double> divergence_table;
};

// Divergence thresholds used by limit_witness; reported verbatim.
constexpr double kDivergenceCap = 1e6;

GoalState initial_state(const DerivationScript& s);
// Applies one step in place. Throws StepFailed / ObligationFailed.
void apply_step(GoalState& gs, const ProofStep& step, const LemmaStore& lemmas);
CheckReport check(const DerivationScript& s, const LemmaStore& lemmas = {});

std::string goal_string(const GoalState& gs);

}  // namespace derivkit
