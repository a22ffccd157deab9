#pragma once

#include "derivkit/expr.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace derivkit {

enum class FKind { Eq, Ne0, Lt, Forall, Exists, Implies, And, DivergesLeft };

struct FNode;
using Formula = std::shared_ptr<const FNode>;

struct FNode {
    FKind kind;
    Expr l, r;                      // Eq(l,r), Ne0(l), Lt(l,r), DivergesLeft point in l
    std::vector<std::string> vars;  // Forall binders, Exists binder (size 1)
    std::string fn;                 // DivergesLeft: name of the defining let
    Formula p, q;                   // Forall/Exists body in p; Implies/And operands
};

Formula f_eq(Expr l, Expr r);
Formula f_ne0(Expr e);
Formula f_lt(Expr l, Expr r);
Formula f_forall(std::vector<std::string> vars, Formula body);
Formula f_exists(std::string v, Formula body);
Formula f_implies(Formula a, Formula b);
Formula f_and(Formula a, Formula b);
Formula f_diverges_left(std::string fn, Expr point);

bool equal(const Formula& a, const Formula& b);
// equality up to renaming of bound variables
bool alpha_equal(const Formula& a, const Formula& b);
Formula substitute(const Formula& f, const std::string& id, const Expr& replacement);
std::set<std::string> free_vars(const Formula& f);
std::set<std::string> free_fns(const Formula& f);

std::string to_string(const Formula& f);   // ASCII, parseable
std::string display(const Formula& f);     // human form, uses ≠

struct Hypothesis {
    std::string name;
    Formula statement;
};

enum class Sort { Real, State, Const, FnState, FnReal, Let, Bound };

class NotDerivable : public std::runtime_error {
public:
    explicit NotDerivable(const Formula& ob)
        : std::runtime_error("not derivable: " + display(ob)), obligation(ob) {}
    Formula obligation;
};

class ArityMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Context {
public:
    std::vector<Hypothesis> hyps;
    std::map<std::string, Sort> symbols;
    std::vector<std::pair<std::string, Expr>> lets;
    std::vector<std::string> state_constants;

    void declare(const std::string& name, Sort s);
    bool declared(const std::string& name) const { return symbols.count(name) > 0; }
    void add_hyp(const std::string& name, Formula f);
    const Hypothesis* find_hyp(const std::string& name) const;
    void replace_hyp(const std::string& name, Formula f);
    std::optional<Expr> let_body(const std::string& name) const;
    Expr expand_lets(const Expr& e) const;
    // marks the state sort nontrivial: s1, s2 declared and distinct
    void ensure_states();
};

struct Discharge {
    std::vector<std::string> trace;
};

// Proves Ne0 / Lt obligations with a closed rule set; nullopt if not derivable.
std::optional<Discharge> try_discharge(const Context& ctx, const Formula& obligation);
Discharge discharge(const Context& ctx, const Formula& obligation);

Formula specialize(const Formula& f, const std::vector<Expr>& terms);
Formula exists_intro(const Formula& goal, const Expr& witness);

// Rational normal form with series / application / derivative subterms
// abstracted as opaque atoms. Throws nothing for well-formed input.
Expr normalize_atoms(const Expr& e);
bool same_normal_form(const Expr& a, const Expr& b);
// replaces each series / application / derivative subterm by a variable
// whose id starts with '@'
Expr abstract_atoms(const Expr& e, std::map<std::string, Expr>& atoms);
Expr restore_atoms(const Expr& e, const std::map<std::string, Expr>& atoms);

// First-order syntactic matching; metas are pattern variables. Bound
// variables of series / derivative binders match up to renaming.
bool match_expr(const Expr& pattern, const Expr& target, const std::set<std::string>& metas,
                std::map<std::string, Expr>& sigma);
bool match_formula(const Formula& pattern, const Formula& target, const std::set<std::string>& metas,
                   std::map<std::string, Expr>& sigma);
Expr instantiate(const Expr& e, const std::map<std::string, Expr>& sigma);
Formula instantiate(const Formula& f, const std::map<std::string, Expr>& sigma);

}  // namespace derivkit
