#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace derivkit {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

enum class Kind {
    Var,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Sum,   // indexed infinite series
    App,   // f(arg) or deriv(f, arg)
    Diff,  // diff[u](body, point): d/du body evaluated at point
};

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
    Kind kind;
    std::string name;   // Var id, App function, Sum/Diff binder, Pow index exponent
    Rational value;     // Const
    long exponent = 0;  // Pow with literal exponent
    int start = 0;      // Sum start index (0 or 1)
    bool deriv = false; // App of Deriv(fn)
    Expr a, b, c;
};

class UnboundSymbol : public std::runtime_error {
public:
    explicit UnboundSymbol(const std::string& id)
        : std::runtime_error("unbound symbol: " + id), id(id) {}
    std::string id;
};

class UnsupportedNode : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// constructors
Expr var(const std::string& id);
Expr num(const Rational& v);
Expr num(long v);
Expr add(Expr l, Expr r);
Expr sub(Expr l, Expr r);
Expr mul(Expr l, Expr r);
Expr div(Expr n, Expr d);
Expr pow(Expr base, long exponent);
Expr pow_index(Expr base, const std::string& index);
Expr neg(Expr e);
Expr series(const std::string& index, int start, Expr body);
Expr app(const std::string& fn, Expr arg);
Expr deriv_app(const std::string& fn, Expr arg);
Expr diff(const std::string& binder, Expr body, Expr point);

bool is_const(const Expr& e);
bool is_const(const Expr& e, long v);

bool equal(const Expr& x, const Expr& y);
bool operator_less(const Expr& x, const Expr& y);  // structural total order

struct Env {
    std::map<std::string, double> vars;
    std::map<std::string, std::function<double(double)>> fns;
    // derivative callables, keyed by function name
    std::map<std::string, std::function<double(double)>> derivs;
};

double eval(const Expr& e, const Env& env, int series_cutoff);
// Same, without copying env; binders are restored before returning.
double eval_in_place(const Expr& e, Env& env, int series_cutoff);

std::set<std::string> free_vars(const Expr& e);
std::set<std::string> free_fns(const Expr& e);
bool contains_var(const Expr& e, const std::string& id);
bool is_rational(const Expr& e);  // no Sum/App/Diff anywhere
bool has_division(const Expr& e);

Expr substitute(const Expr& e, const std::string& id, const Expr& replacement);
std::string fresh_name(const std::string& base, const std::set<std::string>& avoid);

// Every denominator expression under a Div node, outermost first.
void collect_denominators(const Expr& e, std::vector<Expr>& out);

// Canonical single-fraction form over exact polynomials.
Expr ring_normalize(const Expr& e);

std::string to_string(const Expr& e);  // ASCII, parseable

}  // namespace derivkit
