#pragma once

#include "derivkit/expr.hpp"

#include <map>
#include <string>
#include <vector>

namespace derivkit {

// Exponent vector over a shared, sorted variable list.
using Mono = std::vector<unsigned>;

// Graded lexicographic comparison: true when a sorts above b.
bool grlex_greater(const Mono& a, const Mono& b);

struct MonoDesc {
    bool operator()(const Mono& a, const Mono& b) const { return grlex_greater(a, b); }
};

// Sparse multivariate polynomial with integer coefficients; terms kept
// in descending graded-lex order so begin() is the leading term.
class Poly {
public:
    using Terms = std::map<Mono, BigInt, MonoDesc>;

    Poly() = default;
    explicit Poly(std::size_t nvars) : nvars_(nvars) {}

    static Poly constant(std::size_t nvars, const BigInt& c);
    static Poly variable(std::size_t nvars, std::size_t index);

    std::size_t nvars() const { return nvars_; }
    const Terms& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    bool is_constant() const;
    BigInt constant_value() const;  // 0 for the zero polynomial
    const BigInt& leading_coeff() const { return terms_.begin()->second; }
    const Mono& leading_mono() const { return terms_.begin()->first; }

    void add_term(const Mono& m, const BigInt& c);

    Poly operator+(const Poly& o) const;
    Poly operator-(const Poly& o) const;
    Poly operator*(const Poly& o) const;
    Poly operator-() const;
    Poly scaled(const BigInt& c) const;
    Poly pow(unsigned k) const;
    bool operator==(const Poly& o) const { return terms_ == o.terms_; }
    bool operator!=(const Poly& o) const { return !(*this == o); }

    unsigned degree_in(std::size_t v) const;
    // lowest-index variable with positive degree, or nvars() if constant
    std::size_t main_var() const;
    // coefficients as a polynomial in variable v: result[k] multiplies v^k
    std::vector<Poly> coeffs_in(std::size_t v) const;
    static Poly from_coeffs(const std::vector<Poly>& cs, std::size_t v, std::size_t nvars);

    BigInt integer_content() const;
    Mono monomial_content() const;
    Poly divide_mono(const Mono& m) const;
    Poly divide_int(const BigInt& c) const;

private:
    std::size_t nvars_ = 0;
    Terms terms_;
};

// Exact division; throws std::logic_error if d does not divide n.
Poly exact_div(const Poly& n, const Poly& d);
Poly gcd(const Poly& a, const Poly& b);

// Reduced fraction num/den: coprime, den has positive leading coefficient.
struct RatFunc {
    Poly num, den;
};

RatFunc make_ratfunc(Poly num, Poly den);
RatFunc operator+(const RatFunc& x, const RatFunc& y);
RatFunc operator-(const RatFunc& x, const RatFunc& y);
RatFunc operator*(const RatFunc& x, const RatFunc& y);
RatFunc operator/(const RatFunc& x, const RatFunc& y);  // x/0 = 0

// Conversion between expressions and the polynomial world. vars is the
// sorted variable list used for exponent vectors.
RatFunc to_ratfunc(const Expr& e, const std::vector<std::string>& vars);
Expr poly_to_expr(const Poly& p, const std::vector<std::string>& vars);
Expr ratfunc_to_expr(const RatFunc& r, const std::vector<std::string>& vars);

}  // namespace derivkit
