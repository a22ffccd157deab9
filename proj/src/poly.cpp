#include "derivkit/poly.hpp"

#include <algorithm>
#include <stdexcept>

namespace derivkit {

bool grlex_greater(const Mono& a, const Mono& b) {
    unsigned da = 0, db = 0;
    for (unsigned x : a) da += x;
    for (unsigned x : b) db += x;
    if (da != db) return da > db;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return a[i] > b[i];
    return false;
}

Poly Poly::constant(std::size_t nvars, const BigInt& c) {
    Poly p(nvars);
    p.add_term(Mono(nvars, 0), c);
    return p;
}

Poly Poly::variable(std::size_t nvars, std::size_t index) {
    Poly p(nvars);
    Mono m(nvars, 0);
    m[index] = 1;
    p.add_term(m, 1);
    return p;
}

bool Poly::is_constant() const {
    if (terms_.empty()) return true;
    if (terms_.size() > 1) return false;
    for (unsigned x : terms_.begin()->first)
        if (x) return false;
    return true;
}

BigInt Poly::constant_value() const {
    if (terms_.empty()) return 0;
    return terms_.begin()->second;
}

void Poly::add_term(const Mono& m, const BigInt& c) {
    if (c == 0) return;
    auto [it, inserted] = terms_.emplace(m, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) terms_.erase(it);
    }
}

Poly Poly::operator+(const Poly& o) const {
    Poly r = *this;
    r.nvars_ = std::max(nvars_, o.nvars_);
    for (const auto& [m, c] : o.terms_) r.add_term(m, c);
    return r;
}

Poly Poly::operator-(const Poly& o) const {
    Poly r = *this;
    r.nvars_ = std::max(nvars_, o.nvars_);
    for (const auto& [m, c] : o.terms_) r.add_term(m, -c);
    return r;
}

Poly Poly::operator-() const {
    Poly r(nvars_);
    for (const auto& [m, c] : terms_) r.terms_.emplace(m, -c);
    return r;
}

Poly Poly::operator*(const Poly& o) const {
    Poly r(std::max(nvars_, o.nvars_));
    for (const auto& [m1, c1] : terms_) {
        for (const auto& [m2, c2] : o.terms_) {
            Mono m(m1.size());
            for (std::size_t i = 0; i < m.size(); ++i) m[i] = m1[i] + m2[i];
            r.add_term(m, c1 * c2);
        }
    }
    return r;
}

Poly Poly::scaled(const BigInt& c) const {
    Poly r(nvars_);
    if (c == 0) return r;
    for (const auto& [m, x] : terms_) r.terms_.emplace(m, x * c);
    return r;
}

Poly Poly::pow(unsigned k) const {
    Poly result = constant(nvars_, 1);
    Poly base = *this;
    while (k) {
        if (k & 1u) result = result * base;
        k >>= 1u;
        if (k) base = base * base;
    }
    return result;
}

unsigned Poly::degree_in(std::size_t v) const {
    unsigned d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m[v]);
    return d;
}

std::size_t Poly::main_var() const {
    std::size_t best = nvars_;
    for (const auto& [m, c] : terms_)
        for (std::size_t i = 0; i < m.size() && i < best; ++i)
            if (m[i]) {
                best = i;
                break;
            }
    return best;
}

std::vector<Poly> Poly::coeffs_in(std::size_t v) const {
    std::vector<Poly> out(degree_in(v) + 1, Poly(nvars_));
    for (const auto& [m, c] : terms_) {
        Mono rest = m;
        rest[v] = 0;
        out[m[v]].add_term(rest, c);
    }
    return out;
}

Poly Poly::from_coeffs(const std::vector<Poly>& cs, std::size_t v, std::size_t nvars) {
    Poly r(nvars);
    for (std::size_t k = 0; k < cs.size(); ++k) {
        for (const auto& [m, c] : cs[k].terms()) {
            Mono mm = m;
            mm[v] += static_cast<unsigned>(k);
            r.add_term(mm, c);
        }
    }
    return r;
}

BigInt Poly::integer_content() const {
    BigInt g = 0;
    for (const auto& [m, c] : terms_) g = boost::multiprecision::gcd(g, abs(c));
    return g;
}

Mono Poly::monomial_content() const {
    if (terms_.empty()) return Mono(nvars_, 0);
    Mono g = terms_.begin()->first;
    for (const auto& [m, c] : terms_)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::min(g[i], m[i]);
    return g;
}

Poly Poly::divide_mono(const Mono& d) const {
    Poly r(nvars_);
    for (const auto& [m, c] : terms_) {
        Mono q = m;
        for (std::size_t i = 0; i < q.size(); ++i) {
            if (q[i] < d[i]) throw std::logic_error("monomial does not divide");
            q[i] -= d[i];
        }
        r.terms_.emplace(q, c);
    }
    return r;
}

Poly Poly::divide_int(const BigInt& d) const {
    Poly r(nvars_);
    for (const auto& [m, c] : terms_) {
        if (c % d != 0) throw std::logic_error("integer does not divide");
        r.terms_.emplace(m, c / d);
    }
    return r;
}

Poly exact_div(const Poly& n, const Poly& d) {
    if (d.is_zero()) throw std::logic_error("division by zero polynomial");
    std::size_t nv = std::max(n.nvars(), d.nvars());
    Poly q(nv), r = n;
    const Mono& ld = d.leading_mono();
    const BigInt& lc = d.leading_coeff();
    while (!r.is_zero()) {
        const Mono& lr = r.leading_mono();
        Mono t(lr.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (lr[i] < ld[i]) throw std::logic_error("inexact polynomial division");
            t[i] = lr[i] - ld[i];
        }
        if (r.leading_coeff() % lc != 0) throw std::logic_error("inexact polynomial division");
        BigInt c = r.leading_coeff() / lc;
        Poly term(nv);
        term.add_term(t, c);
        q = q + term;
        r = r - term * d;
    }
    return q;
}

namespace {

using UPoly = std::vector<Poly>;  // coefficients in a main variable

void trim(UPoly& u) {
    while (!u.empty() && u.back().is_zero()) u.pop_back();
}

Poly content_of(const UPoly& u) {
    Poly g;
    bool first = true;
    for (const auto& c : u) {
        if (c.is_zero()) continue;
        g = first ? c : gcd(g, c);
        first = false;
    }
    return g;
}

UPoly primitive(const UPoly& u, const Poly& content) {
    UPoly out;
    for (const auto& c : u) out.push_back(c.is_zero() ? c : exact_div(c, content));
    return out;
}

UPoly pseudo_remainder(UPoly a, const UPoly& b, std::size_t nvars) {
    std::size_t db = b.size() - 1;
    const Poly& lb = b.back();
    trim(a);
    while (!a.empty() && a.size() - 1 >= db) {
        std::size_t shift = a.size() - 1 - db;
        Poly la = a.back();
        for (auto& c : a) c = c * lb;
        for (std::size_t k = 0; k <= db; ++k) a[k + shift] = a[k + shift] - la * b[k];
        trim(a);
    }
    (void)nvars;
    return a;
}

Poly positive_lead(Poly p) {
    if (!p.is_zero() && p.leading_coeff() < 0) return -p;
    return p;
}

}  // namespace

Poly gcd(const Poly& a, const Poly& b) {
    std::size_t nv = std::max(a.nvars(), b.nvars());
    if (a.is_zero()) return positive_lead(b);
    if (b.is_zero()) return positive_lead(a);
    if (a.is_constant() || b.is_constant()) {
        BigInt g = boost::multiprecision::gcd(a.integer_content(), b.integer_content());
        return Poly::constant(nv, g);
    }
    std::size_t v = std::min(a.main_var(), b.main_var());
    UPoly A = a.coeffs_in(v), B = b.coeffs_in(v);
    if (A.size() == 1) return positive_lead(gcd(a, content_of(B)));
    if (B.size() == 1) return positive_lead(gcd(content_of(A), b));

    Poly ca = content_of(A), cb = content_of(B);
    Poly c = gcd(ca, cb);
    UPoly pa = primitive(A, ca), pb = primitive(B, cb);
    if (pa.size() < pb.size()) std::swap(pa, pb);
    while (true) {
        UPoly r = pseudo_remainder(pa, pb, nv);
        if (r.empty()) break;
        if (r.size() == 1) {
            pb = UPoly{Poly::constant(nv, 1)};
            break;
        }
        pa = std::move(pb);
        pb = primitive(r, content_of(r));
    }
    Poly g = Poly::from_coeffs(primitive(pb, content_of(pb)), v, nv);
    return positive_lead(c * g);
}

RatFunc make_ratfunc(Poly num, Poly den) {
    std::size_t nv = std::max(num.nvars(), den.nvars());
    if (den.is_zero() || num.is_zero()) return {Poly(nv), Poly::constant(nv, 1)};
    Poly g = gcd(num, den);
    if (!(g.is_constant() && g.constant_value() == 1)) {
        num = exact_div(num, g);
        den = exact_div(den, g);
    }
    if (den.leading_coeff() < 0) {
        num = -num;
        den = -den;
    }
    return {num, den};
}

RatFunc operator+(const RatFunc& x, const RatFunc& y) {
    if (x.den == y.den) return make_ratfunc(x.num + y.num, x.den);
    return make_ratfunc(x.num * y.den + y.num * x.den, x.den * y.den);
}

RatFunc operator-(const RatFunc& x, const RatFunc& y) {
    if (x.den == y.den) return make_ratfunc(x.num - y.num, x.den);
    return make_ratfunc(x.num * y.den - y.num * x.den, x.den * y.den);
}

RatFunc operator*(const RatFunc& x, const RatFunc& y) {
    return make_ratfunc(x.num * y.num, x.den * y.den);
}

RatFunc operator/(const RatFunc& x, const RatFunc& y) {
    return make_ratfunc(x.num * y.den, x.den * y.num);
}

namespace {

RatFunc convert(const Expr& e, const std::vector<std::string>& vars) {
    std::size_t nv = vars.size();
    switch (e->kind) {
    case Kind::Var: {
        auto it = std::lower_bound(vars.begin(), vars.end(), e->name);
        if (it == vars.end() || *it != e->name) throw UnboundSymbol(e->name);
        return {Poly::variable(nv, static_cast<std::size_t>(it - vars.begin())), Poly::constant(nv, 1)};
    }
    case Kind::Const:
        return make_ratfunc(Poly::constant(nv, numerator(e->value)), Poly::constant(nv, denominator(e->value)));
    case Kind::Add: return convert(e->a, vars) + convert(e->b, vars);
    case Kind::Sub: return convert(e->a, vars) - convert(e->b, vars);
    case Kind::Mul: return convert(e->a, vars) * convert(e->b, vars);
    case Kind::Div: return convert(e->a, vars) / convert(e->b, vars);
    case Kind::Neg: {
        RatFunc r = convert(e->a, vars);
        return {-r.num, r.den};
    }
    case Kind::Pow: {
        if (!e->name.empty()) throw UnsupportedNode("power with series index exponent");
        RatFunc r = convert(e->a, vars);
        long k = e->exponent;
        if (k == 0) return {Poly::constant(nv, 1), Poly::constant(nv, 1)};
        unsigned ak = static_cast<unsigned>(k < 0 ? -k : k);
        RatFunc p{r.num.pow(ak), r.den.pow(ak)};
        if (k < 0) return make_ratfunc(p.den, p.num);
        return p;
    }
    default: throw UnsupportedNode("ring_normalize: series, application or derivative node");
    }
}

Expr mono_expr(const Mono& m, const std::vector<std::string>& vars) {
    Expr out;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i]) continue;
        Expr f = m[i] == 1 ? var(vars[i]) : pow(var(vars[i]), static_cast<long>(m[i]));
        out = out ? mul(out, f) : f;
    }
    return out;
}

}  // namespace

RatFunc to_ratfunc(const Expr& e, const std::vector<std::string>& vars) { return convert(e, vars); }

Expr poly_to_expr(const Poly& p, const std::vector<std::string>& vars) {
    if (p.is_zero()) return num(0);
    Expr acc;
    for (const auto& [m, c] : p.terms()) {
        BigInt mag = abs(c);
        Expr me = mono_expr(m, vars);
        Expr term;
        if (!me) term = num(Rational(mag));
        else if (mag == 1) term = me;
        else term = mul(num(Rational(mag)), me);
        if (!acc) acc = c < 0 ? neg(term) : term;
        else acc = c < 0 ? sub(acc, term) : add(acc, term);
    }
    return acc;
}

Expr ratfunc_to_expr(const RatFunc& r, const std::vector<std::string>& vars) {
    Expr n = poly_to_expr(r.num, vars);
    if (r.den.is_constant() && r.den.constant_value() == 1) return n;
    return div(n, poly_to_expr(r.den, vars));
}

}  // namespace derivkit
