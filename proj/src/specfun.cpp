#include "codedlat/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace codedlat::specfun {

namespace {

double prefix_harmonic(long y, int z) {
    double s = 0.0;
    for (long j = 1; j <= y; ++j) s += 1.0 / std::pow(static_cast<double>(j), z);
    return s;
}

bool is_nonpositive_integer(double v) {
    return v <= 0.0 && v == std::floor(v);
}

} // namespace

double harmonic(long x, long y, int z) {
    if (x < 0 || y < x || z < 1) throw std::invalid_argument("harmonic: need 0 <= x <= y, z >= 1");
    return prefix_harmonic(y, z) - prefix_harmonic(x, z);
}

MeanVar exp_order_stat_moments(int n, int j, double mu) {
    if (j < 1 || j > n || mu <= 0.0)
        throw std::invalid_argument("exp_order_stat_moments: need 1 <= j <= n, mu > 0");
    // X_(j) - X_(j-1) are independent Exp((n-j+1) mu) gaps, so the j-th
    // order statistic accumulates harmonic sums over the top n-j+1 ranks.
    return {harmonic(n - j, n, 1) / mu, harmonic(n - j, n, 2) / (mu * mu)};
}

double order_stat_cdf(int n, int j, double F) {
    if (j < 1 || j > n) throw std::invalid_argument("order_stat_cdf: need 1 <= j <= n");
    if (F < 0.0 || F > 1.0) throw std::invalid_argument("order_stat_cdf: F outside [0,1]");
    if (F == 0.0) return 0.0;
    if (F == 1.0) return 1.0;
    double total = 0.0;
    for (int i = j; i <= n; ++i)
        total += std::exp(log_binomial(n, i) + i * std::log(F) + (n - i) * std::log1p(-F));
    return std::min(1.0, total);
}

PfqResult hypergeometric_pFq(const PfqSpec& spec) {
    for (double b : spec.b)
        if (is_nonpositive_integer(b))
            throw std::invalid_argument("hypergeometric_pFq: denominator parameter is a non-positive integer");
    if (spec.tol <= 0.0) throw std::invalid_argument("hypergeometric_pFq: tolerance must be positive");

    PfqResult out;
    double term = 1.0;
    double sum = 1.0;
    int calm = 0; // consecutive terms below tolerance
    std::size_t n = 0;
    while (n < spec.max_terms) {
        double ratio = spec.z / static_cast<double>(n + 1);
        for (double a : spec.a) ratio *= a + static_cast<double>(n);
        for (double b : spec.b) ratio /= b + static_cast<double>(n);
        term *= ratio;
        sum += term;
        ++n;
        if (std::abs(term) < spec.tol * std::max(1.0, std::abs(sum))) {
            if (++calm >= 3) {
                out.value = sum;
                out.terms = n;
                out.converged = true;
                return out;
            }
        } else {
            calm = 0;
        }
    }
    out.value = sum;
    out.terms = n;
    out.converged = false;
    return out;
}

double hyp2f1(double a1, double a2, double b1, double z, double tol) {
    PfqSpec s;
    s.a = {a1, a2};
    s.b = {b1};
    s.z = z;
    s.tol = tol;
    return hypergeometric_pFq(s).value;
}

double hyp3f2(double a1, double a2, double a3, double b1, double b2, double z, double tol) {
    PfqSpec s;
    s.a = {a1, a2, a3};
    s.b = {b1, b2};
    s.z = z;
    s.tol = tol;
    return hypergeometric_pFq(s).value;
}

double integral_identity_lhs(int p, int q, double c, double mu) {
    if (p < 0 || q < 0 || q > p || c <= 0.0 || mu <= 0.0)
        throw std::invalid_argument("integral_identity_lhs: need 0 <= q <= p, c > 0, mu > 0");
    const double emc = std::exp(-mu * c);
    const double denom = std::pow(1.0 - emc, p + 2);
    auto f = [&](double x) {
        const double e = std::exp(-mu * x);
        return x * e * std::pow(1.0 - e, q) * std::pow(std::max(0.0, e - emc), p - q) / denom;
    };
    double error = 0.0;
    double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, 0.0, c, 12, 1e-12, &error);
    if (!(error < 1e-10 * std::max(1.0, std::abs(value))))
        throw std::runtime_error("integral_identity_lhs: quadrature did not reach tolerance");
    return value;
}

double lower_incomplete_gamma(double a, double x) {
    if (a <= 0.0) throw std::invalid_argument("lower_incomplete_gamma: need a > 0");
    if (x < 0.0) throw std::invalid_argument("lower_incomplete_gamma: need x >= 0");
    if (x == 0.0) return 0.0;

    if (x < a + 1.0) {
        // gamma(a,x) = x^a e^{-x} sum_n x^n / (a (a+1) ... (a+n))
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 10000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(a * std::log(x) - x);
    }
    // Upper gamma via Lentz continued fraction, then subtract from Gamma(a).
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    double upper = std::exp(a * std::log(x) - x) * h;
    return std::tgamma(a) - upper;
}

namespace {

// f(x) = I_x (1 - I_x) / (x (1-x)) with I_x = I_x(k, n+1-k).
double cnk_objective(int n, int k, double x) {
    const double I = order_stat_cdf(n, k, x); // I_x(k, n+1-k) = P(Bin(n,x) >= k)
    return I * (1.0 - I) / (x * (1.0 - x));
}

} // namespace

double cnk_constant(int n, int k) {
    if (k < 1 || k > n) throw std::invalid_argument("cnk_constant: need 1 <= k <= n");
    // Endpoint limits from the leading beta-series term:
    //   x -> 0: I_x ~ C(n,k) x^k, so the ratio -> n for k = 1 and 0 otherwise.
    //   x -> 1: 1-I_x ~ C(n,k-1) (1-x)^{n-k+1}, ratio -> n for k = n and 0 otherwise.
    double best = 0.0;
    if (k == 1) best = std::max(best, static_cast<double>(n));
    if (k == n) best = std::max(best, static_cast<double>(n));

    // Coarse log-spaced scan toward both endpoints plus a uniform interior
    // grid, refined by golden-section around the best bracket.
    std::vector<double> grid;
    for (int e = 1; e <= 12; ++e) {
        grid.push_back(std::pow(10.0, -e));
        grid.push_back(1.0 - std::pow(10.0, -e));
    }
    for (int i = 1; i < 200; ++i) grid.push_back(i / 200.0);
    std::sort(grid.begin(), grid.end());

    double best_x = 0.5;
    double best_interior = -1.0;
    for (double x : grid) {
        double v = cnk_objective(n, k, x);
        if (v > best_interior) {
            best_interior = v;
            best_x = x;
        }
    }
    // Golden-section around the best grid point.
    double lo = std::max(1e-13, best_x - 0.01);
    double hi = std::min(1.0 - 1e-13, best_x + 0.01);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c1 = hi - gr * (hi - lo);
    double c2 = lo + gr * (hi - lo);
    double f1 = cnk_objective(n, k, c1);
    double f2 = cnk_objective(n, k, c2);
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        if (f1 < f2) {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + gr * (hi - lo);
            f2 = cnk_objective(n, k, c2);
        } else {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - gr * (hi - lo);
            f1 = cnk_objective(n, k, c1);
        }
    }
    best_interior = std::max(best_interior, std::max(f1, f2));
    return std::max(best, best_interior);
}

double pochhammer(double a, int n) {
    double p = 1.0;
    for (int i = 0; i < n; ++i) p *= a + i;
    return p;
}

double log_binomial(int n, int k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    // Exact in double for every (n,k) the models use.
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

} // namespace codedlat::specfun
