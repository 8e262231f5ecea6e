#pragma once

#include <cstddef>
#include <vector>

namespace codedlat::specfun {

// Generalized harmonic number: sum_{j=x+1}^{y} j^{-z}; 0 when x == y.
// Computed as a difference of ascending prefix sums so that the
// telescoping identity H_{x,y} = H_{0,y} - H_{0,x} holds exactly in
// floating point.
double harmonic(long x, long y, int z);

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;
};

// Mean/variance of the j-th order statistic of n i.i.d. Exp(mu) draws.
MeanVar exp_order_stat_moments(int n, int j, double mu);

// P(X_(j) <= x) for n i.i.d. draws given F = F_single(x):
// sum_{i=j}^{n} C(n,i) F^i (1-F)^{n-i}.
double order_stat_cdf(int n, int j, double F);

struct PfqSpec {
    std::vector<double> a; // numerator parameters
    std::vector<double> b; // denominator parameters; none may be a non-positive integer
    double z = 0.0;
    double tol = 1e-12;
    std::size_t max_terms = 1000000;
};

struct PfqResult {
    double value = 0.0;   // converged sum, or partial sum on failure
    std::size_t terms = 0;
    bool converged = false;
};

// Generalized hypergeometric series pFq(a; b; z) summed term by term.
// Stops once |term| < tol * max(1, |partial|) for three consecutive terms.
PfqResult hypergeometric_pFq(const PfqSpec& spec);

// Convenience wrappers for the two shapes used by the relaunch analysis.
double hyp2f1(double a1, double a2, double b1, double z, double tol = 1e-12);
double hyp3f2(double a1, double a2, double a3, double b1, double b2, double z, double tol = 1e-12);

// Adaptive quadrature of
//   int_0^c x e^{-mu x} (1-e^{-mu x})^q (e^{-mu x}-e^{-mu c})^{p-q}
//       / (1-e^{-mu c})^{p+2} dx
// to 1e-10 absolute. Serves as the numeric side of the series identity.
double integral_identity_lhs(int p, int q, double c, double mu);

// Lower incomplete gamma gamma(a, x) (non-regularized), series for
// x < a+1 and continued fraction otherwise.
double lower_incomplete_gamma(double a, double x);

// sup_{x in (0,1)} I_x(k, n+1-k) (1 - I_x(k, n+1-k)) / (x (1-x)), where
// I_x is the regularized incomplete beta function. Endpoint limits are
// handled analytically; the interior by golden-section refinement.
double cnk_constant(int n, int k);

// Helpers shared by the bounds modules.
double pochhammer(double a, int n);
double log_binomial(int n, int k);
double binomial(int n, int k);

} // namespace codedlat::specfun
