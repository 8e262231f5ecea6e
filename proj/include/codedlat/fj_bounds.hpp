#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace codedlat::fj {

// Closed-form bound evaluation. A bound can be structurally infeasible
// (its validity condition fails before the true stability limit); in that
// case `condition` names the violated predicate and `lambda_max` gives the
// largest arrival rate at which the bound is still defined, so callers can
// report "invalid beyond lambda* = ...".
struct Bound {
    double value = 0.0;
    bool feasible = false;
    std::string condition;
    double lambda_max = std::numeric_limits<double>::infinity();
};

// All-fork system on n homogeneous exponential(mu) servers, done at the
// k-th finish. Upper bound: block all n servers until the batch completes
// (an M/G/1 whose service time is the k-th order statistic).
Bound upper_exp(int n, int k, double lambda, double mu);

// Lower bound: k sequential stages, stage j served at rate at most (n-j)mu.
Bound lower_exp(int n, int k, double lambda, double mu);

// Tandem-queue approximation: stage j rate (n-j)mu - (k-j-1)lambda.
Bound approx_exp(int n, int k, double lambda, double mu);

// General service with mean 1/mu' passed as `mean` and standard deviation
// sigma; order-statistic moment bounds plus the variance constant from
// cnk_constant.
Bound upper_general(int n, int k, double lambda, double mean, double sigma);

// Shifted-exponential service Sexp(beta, alpha): first stage is the M/G/1
// on the minimum of n copies, Sexp(beta, n alpha); later stages are
// exponential at rate (n-j) alpha.
Bound lower_sexp(int n, int k, double lambda, double beta, double alpha);

// Heterogeneous multi-file forms: r files on the same n servers, file i
// needing k_i completions, size l_i, per-unit-size exponential rate mu, so
// its per-server rate is mu_i = k_i mu / l_i.
struct HeteroFile {
    double arrival_rate = 0.0;
    int k = 1;
    double size = 1.0;
};

bool hetero_stable(const std::vector<HeteroFile>& files, int n, double mu);
Bound hetero_upper(std::size_t file_index, const std::vector<HeteroFile>& files, int n, double mu);
Bound hetero_lower(std::size_t file_index, const std::vector<HeteroFile>& files, int n, double mu);

} // namespace codedlat::fj
