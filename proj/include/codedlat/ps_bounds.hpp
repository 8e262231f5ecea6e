#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "codedlat/mg1.hpp"
#include "codedlat/model.hpp"

namespace codedlat::ps {

// Per-server offered load under an access matrix.
struct ServerLoad {
    double arrival_rate = 0.0; // aggregate chunk-request rate
    double rho = 0.0;
    bool stable = false;
};

std::vector<ServerLoad> stability_check(const Workload& wl, const AccessMatrix& pi);

// Largest usable transform argument at one server under the matrix's load.
mg1::Result<double> feasible_t_sup(const Workload& wl, const AccessMatrix& pi,
                                   std::size_t server);

// Bound evaluation outcome. `raw` keeps the unclamped value when a
// probability bound exceeded 1; `detail` names the offending server on a
// typed failure.
struct BoundValue {
    double value = 0.0;
    mg1::Signal signal = mg1::Signal::Ok;
    std::string detail;
    double raw = std::numeric_limits<double>::quiet_NaN();
    bool clamped = false;
    bool ok() const { return signal == mg1::Signal::Ok; }
};

// Mean-latency bound via the transform of the per-server sojourn times:
// (1/t) log sum_j pi_j (1-rho_j) t Z_j(t) / (t - L_j (Z_j(t)-1)).
BoundValue mean_latency_bound_mgf(const Workload& wl, const AccessMatrix& pi,
                                  std::size_t file, double t);

// Moment form: z + 1/2 sum_j pi_j [E_j - z + sqrt((E_j - z)^2 + Var_j)]
// over the per-server sojourn moments.
BoundValue mean_latency_bound_moment(const Workload& wl, const AccessMatrix& pi,
                                     std::size_t file, double z);

struct OptimizedBound {
    double parameter = 0.0; // best t (transform bound) or z (moment bound)
    BoundValue bound;
};

// Golden-section search of the transform bound over the shared feasible
// interval of the file's servers.
OptimizedBound optimize_t(const Workload& wl, const AccessMatrix& pi, std::size_t file);

// Ternary search of the moment bound over z (the objective is convex).
OptimizedBound optimize_z(const Workload& wl, const AccessMatrix& pi, std::size_t file);

// Chernoff tail bound Pr(latency >= sigma), each server's exponent
// optimized independently; clamped to 1.
BoundValue tail_probability_bound(const Workload& wl, const AccessMatrix& pi,
                                  std::size_t file, double sigma);

// CCDF of the independent-tasks upper bound for uniform dispatch of k-task
// jobs over n exponential servers: 1 - (1 - e^{-(mu - lambda_task) tau})^k.
// n only scopes the regime (k tasks drawn from n queues); the limit curve
// depends on k and the per-queue load alone.
double independence_upper_ccdf(double tau, int n, int k, double lambda_task, double mu);

// Heavy-tail waiting-time approximation for Pareto(shape alpha, scale x_m)
// chunk sizes served at unit rate mu under load (Lambda, rho):
// (Lambda/(1-rho)) x^{1-alpha}/(alpha-1) V(x), V(x) the slowly varying
// prefactor of the service tail.
double heavy_tail_waiting_ccdf(double x, double Lambda, double rho,
                               double x_m, double alpha, double mu);

} // namespace codedlat::ps
