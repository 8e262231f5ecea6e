#include "codedlat/ps_bounds.hpp"

#include <algorithm>
#include <cmath>

#include "codedlat/search.hpp"
#include "codedlat/specfun.hpp"

namespace codedlat::ps {

namespace {

mg1::QueueInput server_queue(const Workload& wl, const std::vector<double>& lambda,
                             std::size_t server) {
    return mg1::queue_input(lambda[server], wl.cluster.servers[server].second);
}

BoundValue fail(mg1::Signal signal, std::string detail) {
    BoundValue b;
    b.signal = signal;
    b.detail = std::move(detail);
    return b;
}

// Servers carrying traffic of this file.
std::vector<std::size_t> used_servers(const Workload& wl, const AccessMatrix& pi,
                                      std::size_t file) {
    std::vector<std::size_t> used;
    for (std::size_t j = 0; j < wl.server_count(); ++j)
        if (pi.pi[file][j] > 0.0) used.push_back(j);
    return used;
}

using search::golden_min;

} // namespace

std::vector<ServerLoad> stability_check(const Workload& wl, const AccessMatrix& pi) {
    auto lambda = effective_arrival_rates(wl, pi);
    std::vector<ServerLoad> out(wl.server_count());
    for (std::size_t j = 0; j < wl.server_count(); ++j) {
        out[j].arrival_rate = lambda[j];
        out[j].rho = lambda[j] * wl.cluster.servers[j].second.mean();
        out[j].stable = out[j].rho < 1.0;
    }
    return out;
}

mg1::Result<double> feasible_t_sup(const Workload& wl, const AccessMatrix& pi,
                                   std::size_t server) {
    auto lambda = effective_arrival_rates(wl, pi);
    return mg1::feasible_t_sup(server_queue(wl, lambda, server));
}

BoundValue mean_latency_bound_mgf(const Workload& wl, const AccessMatrix& pi,
                                  std::size_t file, double t) {
    if (!(t > 0.0)) return fail(mg1::Signal::InfeasibleT, "t must be positive");
    auto lambda = effective_arrival_rates(wl, pi);
    double sum = 0.0;
    for (std::size_t j : used_servers(wl, pi, file)) {
        auto r = mg1::waiting_mgf(server_queue(wl, lambda, j), t, true);
        if (!r.ok())
            return fail(r.signal, "server '" + wl.cluster.servers[j].first + "'");
        sum += pi.pi[file][j] * r.value;
    }
    BoundValue b;
    b.value = std::log(sum) / t;
    return b;
}

BoundValue mean_latency_bound_moment(const Workload& wl, const AccessMatrix& pi,
                                     std::size_t file, double z) {
    auto lambda = effective_arrival_rates(wl, pi);
    double sum = 0.0;
    for (std::size_t j : used_servers(wl, pi, file)) {
        auto r = mg1::sojourn_moments(server_queue(wl, lambda, j));
        if (!r.ok())
            return fail(r.signal, "server '" + wl.cluster.servers[j].first + "'");
        double d = r.value.mean - z;
        sum += pi.pi[file][j] * (d + std::sqrt(d * d + r.value.variance));
    }
    BoundValue b;
    b.value = z + 0.5 * sum;
    return b;
}

OptimizedBound optimize_t(const Workload& wl, const AccessMatrix& pi, std::size_t file) {
    auto lambda = effective_arrival_rates(wl, pi);
    double t_max = std::numeric_limits<double>::infinity();
    for (std::size_t j : used_servers(wl, pi, file)) {
        auto r = mg1::feasible_t_sup(server_queue(wl, lambda, j));
        if (!r.ok()) {
            OptimizedBound out;
            out.bound = fail(r.signal, "server '" + wl.cluster.servers[j].first + "'");
            return out;
        }
        t_max = std::min(t_max, r.value);
    }
    const double eps = 1e-8;
    if (!(t_max > 2.0 * eps)) {
        OptimizedBound out;
        out.bound = fail(mg1::Signal::InfeasibleT, "empty feasible interval");
        return out;
    }
    auto objective = [&](double t) {
        auto b = mean_latency_bound_mgf(wl, pi, file, t);
        return b.ok() ? b.value : std::numeric_limits<double>::infinity();
    };
    auto [t_best, value] = golden_min(objective, eps, t_max - eps);
    OptimizedBound out;
    out.parameter = t_best;
    out.bound.value = value;
    return out;
}

OptimizedBound optimize_z(const Workload& wl, const AccessMatrix& pi, std::size_t file) {
    auto lambda = effective_arrival_rates(wl, pi);
    double z_hi = 0.0;
    for (std::size_t j : used_servers(wl, pi, file)) {
        auto r = mg1::sojourn_moments(server_queue(wl, lambda, j));
        if (!r.ok()) {
            OptimizedBound out;
            out.bound = fail(r.signal, "server '" + wl.cluster.servers[j].first + "'");
            return out;
        }
        z_hi = std::max(z_hi, r.value.mean + 3.0 * std::sqrt(std::max(0.0, r.value.variance)));
    }
    auto objective = [&](double z) {
        auto b = mean_latency_bound_moment(wl, pi, file, z);
        return b.ok() ? b.value : std::numeric_limits<double>::infinity();
    };
    // Convex in z: ternary search.
    double lo = 0.0, hi = std::max(z_hi, 1e-12);
    for (int i = 0; i < 300 && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (objective(m1) <= objective(m2))
            hi = m2;
        else
            lo = m1;
    }
    OptimizedBound out;
    out.parameter = 0.5 * (lo + hi);
    out.bound = mean_latency_bound_moment(wl, pi, file, out.parameter);
    return out;
}

BoundValue tail_probability_bound(const Workload& wl, const AccessMatrix& pi,
                                  std::size_t file, double sigma) {
    auto lambda = effective_arrival_rates(wl, pi);
    const double eps = 1e-8;
    double sum = 0.0;
    for (std::size_t j : used_servers(wl, pi, file)) {
        auto in = server_queue(wl, lambda, j);
        auto sup = mg1::feasible_t_sup(in);
        if (!sup.ok())
            return fail(sup.signal, "server '" + wl.cluster.servers[j].first + "'");
        if (!(sup.value > 2.0 * eps))
            return fail(mg1::Signal::InfeasibleT,
                        "server '" + wl.cluster.servers[j].first + "'");
        auto term = [&](double t) {
            auto r = mg1::waiting_mgf(in, t, true);
            return r.ok() ? std::exp(-t * sigma) * r.value
                          : std::numeric_limits<double>::infinity();
        };
        auto [t_best, value] = golden_min(term, eps, sup.value - eps);
        (void)t_best;
        sum += pi.pi[file][j] * value;
    }
    BoundValue b;
    b.raw = sum;
    b.clamped = sum > 1.0;
    b.value = std::min(1.0, sum);
    return b;
}

double independence_upper_ccdf(double tau, int n, int k, double lambda_task, double mu) {
    (void)n;
    if (tau <= 0.0) return 1.0;
    if (!(lambda_task < mu)) return 1.0;
    // Per-task sojourn is exponential(mu - lambda); the request needs the max
    // of k independent copies, so CCDF(tau) = 1 - (1 - e^{-(mu-lambda) tau})^k.
    double log_cdf = std::log1p(-std::exp(-(mu - lambda_task) * tau));
    return -std::expm1(static_cast<double>(k) * log_cdf);
}

double heavy_tail_waiting_ccdf(double x, double Lambda, double rho,
                               double x_m, double alpha, double mu) {
    if (Lambda <= 0.0) return 0.0;
    double ratio = mu * x / x_m;
    double v = alpha * std::pow(x_m / mu, alpha) * specfun::lower_incomplete_gamma(alpha, ratio);
    return (Lambda / (1.0 - rho)) * std::pow(x, 1.0 - alpha) / (alpha - 1.0) * v;
}

} // namespace codedlat::ps
