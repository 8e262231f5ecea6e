#include "codedlat/relaunch.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "codedlat/specfun.hpp"

namespace codedlat::relaunch {

namespace {

// alpha = P(memoryless phase shorter than the shift window) = 1 - e^{-mu c},
// computed without cancellation for small mu c.
double window_alpha(const ForkPlan& p) { return -std::expm1(-p.mu * p.c); }

// c [ 1 - alpha^{-r} + sum_{i=1}^{r} alpha^{i-r} / (i c mu) ]: mean of the
// r-th order statistic of r memoryless completions conditioned to fall
// inside a window of length c.
double window_order_stat_mean(int r, double c, double mu) {
    if (c == 0.0) return 0.0;
    double alpha = -std::expm1(-mu * c);
    double sum = 0.0;
    for (int i = 1; i <= r; ++i) sum += std::pow(alpha, i - r) / (i * c * mu);
    return c * (1.0 - std::pow(alpha, -r) + sum);
}

} // namespace

void check_plan(const ForkPlan& p) {
    auto fail = [](const std::string& what) {
        throw std::invalid_argument("relaunch plan: " + what);
    };
    if (p.n < 1) fail("total server count must be positive");
    if (p.k < 1 || p.k > p.n) fail("required chunk count must satisfy 1 <= k <= n");
    if (p.n0 < 1 || p.n0 > p.n) fail("initial server count must satisfy 1 <= n0 <= n");
    if (p.l0 < 1 || p.l0 > std::min(p.n0, p.k))
        fail("relaunch threshold must satisfy 1 <= l0 <= min(n0, k)");
    if (!(p.c >= 0.0)) fail("service shift must be non-negative");
    if (!(p.mu > 0.0)) fail("service rate must be positive");
    if (!(p.cost_rate >= 0.0)) fail("cost rate must be non-negative");
}

std::vector<double> completion_count_pmf(const ForkPlan& p) {
    check_plan(p);
    const int count = p.n0 - p.l0;
    const double alpha = window_alpha(p);
    const double beta = std::exp(-p.mu * p.c);
    std::vector<double> pmf((size_t)count + 1, 0.0);
    for (int m = 0; m <= count; ++m)
        pmf[(size_t)m] = specfun::binomial(count, m) * std::pow(alpha, m) *
                         std::pow(beta, count - m);
    return pmf;
}

double stage0_interservice_mean(int r, const ForkPlan& p) {
    check_plan(p);
    if (r < 1 || r > p.l0)
        throw std::invalid_argument("stage0_interservice_mean: r must be in [1, l0]");
    if (r == 1) return p.c + 1.0 / (p.mu * p.n0);
    return 1.0 / (p.mu * (p.n0 - r + 1));
}

double conditional_completion_mean(int r, int m, const ForkPlan& p) {
    check_plan(p);
    if (m < 1 || m > p.n0 - p.l0)
        throw std::invalid_argument("conditional_completion_mean: m must be in [1, n0 - l0]");
    if (r < 1 || r > m)
        throw std::invalid_argument("conditional_completion_mean: r must be in [1, m]");
    if (r == m) return window_order_stat_mean(r, p.c, p.mu);
    const double alpha = window_alpha(p);
    return specfun::hyp3f2(1.0, 1.0, r + 1.0, 2.0, m + 2.0, alpha) * r * alpha /
           (p.mu * (m + 1));
}

double stage1_interservice_mean(int r, const ForkPlan& p) {
    check_plan(p);
    if (p.n0 < p.k)
        throw std::invalid_argument("stage1_interservice_mean: the decode quorum is not "
                                    "reachable before the relaunch unless n0 >= k");
    if (p.l0 >= p.k)
        throw std::invalid_argument("stage1_interservice_mean: no completions remain after "
                                    "the relaunch when l0 == k");
    if (r < 1 || r > p.k - p.l0)
        throw std::invalid_argument("stage1_interservice_mean: r must be in [1, k - l0]");
    const std::vector<double> pmf = completion_count_pmf(p);
    const double alpha = window_alpha(p);
    double mean = 0.0;
    for (int m = 0; m < (int)pmf.size(); ++m) {
        double term;
        if (m + 1 < r) {
            // The r-th completion happens after the shift window with all
            // switched-on servers in their memoryless phase.
            term = 1.0 / (p.mu * (p.n - p.l0 - r + 1));
        } else if (m + 1 == r) {
            // The gap straddles the end of the shift window: the leftover of
            // the window beyond the (r-1)-th completion, plus one exponential
            // gap among the n - j survivors (j completions so far overall).
            const int j = m + p.l0;
            term = p.c - window_order_stat_mean(m, p.c, p.mu) + 1.0 / (p.mu * (p.n - j));
        } else if (r == 1) {
            // First completion inside the shift window.
            term = specfun::hyp2f1(1.0, r, m + 2.0, alpha) * r * alpha / (p.mu * (m + 1));
        } else {
            // Both endpoints inside the shift window: difference of the
            // conditional completion means.
            term = conditional_completion_mean(r, m, p) -
                   conditional_completion_mean(r - 1, m, p);
        }
        mean += pmf[(size_t)m] * term;
    }
    return mean;
}

double mean_forking_time(const ForkPlan& p) {
    check_plan(p);
    return p.c + specfun::harmonic(p.n0 - p.l0, p.n0, 1) / p.mu;
}

double mean_completion_time(const ForkPlan& p) {
    check_plan(p);
    const double t1 = mean_forking_time(p);
    if (p.n0 < p.k) {
        // The job can never finish on the initial servers alone: every run
        // passes through the full shift window of the relaunched servers.
        const std::vector<double> pmf = completion_count_pmf(p);
        double tail = 0.0;
        for (int m = 0; m < (int)pmf.size(); ++m) {
            const int j = m + p.l0;
            double inner = 0.0;
            for (int i = j; i <= p.k - 1; ++i) inner += 1.0 / (p.n - i);
            tail += pmf[(size_t)m] * inner;
        }
        return p.c + t1 + tail / p.mu;
    }
    if (p.l0 == p.k) return t1;
    double stage1 = 0.0;
    for (int r = 1; r <= p.k - p.l0; ++r) stage1 += stage1_interservice_mean(r, p);
    return t1 + stage1;
}

double mean_utilization_cost(const ForkPlan& p) {
    check_plan(p);
    if (p.n0 < p.k)
        return p.cost_rate * p.n * p.c + p.cost_rate * p.k / p.mu;
    const double stage0 = (p.cost_rate / p.mu) * (p.l0 + p.mu * p.n0 * p.c);
    if (p.l0 == p.k) return stage0;
    double stage1 = 0.0;
    for (int r = 1; r <= p.k - p.l0; ++r)
        stage1 += (p.n - p.l0 - r + 1) * stage1_interservice_mean(r, p);
    return stage0 + p.cost_rate * stage1;
}

std::vector<FrontierRow> tradeoff_frontier(int n, int k, double c, double mu,
                                           double cost_rate,
                                           const std::vector<int>& n0_grid,
                                           const std::vector<int>& l0_grid) {
    std::vector<FrontierRow> rows;
    rows.reserve(n0_grid.size() * l0_grid.size());
    for (int n0 : n0_grid) {
        for (int l0 : l0_grid) {
            ForkPlan p{n, k, n0, l0, c, mu, cost_rate};
            check_plan(p);
            FrontierRow row;
            row.n0 = n0;
            row.l0 = l0;
            row.mean_completion = mean_completion_time(p);
            row.mean_cost = mean_utilization_cost(p);
            rows.push_back(row);
        }
    }
    // Dominance with a relative tolerance so plans that are mathematically
    // tied (e.g. every launch threshold when n0 = n) are all kept efficient
    // instead of being knocked out by rounding noise in each other's favor.
    for (FrontierRow& row : rows) {
        const double tol_s = 1e-9 * std::max(1.0, std::abs(row.mean_completion));
        const double tol_w = 1e-9 * std::max(1.0, std::abs(row.mean_cost));
        row.pareto = true;
        for (const FrontierRow& other : rows) {
            const bool weakly_better = other.mean_completion <= row.mean_completion + tol_s &&
                                       other.mean_cost <= row.mean_cost + tol_w;
            const bool strictly_better = other.mean_completion < row.mean_completion - tol_s ||
                                         other.mean_cost < row.mean_cost - tol_w;
            if (weakly_better && strictly_better) {
                row.pareto = false;
                break;
            }
        }
    }
    return rows;
}

} // namespace codedlat::relaunch
