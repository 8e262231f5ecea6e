#pragma once

#include <vector>

namespace codedlat::relaunch {

// Single job served by forked redundant requests with one relaunch point:
// n0 servers start at time zero on distinct chunks of an (n, k) code, each
// with a shifted-exponential service time (shift c, rate mu).  When l0 chunks
// have completed (time t1), the remaining n - n0 servers are switched on.
// The job completes at the k-th chunk overall (time t2), when all outstanding
// work is cancelled.  Cost accrues at cost_rate per active server-second.
struct ForkPlan {
    int n = 0;              // total servers
    int k = 0;              // chunk completions required
    int n0 = 0;             // servers active from time zero
    int l0 = 0;             // completions that trigger the relaunch
    double c = 0.0;         // service-time shift, seconds
    double mu = 0.0;        // memoryless-phase rate, 1/seconds
    double cost_rate = 1.0; // cost per server-second
};

// Throws std::invalid_argument unless 1 <= l0 <= min(n0, k), k <= n, n0 <= n,
// c >= 0, mu > 0, cost_rate >= 0.
void check_plan(const ForkPlan& plan);

// Distribution of the number of leftover initial servers that finish inside
// the shift window (t1, t1 + c]; entry m in {0, ..., n0 - l0}.
std::vector<double> completion_count_pmf(const ForkPlan& plan);

// Mean gap between the (r-1)-th and r-th completions before the relaunch
// point, 1 <= r <= l0.
double stage0_interservice_mean(int r, const ForkPlan& plan);

// Mean time from the relaunch point to its r-th following completion, given
// that exactly m initial servers finish inside the shift window;
// 1 <= r <= m <= n0 - l0.
double conditional_completion_mean(int r, int m, const ForkPlan& plan);

// Unconditional mean gap between the (r-1)-th and r-th completions after the
// relaunch point, 1 <= r <= k - l0 (requires l0 < k).
double stage1_interservice_mean(int r, const ForkPlan& plan);

// Mean relaunch time E[t1] = c + (1/mu) (H_{n0} - H_{n0-l0}).
double mean_forking_time(const ForkPlan& plan);

// Mean job completion time E[t2].
double mean_completion_time(const ForkPlan& plan);

// Mean total server-utilization cost E[W], including still-shifted servers
// and cancellation at completion.
double mean_utilization_cost(const ForkPlan& plan);

struct FrontierRow {
    int n0 = 0;
    int l0 = 0;
    double mean_completion = 0.0;
    double mean_cost = 0.0;
    bool pareto = false; // no other row is at least as good in both metrics
};

// Full (n0, l0) grid of (E[S], E[W]) pairs with the Pareto-efficient rows
// flagged. Grid points must each form a valid plan.
std::vector<FrontierRow> tradeoff_frontier(int n, int k, double c, double mu,
                                           double cost_rate,
                                           const std::vector<int>& n0_grid,
                                           const std::vector<int>& l0_grid);

} // namespace codedlat::relaunch
