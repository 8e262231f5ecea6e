#include "codedlat/fj_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "codedlat/specfun.hpp"

namespace codedlat::fj {

namespace {

void require_code(int n, int k) {
    if (k < 1 || n < k) throw std::invalid_argument("need 1 <= k <= n");
}

Bound infeasible(const std::string& condition, double lambda_max) {
    Bound b;
    b.feasible = false;
    b.condition = condition;
    b.lambda_max = lambda_max;
    return b;
}

Bound ok(double value, double lambda_max) {
    Bound b;
    b.value = value;
    b.feasible = true;
    b.lambda_max = lambda_max;
    return b;
}

} // namespace

Bound upper_exp(int n, int k, double lambda, double mu) {
    require_code(n, k);
    double h1 = specfun::harmonic(n - k, n, 1);
    double h2 = specfun::harmonic(n - k, n, 2);
    double lambda_max = mu / h1;
    if (lambda >= lambda_max)
        return infeasible("load times mean order-statistic service reaches 1", lambda_max);
    double rho = lambda / mu;
    double value = h1 / mu +
                   lambda * (h2 + h1 * h1) / (2.0 * mu * mu * (1.0 - rho * h1));
    return ok(value, lambda_max);
}

Bound lower_exp(int n, int k, double lambda, double mu) {
    require_code(n, k);
    double lambda_max = (n - k + 1) * mu;
    if (lambda >= lambda_max)
        return infeasible("slowest stage rate (n-k+1)mu reached", lambda_max);
    double value = 0.0;
    for (int j = 0; j < k; ++j)
        value += 1.0 / ((n - j) * mu - lambda);
    return ok(value, lambda_max);
}

Bound approx_exp(int n, int k, double lambda, double mu) {
    require_code(n, k);
    double lambda_max = static_cast<double>(n) * mu / k;
    if (lambda >= lambda_max)
        return infeasible("k lambda reaches n mu", lambda_max);
    double value = 0.0;
    for (int j = 0; j < k; ++j)
        value += 1.0 / ((n - j) * mu - (k - j) * lambda);
    return ok(value, lambda_max);
}

Bound upper_general(int n, int k, double lambda, double mean, double sigma) {
    require_code(n, k);
    double es = mean + sigma * std::sqrt(static_cast<double>(k - 1) / (n - k + 1));
    double lambda_max = 1.0 / es;
    if (lambda >= lambda_max)
        return infeasible("load times order-statistic mean bound reaches 1", lambda_max);
    double var_bound = specfun::cnk_constant(n, k) * sigma * sigma;
    double value = es + lambda * (es * es + var_bound) / (2.0 * (1.0 - lambda * es));
    return ok(value, lambda_max);
}

Bound lower_sexp(int n, int k, double lambda, double beta, double alpha) {
    require_code(n, k);
    // First stage: every server still working, so the first finish is
    // Sexp(beta, n alpha); its queue is M/G/1.
    double e1 = beta + 1.0 / (n * alpha);
    double v1 = 1.0 / (n * alpha) / (n * alpha);
    double lambda_max = 1.0 / e1;
    if (k >= 2) lambda_max = std::min(lambda_max, (n - k + 1) * alpha);
    if (lambda >= lambda_max)
        return infeasible("first-stage load or a later stage rate reached", lambda_max);
    double value = e1 + lambda * (e1 * e1 + v1) / (2.0 * (1.0 - lambda * e1));
    // Later stages: the shift is already paid, completions are exponential
    // at rate (n-j) alpha.
    for (int j = 1; j < k; ++j)
        value += 1.0 / ((n - j) * alpha - lambda);
    return ok(value, lambda_max);
}

bool hetero_stable(const std::vector<HeteroFile>& files, int n, double mu) {
    double sum_klam = 0.0, sum_load = 0.0, sum_lam = 0.0;
    for (const auto& f : files) {
        sum_klam += f.k * f.arrival_rate;
        sum_load += f.arrival_rate * f.size / f.k;
        sum_lam += f.arrival_rate;
    }
    if (sum_lam == 0.0) return true;
    return sum_klam * sum_load < n * mu * sum_lam;
}

Bound hetero_upper(std::size_t file_index, const std::vector<HeteroFile>& files,
                   int n, double mu) {
    if (file_index >= files.size()) throw std::invalid_argument("file index out of range");
    double s_r = 0.0, wait_num = 0.0;
    for (const auto& f : files) {
        require_code(n, f.k);
        double mu_i = f.k * mu / f.size;
        double h1 = specfun::harmonic(n - f.k, n, 1);
        double h2 = specfun::harmonic(n - f.k, n, 2);
        s_r += (f.arrival_rate / mu_i) * h1;
        wait_num += f.arrival_rate * (h2 + h1 * h1) / (mu_i * mu_i);
    }
    if (s_r >= 1.0)
        return infeasible("aggregate blocked-service load reaches 1",
                          std::numeric_limits<double>::quiet_NaN());
    const auto& fi = files[file_index];
    double mu_i = fi.k * mu / fi.size;
    double value = specfun::harmonic(n - fi.k, n, 1) / mu_i + wait_num / (2.0 * (1.0 - s_r));
    return ok(value, std::numeric_limits<double>::infinity());
}

Bound hetero_lower(std::size_t file_index, const std::vector<HeteroFile>& files,
                   int n, double mu) {
    if (file_index >= files.size()) throw std::invalid_argument("file index out of range");
    const std::size_t r = files.size();

    // The stage ladder assumes k_1 <= ... <= k_r; sort indices and track
    // where the requested file lands.
    std::vector<std::size_t> order(r);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&files](std::size_t a, std::size_t b) { return files[a].k < files[b].k; });

    std::vector<double> rate(r); // per-server service rate of each sorted class
    std::vector<double> lam(r);
    std::vector<int> ks(r);
    std::size_t pos = r;
    for (std::size_t s = 0; s < r; ++s) {
        const auto& f = files[order[s]];
        require_code(n, f.k);
        rate[s] = f.k * mu / f.size;
        lam[s] = f.arrival_rate;
        ks[s] = f.k;
        if (order[s] == file_index) pos = s;
    }

    const auto& fi = files[file_index];
    double value = 0.0;
    for (int s = 1; s <= fi.k; ++s) {
        // Classes already finished before stage s are those with k_j < s.
        std::size_t finished = 0;
        while (finished < r && ks[finished] < s) ++finished;
        double stage_rate_i = (n - s + 1) * rate[pos];
        double load = 0.0, excess = 0.0;
        for (std::size_t j = finished; j < r; ++j) {
            if (lam[j] <= 0.0) continue;
            double t_sj = lam[j] / ((n - s + 1) * rate[j]);
            load += t_sj;
            excess += t_sj * t_sj / lam[j];
        }
        if (load >= 1.0)
            return infeasible("stage load reaches 1",
                              std::numeric_limits<double>::quiet_NaN());
        value += 1.0 / stage_rate_i + excess / (1.0 - load);
    }
    return ok(value, std::numeric_limits<double>::infinity());
}

} // namespace codedlat::fj
