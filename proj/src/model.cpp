#include "codedlat/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "codedlat/specfun.hpp"

namespace codedlat {

ServiceModel ServiceModel::exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential rate must be positive");
    ServiceModel m;
    m.family_ = ServiceFamily::Exponential;
    m.rate_ = rate;
    return m;
}

ServiceModel ServiceModel::shifted_exponential(double shift, double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("shifted_exponential rate must be positive");
    if (shift < 0.0) throw std::invalid_argument("shifted_exponential shift must be nonnegative");
    ServiceModel m;
    m.family_ = ServiceFamily::ShiftedExponential;
    m.shift_ = shift;
    m.rate_ = rate;
    return m;
}

ServiceModel ServiceModel::deterministic(double value) {
    if (!(value > 0.0)) throw std::invalid_argument("deterministic value must be positive");
    ServiceModel m;
    m.family_ = ServiceFamily::Deterministic;
    m.value_ = value;
    return m;
}

ServiceModel ServiceModel::pareto_scaled_exponential(double shape, double scale, double unit_rate) {
    if (!(shape > 2.0)) throw std::invalid_argument("pareto shape must exceed 2 for finite variance");
    if (!(scale > 0.0)) throw std::invalid_argument("pareto scale must be positive");
    if (!(unit_rate > 0.0)) throw std::invalid_argument("unit_rate must be positive");
    ServiceModel m;
    m.family_ = ServiceFamily::ParetoScaledExponential;
    m.shape_ = shape;
    m.scale_ = scale;
    m.unit_rate_ = unit_rate;
    return m;
}

double ServiceModel::mean() const {
    switch (family_) {
    case ServiceFamily::Exponential: return 1.0 / rate_;
    case ServiceFamily::ShiftedExponential: return shift_ + 1.0 / rate_;
    case ServiceFamily::Deterministic: return value_;
    case ServiceFamily::ParetoScaledExponential:
        return shape_ * scale_ / ((shape_ - 1.0) * unit_rate_);
    }
    return 0.0;
}

double ServiceModel::variance() const {
    return second_moment() - mean() * mean();
}

double ServiceModel::second_moment() const {
    switch (family_) {
    case ServiceFamily::Exponential: return 2.0 / (rate_ * rate_);
    case ServiceFamily::ShiftedExponential: {
        double m1 = shift_ + 1.0 / rate_;
        return m1 * m1 + 1.0 / (rate_ * rate_);
    }
    case ServiceFamily::Deterministic: return value_ * value_;
    case ServiceFamily::ParetoScaledExponential:
        // E[(E C / r)^2] = E[E^2] E[C^2] / r^2 with E ~ Exp(1).
        return 2.0 * shape_ * scale_ * scale_ / ((shape_ - 2.0) * unit_rate_ * unit_rate_);
    }
    return 0.0;
}

double ServiceModel::mgf_domain() const {
    switch (family_) {
    case ServiceFamily::Exponential:
    case ServiceFamily::ShiftedExponential: return rate_;
    case ServiceFamily::Deterministic: return std::numeric_limits<double>::infinity();
    case ServiceFamily::ParetoScaledExponential: return 0.0;
    }
    return 0.0;
}

double ServiceModel::mgf(double t) const {
    switch (family_) {
    case ServiceFamily::Exponential:
        if (t >= rate_) throw std::domain_error("mgf undefined at t >= rate");
        return rate_ / (rate_ - t);
    case ServiceFamily::ShiftedExponential:
        if (t >= rate_) throw std::domain_error("mgf undefined at t >= rate");
        return std::exp(shift_ * t) * rate_ / (rate_ - t);
    case ServiceFamily::Deterministic:
        return std::exp(value_ * t);
    case ServiceFamily::ParetoScaledExponential:
        if (t != 0.0) throw std::domain_error("heavy-tailed service has no mgf away from 0");
        return 1.0;
    }
    return 1.0;
}

double ServiceModel::mgf_minus_one(double t) const {
    switch (family_) {
    case ServiceFamily::Exponential:
        if (t >= rate_) throw std::domain_error("mgf undefined at t >= rate");
        return t / (rate_ - t);
    case ServiceFamily::ShiftedExponential: {
        if (t >= rate_) throw std::domain_error("mgf undefined at t >= rate");
        // e^{bt} a/(a-t) - 1 split into two like-signed O(t) terms.
        double a_over = rate_ / (rate_ - t);
        return a_over * std::expm1(shift_ * t) + t / (rate_ - t);
    }
    case ServiceFamily::Deterministic:
        return std::expm1(value_ * t);
    case ServiceFamily::ParetoScaledExponential:
        if (t != 0.0) throw std::domain_error("heavy-tailed service has no mgf away from 0");
        return 0.0;
    }
    return 0.0;
}

double ServiceModel::cdf(double x) const {
    if (x < 0.0) return 0.0;
    switch (family_) {
    case ServiceFamily::Exponential:
        return -std::expm1(-rate_ * x);
    case ServiceFamily::ShiftedExponential:
        if (x < shift_) return 0.0;
        return -std::expm1(-rate_ * (x - shift_));
    case ServiceFamily::Deterministic:
        return x >= value_ ? 1.0 : 0.0;
    case ServiceFamily::ParetoScaledExponential: {
        if (x == 0.0) return 0.0;
        // P(T > y) = shape * (r y / scale)^{-shape} * gamma_low(shape, r y / scale)
        double ratio = unit_rate_ * x / scale_;
        double tail = shape_ * std::pow(ratio, -shape_) *
                      specfun::lower_incomplete_gamma(shape_, ratio);
        return 1.0 - std::min(1.0, tail);
    }
    }
    return 0.0;
}

double ServiceModel::sample(Rng& rng) const {
    switch (family_) {
    case ServiceFamily::Exponential:
        return rng.exponential(rate_);
    case ServiceFamily::ShiftedExponential:
        return shift_ + rng.exponential(rate_);
    case ServiceFamily::Deterministic:
        (void)rng.uniform(); // keep stream advance uniform across families
        return value_;
    case ServiceFamily::ParetoScaledExponential: {
        double u = rng.uniform_pos();
        double size = scale_ * std::pow(u, -1.0 / shape_);
        return rng.exponential(1.0) * size / unit_rate_;
    }
    }
    return 0.0;
}

std::optional<std::size_t> Cluster::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < servers.size(); ++i)
        if (servers[i].first == id) return i;
    return std::nullopt;
}

ValidationResult validate_workload(std::vector<FileSpec> files, Cluster cluster) {
    ValidationResult res;
    auto fail = [&res](std::string msg) { res.errors.push_back(std::move(msg)); };

    {
        std::set<std::string> seen;
        for (const auto& [id, model] : cluster.servers) {
            (void)model;
            if (id.empty()) fail("cluster: empty server id");
            if (!seen.insert(id).second) fail("cluster: duplicate server id '" + id + "'");
        }
        if (cluster.servers.empty()) fail("cluster: no servers");
    }

    std::vector<std::vector<std::size_t>> placements;
    std::set<std::string> file_ids;
    for (const auto& f : files) {
        std::ostringstream where;
        where << "file '" << f.id << "': ";
        if (f.id.empty()) fail("file with empty id");
        if (!file_ids.insert(f.id).second) fail(where.str() + "duplicate id");
        if (!(f.arrival_rate >= 0.0)) fail(where.str() + "arrival rate must be nonnegative");
        if (f.code.k < 1) fail(where.str() + "k must be at least 1");
        if (f.code.n < f.code.k) fail(where.str() + "n must be at least k");
        if (static_cast<int>(f.placement.size()) != f.code.n)
            fail(where.str() + "placement size must equal n");
        if (f.segments < 1) fail(where.str() + "segment count must be at least 1");
        if (f.segments > 1 && !(f.segment_seconds > 0.0))
            fail(where.str() + "segmented file needs positive segment duration");

        std::vector<std::size_t> idx;
        std::set<std::string> used;
        for (const auto& sid : f.placement) {
            if (!used.insert(sid).second) fail(where.str() + "placement repeats server '" + sid + "'");
            auto pos = cluster.index_of(sid);
            if (!pos) {
                fail(where.str() + "placement names unknown server '" + sid + "'");
            } else {
                idx.push_back(*pos);
            }
        }
        placements.push_back(std::move(idx));
    }

    if (!res.errors.empty()) return res;

    Workload wl;
    wl.files = std::move(files);
    wl.cluster = std::move(cluster);
    wl.placement_indices = std::move(placements);
    res.workload = std::move(wl);
    return res;
}

std::vector<std::string> check_access_matrix(const Workload& wl, const AccessMatrix& pi) {
    std::vector<std::string> errors;
    if (pi.pi.size() != wl.file_count()) {
        errors.push_back("access matrix row count does not match file count");
        return errors;
    }
    for (std::size_t i = 0; i < wl.file_count(); ++i) {
        const auto& row = pi.pi[i];
        const auto& f = wl.files[i];
        std::ostringstream where;
        where << "file '" << f.id << "': ";
        if (row.size() != wl.server_count()) {
            errors.push_back(where.str() + "row length does not match server count");
            continue;
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] < -1e-12 || row[j] > 1.0 + 1e-12) {
                std::ostringstream msg;
                msg << where.str() << "entry " << j << " outside [0,1]";
                errors.push_back(msg.str());
            }
            sum += row[j];
        }
        if (std::abs(sum - f.code.k) > 1e-9) {
            std::ostringstream msg;
            msg << where.str() << "row sum " << sum << " != k = " << f.code.k;
            errors.push_back(msg.str());
        }
        const auto& allowed = wl.placement_indices[i];
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] > 1e-12 &&
                std::find(allowed.begin(), allowed.end(), j) == allowed.end()) {
                std::ostringstream msg;
                msg << where.str() << "positive probability on server '"
                    << wl.cluster.servers[j].first << "' outside placement";
                errors.push_back(msg.str());
            }
        }
    }
    return errors;
}

std::vector<double> effective_arrival_rates(const Workload& wl, const AccessMatrix& pi) {
    std::vector<double> lambda(wl.server_count(), 0.0);
    for (std::size_t i = 0; i < wl.file_count(); ++i)
        for (std::size_t j = 0; j < wl.server_count(); ++j)
            lambda[j] += wl.files[i].arrival_rate * pi.pi[i][j];
    return lambda;
}

std::vector<std::size_t> sample_access_set(const std::vector<double>& pi_row, int k, Rng& rng) {
    const std::size_t m = pi_row.size();
    double sum = std::accumulate(pi_row.begin(), pi_row.end(), 0.0);
    if (std::abs(sum - k) > 1e-9)
        throw std::invalid_argument("access probabilities must sum to k");

    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = m; i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(i)]);

    // Systematic sampling: k points U, U+1, ..., U+k-1 land in the
    // cumulative-probability intervals of the permuted servers; a server is
    // selected iff its interval contains a point. Inclusion probability of
    // server j is exactly pi_row[j].
    double u = rng.uniform();
    std::vector<std::size_t> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    double lo = 0.0;
    for (std::size_t pos = 0; pos < m; ++pos) {
        double p = pi_row[perm[pos]];
        double hi = lo + p;
        double first = std::ceil(lo - u);
        if (first < 0.0) first = 0.0;
        if (first < k && u + first < hi && u + first >= lo - 1e-15)
            chosen.push_back(perm[pos]);
        lo = hi;
    }
    // Floating-point cumulative sums can drop or double-count a boundary
    // point; repair against the exact set size.
    if (static_cast<int>(chosen.size()) != k) {
        std::set<std::size_t> have(chosen.begin(), chosen.end());
        for (std::size_t j = 0; j < m && static_cast<int>(have.size()) < k; ++j)
            if (pi_row[j] > 0.0) have.insert(j);
        while (static_cast<int>(have.size()) > k) have.erase(std::prev(have.end()));
        chosen.assign(have.begin(), have.end());
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

} // namespace codedlat
