#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "codedlat/rng.hpp"

namespace codedlat {

struct CodeSpec {
    int n = 1; // coded chunks
    int k = 1; // chunks needed to reconstruct
};

enum class ServiceFamily {
    Exponential,
    ShiftedExponential,
    Deterministic,
    ParetoScaledExponential,
};

// Per-server chunk service-time law. All times in seconds, rates in 1/s.
// ParetoScaledExponential models a Pareto(shape, scale)-distributed chunk
// size served at unit_rate bytes/s with an exponential time fluctuation:
// T = Exp(1) * size / unit_rate, which has a power tail of index `shape`.
class ServiceModel {
public:
    static ServiceModel exponential(double rate);
    static ServiceModel shifted_exponential(double shift, double rate);
    static ServiceModel deterministic(double value);
    static ServiceModel pareto_scaled_exponential(double shape, double scale, double unit_rate);

    ServiceFamily family() const { return family_; }
    double rate() const { return rate_; }
    double shift() const { return shift_; }
    double value() const { return value_; }
    double shape() const { return shape_; }
    double scale() const { return scale_; }
    double unit_rate() const { return unit_rate_; }

    double mean() const;
    double variance() const;
    double second_moment() const;

    // Moment generating function E[e^{tX}]. Defined for t < mgf_domain();
    // the heavy-tailed family admits no t > 0. Throws std::domain_error
    // outside the domain.
    double mgf(double t) const;
    double mgf_domain() const;

    // Z(t) - 1 evaluated without cancellation for small |t|; queueing
    // denominators of the form t - L (Z(t) - 1) depend on this precision.
    double mgf_minus_one(double t) const;

    double cdf(double x) const;

    // Inverse-CDF draw; every family consumes a fixed number of uniforms,
    // so streams are reproducible across platforms.
    double sample(Rng& rng) const;

private:
    ServiceFamily family_ = ServiceFamily::Exponential;
    double rate_ = 1.0;      // exponential tail rate
    double shift_ = 0.0;     // shifted-exponential offset
    double value_ = 0.0;     // deterministic value
    double shape_ = 0.0;     // Pareto shape (> 2)
    double scale_ = 0.0;     // Pareto scale x_m
    double unit_rate_ = 1.0; // service speed for sized chunks
};

struct FileSpec {
    std::string id;
    double arrival_rate = 0.0; // lambda_i, 1/s
    CodeSpec code;
    std::vector<std::string> placement; // server ids, |placement| == code.n
    int segments = 1;                   // L_i; 1 for plain files
    double segment_seconds = 0.0;       // tau
};

struct Cluster {
    std::vector<std::pair<std::string, ServiceModel>> servers;
    std::optional<std::size_t> index_of(const std::string& id) const;
};

// Immutable after validation; index maps resolve ids to dense indices.
struct Workload {
    std::vector<FileSpec> files;
    Cluster cluster;
    std::vector<std::vector<std::size_t>> placement_indices; // per file

    std::size_t server_count() const { return cluster.servers.size(); }
    std::size_t file_count() const { return files.size(); }
};

struct ValidationResult {
    std::optional<Workload> workload;
    std::vector<std::string> errors;
    bool ok() const { return workload.has_value(); }
};

ValidationResult validate_workload(std::vector<FileSpec> files, Cluster cluster);

// Access probabilities: rows follow workload file order, columns cluster
// server order. Row sums equal k_i within 1e-9 and entries vanish off the
// file's placement.
struct AccessMatrix {
    std::vector<std::vector<double>> pi;
};

std::vector<std::string> check_access_matrix(const Workload& wl, const AccessMatrix& pi);

std::vector<double> effective_arrival_rates(const Workload& wl, const AccessMatrix& pi);

// Draws a k-subset of {0..m-1} whose inclusion probability of index j is
// exactly pi_row[j] (systematic sampling over a uniformly random
// permutation). Requires sum(pi_row) == k within 1e-9.
std::vector<std::size_t> sample_access_set(const std::vector<double>& pi_row, int k, Rng& rng);

} // namespace codedlat
