#pragma once

// Discrete-event simulation of coded storage clusters under the scheduling
// policies covered by the analytic modules: per-server FIFO dispatch with
// fork-join or randomized chunk placement, shared-buffer batch queues with
// a reservation window, redundant-request flooding with cancellation, the
// single-job delayed-fork experiment, and whole-video segment replay.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "codedlat/model.hpp"
#include "codedlat/relaunch.hpp"

namespace codedlat::sim {

enum class PolicyKind {
    ForkJoin,          // every placed server gets a chunk; cancel on k-th finish
    Probabilistic,     // k-subset of servers drawn from access probabilities
    MdsReservation,    // shared buffer, window t, distinct-server rule
    MkMn,              // shared buffer, window t, pooled servers (no rule)
    RedundantFlood,    // shared buffer, full window, v chunks, cancel at k
    DelayedSingleFork, // isolated single-job relaunch experiment
    VideoProbabilistic // per-segment replay over drawn access sets
};

std::string to_string(PolicyKind kind);

struct PolicyConfig {
    PolicyKind kind = PolicyKind::Probabilistic;

    // Probabilistic / VideoProbabilistic: per-file access probabilities.
    AccessMatrix pi;

    // MdsReservation / MkMn: reservation window. 0 means batches start only
    // when a full set of k servers is idle; use a large value for the plain
    // unreserved queue.
    int reservation = 1;

    // RedundantFlood: chunks issued per request (k <= v <= n).
    int redundant = 0;

    // DelayedSingleFork: the single-job experiment plan.
    relaunch::ForkPlan fork_plan;

    // VideoProbabilistic: startup (buffering) delay d_s, seconds.
    double startup_delay = 0.0;

    // Cancellation semantics: when true (the default), cancelling a batch
    // aborts chunks already in service, the wasted time counting toward
    // utilization; when false only queued chunks are withdrawn and running
    // chunks finish normally.
    bool abort_in_service = true;
};

// Throws std::invalid_argument when the policy parameters do not fit the
// workload (bad v, negative window, missing access rows, ...).
void validate_policy(const Workload& wl, const PolicyConfig& policy);

struct SimOptions {
    std::size_t jobs = 10000;        // total requests to generate
    std::ptrdiff_t warmup = -1;      // requests excluded from stats; -1 = 10%
    std::uint64_t seed = 1;
    std::vector<double> ccdf_thresholds; // empirical tail evaluation points
    bool collect_samples = false;    // keep per-request samples in the report
    double divergence_ceiling = std::numeric_limits<double>::infinity();
};

struct SampleStats {
    std::size_t count = 0;
    double mean = 0.0;
    double ci99 = 0.0; // normal-approximation 99% half-width, 0 if count < 2
    double min = 0.0;
    double max = 0.0;
};

struct CcdfPoint {
    double threshold = 0.0;
    double probability = 0.0; // fraction of samples >= threshold
    double wilson_low = 0.0;  // 99% Wilson interval
    double wilson_high = 0.0;
};

struct SimReport {
    SampleStats overall;                // latency (or stall) across files
    std::vector<SampleStats> per_file;
    std::vector<CcdfPoint> ccdf;        // at SimOptions::ccdf_thresholds
    std::vector<double> utilization;    // per-server busy fraction
    std::size_t jobs_completed = 0;
    std::vector<std::string> warnings;  // instability / divergence notes
    std::vector<double> samples;        // when SimOptions::collect_samples
};

// Runs one simulation: `jobs` Poisson requests over the workload under the
// policy, FIFO queues per kind, statistics over post-warmup requests.
// Identical (workload, policy, options) always produce an identical report.
// Throws std::invalid_argument on invalid policy/options or a workload with
// no arrivals.
SimReport run_scenario(const Workload& wl, const PolicyConfig& policy,
                       const SimOptions& options);

// Pools `replications` independent runs (seed derived per replication) into
// one report; replications execute in parallel over `threads` without
// changing the merged result.
SimReport run_replications(const Workload& wl, const PolicyConfig& policy,
                           const SimOptions& options, std::size_t replications, int threads = 1);

// Per-segment video replay: requests draw k-subsets from `pi`, every chosen
// server streams the file's whole chunk sequence FIFO, and each request's
// stall duration is measured with the play-time recursion. Equivalent to
// run_scenario with a VideoProbabilistic policy.
SimReport video_replay(const Workload& wl, const AccessMatrix& pi, double startup_delay,
                       const SimOptions& options);

struct PolicyCurve {
    std::string label;
    std::vector<double> arrival_rate;  // grid, one entry per point
    std::vector<double> mean_latency;
    std::vector<double> ci99;
    std::vector<bool> diverged;        // mean above the configured ceiling
};

struct NamedPolicy {
    std::string label;
    PolicyConfig policy;
};

// Sweeps each policy over the arrival-rate grid (every file's rate set to
// the grid value) and tabulates mean latency per point. Grid points run
// in parallel over `threads` with per-point seeds, so the table does not
// depend on the thread count.
std::vector<PolicyCurve> compare_policies(const Workload& wl,
                                          const std::vector<NamedPolicy>& policies,
                                          const std::vector<double>& lambda_grid,
                                          const SimOptions& options, int threads = 1);

struct FloodPoint {
    int redundant = 0; // v
    double mean_latency = 0.0;
    double ci99 = 0.0;
};

// Mean latency of a homogeneous (n, k) shared-buffer queue at each
// redundancy level v in `v_grid`: requests fan out to v distinct servers
// and finish (cancelling leftovers) on the k-th chunk completion. Each
// grid point reuses the same seed.
std::vector<FloodPoint> redundant_flood_experiment(int n, int k, const std::vector<int>& v_grid,
                                                   double lambda, double mu, std::size_t jobs,
                                                   std::uint64_t seed);

struct ForkMonteCarlo {
    double mean_completion = 0.0; // E[S] estimate
    double completion_se = 0.0;   // standard error of the mean
    double mean_cost = 0.0;       // E[W] estimate
    double cost_se = 0.0;
    std::size_t reps = 0;
};

// Monte Carlo of the single-job delayed fork: n0 chunks start at time zero,
// the remaining n - n0 start at the l0-th completion, the job completes at
// the k-th completion overall, and running chunks are cancelled there. The
// cost is the summed server busy time (shift included) times the cost rate.
// Replications are independent streams, so `threads` never changes the
// estimates.
ForkMonteCarlo single_fork_monte_carlo(const relaunch::ForkPlan& plan, std::size_t reps,
                                       std::uint64_t seed, int threads = 1);

// Empirical tail P(X >= threshold) with 99% Wilson score intervals.
// Throws std::invalid_argument when samples is empty.
std::vector<CcdfPoint> empirical_ccdf(const std::vector<double>& samples,
                                      const std::vector<double>& thresholds);

// Normal-approximation summary of a sample set (99% half-width).
SampleStats summarize(const std::vector<double>& samples);

} // namespace codedlat::sim
