#pragma once

#include <cstddef>
#include <vector>

#include "codedlat/mg1.hpp"
#include "codedlat/model.hpp"
#include "codedlat/ps_bounds.hpp"

// Stall-duration analytics for streamed, erasure-coded video. A request for
// file i fans out to servers chosen by the access matrix; each chosen server
// queues the file's L_i chunk services FIFO behind earlier requests. Segment
// q can play once its chunks are downloaded and segment q-1 has played; the
// stall duration is the total playback interruption beyond the startup delay.
namespace codedlat::video {

// Aggregate request rate seen by one server under the access matrix.
double aggregate_rate(const Workload& wl, const AccessMatrix& pi, std::size_t server);

// MGF of the per-request service time at one server: the mixture, over files
// routed there, of the file's full L_i-chunk service. Requires t below the
// server's MGF domain edge (throws std::domain_error otherwise) and a
// positive aggregate rate (throws std::invalid_argument when no traffic
// reaches the server, since the mixture weights are then undefined).
double video_service_mgf(const Workload& wl, const AccessMatrix& pi, std::size_t server,
                         double t);

// Utilization of one server under streaming load:
// sum_i pi_ij lambda_i L_i E[chunk time].
double video_rho(const Workload& wl, const AccessMatrix& pi, std::size_t server);

// MGF of the download completion time of the ell-th chunk of a request at one
// server: waiting transform times ell chunk-service transforms,
// (1 - rho_j) t M_j(t)^ell / (t - sum_f pi_fj lambda_f (M_j(t)^{L_f} - 1)).
// Throws std::domain_error when t is outside the transform's existence range.
double segment_download_mgf(const Workload& wl, const AccessMatrix& pi, std::size_t server,
                            int ell, double t);

// Discounted aggregate of segment-download MGFs for one file at one server:
// sum_{ell=1..L_i} e^{-t(startup + (ell-1) tau)} Z^(ell)(t), evaluated by the
// geometric closed form, with a direct-sum fallback at the removable
// singularity where the per-segment decay ratio M_j(t) e^{-t tau} equals 1.
double stall_mgf_aggregate(const Workload& wl, const AccessMatrix& pi, std::size_t file,
                           std::size_t server, double t, double startup_delay);

// Total stall duration of one replay: play times follow
// T(1) = max(startup, D(1)), T(q) = max(T(q-1) + tau, D(q)), and the stall is
// T(L) - startup - (L-1) tau.
double play_time_stall(const std::vector<double>& segment_download_times,
                       double startup_delay, double tau);

// Upper bound on the mean stall duration of one file at transform parameter
// t > 0: (1/t) log sum_j pi_ij (1 + H_ij). Signals Unstable when a used
// server's utilization reaches 1 and InfeasibleT when t leaves the transform
// domain of a used server.
ps::BoundValue mean_stall_bound(const Workload& wl, const AccessMatrix& pi, std::size_t file,
                                double t, double startup_delay);

// Upper bound on Pr(stall >= x) at transform parameter t > 0, clamped to 1
// (raw value preserved): sum_j pi_ij e^{-tx} (1 + e^{-t(startup+(L-1)tau)} H_ij).
ps::BoundValue stall_tail_bound(const Workload& wl, const AccessMatrix& pi, std::size_t file,
                                double x, double t, double startup_delay);

// Supremum of usable transform parameters for one file over its used
// servers: below every MGF domain edge, keeping every waiting-time
// denominator positive, and (when require_decay is set, as the bound
// optimization demands) keeping every per-segment decay ratio below one.
// Signals Unstable on an overloaded server and InfeasibleT when no positive
// t qualifies (e.g. a used server's mean chunk time reaches the segment
// duration while decay is required).
mg1::Result<double> feasible_t_sup(const Workload& wl, const AccessMatrix& pi,
                                   std::size_t file, bool require_decay);

// Golden-section minimization of the two bounds over the feasible t range
// (decay constraints included, keeping the geometric aggregate summable).
ps::OptimizedBound optimize_mean_stall(const Workload& wl, const AccessMatrix& pi,
                                       std::size_t file, double startup_delay);
ps::OptimizedBound optimize_stall_tail(const Workload& wl, const AccessMatrix& pi,
                                       std::size_t file, double x, double startup_delay);

} // namespace codedlat::video
