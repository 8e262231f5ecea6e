#include "codedlat/video.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "codedlat/search.hpp"

namespace codedlat::video {

namespace {

void check_server(const Workload& wl, std::size_t server) {
    if (server >= wl.server_count())
        throw std::invalid_argument("video: server index out of range");
}

void check_file(const Workload& wl, std::size_t file) {
    if (file >= wl.file_count()) throw std::invalid_argument("video: file index out of range");
}

void check_matrix_shape(const Workload& wl, const AccessMatrix& pi) {
    if (pi.pi.size() != wl.file_count())
        throw std::invalid_argument("video: access matrix row count mismatch");
    for (const auto& row : pi.pi)
        if (row.size() != wl.server_count())
            throw std::invalid_argument("video: access matrix column count mismatch");
}

// Z(t)^L - 1 without cancellation for small |t|.
double pow_mgf_minus_one(const ServiceModel& s, int segments, double t) {
    return std::expm1(static_cast<double>(segments) * std::log1p(s.mgf_minus_one(t)));
}

// Traffic mix routed to one server: per-file effective rate and length.
struct ServerMix {
    double total_rate = 0.0;
    std::vector<std::pair<double, int>> parts; // (pi_ij * lambda_i, L_i)
};

ServerMix server_mix(const Workload& wl, const AccessMatrix& pi, std::size_t server) {
    ServerMix mix;
    for (std::size_t f = 0; f < wl.file_count(); ++f) {
        const double w = pi.pi[f][server] * wl.files[f].arrival_rate;
        if (w > 0.0) {
            mix.total_rate += w;
            mix.parts.emplace_back(w, wl.files[f].segments);
        }
    }
    return mix;
}

// The video-level FIFO queue at one server: Poisson request arrivals, each
// request occupying the server for its file's full chunk sequence.
mg1::QueueInput video_queue_input(const Workload& wl, const AccessMatrix& pi,
                                  std::size_t server) {
    const ServiceModel service = wl.cluster.servers[server].second;
    ServerMix mix = server_mix(wl, pi, server);

    mg1::QueueInput in;
    in.arrival_rate = mix.total_rate;
    in.mgf_sup = service.mgf_domain();
    if (mix.total_rate > 0.0) {
        const double m1 = service.mean();
        const double var = service.variance();
        for (const auto& [w, L] : mix.parts) {
            const double p = w / mix.total_rate;
            in.mean += p * L * m1;
            in.second_moment += p * (L * var + static_cast<double>(L) * L * m1 * m1);
        }
    }
    in.mgf = [service, mix](double t) {
        if (mix.total_rate <= 0.0) return 1.0;
        double b = 0.0;
        for (const auto& [w, L] : mix.parts)
            b += (w / mix.total_rate) * (1.0 + pow_mgf_minus_one(service, L, t));
        return b;
    };
    in.mgf_minus_one = [service, mix](double t) {
        if (mix.total_rate <= 0.0) return 0.0;
        double b = 0.0;
        for (const auto& [w, L] : mix.parts)
            b += (w / mix.total_rate) * pow_mgf_minus_one(service, L, t);
        return b;
    };
    return in;
}

ps::BoundValue fail(mg1::Signal signal, std::string detail) {
    ps::BoundValue b;
    b.signal = signal;
    b.detail = std::move(detail);
    return b;
}

// Per-segment decay exponent log(M_j(t)) - t tau; the geometric aggregate
// ratio is its exponential, so the ratio is below one exactly when this is
// negative.
double decay_log(const ServiceModel& s, double t, double tau) {
    return std::log1p(s.mgf_minus_one(t)) - t * tau;
}

// Discounted geometric sum sum_{ell=1..L} exp(ell * lg), stable for lg of
// either sign and across the lg = 0 singularity of the ratio form.
double geometric_sum(double lg, int segments) {
    const double ratio_minus_one = std::expm1(lg);
    if (std::abs(ratio_minus_one) < 1e-13) {
        double total = 0.0;
        for (int ell = 1; ell <= segments; ++ell) total += std::exp(ell * lg);
        return total;
    }
    return (1.0 + ratio_minus_one) * std::expm1(segments * lg) / ratio_minus_one;
}

double stall_aggregate_from_queue(const mg1::QueueInput& in, const ServiceModel& service,
                                  int segments, double tau, double t, double startup_delay) {
    auto waiting = mg1::waiting_mgf(in, t, /*include_service=*/false);
    if (!waiting.ok())
        throw std::domain_error("video: waiting-time transform does not exist at t (" +
                                mg1::to_string(waiting.signal) + ")");
    const double lg = decay_log(service, t, tau);
    return std::exp(-t * (startup_delay - tau)) * waiting.value * geometric_sum(lg, segments);
}

// Largest usable t for the per-segment decay ratio (< 1) of one server:
// the decay exponent is convex with slope E[X] - tau at zero, so the
// feasible set is empty when the mean chunk time reaches the segment
// duration and otherwise an interval ending at the exponent's positive root
// (or the domain edge when the exponent stays negative).
double decay_t_sup(const ServiceModel& s, double tau) {
    if (!(s.mean() < tau)) return 0.0;
    double edge = s.mgf_domain();
    double hi;
    if (std::isinf(edge)) {
        hi = 1.0;
        bool crossed = false;
        while (hi <= 1e12) {
            if (decay_log(s, hi, tau) > 0.0) {
                crossed = true;
                break;
            }
            hi *= 2.0;
        }
        if (!crossed) return hi;
    } else {
        hi = edge * (1.0 - 1e-12);
        if (!(decay_log(s, hi, tau) > 0.0)) return edge;
    }
    // The exponent is negative just above zero and positive at hi.
    return search::bisect_last_true([&](double t) { return decay_log(s, t, tau) < 0.0; }, 0.0,
                                    hi);
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

void check_stall_args(const Workload& wl, std::size_t file, double t, double startup_delay) {
    if (!(t > 0.0)) throw std::invalid_argument("video: transform parameter must be positive");
    if (!(startup_delay >= 0.0))
        throw std::invalid_argument("video: startup delay must be non-negative");
    if (!(wl.files[file].segment_seconds > 0.0))
        throw std::invalid_argument("video: file's segment duration must be positive");
    if (wl.files[file].segments < 1)
        throw std::invalid_argument("video: file must have at least one segment");
}

// Shared body of the two stall bounds: per-server typed checks, then the
// weighted aggregate sum_j pi_ij (1 + H_ij) with an optional extra discount
// applied to H_ij.
ps::BoundValue weighted_aggregate(const Workload& wl, const AccessMatrix& pi, std::size_t file,
                                  double t, double startup_delay, double h_discount) {
    double sum = 0.0;
    for (std::size_t j : used_servers(wl, pi, file)) {
        const std::string& name = wl.cluster.servers[j].first;
        mg1::QueueInput in = video_queue_input(wl, pi, j);
        if (mg1::utilization(in) >= 1.0)
            return fail(mg1::Signal::Unstable, "server '" + name + "'");
        if (!(t < in.mgf_sup)) return fail(mg1::Signal::InfeasibleT, "server '" + name + "'");
        auto waiting = mg1::waiting_mgf(in, t, /*include_service=*/false);
        if (!waiting.ok()) return fail(waiting.signal, "server '" + name + "'");
        const ServiceModel& service = wl.cluster.servers[j].second;
        const double h =
            stall_aggregate_from_queue(in, service, wl.files[file].segments,
                                       wl.files[file].segment_seconds, t, startup_delay);
        sum += pi.pi[file][j] * (1.0 + h_discount * h);
    }
    ps::BoundValue out;
    out.raw = sum;
    out.value = sum;
    return out;
}

} // namespace

double aggregate_rate(const Workload& wl, const AccessMatrix& pi, std::size_t server) {
    check_matrix_shape(wl, pi);
    check_server(wl, server);
    return server_mix(wl, pi, server).total_rate;
}

double video_service_mgf(const Workload& wl, const AccessMatrix& pi, std::size_t server,
                         double t) {
    check_matrix_shape(wl, pi);
    check_server(wl, server);
    mg1::QueueInput in = video_queue_input(wl, pi, server);
    if (in.arrival_rate <= 0.0)
        throw std::invalid_argument("video: no traffic reaches server '" +
                                    wl.cluster.servers[server].first +
                                    "', service mixture undefined");
    return in.mgf(t);
}

double video_rho(const Workload& wl, const AccessMatrix& pi, std::size_t server) {
    check_matrix_shape(wl, pi);
    check_server(wl, server);
    const double mean = wl.cluster.servers[server].second.mean();
    double rho = 0.0;
    for (std::size_t f = 0; f < wl.file_count(); ++f)
        rho += pi.pi[f][server] * wl.files[f].arrival_rate * wl.files[f].segments * mean;
    return rho;
}

double segment_download_mgf(const Workload& wl, const AccessMatrix& pi, std::size_t server,
                            int ell, double t) {
    check_matrix_shape(wl, pi);
    check_server(wl, server);
    if (ell < 1) throw std::invalid_argument("video: segment index must be positive");
    mg1::QueueInput in = video_queue_input(wl, pi, server);
    auto waiting = mg1::waiting_mgf(in, t, /*include_service=*/false);
    if (!waiting.ok())
        throw std::domain_error("video: waiting-time transform does not exist at t (" +
                                mg1::to_string(waiting.signal) + ")");
    const ServiceModel& service = wl.cluster.servers[server].second;
    return waiting.value * (1.0 + pow_mgf_minus_one(service, ell, t));
}

double stall_mgf_aggregate(const Workload& wl, const AccessMatrix& pi, std::size_t file,
                           std::size_t server, double t, double startup_delay) {
    check_matrix_shape(wl, pi);
    check_file(wl, file);
    check_server(wl, server);
    check_stall_args(wl, file, t, startup_delay);
    mg1::QueueInput in = video_queue_input(wl, pi, server);
    return stall_aggregate_from_queue(in, wl.cluster.servers[server].second,
                                      wl.files[file].segments, wl.files[file].segment_seconds,
                                      t, startup_delay);
}

double play_time_stall(const std::vector<double>& segment_download_times, double startup_delay,
                       double tau) {
    if (segment_download_times.empty())
        throw std::invalid_argument("video: at least one segment download time required");
    if (!(tau > 0.0)) throw std::invalid_argument("video: segment duration must be positive");
    if (!(startup_delay >= 0.0))
        throw std::invalid_argument("video: startup delay must be non-negative");
    double play = std::max(startup_delay, segment_download_times[0]);
    for (std::size_t q = 1; q < segment_download_times.size(); ++q)
        play = std::max(play + tau, segment_download_times[q]);
    const double scheduled =
        startup_delay + (static_cast<double>(segment_download_times.size()) - 1.0) * tau;
    // The play-out can never finish before its schedule; clamp away the
    // rounding dust the incremental tau accumulation can leave behind.
    return std::max(0.0, play - scheduled);
}

ps::BoundValue mean_stall_bound(const Workload& wl, const AccessMatrix& pi, std::size_t file,
                                double t, double startup_delay) {
    check_matrix_shape(wl, pi);
    check_file(wl, file);
    check_stall_args(wl, file, t, startup_delay);
    ps::BoundValue agg = weighted_aggregate(wl, pi, file, t, startup_delay, 1.0);
    if (!agg.ok()) return agg;
    ps::BoundValue out;
    out.raw = agg.raw;
    out.value = std::log(agg.raw) / t;
    return out;
}

ps::BoundValue stall_tail_bound(const Workload& wl, const AccessMatrix& pi, std::size_t file,
                                double x, double t, double startup_delay) {
    check_matrix_shape(wl, pi);
    check_file(wl, file);
    check_stall_args(wl, file, t, startup_delay);
    if (!(x >= 0.0)) throw std::invalid_argument("video: tail threshold must be non-negative");
    const double horizon =
        startup_delay + (wl.files[file].segments - 1.0) * wl.files[file].segment_seconds;
    ps::BoundValue agg =
        weighted_aggregate(wl, pi, file, t, startup_delay, std::exp(-t * horizon));
    if (!agg.ok()) return agg;
    ps::BoundValue out;
    out.raw = std::exp(-t * x) * agg.raw;
    out.value = std::min(1.0, out.raw);
    out.clamped = out.raw > 1.0;
    return out;
}

mg1::Result<double> feasible_t_sup(const Workload& wl, const AccessMatrix& pi,
                                   std::size_t file, bool require_decay) {
    check_matrix_shape(wl, pi);
    check_file(wl, file);
    if (!(wl.files[file].segment_seconds > 0.0))
        throw std::invalid_argument("video: file's segment duration must be positive");
    const std::vector<std::size_t> used = used_servers(wl, pi, file);
    if (used.empty()) return {0.0, mg1::Signal::InfeasibleT};
    double sup = std::numeric_limits<double>::infinity();
    for (std::size_t j : used) {
        mg1::QueueInput in = video_queue_input(wl, pi, j);
        auto r = mg1::feasible_t_sup(in);
        if (!r.ok()) return {0.0, r.signal};
        sup = std::min(sup, r.value);
        if (require_decay) {
            const double d =
                decay_t_sup(wl.cluster.servers[j].second, wl.files[file].segment_seconds);
            if (!(d > 0.0)) return {0.0, mg1::Signal::InfeasibleT};
            sup = std::min(sup, d);
        }
    }
    if (!(sup > 0.0)) return {0.0, mg1::Signal::InfeasibleT};
    return {sup, mg1::Signal::Ok};
}

namespace {

template <class Objective>
ps::OptimizedBound optimize_over_t(const Workload& wl, const AccessMatrix& pi,
                                   std::size_t file, Objective&& objective) {
    auto sup = feasible_t_sup(wl, pi, file, /*require_decay=*/true);
    ps::OptimizedBound out;
    if (!sup.ok()) {
        out.bound = fail(sup.signal, "no usable transform parameter");
        return out;
    }
    const double eps = 1e-8;
    if (!(sup.value > 2.0 * eps)) {
        out.bound = fail(mg1::Signal::InfeasibleT, "empty feasible interval");
        return out;
    }
    auto value_at = [&](double t) {
        ps::BoundValue b = objective(t);
        return b.ok() ? b.value : std::numeric_limits<double>::infinity();
    };
    auto [t_best, value] = golden_min(value_at, eps, sup.value - eps);
    out.parameter = t_best;
    out.bound = objective(t_best);
    (void)value;
    return out;
}

} // namespace

ps::OptimizedBound optimize_mean_stall(const Workload& wl, const AccessMatrix& pi,
                                       std::size_t file, double startup_delay) {
    return optimize_over_t(wl, pi, file, [&](double t) {
        return mean_stall_bound(wl, pi, file, t, startup_delay);
    });
}

ps::OptimizedBound optimize_stall_tail(const Workload& wl, const AccessMatrix& pi,
                                       std::size_t file, double x, double startup_delay) {
    return optimize_over_t(wl, pi, file, [&](double t) {
        return stall_tail_bound(wl, pi, file, x, t, startup_delay);
    });
}

} // namespace codedlat::video
