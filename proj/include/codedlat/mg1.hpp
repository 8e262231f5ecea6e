#pragma once

#include <functional>
#include <limits>
#include <string>

#include "codedlat/model.hpp"

namespace codedlat::mg1 {

// Typed outcome for queueing formulas that can fail for structural reasons.
// Unstable: offered load at or above capacity. InfeasibleT: transform
// argument outside the region where the queue transform converges (distinct
// from instability so callers can react differently). DomainError: the
// service law itself has no transform at the requested point.
enum class Signal {
    Ok,
    Unstable,
    InfeasibleT,
    DomainError,
};

std::string to_string(Signal s);

template <typename T>
struct Result {
    T value{};
    Signal signal = Signal::Ok;
    bool ok() const { return signal == Signal::Ok; }
};

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;
};

// Single queue with Poisson arrivals at rate `arrival_rate` and service law
// described by its transform Z(t) (valid for t < mgf_sup) plus first two
// moments.
struct QueueInput {
    double arrival_rate = 0.0;
    std::function<double(double)> mgf;
    // Z(t) - 1, stable near t = 0. Defaults to mgf(t) - 1 if unset.
    std::function<double(double)> mgf_minus_one;
    double mgf_sup = std::numeric_limits<double>::infinity();
    double mean = 0.0;
    double second_moment = 0.0;
};

QueueInput queue_input(double arrival_rate, const ServiceModel& service);

double utilization(const QueueInput& in);

// Mean response time (wait + service) of the FIFO queue,
// E[S] + L E[S^2] / (2 (1 - rho)).
Result<double> pk_mean_response(double arrival_rate, double mean, double second_moment);
Result<double> pk_mean_response(const QueueInput& in);

// Transform of the stationary waiting time; with include_service the
// sojourn-time transform (1-rho) t Z(t) / (t - L (Z(t) - 1)).
Result<double> waiting_mgf(const QueueInput& in, double t, bool include_service);

// Mean and variance of the waiting time (excluding service), the variance
// via a Richardson-extrapolated central difference of the log-transform.
Result<MeanVar> waiting_moments(const QueueInput& in);

// Same for the sojourn time: waiting plus an independent service draw.
Result<MeanVar> sojourn_moments(const QueueInput& in);

// Supremum of t > 0 with t - L (Z(t) - 1) > 0 and t inside the service
// transform domain; the usable argument range for tail exponents.
Result<double> feasible_t_sup(const QueueInput& in);

} // namespace codedlat::mg1
