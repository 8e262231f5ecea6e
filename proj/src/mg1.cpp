#include "codedlat/mg1.hpp"

#include <cmath>
#include <stdexcept>

namespace codedlat::mg1 {

std::string to_string(Signal s) {
    switch (s) {
    case Signal::Ok: return "ok";
    case Signal::Unstable: return "unstable";
    case Signal::InfeasibleT: return "infeasible-t";
    case Signal::DomainError: return "domain-error";
    }
    return "unknown";
}

QueueInput queue_input(double arrival_rate, const ServiceModel& service) {
    QueueInput in;
    in.arrival_rate = arrival_rate;
    in.mgf = [service](double t) { return service.mgf(t); };
    in.mgf_minus_one = [service](double t) { return service.mgf_minus_one(t); };
    in.mgf_sup = service.mgf_domain();
    in.mean = service.mean();
    in.second_moment = service.second_moment();
    return in;
}

double utilization(const QueueInput& in) {
    return in.arrival_rate * in.mean;
}

Result<double> pk_mean_response(double arrival_rate, double mean, double second_moment) {
    double rho = arrival_rate * mean;
    if (rho >= 1.0) return {0.0, Signal::Unstable};
    double wait = arrival_rate * second_moment / (2.0 * (1.0 - rho));
    return {mean + wait, Signal::Ok};
}

Result<double> pk_mean_response(const QueueInput& in) {
    return pk_mean_response(in.arrival_rate, in.mean, in.second_moment);
}

namespace {

// Evaluates t - L (Z(t) - 1); positive exactly on the feasible range.
Result<double> denom_at(const QueueInput& in, double t) {
    if (t >= in.mgf_sup) return {0.0, Signal::InfeasibleT};
    double zm1;
    try {
        zm1 = in.mgf_minus_one ? in.mgf_minus_one(t) : in.mgf(t) - 1.0;
    } catch (const std::domain_error&) {
        return {0.0, Signal::DomainError};
    }
    return {t - in.arrival_rate * zm1, Signal::Ok};
}

} // namespace

Result<double> waiting_mgf(const QueueInput& in, double t, bool include_service) {
    double rho = utilization(in);
    if (rho >= 1.0) return {0.0, Signal::Unstable};
    if (t == 0.0) return {1.0, Signal::Ok};

    auto denom = denom_at(in, t);
    if (!denom.ok()) return denom;
    if (t > 0.0 && denom.value <= 0.0) return {0.0, Signal::InfeasibleT};

    double numer = (1.0 - rho) * t;
    if (include_service) {
        double z;
        try {
            z = in.mgf(t);
        } catch (const std::domain_error&) {
            return {0.0, Signal::DomainError};
        }
        numer *= z;
    }
    return {numer / denom.value, Signal::Ok};
}

Result<MeanVar> waiting_moments(const QueueInput& in) {
    double rho = utilization(in);
    if (rho >= 1.0) return {{}, Signal::Unstable};
    if (!(in.mgf_sup > 0.0)) return {{}, Signal::DomainError};

    MeanVar mv;
    mv.mean = in.arrival_rate * in.second_moment / (2.0 * (1.0 - rho));

    // Variance from the cumulant transform K(t) = log M_W(t): K''(0).
    // Central second difference with Richardson extrapolation in h.
    auto logm = [&in](double t) -> Result<double> {
        auto r = waiting_mgf(in, t, false);
        if (!r.ok()) return r;
        return {std::log(r.value), Signal::Ok};
    };
    auto second_diff = [&](double h) -> Result<double> {
        auto up = logm(h);
        if (!up.ok()) return up;
        auto dn = logm(-h);
        if (!dn.ok()) return dn;
        return {(up.value + dn.value) / (h * h), Signal::Ok};
    };

    double h = 1e-5;
    if (in.mgf_sup < std::numeric_limits<double>::infinity())
        h = std::min(h, in.mgf_sup / 16.0);
    // Near saturation the feasible interval can be narrower than the step;
    // shrink until both stencil points evaluate.
    for (int shrink = 0; shrink < 24; ++shrink, h *= 0.5) {
        auto coarse = second_diff(h);
        if (coarse.signal == Signal::InfeasibleT) continue;
        if (!coarse.ok()) return {{}, coarse.signal};
        auto fine = second_diff(h / 2.0);
        if (!fine.ok()) return {{}, fine.signal};
        mv.variance = (4.0 * fine.value - coarse.value) / 3.0;
        return {mv, Signal::Ok};
    }
    return {{}, Signal::InfeasibleT};
}

Result<MeanVar> sojourn_moments(const QueueInput& in) {
    auto w = waiting_moments(in);
    if (!w.ok()) return w;
    w.value.mean += in.mean;
    w.value.variance += in.second_moment - in.mean * in.mean;
    return w;
}

Result<double> feasible_t_sup(const QueueInput& in) {
    double rho = utilization(in);
    if (rho >= 1.0) return {0.0, Signal::Unstable};
    if (!(in.mgf_sup > 0.0)) return {0.0, Signal::DomainError};

    // g(t) = t - L (Z(t) - 1) is positive near 0+ when rho < 1 and concave
    // in t; the feasible set is (0, t*) with t* either the transform domain
    // edge or the positive root of g.
    double hi = in.mgf_sup;
    if (std::isinf(hi)) {
        hi = 1.0;
        while (true) {
            auto g = denom_at(in, hi);
            if (!g.ok() || g.value <= 0.0) break;
            hi *= 2.0;
            if (hi > 1e12) return {hi, Signal::Ok};
        }
    }

    double lo = 0.0;
    // Walk lo up to a strictly feasible point to anchor the bisection.
    bool anchored = false;
    for (double t = hi * 0.5; t > hi * 1e-15; t *= 0.5) {
        auto g = denom_at(in, t);
        if (g.ok() && g.value > 0.0) {
            lo = t;
            anchored = true;
            break;
        }
        hi = t;
    }
    if (!anchored) return {0.0, Signal::InfeasibleT};

    for (int iter = 0; iter < 2000 && hi - lo > 1e-12 * std::max(1.0, hi); ++iter) {
        double mid = 0.5 * (lo + hi);
        auto g = denom_at(in, mid);
        if (g.ok() && g.value > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return {lo, Signal::Ok};
}

} // namespace codedlat::mg1
