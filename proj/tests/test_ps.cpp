#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "codedlat/mg1.hpp"
#include "codedlat/model.hpp"
#include "codedlat/ps_bounds.hpp"

using namespace codedlat;

namespace {

// Single-file workload over the given servers; pi_row must sum to k.
Workload make_workload(std::vector<ServiceModel> servers, double lambda, int n, int k) {
    Cluster cluster;
    for (std::size_t j = 0; j < servers.size(); ++j)
        cluster.servers.emplace_back("s" + std::to_string(j), servers[j]);
    FileSpec file;
    file.id = "f0";
    file.arrival_rate = lambda;
    file.code = {n, k};
    for (int j = 0; j < n; ++j) file.placement.push_back("s" + std::to_string(j));
    auto v = validate_workload({file}, cluster);
    REQUIRE(v.ok());
    return *v.workload;
}

AccessMatrix single_row(std::vector<double> row) {
    AccessMatrix pi;
    pi.pi.push_back(std::move(row));
    return pi;
}

// Twelve-server heterogeneous cluster used across the mean/tail bound
// checks: shifted-exponential service, 10 ms shift, per-server rates below.
const std::vector<double> kClusterRates = {18.23, 24.06, 11.88, 17.06, 20.19, 23.91,
                                           27.01, 21.39, 9.92,  24.96, 26.53, 21.80};

Cluster reference_cluster() {
    Cluster cluster;
    for (std::size_t j = 0; j < kClusterRates.size(); ++j)
        cluster.servers.emplace_back("node" + std::to_string(j + 1),
                                     ServiceModel::shifted_exponential(0.01, kClusterRates[j]));
    return cluster;
}

// 1000 files coded (12,7) across the reference cluster, uniform access
// probabilities 7/12; first half arrives at 0.002/s, second at 0.003/s.
struct ReferenceScenario {
    Workload wl;
    AccessMatrix pi;
};

ReferenceScenario reference_scenario() {
    Cluster cluster = reference_cluster();
    std::vector<FileSpec> files(1000);
    for (std::size_t i = 0; i < files.size(); ++i) {
        files[i].id = "f" + std::to_string(i);
        files[i].arrival_rate = i < 500 ? 0.002 : 0.003;
        files[i].code = {12, 7};
        for (std::size_t j = 0; j < cluster.servers.size(); ++j)
            files[i].placement.push_back(cluster.servers[j].first);
    }
    auto v = validate_workload(std::move(files), cluster);
    REQUIRE(v.ok());
    AccessMatrix pi;
    pi.pi.assign(1000, std::vector<double>(12, 7.0 / 12.0));
    REQUIRE(check_access_matrix(*v.workload, pi).empty());
    return {*v.workload, pi};
}

} // namespace

TEST_CASE("per-server load and stability flags") {
    SUBCASE("zero arrivals are always stable") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 0.0, 1, 1);
        auto loads = ps::stability_check(wl, single_row({1.0}));
        REQUIRE(loads.size() == 1);
        CHECK(loads[0].arrival_rate == 0.0);
        CHECK(loads[0].rho == 0.0);
        CHECK(loads[0].stable);
    }
    SUBCASE("overloaded single server") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 2.0, 1, 1);
        auto loads = ps::stability_check(wl, single_row({1.0}));
        CHECK(loads[0].rho == doctest::Approx(2.0));
        CHECK_FALSE(loads[0].stable);
    }
    SUBCASE("reference scenario matches direct arithmetic") {
        auto sc = reference_scenario();
        auto loads = ps::stability_check(sc.wl, sc.pi);
        REQUIRE(loads.size() == 12);
        double total = 500 * 0.002 + 500 * 0.003;
        for (std::size_t j = 0; j < 12; ++j) {
            double lambda_j = (7.0 / 12.0) * total;
            double rho_j = lambda_j * (0.01 + 1.0 / kClusterRates[j]);
            CHECK(loads[j].arrival_rate == doctest::Approx(lambda_j).epsilon(1e-12));
            CHECK(loads[j].rho == doctest::Approx(rho_j).epsilon(1e-12));
            CHECK(loads[j].stable);
        }
    }
}

TEST_CASE("feasible transform range per server") {
    SUBCASE("no load: range ends at the transform domain edge") {
        auto wl = make_workload({ServiceModel::shifted_exponential(0.01, 20.0)}, 0.0, 1, 1);
        auto r = ps::feasible_t_sup(wl, single_row({1.0}), 0);
        REQUIRE(r.ok());
        CHECK(r.value == doctest::Approx(20.0).epsilon(1e-9));
    }
    SUBCASE("exponential service: root at mu - lambda") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 0.5, 1, 1);
        auto r = ps::feasible_t_sup(wl, single_row({1.0}), 0);
        REQUIRE(r.ok());
        CHECK(r.value == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("shifted-exponential root is sign-bracketed") {
        auto model = ServiceModel::shifted_exponential(0.01, 20.0);
        auto wl = make_workload({model}, 5.0, 1, 1);
        auto r = ps::feasible_t_sup(wl, single_row({1.0}), 0);
        REQUIRE(r.ok());
        auto g = [&](double t) { return t - 5.0 * model.mgf_minus_one(t); };
        CHECK(g(r.value - 1e-9) > 0.0);
        CHECK(g(r.value + 1e-9) < 0.0);
    }
    SUBCASE("overload reported as a typed failure") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 2.0, 1, 1);
        auto r = ps::feasible_t_sup(wl, single_row({1.0}), 0);
        CHECK(r.signal == mg1::Signal::Unstable);
    }
}

TEST_CASE("transform mean bound") {
    SUBCASE("single exponential server: small t recovers the exact mean") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 0.5, 1, 1);
        auto pi = single_row({1.0});
        auto b = ps::mean_latency_bound_mgf(wl, pi, 0, 1e-6);
        REQUIRE(b.ok());
        // Exact M/M/1 mean sojourn at mu=1, lambda=0.5 is 1/(mu-lambda) = 2.
        CHECK(b.value == doctest::Approx(2.0).epsilon(1e-4));
        // And matches the queueing oracle, not just the closed form.
        auto in = mg1::queue_input(0.5, wl.cluster.servers[0].second);
        auto moments = mg1::sojourn_moments(in);
        REQUIRE(moments.ok());
        CHECK(b.value == doctest::Approx(moments.value.mean).epsilon(1e-4));
    }
    SUBCASE("two identical servers split evenly match one at half the load") {
        double mu = 1.0, lambda = 1.0;
        auto two = make_workload({ServiceModel::exponential(mu), ServiceModel::exponential(mu)},
                                 lambda, 2, 1);
        auto one = make_workload({ServiceModel::exponential(mu)}, lambda / 2.0, 1, 1);
        auto pi_two = single_row({0.5, 0.5});
        auto pi_one = single_row({1.0});
        for (double t : {0.05, 0.2, 0.4}) {
            auto b2 = ps::mean_latency_bound_mgf(two, pi_two, 0, t);
            auto b1 = ps::mean_latency_bound_mgf(one, pi_one, 0, t);
            REQUIRE(b2.ok());
            REQUIRE(b1.ok());
            CHECK(b2.value == doctest::Approx(b1.value).epsilon(1e-12));
        }
        auto o2 = ps::optimize_t(two, pi_two, 0);
        auto o1 = ps::optimize_t(one, pi_one, 0);
        REQUIRE(o2.bound.ok());
        REQUIRE(o1.bound.ok());
        CHECK(o2.parameter == doctest::Approx(o1.parameter).epsilon(1e-9));
        CHECK(o2.bound.value == doctest::Approx(o1.bound.value).epsilon(1e-12));
    }
    SUBCASE("infeasible t names the violating server") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 0.5, 1, 1);
        auto b = ps::mean_latency_bound_mgf(wl, single_row({1.0}), 0, 0.7);
        CHECK(b.signal == mg1::Signal::InfeasibleT);
        CHECK(b.detail.find("s0") != std::string::npos);
        auto b2 = ps::mean_latency_bound_mgf(wl, single_row({1.0}), 0, 0.0);
        CHECK(b2.signal == mg1::Signal::InfeasibleT);
    }
    SUBCASE("unstable server propagates its signal") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 2.0, 1, 1);
        auto b = ps::mean_latency_bound_mgf(wl, single_row({1.0}), 0, 0.1);
        CHECK(b.signal == mg1::Signal::Unstable);
        CHECK(b.detail.find("s0") != std::string::npos);
    }
}

TEST_CASE("transform bound optimization") {
    SUBCASE("idle exponential server: optimum sits at the small-t edge") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 0.0, 1, 1);
        auto pi = single_row({1.0});
        auto o = ps::optimize_t(wl, pi, 0);
        REQUIRE(o.bound.ok());
        // (1/t) log(mu/(mu-t)) decreases to the mean 1/mu as t -> 0+.
        CHECK(o.bound.value == doctest::Approx(1.0).epsilon(1e-6));
        // Grid oracle: no probed t does better.
        for (int i = 1; i < 100; ++i) {
            double t = i / 100.0;
            auto b = ps::mean_latency_bound_mgf(wl, pi, 0, t);
            REQUIRE(b.ok());
            CHECK(o.bound.value <= b.value + 1e-12);
        }
    }
    SUBCASE("near saturation: optimum collapses toward zero but stays finite") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 0.99, 1, 1);
        auto o = ps::optimize_t(wl, single_row({1.0}), 0);
        REQUIRE(o.bound.ok());
        CHECK(o.parameter < 1e-3);
        CHECK(o.bound.value >= 100.0 - 1e-6); // exact mean sojourn is 100 s
        CHECK(o.bound.value < 110.0);
        CHECK(std::isfinite(o.bound.value));
    }
    SUBCASE("unstable server yields a typed failure") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 2.0, 1, 1);
        auto o = ps::optimize_t(wl, single_row({1.0}), 0);
        CHECK(o.bound.signal == mg1::Signal::Unstable);
    }
}

TEST_CASE("moment mean bound") {
    SUBCASE("z = 0 dominates the mean sojourn") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 0.5, 1, 1);
        auto pi = single_row({1.0});
        auto b = ps::mean_latency_bound_moment(wl, pi, 0, 0.0);
        REQUIRE(b.ok());
        auto m = mg1::sojourn_moments(mg1::queue_input(0.5, wl.cluster.servers[0].second));
        REQUIRE(m.ok());
        CHECK(b.value >= m.value.mean);
        CHECK(b.value ==
              doctest::Approx(0.5 * (m.value.mean +
                                     std::sqrt(m.value.mean * m.value.mean + m.value.variance))));
    }
    SUBCASE("deterministic idle server collapses at z = E") {
        auto wl = make_workload({ServiceModel::deterministic(3.0)}, 0.0, 1, 1);
        auto pi = single_row({1.0});
        auto b = ps::mean_latency_bound_moment(wl, pi, 0, 3.0);
        REQUIRE(b.ok());
        CHECK(b.value == doctest::Approx(3.0).epsilon(1e-9));
        // The z-search should find (essentially) that collapse point.
        auto o = ps::optimize_z(wl, pi, 0);
        REQUIRE(o.bound.ok());
        CHECK(o.bound.value == doctest::Approx(3.0).epsilon(1e-6));
    }
    SUBCASE("both optimized mean bounds on the reference scenario") {
        // Both forms are valid upper bounds at any parameter. On this
        // heterogeneous scenario the offset-sum form is the tighter one at
        // every stable load: with k > 1 the transform bound carries a
        // log(sum pi) / t floor, and the usable t shrinks as load rises.
        // The values are recorded so the gap is visible in the test log.
        auto sc = reference_scenario();
        for (std::size_t file : {std::size_t{0}, std::size_t{500}}) {
            auto ot = ps::optimize_t(sc.wl, sc.pi, file);
            auto oz = ps::optimize_z(sc.wl, sc.pi, file);
            REQUIRE(ot.bound.ok());
            REQUIRE(oz.bound.ok());
            MESSAGE("file ", file, ": transform bound ", ot.bound.value, " at t=", ot.parameter,
                    ", offset-sum bound ", oz.bound.value, " at z=", oz.parameter);
            CHECK(ot.bound.value > 0.0);
            CHECK(oz.bound.value > 0.0);
            CHECK(oz.bound.value <= ot.bound.value);
            // Optimizer correctness: no probed parameter beats the optimum.
            for (int g = 1; g <= 40; ++g) {
                auto bt = ps::mean_latency_bound_mgf(sc.wl, sc.pi, file, ot.parameter * g / 20.0);
                if (bt.ok()) CHECK(ot.bound.value <= bt.value + 1e-9);
                auto bz = ps::mean_latency_bound_moment(sc.wl, sc.pi, file, oz.parameter * g / 20.0);
                REQUIRE(bz.ok());
                CHECK(oz.bound.value <= bz.value + 1e-9);
            }
        }
    }
}

TEST_CASE("tail probability bound") {
    auto sc = reference_scenario();
    SUBCASE("zero threshold clamps to one") {
        auto b = ps::tail_probability_bound(sc.wl, sc.pi, 0, 0.0);
        REQUIRE(b.ok());
        CHECK(b.value == 1.0);
        CHECK(b.clamped);
        CHECK(b.raw > 1.0);
    }
    SUBCASE("non-increasing in the threshold and within [0,1]") {
        double prev = 2.0;
        for (double sigma : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 80.0, 160.0}) {
            auto b = ps::tail_probability_bound(sc.wl, sc.pi, 0, sigma);
            REQUIRE(b.ok());
            CHECK(b.value >= 0.0);
            CHECK(b.value <= 1.0);
            CHECK(b.value <= prev + 1e-12);
            prev = b.value;
        }
        // Far tail is asymptotically negligible.
        auto far = ps::tail_probability_bound(sc.wl, sc.pi, 0, 400.0);
        REQUIRE(far.ok());
        CHECK(far.value < 1e-6);
    }
    SUBCASE("unstable server yields a typed failure") {
        auto wl = make_workload({ServiceModel::exponential(1.0)}, 2.0, 1, 1);
        auto b = ps::tail_probability_bound(wl, single_row({1.0}), 0, 5.0);
        CHECK(b.signal == mg1::Signal::Unstable);
    }
}

TEST_CASE("independent-queues latency ccdf") {
    SUBCASE("zero threshold") {
        CHECK(ps::independence_upper_ccdf(0.0, 20, 4, 0.5, 1.0) == 1.0);
    }
    SUBCASE("single task: exponential median") {
        double tau = 2.0 * std::log(2.0);
        CHECK(ps::independence_upper_ccdf(tau, 1, 1, 0.5, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("monotone in k and in tau") {
        double prev_tau = 1.0;
        for (double tau : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            double v = ps::independence_upper_ccdf(tau, 20, 4, 0.5, 1.0);
            CHECK(v <= prev_tau + 1e-15);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            prev_tau = v;
        }
        CHECK(ps::independence_upper_ccdf(2.0, 20, 8, 0.5, 1.0) >
              ps::independence_upper_ccdf(2.0, 20, 4, 0.5, 1.0));
    }
    SUBCASE("closed form against direct evaluation") {
        double tau = 3.0, mu = 1.0, lambda = 0.5;
        int k = 4;
        double direct = 1.0 - std::pow(1.0 - std::exp(-(mu - lambda) * tau), k);
        CHECK(ps::independence_upper_ccdf(tau, 20, k, lambda, mu) ==
              doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("heavy-tail waiting approximation") {
    SUBCASE("no arrivals, no waiting") {
        CHECK(ps::heavy_tail_waiting_ccdf(100.0, 0.0, 0.3, 1.0, 3.0, 1.0) == 0.0);
    }
    SUBCASE("pinned value") {
        double v = ps::heavy_tail_waiting_ccdf(100.0, 0.1, 0.3, 1.0, 3.0, 1.0);
        CHECK(v == doctest::Approx(4.2857142857142863e-05).epsilon(1e-12));
    }
    SUBCASE("log-log slope approaches 1 - alpha") {
        for (double alpha : {2.5, 3.0, 4.0}) {
            double f1 = ps::heavy_tail_waiting_ccdf(1e3, 0.1, 0.3, 1.0, alpha, 1.0);
            double f2 = ps::heavy_tail_waiting_ccdf(1e4, 0.1, 0.3, 1.0, alpha, 1.0);
            double slope = (std::log(f2) - std::log(f1)) / (std::log(1e4) - std::log(1e3));
            CHECK(std::abs(slope - (1.0 - alpha)) < 0.05);
        }
    }
}

TEST_CASE("bounds are invariant to permuting identical servers") {
    std::vector<ServiceModel> servers(4, ServiceModel::exponential(2.0));
    Cluster cluster;
    for (int j = 0; j < 4; ++j)
        cluster.servers.emplace_back("s" + std::to_string(j), servers[j]);
    FileSpec file;
    file.id = "f0";
    file.arrival_rate = 0.8;
    file.code = {4, 2};
    file.placement = {"s0", "s1", "s2", "s3"};
    auto v = validate_workload({file}, cluster);
    REQUIRE(v.ok());
    auto base_pi = single_row({0.7, 0.5, 0.4, 0.4});
    auto perm_pi = single_row({0.4, 0.7, 0.5, 0.4}); // a cyclic shift of the row

    auto b1 = ps::mean_latency_bound_mgf(*v.workload, base_pi, 0, 0.3);
    auto b2 = ps::mean_latency_bound_mgf(*v.workload, perm_pi, 0, 0.3);
    REQUIRE(b1.ok());
    REQUIRE(b2.ok());
    CHECK(b1.value == doctest::Approx(b2.value).epsilon(1e-12));

    auto m1 = ps::mean_latency_bound_moment(*v.workload, base_pi, 0, 0.5);
    auto m2 = ps::mean_latency_bound_moment(*v.workload, perm_pi, 0, 0.5);
    REQUIRE(m1.ok());
    REQUIRE(m2.ok());
    CHECK(m1.value == doctest::Approx(m2.value).epsilon(1e-12));

    auto t1 = ps::tail_probability_bound(*v.workload, base_pi, 0, 5.0);
    auto t2 = ps::tail_probability_bound(*v.workload, perm_pi, 0, 5.0);
    REQUIRE(t1.ok());
    REQUIRE(t2.ok());
    CHECK(t1.value == doctest::Approx(t2.value).epsilon(1e-12));
}
