#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "codedlat/fj_bounds.hpp"
#include "codedlat/specfun.hpp"

using namespace codedlat;

TEST_CASE("published reference points at lambda=0.3, mu=0.5") {
    auto u4 = fj::upper_exp(4, 2, 0.3, 0.5);
    REQUIRE(u4.feasible);
    CHECK(u4.value == doctest::Approx(1.6410).epsilon(5e-5));

    auto l4 = fj::lower_exp(4, 2, 0.3, 0.5);
    REQUIRE(l4.feasible);
    CHECK(l4.value == doctest::Approx(1.4216).epsilon(5e-5));

    auto a4 = fj::approx_exp(4, 2, 0.3, 0.5);
    REQUIRE(a4.feasible);
    CHECK(a4.value == doctest::Approx(1.5476).epsilon(5e-5));

    // n=2, k=1: a plain M/M/1 on the faster of two servers; all three forms
    // collapse to the same number.
    for (auto b : {fj::upper_exp(2, 1, 0.3, 0.5), fj::lower_exp(2, 1, 0.3, 0.5),
                   fj::approx_exp(2, 1, 0.3, 0.5)}) {
        REQUIRE(b.feasible);
        CHECK(b.value == doctest::Approx(1.4286).epsilon(5e-5));
    }

    auto a24 = fj::approx_exp(24, 1, 0.45, 1.0 / 24.0);
    REQUIRE(a24.feasible);
    CHECK(a24.value == doctest::Approx(1.8182).epsilon(5e-5));
}

TEST_CASE("single-server reduction is M/M/1") {
    for (double lam : {0.1, 0.5, 0.9}) {
        double expect = 1.0 / (1.0 - lam);
        CHECK(fj::upper_exp(1, 1, lam, 1.0).value == doctest::Approx(expect).epsilon(1e-12));
        CHECK(fj::lower_exp(1, 1, lam, 1.0).value == doctest::Approx(expect).epsilon(1e-12));
        CHECK(fj::approx_exp(1, 1, lam, 1.0).value == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("zero-load order-statistic reductions") {
    // n=k lower bound at lambda=0: full harmonic sum over all n stages.
    auto b = fj::lower_exp(5, 5, 0.0, 0.5);
    REQUIRE(b.feasible);
    CHECK(b.value == doctest::Approx(specfun::harmonic(0, 5, 1) / 0.5).epsilon(1e-12));
}

TEST_CASE("infeasibility carries the edge arrival rate") {
    // upper bound valid only while rho * H < 1, strictly inside stability.
    auto b = fj::upper_exp(4, 2, 0.9, 0.5);
    CHECK(!b.feasible);
    CHECK(b.lambda_max == doctest::Approx(0.5 / specfun::harmonic(2, 4, 1)).epsilon(1e-12));
    CHECK(!b.condition.empty());

    CHECK(!fj::lower_exp(4, 2, 1.6, 0.5).feasible);
    CHECK(fj::lower_exp(4, 2, 1.49, 0.5).feasible);
    CHECK(!fj::approx_exp(4, 2, 1.1, 0.5).feasible);
    CHECK(fj::approx_exp(4, 2, 0.99, 0.5).feasible);
}

TEST_CASE("general-service upper bound") {
    SUBCASE("deterministic service collapses to the zero-variance M/G/1") {
        for (int n : {3, 6}) {
            auto b = fj::upper_general(n, 2, 0.4, 1.25, 0.0);
            REQUIRE(b.feasible);
            double expect = 1.25 + 0.4 * 1.25 * 1.25 / (2.0 * (1.0 - 0.4 * 1.25));
            CHECK(b.value == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    SUBCASE("k=1 has no order-statistic inflation of the mean") {
        auto b = fj::upper_general(7, 1, 0.0, 2.0, 1.5);
        REQUIRE(b.feasible);
        CHECK(b.value == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("regression value for an exponential-parameter instance") {
        auto b = fj::upper_general(10, 5, 0.2, 1.0, 1.0);
        REQUIRE(b.feasible);
        CHECK(b.value == doctest::Approx(2.4935423988822936).epsilon(1e-9));
    }
    SUBCASE("validity edge") {
        auto b = fj::upper_general(4, 3, 0.9, 1.0, 1.0);
        CHECK(!b.feasible);
    }
}

TEST_CASE("shifted-exponential lower bound") {
    SUBCASE("no shift, no load: pure order-statistic stage sum") {
        double alpha = 2.0;
        for (int n : {4, 9}) {
            for (int k : {1, 2, n}) {
                auto b = fj::lower_sexp(n, k, 0.0, 0.0, alpha);
                REQUIRE(b.feasible);
                double expect = 0.0;
                for (int j = 0; j < k; ++j) expect += 1.0 / ((n - j) * alpha);
                CHECK(b.value == doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
    SUBCASE("k=1 at zero load is the minimum of n shifted exponentials") {
        auto b = fj::lower_sexp(8, 1, 0.0, 0.25, 3.0);
        REQUIRE(b.feasible);
        CHECK(b.value == doctest::Approx(0.25 + 1.0 / 24.0).epsilon(1e-12));
    }
    SUBCASE("regression value") {
        auto b = fj::lower_sexp(12, 7, 0.1, 0.01, 18.23);
        REQUIRE(b.feasible);
        CHECK(b.value == doctest::Approx(0.055014182961204632).epsilon(1e-9));
    }
}

TEST_CASE("bounds order and load monotonicity") {
    for (int n : {2, 4, 8, 16}) {
        int k = n / 2 > 0 ? n / 2 : 1;
        double mu = 0.5;
        double prev_u = 0.0, prev_l = 0.0, prev_a = 0.0;
        for (double lam = 0.0; lam < 0.72; lam += 0.06) {
            auto u = fj::upper_exp(n, k, lam, mu);
            auto l = fj::lower_exp(n, k, lam, mu);
            auto a = fj::approx_exp(n, k, lam, mu);
            if (!u.feasible) break;
            REQUIRE(l.feasible);
            REQUIRE(a.feasible);
            CHECK(l.value <= u.value + 1e-12);
            CHECK(u.value >= prev_u);
            CHECK(l.value >= prev_l);
            CHECK(a.value >= prev_a);
            prev_u = u.value;
            prev_l = l.value;
            prev_a = a.value;
        }
    }
}

TEST_CASE("heterogeneous stability") {
    SUBCASE("single file reduces to lambda l < n mu") {
        std::vector<fj::HeteroFile> f{{0.3, 2, 1.0}};
        CHECK(fj::hetero_stable(f, 6, 0.2));  // 0.3 < 1.2
        f[0].arrival_rate = 1.3;
        CHECK(!fj::hetero_stable(f, 6, 0.2)); // 1.3 > 1.2
    }
    SUBCASE("no traffic is vacuously stable") {
        std::vector<fj::HeteroFile> f{{0.0, 2, 1.0}, {0.0, 4, 1.0}};
        CHECK(fj::hetero_stable(f, 6, 0.2));
    }
    SUBCASE("two-file instance, direct arithmetic") {
        std::vector<fj::HeteroFile> f{{0.1, 2, 1.0}, {0.1, 4, 1.0}};
        // (sum k l) (sum l s/k) = (0.2+0.4)(0.05+0.025) = 0.045
        // n mu sum l = 6*0.2*0.2 = 0.24 -> stable
        CHECK(fj::hetero_stable(f, 6, 0.2));
        // Shrink capacity until the inequality flips: 0.045 < n*0.2*0.2
        // fails for n*0.04 <= 0.045, i.e. n = 1.
        CHECK(!fj::hetero_stable(f, 1, 0.2));
    }
}

TEST_CASE("heterogeneous bounds collapse to the homogeneous forms for one file") {
    int n = 8, k = 3;
    double mu = 0.4, size = 2.0, lam = 0.2;
    double mu1 = k * mu / size;
    std::vector<fj::HeteroFile> files{{lam, k, size}};

    auto hu = fj::hetero_upper(0, files, n, mu);
    auto u = fj::upper_exp(n, k, lam, mu1);
    REQUIRE(hu.feasible);
    REQUIRE(u.feasible);
    CHECK(hu.value == doctest::Approx(u.value).epsilon(1e-12));

    auto hl = fj::hetero_lower(0, files, n, mu);
    auto l = fj::lower_exp(n, k, lam, mu1);
    REQUIRE(hl.feasible);
    REQUIRE(l.feasible);
    CHECK(hl.value == doctest::Approx(l.value).epsilon(1e-12));
}

TEST_CASE("heterogeneous bounds bracket and order sanity for two files") {
    std::vector<fj::HeteroFile> files{{0.05, 2, 1.0}, {0.04, 4, 1.5}};
    int n = 6;
    double mu = 0.5;
    REQUIRE(fj::hetero_stable(files, n, mu));
    for (std::size_t i = 0; i < files.size(); ++i) {
        auto up = fj::hetero_upper(i, files, n, mu);
        auto lo = fj::hetero_lower(i, files, n, mu);
        REQUIRE(up.feasible);
        REQUIRE(lo.feasible);
        CHECK(lo.value <= up.value);
        CHECK(lo.value > 0.0);
    }
    // The lower bound must be order-insensitive: permuting the file list
    // (ladder sorts internally) gives identical per-file values.
    std::vector<fj::HeteroFile> swapped{files[1], files[0]};
    CHECK(fj::hetero_lower(1, swapped, n, mu).value ==
          doctest::Approx(fj::hetero_lower(0, files, n, mu).value).epsilon(1e-12));
    CHECK(fj::hetero_upper(1, swapped, n, mu).value ==
          doctest::Approx(fj::hetero_upper(0, files, n, mu).value).epsilon(1e-12));
}
