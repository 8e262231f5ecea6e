#include "codedlat/qbd.hpp"

#include "codedlat/specfun.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace codedlat::qbd {
namespace {

long long ceil_div(long long a, long long b) {
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

double harmonic_mean_max(int r, double mu) {
    // Expected maximum of r i.i.d. exponentials with rate mu.
    return specfun::harmonic(0, r, 1) / mu;
}

void check_parameters(int n, int k, int t, double lambda, double mu) {
    if (k < 1 || n < k) throw std::invalid_argument("qbd: need 1 <= k <= n");
    if (t < 0) throw std::invalid_argument("qbd: window length t must be >= 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("qbd: arrival rate must be finite and >= 0");
    if (!(mu > 0.0) || !std::isfinite(mu))
        throw std::invalid_argument("qbd: service rate must be finite and > 0");
}

using Key = std::pair<std::vector<int>, long long>;

Key key_of(const WindowState& s) { return {s.w, s.m}; }

struct StateIndex {
    std::map<Key, int> lookup;
    std::vector<WindowState> states;

    int add(WindowState s) {
        auto [it, inserted] = lookup.emplace(key_of(s), (int)states.size());
        if (inserted) states.push_back(std::move(s));
        return it->second;
    }
    const int* find(const WindowState& s) const {
        auto it = lookup.find(key_of(s));
        return it == lookup.end() ? nullptr : &it->second;
    }
};

// All window vectors whose nonzero entries form a non-decreasing prefix in
// [1..k] of length exactly q, padded with zeros to length t.
void append_shapes_of_length(int k, int t, int q, std::vector<std::vector<int>>& out) {
    std::vector<int> w((size_t)t, 0);
    // depth-first over non-decreasing prefixes
    std::vector<int> stack;
    if (q == 0) {
        out.push_back(w);
        return;
    }
    std::function<void(int, int)> rec = [&](int pos, int low) {
        if (pos == q) {
            out.push_back(w);
            return;
        }
        for (int v = low; v <= k; ++v) {
            w[(size_t)pos] = v;
            rec(pos + 1, v);
        }
        w[(size_t)pos] = 0;
    };
    rec(0, 1);
}

std::vector<std::vector<int>> window_shapes(int k, int t, bool full_only) {
    std::vector<std::vector<int>> out;
    if (full_only) {
        append_shapes_of_length(k, t, t, out);
    } else {
        for (int q = 0; q <= t; ++q) append_shapes_of_length(k, t, q, out);
    }
    return out;
}

struct Move {
    WindowState to;
    double rate;
};

std::vector<Move> reservation_moves(const WindowState& s, const Decoded& d, int k, int t,
                                    double lambda, double mu) {
    std::vector<Move> out;
    if (lambda > 0.0) {
        WindowState a = s;
        a.m += k;
        if (d.b < t && d.z < k) {
            // Partial assignment: z jobs start now, the rest open window
            // slot q+1.  (b < t implies b == q here.)
            a.w[(size_t)d.b] = k - d.z;
        }
        // b < t with z >= k starts the whole batch at once; b >= t appends
        // it behind the window.  Either way only m changes.
        out.push_back({std::move(a), lambda});
    }
    // A server finishing a job of window batch i < q immediately takes the
    // next buffered job of batch i+1 (the only window batch it has not
    // touched yet).
    for (int i = 0; i + 1 < d.q; ++i) {
        if (d.in_service[(size_t)i] <= 0) continue;
        WindowState x = s;
        x.w[(size_t)i + 1] -= 1;
        x.m -= 1;
        out.push_back({std::move(x), mu * d.in_service[(size_t)i]});
    }
    // A server finishing a job of the last occupied window batch idles:
    // batches behind the window may only enter service as a whole.
    if (d.q >= 1 && d.in_service[(size_t)d.q - 1] > 0) {
        WindowState x = s;
        x.m -= 1;
        out.push_back({std::move(x), mu * d.in_service[(size_t)d.q - 1]});
    }
    // A server finishing a job of a fully-started batch picks up the first
    // waiting batch's next buffered job.
    if (d.old_jobs > 0) {
        WindowState x = s;
        x.m -= 1;
        if (d.q >= 1) {
            if (s.w[0] >= 2) {
                x.w[0] -= 1;
            } else {
                // That was batch 1's last buffered job: the batch is now
                // fully in service and the window shifts.  If a batch is
                // waiting right behind the window, the idle servers start
                // on it together.
                for (int i = 0; i + 1 < t; ++i) x.w[(size_t)i] = s.w[(size_t)i + 1];
                x.w[(size_t)t - 1] = (d.b >= (long long)t + 1) ? (k - d.z) : 0;
            }
        }
        out.push_back({std::move(x), mu * (double)d.old_jobs});
    }
    return out;
}

std::vector<Move> pooled_moves(const WindowState& s, int n, int k, double lambda, double mu) {
    std::vector<Move> out;
    if (lambda > 0.0) out.push_back({WindowState{{}, s.m + k}, lambda});
    long long busy = std::min<long long>(s.m, n);
    if (busy > 0) out.push_back({WindowState{{}, s.m - 1}, mu * (double)busy});
    return out;
}

// Expected number of fully-started but incomplete batches contributed by
// state sigma, in Little's-law form: for every transition that moves a
// batch's last buffered job into service, its rate times the expected time
// the batch then needs (max of its remaining exponential jobs).  Summing
// pi_sigma times this over all states gives the stationary expectation.
double started_batch_weight(const WindowState& s, const Decoded& d, int n, int k, int t,
                            double lambda, double mu) {
    double g = 0.0;
    if (t == 0) {
        if (s.m <= (long long)n - k) g += lambda * harmonic_mean_max(k, mu);
        if (d.b >= 1 && d.z == k - 1)
            g += mu * (double)(n - k + 1) * harmonic_mean_max(k, mu);
    } else {
        if (d.q == 0 && s.m <= (long long)n - k) g += lambda * harmonic_mean_max(k, mu);
        if (d.q >= 1 && s.w[0] == 1) {
            int remaining = (d.q >= 2) ? s.w[1] : (k - d.z);
            g += mu * (double)d.old_jobs * harmonic_mean_max(remaining, mu);
        }
    }
    return g;
}

double batch_count_weight(const WindowState& s, const Decoded& d, int n, int k, int t,
                          double lambda, double mu) {
    return (double)d.b + started_batch_weight(s, d, n, k, t, lambda, mu);
}

long long level_of(long long m, int n, int k) {
    // Level j holds m in [n-k+1+jk, n+jk].
    return ceil_div(m - n, k);
}

[[noreturn]] void construction_error(const std::string& what, const WindowState& from,
                                     const WindowState& to) {
    throw std::runtime_error("qbd chain construction: " + what + " (from state " + describe(from) +
                             " to state " + describe(to) + ")");
}

struct LevelRow {
    Eigen::MatrixXd down;         // to level j_ref - 1 (template-indexed)
    Eigen::MatrixXd within;       // inside level j_ref, diagonal included
    Eigen::MatrixXd up;           // to level j_ref + 1
    Eigen::MatrixXd to_boundary;  // only used when j_ref is the first level
};

void validate_blocks(const QbdBlocks& b) {
    auto check_nonneg = [](const Eigen::MatrixXd& m, const char* name) {
        if (m.size() > 0 && m.minCoeff() < -1e-15)
            throw std::runtime_error(std::string("qbd blocks: negative rate in ") + name);
    };
    check_nonneg(b.B2, "B2");
    check_nonneg(b.B0, "B0");
    check_nonneg(b.A0, "A0");
    check_nonneg(b.A2, "A2");
    for (int r = 0; r < b.B1.rows(); ++r) {
        for (int c = 0; c < b.B1.cols(); ++c)
            if (r != c && b.B1(r, c) < -1e-15)
                throw std::runtime_error("qbd blocks: negative off-diagonal rate in B1");
        double sum = b.B1.row(r).sum() + b.B2.row(r).sum();
        if (std::abs(sum) > 1e-10)
            throw std::runtime_error("qbd blocks: boundary generator row does not sum to zero");
    }
    for (int r = 0; r < b.A1.rows(); ++r) {
        for (int c = 0; c < b.A1.cols(); ++c)
            if (r != c && b.A1(r, c) < -1e-15)
                throw std::runtime_error("qbd blocks: negative off-diagonal rate in A1");
        double first = b.B0.row(r).sum() + b.A1.row(r).sum() + b.A2.row(r).sum();
        double deep = b.A0.row(r).sum() + b.A1.row(r).sum() + b.A2.row(r).sum();
        if (std::abs(first) > 1e-10 || std::abs(deep) > 1e-10)
            throw std::runtime_error("qbd blocks: level generator row does not sum to zero");
    }
}

double spectral_radius_of(const Eigen::MatrixXd& R) {
    if (R.size() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(R, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::VectorXd left_null_unit_sum(const Eigen::MatrixXd& M, const Eigen::VectorXd& mass_coeff,
                                   const char* what) {
    // Solve x^T M = 0 with x . mass_coeff = 1 by least squares.
    const int n = (int)M.rows();
    Eigen::MatrixXd T(n + 1, n);
    T.topRows(n) = M.transpose();
    T.bottomRows(1) = mass_coeff.transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs(n) = 1.0;
    Eigen::VectorXd x = T.colPivHouseholderQr().solve(rhs);
    double residual = (T * x - rhs).cwiseAbs().maxCoeff();
    if (!x.allFinite() || residual > 1e-8)
        throw std::runtime_error(std::string("qbd: ") + what +
                                 " linear system residual too large (" + std::to_string(residual) +
                                 ")");
    return x;
}

}  // namespace

std::string describe(const WindowState& state) {
    std::ostringstream out;
    out << "w=[";
    for (size_t i = 0; i < state.w.size(); ++i) {
        if (i) out << ",";
        out << state.w[i];
    }
    out << "] m=" << state.m;
    return out.str();
}

std::optional<Decoded> try_decode_state(const WindowState& state, int n, int k, int t) {
    if ((int)state.w.size() != t)
        throw std::invalid_argument("qbd decode: window vector length does not match t");
    if (state.m < 0) return std::nullopt;
    for (int v : state.w)
        if (v < 0 || v > k) return std::nullopt;

    Decoded d;
    if (t == 0) {
        long long b = std::max<long long>(0, ceil_div(state.m - n, k));
        long long in_service = state.m - b * (long long)k;
        long long z = (long long)n - in_service;
        if (z < 0 || z > n) return std::nullopt;
        d.q = 0;
        d.b = b;
        d.z = (int)z;
        d.old_jobs = in_service;
        return d;
    }

    int q = 0;
    if (state.w[0] == 0) {
        q = 0;
    } else if (state.w[(size_t)t - 1] != 0) {
        q = t;
    } else {
        for (int i = 0; i < t; ++i)
            if (state.w[(size_t)i] != 0) q = i + 1;
    }
    long long sum_w = 0;
    for (int i = 0; i < t; ++i) {
        int v = state.w[(size_t)i];
        if (i < q) {
            if (v < 1) return std::nullopt;
            if (i > 0 && v < state.w[(size_t)i - 1]) return std::nullopt;
        } else if (v != 0) {
            return std::nullopt;
        }
        sum_w += v;
    }

    long long b = 0;
    if (q == 0) {
        b = 0;
    } else if (q < t) {
        b = q;
    } else {
        b = t + ceil_div(state.m - sum_w - n, k);
        if (b < t) return std::nullopt;  // not enough chunk requests for a full window
    }
    long long extra = std::max<long long>(0, b - t);
    long long z = (long long)n - (state.m - sum_w - extra * (long long)k);
    if (z < 0 || z > n) return std::nullopt;
    if (q >= 1 && z > (long long)k - state.w[(size_t)q - 1]) return std::nullopt;
    if (q == 0 && state.m > n) return std::nullopt;

    d.q = q;
    d.b = b;
    d.z = (int)z;
    d.in_service.assign((size_t)q, 0);
    long long served = 0;
    for (int i = 0; i < q; ++i) {
        int s = (i + 1 < q) ? (state.w[(size_t)i + 1] - state.w[(size_t)i])
                            : (k - (int)z - state.w[(size_t)q - 1]);
        if (s < 0) return std::nullopt;
        d.in_service[(size_t)i] = s;
        served += s;
    }
    d.old_jobs = (long long)n - z - served;
    if (d.old_jobs < 0) return std::nullopt;
    return d;
}

Decoded decode_state(const WindowState& state, int n, int k, int t) {
    auto d = try_decode_state(state, n, k, t);
    if (!d)
        throw std::invalid_argument("qbd decode: inconsistent chain state " + describe(state) +
                                    " for n=" + std::to_string(n) + " k=" + std::to_string(k) +
                                    " t=" + std::to_string(t));
    return *d;
}

namespace {

QbdBlocks build_chain(ChainFamily family, int n, int k, int t, double lambda, double mu) {
    check_parameters(n, k, t, lambda, mu);

    QbdBlocks blocks;
    blocks.n = n;
    blocks.k = k;
    blocks.t = t;
    blocks.lambda = lambda;
    blocks.mu = mu;
    blocks.family = family;

    const bool pooled = (family == ChainFamily::MkMn);
    const int wt = pooled ? 0 : t;  // window length actually encoded in states
    // The repeating portion must start where the latency weights are affine in
    // the level index.  With an empty window (t = 0) the lowest level still
    // contains states with no batch queued behind the servers, so the boundary
    // absorbs it and the levels start one step higher.
    const int res_first = std::max(t, 1);
    blocks.boundary_top = pooled ? (long long)n + (long long)t * k
                                 : (long long)n - k + (long long)res_first * k;
    blocks.first_level = pooled ? t + 1 : res_first;
    const long long j0 = blocks.first_level;

    auto moves_of = [&](const WindowState& s) -> std::vector<Move> {
        if (pooled) return pooled_moves(s, n, k, lambda, mu);
        Decoded d = decode_state(s, n, k, wt);
        return reservation_moves(s, d, k, wt, lambda, mu);
    };

    // --- enumerate states ---------------------------------------------
    StateIndex boundary, level;
    for (const auto& shape : window_shapes(k, wt, false)) {
        for (long long m = 0; m <= blocks.boundary_top; ++m) {
            WindowState s{shape, m};
            if (pooled || try_decode_state(s, n, k, wt)) boundary.add(std::move(s));
        }
    }
    for (const auto& shape : window_shapes(k, wt, true)) {
        for (int i = 0; i < k; ++i) {
            long long m = (long long)n + j0 * k - i;
            WindowState s{shape, m};
            if (pooled || try_decode_state(s, n, k, wt)) level.add(std::move(s));
        }
    }
    const int nb = (int)boundary.states.size();
    const int nl = (int)level.states.size();
    if (nb == 0 || nl == 0) throw std::runtime_error("qbd chain construction: empty state space");

    blocks.boundary_states = boundary.states;
    blocks.level_states = level.states;

    // --- boundary rows --------------------------------------------------
    blocks.B1 = Eigen::MatrixXd::Zero(nb, nb);
    blocks.B2 = Eigen::MatrixXd::Zero(nb, nl);
    for (int r = 0; r < nb; ++r) {
        const WindowState& src = boundary.states[(size_t)r];
        double total = 0.0;
        for (const Move& mv : moves_of(src)) {
            total += mv.rate;
            if (!pooled) decode_state(mv.to, n, k, wt);  // target must stay consistent
            if (mv.to.m <= blocks.boundary_top) {
                const int* idx = boundary.find(mv.to);
                if (!idx) construction_error("target missing from boundary", src, mv.to);
                blocks.B1(r, *idx) += mv.rate;
            } else {
                if (level_of(mv.to.m, n, k) != j0)
                    construction_error("boundary transition skipped the first level", src, mv.to);
                const int* idx = level.find(mv.to);
                if (!idx) construction_error("target missing from first level", src, mv.to);
                blocks.B2(r, *idx) += mv.rate;
            }
        }
        blocks.B1(r, r) -= total;
    }

    // --- level rows (generated at several depths to pin homogeneity) ----
    auto fill_level = [&](long long j_ref) -> LevelRow {
        LevelRow row;
        row.down = Eigen::MatrixXd::Zero(nl, nl);
        row.within = Eigen::MatrixXd::Zero(nl, nl);
        row.up = Eigen::MatrixXd::Zero(nl, nl);
        row.to_boundary = Eigen::MatrixXd::Zero(nl, nb);
        const long long shift = (j_ref - j0) * (long long)k;
        for (int r = 0; r < nl; ++r) {
            WindowState src = level.states[(size_t)r];
            src.m += shift;
            double total = 0.0;
            for (const Move& mv : moves_of(src)) {
                total += mv.rate;
                if (!pooled) decode_state(mv.to, n, k, wt);
                if (mv.to.m <= blocks.boundary_top) {
                    if (j_ref != j0)
                        construction_error("deep level reached the boundary directly", src, mv.to);
                    const int* idx = boundary.find(mv.to);
                    if (!idx) construction_error("target missing from boundary", src, mv.to);
                    row.to_boundary(r, *idx) += mv.rate;
                    continue;
                }
                long long jt = level_of(mv.to.m, n, k);
                WindowState tpl = mv.to;
                tpl.m -= (jt - j0) * (long long)k;
                const int* idx = level.find(tpl);
                if (!idx) construction_error("target missing from level template", src, mv.to);
                if (jt == j_ref + 1)
                    row.up(r, *idx) += mv.rate;
                else if (jt == j_ref)
                    row.within(r, *idx) += mv.rate;
                else if (jt == j_ref - 1)
                    row.down(r, *idx) += mv.rate;
                else
                    construction_error("transition crossed more than one level", src, mv.to);
            }
            row.within(r, r) -= total;
        }
        return row;
    };

    LevelRow first = fill_level(j0);
    LevelRow second = fill_level(j0 + 1);
    LevelRow third = fill_level(j0 + 2);
    auto same = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        return ((a - b).cwiseAbs().maxCoeff()) <= 1e-12;
    };
    if (!same(first.within, second.within) || !same(second.within, third.within) ||
        !same(first.up, second.up) || !same(second.up, third.up) ||
        !same(second.down, third.down))
        throw std::runtime_error("qbd chain construction: level transitions are not homogeneous");

    blocks.B0 = first.to_boundary;
    blocks.A0 = second.down;
    blocks.A1 = second.within;
    blocks.A2 = second.up;

    // --- expected-batches weights for Little's law -----------------------
    blocks.boundary_weight = Eigen::VectorXd::Zero(nb);
    blocks.level_weight = Eigen::VectorXd::Zero(nl);
    blocks.level_slope = Eigen::VectorXd::Zero(nl);
    if (pooled) {
        // Tagged-batch completion times E[a][r]: expected time until r of
        // the newest batch's jobs finish with a older jobs ahead of them,
        // all drained first-come-first-served by n rate-mu servers.
        long long max_m = (long long)n + (j0 + 1) * (long long)k;
        std::vector<std::vector<double>> E((size_t)max_m + 1,
                                           std::vector<double>((size_t)k + 1, 0.0));
        for (long long a = 0; a <= max_m; ++a) {
            for (int r = 1; r <= k; ++r) {
                double ahead = mu * (double)std::min<long long>(a, n);
                double own = mu * (double)std::min<long long>(r, std::max<long long>(0, n - a));
                double up_rate = ahead + own;
                double value = 1.0;
                if (a > 0) value += ahead * E[(size_t)a - 1][(size_t)r];
                if (own > 0.0) value += own * E[(size_t)a][(size_t)r - 1];
                E[(size_t)a][(size_t)r] = value / up_rate;
            }
        }
        for (int i = 0; i < nb; ++i)
            blocks.boundary_weight(i) = lambda * E[(size_t)boundary.states[(size_t)i].m][(size_t)k];
        for (int i = 0; i < nl; ++i) {
            long long m = level.states[(size_t)i].m;
            blocks.level_weight(i) = lambda * E[(size_t)m][(size_t)k];
            blocks.level_slope(i) = lambda * (double)k / ((double)n * mu);
            double step = E[(size_t)(m + k)][(size_t)k] - E[(size_t)m][(size_t)k];
            if (std::abs(lambda * step - blocks.level_slope(i)) > 1e-9)
                throw std::runtime_error(
                    "qbd chain construction: pooled latency weights are not affine across levels");
        }
    } else {
        auto weight_at = [&](const WindowState& s) {
            Decoded d = decode_state(s, n, k, wt);
            return batch_count_weight(s, d, n, k, wt, lambda, mu);
        };
        for (int i = 0; i < nb; ++i)
            blocks.boundary_weight(i) = weight_at(boundary.states[(size_t)i]);
        for (int i = 0; i < nl; ++i) {
            WindowState s = level.states[(size_t)i];
            double w0 = weight_at(s);
            s.m += k;
            double w1 = weight_at(s);
            s.m += k;
            double w2 = weight_at(s);
            if (std::abs((w1 - w0) - (w2 - w1)) > 1e-9)
                throw std::runtime_error(
                    "qbd chain construction: latency weights are not affine across levels");
            blocks.level_weight(i) = w0;
            blocks.level_slope(i) = w1 - w0;
        }
    }

    validate_blocks(blocks);
    return blocks;
}

// Mean-drift stability margin of the repeating portion: with v the stationary
// vector of the collapsed phase process A0 + A1 + A2, the chain is positive
// recurrent iff v A2 1 < v A0 1.  Returns downward minus upward drift.
double drift_margin(const QbdBlocks& blocks) {
    Eigen::MatrixXd A = blocks.A0 + blocks.A1 + blocks.A2;
    Eigen::VectorXd v =
        left_null_unit_sum(A, Eigen::VectorXd::Ones((Eigen::Index)A.rows()), "drift");
    return v.dot(blocks.A0.rowwise().sum()) - v.dot(blocks.A2.rowwise().sum());
}

}  // namespace

QbdBlocks build_reservation_chain(int n, int k, int t, double lambda, double mu) {
    return build_chain(ChainFamily::Reservation, n, k, t, lambda, mu);
}

QbdBlocks build_mkmn_chain(int n, int k, int t, double lambda, double mu) {
    return build_chain(ChainFamily::MkMn, n, k, t, lambda, mu);
}

QbdSolution solve_qbd(const QbdBlocks& blocks, const SolveOptions& options) {
    if (options.tol <= 0.0) throw std::invalid_argument("solve_qbd: tolerance must be positive");
    if (options.max_iterations < 1)
        throw std::invalid_argument("solve_qbd: iteration cap must be positive");
    const int nl = (int)blocks.A1.rows();
    const int nb = (int)blocks.B1.rows();

    // The rate-matrix iteration converges to a spectral radius just below one
    // for chains at or beyond capacity, so instability must be detected up
    // front from the drift, not from the converged matrix.
    double margin = drift_margin(blocks);
    if (!(margin > 0.0)) {
        std::ostringstream msg;
        msg << "solve_qbd: chain is unstable (mean drift margin " << margin
            << " <= 0); no stationary distribution exists";
        throw std::runtime_error(msg.str());
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> a1t(blocks.A1.transpose());
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nl, nl);
    double change = std::numeric_limits<double>::infinity();
    int it = 0;
    while (it < options.max_iterations) {
        ++it;
        Eigen::MatrixXd rhs = -(blocks.A2 + R * R * blocks.A0);
        Eigen::MatrixXd next = a1t.solve(rhs.transpose()).transpose();
        if (!next.allFinite())
            throw std::runtime_error("solve_qbd: iteration produced non-finite values");
        change = (next - R).cwiseAbs().maxCoeff();
        R = std::move(next);
        if (change < options.tol) break;
    }
    double spectral = spectral_radius_of(R);
    if (change >= options.tol) {
        std::ostringstream msg;
        msg << "solve_qbd: rate-matrix iteration did not converge after " << it
            << " iterations (last change " << change << ", spectral radius estimate " << spectral
            << (spectral >= 1.0 - 1e-6 ? "; the chain appears unstable)" : ")");
        throw std::runtime_error(msg.str());
    }
    if (spectral >= 1.0) {
        std::ostringstream msg;
        msg << "solve_qbd: no stationary distribution, spectral radius " << spectral << " >= 1";
        throw std::runtime_error(msg.str());
    }

    // Boundary + first level solve: x^T [B1 B2; B0 A1+RA0] = 0, with total
    // mass x_bd . 1 + x_L1 (I-R)^{-1} 1 = 1.
    Eigen::MatrixXd M(nb + nl, nb + nl);
    M.topLeftCorner(nb, nb) = blocks.B1;
    M.topRightCorner(nb, nl) = blocks.B2;
    M.bottomLeftCorner(nl, nb) = blocks.B0;
    M.bottomRightCorner(nl, nl) = blocks.A1 + R * blocks.A0;

    Eigen::MatrixXd ImR = Eigen::MatrixXd::Identity(nl, nl) - R;
    Eigen::PartialPivLU<Eigen::MatrixXd> imr(ImR);
    Eigen::VectorXd tail_mass = imr.solve(Eigen::VectorXd::Ones(nl));
    Eigen::VectorXd mass_coeff(nb + nl);
    mass_coeff.head(nb).setOnes();
    mass_coeff.tail(nl) = tail_mass;

    Eigen::VectorXd x = left_null_unit_sum(M, mass_coeff, "boundary");
    double mass = x.head(nb).sum() + x.tail(nl).dot(tail_mass);
    x /= mass;

    QbdSolution sol;
    sol.boundary = x.head(nb);
    sol.first_level = x.tail(nl);
    sol.R = std::move(R);
    sol.iterations = it;
    sol.last_change = change;
    sol.spectral_radius = spectral;
    return sol;
}

double mean_latency_from_stationary(const QbdBlocks& blocks, const QbdSolution& solution,
                                    double lambda) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("mean_latency_from_stationary: lambda must be positive");
    if (std::abs(lambda - blocks.lambda) > 1e-9 * std::max(1.0, blocks.lambda))
        throw std::invalid_argument(
            "mean_latency_from_stationary: lambda does not match the chain's arrival rate");
    const int nl = (int)blocks.A1.rows();
    if (solution.spectral_radius >= 1.0)
        throw std::runtime_error("mean_latency_from_stationary: unstable chain (I - R singular)");

    Eigen::MatrixXd ImRt = (Eigen::MatrixXd::Identity(nl, nl) - solution.R).transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(ImRt);
    // u1 = pi_L1 (I-R)^{-1}; u2 = pi_L1 R (I-R)^{-2} = sum_d d pi_L1 R^d.
    Eigen::VectorXd u1 = lu.solve(solution.first_level);
    Eigen::VectorXd u2 = lu.solve(solution.R.transpose() * u1);
    if (!u1.allFinite() || !u2.allFinite())
        throw std::runtime_error("mean_latency_from_stationary: level tail sum diverged");

    double batches = blocks.boundary_weight.dot(solution.boundary) +
                     blocks.level_weight.dot(u1) + blocks.level_slope.dot(u2);
    return batches / lambda;
}

double max_throughput(ChainFamily family, int n, int k, int t, double mu, double tol) {
    check_parameters(n, k, t, 0.0, mu);
    double hi = (double)n * mu / (double)k;
    double effective_tol = tol > 0.0 ? tol : 1e-4 * hi;

    auto stable = [&](double lam) {
        return drift_margin(build_chain(family, n, k, t, lam, mu)) > 0.0;
    };

    if (stable(hi)) return hi;
    double lo = 0.0;
    while (hi - lo > effective_tol) {
        double mid = 0.5 * (lo + hi);
        (stable(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void dump_blocks_csv(const QbdBlocks& blocks, std::ostream& out) {
    auto boundary_label = [&](int i) { return describe(blocks.boundary_states[(size_t)i]); };
    auto level_label = [&](int i) {
        const WindowState& s = blocks.level_states[(size_t)i];
        long long offset = (long long)blocks.n + blocks.first_level * blocks.k - s.m;
        std::ostringstream lab;
        lab << "w=[";
        for (size_t j = 0; j < s.w.size(); ++j) {
            if (j) lab << ",";
            lab << s.w[j];
        }
        lab << "] i=" << offset;
        return lab.str();
    };
    out << "block,row_state,col_state,rate\n";
    auto emit = [&](const char* name, const Eigen::MatrixXd& m, auto&& row_label,
                    auto&& col_label) {
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c)
                if (m(r, c) != 0.0)
                    out << name << "," << row_label(r) << "," << col_label(c) << "," << m(r, c)
                        << "\n";
    };
    emit("B1", blocks.B1, boundary_label, boundary_label);
    emit("B2", blocks.B2, boundary_label, level_label);
    emit("B0", blocks.B0, level_label, boundary_label);
    emit("A0", blocks.A0, level_label, level_label);
    emit("A1", blocks.A1, level_label, level_label);
    emit("A2", blocks.A2, level_label, level_label);
}

Eigen::MatrixXd assemble_generator(const QbdBlocks& blocks, int levels) {
    if (levels < 1) throw std::invalid_argument("assemble_generator: need at least one level");
    const int nb = (int)blocks.B1.rows();
    const int nl = (int)blocks.A1.rows();
    const int total = nb + levels * nl;
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(total, total);
    Q.topLeftCorner(nb, nb) = blocks.B1;
    Q.block(0, nb, nb, nl) = blocks.B2;
    for (int d = 0; d < levels; ++d) {
        int row = nb + d * nl;
        if (d == 0)
            Q.block(row, 0, nl, nb) = blocks.B0;
        else
            Q.block(row, nb + (d - 1) * nl, nl, nl) = blocks.A0;
        Q.block(row, nb + d * nl, nl, nl) = blocks.A1;
        if (d + 1 < levels) Q.block(row, nb + (d + 1) * nl, nl, nl) = blocks.A2;
    }
    return Q;
}

Eigen::VectorXd truncated_stationary(const QbdBlocks& blocks, const QbdSolution& solution,
                                     int levels) {
    (void)blocks;
    if (levels < 1) throw std::invalid_argument("truncated_stationary: need at least one level");
    const int nb = (int)solution.boundary.size();
    const int nl = (int)solution.first_level.size();
    Eigen::VectorXd pi(nb + levels * nl);
    pi.head(nb) = solution.boundary;
    Eigen::VectorXd cur = solution.first_level;
    for (int d = 0; d < levels; ++d) {
        pi.segment(nb + d * nl, nl) = cur;
        cur = (cur.transpose() * solution.R).transpose();
    }
    return pi;
}

}  // namespace codedlat::qbd
