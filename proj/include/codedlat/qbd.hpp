#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace codedlat::qbd {

// One state of a reservation-window Markov chain: w[i] is the number of
// buffered (not yet scheduled) jobs of the (i+1)-th waiting batch for the
// first t waiting batches, and m is the total number of chunk requests
// present (buffered plus in service).  The window vector is empty for
// chains that do not track per-batch buffer occupancy (t = 0, or the
// pooled relaxation).
struct WindowState {
    std::vector<int> w;
    long long m = 0;

    bool operator==(const WindowState& other) const { return w == other.w && m == other.m; }
};

// Human-readable "w=[a,b,..] m=12" label used in errors and CSV dumps.
std::string describe(const WindowState& state);

// Bookkeeping derived from a window state.
struct Decoded {
    int q = 0;                    // occupied window slots (leading nonzero w entries)
    long long b = 0;              // waiting batches (those with >= 1 buffered job)
    int z = 0;                    // idle servers
    std::vector<int> in_service;  // in_service[i]: jobs of window batch i+1 on servers
    long long old_jobs = 0;       // in-service jobs of batches with no buffered jobs left
};

// Decodes (q, b, z, s, old_jobs) for an (n, k) system with window length t.
// Throws std::invalid_argument naming the state if the counters are
// mutually inconsistent (no reachable configuration corresponds to them).
Decoded decode_state(const WindowState& state, int n, int k, int t);

// Same decode but returns nullopt instead of throwing; used to enumerate
// the reachable state space.
std::optional<Decoded> try_decode_state(const WindowState& state, int n, int k, int t);

enum class ChainFamily {
    Reservation,  // window-reserving scheduler: at most t batches advance out of order
    MkMn          // pooled relaxation: batch arrivals into a shared n-server job queue
};

// Level-structured generator of a batch-service Markov chain.
//
// Levels are indexed by j >= first_level; level j holds the states with
// m in [n-k+1+jk, n+jk], each level sharing one template (same window
// vectors, m encoded by offset i = n + jk - m in {0..k-1}).  States with
// m <= boundary_top form the boundary.  The generator has the block
// tridiagonal form
//     [ B1 B2          ]
//     [ B0 A1 A2       ]
//     [    A0 A1 A2    ]
//     [       ...      ]
// with row sums zero and non-negative off-diagonal rates.
struct QbdBlocks {
    int n = 0;
    int k = 0;
    int t = 0;
    double lambda = 0.0;
    double mu = 0.0;
    ChainFamily family = ChainFamily::Reservation;

    std::vector<WindowState> boundary_states;  // explicit (w, m), m <= boundary_top
    std::vector<WindowState> level_states;     // instantiated at level first_level
    long long boundary_top = 0;
    long long first_level = 0;

    Eigen::MatrixXd B1, B2, B0, A0, A1, A2;

    // Expected-batches-in-system weight per state, used with Little's law
    // to turn the stationary distribution into a mean batch latency.  A
    // level state i at level first_level + d weighs
    // level_weight[i] + d * level_slope[i].
    Eigen::VectorXd boundary_weight, level_weight, level_slope;
};

// Builds the Markov chain of the window-reserving scheduler for an (n, k)
// system with window length t >= 0, batch arrival rate lambda, and
// exponential per-job service rate mu.  Throws std::invalid_argument on
// bad parameters and std::runtime_error if transition generation ever
// produces a state outside the enumerated space (naming the state).
QbdBlocks build_reservation_chain(int n, int k, int t, double lambda, double mu);

// Builds the pooled relaxation: batches of k jobs arrive at rate lambda
// into a common queue drained by n rate-mu servers with no per-batch
// server-distinctness constraint.  The window parameter t only widens the
// boundary (levels start at t+1), matching the reservation chain's shape.
QbdBlocks build_mkmn_chain(int n, int k, int t, double lambda, double mu);

struct SolveOptions {
    double tol = 1e-10;        // entrywise convergence threshold for R
    int max_iterations = 100000;
};

struct QbdSolution {
    Eigen::VectorXd boundary;     // stationary mass of boundary states
    Eigen::VectorXd first_level;  // stationary mass of level first_level
    Eigen::MatrixXd R;            // level recursion: pi_{j+1} = pi_j R
    int iterations = 0;
    double last_change = 0.0;     // final entrywise change of R
    double spectral_radius = 0.0; // of the converged R
};

// Solves for the stationary distribution by successive substitution on
// the quadratic matrix equation A2 + R A1 + R^2 A0 = 0, followed by a
// finite linear solve for the boundary.  Throws std::runtime_error with a
// spectral-radius estimate if the iteration fails to converge (unstable
// chain or unreachable tolerance).
QbdSolution solve_qbd(const QbdBlocks& blocks, const SolveOptions& options = {});

// Mean batch latency via Little's law: E[batches in system] / lambda,
// with the per-state batch counts taken from the blocks' weight vectors
// and the level tail summed in closed form through (I - R)^{-1}.
// Throws std::runtime_error if I - R is singular (unstable chain) and
// std::invalid_argument if lambda <= 0.
double mean_latency_from_stationary(const QbdBlocks& blocks, const QbdSolution& solution,
                                    double lambda);

// Largest stable batch arrival rate, found by bisection over (0, n mu / k]
// against the mean-drift condition of the repeating blocks (equivalent to
// spectral radius of R < 1).  tol <= 0 selects the default 1e-4 * n mu / k.
double max_throughput(ChainFamily family, int n, int k, int t, double mu, double tol = 0.0);

// Writes every block entry as one CSV row "block,row_state,col_state,rate".
void dump_blocks_csv(const QbdBlocks& blocks, std::ostream& out);

// Dense generator of the chain truncated after `levels` repeating levels.
// Rows of the last level are missing their upward rates, so only earlier
// rows sum to zero.  Ordering: boundary states, then levels in order.
Eigen::MatrixXd assemble_generator(const QbdBlocks& blocks, int levels);

// Stationary mass of the same truncated state list (not renormalized).
Eigen::VectorXd truncated_stationary(const QbdBlocks& blocks, const QbdSolution& solution,
                                     int levels);

}  // namespace codedlat::qbd
