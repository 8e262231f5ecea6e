#include "codedlat/sim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <deque>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "codedlat/parallel.hpp"
#include "codedlat/rng.hpp"
#include "codedlat/video.hpp"

namespace codedlat::sim {

namespace {

constexpr double kZ99 = 2.5758293035489004; // standard normal 0.995 quantile

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return Rng::mix(seed ^ Rng::mix(index * 0x9e3779b97f4a7c15ull + 0x243f6a8885a308d3ull));
}

double wilson_low(double p, double n, double z) {
    const double denom = 1.0 + z * z / n;
    const double center = p + z * z / (2.0 * n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
    return std::max(0.0, (center - half) / denom);
}

double wilson_high(double p, double n, double z) {
    const double denom = 1.0 + z * z / n;
    const double center = p + z * z / (2.0 * n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
    return std::min(1.0, (center + half) / denom);
}

// Streaming mean/variance/extrema accumulator.
struct Welford {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    void add(double x) {
        if (count == 0) {
            lo = hi = x;
        } else {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        ++count;
        const double delta = x - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (x - mean);
    }

    SampleStats stats() const {
        SampleStats s;
        s.count = count;
        if (count == 0) return s;
        s.mean = mean;
        s.min = lo;
        s.max = hi;
        if (count >= 2) {
            const double var = m2 / static_cast<double>(count - 1);
            s.ci99 = kZ99 * std::sqrt(var / static_cast<double>(count));
        }
        return s;
    }

    // Exact pooled merge (parallel variance combination).
    void merge(const Welford& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        const double delta = o.mean - mean;
        const double total = static_cast<double>(count + o.count);
        m2 += o.m2 + delta * delta * static_cast<double>(count) *
                         static_cast<double>(o.count) / total;
        mean += delta * static_cast<double>(o.count) / total;
        lo = std::min(lo, o.lo);
        hi = std::max(hi, o.hi);
        count += o.count;
    }
};

// ---------------------------------------------------------------------------
// Event core
// ---------------------------------------------------------------------------

struct Event {
    double time = 0.0;
    std::uint64_t seq = 0; // insertion order breaks time ties deterministically
    enum class Type { Arrival, ChunkDone } type = Type::Arrival;
    std::size_t server = 0;
    std::uint64_t generation = 0;
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        return a.seq > b.seq;
    }
};

struct ServerState {
    std::deque<std::uint64_t> fifo; // request ids (per-server-queue policies)
    bool busy = false;
    std::uint64_t current = 0;   // request/batch id being served
    int chunk = 0;               // segment index within the current video job
    std::uint64_t generation = 0;
    double service_start = 0.0;
    double busy_time = 0.0;
};

// One file request (fork-join, probabilistic, video kinds) or one batch of
// chunk jobs (shared-buffer kinds).
struct RequestState {
    std::size_t file = 0;
    std::size_t index = 0; // arrival order, for warmup accounting
    double arrival = 0.0;
    int needed = 0;        // chunk completions that finish the request
    int completions = 0;
    bool done = false;

    // Shared-buffer bookkeeping.
    int unassigned = 0;            // chunk jobs not yet on a server
    std::uint64_t served_mask = 0; // servers that ever took a job (MDS rule)
    std::vector<std::size_t> active; // servers currently serving this request

    // Video bookkeeping.
    std::vector<double> segment_done; // per-segment completion offset D_q
    std::vector<int> segment_hits;    // chunk deliveries per segment
    int chunks_done = 0;
};

class Simulation {
public:
    Simulation(const Workload& wl, const PolicyConfig& policy, const SimOptions& options)
        : wl_(wl), policy_(policy), options_(options), rng_(options.seed),
          servers_(wl.server_count()), per_file_(wl.file_count()) {
        total_rate_ = 0.0;
        for (const FileSpec& f : wl.files) total_rate_ += f.arrival_rate;
        if (!(total_rate_ > 0.0))
            throw std::invalid_argument("simulate: workload has no arrivals");
        warmup_ = options.warmup >= 0 ? static_cast<std::size_t>(options.warmup)
                                      : options.jobs / 10;
        if (warmup_ >= options.jobs)
            throw std::invalid_argument("simulate: warmup must leave at least one request");
        keep_samples_ = options.collect_samples || !options.ccdf_thresholds.empty();
    }

    SimReport run() {
        schedule_arrival(0.0);
        while (!events_.empty()) {
            const Event ev = events_.top();
            events_.pop();
            now_ = ev.time;
            if (ev.type == Event::Type::Arrival)
                handle_arrival();
            else
                handle_chunk_done(ev);
        }
        return finish();
    }

private:
    // --- scheduling helpers ------------------------------------------------

    void push_event(Event ev) {
        ev.seq = next_seq_++;
        events_.push(ev);
    }

    void schedule_arrival(double at) {
        if (scheduled_arrivals_ >= options_.jobs) return;
        ++scheduled_arrivals_;
        Event ev;
        ev.time = at;
        ev.type = Event::Type::Arrival;
        push_event(ev);
    }

    std::size_t pick_file() {
        // Superposed Poisson stream: choose the file by arrival-rate share.
        double u = rng_.uniform() * total_rate_;
        for (std::size_t i = 0; i + 1 < wl_.file_count(); ++i) {
            u -= wl_.files[i].arrival_rate;
            if (u < 0.0) return i;
        }
        return wl_.file_count() - 1;
    }

    void start_service(std::size_t s, std::uint64_t request, int chunk) {
        ServerState& sv = servers_[s];
        assert(!sv.busy);
        sv.busy = true;
        sv.current = request;
        sv.chunk = chunk;
        ++sv.generation;
        sv.service_start = now_;
        Event ev;
        ev.time = now_ + wl_.cluster.servers[s].second.sample(rng_);
        ev.type = Event::Type::ChunkDone;
        ev.server = s;
        ev.generation = sv.generation;
        push_event(ev);
    }

    // Frees a busy server at the current instant, crediting the elapsed
    // service toward utilization and invalidating its pending completion.
    void abort_service(std::size_t s) {
        ServerState& sv = servers_[s];
        assert(sv.busy);
        sv.busy_time += now_ - sv.service_start;
        sv.busy = false;
        ++sv.generation;
    }

    void record(const RequestState& r, double value) {
        ++completed_;
        if (r.index < warmup_) return;
        overall_.add(value);
        per_file_[r.file].add(value);
        if (keep_samples_) samples_.push_back(value);
    }

    // --- arrivals ------------------------------------------------------------

    void handle_arrival() {
        const std::size_t file = pick_file();
        const std::size_t index = arrivals_++;
        // Draw the next arrival before any policy work so the arrival
        // process is one fixed stream across policies.
        schedule_arrival(now_ + rng_.exponential(total_rate_));

        const std::uint64_t id = next_request_++;
        RequestState r;
        r.file = file;
        r.index = index;
        r.arrival = now_;
        switch (policy_.kind) {
        case PolicyKind::ForkJoin: {
            r.needed = wl_.files[file].code.k;
            requests_.emplace(id, std::move(r));
            for (std::size_t s : wl_.placement_indices[file]) enqueue_chunk(s, id);
            break;
        }
        case PolicyKind::Probabilistic: {
            r.needed = wl_.files[file].code.k;
            requests_.emplace(id, std::move(r));
            const auto set =
                sample_access_set(policy_.pi.pi[file], wl_.files[file].code.k, rng_);
            for (std::size_t s : set) enqueue_chunk(s, id);
            break;
        }
        case PolicyKind::VideoProbabilistic: {
            const int L = wl_.files[file].segments;
            r.needed = wl_.files[file].code.k * L;
            r.segment_done.assign(static_cast<std::size_t>(L), 0.0);
            r.segment_hits.assign(static_cast<std::size_t>(L), 0);
            requests_.emplace(id, std::move(r));
            const auto set =
                sample_access_set(policy_.pi.pi[file], wl_.files[file].code.k, rng_);
            for (std::size_t s : set) enqueue_chunk(s, id);
            break;
        }
        case PolicyKind::MdsReservation:
        case PolicyKind::MkMn:
        case PolicyKind::RedundantFlood: {
            r.needed = wl_.files[file].code.k;
            const int jobs = policy_.kind == PolicyKind::RedundantFlood
                                 ? policy_.redundant
                                 : wl_.files[file].code.k;
            r.unassigned = jobs;
            auto [it, _] = requests_.emplace(id, std::move(r));
            batch_arrival(id, it->second);
            break;
        }
        case PolicyKind::DelayedSingleFork:
            // Handled without the event engine; see run_scenario.
            break;
        }
    }

    // --- per-server FIFO kinds ----------------------------------------------

    void enqueue_chunk(std::size_t s, std::uint64_t id) {
        ServerState& sv = servers_[s];
        if (!sv.busy) {
            start_service(s, id, 0);
            requests_.at(id).active.push_back(s);
        } else {
            sv.fifo.push_back(id);
        }
    }

    // Starts the next live queued request on an idle server.
    void dispatch_fifo(std::size_t s) {
        ServerState& sv = servers_[s];
        while (!sv.fifo.empty()) {
            const std::uint64_t id = sv.fifo.front();
            sv.fifo.pop_front();
            auto it = requests_.find(id);
            if (it == requests_.end() || it->second.done) continue; // cancelled
            start_service(s, id, 0);
            it->second.active.push_back(s);
            return;
        }
        // Work conservation: the server idles only with an empty queue.
        assert(sv.fifo.empty());
    }

    void detach_active(RequestState& r, std::size_t s) {
        auto pos = std::find(r.active.begin(), r.active.end(), s);
        assert(pos != r.active.end());
        r.active.erase(pos);
    }

    void finish_request(std::uint64_t id, RequestState& r, double sample_value) {
        r.done = true;
        record(r, sample_value);
        // Cancellation: withdraw queued siblings lazily (the done flag) and
        // abort running ones when the policy says so.
        std::vector<std::size_t> freed;
        if (policy_.abort_in_service) {
            freed = r.active;
            std::sort(freed.begin(), freed.end());
            for (std::size_t s : freed) abort_service(s);
        }
        if (r.active.empty() || policy_.abort_in_service) requests_.erase(id);
        for (std::size_t s : freed) dispatch_fifo(s);
    }

    void handle_chunk_done(const Event& ev) {
        ServerState& sv = servers_[ev.server];
        if (!sv.busy || sv.generation != ev.generation) return; // superseded
        const std::uint64_t id = sv.current;
        switch (policy_.kind) {
        case PolicyKind::ForkJoin:
        case PolicyKind::Probabilistic:
            chunk_done_flat(ev.server, id);
            break;
        case PolicyKind::VideoProbabilistic:
            chunk_done_video(ev.server, id);
            break;
        default:
            chunk_done_batch(ev.server, id);
            break;
        }
    }

    void chunk_done_flat(std::size_t s, std::uint64_t id) {
        abort_service(s); // normal completion: same accounting, new generation
        auto it = requests_.find(id);
        assert(it != requests_.end());
        RequestState& r = it->second;
        if (r.done) {
            // A straggler the policy let run to completion.
            detach_active(r, s);
            if (r.active.empty()) requests_.erase(it);
            dispatch_fifo(s);
            return;
        }
        detach_active(r, s);
        ++r.completions;
        if (r.completions >= r.needed) finish_request(id, r, now_ - r.arrival);
        dispatch_fifo(s);
    }

    void chunk_done_video(std::size_t s, std::uint64_t id) {
        ServerState& sv = servers_[s];
        const int chunk = sv.chunk;
        abort_service(s);
        RequestState& r = requests_.at(id);
        const int L = wl_.files[r.file].segments;
        r.segment_done[static_cast<std::size_t>(chunk)] =
            std::max(r.segment_done[static_cast<std::size_t>(chunk)], now_ - r.arrival);
        ++r.segment_hits[static_cast<std::size_t>(chunk)];
        ++r.chunks_done;
        if (r.chunks_done == r.needed) {
            const double stall = video::play_time_stall(
                r.segment_done, policy_.startup_delay, wl_.files[r.file].segment_seconds);
            detach_active(r, s);
            r.done = true;
            record(r, stall);
            requests_.erase(id);
        } else if (chunk + 1 < L) {
            // Same request, next segment on this server.
            start_service(s, id, chunk + 1);
            return;
        } else {
            detach_active(r, s);
        }
        dispatch_fifo(s);
    }

    // --- shared-buffer kinds --------------------------------------------------

    bool eligible(const RequestState& batch, std::size_t s) const {
        if (policy_.kind == PolicyKind::MkMn) return true;
        return (batch.served_mask >> s & 1ull) == 0;
    }

    // Assigns one chunk job of the batch to an idle server.
    void assign_job(std::uint64_t id, RequestState& batch, std::size_t s) {
        assert(batch.unassigned > 0);
        assert(eligible(batch, s));
        batch.served_mask |= 1ull << s;
        --batch.unassigned;
        batch.active.push_back(s);
        start_service(s, id, 0);
        if (batch.unassigned == 0)
            buffer_.erase(std::find(buffer_.begin(), buffer_.end(), id));
    }

    std::size_t window() const {
        return policy_.kind == PolicyKind::RedundantFlood
                   ? buffer_.size()
                   : std::min<std::size_t>(buffer_.size(),
                                           static_cast<std::size_t>(policy_.reservation));
    }

    void batch_arrival(std::uint64_t id, RequestState& batch) {
        if (policy_.kind != PolicyKind::RedundantFlood && policy_.reservation == 0) {
            buffer_.push_back(id);
            atomic_starts();
            return;
        }
        const bool may_start = policy_.kind == PolicyKind::RedundantFlood ||
                               buffer_.size() < static_cast<std::size_t>(policy_.reservation);
        buffer_.push_back(id);
        if (may_start) {
            for (std::size_t s = 0; s < servers_.size() && batch.unassigned > 0; ++s)
                if (!servers_[s].busy && eligible(batch, s)) assign_job(id, batch, s);
        }
    }

    // Zero-window rule: only the head batch may start, and only as a whole.
    void atomic_starts() {
        while (!buffer_.empty()) {
            const std::uint64_t id = buffer_.front();
            RequestState& batch = requests_.at(id);
            std::vector<std::size_t> idle;
            for (std::size_t s = 0; s < servers_.size(); ++s)
                if (!servers_[s].busy && eligible(batch, s)) idle.push_back(s);
            if (idle.size() < static_cast<std::size_t>(batch.unassigned)) return;
            const int jobs = batch.unassigned;
            for (int j = 0; j < jobs; ++j)
                assign_job(id, batch, idle[static_cast<std::size_t>(j)]);
        }
    }

    // Departure-side dispatch for a freed server under a reservation window.
    void dispatch_buffer(std::size_t s) {
        if (policy_.kind != PolicyKind::RedundantFlood && policy_.reservation == 0) {
            atomic_starts();
            return;
        }
        const std::size_t limit = window();
        for (std::size_t pos = 0; pos < limit; ++pos) {
            const std::uint64_t id = buffer_[pos];
            RequestState& batch = requests_.at(id);
            if (!eligible(batch, s)) continue;
            const bool head_emptied = pos == 0 && batch.unassigned == 1;
            assign_job(id, batch, s);
            if (head_emptied) window_slide_fill();
            return;
        }
    }

    // After the head batch leaves a full window, the batch sliding into the
    // window's last slot catches up on the servers left idle by the
    // distinct-server rule.
    void window_slide_fill() {
        if (policy_.kind == PolicyKind::RedundantFlood) return; // window unbounded
        const std::size_t t = static_cast<std::size_t>(policy_.reservation);
        while (buffer_.size() >= t && t >= 1) {
            const std::uint64_t id = buffer_[t - 1];
            RequestState& batch = requests_.at(id);
            for (std::size_t s = 0; s < servers_.size() && batch.unassigned > 0; ++s)
                if (!servers_[s].busy && eligible(batch, s)) assign_job(id, batch, s);
            if (batch.unassigned > 0) return; // still waiting: fill complete
        }
    }

    void chunk_done_batch(std::size_t s, std::uint64_t id) {
        abort_service(s);
        RequestState& batch = requests_.at(id);
        detach_active(batch, s);
        ++batch.completions;
        std::vector<std::size_t> freed{s};
        if (!batch.done && batch.completions >= batch.needed) {
            batch.done = true;
            record(batch, now_ - batch.arrival);
            // Flooded requests may still hold queued or running chunks.
            if (batch.unassigned > 0)
                buffer_.erase(std::find(buffer_.begin(), buffer_.end(), id));
            if (policy_.abort_in_service) {
                for (std::size_t other : batch.active) {
                    abort_service(other);
                    freed.push_back(other);
                }
                batch.active.clear();
            }
            if (batch.active.empty()) requests_.erase(id);
            std::sort(freed.begin(), freed.end());
        } else if (batch.done && batch.active.empty()) {
            requests_.erase(id); // last non-aborted straggler finished
        }
        for (std::size_t f : freed) dispatch_buffer(f);
    }

    // --- wrap-up ---------------------------------------------------------------

    SimReport finish() {
        SimReport report;
        report.jobs_completed = completed_;
        report.overall = overall_.stats();
        report.per_file.reserve(per_file_.size());
        for (const Welford& w : per_file_) report.per_file.push_back(w.stats());
        report.utilization.reserve(servers_.size());
        for (const ServerState& sv : servers_) {
            assert(!sv.busy);
            report.utilization.push_back(now_ > 0.0 ? sv.busy_time / now_ : 0.0);
        }
        for (std::size_t s = 0; s < servers_.size(); ++s) {
            if (report.utilization[s] >= 0.999) {
                report.warnings.push_back("server '" + wl_.cluster.servers[s].first +
                                          "' utilization " +
                                          std::to_string(report.utilization[s]) +
                                          " suggests instability");
            }
        }
        if (report.overall.count > 0 && report.overall.mean > options_.divergence_ceiling)
            report.warnings.push_back("mean latency exceeds the divergence ceiling");
        if (!options_.ccdf_thresholds.empty() && !samples_.empty())
            report.ccdf = empirical_ccdf(samples_, options_.ccdf_thresholds);
        if (options_.collect_samples) report.samples = std::move(samples_);
        return report;
    }

    const Workload& wl_;
    const PolicyConfig& policy_;
    const SimOptions& options_;
    Rng rng_;
    std::vector<ServerState> servers_;
    std::vector<Welford> per_file_;
    Welford overall_;
    std::vector<double> samples_;
    bool keep_samples_ = false;

    std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_request_ = 0;
    std::unordered_map<std::uint64_t, RequestState> requests_;
    std::vector<std::uint64_t> buffer_; // waiting batches, arrival order

    double total_rate_ = 0.0;
    double now_ = 0.0;
    std::size_t arrivals_ = 0;
    std::size_t scheduled_arrivals_ = 0;
    std::size_t completed_ = 0;
    std::size_t warmup_ = 0;
};

SimReport run_single_fork(const PolicyConfig& policy, const SimOptions& options) {
    relaunch::check_plan(policy.fork_plan);
    const std::size_t warmup =
        options.warmup >= 0 ? static_cast<std::size_t>(options.warmup) : options.jobs / 10;
    if (warmup >= options.jobs)
        throw std::invalid_argument("simulate: warmup must leave at least one request");
    Welford agg;
    std::vector<double> samples;
    Rng base(options.seed);
    const relaunch::ForkPlan& p = policy.fork_plan;
    std::vector<double> done;
    for (std::size_t rep = 0; rep < options.jobs; ++rep) {
        Rng rng = base.fork(rep);
        done.clear();
        for (int i = 0; i < p.n0; ++i) done.push_back(p.c + rng.exponential(p.mu));
        std::nth_element(done.begin(), done.begin() + (p.l0 - 1), done.end());
        const double t1 = done[static_cast<std::size_t>(p.l0 - 1)];
        for (int i = p.n0; i < p.n; ++i) done.push_back(t1 + p.c + rng.exponential(p.mu));
        std::nth_element(done.begin(), done.begin() + (p.k - 1), done.end());
        const double t2 = done[static_cast<std::size_t>(p.k - 1)];
        if (rep < warmup) continue;
        agg.add(t2);
        if (options.collect_samples || !options.ccdf_thresholds.empty())
            samples.push_back(t2);
    }
    SimReport report;
    report.jobs_completed = options.jobs;
    report.overall = agg.stats();
    report.per_file.push_back(report.overall);
    if (!options.ccdf_thresholds.empty() && !samples.empty())
        report.ccdf = empirical_ccdf(samples, options.ccdf_thresholds);
    if (options.collect_samples) report.samples = std::move(samples);
    return report;
}

} // namespace

std::string to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::ForkJoin: return "fork-join";
    case PolicyKind::Probabilistic: return "probabilistic";
    case PolicyKind::MdsReservation: return "mds-reservation";
    case PolicyKind::MkMn: return "pooled-batch";
    case PolicyKind::RedundantFlood: return "redundant-flood";
    case PolicyKind::DelayedSingleFork: return "delayed-single-fork";
    case PolicyKind::VideoProbabilistic: return "video-probabilistic";
    }
    return "unknown";
}

void validate_policy(const Workload& wl, const PolicyConfig& policy) {
    switch (policy.kind) {
    case PolicyKind::ForkJoin:
        break;
    case PolicyKind::Probabilistic:
    case PolicyKind::VideoProbabilistic: {
        auto errors = check_access_matrix(wl, policy.pi);
        if (!errors.empty())
            throw std::invalid_argument("policy: " + errors.front());
        if (policy.kind == PolicyKind::VideoProbabilistic) {
            if (!(policy.startup_delay >= 0.0))
                throw std::invalid_argument("policy: startup delay must be non-negative");
            for (const FileSpec& f : wl.files)
                if (!(f.segment_seconds > 0.0))
                    throw std::invalid_argument("policy: video replay needs a positive "
                                                "segment duration for file '" +
                                                f.id + "'");
        }
        break;
    }
    case PolicyKind::MdsReservation:
    case PolicyKind::MkMn:
    case PolicyKind::RedundantFlood: {
        if (wl.server_count() > 64)
            throw std::invalid_argument("policy: shared-buffer kinds support at most 64 "
                                        "servers");
        if (policy.kind != PolicyKind::RedundantFlood && policy.reservation < 0)
            throw std::invalid_argument("policy: reservation window must be non-negative");
        for (const FileSpec& f : wl.files) {
            if (static_cast<std::size_t>(f.code.n) != wl.server_count())
                throw std::invalid_argument(
                    "policy: shared-buffer kinds need every file coded across all servers "
                    "(file '" + f.id + "')");
            if (policy.kind == PolicyKind::RedundantFlood &&
                (policy.redundant < f.code.k || policy.redundant > f.code.n))
                throw std::invalid_argument(
                    "policy: redundant level must lie in [k, n] (file '" + f.id + "')");
        }
        break;
    }
    case PolicyKind::DelayedSingleFork:
        relaunch::check_plan(policy.fork_plan);
        break;
    }
}

SimReport run_scenario(const Workload& wl, const PolicyConfig& policy,
                       const SimOptions& options) {
    if (options.jobs == 0) throw std::invalid_argument("simulate: jobs must be positive");
    validate_policy(wl, policy);
    if (policy.kind == PolicyKind::DelayedSingleFork)
        return run_single_fork(policy, options);
    Simulation s(wl, policy, options);
    return s.run();
}

SimReport run_replications(const Workload& wl, const PolicyConfig& policy,
                           const SimOptions& options, std::size_t replications, int threads) {
    if (replications == 0)
        throw std::invalid_argument("simulate: at least one replication required");
    SimOptions per_rep = options;
    per_rep.collect_samples = true;
    auto reports = parallel_map<SimReport>(replications, threads, [&](std::size_t i) {
        SimOptions opts = per_rep;
        opts.seed = derive_seed(options.seed, i);
        return run_scenario(wl, policy, opts);
    });
    // Serial, index-ordered merge keeps the result independent of threads.
    SimReport merged;
    std::vector<double> samples;
    Welford overall;
    std::vector<Welford> per_file(wl.file_count());
    std::vector<double> util(wl.server_count(), 0.0);
    for (const SimReport& rep : reports) {
        merged.jobs_completed += rep.jobs_completed;
        samples.insert(samples.end(), rep.samples.begin(), rep.samples.end());
        for (std::size_t j = 0; j < util.size(); ++j) util[j] += rep.utilization[j];
        for (const std::string& w : rep.warnings)
            if (std::find(merged.warnings.begin(), merged.warnings.end(), w) ==
                merged.warnings.end())
                merged.warnings.push_back(w);
    }
    for (double x : samples) overall.add(x);
    merged.overall = overall.stats();
    // Per-file stats rebuilt per replication are pooled exactly.
    for (std::size_t f = 0; f < wl.file_count(); ++f) {
        Welford pooled;
        for (const SimReport& rep : reports) {
            Welford w;
            w.count = rep.per_file[f].count;
            w.mean = rep.per_file[f].mean;
            if (w.count >= 2) {
                const double half = rep.per_file[f].ci99 / kZ99;
                w.m2 = half * half * static_cast<double>(w.count) *
                       static_cast<double>(w.count - 1);
            }
            w.lo = rep.per_file[f].min;
            w.hi = rep.per_file[f].max;
            pooled.merge(w);
        }
        merged.per_file.push_back(pooled.stats());
    }
    for (std::size_t j = 0; j < util.size(); ++j)
        merged.utilization.push_back(util[j] / static_cast<double>(replications));
    if (!options.ccdf_thresholds.empty() && !samples.empty())
        merged.ccdf = empirical_ccdf(samples, options.ccdf_thresholds);
    if (options.collect_samples) merged.samples = std::move(samples);
    return merged;
}

SimReport video_replay(const Workload& wl, const AccessMatrix& pi, double startup_delay,
                       const SimOptions& options) {
    PolicyConfig policy;
    policy.kind = PolicyKind::VideoProbabilistic;
    policy.pi = pi;
    policy.startup_delay = startup_delay;
    return run_scenario(wl, policy, options);
}

std::vector<PolicyCurve> compare_policies(const Workload& wl,
                                          const std::vector<NamedPolicy>& policies,
                                          const std::vector<double>& lambda_grid,
                                          const SimOptions& options, int threads) {
    if (policies.empty() || lambda_grid.empty())
        throw std::invalid_argument("compare: need at least one policy and one grid point");
    const std::size_t points = policies.size() * lambda_grid.size();
    auto cell = parallel_map<SimReport>(points, threads, [&](std::size_t idx) {
        const std::size_t p = idx / lambda_grid.size();
        const std::size_t g = idx % lambda_grid.size();
        Workload scaled = wl;
        for (FileSpec& f : scaled.files) f.arrival_rate = lambda_grid[g];
        SimOptions opts = options;
        opts.seed = derive_seed(options.seed, g); // same stream for every policy
        return run_scenario(scaled, policies[p].policy, opts);
    });
    std::vector<PolicyCurve> curves;
    curves.reserve(policies.size());
    for (std::size_t p = 0; p < policies.size(); ++p) {
        PolicyCurve curve;
        curve.label = policies[p].label;
        for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
            const SimReport& rep = cell[p * lambda_grid.size() + g];
            curve.arrival_rate.push_back(lambda_grid[g]);
            curve.mean_latency.push_back(rep.overall.mean);
            curve.ci99.push_back(rep.overall.ci99);
            bool diverged = rep.overall.mean > options.divergence_ceiling;
            for (const std::string& w : rep.warnings)
                if (w.find("instability") != std::string::npos) diverged = true;
            curve.diverged.push_back(diverged);
        }
        curves.push_back(std::move(curve));
    }
    return curves;
}

std::vector<FloodPoint> redundant_flood_experiment(int n, int k, const std::vector<int>& v_grid,
                                                   double lambda, double mu, std::size_t jobs,
                                                   std::uint64_t seed) {
    if (n < 1 || k < 1 || k > n)
        throw std::invalid_argument("flood: need 1 <= k <= n");
    if (!(lambda > 0.0) || !(mu > 0.0))
        throw std::invalid_argument("flood: rates must be positive");
    Cluster cluster;
    for (int j = 0; j < n; ++j)
        cluster.servers.emplace_back("s" + std::to_string(j), ServiceModel::exponential(mu));
    FileSpec file;
    file.id = "f0";
    file.arrival_rate = lambda;
    file.code = {n, k};
    for (int j = 0; j < n; ++j) file.placement.push_back(cluster.servers[j].first);
    auto v = validate_workload({file}, cluster);
    if (!v.ok()) throw std::invalid_argument("flood: " + v.errors.front());
    std::vector<FloodPoint> out;
    out.reserve(v_grid.size());
    for (int level : v_grid) {
        PolicyConfig policy;
        policy.kind = PolicyKind::RedundantFlood;
        policy.redundant = level;
        SimOptions options;
        options.jobs = jobs;
        options.seed = seed;
        SimReport rep = run_scenario(*v.workload, policy, options);
        out.push_back({level, rep.overall.mean, rep.overall.ci99});
    }
    return out;
}

ForkMonteCarlo single_fork_monte_carlo(const relaunch::ForkPlan& plan, std::size_t reps,
                                       std::uint64_t seed, int threads) {
    relaunch::check_plan(plan);
    if (reps == 0) throw std::invalid_argument("monte carlo: reps must be positive");
    Rng base(seed);
    auto outcomes =
        parallel_map<std::pair<double, double>>(reps, threads, [&](std::size_t rep) {
            Rng rng = base.fork(rep);
            std::vector<double> done;
            done.reserve(static_cast<std::size_t>(plan.n));
            for (int i = 0; i < plan.n0; ++i) done.push_back(plan.c + rng.exponential(plan.mu));
            std::nth_element(done.begin(), done.begin() + (plan.l0 - 1), done.end());
            const double t1 = done[static_cast<std::size_t>(plan.l0 - 1)];
            for (int i = plan.n0; i < plan.n; ++i)
                done.push_back(t1 + plan.c + rng.exponential(plan.mu));
            std::nth_element(done.begin(), done.begin() + (plan.k - 1), done.end());
            const double t2 = done[static_cast<std::size_t>(plan.k - 1)];
            // Busy time: every chunk runs from its own start until it
            // finishes or is cancelled at t2 (sum is permutation-safe).
            double busy = 0.0;
            for (double d : done) busy += std::min(d, t2);
            busy -= static_cast<double>(plan.n - plan.n0) * t1;
            return std::pair<double, double>{t2, plan.cost_rate * busy};
        });
    Welford s, w;
    for (const auto& [t2, cost] : outcomes) {
        s.add(t2);
        w.add(cost);
    }
    ForkMonteCarlo result;
    result.reps = reps;
    result.mean_completion = s.stats().mean;
    result.mean_cost = w.stats().mean;
    if (reps >= 2) {
        result.completion_se = s.stats().ci99 / kZ99;
        result.cost_se = w.stats().ci99 / kZ99;
    }
    return result;
}

std::vector<CcdfPoint> empirical_ccdf(const std::vector<double>& samples,
                                      const std::vector<double>& thresholds) {
    if (samples.empty()) throw std::invalid_argument("ccdf: samples must be non-empty");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    std::vector<CcdfPoint> out;
    out.reserve(thresholds.size());
    for (double x : thresholds) {
        const auto first = std::lower_bound(sorted.begin(), sorted.end(), x);
        const double hits = static_cast<double>(sorted.end() - first);
        CcdfPoint point;
        point.threshold = x;
        point.probability = hits / n;
        point.wilson_low = wilson_low(point.probability, n, kZ99);
        point.wilson_high = wilson_high(point.probability, n, kZ99);
        out.push_back(point);
    }
    return out;
}

SampleStats summarize(const std::vector<double>& samples) {
    Welford w;
    for (double x : samples) w.add(x);
    return w.stats();
}

} // namespace codedlat::sim
