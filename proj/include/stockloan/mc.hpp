#pragma once

// Monte Carlo ground truth for the closed forms. Simulates the discounted
// price as an exact log-normal walk, stops it at threshold rules, and returns
// mean/standard-error estimates. Paths are independent and keyed by a
// counter-based RNG, so estimates are bit-identical for any thread count:
// per-block partial sums are combined in fixed block order.
//
// Barrier handling: with bridge_correction the engine emulates continuous
// monitoring — a step whose endpoint lies beyond a barrier is a certain
// crossing, interior crossings fire with probability
// exp(-2 d0 d1 / (sigma^2 dt)), and stopped paths pay the barrier-level
// payoff. Without it, monitoring is plain discrete (payoff at the overshooting
// grid state), which carries the usual O(sqrt(dt)) barrier bias.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "stockloan/errors.hpp"
#include "stockloan/model.hpp"
#include "stockloan/philox.hpp"

namespace stockloan {

struct SimConfig {
    long n_paths = 100000;
    double dt = 1.0 / 2000.0;
    double horizon = 200.0; // years; paths alive past this are censored
    std::uint64_t seed = 0;
    bool bridge_correction = true;
    int n_threads = 0; // 0 = hardware concurrency

    void validate() const {
        if (n_paths < 1)
            throw InvalidParams("SimConfig: n_paths must be >= 1");
        if (!(dt > 0.0))
            throw InvalidParams("SimConfig: dt must be > 0");
        if (!(horizon >= 100.0 * dt))
            throw InvalidParams("SimConfig: horizon must be >= 100*dt");
    }
};

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
    long n_censored = 0; // paths that reached the horizon unstopped
    std::uint64_t seed = 0;

    bool horizon_warning() const {
        return n_paths > 0 && static_cast<double>(n_censored) / n_paths > 1e-3;
    }
};

// Threshold stopping rule: exercise at the first time the discounted price
// reaches b (capped by L when present), terminate at a with margin k. The
// principal q fixes the exercise payoff (S ∧ L) - q.
struct StoppingRule {
    double a = 0.0;
    double b = 0.0;
    std::optional<double> cap;
    double margin = 0.0;
    double q = 0.0;
};

namespace detail {

struct EngineConfig {
    double s0 = 0.0;
    double a = 0.0;
    double q = 0.0;
    double k = 0.0;
    std::optional<double> cap;
    std::vector<double> uppers; // ascending candidate thresholds
    double drift = 0.0;         // per-step drift of ln(discounted price)
    double sig_sqdt = 0.0;
    double sig2dt = 0.0; // sigma^2 * dt (bridge denominator)
    double dt = 0.0;
    long max_steps = 0;
    double rate = 0.0;    // payoff weight e^{rate * t}
    bool laplace = false; // payoff 1 at the upper barrier, 0 at the lower
    bool bridge = true;
    long n_paths = 0;
    std::uint64_t seed = 0;
    int n_threads = 0;
};

struct PartialSum {
    double sum = 0.0;
    double sum_sq = 0.0;
    long censored = 0;
};

inline double upper_payoff(const EngineConfig& ec, double level_or_state, double t) {
    if (ec.laplace)
        return std::exp(ec.rate * t);
    double v = level_or_state;
    if (ec.cap)
        v = std::min(v, *ec.cap);
    return std::exp(ec.rate * t) * std::max(0.0, v - ec.q);
}

inline double lower_payoff(const EngineConfig& ec, double state, double t) {
    if (ec.laplace)
        return 0.0;
    return ec.k * std::exp(ec.rate * t) * state;
}

// Walks one path and records the payoff of every candidate threshold.
// Candidates stop in ascending order; `payoffs` must have uppers.size() slots
// and `censored` flags likewise.
inline void walk_path(const EngineConfig& ec, std::uint64_t path,
                      std::span<const double> log_uppers, std::span<double> payoffs,
                      std::span<unsigned char> censored) {
    const std::size_t n_cand = ec.uppers.size();
    const double la = std::log(ec.a);
    std::size_t j = 0;

    // t = 0 placements: termination dominates (tau_a <= tau convention).
    if (ec.s0 <= ec.a) {
        for (std::size_t i = 0; i < n_cand; ++i)
            payoffs[i] = lower_payoff(ec, ec.s0, 0.0);
        return;
    }
    while (j < n_cand && ec.s0 >= ec.uppers[j]) {
        payoffs[j] = upper_payoff(ec, ec.s0, 0.0);
        ++j;
    }
    if (j == n_cand)
        return;

    double x = std::log(ec.s0);
    for (long step = 1; step <= ec.max_steps; ++step) {
        const auto pair = rng::draw_pair(ec.seed, path, static_cast<std::uint32_t>(step), 0);
        const double z = rng::inv_normal_cdf(rng::to_uniform(pair.first));
        const double x_new = x + ec.drift + ec.sig_sqdt * z;
        const double t = static_cast<double>(step) * ec.dt;

        if (ec.bridge) {
            // Upper crossings: certain when the endpoint is beyond (arg >= 0),
            // sampled from the bridge probability otherwise. Crossing
            // probabilities decrease with the threshold, so the stopped set is
            // a prefix and one uniform couples all candidates.
            const double u_up = rng::to_uniform(pair.second);
            while (j < n_cand) {
                const double arg =
                    -2.0 * (log_uppers[j] - x) * (log_uppers[j] - x_new) / ec.sig2dt;
                if (arg < -40.0)
                    break;
                if (arg < 0.0 && u_up >= std::exp(arg))
                    break;
                payoffs[j] = upper_payoff(ec, ec.uppers[j], t);
                ++j;
            }
            if (j == n_cand)
                return;
            const double arg_l = -2.0 * (x - la) * (x_new - la) / ec.sig2dt;
            if (arg_l >= -40.0) {
                const bool certain = arg_l >= 0.0;
                bool hit = certain;
                if (!certain) {
                    const auto pair2 =
                        rng::draw_pair(ec.seed, path, static_cast<std::uint32_t>(step), 1);
                    hit = rng::to_uniform(pair2.first) < std::exp(arg_l);
                }
                if (hit) {
                    for (std::size_t i = j; i < n_cand; ++i)
                        payoffs[i] = lower_payoff(ec, ec.a, t);
                    return;
                }
            }
        } else {
            if (x_new <= la) {
                const double state = std::exp(x_new);
                for (std::size_t i = j; i < n_cand; ++i)
                    payoffs[i] = lower_payoff(ec, state, t);
                return;
            }
            if (x_new >= log_uppers[j]) {
                const double state = std::exp(x_new);
                while (j < n_cand && x_new >= log_uppers[j]) {
                    payoffs[j] = upper_payoff(ec, state, t);
                    ++j;
                }
                if (j == n_cand)
                    return;
            }
        }
        x = x_new;
    }
    for (std::size_t i = j; i < n_cand; ++i) {
        payoffs[i] = 0.0; // censored paths contribute zero
        censored[i] = 1;
    }
}

inline std::vector<MCEstimate> run_engine(const EngineConfig& ec) {
    const std::size_t n_cand = ec.uppers.size();
    constexpr long kBlock = 8192;
    const long n_blocks = (ec.n_paths + kBlock - 1) / kBlock;
    std::vector<std::vector<PartialSum>> blocks(static_cast<std::size_t>(n_blocks),
                                                std::vector<PartialSum>(n_cand));

    std::vector<double> log_uppers(n_cand);
    for (std::size_t i = 0; i < n_cand; ++i)
        log_uppers[i] = std::log(ec.uppers[i]);

    auto worker = [&](std::atomic<long>& next) {
        std::vector<double> payoffs(n_cand);
        std::vector<unsigned char> censored(n_cand);
        for (;;) {
            const long blk = next.fetch_add(1);
            if (blk >= n_blocks)
                return;
            auto& acc = blocks[static_cast<std::size_t>(blk)];
            const long lo = blk * kBlock;
            const long hi = std::min(ec.n_paths, lo + kBlock);
            for (long p = lo; p < hi; ++p) {
                std::fill(payoffs.begin(), payoffs.end(), 0.0);
                std::fill(censored.begin(), censored.end(), 0);
                walk_path(ec, static_cast<std::uint64_t>(p), log_uppers, payoffs, censored);
                for (std::size_t i = 0; i < n_cand; ++i) {
                    acc[i].sum += payoffs[i];
                    acc[i].sum_sq += payoffs[i] * payoffs[i];
                    acc[i].censored += censored[i];
                }
            }
        }
    };

    long n_threads = ec.n_threads > 0
                         ? ec.n_threads
                         : static_cast<long>(std::thread::hardware_concurrency());
    n_threads = std::max<long>(1, std::min<long>(n_threads, n_blocks));
    std::atomic<long> next{0};
    if (n_threads == 1) {
        worker(next);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i)
            pool.emplace_back([&] { worker(next); });
        for (auto& th : pool)
            th.join();
    }

    std::vector<MCEstimate> out(n_cand);
    for (std::size_t i = 0; i < n_cand; ++i) {
        PartialSum total; // combined in block order: deterministic
        for (const auto& blk : blocks) {
            total.sum += blk[i].sum;
            total.sum_sq += blk[i].sum_sq;
            total.censored += blk[i].censored;
        }
        const double n = static_cast<double>(ec.n_paths);
        MCEstimate est;
        est.n_paths = ec.n_paths;
        est.n_censored = total.censored;
        est.seed = ec.seed;
        est.mean = total.sum / n;
        if (ec.n_paths > 1) {
            const double var =
                std::max(0.0, (total.sum_sq - n * est.mean * est.mean) / (n - 1.0));
            est.std_error = std::sqrt(var / n);
        }
        out[i] = est;
    }
    return out;
}

inline EngineConfig make_engine_config(double s0, const MarketParams& m, double gamma,
                                       const SimConfig& cfg) {
    m.validate();
    cfg.validate();
    if (!(s0 > 0.0))
        throw InvalidParams("simulation: s0 must be > 0");
    EngineConfig ec;
    ec.s0 = s0;
    ec.drift = (m.r - m.delta - gamma - 0.5 * m.sigma * m.sigma) * cfg.dt;
    ec.sig_sqdt = m.sigma * std::sqrt(cfg.dt);
    ec.sig2dt = m.sigma * m.sigma * cfg.dt;
    ec.dt = cfg.dt;
    ec.max_steps = std::llround(cfg.horizon / cfg.dt);
    ec.rate = gamma - m.r; // e^{-rtilde t} = e^{(gamma-r) t}
    ec.bridge = cfg.bridge_correction;
    ec.n_paths = cfg.n_paths;
    ec.seed = cfg.seed;
    ec.n_threads = cfg.n_threads;
    return ec;
}

} // namespace detail

// Expected discounted payoff of the threshold rule: exercise at tau_b ∧ tau_L,
// margin k at tau_a, censored paths contribute zero.
inline MCEstimate estimate_rule_value(const StoppingRule& rule, double s0,
                                      const MarketParams& m, double gamma,
                                      const SimConfig& cfg) {
    if (!(rule.a > 0.0) || !(rule.b > rule.a))
        throw InvalidParams("estimate_rule_value: need 0 < a < b");
    detail::EngineConfig ec = detail::make_engine_config(s0, m, gamma, cfg);
    ec.a = rule.a;
    ec.k = rule.margin;
    ec.cap = rule.cap;
    ec.q = rule.q;
    ec.uppers = {rule.cap ? std::min(rule.b, *rule.cap) : rule.b};
    return detail::run_engine(ec)[0];
}

struct GridSearchResult {
    double best_b = 0.0;
    std::vector<double> thresholds; // input order
    std::vector<MCEstimate> curve;  // aligned with thresholds
};

// Evaluates every candidate threshold on the same paths (common random
// numbers) and returns the empirical argmax with the whole value curve.
inline GridSearchResult grid_search_threshold(std::span<const double> candidate_bs,
                                              double s0, const MarketParams& m,
                                              double gamma, const LoanTerms& terms,
                                              const SimConfig& cfg) {
    if (candidate_bs.empty())
        throw InvalidParams("grid_search_threshold: empty candidate grid");
    detail::EngineConfig ec = detail::make_engine_config(s0, m, gamma, cfg);
    ec.a = terms.a;
    ec.k = terms.margin;
    ec.cap = terms.cap;
    ec.q = terms.q;

    std::vector<std::size_t> order(candidate_bs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return candidate_bs[i] < candidate_bs[j]; });
    ec.uppers.resize(candidate_bs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const double b = candidate_bs[order[i]];
        ec.uppers[i] = terms.cap ? std::min(b, *terms.cap) : b;
    }

    const auto sorted_estimates = detail::run_engine(ec);

    GridSearchResult res;
    res.thresholds.assign(candidate_bs.begin(), candidate_bs.end());
    res.curve.resize(candidate_bs.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        res.curve[order[i]] = sorted_estimates[i];
    std::size_t best = 0;
    for (std::size_t i = 1; i < res.curve.size(); ++i)
        if (res.curve[i].mean > res.curve[best].mean)
            best = i;
    res.best_b = res.thresholds[best];
    return res;
}

// E[e^{lambda tau_b} 1{tau_b < tau_a}] by simulation to the first barrier hit.
inline MCEstimate estimate_hitting_laplace(double a, double b, double s0, double lambda,
                                           const MarketParams& m, double gamma,
                                           const SimConfig& cfg) {
    if (!(a > 0.0) || !(b > a))
        throw InvalidParams("estimate_hitting_laplace: need 0 < a < b");
    detail::EngineConfig ec = detail::make_engine_config(s0, m, gamma, cfg);
    ec.a = a;
    ec.uppers = {b};
    ec.laplace = true;
    ec.rate = lambda;
    return detail::run_engine(ec)[0];
}

} // namespace stockloan
