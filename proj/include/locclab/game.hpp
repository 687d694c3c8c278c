// game.hpp - multi-round discrimination engine and detection protocols
//
// Round j: the referee draws Z_j uniformly, prepares rho_{Z_j}, the strategy
// answers Y_j, and X_j = [Y_j == Z_j]. Strategies see the prepared state only
// through RoundAccess: either an exact measurement on the density operator or,
// for large runs, a guess that is correct with a success probability the
// strategy declares for the round.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distinguish.hpp"
#include "protocols.hpp"
#include "qmat.hpp"
#include "random.hpp"
#include "states.hpp"

namespace locclab::game {

struct RoundRecord {
    std::size_t j = 0; // 1-based
    int Z = 0;
    int Y = 0;
    int X = 0;
    nlohmann::json memory;
};

struct GameTranscript {
    std::string protocol_id;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    nlohmann::json config;
    std::vector<std::uint8_t> X;  // per-round success bits
    std::vector<std::uint32_t> S; // S[j-1] = X_1 + ... + X_j
    std::vector<RoundRecord> records; // empty unless records were requested

    std::size_t S_n() const { return S.empty() ? 0 : S.back(); }

    void validate() const {
        if (X.size() != n || S.size() != n) throw InvariantError("transcript length differs from n");
        std::uint32_t acc = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (X[j] > 1) throw InvariantError("X_j must be 0 or 1");
            acc += X[j];
            if (S[j] != acc) throw InvariantError("S does not telescope at round " + std::to_string(j + 1));
        }
        for (const auto& r : records) {
            if (r.X != (r.Y == r.Z ? 1 : 0)) throw InvariantError("X != [Y == Z] at round " + std::to_string(r.j));
            if (r.j < 1 || r.j > n || X[r.j - 1] != r.X) throw InvariantError("record disagrees with X sequence");
        }
    }
};

// --------------------------------------------------------------- round access

class RoundAccess {
public:
    RoundAccess(int z, const DensityOperator* prepared, Rng& nature) : z_(z), prepared_(prepared), nature_(nature) {}

    // Born-rule outcome of `channel` on the prepared state, optionally after a
    // quantum operation on it (e.g. teleporting a factor).
    std::size_t measure(const distinguish::MeasurementChannel& channel,
                        const std::function<DensityOperator(const DensityOperator&)>& before = {}) {
        claim();
        if (!prepared_) throw ConfigError("this game has no state pair; exact measurement unavailable");
        const DensityOperator state = before ? before(*prepared_) : *prepared_;
        const auto out = distinguish::apply_channel(channel, state);
        const double u = nature_.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            acc += std::max(out.values[i], 0.0);
            if (u < acc) return i;
        }
        return out.values.size() - 1;
    }

    // Probability-accounting backend: returns a guess that equals Z with
    // probability p. The strategy never learns Z from this call beyond the guess.
    int guess_with_success(double p) {
        claim();
        if (!(p >= 0.0 && p <= 1.0)) throw SpecError("round success probability must lie in [0, 1]");
        return nature_.uniform() < p ? z_ : 1 - z_;
    }

    bool used() const noexcept { return used_; }

private:
    void claim() {
        if (used_) throw InvariantError("the prepared state can be accessed once per round");
        used_ = true;
    }

    int z_;
    const DensityOperator* prepared_;
    Rng& nature_;
    bool used_ = false;
};

// --------------------------------------------------------------- strategies

class Strategy {
public:
    virtual ~Strategy() = default;

    virtual std::string id() const = 0;
    virtual nlohmann::json config() const { return nlohmann::json::object(); }

    // Called once per trial before round 1 with the strategy's own stream.
    virtual void reset(Rng& rng) = 0;

    // Returns the guess Y_j for round j (1-based).
    virtual int play(std::size_t j, RoundAccess& access) = 0;

    // Told after each round whether the guess was right.
    virtual void observe(std::size_t /*j*/, int /*x*/) {}

    // Summary of the memory state; must change whenever the memory does.
    virtual std::uint64_t memory_fingerprint() const = 0;
    virtual nlohmann::json memory_descriptor() const = 0;

    virtual std::unique_ptr<Strategy> clone() const = 0;
};

using StrategyFactory = std::function<std::unique_ptr<Strategy>()>;

// Per-round success probability p, no memory. Stands in for any protocol whose
// rounds are i.i.d., e.g. a perfectly returned catalyst.
class FixedSuccessStrategy : public Strategy {
public:
    explicit FixedSuccessStrategy(double p, std::string id = "fixed-success") : p_(p), id_(std::move(id)) {
        if (!(p >= 0.0 && p <= 1.0)) throw SpecError("success probability must lie in [0, 1]");
    }

    std::string id() const override { return id_; }
    nlohmann::json config() const override { return {{"p", p_}}; }
    void reset(Rng&) override {}
    int play(std::size_t, RoundAccess& a) override { return a.guess_with_success(p_); }
    std::uint64_t memory_fingerprint() const override { return 0; }
    nlohmann::json memory_descriptor() const override { return {{"state", "catalyst"}}; }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<FixedSuccessStrategy>(*this); }

private:
    double p_;
    std::string id_;
};

// Success p_cap until the first failure, then p_after for the rest of the
// trial. Conditional success never exceeds max(p_cap, p_after).
class HistoryCappedStrategy : public Strategy {
public:
    HistoryCappedStrategy(double p_cap, double p_after) : p_cap_(p_cap), p_after_(p_after) {
        if (!(p_cap >= 0.0 && p_cap <= 1.0 && p_after >= 0.0 && p_after <= 1.0))
            throw SpecError("success probabilities must lie in [0, 1]");
    }

    std::string id() const override { return "history-capped"; }
    nlohmann::json config() const override { return {{"p_cap", p_cap_}, {"p_after_failure", p_after_}}; }
    void reset(Rng&) override { failed_ = false; }
    int play(std::size_t, RoundAccess& a) override { return a.guess_with_success(failed_ ? p_after_ : p_cap_); }
    void observe(std::size_t, int x) override { failed_ = failed_ || x == 0; }
    std::uint64_t memory_fingerprint() const override { return failed_ ? 1 : 0; }
    nlohmann::json memory_descriptor() const override { return {{"failed", failed_}}; }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<HistoryCappedStrategy>(*this); }

private:
    double p_cap_, p_after_;
    bool failed_ = false;
};

// Uniform guessing from the strategy's own stream.
class UniformGuessStrategy : public Strategy {
public:
    std::string id() const override { return "uniform-guess"; }
    void reset(Rng& rng) override { rng_ = &rng; }
    int play(std::size_t, RoundAccess&) override { return rng_->bit(); }
    std::uint64_t memory_fingerprint() const override { return 0; }
    nlohmann::json memory_descriptor() const override { return nlohmann::json::object(); }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<UniformGuessStrategy>(); }

private:
    Rng* rng_ = nullptr;
};

// Exact backend: global Helstrom measurement on every round.
class HelstromStrategy : public Strategy {
public:
    HelstromStrategy(const DensityOperator& rho0, const DensityOperator& rho1)
        : channel_(distinguish::helstrom_channel(rho0, rho1)) {}

    std::string id() const override { return "helstrom"; }
    void reset(Rng&) override {}
    int play(std::size_t, RoundAccess& a) override { return a.measure(channel_) == 0 ? 0 : 1; }
    std::uint64_t memory_fingerprint() const override { return 0; }
    nlohmann::json memory_descriptor() const override { return nlohmann::json::object(); }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<HelstromStrategy>(*this); }

private:
    distinguish::MeasurementChannel channel_;
};

// Exact backend: each round consumes one |phi_L> from memory to teleport
// Alice's factor to Bob, who then measures the Helstrom POVM of the
// teleported pair. Without pairs left it guesses uniformly.
class TeleportStrategy : public Strategy {
public:
    TeleportStrategy(const DensityOperator& rho0, const DensityOperator& rho1, std::string alice_factor,
                     std::size_t initial_pairs)
        : factor_(std::move(alice_factor)), initial_(initial_pairs) {
        const std::size_t L = rho0.layout().dim_of(factor_);
        resource_ = states::make_max_entangled(L, "Amem", "Bmem");
        const auto t0 = protocols::teleport(rho0, factor_, resource_).state;
        const auto t1 = protocols::teleport(rho1, factor_, resource_).state;
        if (t0.layout().party_dim('A') != 1)
            throw SpecError("teleport strategy needs all of Alice's factors in one teleported register");
        channel_ = distinguish::helstrom_channel(t0, t1);
    }

    std::string id() const override { return "teleport"; }
    nlohmann::json config() const override { return {{"factor", factor_}, {"initial_pairs", initial_}}; }
    void reset(Rng& rng) override {
        pairs_ = initial_;
        rng_ = &rng;
    }
    int play(std::size_t, RoundAccess& a) override {
        if (pairs_ == 0) return rng_->bit();
        --pairs_;
        const auto& res = resource_;
        const auto& f = factor_;
        const auto k = a.measure(channel_, [&](const DensityOperator& s) { return protocols::teleport(s, f, res).state; });
        return k == 0 ? 0 : 1;
    }
    std::uint64_t memory_fingerprint() const override { return pairs_; }
    nlohmann::json memory_descriptor() const override { return {{"bell_pairs", pairs_}}; }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<TeleportStrategy>(*this); }

private:
    std::string factor_;
    std::size_t initial_;
    std::size_t pairs_ = 0;
    PureState resource_;
    distinguish::MeasurementChannel channel_;
    Rng* rng_ = nullptr;
};

enum class BlockRecovery {
    all_or_nothing, // next block perfect iff the concentrated dimension covers the whole block
    partial,        // every usable |phi_d1> copy is spent, the rest of the block is guessed
};

// Block protocol with a reusable memory. Block 1 runs on the initial memory of
// n_block copies of |phi_d1>. Every round consumes one copy (teleport plus
// perfect discrimination of the orthogonal sigma pair) and stores one |psi>.
// After each block, psi^{(x)n_block} is concentrated; the outcome sets the
// number of copies available in the next block. Rounds without a copy are
// fair guesses.
class MemoryBlockStrategy : public Strategy {
public:
    MemoryBlockStrategy(std::size_t d1, states::PsiSpec psi, std::size_t n_block,
                        BlockRecovery recovery = BlockRecovery::all_or_nothing)
        : d1_(d1), psi_(psi), n_block_(n_block), recovery_(recovery), spectrum_(states::psi_spectrum(psi)) {
        if (n_block < 1) throw SpecError("block length must be >= 1");
        if (states::check_psi_conditions(psi, d1, 1.0).entropy_excess <= 0.0)
            throw SpecError("memory block protocol needs S(psi) > log2 d1");
    }

    std::string id() const override { return "memory-block"; }
    nlohmann::json config() const override {
        return {{"d1", d1_}, {"psi", states::to_json(psi_)}, {"n_block", n_block_},
                {"recovery", recovery_ == BlockRecovery::partial ? "partial" : "all-or-nothing"}};
    }
    void reset(Rng& rng) override {
        rng_ = &rng;
        budget_ = n_block_;
        stored_ = 0;
        block_ = 0;
        last_log2_dim_ = -1.0;
    }
    int play(std::size_t j, RoundAccess& a) override {
        const std::size_t pos = (j - 1) % n_block_;
        if (pos == 0 && j > 1) concentrate();
        const bool have = budget_ > 0;
        if (have) --budget_;
        ++stored_;
        return a.guess_with_success(have ? 1.0 : 0.5);
    }
    std::uint64_t memory_fingerprint() const override {
        return mix64((static_cast<std::uint64_t>(block_) << 40) ^ (static_cast<std::uint64_t>(budget_) << 20) ^ stored_);
    }
    nlohmann::json memory_descriptor() const override {
        nlohmann::json j{{"block", block_}, {"phi_copies", budget_}, {"psi_copies", stored_}};
        if (last_log2_dim_ >= 0.0) j["last_log2_dim"] = last_log2_dim_;
        return j;
    }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<MemoryBlockStrategy>(*this); }

private:
    void concentrate() {
        const auto labels = protocols::sample_type(spectrum_, n_block_, *rng_);
        last_log2_dim_ = protocols::type_log2_dim(spectrum_, protocols::level_counts(spectrum_, labels));
        const std::size_t usable = std::min(protocols::usable_copies(last_log2_dim_, d1_), n_block_);
        budget_ = recovery_ == BlockRecovery::partial ? usable : (usable >= n_block_ ? n_block_ : 0);
        stored_ = 0;
        ++block_;
    }

    std::size_t d1_;
    states::PsiSpec psi_;
    std::size_t n_block_;
    BlockRecovery recovery_;
    states::SchmidtSpectrum spectrum_;
    Rng* rng_ = nullptr;
    std::size_t budget_ = 0, stored_ = 0, block_ = 0;
    double last_log2_dim_ = -1.0;
};

struct BlockChoice {
    std::size_t n_block = 0;
    double eps_tilde = 1.0; // exact 1 - P_n at target n_block log2 d1
};

// Smallest block length whose exact concentration failure is at most eps_max.
inline BlockChoice choose_block_length(std::size_t d1, const states::PsiSpec& psi, double eps_max,
                                       std::size_t n_max = 4096) {
    const auto s = states::psi_spectrum(psi);
    const double bits = std::log2(static_cast<double>(d1));
    for (std::size_t n = 1; n <= n_max; ++n) {
        const double p = protocols::concentration_success_prob(s, n, static_cast<double>(n) * bits).p;
        if (1.0 - p <= eps_max) return {n, 1.0 - p};
    }
    throw SpecError("no block length up to " + std::to_string(n_max) + " reaches the requested failure bound");
}

// --------------------------------------------------------------- engine

struct GameSetup {
    std::optional<std::pair<DensityOperator, DensityOperator>> pair; // exact backend
    bool catalytic = false;    // enforce an unchanged memory on every round
    bool keep_records = false; // store RoundRecords with memory descriptors
};

inline GameTranscript run_game(Strategy& strategy, const GameSetup& setup, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw SpecError("run_game needs n >= 1");
    Rng z_stream(derive_seed(seed, "Z", 0));
    Rng strategy_stream(derive_seed(seed, "strategy", 0));
    Rng nature(derive_seed(seed, "nature", 0));

    GameTranscript t;
    t.protocol_id = strategy.id();
    t.seed = seed;
    t.n = n;
    t.config = strategy.config();
    t.X.reserve(n);
    t.S.reserve(n);
    if (setup.keep_records) t.records.reserve(n);

    strategy.reset(strategy_stream);
    std::uint32_t s = 0;
    for (std::size_t j = 1; j <= n; ++j) {
        const int z = z_stream.bit();
        const std::uint64_t before = strategy.memory_fingerprint();
        const DensityOperator* prepared = nullptr;
        if (setup.pair) prepared = z == 0 ? &setup.pair->first : &setup.pair->second;
        RoundAccess access(z, prepared, nature);
        const int y = strategy.play(j, access);
        if (y != 0 && y != 1) throw InvariantError("strategy returned a guess outside {0, 1}");
        const int x = y == z ? 1 : 0;
        strategy.observe(j, x);
        if (setup.catalytic && strategy.memory_fingerprint() != before)
            throw CatalystViolation("memory changed in round " + std::to_string(j) + " of a catalytic run");
        s += static_cast<std::uint32_t>(x);
        t.X.push_back(static_cast<std::uint8_t>(x));
        t.S.push_back(s);
        if (setup.keep_records) t.records.push_back({j, z, y, x, strategy.memory_descriptor()});
    }
    return t;
}

// Runs fn(trial) for trial in [0, trials) on up to `threads` workers. Results
// must be written by index so the outcome does not depend on scheduling.
inline void for_each_trial(std::size_t trials, unsigned threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max(1u, threads);
    if (threads == 1 || trials < 2) {
        for (std::size_t t = 0; t < trials; ++t) fn(t);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t t = w; t < trials; t += threads) fn(t);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::uint64_t trial_seed(std::uint64_t root, std::size_t trial) { return derive_seed(root, "trial", trial); }

// --------------------------------------------------------------- rates

struct RateEstimate {
    double r = 0.0;
    std::vector<std::size_t> n_list;
    std::vector<double> success_frac;
    std::size_t trials = 0;
};

// Empirical Pr(S_n >= r n) at each checkpoint, one trajectory per trial.
inline RateEstimate estimate_rate(const StrategyFactory& make, const GameSetup& setup, double r, std::size_t trials,
                                  std::vector<std::size_t> n_list, std::uint64_t seed, unsigned threads = 1) {
    if (!(r >= 0.0 && r <= 1.0)) throw SpecError("rate must lie in [0, 1]");
    if (n_list.empty() || trials < 1) throw SpecError("estimate_rate needs checkpoints and trials");
    std::sort(n_list.begin(), n_list.end());
    if (n_list.front() < 1) throw SpecError("checkpoints must be >= 1");
    const std::size_t n_max = n_list.back();
    std::vector<std::vector<std::uint8_t>> hit(trials, std::vector<std::uint8_t>(n_list.size(), 0));
    for_each_trial(trials, threads, [&](std::size_t t) {
        auto s = make();
        GameSetup local = setup;
        local.keep_records = false;
        const auto tr = run_game(*s, local, n_max, trial_seed(seed, t));
        for (std::size_t c = 0; c < n_list.size(); ++c) {
            const double n = static_cast<double>(n_list[c]);
            hit[t][c] = static_cast<double>(tr.S[n_list[c] - 1]) >= r * n - 1e-9 ? 1 : 0;
        }
    });
    RateEstimate est{r, n_list, std::vector<double>(n_list.size(), 0.0), trials};
    for (std::size_t c = 0; c < n_list.size(); ++c) {
        std::size_t k = 0;
        for (std::size_t t = 0; t < trials; ++t) k += hit[t][c];
        est.success_frac[c] = static_cast<double>(k) / static_cast<double>(trials);
    }
    return est;
}

// --------------------------------------------------------------- bounds

// Pr(|S_n/n - p| <= delta) >= 1 - 2 exp(-2 n delta^2) for i.i.d. rounds.
inline double hoeffding_bound(std::size_t n, double delta) {
    if (n < 1 || !(delta > 0.0)) throw DomainError("hoeffding_bound needs n >= 1 and delta > 0");
    return 1.0 - 2.0 * std::exp(-2.0 * static_cast<double>(n) * delta * delta);
}

// Pr(S_n/n - p >= delta) <= exp(-n delta^2 / 2) for a supermartingale with increments <= 1.
inline double azuma_bound(std::size_t n, double delta) {
    if (n < 1 || !(delta > 0.0)) throw DomainError("azuma_bound needs n >= 1 and delta > 0");
    return std::exp(-static_cast<double>(n) * delta * delta / 2.0);
}

// Smallest n with n > max{ -ln(1/4 - T/8) / (2 delta^2), -2 ln(1/2 - T/4) / delta^2 }.
inline std::size_t min_rounds(double delta, double trace_distance) {
    const double T = trace_distance;
    if (!(delta > 0.0)) throw DomainError("min_rounds needs delta > 0");
    if (!(T >= 0.0) || T >= 2.0) throw DomainError("min_rounds needs 0 <= T < 2");
    const double a = 0.25 - T / 8.0;
    const double b = 0.5 - T / 4.0;
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("min_rounds: logarithm argument is not positive");
    const double first = -std::log(a) / (2.0 * delta * delta);
    const double second = -2.0 * std::log(b) / (delta * delta);
    return static_cast<std::size_t>(std::floor(std::max(first, second))) + 1;
}

// --------------------------------------------------------------- detection

enum class DetectionMode { catalyst_threshold, memory_threshold };

inline std::string to_string(DetectionMode m) {
    return m == DetectionMode::catalyst_threshold ? "catalyst-threshold" : "memory-threshold";
}

struct DetectionConfig {
    double p_tau = 0.9;
    double p_locc = 0.75;
    double delta = 0.05;
    std::size_t n = 2000;
    DetectionMode mode = DetectionMode::catalyst_threshold;

    void validate() const {
        if (!(p_tau >= 0.0 && p_tau <= 1.0 && p_locc >= 0.0 && p_locc <= 1.0))
            throw SpecError("p_tau and p_locc must lie in [0, 1]");
        if (n < 1) throw SpecError("detection needs n >= 1");
        if (mode == DetectionMode::catalyst_threshold) {
            if (!(delta > 0.0 && delta < (p_tau - p_locc) / 2.0))
                throw SpecError("catalyst mode needs 0 < delta < (p_tau - p_locc) / 2");
        } else if (!(delta > 0.0 && delta < p_tau - p_locc)) {
            throw SpecError("memory mode needs 0 < delta < p_tau - p_locc");
        }
    }

    nlohmann::json to_json() const {
        return {{"p_tau", p_tau}, {"p_locc", p_locc}, {"delta", delta}, {"n", n}, {"mode", to_string(mode)}};
    }
};

enum class World { tau, gamma };

inline std::string to_string(World w) { return w == World::tau ? "tau" : "gamma"; }

// Supplies the round behaviour in each world: tau is the entangled catalyst or
// memory, gamma the separable one whose conditional success is capped at p_locc.
struct DetectionOracle {
    StrategyFactory tau;
    StrategyFactory gamma;
};

inline DetectionOracle default_detection_oracle(const DetectionConfig& c) {
    return {[p = c.p_tau] { return std::make_unique<FixedSuccessStrategy>(p, "catalyst-tau"); },
            [p = c.p_locc] { return std::make_unique<FixedSuccessStrategy>(p, "separable-gamma"); }};
}

// Threshold rule: true means "the initial register was entangled (tau)".
inline bool detection_guesses_tau(const DetectionConfig& c, std::size_t s_n) {
    const double rate = static_cast<double>(s_n) / static_cast<double>(c.n);
    constexpr double slack = 1e-12; // S_n / n is rational; keep boundary cases on the inclusive side
    if (c.mode == DetectionMode::catalyst_threshold) return std::abs(rate - c.p_tau) <= c.delta + slack;
    return rate - c.p_locc >= c.delta - slack;
}

struct DetectionResult {
    World world = World::tau;
    World guess = World::tau;
    GameTranscript transcript;
};

inline DetectionResult detect_catalyst(const DetectionConfig& config, const DetectionOracle& oracle, World world,
                                       std::uint64_t seed, bool keep_records = false) {
    config.validate();
    auto s = world == World::tau ? oracle.tau() : oracle.gamma();
    GameSetup setup;
    // Only a genuine catalyst has to come back unchanged.
    setup.catalytic = world == World::tau && config.mode == DetectionMode::catalyst_threshold;
    setup.keep_records = keep_records;
    DetectionResult r;
    r.world = world;
    r.transcript = run_game(*s, setup, config.n, seed);
    r.guess = detection_guesses_tau(config, r.transcript.S_n()) ? World::tau : World::gamma;
    return r;
}

struct DetectionTrial {
    std::size_t trial = 0;
    World world = World::tau;
    std::size_t S_n = 0;
    World guess = World::tau;
};

struct DetectionReport {
    std::vector<DetectionTrial> rows; // sorted by trial id
    std::size_t trials_tau = 0, trials_gamma = 0;
    double p_corr_tau = 0.0, p_corr_gamma = 0.0, p_corr = 0.0;
    double bound_tau = 0.0;   // 1 - 2 exp(-2 n delta^2) (catalyst) or n/a (memory: 0)
    double bound_gamma = 0.0; // 1 - exp(-n delta^2 / 2)
};

// Even trial ids simulate world tau, odd ids world gamma.
// `on_trial` runs on the worker thread; it must only touch per-trial state.
using DetectionTrialHook = std::function<void(std::size_t, const DetectionResult&)>;

inline DetectionReport run_detection(const DetectionConfig& config, const DetectionOracle& oracle, std::size_t trials,
                                     std::uint64_t seed, unsigned threads = 1, const DetectionTrialHook& on_trial = {},
                                     bool keep_records = false) {
    config.validate();
    DetectionReport rep;
    rep.rows.resize(trials);
    for_each_trial(trials, threads, [&](std::size_t t) {
        const World w = t % 2 == 0 ? World::tau : World::gamma;
        const auto r = detect_catalyst(config, oracle, w, trial_seed(seed, t), keep_records);
        rep.rows[t] = {t, w, r.transcript.S_n(), r.guess};
        if (on_trial) on_trial(t, r);
    });
    std::size_t ok_tau = 0, ok_gamma = 0;
    for (const auto& row : rep.rows) {
        if (row.world == World::tau) {
            ++rep.trials_tau;
            ok_tau += row.guess == World::tau;
        } else {
            ++rep.trials_gamma;
            ok_gamma += row.guess == World::gamma;
        }
    }
    rep.p_corr_tau = rep.trials_tau ? static_cast<double>(ok_tau) / static_cast<double>(rep.trials_tau) : 0.0;
    rep.p_corr_gamma = rep.trials_gamma ? static_cast<double>(ok_gamma) / static_cast<double>(rep.trials_gamma) : 0.0;
    rep.p_corr = 0.5 * (rep.p_corr_tau + rep.p_corr_gamma);
    rep.bound_tau = config.mode == DetectionMode::catalyst_threshold ? hoeffding_bound(config.n, config.delta) : 0.0;
    rep.bound_gamma = 1.0 - azuma_bound(config.n, config.delta);
    return rep;
}

// --------------------------------------------------------------- supermartingale check

struct DriftBucket {
    std::size_t window = 0; // rounds [window * width + 1, (window + 1) * width]
    int last_x = 0;         // X_j of the conditioning round
    std::size_t count = 0;
    double mean_drift = 0.0; // mean of X_{j+1} - p_locc
    double std_error = 0.0;
    bool ok = true;          // mean_drift <= 3 std_error
};

struct SupermartingaleReport {
    std::size_t trajectories = 0;
    std::size_t max_len = 0;
    double max_increment = 0.0; // max over C_j - C_{j-1}
    bool increments_ok = true;  // every increment <= 1
    std::vector<DriftBucket> buckets;
    double overall_drift = 0.0;
    double overall_std_error = 0.0;
    bool drift_ok = true;       // every populated bucket and the pooled drift pass

    bool ok() const { return increments_ok && drift_ok; }
};

// Checks C_j = S_j - j p_locc on an ensemble of X sequences: increments
// C_j - C_{j-1} = X_j - p_locc <= 1 exactly, and the conditional drift
// E[C_{j+1} - C_j | window of j, X_j] <= 3 sigma in every bucket with at least
// `min_count` samples.
inline SupermartingaleReport check_supermartingale(const std::vector<std::vector<std::uint8_t>>& ensemble,
                                                   double p_locc, std::size_t width = 50,
                                                   std::size_t min_count = 30) {
    if (width < 1) throw SpecError("bucket width must be >= 1");
    SupermartingaleReport rep;
    rep.trajectories = ensemble.size();
    for (const auto& xs : ensemble) rep.max_len = std::max(rep.max_len, xs.size());
    const std::size_t windows = (rep.max_len + width - 1) / std::max<std::size_t>(width, 1);
    std::vector<double> sum(2 * windows, 0.0), sumsq(2 * windows, 0.0);
    std::vector<std::size_t> cnt(2 * windows, 0);
    double all_sum = 0.0, all_sq = 0.0;
    std::size_t all_n = 0;
    rep.max_increment = -p_locc;
    for (const auto& xs : ensemble)
        for (std::size_t j = 0; j < xs.size(); ++j) {
            const double inc = static_cast<double>(xs[j]) - p_locc;
            rep.max_increment = std::max(rep.max_increment, inc);
            if (inc > 1.0) rep.increments_ok = false;
            all_sum += inc;
            all_sq += inc * inc;
            ++all_n;
            if (j == 0) continue;
            // Conditioning round j (1-based) is index j - 1; its window and value.
            const std::size_t b = 2 * ((j - 1) / width) + xs[j - 1];
            sum[b] += inc;
            sumsq[b] += inc * inc;
            ++cnt[b];
        }
    for (std::size_t b = 0; b < cnt.size(); ++b) {
        if (cnt[b] < min_count) continue;
        DriftBucket d;
        d.window = b / 2;
        d.last_x = static_cast<int>(b % 2);
        d.count = cnt[b];
        const double nn = static_cast<double>(cnt[b]);
        d.mean_drift = sum[b] / nn;
        const double var = std::max(0.0, sumsq[b] / nn - d.mean_drift * d.mean_drift);
        d.std_error = std::sqrt(var / nn);
        d.ok = d.mean_drift <= 3.0 * d.std_error + 1e-12;
        rep.drift_ok = rep.drift_ok && d.ok;
        rep.buckets.push_back(d);
    }
    if (all_n > 0) {
        const double nn = static_cast<double>(all_n);
        rep.overall_drift = all_sum / nn;
        rep.overall_std_error = std::sqrt(std::max(0.0, all_sq / nn - rep.overall_drift * rep.overall_drift) / nn);
        rep.drift_ok = rep.drift_ok && rep.overall_drift <= 3.0 * rep.overall_std_error + 1e-12;
    }
    return rep;
}

// --------------------------------------------------------------- persistence

inline nlohmann::json transcript_header(const GameTranscript& t) {
    return {{"protocol_id", t.protocol_id}, {"seed", t.seed}, {"n", t.n}, {"config", t.config}};
}

// Header line, then one record per round. Records fall back to (j, X, S) when
// full records were not kept.
inline std::string transcript_jsonl(const GameTranscript& t, const nlohmann::json& extra_header = {}) {
    nlohmann::json header = transcript_header(t);
    if (extra_header.is_object()) header.update(extra_header);
    std::string out = header.dump() + "\n";
    if (!t.records.empty()) {
        for (const auto& r : t.records)
            out += nlohmann::json{{"j", r.j}, {"Z", r.Z}, {"Y", r.Y}, {"X", r.X}, {"S", t.S[r.j - 1]}, {"memory", r.memory}}
                       .dump() +
                   "\n";
    } else {
        for (std::size_t j = 0; j < t.n; ++j)
            out += nlohmann::json{{"j", j + 1}, {"X", t.X[j]}, {"S", t.S[j]}}.dump() + "\n";
    }
    return out;
}

} // namespace locclab::game
