// locclab-cli - command-line front end for the discrimination experiments.
//
// Every subcommand builds its result in memory, then either prints the main
// artifact (JSON or CSV, per --format) or, with --out DIR, writes all artifacts
// plus manifest.json holding SHA-256 digests of every file.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "locclab/distinguish.hpp"
#include "locclab/errors.hpp"
#include "locclab/game.hpp"
#include "locclab/protocols.hpp"
#include "locclab/qmat_io.hpp"
#include "locclab/states.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace locclab;

namespace {

constexpr const char* artifact_version = "0.1.0";

// ------------------------------------------------------------------ helpers

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw NumericError("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string counts_hash(const std::vector<std::size_t>& counts) {
    std::string key;
    for (std::size_t i = 0; i < counts.size(); ++i) key += (i ? "," : "") + std::to_string(counts[i]);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(key)));
    return buf;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("bad integer list entry '" + item + "'");
        out.push_back(std::stoull(item));
    }
    if (out.empty()) throw ConfigError("empty integer list");
    return out;
}

// ------------------------------------------------------------------ parameters

// Parameters shared by the flag parser and --config files. Config keys are the
// flag names with '-' replaced by '_'. Flags given on the command line win.
class ParamSet {
public:
    using Target = std::variant<double*, std::size_t*, std::string*, bool*>;

    template <class T>
    CLI::Option* add(CLI::App& app, const std::string& flag, T& target, const std::string& help,
                     bool recorded = true) {
        CLI::Option* opt;
        if constexpr (std::is_same_v<T, bool>)
            opt = app.add_flag("--" + flag, target, help);
        else
            opt = app.add_option("--" + flag, target, help)->capture_default_str();
        entries_.push_back({key_of(flag), Target(&target), opt, recorded});
        return opt;
    }

    void apply_config(const json& j) const {
        if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
        for (const auto& [key, value] : j.items()) {
            const Entry* e = find(key);
            if (!e) throw ConfigError("unknown config field '" + key + "'");
            if (e->opt->count() > 0) continue;
            std::visit([&](auto* p) { assign(key, value, *p); }, e->target);
        }
    }

    json to_json() const {
        json j = json::object();
        for (const auto& e : entries_)
            if (e.recorded) std::visit([&](auto* p) { j[e.key] = *p; }, e.target);
        return j;
    }

private:
    struct Entry {
        std::string key;
        Target target;
        CLI::Option* opt;
        bool recorded;
    };

    static std::string key_of(std::string flag) {
        std::replace(flag.begin(), flag.end(), '-', '_');
        return flag;
    }

    const Entry* find(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.key == key) return &e;
        return nullptr;
    }

    static void assign(const std::string& key, const json& v, double& out) {
        if (!v.is_number()) throw ConfigError("config field '" + key + "' must be a number");
        out = v.get<double>();
    }
    static void assign(const std::string& key, const json& v, std::size_t& out) {
        if (!v.is_number_unsigned()) throw ConfigError("config field '" + key + "' must be a nonnegative integer");
        out = v.get<std::size_t>();
    }
    static void assign(const std::string& key, const json& v, std::string& out) {
        if (!v.is_string()) throw ConfigError("config field '" + key + "' must be a string");
        out = v.get<std::string>();
    }
    static void assign(const std::string& key, const json& v, bool& out) {
        if (!v.is_boolean()) throw ConfigError("config field '" + key + "' must be a boolean");
        out = v.get<bool>();
    }

    std::vector<Entry> entries_;
};

struct GlobalParams {
    std::size_t seed = 0;
    std::size_t threads = 1;
    std::string format = "json";
    std::string out;
    std::string config;
};

// ------------------------------------------------------------------ outputs

struct Artifact {
    std::string name;
    std::string content;
};

struct RunOutput {
    std::string command;
    json config;
    std::vector<Artifact> files;
    std::string json_text; // printed for --format json
    std::string csv_text;  // printed for --format csv when set
    std::vector<std::string> inputs;
    std::vector<std::string> seed_streams;
};

void emit(const RunOutput& r, const GlobalParams& g) {
    if (g.out.empty()) {
        std::cout << (g.format == "csv" && !r.csv_text.empty() ? r.csv_text : r.json_text);
        return;
    }
    fs::create_directories(g.out);
    json outputs = json::object();
    for (const auto& a : r.files) {
        write_text_file((fs::path(g.out) / a.name).string(), a.content);
        outputs[a.name] = sha256_hex(a.content);
    }
    json inputs = json::object();
    for (const auto& path : r.inputs) inputs[path] = sha256_hex(read_text_file(path));
    const json manifest{{"artifact_version", artifact_version},
                        {"command", r.command},
                        {"config", r.config},
                        {"config_sha256", sha256_hex(r.config.dump())},
                        {"created_utc", utc_now()},
                        {"execution", {{"threads", g.threads}}},
                        {"inputs", inputs},
                        {"outputs", outputs},
                        {"seed_streams", r.seed_streams}};
    write_text_file((fs::path(g.out) / "manifest.json").string(), manifest.dump(2) + "\n");
}

RunOutput make_output(const std::string& command, const json& config) {
    RunOutput r;
    r.command = command;
    r.config = config;
    r.files.push_back({"config.json", config.dump(2) + "\n"});
    return r;
}

// ------------------------------------------------------------------ state inputs

struct PairSource {
    std::string state0, state1;
    std::string family = "werner-projectors";
    std::size_t d = 0;
    double lambda = 0.0; // > 0 composes the rho pair with psi
    std::size_t d2 = 0;
};

void add_pair_params(CLI::App& app, ParamSet& ps, PairSource& p) {
    ps.add(app, "state0", p.state0, "state file for rho_0");
    ps.add(app, "state1", p.state1, "state file for rho_1");
    ps.add(app, "family", p.family, "hiding family");
    ps.add(app, "d", p.d, "local dimension of the hiding pair");
    ps.add(app, "lambda", p.lambda, "psi Schmidt weight; composes the rho pair when set");
    ps.add(app, "d2", p.d2, "psi local dimension");
}

std::pair<DensityOperator, DensityOperator> load_pair(const PairSource& p, RunOutput& out) {
    if (!p.state0.empty() || !p.state1.empty()) {
        if (p.state0.empty() || p.state1.empty()) throw ConfigError("--state0 and --state1 go together");
        out.inputs = {p.state0, p.state1};
        auto r0 = density_from_json_text(read_text_file(p.state0));
        auto r1 = density_from_json_text(read_text_file(p.state1));
        return {std::move(r0), std::move(r1)};
    }
    if (p.d == 0) throw ConfigError("give --state0/--state1 or --d");
    const auto spec = states::hiding_spec_from_json({{"family", p.family}, {"d", p.d}});
    if (p.lambda > 0.0) return states::make_rho_pair(spec, {p.lambda, p.d2});
    return states::make_hiding_pair(spec);
}

// ------------------------------------------------------------------ protocols

struct ProtocolParams {
    std::string protocol = "memory-block";
    double p = 0.75;
    double p_after = 0.65;
    std::size_t d = 2;
    std::size_t d1 = 2;
    double lambda = 0.5;
    std::size_t d2 = 8;
    std::size_t n_block = 0;
    double eps_max = 0.05;
    std::size_t blocks = 200;
    std::string recovery = "all-or-nothing";
    std::size_t pairs = 0;
};

void add_protocol_params(CLI::App& app, ParamSet& ps, ProtocolParams& p) {
    ps.add(app, "protocol", p.protocol, "memory-block | fixed | uniform | history-capped | helstrom | teleport")
        ->check(CLI::IsMember({"memory-block", "fixed", "uniform", "history-capped", "helstrom", "teleport"}));
    ps.add(app, "p", p.p, "per-round success (fixed, history-capped)");
    ps.add(app, "p-after", p.p_after, "success after a failure (history-capped)");
    ps.add(app, "d", p.d, "hiding dimension (helstrom, teleport)");
    ps.add(app, "d1", p.d1, "teleported dimension (memory-block)");
    ps.add(app, "lambda", p.lambda, "psi Schmidt weight (memory-block)");
    ps.add(app, "d2", p.d2, "psi local dimension (memory-block)");
    ps.add(app, "n-block", p.n_block, "block length; 0 picks the smallest with failure <= eps-max");
    ps.add(app, "eps-max", p.eps_max, "concentration failure allowed when picking n-block");
    ps.add(app, "blocks", p.blocks, "blocks per trial when --n is 0 (memory-block)");
    ps.add(app, "recovery", p.recovery, "all-or-nothing | partial")
        ->check(CLI::IsMember({"all-or-nothing", "partial"}));
    ps.add(app, "pairs", p.pairs, "initial Bell pairs (teleport); 0 means one per round");
}

struct BuiltProtocol {
    game::StrategyFactory make;
    game::GameSetup setup;
    json info;
    std::size_t natural_n = 0;
};

BuiltProtocol build_protocol(const ProtocolParams& p, std::size_t n) {
    BuiltProtocol b;
    b.info = {{"protocol", p.protocol}};
    if (p.protocol == "fixed") {
        game::FixedSuccessStrategy proto(p.p);
        b.make = [proto] { return proto.clone(); };
    } else if (p.protocol == "uniform") {
        b.make = [] { return std::make_unique<game::UniformGuessStrategy>(); };
    } else if (p.protocol == "history-capped") {
        game::HistoryCappedStrategy proto(p.p, p.p_after);
        b.make = [proto] { return proto.clone(); };
    } else if (p.protocol == "helstrom" || p.protocol == "teleport") {
        auto pair = states::make_hiding_pair({p.d, states::HidingFamily::werner_projectors});
        b.setup.pair = pair;
        if (p.protocol == "helstrom") {
            game::HelstromStrategy proto(pair.first, pair.second);
            b.make = [proto] { return proto.clone(); };
        } else {
            game::TeleportStrategy proto(pair.first, pair.second, "A1", p.pairs ? p.pairs : n);
            b.make = [proto] { return proto.clone(); };
        }
        b.info["d"] = p.d;
    } else {
        const states::PsiSpec psi{p.lambda, p.d2};
        std::size_t nb = p.n_block;
        double eps = 0.0;
        if (nb == 0) {
            const auto choice = game::choose_block_length(p.d1, psi, p.eps_max);
            nb = choice.n_block;
            eps = choice.eps_tilde;
        } else {
            const double bits = std::log2(static_cast<double>(p.d1));
            eps = 1.0 - protocols::concentration_success_prob(states::psi_spectrum(psi), nb, double(nb) * bits).p;
        }
        const auto recovery =
            p.recovery == "partial" ? game::BlockRecovery::partial : game::BlockRecovery::all_or_nothing;
        game::MemoryBlockStrategy proto(p.d1, psi, nb, recovery);
        b.make = [proto] { return proto.clone(); };
        b.natural_n = nb * p.blocks;
        b.info["n_block"] = nb;
        b.info["eps_tilde"] = eps;
    }
    return b;
}

std::vector<std::string> game_streams() { return {"trial/<t>", "trial/<t>/Z", "trial/<t>/strategy", "trial/<t>/nature"}; }

// ------------------------------------------------------------------ commands

RunOutput cmd_helstrom(const PairSource& src, const json& config) {
    auto out = make_output("helstrom", config);
    const auto [r0, r1] = load_pair(src, out);
    const double t = trace_norm(r0 - r1);
    const json report{{"trace_distance", t}, {"p_opt", distinguish::helstrom(r0, r1)}};
    out.json_text = report.dump(2) + "\n";
    out.csv_text = "trace_distance,p_opt\n" + fmt_double(t) + "," + fmt_double(report["p_opt"].get<double>()) + "\n";
    out.files.push_back({"helstrom.json", out.json_text});
    return out;
}

RunOutput cmd_bounds(const PairSource& src, const json& config) {
    auto out = make_output("bounds", config);
    const auto [r0, r1] = load_pair(src, out);
    const auto b = distinguish::bound_bracket(r0, r1);
    if (!b.ordered()) throw InvariantError("bound bracket is not ordered");
    const json report{{"helstrom", b.helstrom},
                      {"locc_lower", b.locc_lower},
                      {"ppt_upper", b.ppt_upper},
                      {"witness_id", b.witness_id},
                      {"sdp_gap", b.sdp_gap}};
    out.json_text = report.dump(2) + "\n";
    out.csv_text = "helstrom,locc_lower,ppt_upper,witness_id,sdp_gap\n" + fmt_double(b.helstrom) + "," +
                   fmt_double(b.locc_lower) + "," + fmt_double(b.ppt_upper) + "," + b.witness_id + "," +
                   fmt_double(b.sdp_gap) + "\n";
    out.files.push_back({"bounds.json", out.json_text});
    return out;
}

const char* summary_header = "trial,n,S_n,rate,guess\n";

std::string summary_row(std::size_t trial, std::size_t n, std::size_t s_n, const std::string& guess) {
    return std::to_string(trial) + "," + std::to_string(n) + "," + std::to_string(s_n) + "," +
           fmt_double(static_cast<double>(s_n) / static_cast<double>(n)) + "," + guess + "\n";
}

struct SimulateParams {
    ProtocolParams proto;
    std::size_t n = 0;
    std::size_t trials = 1;
    double r = -1.0;
    bool records = false;
};

RunOutput cmd_simulate(const SimulateParams& p, const GlobalParams& g, const json& config) {
    auto out = make_output("simulate", config);
    out.seed_streams = game_streams();
    if (p.trials < 1) throw ConfigError("--trials must be >= 1");
    auto built = build_protocol(p.proto, p.n);
    const std::size_t n = p.n ? p.n : built.natural_n;
    if (n == 0) throw ConfigError("--n is required for protocol " + p.proto.protocol);
    if (p.proto.protocol == "teleport" && p.proto.pairs == 0) built = build_protocol(p.proto, n);
    built.setup.keep_records = p.records;

    std::vector<std::string> lines(p.trials);
    std::vector<std::size_t> s_n(p.trials);
    game::for_each_trial(p.trials, static_cast<unsigned>(g.threads), [&](std::size_t t) {
        auto s = built.make();
        const auto tr = game::run_game(*s, built.setup, n, game::trial_seed(g.seed, t));
        tr.validate();
        s_n[t] = tr.S_n();
        lines[t] = game::transcript_jsonl(tr, {{"trial", t}});
    });

    std::string jsonl, csv = summary_header;
    double mean = 0.0;
    std::size_t at_rate = 0;
    for (std::size_t t = 0; t < p.trials; ++t) {
        jsonl += lines[t];
        csv += summary_row(t, n, s_n[t], "");
        mean += static_cast<double>(s_n[t]) / static_cast<double>(n);
        if (p.r >= 0.0 && static_cast<double>(s_n[t]) >= p.r * static_cast<double>(n) - 1e-9) ++at_rate;
    }
    json report = built.info;
    report["n"] = n;
    report["trials"] = p.trials;
    report["mean_rate"] = mean / static_cast<double>(p.trials);
    if (p.r >= 0.0) {
        report["r"] = p.r;
        report["frac_at_rate"] = static_cast<double>(at_rate) / static_cast<double>(p.trials);
    }
    out.json_text = report.dump(2) + "\n";
    out.csv_text = csv;
    out.files.push_back({"transcripts.jsonl", jsonl});
    out.files.push_back({"summary.csv", csv});
    out.files.push_back({"report.json", out.json_text});
    return out;
}

struct DetectParams {
    game::DetectionConfig cfg{0.9, 0.75, 0.05, 0};
    std::string mode = "catalyst-threshold";
    double trace_distance = -1.0;
    double gamma_after_failure = -1.0;
    std::size_t trials = 10000;
    bool transcripts = false;
    bool records = false;
};

RunOutput cmd_detect(DetectParams p, const GlobalParams& g, const json& config) {
    auto out = make_output("detect", config);
    out.seed_streams = game_streams();
    p.cfg.mode = p.mode == "memory-threshold" ? game::DetectionMode::memory_threshold
                                              : game::DetectionMode::catalyst_threshold;
    std::optional<std::size_t> n_min;
    if (p.trace_distance >= 0.0) n_min = game::min_rounds(p.cfg.delta, p.trace_distance);
    if (p.cfg.n == 0) p.cfg.n = n_min ? *n_min : 2000;
    if (p.trials < 1) throw ConfigError("--trials must be >= 1");

    auto oracle = game::default_detection_oracle(p.cfg);
    if (p.gamma_after_failure >= 0.0)
        oracle.gamma = [cap = p.cfg.p_locc, after = p.gamma_after_failure] {
            return std::make_unique<game::HistoryCappedStrategy>(cap, after);
        };

    std::vector<std::string> lines(p.transcripts ? p.trials : 0);
    game::DetectionTrialHook hook;
    if (p.transcripts)
        hook = [&](std::size_t t, const game::DetectionResult& r) {
            r.transcript.validate();
            lines[t] = game::transcript_jsonl(
                r.transcript, {{"trial", t}, {"world", to_string(r.world)}, {"guess", to_string(r.guess)}});
        };
    const auto rep = game::run_detection(p.cfg, oracle, p.trials, g.seed, static_cast<unsigned>(g.threads), hook,
                                         p.records);

    std::string csv = summary_header;
    for (const auto& row : rep.rows) csv += summary_row(row.trial, p.cfg.n, row.S_n, to_string(row.guess));
    json report{{"config", p.cfg.to_json()},
                {"trials_tau", rep.trials_tau},
                {"trials_gamma", rep.trials_gamma},
                {"p_corr_tau", rep.p_corr_tau},
                {"p_corr_gamma", rep.p_corr_gamma},
                {"p_corr", rep.p_corr},
                {"bound_gamma", rep.bound_gamma}};
    if (p.cfg.mode == game::DetectionMode::catalyst_threshold) report["bound_tau"] = rep.bound_tau;
    if (n_min) {
        report["min_rounds"] = *n_min;
        report["single_shot_p_opt"] = 0.5 + p.trace_distance / 4.0;
    }
    out.json_text = report.dump(2) + "\n";
    out.csv_text = csv;
    if (p.transcripts) {
        std::string jsonl;
        for (const auto& l : lines) jsonl += l;
        out.files.push_back({"transcripts.jsonl", jsonl});
    }
    out.files.push_back({"summary.csv", csv});
    out.files.push_back({"report.json", out.json_text});
    return out;
}

struct ConcentrateParams {
    double lambda = 0.5;
    std::size_t d2 = 8;
    std::size_t n = 64;
    double target = -1.0;
    std::size_t samples = 100000;
    std::string method = "auto";
};

RunOutput cmd_concentrate(const ConcentrateParams& p, const GlobalParams& g, const json& config) {
    auto out = make_output("concentrate", config);
    out.seed_streams = {"concentrate/types", "concentrate/success"};
    if (p.n < 1) throw ConfigError("--n must be >= 1");
    const auto s = states::psi_spectrum({p.lambda, p.d2});
    const bool sampled =
        p.method == "sampled" ||
        (p.method == "auto" && protocols::detail::type_count(p.n, s.levels().size()) > protocols::max_exact_types);
    std::optional<protocols::SamplingPlan> types_plan, success_plan;
    if (sampled) {
        types_plan = protocols::SamplingPlan{p.samples, derive_seed(g.seed, "concentrate/types")};
        success_plan = protocols::SamplingPlan{p.samples, derive_seed(g.seed, "concentrate/success")};
    }
    const auto dist = protocols::concentration_distribution(s, p.n, types_plan);

    std::string csv = "counts_hash,log2_dim,probability_or_weight\n";
    json outcomes = json::array();
    for (const auto& o : dist.outcomes) {
        const auto h = counts_hash(o.counts);
        csv += h + "," + fmt_double(o.log2_dim) + "," + fmt_double(o.probability) + "\n";
        outcomes.push_back({{"counts", o.counts}, {"counts_hash", h}, {"log2_dim", o.log2_dim},
                            {"probability", o.probability}});
    }
    json report{{"lambda", p.lambda},
                {"d2", p.d2},
                {"n", p.n},
                {"exact", dist.exact},
                {"samples", dist.samples},
                {"entropy_bits", s.entropy_bits()},
                {"mean_log2_dim", dist.mean_log2_dim()},
                {"mean_rate", dist.mean_log2_dim() / static_cast<double>(p.n)},
                {"outcomes", outcomes}};
    if (p.target >= 0.0) {
        const auto e = protocols::concentration_success_prob(s, p.n, p.target, success_plan);
        report["target_log2_dim"] = p.target;
        report["success"] = {{"p", e.p}, {"lower", e.lower}, {"upper", e.upper}, {"exact", e.exact}};
    }
    out.json_text = report.dump(2) + "\n";
    out.csv_text = csv;
    out.files.push_back({"types.csv", csv});
    out.files.push_back({"report.json", out.json_text});
    return out;
}

struct RateParams {
    ProtocolParams proto;
    double r = 0.9;
    std::size_t trials = 200;
    std::string n_list = "100,500,1000";
};

RunOutput cmd_rate(const RateParams& p, const GlobalParams& g, const json& config) {
    auto out = make_output("rate", config);
    out.seed_streams = game_streams();
    const auto checkpoints = parse_size_list(p.n_list);
    const std::size_t n_max = *std::max_element(checkpoints.begin(), checkpoints.end());
    auto built = build_protocol(p.proto, n_max);
    const auto est = game::estimate_rate(built.make, built.setup, p.r, p.trials, checkpoints, g.seed,
                                         static_cast<unsigned>(g.threads));
    std::string csv = "n,r,success_frac,trials\n";
    json rows = json::array();
    for (std::size_t i = 0; i < est.n_list.size(); ++i) {
        csv += std::to_string(est.n_list[i]) + "," + fmt_double(est.r) + "," + fmt_double(est.success_frac[i]) +
               "," + std::to_string(est.trials) + "\n";
        rows.push_back({{"n", est.n_list[i]}, {"success_frac", est.success_frac[i]}});
    }
    json report = built.info;
    report["r"] = est.r;
    report["trials"] = est.trials;
    report["checkpoints"] = rows;
    out.json_text = report.dump(2) + "\n";
    out.csv_text = csv;
    out.files.push_back({"rate.csv", csv});
    out.files.push_back({"report.json", out.json_text});
    return out;
}

struct EntropyParams {
    double lambda = 0.5;
    std::size_t d2 = 8;
    std::size_t d1 = 2;
    double eps_prime = 0.1;
};

RunOutput cmd_entropy(const EntropyParams& p, const json& config) {
    auto out = make_output("entropy", config);
    const states::PsiSpec spec{p.lambda, p.d2};
    const auto c = states::check_psi_conditions(spec, p.d1, p.eps_prime);
    json report{{"lambda", p.lambda},
                {"d2", p.d2},
                {"entropy_bits", states::psi_entropy_closed_form(spec)},
                {"d1", p.d1},
                {"eps_prime", p.eps_prime},
                {"near_product", c.near_product},
                {"entropy_excess", c.entropy_excess},
                {"distance_to_00", 2.0 * std::sqrt(1.0 - p.lambda)}};
    if (p.d2 <= 64) {
        const auto reduced = partial_trace(states::make_psi(spec).density(), {"B2"});
        report["entropy_numeric"] = von_neumann_entropy(reduced);
    }
    out.json_text = report.dump(2) + "\n";
    out.files.push_back({"entropy.json", out.json_text});
    return out;
}

struct ConstructParams {
    std::string what = "hiding-pair";
    std::size_t d = 2;
    double lambda = 0.5;
    std::size_t d2 = 2;
    std::size_t L = 2;
    std::size_t terms = 2;
    std::string layout = "A:2,B:2";
};

TensorLayout parse_layout(const std::string& text) {
    std::vector<Factor> f;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("layout entries look like LABEL:DIM, got '" + item + "'");
        f.push_back({item.substr(0, colon), parse_size_list(item.substr(colon + 1)).front()});
    }
    return TensorLayout(std::move(f));
}

RunOutput cmd_construct(const ConstructParams& p, const GlobalParams& g, const json& config) {
    auto out = make_output("construct", config);
    std::vector<std::pair<std::string, std::string>> states_out;
    if (p.what == "hiding-pair" || p.what == "rho-pair") {
        const states::HidingPairSpec h{p.d, states::HidingFamily::werner_projectors};
        const auto pair = p.what == "rho-pair" ? states::make_rho_pair(h, {p.lambda, p.d2}) : states::make_hiding_pair(h);
        states_out = {{"state0", to_json_text(pair.first)}, {"state1", to_json_text(pair.second)}};
    } else if (p.what == "psi") {
        states_out = {{"state", to_json_text(states::make_psi({p.lambda, p.d2}).density())}};
    } else if (p.what == "max-entangled") {
        states_out = {{"state", to_json_text(states::make_max_entangled(p.L).density())}};
    } else {
        out.seed_streams = {"root"};
        states_out = {{"state", to_json_text(states::sample_separable(parse_layout(p.layout), p.terms, g.seed))}};
    }
    std::string text = "{";
    for (std::size_t i = 0; i < states_out.size(); ++i) {
        text += (i ? ",\"" : "\"") + states_out[i].first + "\":" + states_out[i].second;
        out.files.push_back({states_out[i].first + ".json", states_out[i].second + "\n"});
    }
    out.json_text = text + "}\n";
    return out;
}

void cmd_verify(const std::string& dir) {
    const auto manifest = detail::parse_json_text(read_text_file((fs::path(dir) / "manifest.json").string()));
    if (!manifest.contains("outputs") || !manifest["outputs"].is_object())
        throw ParseError("manifest has no \"outputs\" object", 0);
    json checked = json::object();
    for (const auto& [name, digest] : manifest["outputs"].items()) {
        const auto actual = sha256_hex(read_text_file((fs::path(dir) / name).string()));
        if (actual != digest.get<std::string>()) throw InvariantError("digest mismatch for " + name);
        checked[name] = actual;
    }
    if (manifest.contains("config") &&
        sha256_hex(manifest["config"].dump()) != manifest.value("config_sha256", std::string()))
        throw InvariantError("config digest mismatch");
    std::cout << json{{"verified", true}, {"outputs", checked}}.dump(2) << "\n";
}

// ------------------------------------------------------------------ errors

int report_error(const std::string& kind, const std::string& message, std::optional<std::size_t> offset, int code) {
    json e{{"kind", kind}, {"message", message}};
    if (offset) e["byte_offset"] = *offset;
    std::cerr << json{{"error", e}}.dump() << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bipartite state discrimination experiments: bounds, concentration, multi-round games."};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalParams g;
    ParamSet global_ps;
    global_ps.add(app, "seed", g.seed, "root seed");
    global_ps.add(app, "threads", g.threads, "worker threads for trial loops", false);
    global_ps.add(app, "format", g.format, "stdout format", false)->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--out", g.out, "write artifacts and manifest.json to this directory");
    app.add_option("--config", g.config, "JSON file with parameter values");

    struct Sub {
        CLI::App* app;
        ParamSet ps;
    };
    std::map<std::string, Sub> subs;
    auto sub = [&](const std::string& name, const std::string& help) -> Sub& {
        auto& s = subs[name];
        s.app = app.add_subcommand(name, help);
        return s;
    };

    PairSource helstrom_src, bounds_src;
    add_pair_params(*sub("helstrom", "optimal global success probability").app, subs["helstrom"].ps, helstrom_src);
    add_pair_params(*sub("bounds", "Helstrom value with LOCC lower and PPT upper bounds").app, subs["bounds"].ps,
                    bounds_src);

    SimulateParams sim;
    {
        auto& s = sub("simulate", "run multi-round games and write transcripts");
        add_protocol_params(*s.app, s.ps, sim.proto);
        s.ps.add(*s.app, "n", sim.n, "rounds per trial (0: blocks * n-block for memory-block)");
        s.ps.add(*s.app, "trials", sim.trials, "independent trials");
        s.ps.add(*s.app, "r", sim.r, "report the fraction of trials with S_n >= r n (negative: off)");
        s.ps.add(*s.app, "records", sim.records, "write full round records with memory descriptors");
    }

    DetectParams det;
    {
        auto& s = sub("detect", "catalyst / memory detection by threshold on S_n");
        s.ps.add(*s.app, "p-tau", det.cfg.p_tau, "per-round success in the entangled world");
        s.ps.add(*s.app, "p-locc", det.cfg.p_locc, "success cap in the separable world");
        s.ps.add(*s.app, "delta", det.cfg.delta, "threshold margin");
        s.ps.add(*s.app, "n", det.cfg.n, "rounds (0: min-rounds from --trace-distance, else 2000)");
        s.ps.add(*s.app, "mode", det.mode, "catalyst-threshold | memory-threshold")
            ->check(CLI::IsMember({"catalyst-threshold", "memory-threshold"}));
        s.ps.add(*s.app, "trace-distance", det.trace_distance, "||tau - gamma||_1 for the round count (negative: off)");
        s.ps.add(*s.app, "gamma-after-failure", det.gamma_after_failure,
                 "separable world drops to this success after a failure (negative: i.i.d. p-locc)");
        s.ps.add(*s.app, "trials", det.trials, "trials; even ids simulate tau, odd ids gamma");
        s.ps.add(*s.app, "transcripts", det.transcripts, "write per-round transcripts.jsonl");
        s.ps.add(*s.app, "records", det.records, "include memory descriptors in transcripts");
    }

    ConcentrateParams conc;
    {
        auto& s = sub("concentrate", "type-class concentration of psi^n");
        s.ps.add(*s.app, "lambda", conc.lambda, "psi Schmidt weight on |00>");
        s.ps.add(*s.app, "d2", conc.d2, "psi local dimension");
        s.ps.add(*s.app, "n", conc.n, "copies");
        s.ps.add(*s.app, "target", conc.target, "target log2 dimension for the success estimate (negative: off)");
        s.ps.add(*s.app, "samples", conc.samples, "Monte-Carlo samples when sampling");
        s.ps.add(*s.app, "method", conc.method, "auto | exact | sampled (auto enumerates up to 1e6 types)")
            ->check(CLI::IsMember({"auto", "exact", "sampled"}));
    }

    RateParams rate;
    {
        auto& s = sub("rate", "empirical Pr(S_n >= r n) at checkpoints");
        add_protocol_params(*s.app, s.ps, rate.proto);
        s.ps.add(*s.app, "r", rate.r, "target rate");
        s.ps.add(*s.app, "trials", rate.trials, "independent trials");
        s.ps.add(*s.app, "n-list", rate.n_list, "comma-separated checkpoints");
    }

    EntropyParams ent;
    {
        auto& s = sub("entropy", "entropy and closeness conditions for psi");
        s.ps.add(*s.app, "lambda", ent.lambda, "psi Schmidt weight on |00>");
        s.ps.add(*s.app, "d2", ent.d2, "psi local dimension");
        s.ps.add(*s.app, "d1", ent.d1, "dimension the entropy has to beat (log2 d1)");
        s.ps.add(*s.app, "eps-prime", ent.eps_prime, "closeness target for ||psi - 00||_1");
    }

    ConstructParams con;
    {
        auto& s = sub("construct", "write state files");
        s.ps.add(*s.app, "what", con.what, "hiding-pair | rho-pair | psi | max-entangled | separable")
            ->check(CLI::IsMember({"hiding-pair", "rho-pair", "psi", "max-entangled", "separable"}));
        s.ps.add(*s.app, "d", con.d, "hiding dimension");
        s.ps.add(*s.app, "lambda", con.lambda, "psi Schmidt weight");
        s.ps.add(*s.app, "d2", con.d2, "psi local dimension");
        s.ps.add(*s.app, "L", con.L, "maximally entangled dimension");
        s.ps.add(*s.app, "terms", con.terms, "product terms (separable)");
        s.ps.add(*s.app, "layout", con.layout, "LABEL:DIM,... (separable)");
    }

    std::string verify_dir;
    sub("verify", "recompute manifest digests").app->add_option("dir", verify_dir, "artifact directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("UsageError", e.what(), std::nullopt, 2);
    }

    try {
        const auto chosen = app.get_subcommands().front()->get_name();
        if (chosen == "verify") {
            cmd_verify(verify_dir);
            return 0;
        }
        auto& s = subs.at(chosen);
        if (!g.config.empty()) {
            const auto cfg = detail::parse_json_text(read_text_file(g.config));
            if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
            json global_part = json::object(), local_part = json::object();
            for (const auto& [k, v] : cfg.items()) (k == "seed" || k == "threads" || k == "format" ? global_part : local_part)[k] = v;
            global_ps.apply_config(global_part);
            s.ps.apply_config(local_part);
        }
        if (g.format != "json" && g.format != "csv") throw ConfigError("--format must be json or csv");
        json config = s.ps.to_json();
        config["seed"] = g.seed;

        RunOutput out;
        if (chosen == "helstrom") out = cmd_helstrom(helstrom_src, config);
        else if (chosen == "bounds") out = cmd_bounds(bounds_src, config);
        else if (chosen == "simulate") out = cmd_simulate(sim, g, config);
        else if (chosen == "detect") out = cmd_detect(det, g, config);
        else if (chosen == "concentrate") out = cmd_concentrate(conc, g, config);
        else if (chosen == "rate") out = cmd_rate(rate, g, config);
        else if (chosen == "entropy") out = cmd_entropy(ent, config);
        else out = cmd_construct(con, g, config);
        emit(out, g);
        return 0;
    } catch (const ParseError& e) {
        return report_error(e.kind(), e.what(), e.byte_offset(), 3);
    } catch (const ConfigError& e) {
        return report_error(e.kind(), e.what(), std::nullopt, 3);
    } catch (const Error& e) {
        return report_error(e.kind(), e.what(), std::nullopt, 4);
    } catch (const std::exception& e) {
        return report_error("InternalError", e.what(), std::nullopt, 5);
    }
}
