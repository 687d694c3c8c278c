// protocols.hpp - teleportation and Schmidt-type entanglement concentration
//
// Concentration of psi^{(x)n}: both parties measure which class of Schmidt
// labels each copy fell into (the "type" K, one count per spectrum level).
// The post-measurement state is maximally entangled on the span of all label
// strings of that type, of dimension
//
//     L(K) = n! / prod_v K_v!  *  prod_v mult_v^{K_v},
//
// and type K occurs with probability n! / prod_v K_v! * prod_v (p_v mult_v)^{K_v}.
// For a spectrum given with one level per label this is the usual multinomial.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qmat.hpp"
#include "random.hpp"
#include "states.hpp"

namespace locclab::protocols {

// ------------------------------------------------------------ teleportation

struct TeleportResult {
    DensityOperator state;        // input with X moved to Bob's side
    std::string relocated_label;  // new label of the teleported factor
    bool resource_consumed = true;
};

namespace detail {

inline Matrix shift_power(std::size_t L, long long j) {
    const auto n = static_cast<Eigen::Index>(L);
    Matrix x = Matrix::Zero(n, n);
    const auto LL = static_cast<long long>(L);
    for (long long m = 0; m < LL; ++m) x(((m + j) % LL + LL) % LL, m) = 1.0;
    return x;
}

inline Matrix clock_power(std::size_t L, long long k) {
    const auto n = static_cast<Eigen::Index>(L);
    Matrix z = Matrix::Zero(n, n);
    const double pi = std::acos(-1.0);
    for (Eigen::Index m = 0; m < n; ++m)
        z(m, m) = std::polar(1.0, 2.0 * pi * static_cast<double>(k * m) / static_cast<double>(L));
    return z;
}

// |Phi_jk> = L^{-1/2} sum_m w^{km} |m>_X |m + j>_{A'}
inline Vector bell_vector(std::size_t L, std::size_t j, std::size_t k) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(L * L));
    const double pi = std::acos(-1.0);
    const double a = 1.0 / std::sqrt(static_cast<double>(L));
    for (std::size_t m = 0; m < L; ++m)
        v(static_cast<Eigen::Index>(m * L + (m + j) % L)) =
            std::polar(a, 2.0 * pi * static_cast<double>(k * m) / static_cast<double>(L));
    return v;
}

} // namespace detail

// Teleports factor `x_label` of `input` through the maximally entangled
// `resource` (two factors: Alice's half then Bob's half). Simulates all L^2
// Bell-measurement branches with Bob's correction Z^k X^{-j} and returns the
// exact average state. The output carries Bob's resource label in the position
// X held.
inline TeleportResult teleport(const DensityOperator& input, const std::string& x_label, const PureState& resource) {
    if (resource.layout().size() != 2) throw LayoutError("teleport: resource must have exactly two factors");
    const std::string a_res = resource.layout()[0].label;
    const std::string b_res = resource.layout()[1].label;
    const std::size_t L = resource.layout()[0].dim;
    if (resource.layout()[1].dim != L) throw LayoutError("teleport: resource halves differ in dimension");
    if (input.layout().dim_of(x_label) != L)
        throw LayoutError("teleport: factor '" + x_label + "' has dimension " +
                          std::to_string(input.layout().dim_of(x_label)) + " but the resource has L = " +
                          std::to_string(L));
    const PureState ideal = states::make_max_entangled(L, a_res, b_res);
    const double overlap = std::norm(ideal.amplitudes().dot(resource.amplitudes()));
    if (overlap < 1.0 - tol::resource_overlap)
        throw ResourceError("teleport needs a maximally entangled resource; overlap is " + std::to_string(overlap));

    // Order the joint state as [rest..., X, A', B'].
    std::vector<std::string> order;
    for (const auto& l : input.layout().labels())
        if (l != x_label) order.push_back(l);
    const std::size_t rest_dim = input.layout().total_dim() / L;
    order.push_back(x_label);
    order.push_back(a_res);
    order.push_back(b_res);
    const Operator joint = permute(tensor(input.op(), resource.density().op()), order);

    const auto l3 = static_cast<Eigen::Index>(L * L * L);
    const auto l1 = static_cast<Eigen::Index>(L);
    const Matrix id_rest = identity_matrix(rest_dim);
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rest_dim * L), static_cast<Eigen::Index>(rest_dim * L));
    for (std::size_t j = 0; j < L; ++j)
        for (std::size_t k = 0; k < L; ++k) {
            const Vector phi = detail::bell_vector(L, j, k);
            // (<Phi_jk| (x) I_B') as an L x L^3 map, then Bob's correction.
            Matrix project = Matrix::Zero(l1, l3);
            for (Eigen::Index xa = 0; xa < static_cast<Eigen::Index>(L * L); ++xa)
                for (Eigen::Index b = 0; b < l1; ++b) project(b, xa * l1 + b) = std::conj(phi(xa));
            const Matrix correction =
                detail::clock_power(L, static_cast<long long>(k)) * detail::shift_power(L, -static_cast<long long>(j));
            const Matrix kraus = kron(id_rest, Matrix(correction * project));
            out += kraus * joint.matrix() * kraus.adjoint();
        }

    std::vector<Factor> out_factors;
    for (const auto& l : input.layout().labels())
        if (l != x_label) out_factors.push_back(input.layout()[input.layout().index_of(l)]);
    out_factors.push_back({b_res, L});
    std::vector<std::string> final_order;
    for (const auto& l : input.layout().labels()) final_order.push_back(l == x_label ? b_res : l);
    const Operator moved(TensorLayout(std::move(out_factors)), hermitian_part(out));
    return {DensityOperator(permute(moved, final_order)), b_res, true};
}

// ------------------------------------------------------------ concentration

using states::SchmidtSpectrum;

struct ConcentrationOutcome {
    std::vector<std::size_t> counts; // one entry per spectrum level
    double log2_dim = 0.0;
    double probability = 0.0;        // exact probability, or empirical weight when sampled
};

struct ConcentrationDistribution {
    std::vector<ConcentrationOutcome> outcomes;
    bool exact = true;
    std::size_t samples = 0;

    double mean_log2_dim() const {
        double m = 0.0;
        for (const auto& o : outcomes) m += o.probability * o.log2_dim;
        return m;
    }
};

struct SamplingPlan {
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
};

inline constexpr double max_exact_types = 1e6;

namespace detail {

inline double log_multinomial(std::size_t n, const std::vector<std::size_t>& k) {
    double v = std::lgamma(static_cast<double>(n) + 1.0);
    for (auto x : k) v -= std::lgamma(static_cast<double>(x) + 1.0);
    return v;
}

inline void check_counts(const SchmidtSpectrum& s, std::size_t n, const std::vector<std::size_t>& k) {
    if (k.size() != s.levels().size()) throw SpecError("type vector length must equal the number of levels");
    std::size_t total = 0;
    for (auto x : k) total += x;
    if (total != n) throw SpecError("type vector must sum to n");
}

inline double type_count(std::size_t n, std::size_t levels) {
    // C(n + m - 1, m - 1)
    return std::exp(std::lgamma(double(n + levels)) - std::lgamma(double(n) + 1.0) - std::lgamma(double(levels)));
}

} // namespace detail

// log2 of the maximally entangled dimension obtained for type K.
inline double type_log2_dim(const SchmidtSpectrum& s, const std::vector<std::size_t>& k) {
    std::size_t n = 0;
    for (auto x : k) n += x;
    detail::check_counts(s, n, k);
    double v = detail::log_multinomial(n, k) / std::log(2.0);
    for (std::size_t i = 0; i < k.size(); ++i)
        v += static_cast<double>(k[i]) * std::log2(static_cast<double>(s.levels()[i].multiplicity));
    return std::max(v, 0.0);
}

inline double type_probability(const SchmidtSpectrum& s, const std::vector<std::size_t>& k) {
    std::size_t n = 0;
    for (auto x : k) n += x;
    detail::check_counts(s, n, k);
    double lp = detail::log_multinomial(n, k);
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (k[i] == 0) continue;
        const double w = s.levels()[i].probability * static_cast<double>(s.levels()[i].multiplicity);
        if (w <= 0.0) return 0.0;
        lp += static_cast<double>(k[i]) * std::log(w);
    }
    return std::exp(lp);
}

// Number of d1-dimensional maximally entangled copies a log2 dimension supports.
inline std::size_t usable_copies(double log2_dim, std::size_t d1) {
    if (d1 < 2) throw SpecError("usable_copies needs d1 >= 2");
    return static_cast<std::size_t>(std::floor(log2_dim / std::log2(static_cast<double>(d1)) + 1e-9));
}

// Per-label Schmidt counts of one measurement: the level counts are
// multinomial in (p_v mult_v), and each level's count is spread uniformly over
// its labels. Labels are ordered level by level.
inline std::vector<std::size_t> sample_type(const SchmidtSpectrum& s, std::size_t n, Rng& rng) {
    if (n < 1) throw SpecError("sample_type needs n >= 1");
    const auto& levels = s.levels();
    std::size_t last_positive = 0;
    for (std::size_t v = 0; v < levels.size(); ++v)
        if (levels[v].probability > 0.0) last_positive = v;
    std::vector<std::size_t> out;
    out.reserve(s.rank());
    std::size_t remaining = n;
    double mass_left = 1.0;
    for (std::size_t v = 0; v < levels.size(); ++v) {
        const double w = levels[v].probability * static_cast<double>(levels[v].multiplicity);
        std::size_t kv = 0;
        if (v == last_positive) {
            kv = remaining;
        } else if (v < last_positive && remaining > 0 && w > 0.0) {
            std::binomial_distribution<std::size_t> bin(remaining, std::clamp(w / mass_left, 0.0, 1.0));
            kv = bin(rng.engine());
        }
        remaining -= kv;
        mass_left -= w;
        std::size_t left = kv;
        for (std::size_t m = 0; m < levels[v].multiplicity; ++m) {
            const std::size_t slots = levels[v].multiplicity - m;
            std::size_t c = left;
            if (slots > 1 && left > 0) {
                std::binomial_distribution<std::size_t> bin(left, 1.0 / static_cast<double>(slots));
                c = bin(rng.engine());
            }
            out.push_back(c);
            left -= c;
        }
    }
    return out;
}

inline std::vector<std::size_t> sample_type(const SchmidtSpectrum& s, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return sample_type(s, n, rng);
}

// Level counts of a per-label count vector.
inline std::vector<std::size_t> level_counts(const SchmidtSpectrum& s, const std::vector<std::size_t>& labels) {
    if (labels.size() != s.rank()) throw SpecError("label count vector has the wrong length");
    std::vector<std::size_t> k;
    std::size_t pos = 0;
    for (const auto& level : s.levels()) {
        std::size_t sum = 0;
        for (std::size_t m = 0; m < level.multiplicity; ++m) sum += labels[pos++];
        k.push_back(sum);
    }
    return k;
}

inline std::vector<ConcentrationOutcome> exact_concentration(const SchmidtSpectrum& s, std::size_t n) {
    if (n < 1) throw SpecError("concentration needs n >= 1");
    const std::size_t m = s.levels().size();
    if (detail::type_count(n, m) > max_exact_types)
        throw ModeError("exact enumeration would visit more than 1e6 types; use sampling mode");
    std::vector<ConcentrationOutcome> out;
    std::vector<std::size_t> k(m, 0);
    // Enumerate compositions of n into m parts in lexicographically decreasing order.
    auto rec = [&](auto&& self, std::size_t i, std::size_t left) -> void {
        if (i + 1 == m) {
            k[i] = left;
            out.push_back({k, type_log2_dim(s, k), type_probability(s, k)});
            return;
        }
        for (std::size_t x = left + 1; x-- > 0;) {
            k[i] = x;
            self(self, i + 1, left - x);
        }
    };
    rec(rec, 0, n);
    return out;
}

inline std::vector<ConcentrationOutcome> sampled_concentration(const SchmidtSpectrum& s, std::size_t n,
                                                               const SamplingPlan& plan) {
    if (n < 1) throw SpecError("concentration needs n >= 1");
    if (plan.samples < 1) throw SpecError("sampling mode needs at least one sample");
    Rng rng(plan.seed);
    std::map<std::vector<std::size_t>, std::size_t> hist;
    for (std::size_t t = 0; t < plan.samples; ++t) ++hist[level_counts(s, sample_type(s, n, rng))];
    std::vector<ConcentrationOutcome> out;
    for (auto it = hist.rbegin(); it != hist.rend(); ++it)
        out.push_back({it->first, type_log2_dim(s, it->first),
                       static_cast<double>(it->second) / static_cast<double>(plan.samples)});
    return out;
}

// Exact when no plan is given; otherwise Monte-Carlo weights.
inline ConcentrationDistribution concentration_distribution(const SchmidtSpectrum& s, std::size_t n,
                                                            const std::optional<SamplingPlan>& plan = std::nullopt) {
    ConcentrationDistribution d;
    if (plan) {
        d.outcomes = sampled_concentration(s, n, *plan);
        d.exact = false;
        d.samples = plan->samples;
    } else {
        d.outcomes = exact_concentration(s, n);
    }
    return d;
}

struct SuccessEstimate {
    double p = 0.0;
    double lower = 0.0; // equals p in exact mode
    double upper = 0.0;
    bool exact = true;
};

inline SuccessEstimate wilson_interval(std::size_t successes, std::size_t trials, double z) {
    const double nn = static_cast<double>(trials);
    const double ph = static_cast<double>(successes) / nn;
    const double denom = 1.0 + z * z / nn;
    const double centre = (ph + z * z / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(ph * (1.0 - ph) / nn + z * z / (4.0 * nn * nn)) / denom;
    return {ph, std::max(0.0, centre - half), std::min(1.0, centre + half), false};
}

inline constexpr double z99 = 2.5758293035489004;

// P_n = Pr[log2_dim >= target].
inline SuccessEstimate concentration_success_prob(const SchmidtSpectrum& s, std::size_t n, double target_log2_dim,
                                                  const std::optional<SamplingPlan>& plan = std::nullopt) {
    const double slack = 1e-9;
    if (!plan) {
        double p = 0.0;
        for (const auto& o : exact_concentration(s, n))
            if (o.log2_dim >= target_log2_dim - slack) p += o.probability;
        p = std::clamp(p, 0.0, 1.0);
        return {p, p, p, true};
    }
    Rng rng(plan->seed);
    std::size_t hits = 0;
    for (std::size_t t = 0; t < plan->samples; ++t)
        if (type_log2_dim(s, level_counts(s, sample_type(s, n, rng))) >= target_log2_dim - slack) ++hits;
    return wilson_interval(hits, plan->samples, z99);
}

// ------------------------------------------------------------ explicit states (n <= 3)

// |psi> = sum_i sqrt(p_i) |i>|i> for the spectrum, labels expanded level by level.
inline PureState schmidt_state(const SchmidtSpectrum& s, const std::string& a = "A", const std::string& b = "B") {
    const std::size_t r = s.rank();
    Vector v = Vector::Zero(static_cast<Eigen::Index>(r * r));
    std::size_t i = 0;
    for (const auto& level : s.levels())
        for (std::size_t m = 0; m < level.multiplicity; ++m, ++i)
            v(static_cast<Eigen::Index>(i * r + i)) = std::sqrt(level.probability);
    return PureState(TensorLayout{{a, r}, {b, r}}, v.normalized());
}

struct ExplicitConcentration {
    double probability = 0.0;
    std::size_t support = 0; // number of label strings in the type class
    PureState state;         // normalized post-measurement state on A1..An B1..Bn
};

// Projects psi^{(x)n} onto type class K by building the full vector.
inline ExplicitConcentration explicit_concentration(const SchmidtSpectrum& s, std::size_t n,
                                                    const std::vector<std::size_t>& k) {
    if (n < 1 || n > 3) throw ModeError("explicit post-measurement states are built only for n <= 3");
    detail::check_counts(s, n, k);
    const std::size_t r = s.rank();
    std::vector<std::size_t> level_of(r);
    std::vector<double> prob_of(r);
    {
        std::size_t i = 0;
        for (std::size_t v = 0; v < s.levels().size(); ++v)
            for (std::size_t m = 0; m < s.levels()[v].multiplicity; ++m, ++i) {
                level_of[i] = v;
                prob_of[i] = s.levels()[v].probability;
            }
    }
    std::vector<Factor> f;
    for (std::size_t c = 0; c < n; ++c) f.push_back({"A" + std::to_string(c + 1), r});
    for (std::size_t c = 0; c < n; ++c) f.push_back({"B" + std::to_string(c + 1), r});
    const TensorLayout layout(std::move(f));
    const auto strides = layout.strides();

    std::size_t strings = 1;
    for (std::size_t c = 0; c < n; ++c) strings *= r;
    Vector v = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
    ExplicitConcentration out;
    for (std::size_t w = 0; w < strings; ++w) {
        std::vector<std::size_t> digits(n);
        std::size_t rem = w;
        for (std::size_t c = n; c-- > 0;) {
            digits[c] = rem % r;
            rem /= r;
        }
        std::vector<std::size_t> kk(s.levels().size(), 0);
        double amp = 1.0;
        for (auto d : digits) {
            ++kk[level_of[d]];
            amp *= std::sqrt(prob_of[d]);
        }
        if (kk != k) continue;
        std::size_t idx = 0;
        for (std::size_t c = 0; c < n; ++c) idx += digits[c] * strides[c] + digits[c] * strides[n + c];
        v(static_cast<Eigen::Index>(idx)) = amp;
        ++out.support;
    }
    out.probability = v.squaredNorm();
    if (out.probability <= 0.0) throw SpecError("type class has zero probability");
    out.state = PureState(layout, v / std::sqrt(out.probability));
    return out;
}

} // namespace locclab::protocols
