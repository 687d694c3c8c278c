// states.hpp - constructors for the state families used by the experiments

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qmat.hpp"
#include "random.hpp"

namespace locclab::states {

enum class HidingFamily { werner_projectors };

inline std::string to_string(HidingFamily f) {
    switch (f) {
    case HidingFamily::werner_projectors: return "werner-projectors";
    }
    return "?";
}

struct HidingPairSpec {
    std::size_t d = 2;
    HidingFamily family = HidingFamily::werner_projectors;

    void validate() const {
        if (d < 2) throw SpecError("hiding pair needs local dimension d >= 2, got " + std::to_string(d));
    }
};

struct PsiSpec {
    double lambda = 0.5;
    std::size_t d2 = 2;

    void validate() const {
        if (!(lambda > 0.0 && lambda < 1.0))
            throw SpecError("psi needs 0 < lambda < 1, got " + std::to_string(lambda));
        if (d2 < 2) throw SpecError("psi needs d2 >= 2, got " + std::to_string(d2));
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                           const char* what) {
    if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(std::string(what) + ": unknown field '" + key + "'");
    }
}

} // namespace detail

inline nlohmann::json to_json(const HidingPairSpec& s) {
    return {{"family", to_string(s.family)}, {"d", s.d}};
}

inline HidingPairSpec hiding_spec_from_json(const nlohmann::json& j) {
    detail::reject_unknown(j, {"family", "d"}, "hiding pair spec");
    HidingPairSpec s;
    if (j.contains("family") && j["family"] != "werner-projectors")
        throw ConfigError("unknown hiding family " + j["family"].dump());
    s.d = j.at("d").get<std::size_t>();
    s.validate();
    return s;
}

inline nlohmann::json to_json(const PsiSpec& s) { return {{"lambda", s.lambda}, {"d2", s.d2}}; }

inline PsiSpec psi_spec_from_json(const nlohmann::json& j) {
    detail::reject_unknown(j, {"lambda", "d2"}, "psi spec");
    PsiSpec s{j.at("lambda").get<double>(), j.at("d2").get<std::size_t>()};
    s.validate();
    return s;
}

// Schmidt probabilities grouped by value: entry (p, m) stands for m Schmidt
// coefficients that all equal p.
struct SchmidtLevel {
    double probability = 0.0;
    std::size_t multiplicity = 1;
};

class SchmidtSpectrum {
public:
    SchmidtSpectrum() = default;

    explicit SchmidtSpectrum(std::vector<SchmidtLevel> levels) : levels_(std::move(levels)) {
        if (levels_.empty()) throw SpecError("Schmidt spectrum is empty");
        double total = 0.0;
        for (const auto& l : levels_) {
            if (!(l.probability >= 0.0)) throw SpecError("Schmidt probability must be >= 0");
            if (l.multiplicity < 1) throw SpecError("Schmidt multiplicity must be >= 1");
            total += l.probability * static_cast<double>(l.multiplicity);
        }
        if (std::abs(total - 1.0) > tol::spectrum_sum)
            throw SpecError("Schmidt spectrum sums to " + std::to_string(total));
    }

    const std::vector<SchmidtLevel>& levels() const noexcept { return levels_; }

    // Number of Schmidt coefficients (labels) counted with multiplicity.
    std::size_t rank() const {
        std::size_t r = 0;
        for (const auto& l : levels_) r += l.multiplicity;
        return r;
    }

    // Entanglement entropy of the state, in bits.
    double entropy_bits() const {
        double h = 0.0;
        for (const auto& l : levels_)
            if (l.probability > 0.0)
                h -= static_cast<double>(l.multiplicity) * l.probability * std::log2(l.probability);
        return h;
    }

private:
    std::vector<SchmidtLevel> levels_;
};

inline SchmidtSpectrum psi_spectrum(const PsiSpec& s) {
    s.validate();
    return SchmidtSpectrum({{s.lambda, 1}, {(1.0 - s.lambda) / static_cast<double>(s.d2 - 1), s.d2 - 1}});
}

// S(psi^{A2}) = -lambda log2 lambda - (1 - lambda) log2((1 - lambda)/(d2 - 1))
inline double psi_entropy_closed_form(const PsiSpec& s) {
    s.validate();
    const double tail = (1.0 - s.lambda) / static_cast<double>(s.d2 - 1);
    return -s.lambda * std::log2(s.lambda) - (1.0 - s.lambda) * std::log2(tail);
}

// Symmetric/antisymmetric normalized projectors on C^d (x) C^d, factors A1 and B1.
inline std::pair<DensityOperator, DensityOperator> make_hiding_pair(const HidingPairSpec& spec) {
    spec.validate();
    const std::size_t d = spec.d;
    const auto n = static_cast<Eigen::Index>(d * d);
    Matrix swap = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            swap(static_cast<Eigen::Index>(j * d + i), static_cast<Eigen::Index>(i * d + j)) = 1.0;
    const Matrix id = identity_matrix(d * d);
    const double dd = static_cast<double>(d);
    const Matrix sym = (id + swap) / (dd * (dd + 1.0));
    const Matrix asym = (id - swap) / (dd * (dd - 1.0));
    const TensorLayout layout{{"A1", d}, {"B1", d}};
    return {DensityOperator(layout, sym), DensityOperator(layout, asym)};
}

// sqrt(lambda)|00> + sqrt((1-lambda)/(d2-1)) sum_{i>=1} |ii> on A2 B2.
inline PureState make_psi(const PsiSpec& spec, const std::string& a_label = "A2",
                          const std::string& b_label = "B2") {
    spec.validate();
    const std::size_t d = spec.d2;
    Vector v = Vector::Zero(static_cast<Eigen::Index>(d * d));
    v(0) = std::sqrt(spec.lambda);
    const double tail = std::sqrt((1.0 - spec.lambda) / static_cast<double>(d - 1));
    for (std::size_t i = 1; i < d; ++i) v(static_cast<Eigen::Index>(i * d + i)) = tail;
    return PureState(TensorLayout{{a_label, d}, {b_label, d}}, v.normalized());
}

struct PsiConditions {
    bool near_product = false;   // 2 sqrt(1 - lambda) < eps'
    double entropy_excess = 0.0; // S(psi^{A2}) - log2 d1
    double trace_distance_bound = 0.0;
    double entropy = 0.0;
};

inline PsiConditions check_psi_conditions(const PsiSpec& spec, std::size_t d1, double eps_prime) {
    spec.validate();
    if (d1 < 2) throw SpecError("d1 must be >= 2");
    PsiConditions r;
    r.trace_distance_bound = 2.0 * std::sqrt(1.0 - spec.lambda);
    r.near_product = r.trace_distance_bound < eps_prime;
    r.entropy = psi_entropy_closed_form(spec);
    r.entropy_excess = r.entropy - std::log2(static_cast<double>(d1));
    return r;
}

// rho_i = sigma_i^{A1B1} (x) |psi><psi|^{A2B2}
inline std::pair<DensityOperator, DensityOperator> make_rho_pair(const HidingPairSpec& hiding,
                                                                 const PsiSpec& psi) {
    const auto [s0, s1] = make_hiding_pair(hiding);
    const DensityOperator p = make_psi(psi).density();
    return {tensor(s0, p), tensor(s1, p)};
}

inline PureState make_max_entangled(std::size_t L, const std::string& a_label = "A'",
                                    const std::string& b_label = "B'") {
    if (L < 1) throw SpecError("maximally entangled state needs L >= 1");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(L * L));
    const double a = 1.0 / std::sqrt(static_cast<double>(L));
    for (std::size_t i = 0; i < L; ++i) v(static_cast<Eigen::Index>(i * L + i)) = a;
    return PureState(TensorLayout{{a_label, L}, {b_label, L}}, v.normalized());
}

inline Vector haar_vector(std::size_t d, Rng& rng) {
    Vector v(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double re = rng.normal();
        const double im = rng.normal();
        v(i) = cplx(re, im);
    }
    return v.normalized();
}

// Haar-random unitary via QR of a complex Ginibre matrix with phase correction.
inline Matrix haar_unitary(std::size_t d, Rng& rng) {
    Eigen::MatrixXcd g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            const double re = rng.normal();
            const double im = rng.normal();
            g(i, j) = cplx(re, im);
        }
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    Eigen::MatrixXcd q = qr.householderQ();
    const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        const cplx diag = r(j, j);
        const double a = std::abs(diag);
        if (a > 0.0) q.col(j) *= diag / a;
    }
    return q;
}

// sum_x p_x psi_x (x) phi_x with Haar local pure states and flat-Dirichlet weights.
// Every factor label must start with 'A' or 'B'.
inline DensityOperator sample_separable(const TensorLayout& layout, std::size_t k_terms, std::uint64_t seed) {
    if (k_terms < 1) throw SpecError("sample_separable needs k_terms >= 1");
    for (const auto& f : layout.factors())
        if (party_of(f.label) != 'A' && party_of(f.label) != 'B')
            throw LayoutError("sample_separable: label '" + f.label + "' belongs to neither party");
    const std::size_t da = layout.party_dim('A');
    const std::size_t db = layout.party_dim('B');
    Rng rng(seed);
    std::vector<double> w(k_terms);
    double total = 0.0;
    for (auto& x : w) total += (x = rng.exponential());
    const auto n = static_cast<Eigen::Index>(da * db);
    Matrix m = Matrix::Zero(n, n);
    for (std::size_t t = 0; t < k_terms; ++t) {
        const Vector a = haar_vector(da, rng);
        const Vector b = haar_vector(db, rng);
        const Vector ab = kron(a, b);
        m += (w[t] / total) * (ab * ab.adjoint());
    }
    m = hermitian_part(m);
    m /= m.trace().real();
    std::vector<Factor> canon;
    for (const auto& l : layout.canonical_order()) canon.push_back(layout[layout.index_of(l)]);
    return DensityOperator(permute(Operator(TensorLayout(std::move(canon)), m), layout.labels()));
}

// Random mixed state from a Ginibre matrix of given rank (test and CLI helper).
inline DensityOperator sample_mixed(const TensorLayout& layout, std::size_t rank, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = layout.total_dim();
    Matrix g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rank));
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            const double re = rng.normal();
            const double im = rng.normal();
            g(i, j) = cplx(re, im);
        }
    Matrix m = g * g.adjoint();
    m = hermitian_part(m);
    m /= m.trace().real();
    return DensityOperator(layout, m);
}

} // namespace locclab::states
