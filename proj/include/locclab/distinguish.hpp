// distinguish.hpp - distinguishability functionals for two-state discrimination
//
// helstrom          optimal global success probability 1/2 + ||r0 - r1||_1 / 4
// apply_channel     outcome statistics of a measurement channel on an operator
// locc_lower_bound  best one-way local strategy in a fixed library (achievable)
// ppt_upper_bound   PPT relaxation of the LOCC optimum (certified upper bound)
// bound_bracket     all of the above for one pair

#pragma once

#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ppt_sdp.hpp"
#include "qmat.hpp"
#include "random.hpp"
#include "states.hpp"

namespace locclab::distinguish {

inline double helstrom(const Operator& rho0, const Operator& rho1) {
    require_same_layout(rho0.layout(), rho1.layout(), "helstrom");
    return 0.5 + 0.25 * trace_norm(rho0 - rho1);
}

enum class ChannelStructure { product_povm, local_basis, general };

inline std::string to_string(ChannelStructure s) {
    switch (s) {
    case ChannelStructure::product_povm: return "product-povm";
    case ChannelStructure::local_basis: return "local-basis";
    case ChannelStructure::general: return "general";
    }
    return "?";
}

struct PovmElement {
    Matrix op;
    std::string label;
    // Set for product-povm channels: op = a_part (x) b_part in canonical order.
    Matrix a_part;
    Matrix b_part;
};

// Finite POVM realizing the quantum-to-classical channel X -> sum_i Tr[M_i X] |i><i|.
class MeasurementChannel {
public:
    MeasurementChannel() = default;

    MeasurementChannel(TensorLayout layout, std::vector<PovmElement> elements, ChannelStructure structure,
                       std::string id = {})
        : layout_(std::move(layout)), elements_(std::move(elements)), structure_(structure), id_(std::move(id)) {
        validate();
    }

    const TensorLayout& layout() const noexcept { return layout_; }
    const std::vector<PovmElement>& elements() const noexcept { return elements_; }
    ChannelStructure structure() const noexcept { return structure_; }
    const std::string& id() const noexcept { return id_; }

    void validate() const {
        if (elements_.empty()) throw ChannelError("measurement channel has no elements");
        const auto n = static_cast<Eigen::Index>(layout_.total_dim());
        Matrix sum = Matrix::Zero(n, n);
        for (const auto& e : elements_) {
            if (e.op.rows() != n || e.op.cols() != n)
                throw ChannelError("POVM element '" + e.label + "' has the wrong dimension");
            if (hermitian_deviation(e.op) > tol::povm)
                throw ChannelError("POVM element '" + e.label + "' is not Hermitian");
            if (eigvalsh(e.op).minCoeff() < -tol::povm)
                throw ChannelError("POVM element '" + e.label + "' is not positive");
            if (structure_ == ChannelStructure::product_povm) {
                if (e.a_part.size() == 0 || e.b_part.size() == 0 ||
                    (kron(e.a_part, e.b_part) - e.op).cwiseAbs().maxCoeff() > tol::povm)
                    throw ChannelError("POVM element '" + e.label + "' does not factor as A (x) B");
            }
            sum += e.op;
        }
        const double dev = (sum - identity_matrix(layout_.total_dim())).cwiseAbs().maxCoeff();
        if (dev > tol::povm)
            throw ChannelError("POVM elements sum to identity only within " + std::to_string(dev));
    }

private:
    TensorLayout layout_;
    std::vector<PovmElement> elements_;
    ChannelStructure structure_ = ChannelStructure::general;
    std::string id_;
};

struct ChannelOutput {
    std::vector<double> values; // Tr[M_i X], a signed measure for traceless X
    double measured_norm = 0.0; // sum_i |Tr[M_i X]|
};

inline ChannelOutput apply_channel(const MeasurementChannel& channel, const Operator& x) {
    channel.validate();
    Operator xx = x;
    if (!(x.layout() == channel.layout())) {
        if (!x.layout().same_factors(channel.layout()))
            throw LayoutError("apply_channel: operator layout does not match the channel");
        xx = permute(x, channel.layout().labels());
    }
    locclab::detail::require_finite(xx.matrix(), "apply_channel");
    ChannelOutput out;
    for (const auto& e : channel.elements()) {
        const double v = detail::tr_re(e.op, xx.matrix());
        out.values.push_back(v);
        out.measured_norm += std::abs(v);
    }
    return out;
}

// Computational-basis projective measurement on every factor.
inline MeasurementChannel computational_basis_channel(const TensorLayout& layout) {
    const std::size_t n = layout.total_dim();
    std::vector<PovmElement> el;
    for (std::size_t i = 0; i < n; ++i) {
        Matrix p = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
        el.push_back({p, "e" + std::to_string(i), {}, {}});
    }
    return MeasurementChannel(layout, std::move(el), ChannelStructure::local_basis, "computational");
}

// Two-outcome Helstrom measurement {P+, I - P+}, P+ the projector onto the
// positive part of r0 - r1. Outcome 0 means "guess r0".
inline MeasurementChannel helstrom_channel(const Operator& rho0, const Operator& rho1) {
    const Operator diff = rho0 - rho1;
    const Eigh e = eigh(diff.matrix());
    const auto n = static_cast<Eigen::Index>(diff.dim());
    Matrix p = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        if (e.values(k) > 0.0) p += e.vectors.col(k) * e.vectors.col(k).adjoint();
    p = hermitian_part(p);
    return MeasurementChannel(diff.layout(), {{p, "guess0", {}, {}}, {identity_matrix(diff.dim()) - p, "guess1", {}, {}}},
                              ChannelStructure::general, "helstrom");
}

// ------------------------------------------------------- LOCC lower bound

// One-way strategy: the `first` party measures in an orthonormal basis
// (columns of the generated matrix), announces the outcome, and the other
// party performs the optimal binary measurement on what remains.
struct OneWayStrategy {
    std::string id;
    char first = 'A';
    // Receives the difference operator in canonical (A then B) order plus the
    // first party's dimension; returns a unitary whose columns are the basis.
    std::function<Matrix(const Operator& diff_canonical, std::size_t dim_first)> basis;
};

using StrategyLibrary = std::vector<OneWayStrategy>;

namespace detail {

inline Matrix fourier_basis(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    Matrix f(n, n);
    const double pi = std::acos(-1.0);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
            f(j, k) = std::polar(1.0 / std::sqrt(static_cast<double>(d)), 2.0 * pi * static_cast<double>(j * k) / static_cast<double>(d));
    return f;
}

// Block of the canonical operator seen by `second` after `first` got basis vector v.
inline Matrix conditional_block(const Matrix& diff, const Vector& v, char first, std::size_t da, std::size_t db) {
    const auto A = static_cast<Eigen::Index>(da), B = static_cast<Eigen::Index>(db);
    if (first == 'A') {
        Matrix out = Matrix::Zero(B, B);
        for (Eigen::Index i = 0; i < A; ++i)
            for (Eigen::Index j = 0; j < A; ++j) {
                const cplx w = std::conj(v(i)) * v(j);
                if (w != cplx(0.0)) out += w * diff.block(i * B, j * B, B, B);
            }
        return out;
    }
    Matrix out = Matrix::Zero(A, A);
    for (Eigen::Index i = 0; i < A; ++i)
        for (Eigen::Index j = 0; j < A; ++j) {
            cplx acc = 0.0;
            for (Eigen::Index k = 0; k < B; ++k)
                for (Eigen::Index l = 0; l < B; ++l) acc += std::conj(v(k)) * v(l) * diff(i * B + k, j * B + l);
            out(i, j) = acc;
        }
    return out;
}

inline Operator reduced_of_party(const Operator& canonical, char keep) {
    std::set<std::string> drop;
    for (const auto& l : canonical.layout().labels())
        if (party_of(l) != keep) drop.insert(l);
    return partial_trace(canonical, drop);
}

} // namespace detail

// Default library, in its fixed evaluation order: for each direction (A first,
// then B first) the computational basis, the Fourier basis, the eigenbasis of
// the first party's marginal of r0 - r1, then `haar_bases`
// seeded Haar-random bases.
inline StrategyLibrary default_strategy_library(std::size_t haar_bases = 16, std::uint64_t seed = 0x10cc) {
    StrategyLibrary lib;
    for (char first : {'A', 'B'}) {
        const std::string dir = first == 'A' ? "A>B" : "B>A";
        lib.push_back({dir + ":computational", first,
                       [](const Operator&, std::size_t d) { return identity_matrix(d); }});
        lib.push_back({dir + ":fourier", first,
                       [](const Operator&, std::size_t d) { return detail::fourier_basis(d); }});
        lib.push_back({dir + ":marginal-eigen", first, [first](const Operator& diff, std::size_t) {
                           return eigh(detail::reduced_of_party(diff, first).matrix()).vectors;
                       }});
        for (std::size_t k = 0; k < haar_bases; ++k) {
            const std::uint64_t s = derive_seed(seed, dir, k);
            lib.push_back({dir + ":haar-" + std::to_string(k), first, [s](const Operator&, std::size_t d) {
                               Rng rng(s);
                               return states::haar_unitary(d, rng);
                           }});
        }
    }
    return lib;
}

struct LoccLowerBound {
    double value = 0.5;  // 1/2 + measured_norm / 4 of the witness
    double measured_norm = 0.0;
    std::string witness_id;
    MeasurementChannel witness;
};

namespace detail {

struct OneWayEval {
    double measured_norm = 0.0;
    std::vector<PovmElement> elements;
};

inline OneWayEval evaluate_one_way(const Operator& diff_c, const Matrix& basis, char first, std::size_t da,
                                   std::size_t db, bool build) {
    OneWayEval out;
    const std::size_t d_first = first == 'A' ? da : db;
    for (std::size_t a = 0; a < d_first; ++a) {
        const Vector v = basis.col(static_cast<Eigen::Index>(a));
        const Matrix block = conditional_block(diff_c.matrix(), v, first, da, db);
        const Eigh e = eigh(block);
        out.measured_norm += e.values.cwiseAbs().sum();
        if (!build) continue;
        const Matrix pa = v * v.adjoint();
        for (Eigen::Index k = 0; k < e.values.size(); ++k) {
            const Matrix pb = e.vectors.col(k) * e.vectors.col(k).adjoint();
            PovmElement el;
            el.label = "m" + std::to_string(a) + "." + std::to_string(k);
            el.a_part = first == 'A' ? pa : pb;
            el.b_part = first == 'A' ? pb : pa;
            el.op = kron(el.a_part, el.b_part);
            out.elements.push_back(std::move(el));
        }
    }
    return out;
}

} // namespace detail

// Best strategy of the library; ties go to the first one evaluated.
inline LoccLowerBound locc_lower_bound(const Operator& rho0, const Operator& rho1,
                                       const StrategyLibrary& library = default_strategy_library()) {
    if (library.empty()) throw ConfigError("locc_lower_bound: empty strategy library");
    require_same_layout(rho0.layout(), rho1.layout(), "locc_lower_bound");
    const Operator diff = rho0 - rho1;
    const TensorLayout& layout = diff.layout();
    for (const auto& f : layout.factors())
        if (party_of(f.label) != 'A' && party_of(f.label) != 'B')
            throw LayoutError("locc_lower_bound: label '" + f.label + "' belongs to neither party");
    const std::size_t da = layout.party_dim('A');
    const std::size_t db = layout.party_dim('B');
    const Operator diff_c = permute(diff, layout.canonical_order());

    double best = -1.0;
    std::size_t best_k = 0;
    std::vector<Matrix> bases(library.size());
    for (std::size_t k = 0; k < library.size(); ++k) {
        const auto& s = library[k];
        const std::size_t d_first = s.first == 'A' ? da : db;
        bases[k] = s.basis(diff_c, d_first);
        const double v = detail::evaluate_one_way(diff_c, bases[k], s.first, da, db, false).measured_norm;
        if (v > best + 1e-15) {
            best = v;
            best_k = k;
        }
    }
    const auto& s = library[best_k];
    auto ev = detail::evaluate_one_way(diff_c, bases[best_k], s.first, da, db, true);
    LoccLowerBound out;
    out.measured_norm = ev.measured_norm;
    out.value = 0.5 + 0.25 * ev.measured_norm;
    out.witness_id = s.id;
    out.witness = MeasurementChannel(diff_c.layout(), std::move(ev.elements), ChannelStructure::product_povm, s.id);
    return out;
}

// ------------------------------------------------------- PPT upper bound

struct PptBound {
    double value = 0.5;  // 1/2 + upper / 2, certified
    double lower = 0.5;  // 1/2 + Tr[M D] / 2 for the returned PPT POVM element
    double gap = 0.0;    // value - lower
    int iterations = 0;
    Matrix M;
};

inline PptBound ppt_upper_bound(const Operator& rho0, const Operator& rho1, const PptSdpOptions& opt = {}) {
    require_same_layout(rho0.layout(), rho1.layout(), "ppt_upper_bound");
    const Operator diff = rho0 - rho1;
    if (diff.dim() > 64) throw ConfigError("ppt_upper_bound: bundled solver handles total dimension <= 64");
    const auto b_labels = diff.layout().labels_of_party('B');
    if (b_labels.empty() || diff.layout().labels_of_party('A').empty())
        throw LayoutError("ppt_upper_bound needs factors of both parties");
    const auto r = solve_ppt_sdp(diff, std::set<std::string>(b_labels.begin(), b_labels.end()), opt);
    PptBound out;
    out.value = std::min(1.0, 0.5 + 0.5 * r.upper);
    out.lower = 0.5 + 0.5 * r.lower;
    out.gap = std::max(0.0, out.value - out.lower);
    out.iterations = r.iterations;
    out.M = r.M;
    return out;
}

// ------------------------------------------------------- bracket

struct BoundBracket {
    double helstrom = 0.5;
    double locc_lower = 0.5;
    double ppt_upper = 0.5;
    double sdp_gap = 0.0;
    std::string witness_id;
    MeasurementChannel witness;

    bool ordered(double slack = tol::bracket) const {
        return 0.5 - slack <= locc_lower && locc_lower <= ppt_upper + slack &&
               ppt_upper <= helstrom + slack && helstrom <= 1.0 + slack;
    }
};

inline BoundBracket bound_bracket(const Operator& rho0, const Operator& rho1,
                                  const StrategyLibrary& library = default_strategy_library()) {
    BoundBracket b;
    b.helstrom = helstrom(rho0, rho1);
    auto lo = locc_lower_bound(rho0, rho1, library);
    b.locc_lower = lo.value;
    b.witness_id = lo.witness_id;
    b.witness = std::move(lo.witness);
    const auto up = ppt_upper_bound(rho0, rho1);
    b.ppt_upper = up.value;
    b.sdp_gap = up.gap;
    return b;
}

// PPT excess of a pair: certified stand-in for the hiding parameter eps.
inline double ppt_excess(const Operator& rho0, const Operator& rho1) {
    return ppt_upper_bound(rho0, rho1).value - 0.5;
}

// P_LOCC(r0, r1) <= 1/2 + (4 eps + 2 eps') / 4 = eps + (1 + eps') / 2
inline double composed_locc_bound(double eps, double eps_prime) {
    if (!(eps >= 0.0) || !(eps_prime >= 0.0)) throw SpecError("composed_locc_bound needs eps, eps' >= 0");
    return 0.5 + (4.0 * eps + 2.0 * eps_prime) / 4.0;
}

} // namespace locclab::distinguish
