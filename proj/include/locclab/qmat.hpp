// qmat.hpp - dense complex operators with labelled tensor factors
//
// Storage is row-major and dense throughout; every object in this library is
// small (total dimension at most about 1024). Index convention: the last factor
// of a layout varies fastest, so |i j> of a two-factor layout with dims (dA, dB)
// sits at i * dB + j.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "tolerances.hpp"

namespace locclab {

using cplx = std::complex<double>;
using Matrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;
using RealVector = Eigen::VectorXd;

struct Factor {
    std::string label;
    std::size_t dim = 1;

    bool operator==(const Factor&) const = default;
};

// Party of a factor label: its first character ('A' for Alice, 'B' for Bob).
inline char party_of(const std::string& label) {
    return label.empty() ? '\0' : label.front();
}

class TensorLayout {
public:
    TensorLayout() = default;

    explicit TensorLayout(std::vector<Factor> factors) : factors_(std::move(factors)) {
        std::set<std::string> seen;
        for (const auto& f : factors_) {
            if (f.dim < 1) throw LayoutError("factor '" + f.label + "' has dimension 0");
            if (f.label.empty()) throw LayoutError("factor label must be non-empty");
            if (!seen.insert(f.label).second)
                throw LayoutError("duplicate factor label '" + f.label + "'");
        }
    }

    TensorLayout(std::initializer_list<Factor> factors)
        : TensorLayout(std::vector<Factor>(factors)) {}

    std::size_t size() const noexcept { return factors_.size(); }
    const Factor& operator[](std::size_t i) const { return factors_[i]; }
    const std::vector<Factor>& factors() const noexcept { return factors_; }

    std::size_t total_dim() const noexcept {
        std::size_t d = 1;
        for (const auto& f : factors_) d *= f.dim;
        return d;
    }

    bool has(const std::string& label) const {
        return std::any_of(factors_.begin(), factors_.end(),
                           [&](const Factor& f) { return f.label == label; });
    }

    std::size_t index_of(const std::string& label) const {
        for (std::size_t i = 0; i < factors_.size(); ++i)
            if (factors_[i].label == label) return i;
        throw LayoutError("unknown factor label '" + label + "'");
    }

    std::size_t dim_of(const std::string& label) const { return factors_[index_of(label)].dim; }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        for (const auto& f : factors_) out.push_back(f.label);
        return out;
    }

    // Labels belonging to party p, in layout order.
    std::vector<std::string> labels_of_party(char p) const {
        std::vector<std::string> out;
        for (const auto& f : factors_)
            if (party_of(f.label) == p) out.push_back(f.label);
        return out;
    }

    std::size_t party_dim(char p) const {
        std::size_t d = 1;
        for (const auto& f : factors_)
            if (party_of(f.label) == p) d *= f.dim;
        return d;
    }

    TensorLayout concat(const TensorLayout& other) const {
        std::vector<Factor> f = factors_;
        f.insert(f.end(), other.factors_.begin(), other.factors_.end());
        return TensorLayout(std::move(f));
    }

    TensorLayout without(const std::set<std::string>& drop) const {
        std::vector<Factor> f;
        for (const auto& x : factors_)
            if (!drop.count(x.label)) f.push_back(x);
        return TensorLayout(std::move(f));
    }

    TensorLayout relabelled(const std::string& from, const std::string& to) const {
        std::vector<Factor> f = factors_;
        f[index_of(from)].label = to;
        return TensorLayout(std::move(f));
    }

    // Row-major strides: stride of the last factor is 1.
    std::vector<std::size_t> strides() const {
        std::vector<std::size_t> s(factors_.size(), 1);
        for (std::size_t k = factors_.size(); k-- > 1;) s[k - 1] = s[k] * factors_[k].dim;
        return s;
    }

    // Same label multiset and dims, possibly different order.
    bool same_factors(const TensorLayout& other) const {
        if (size() != other.size()) return false;
        for (const auto& f : factors_) {
            if (!other.has(f.label) || other.dim_of(f.label) != f.dim) return false;
        }
        return true;
    }

    // A-party labels first, B-party next, anything else last; stable within a party.
    std::vector<std::string> canonical_order() const {
        std::vector<std::string> out = labels_of_party('A');
        for (const auto& l : labels_of_party('B')) out.push_back(l);
        for (const auto& f : factors_)
            if (party_of(f.label) != 'A' && party_of(f.label) != 'B') out.push_back(f.label);
        return out;
    }

    bool operator==(const TensorLayout&) const = default;

private:
    std::vector<Factor> factors_;
};

namespace detail {

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite entries");
}

// For each full index, the summed contribution of the factors in `subset`.
inline std::vector<std::size_t> subset_offsets(const TensorLayout& layout,
                                               const std::set<std::string>& subset) {
    const auto strides = layout.strides();
    const std::size_t n = layout.total_dim();
    std::vector<std::size_t> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rem = i, off = 0;
        for (std::size_t k = 0; k < layout.size(); ++k) {
            const std::size_t digit = rem / strides[k];
            rem %= strides[k];
            if (subset.count(layout[k].label)) off += digit * strides[k];
        }
        out[i] = off;
    }
    return out;
}

inline void require_labels(const TensorLayout& layout, const std::set<std::string>& labels) {
    for (const auto& l : labels)
        if (!layout.has(l)) throw LayoutError("unknown factor label '" + l + "'");
}

} // namespace detail

inline double hermitian_deviation(const Matrix& m) {
    if (m.rows() != m.cols()) return INFINITY;
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
    Vector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

// Hermitian eigendecomposition, eigenvalues ascending, eigenvectors as columns.
struct Eigh {
    RealVector values;
    Matrix vectors;
};

inline Eigh eigh(const Matrix& m) {
    detail::require_finite(m, "eigh");
    Eigen::MatrixXcd h = hermitian_part(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() != Eigen::Success) throw NumericError("eigh: eigensolver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

inline RealVector eigvalsh(const Matrix& m) {
    detail::require_finite(m, "eigvalsh");
    Eigen::MatrixXcd h = hermitian_part(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("eigvalsh: eigensolver failed");
    return es.eigenvalues();
}

// f applied to the spectrum of a Hermitian matrix.
template <typename F>
Matrix spectral_apply(const Matrix& m, F&& f) {
    const Eigh e = eigh(m);
    RealVector v = e.values.unaryExpr(f);
    return e.vectors * v.asDiagonal() * e.vectors.adjoint();
}

inline Matrix sqrt_psd(const Matrix& m) {
    return spectral_apply(m, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

// Operator on a labelled tensor space with no positivity or trace requirement.
class Operator {
public:
    Operator() = default;

    Operator(TensorLayout layout, Matrix m) : layout_(std::move(layout)), m_(std::move(m)) {
        const auto n = static_cast<Eigen::Index>(layout_.total_dim());
        if (m_.rows() != n || m_.cols() != n)
            throw LayoutError("operator shape " + std::to_string(m_.rows()) + "x" +
                              std::to_string(m_.cols()) + " does not match layout dimension " +
                              std::to_string(n));
    }

    const TensorLayout& layout() const noexcept { return layout_; }
    const Matrix& matrix() const noexcept { return m_; }
    std::size_t dim() const noexcept { return layout_.total_dim(); }
    cplx trace() const { return m_.trace(); }

    Operator relabelled(const std::string& from, const std::string& to) const {
        return Operator(layout_.relabelled(from, to), m_);
    }

private:
    TensorLayout layout_;
    Matrix m_;
};

inline void require_same_layout(const TensorLayout& a, const TensorLayout& b, const char* what) {
    if (!(a == b)) throw LayoutError(std::string(what) + ": layouts differ");
}

inline Operator operator-(const Operator& a, const Operator& b) {
    require_same_layout(a.layout(), b.layout(), "operator difference");
    return Operator(a.layout(), a.matrix() - b.matrix());
}

inline Operator operator+(const Operator& a, const Operator& b) {
    require_same_layout(a.layout(), b.layout(), "operator sum");
    return Operator(a.layout(), a.matrix() + b.matrix());
}

inline Operator operator*(double s, const Operator& a) { return Operator(a.layout(), s * a.matrix()); }

// Positive semidefinite, unit-trace, Hermitian operator. Checked on construction.
class DensityOperator {
public:
    DensityOperator() = default;

    explicit DensityOperator(Operator op) : op_(std::move(op)) { validate(); }
    DensityOperator(TensorLayout layout, Matrix m) : DensityOperator(Operator(std::move(layout), std::move(m))) {}

    const Operator& op() const noexcept { return op_; }
    operator const Operator&() const noexcept { return op_; }
    const TensorLayout& layout() const noexcept { return op_.layout(); }
    const Matrix& matrix() const noexcept { return op_.matrix(); }
    std::size_t dim() const noexcept { return op_.dim(); }

private:
    void validate() const {
        const Matrix& m = op_.matrix();
        detail::require_finite(m, "DensityOperator");
        const double herm = hermitian_deviation(m);
        if (herm > tol::hermitian)
            throw InvariantError("DensityOperator not Hermitian (deviation " + std::to_string(herm) + ")");
        const double tr_err = std::abs(m.trace() - cplx(1.0, 0.0));
        if (tr_err > tol::trace)
            throw InvariantError("DensityOperator trace differs from 1 by " + std::to_string(tr_err));
        const double lmin = eigvalsh(m).minCoeff();
        if (lmin < -tol::psd)
            throw InvariantError("DensityOperator has negative eigenvalue " + std::to_string(lmin));
    }

    Operator op_;
};

class PureState {
public:
    PureState() = default;

    PureState(TensorLayout layout, Vector amplitudes)
        : layout_(std::move(layout)), amps_(std::move(amplitudes)) {
        if (static_cast<std::size_t>(amps_.size()) != layout_.total_dim())
            throw LayoutError("amplitude count does not match layout dimension");
        if (!amps_.allFinite()) throw NumericError("PureState: non-finite amplitudes");
        const double dev = std::abs(amps_.norm() - 1.0);
        if (dev >= tol::pure_norm)
            throw InvariantError("PureState norm deviates from 1 by " + std::to_string(dev));
    }

    const TensorLayout& layout() const noexcept { return layout_; }
    const Vector& amplitudes() const noexcept { return amps_; }
    std::size_t dim() const noexcept { return layout_.total_dim(); }

    DensityOperator density() const {
        Matrix m = amps_ * amps_.adjoint();
        return DensityOperator(Operator(layout_, hermitian_part(m)));
    }

private:
    TensorLayout layout_;
    Vector amps_;
};

// ---------------------------------------------------------------- constructors

inline Matrix identity_matrix(std::size_t n) {
    return Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

inline DensityOperator maximally_mixed(const TensorLayout& layout) {
    const std::size_t n = layout.total_dim();
    return DensityOperator(layout, identity_matrix(n) / static_cast<double>(n));
}

// Computational basis product state |digits[0] digits[1] ...>.
inline PureState basis_state(const TensorLayout& layout, const std::vector<std::size_t>& digits) {
    if (digits.size() != layout.size()) throw LayoutError("basis_state: digit count mismatch");
    const auto strides = layout.strides();
    std::size_t idx = 0;
    for (std::size_t k = 0; k < digits.size(); ++k) {
        if (digits[k] >= layout[k].dim) throw LayoutError("basis_state: digit out of range");
        idx += digits[k] * strides[k];
    }
    Vector v = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
    v(static_cast<Eigen::Index>(idx)) = 1.0;
    return PureState(layout, std::move(v));
}

// ------------------------------------------------------------------ operations

inline Operator tensor(const Operator& a, const Operator& b) {
    return Operator(a.layout().concat(b.layout()), kron(a.matrix(), b.matrix()));
}

inline DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
    return DensityOperator(tensor(a.op(), b.op()));
}

inline PureState tensor(const PureState& a, const PureState& b) {
    return PureState(a.layout().concat(b.layout()), kron(a.amplitudes(), b.amplitudes()));
}

// Index map for reordering factors: result[i] is the position of old index i in
// the layout whose factor order is `order`.
inline std::vector<std::size_t> permutation_map(const TensorLayout& layout,
                                                const std::vector<std::string>& order,
                                                TensorLayout* new_layout = nullptr) {
    if (order.size() != layout.size()) throw LayoutError("permute: order must name every factor once");
    std::vector<Factor> nf;
    for (const auto& l : order) nf.push_back(layout[layout.index_of(l)]);
    TensorLayout target(std::move(nf));
    const auto old_strides = layout.strides();
    const auto new_strides = target.strides();
    std::vector<std::size_t> stride_in_new(layout.size());
    for (std::size_t k = 0; k < layout.size(); ++k)
        stride_in_new[k] = new_strides[target.index_of(layout[k].label)];
    const std::size_t n = layout.total_dim();
    std::vector<std::size_t> map(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rem = i, j = 0;
        for (std::size_t k = 0; k < layout.size(); ++k) {
            j += (rem / old_strides[k]) * stride_in_new[k];
            rem %= old_strides[k];
        }
        map[i] = j;
    }
    if (new_layout) *new_layout = std::move(target);
    return map;
}

// Explicit reordering of tensor factors.
inline Operator permute(const Operator& m, const std::vector<std::string>& order) {
    TensorLayout target;
    const auto map = permutation_map(m.layout(), order, &target);
    const auto n = static_cast<Eigen::Index>(map.size());
    Matrix out(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
            out(static_cast<Eigen::Index>(map[r]), static_cast<Eigen::Index>(map[c])) = m.matrix()(r, c);
    return Operator(std::move(target), std::move(out));
}

inline DensityOperator permute(const DensityOperator& m, const std::vector<std::string>& order) {
    return DensityOperator(permute(m.op(), order));
}

inline PureState permute(const PureState& s, const std::vector<std::string>& order) {
    TensorLayout target;
    const auto map = permutation_map(s.layout(), order, &target);
    Vector out(s.amplitudes().size());
    for (std::size_t i = 0; i < map.size(); ++i)
        out(static_cast<Eigen::Index>(map[i])) = s.amplitudes()(static_cast<Eigen::Index>(i));
    return PureState(std::move(target), std::move(out));
}

inline Operator partial_trace(const Operator& m, const std::set<std::string>& drop) {
    detail::require_labels(m.layout(), drop);
    std::set<std::string> keep;
    for (const auto& l : m.layout().labels())
        if (!drop.count(l)) keep.insert(l);
    const TensorLayout out_layout = m.layout().without(drop);
    const auto drop_off = detail::subset_offsets(m.layout(), drop);
    // Index of each full index within the kept space.
    const auto keep_strides = out_layout.strides();
    const auto strides = m.layout().strides();
    const std::size_t n = m.layout().total_dim();
    std::vector<std::size_t> keep_idx(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rem = i, j = 0;
        for (std::size_t k = 0; k < m.layout().size(); ++k) {
            const std::size_t digit = rem / strides[k];
            rem %= strides[k];
            const auto& label = m.layout()[k].label;
            if (keep.count(label)) j += digit * keep_strides[out_layout.index_of(label)];
        }
        keep_idx[i] = j;
    }
    const auto nk = static_cast<Eigen::Index>(out_layout.total_dim());
    Matrix out = Matrix::Zero(nk, nk);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            if (drop_off[r] == drop_off[c])
                out(static_cast<Eigen::Index>(keep_idx[r]), static_cast<Eigen::Index>(keep_idx[c])) +=
                    m.matrix()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    return Operator(out_layout, std::move(out));
}

inline DensityOperator partial_trace(const DensityOperator& m, const std::set<std::string>& drop) {
    return DensityOperator(partial_trace(m.op(), drop));
}

// Transpose on the factors in `party`. Result is Hermitian for Hermitian input but
// need not be positive, so it is returned as a plain Operator.
inline Operator partial_transpose(const Operator& m, const std::set<std::string>& party) {
    detail::require_labels(m.layout(), party);
    const auto off = detail::subset_offsets(m.layout(), party);
    const std::size_t n = m.layout().total_dim();
    Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t r2 = r - off[r] + off[c];
            const std::size_t c2 = c - off[c] + off[r];
            out(static_cast<Eigen::Index>(r2), static_cast<Eigen::Index>(c2)) =
                m.matrix()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
    return Operator(m.layout(), std::move(out));
}

// (local (x) identity) embedded on the given labels, in the order given.
inline Matrix lift(const Matrix& local, const TensorLayout& layout, const std::vector<std::string>& on) {
    std::vector<std::string> order = on;
    std::size_t d_local = 1;
    for (const auto& l : on) d_local *= layout.dim_of(l);
    if (static_cast<std::size_t>(local.rows()) != d_local || local.rows() != local.cols())
        throw LayoutError("lift: local operator dimension mismatch");
    std::vector<Factor> rest_f;
    for (const auto& f : layout.factors())
        if (std::find(on.begin(), on.end(), f.label) == on.end()) {
            order.push_back(f.label);
            rest_f.push_back(f);
        }
    std::vector<Factor> front_f;
    for (const auto& l : order) front_f.push_back(layout[layout.index_of(l)]);
    const TensorLayout front(std::move(front_f));
    const Matrix big = kron(local, identity_matrix(TensorLayout(rest_f).total_dim()));
    return permute(Operator(front, big), layout.labels()).matrix();
}

// Trace norm. Hermitian input uses the spectrum; otherwise singular values.
inline double trace_norm(const Matrix& m) {
    detail::require_finite(m, "trace_norm");
    if (m.rows() == m.cols() && hermitian_deviation(m) <= tol::hermitian)
        return eigvalsh(m).cwiseAbs().sum();
    Eigen::MatrixXcd g = m;
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(g);
    return svd.singularValues().sum();
}

inline double trace_norm(const Operator& m) { return trace_norm(m.matrix()); }

// F = (Tr sqrt(sqrt(a) b sqrt(a)))^2 = ||sqrt(a) sqrt(b)||_1^2. The singular-value
// form keeps rank-deficient inputs accurate: round-off in the null spaces enters
// only at second order.
inline double fidelity(const DensityOperator& a, const DensityOperator& b) {
    require_same_layout(a.layout(), b.layout(), "fidelity");
    const Eigen::MatrixXcd prod = sqrt_psd(a.matrix()) * sqrt_psd(b.matrix());
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(prod);
    const double s = svd.singularValues().sum();
    return std::clamp(s * s, 0.0, 1.0);
}

// Shannon entropy in bits; 0 log 0 = 0.
inline double shannon_bits(std::span<const double> p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log2(x);
    return h;
}

inline double von_neumann_entropy(const DensityOperator& m) {
    const RealVector ev = eigvalsh(m.matrix());
    std::vector<double> p(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i) p[static_cast<std::size_t>(i)] = std::max(ev(i), 0.0);
    return std::max(shannon_bits(p), 0.0);
}

} // namespace locclab
