// ppt_sdp.hpp - primal-dual interior point for the two-outcome PPT relaxation
//
//   maximize   Tr[M D]
//   subject to 0 <= M <= I,  0 <= M^G <= I        (G = partial transpose)
//
// Written in the inequality form  S(y) = sum_i y_i A_i - C >= 0  over a real
// orthonormal basis {E_i} of Hermitian matrices, with
//   A_i = diag(E_i, -E_i, E_i^G, -E_i^G),   C = diag(0, -I, 0, -I).
// The paired primal variable X = diag(Z1, Y1, Z2, Y2) >= 0 must satisfy
//   Y1 + Y2^G - Z1 - Z2^G = D,
// and Tr[Y1] + Tr[Y2] bounds the optimum from above. Iterates use the HKM
// direction with a Mehrotra predictor-corrector; S(y) stays exactly dual
// feasible (start at M = I/2), so only the primal residual is driven to zero.
//
// Every iterate yields a certified bracket: M(y) is strictly feasible, and the
// primal X is repaired into an exactly feasible dual certificate by absorbing
// the residual's positive part into Y1 and its negative part into Z1.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "qmat.hpp"

namespace locclab::distinguish {

struct PptSdpOptions {
    int max_iterations = 150;
    // Stop once the certified gap on Tr[M D] falls below this.
    double target_gap = 1e-9;
    // Largest certified gap accepted without raising SolverError (Tr[M D] units,
    // i.e. twice the gap in success probability).
    double accept_gap = 2.0 * tol::sdp_gap;
};

struct PptSdpResult {
    double lower = 0.0; // Tr[M D] at the returned feasible M
    double upper = 0.0; // certified upper bound on max Tr[M D]
    Matrix M;
    int iterations = 0;
    std::size_t variables = 0;
};

namespace detail {

struct BasisEntry {
    int r = 0, c = 0;
    cplx v;
};

struct BasisElement {
    int nnz = 0;
    BasisEntry e[2];
};

// Orthonormal basis of Hermitian n x n matrices under Re Tr[A^dagger B]. With
// real_only the imaginary antisymmetric directions are left out.
inline std::vector<BasisElement> hermitian_basis(int n, bool real_only) {
    std::vector<BasisElement> out;
    const double s = 1.0 / std::sqrt(2.0);
    for (int k = 0; k < n; ++k) out.push_back({1, {{k, k, 1.0}, {}}});
    for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) out.push_back({2, {{k, l, s}, {l, k, s}}});
    if (!real_only)
        for (int k = 0; k < n; ++k)
            for (int l = k + 1; l < n; ++l)
                out.push_back({2, {{k, l, cplx(0, s)}, {l, k, cplx(0, -s)}}});
    return out;
}

class PtMap {
public:
    PtMap(const TensorLayout& layout, const std::set<std::string>& labels)
        : off_(locclab::detail::subset_offsets(layout, labels)) {}

    std::pair<int, int> operator()(int r, int c) const {
        const auto ro = static_cast<int>(off_[static_cast<std::size_t>(r)]);
        const auto co = static_cast<int>(off_[static_cast<std::size_t>(c)]);
        return {r - ro + co, c - co + ro};
    }

    Matrix apply(const Matrix& m) const {
        Matrix out(m.rows(), m.cols());
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) {
                const auto [r2, c2] = (*this)(r, c);
                out(r2, c2) = m(r, c);
            }
        return out;
    }

    BasisElement apply(const BasisElement& b) const {
        BasisElement out = b;
        for (int k = 0; k < b.nnz; ++k) {
            const auto [r2, c2] = (*this)(b.e[k].r, b.e[k].c);
            out.e[k].r = r2;
            out.e[k].c = c2;
        }
        return out;
    }

private:
    std::vector<std::size_t> off_;
};

// y_i = Re Tr[E_i H]
inline RealVector coords(const std::vector<BasisElement>& basis, const Matrix& h) {
    RealVector y(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i) {
        cplx acc = 0.0;
        for (int k = 0; k < basis[i].nnz; ++k) acc += basis[i].e[k].v * h(basis[i].e[k].c, basis[i].e[k].r);
        y(static_cast<Eigen::Index>(i)) = acc.real();
    }
    return y;
}

inline Matrix from_coords(const std::vector<BasisElement>& basis, const RealVector& y, int n) {
    Matrix m = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < basis.size(); ++i)
        for (int k = 0; k < basis[i].nnz; ++k)
            m(basis[i].e[k].r, basis[i].e[k].c) += y(static_cast<Eigen::Index>(i)) * basis[i].e[k].v;
    return m;
}

using Blocks = std::array<Matrix, 4>;

inline bool inverse_pd(const Matrix& m, Matrix& inv) {
    Eigen::LLT<Eigen::MatrixXcd> llt(Eigen::MatrixXcd(hermitian_part(m)));
    if (llt.info() != Eigen::Success) return false;
    Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(m.rows(), m.cols());
    inv = hermitian_part(llt.solve(id));
    return true;
}

// Largest alpha with X + alpha * D >= 0 (infinity when unbounded).
inline double max_step(const Matrix& x, const Matrix& d) {
    Eigen::LLT<Eigen::MatrixXcd> llt(Eigen::MatrixXcd(hermitian_part(x)));
    if (llt.info() != Eigen::Success) return 0.0;
    Eigen::MatrixXcd dd = hermitian_part(d);
    const auto l = llt.matrixL();
    Eigen::MatrixXcd w = l.solve(dd);
    w = l.solve(w.adjoint().eval());
    const double lmin = eigvalsh(Matrix(w)).minCoeff();
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

inline double tr_re(const Matrix& a, const Matrix& b) {
    // Re Tr[a b] without forming the product.
    return (a.transpose().cwiseProduct(b)).sum().real();
}

} // namespace detail

// Solves the PPT relaxation for difference operator D, transposing the factors
// listed in `transpose_labels`.
inline PptSdpResult solve_ppt_sdp(const Operator& D, const std::set<std::string>& transpose_labels,
                                  const PptSdpOptions& opt = {}) {
    using namespace detail;
    const Matrix& delta = D.matrix();
    locclab::detail::require_finite(delta, "solve_ppt_sdp");
    if (hermitian_deviation(delta) > tol::hermitian) throw NumericError("PPT relaxation needs a Hermitian operator");
    const int n = static_cast<int>(D.dim());
    const PtMap pt(D.layout(), transpose_labels);
    const bool real_only = delta.imag().cwiseAbs().maxCoeff() <= 1e-15;
    const auto basis = hermitian_basis(n, real_only);
    std::vector<BasisElement> basis_pt;
    basis_pt.reserve(basis.size());
    for (const auto& e : basis) basis_pt.push_back(pt.apply(e));
    const auto m = static_cast<Eigen::Index>(basis.size());
    const Matrix id = identity_matrix(static_cast<std::size_t>(n));
    const double N = 4.0 * n;

    const RealVector b = -coords(basis, delta);
    RealVector y = coords(basis, 0.5 * id);
    Blocks X = {id, id, id, id};

    auto slack = [&](const Matrix& M) -> Blocks {
        const Matrix mg = pt.apply(M);
        return {M, id - M, mg, id - mg};
    };
    auto A_of = [&](const Blocks& Y) -> RealVector {
        return coords(basis, Y[0] - Y[1] + pt.apply(Matrix(Y[2] - Y[3])));
    };
    auto A_star = [&](const RealVector& dy) -> Blocks {
        const Matrix dm = from_coords(basis, dy, n);
        const Matrix dmg = pt.apply(dm);
        return {dm, -dm, dmg, -dmg};
    };

    PptSdpResult best;
    best.lower = -std::numeric_limits<double>::infinity();
    best.upper = std::numeric_limits<double>::infinity();
    best.variables = static_cast<std::size_t>(m);

    Eigen::MatrixXd schur(m, m);
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        const Matrix M = from_coords(basis, y, n);
        const Blocks S = slack(M);
        Blocks Sinv;
        bool ok = true;
        for (int k = 0; k < 4; ++k) ok = ok && inverse_pd(S[k], Sinv[k]);
        if (!ok) break;

        // Certified bracket at this iterate.
        const double lower = tr_re(M, delta);
        const Matrix resid = delta - (X[1] + pt.apply(X[3]) - X[0] - pt.apply(X[2]));
        const RealVector rev = eigvalsh(resid);
        double pos = 0.0;
        for (Eigen::Index k = 0; k < rev.size(); ++k) pos += std::max(rev(k), 0.0);
        const double upper = X[1].trace().real() + X[3].trace().real() + pos;
        if (lower > best.lower) {
            best.lower = lower;
            best.M = M;
        }
        best.upper = std::min(best.upper, upper);
        if (best.upper - best.lower <= opt.target_gap) break;

        double mu = 0.0;
        for (int k = 0; k < 4; ++k) mu += tr_re(X[k], S[k]);
        mu /= N;
        const RealVector rp = b - A_of(X);

        // Schur complement B_ij = sum_k Re Tr[A_i^k X_k A_j^k S_k^{-1}].
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& ei = basis[static_cast<std::size_t>(i)];
            const auto& gi = basis_pt[static_cast<std::size_t>(i)];
            for (Eigen::Index j = i; j < m; ++j) {
                const auto& ej = basis[static_cast<std::size_t>(j)];
                const auto& gj = basis_pt[static_cast<std::size_t>(j)];
                cplx acc = 0.0;
                for (int p = 0; p < ei.nnz; ++p)
                    for (int q = 0; q < ej.nnz; ++q) {
                        const auto& u = ei.e[p];
                        const auto& v = ej.e[q];
                        acc += u.v * v.v * (X[0](u.c, v.r) * Sinv[0](v.c, u.r) + X[1](u.c, v.r) * Sinv[1](v.c, u.r));
                    }
                for (int p = 0; p < gi.nnz; ++p)
                    for (int q = 0; q < gj.nnz; ++q) {
                        const auto& u = gi.e[p];
                        const auto& v = gj.e[q];
                        acc += u.v * v.v * (X[2](u.c, v.r) * Sinv[2](v.c, u.r) + X[3](u.c, v.r) * Sinv[3](v.c, u.r));
                    }
                schur(i, j) = schur(j, i) = acc.real();
            }
        }
        Eigen::LLT<Eigen::MatrixXd> chol(schur);
        if (chol.info() != Eigen::Success) {
            const double ridge = 1e-14 * std::max(1.0, schur.diagonal().maxCoeff());
            schur.diagonal().array() += ridge;
            chol.compute(schur);
            if (chol.info() != Eigen::Success) break;
        }

        auto direction = [&](const Blocks& R, Blocks& dX, Blocks& dS, RealVector& dy) {
            dy = chol.solve(RealVector(A_of(R) - rp));
            dS = A_star(dy);
            for (int k = 0; k < 4; ++k) dX[k] = hermitian_part(R[k] - X[k] * dS[k] * Sinv[k]);
        };
        auto steps = [&](const Blocks& dX, const Blocks& dS, double& ap, double& ad) {
            ap = ad = std::numeric_limits<double>::infinity();
            for (int k = 0; k < 4; ++k) {
                ap = std::min(ap, max_step(X[k], dX[k]));
                ad = std::min(ad, max_step(S[k], dS[k]));
            }
        };

        // Predictor (affine scaling).
        Blocks R, dXa, dSa;
        RealVector dya;
        for (int k = 0; k < 4; ++k) R[k] = -X[k];
        direction(R, dXa, dSa, dya);
        double ap, ad;
        steps(dXa, dSa, ap, ad);
        ap = std::min(1.0, ap);
        ad = std::min(1.0, ad);
        double mu_aff = 0.0;
        for (int k = 0; k < 4; ++k) mu_aff += tr_re(Matrix(X[k] + ap * dXa[k]), Matrix(S[k] + ad * dSa[k]));
        mu_aff /= N;
        const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

        // Corrector.
        Blocks dX, dS;
        RealVector dy;
        for (int k = 0; k < 4; ++k) R[k] = sigma * mu * Sinv[k] - X[k] - dXa[k] * dSa[k] * Sinv[k];
        direction(R, dX, dS, dy);
        steps(dX, dS, ap, ad);
        const double gamma = 0.95;
        ap = std::min(1.0, gamma * ap);
        ad = std::min(1.0, gamma * ad);
        if (ap < 1e-12 && ad < 1e-12) break;
        for (int k = 0; k < 4; ++k) X[k] = hermitian_part(X[k] + ap * dX[k]);
        y += ad * dy;
    }
    best.iterations = it;
    if (!(best.upper - best.lower <= opt.accept_gap))
        throw SolverError("PPT relaxation did not reach the required duality gap after " +
                              std::to_string(it) + " iterations",
                          0.5 + 0.5 * best.lower, 0.5 + 0.5 * best.upper);
    return best;
}

} // namespace locclab::distinguish
