// oracles.hpp - reference values computed without the library's solvers

#pragma once

#include <algorithm>

#include "locclab/qmat.hpp"
#include "locclab/states.hpp"

namespace oracles {

using namespace locclab;

inline Matrix swap_operator(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d * d);
    Matrix s = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            s(static_cast<Eigen::Index>(j * d + i), static_cast<Eigen::Index>(i * d + j)) = 1.0;
    return s;
}

// Grid search over M = a P_sym + b P_asym with 0 <= M, M^T_B <= I checked by
// eigendecomposition. Independent of the interior-point solver.
inline double werner_commutant_oracle(std::size_t d) {
    const Matrix f = swap_operator(d);
    const Matrix id = identity_matrix(d * d);
    const Matrix ps = (id + f) / 2.0;
    const Matrix pa = (id - f) / 2.0;
    const TensorLayout layout{{"A1", d}, {"B1", d}};
    const auto [s0, s1] = states::make_hiding_pair({d, states::HidingFamily::werner_projectors});
    const Matrix diff = s0.matrix() - s1.matrix();
    double best = 0.0;
    const int steps = 60;
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j) {
            const double a = static_cast<double>(i) / steps;
            const double b = static_cast<double>(j) / steps;
            const Matrix m = a * ps + b * pa;
            const Matrix mg = partial_transpose(Operator(layout, m), {"B1"}).matrix();
            const auto ev = eigvalsh(mg);
            if (ev.minCoeff() < -1e-12 || ev.maxCoeff() > 1.0 + 1e-12) continue;
            best = std::max(best, (m * diff).trace().real());
        }
    return 0.5 + 0.5 * best;
}

} // namespace oracles
