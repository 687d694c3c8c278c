#include <gtest/gtest.h>

#include <cmath>

#include "locclab/qmat.hpp"
#include "locclab/qmat_io.hpp"
#include "locclab/states.hpp"

using namespace locclab;

namespace {

DensityOperator ket(const TensorLayout& l, std::vector<std::size_t> digits) {
    return basis_state(l, digits).density();
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

PureState singlet() {
    Vector v = Vector::Zero(4);
    v(1) = 1.0 / std::sqrt(2.0);
    v(2) = -1.0 / std::sqrt(2.0);
    return PureState(TensorLayout{{"A", 2}, {"B", 2}}, v);
}

// Reference partial trace by explicit index sum, for two factors dropping the second.
Matrix naive_trace_second(const Matrix& m, std::size_t da, std::size_t db) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(da), static_cast<Eigen::Index>(da));
    for (std::size_t i = 0; i < da; ++i)
        for (std::size_t j = 0; j < da; ++j)
            for (std::size_t k = 0; k < db; ++k)
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
                    m(static_cast<Eigen::Index>(i * db + k), static_cast<Eigen::Index>(j * db + k));
    return out;
}

Matrix random_hermitian(std::size_t n, Rng& rng) {
    Matrix g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = cplx(rng.normal(), rng.normal());
    return hermitian_part(g);
}

} // namespace

TEST(Layout, RejectsZeroDimAndDuplicates) {
    EXPECT_THROW((TensorLayout{{"A", 0}}), LayoutError);
    EXPECT_THROW((TensorLayout{{"A", 2}, {"A", 3}}), LayoutError);
    const TensorLayout l{{"A1", 2}, {"B1", 3}, {"A2", 4}};
    EXPECT_EQ(l.total_dim(), 24u);
    EXPECT_EQ(l.party_dim('A'), 8u);
    EXPECT_EQ(l.canonical_order(), (std::vector<std::string>{"A1", "A2", "B1"}));
    EXPECT_THROW(l.index_of("C"), LayoutError);
}

TEST(Tensor, MaximallyMixedProduct) {
    const auto a = maximally_mixed(TensorLayout{{"A", 2}});
    const auto b = maximally_mixed(TensorLayout{{"B", 2}});
    const auto ab = tensor(a, b);
    EXPECT_LT(max_abs(ab.matrix() - identity_matrix(4) / 4.0), 1e-15);
    EXPECT_EQ(ab.layout().labels(), (std::vector<std::string>{"A", "B"}));
}

TEST(Tensor, BasisStates) {
    const auto z = ket(TensorLayout{{"A", 2}}, {0});
    const auto o = ket(TensorLayout{{"B", 2}}, {1});
    const auto zo = tensor(z, o);
    EXPECT_LT(max_abs(zo.matrix() - ket(TensorLayout{{"A", 2}, {"B", 2}}, {0, 1}).matrix()), 1e-15);
}

TEST(Tensor, LabelCollisionThrows) {
    const auto a = maximally_mixed(TensorLayout{{"A", 2}});
    EXPECT_THROW(tensor(a, a), LayoutError);
}

TEST(Tensor, TraceIsMultiplicative) {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        // Unnormalized PSD operators: tensor() on Operator keeps traces free.
        const Matrix ga = random_hermitian(3, rng);
        const Matrix gb = random_hermitian(2, rng);
        const Operator a(TensorLayout{{"A", 3}}, ga * ga);
        const Operator b(TensorLayout{{"B", 2}}, gb * gb);
        const cplx lhs = tensor(a, b).trace();
        EXPECT_NEAR(std::abs(lhs - a.trace() * b.trace()), 0.0, 1e-10 * std::abs(lhs));
    }
}

TEST(PartialTrace, BellMarginalIsMaximallyMixed) {
    const auto bell = states::make_max_entangled(2, "A", "B").density();
    const auto r = partial_trace(bell, {"B"});
    EXPECT_LT(max_abs(r.matrix() - identity_matrix(2) / 2.0), 1e-15);
    EXPECT_EQ(r.layout().labels(), (std::vector<std::string>{"A"}));
}

TEST(PartialTrace, ProductRecoversFactor) {
    const auto a = states::sample_mixed(TensorLayout{{"A", 3}}, 2, 4);
    const auto b = states::sample_mixed(TensorLayout{{"B", 2}}, 2, 5);
    EXPECT_LT(max_abs(partial_trace(tensor(a, b), {"B"}).matrix() - a.matrix()), 1e-14);
    EXPECT_LT(max_abs(partial_trace(tensor(a, b), {"A"}).matrix() - b.matrix()), 1e-14);
}

TEST(PartialTrace, SequentialEqualsFullTrace) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const TensorLayout l{{"A", 2}, {"B", 3}};
        const auto r = states::sample_mixed(l, 3, s);
        const auto ra = partial_trace(r, {"B"});
        const Operator rest = partial_trace(ra.op(), {"A"});
        EXPECT_NEAR(std::abs(rest.matrix()(0, 0) - r.matrix().trace()), 0.0, 1e-12);
        EXPECT_LT(max_abs(ra.matrix() - naive_trace_second(r.matrix(), 2, 3)), 1e-14);
    }
}

TEST(PartialTrace, MiddleFactorAgainstPermutedNaive) {
    const TensorLayout l{{"A1", 2}, {"B1", 3}, {"A2", 2}};
    const auto r = states::sample_mixed(l, 4, 77);
    const auto direct = partial_trace(r, {"B1"});
    const auto moved = permute(r, {"A1", "A2", "B1"});
    EXPECT_LT(max_abs(direct.matrix() - naive_trace_second(moved.matrix(), 4, 3)), 1e-14);
}

TEST(PartialTrace, UnknownLabelThrows) {
    const auto r = maximally_mixed(TensorLayout{{"A", 2}});
    EXPECT_THROW(partial_trace(r, {"Q"}), LayoutError);
}

TEST(PartialTranspose, ProductStateSpectrumUnchanged) {
    const auto a = states::sample_mixed(TensorLayout{{"A", 2}}, 2, 8);
    const auto b = states::sample_mixed(TensorLayout{{"B", 2}}, 2, 9);
    const auto ab = tensor(a, b);
    const auto g = partial_transpose(ab.op(), {"B"});
    EXPECT_LT((eigvalsh(g.matrix()) - eigvalsh(ab.matrix())).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(max_abs(g.matrix() - kron(a.matrix(), b.matrix().transpose())), 1e-15);
}

TEST(PartialTranspose, SingletMinEigenvalue) {
    const auto g = partial_transpose(singlet().density().op(), {"B"});
    EXPECT_NEAR(eigvalsh(g.matrix()).minCoeff(), -0.5, 1e-12);
}

TEST(PartialTranspose, InvolutionAndTrace) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const TensorLayout l{{"A", 3}, {"B", 2}};
        const auto r = states::sample_mixed(l, 6, 40 + s);
        const auto g = partial_transpose(r.op(), {"B"});
        EXPECT_LT(max_abs(partial_transpose(g, {"B"}).matrix() - r.matrix()), 1e-14);
        EXPECT_NEAR(std::abs(g.trace() - 1.0), 0.0, 1e-12);
        EXPECT_LT(hermitian_deviation(g.matrix()), 1e-14);
    }
}

TEST(PartialTranspose, UnknownLabelThrows) {
    EXPECT_THROW(partial_transpose(maximally_mixed(TensorLayout{{"A", 2}}).op(), {"B"}), LayoutError);
}

TEST(TraceNorm, Examples) {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = -4.0;
    EXPECT_NEAR(trace_norm(d), 7.0, 1e-14);
    const auto r = states::sample_mixed(TensorLayout{{"A", 3}}, 2, 1);
    EXPECT_NEAR(trace_norm(r - r), 0.0, 1e-14);
    const TensorLayout l{{"A", 2}};
    EXPECT_NEAR(trace_norm(ket(l, {0}) - maximally_mixed(l)), 1.0, 1e-14);
}

TEST(TraceNorm, NonFiniteThrows) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = std::nan("");
    EXPECT_THROW(trace_norm(m), NumericError);
}

TEST(TraceNorm, NonHermitianUsesSingularValues) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 2.0;
    EXPECT_NEAR(trace_norm(m), 2.0, 1e-14);
}

TEST(TraceNorm, TriangleAndUnitaryInvariance) {
    Rng rng(12);
    for (int t = 0; t < 100; ++t) {
        const Matrix a = random_hermitian(8, rng);
        const Matrix b = random_hermitian(8, rng);
        EXPECT_LE(trace_norm(Matrix(a + b)), trace_norm(a) + trace_norm(b) + 1e-10);
        EXPECT_GE(trace_norm(a) + 1e-12, std::abs(a.trace()));
        const Matrix u = states::haar_unitary(8, rng);
        EXPECT_NEAR(trace_norm(Matrix(hermitian_part(u * a * u.adjoint()))), trace_norm(a), 1e-10);
    }
}

TEST(Eigen, ReconstructionAccuracy) {
    Rng rng(3);
    for (std::size_t n : {4u, 16u, 64u, 256u}) {
        const Matrix h = random_hermitian(n, rng);
        const Eigh e = eigh(h);
        const Matrix back = e.vectors * e.values.cast<cplx>().asDiagonal() * e.vectors.adjoint();
        EXPECT_LT((back - h).norm() / h.norm(), 1e-10) << n;
    }
}

TEST(Fidelity, Examples) {
    const auto r = states::sample_mixed(TensorLayout{{"A", 3}}, 3, 2);
    EXPECT_NEAR(fidelity(r, r), 1.0, 1e-10);
    const TensorLayout l{{"A", 2}};
    EXPECT_NEAR(fidelity(ket(l, {0}), ket(l, {1})), 0.0, 1e-14);
    EXPECT_THROW(fidelity(r, maximally_mixed(l)), LayoutError);
}

TEST(Fidelity, PureStatesAndTraceDistanceInequality) {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const TensorLayout l{{"A", 3}};
        const PureState p(l, states::haar_vector(3, rng));
        const PureState q(l, states::haar_vector(3, rng));
        const double f = fidelity(p.density(), q.density());
        EXPECT_NEAR(f, std::norm(p.amplitudes().dot(q.amplitudes())), 1e-9);
        EXPECT_NEAR(fidelity(q.density(), p.density()), f, 1e-9);
        const auto a = states::sample_mixed(l, 2, rng.next_u64());
        const auto b = states::sample_mixed(l, 3, rng.next_u64());
        EXPECT_LE(trace_norm(a - b), 2.0 * std::sqrt(1.0 - fidelity(a, b)) + 1e-9);
    }
}

TEST(Entropy, Examples) {
    EXPECT_NEAR(von_neumann_entropy(ket(TensorLayout{{"A", 4}}, {2})), 0.0, 1e-12);
    for (std::size_t d : {2u, 3u, 5u, 8u})
        EXPECT_NEAR(von_neumann_entropy(maximally_mixed(TensorLayout{{"A", d}})), std::log2(double(d)), 1e-12);
    const auto psi = states::make_psi({0.9, 5}).density();
    const double s = von_neumann_entropy(partial_trace(psi, {"B2"}));
    const double closed = -0.9 * std::log2(0.9) - 0.1 * std::log2(0.1 / 4.0);
    EXPECT_NEAR(s, closed, 1e-10);
    EXPECT_NEAR(s, 0.669, 1e-3);
}

TEST(Entropy, BoundedByLogDimension) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        const std::size_t n = 2 + s % 6;
        const auto r = states::sample_mixed(TensorLayout{{"A", n}}, 1 + s % n, s);
        const double h = von_neumann_entropy(r);
        EXPECT_GE(h, 0.0);
        EXPECT_LE(h, std::log2(double(n)) + 1e-12);
    }
}

TEST(Invariants, RandomStatesStayValidUnderOps) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        const TensorLayout l{{"A1", 2}, {"B1", 2}, {"A2", 2}};
        const auto r = states::sample_mixed(l, 1 + s % 8, 500 + s);
        EXPECT_NO_THROW(partial_trace(r, {"A2"}));
        EXPECT_NO_THROW(permute(r, {"A2", "A1", "B1"}));
        EXPECT_NO_THROW(tensor(r, maximally_mixed(TensorLayout{{"B2", 2}})));
    }
}

TEST(DensityOperator, RejectsInvalid) {
    const TensorLayout l{{"A", 2}};
    Matrix m = Matrix::Identity(2, 2);
    EXPECT_THROW(DensityOperator(l, m), InvariantError); // trace 2
    m(0, 0) = 1.5;
    m(1, 1) = -0.5;
    EXPECT_THROW(DensityOperator(l, m), InvariantError); // negative
    Matrix h = Matrix::Identity(2, 2) / 2.0;
    h(0, 1) = 0.1;
    EXPECT_THROW(DensityOperator(l, h), InvariantError); // not Hermitian
    EXPECT_THROW(DensityOperator(TensorLayout{{"A", 3}}, Matrix(Matrix::Identity(2, 2) / 2.0)), LayoutError);
}

TEST(PureState, RejectsUnnormalized) {
    Vector v = Vector::Zero(2);
    v(0) = 1.0 + 1e-9;
    EXPECT_THROW(PureState(TensorLayout{{"A", 2}}, v), InvariantError);
}

TEST(Permute, RoundTripAndLift) {
    const TensorLayout l{{"A1", 2}, {"B1", 3}, {"A2", 2}};
    const auto r = states::sample_mixed(l, 4, 3);
    const auto p = permute(r, {"B1", "A2", "A1"});
    EXPECT_LT(max_abs(permute(p, l.labels()).matrix() - r.matrix()), 1e-15);
    Rng rng(1);
    const Matrix u = states::haar_unitary(2, rng);
    const Matrix lifted = lift(u, l, {"A2"});
    EXPECT_LT(max_abs(lifted - kron(identity_matrix(6), u)), 1e-15);
}

TEST(JsonIo, BitExactRoundTrip) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const TensorLayout l{{"A", 2}, {"B'", 3}};
        const auto r = states::sample_mixed(l, 3, s);
        const std::string text = to_json_text(r);
        const auto back = density_from_json_text(text);
        EXPECT_EQ(back.layout(), r.layout());
        EXPECT_TRUE((back.matrix().array() == r.matrix().array()).all());
        EXPECT_EQ(to_json_text(back), text);
    }
}

TEST(JsonIo, ParseErrorCarriesOffset) {
    try {
        density_from_json_text("{\"layout\": [ {\"label\": \"A\", \"dim\": 1} ], \"entries\": [[1, 0]],,}");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_GT(e.byte_offset(), 0u);
    }
}

TEST(JsonIo, RejectsWrongEntryCount) {
    EXPECT_THROW(operator_from_json_text(R"({"layout":[{"label":"A","dim":2}],"entries":[[1,0]]})"), ParseError);
}
