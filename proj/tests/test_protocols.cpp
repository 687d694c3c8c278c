#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "locclab/distinguish.hpp"
#include "locclab/protocols.hpp"

using namespace locclab;
using namespace locclab::protocols;

namespace {

DensityOperator relabel(const DensityOperator& r, const std::string& from, const std::string& to) {
    return DensityOperator(r.op().relabelled(from, to));
}

states::SchmidtSpectrum bell_pair_labels() { return states::SchmidtSpectrum({{0.5, 1}, {0.5, 1}}); }

} // namespace

TEST(Teleport, PlusStateArrivesIntact) {
    const TensorLayout l{{"A", 2}};
    Vector plus(2);
    plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    const auto in = PureState(l, plus).density();
    const auto out = teleport(in, "A", states::make_max_entangled(2));
    EXPECT_EQ(out.state.layout().labels(), (std::vector<std::string>{"B'"}));
    EXPECT_EQ(out.relocated_label, "B'");
    EXPECT_TRUE(out.resource_consumed);
    EXPECT_NEAR(fidelity(out.state, relabel(in, "A", "B'")), 1.0, 1e-12);
}

class TeleportDims : public ::testing::TestWithParam<std::size_t> {};

TEST_P(TeleportDims, RandomInputsReproducedWithRest) {
    const std::size_t L = GetParam();
    for (std::uint64_t s = 0; s < 20; ++s) {
        const TensorLayout l{{"A1", L}, {"B1", 2}};
        const auto in = states::sample_mixed(l, 1 + s % 4, 900 + s);
        const auto out = teleport(in, "A1", states::make_max_entangled(L));
        const auto expected = relabel(in, "A1", "B'");
        EXPECT_EQ(out.state.layout(), expected.layout());
        EXPECT_GE(fidelity(out.state, expected), 1.0 - 1e-10);
        EXPECT_LT((out.state.matrix() - expected.matrix()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(out.state.matrix().trace().real(), 1.0, 1e-12);
    }
}

INSTANTIATE_TEST_SUITE_P(Dims, TeleportDims, ::testing::Values(2u, 3u));

TEST(Teleport, WernerHalvesBothOnBobAreStillOrthogonal) {
    const auto [s0, s1] = states::make_hiding_pair({2, states::HidingFamily::werner_projectors});
    const auto t0 = teleport(s0, "A1", states::make_max_entangled(2)).state;
    const auto t1 = teleport(s1, "A1", states::make_max_entangled(2)).state;
    EXPECT_EQ(t1.layout().labels(), (std::vector<std::string>{"B'", "B1"}));
    EXPECT_EQ(t1.layout().party_dim('A'), 1u);
    EXPECT_NEAR(distinguish::helstrom(t0, t1), 1.0, 1e-10);
}

TEST(Teleport, DimensionMismatchThrows) {
    const auto in = maximally_mixed(TensorLayout{{"A", 2}});
    EXPECT_THROW(teleport(in, "A", states::make_max_entangled(3)), LayoutError);
}

TEST(Teleport, NonMaximalResourceThrows) {
    const auto in = maximally_mixed(TensorLayout{{"A", 2}});
    const auto weak = states::make_psi({0.9, 2}, "A'", "B'");
    EXPECT_THROW(teleport(in, "A", weak), ResourceError);
}

TEST(Teleport, MiddleFactorKeepsPosition) {
    const TensorLayout l{{"B0", 2}, {"A1", 3}, {"B1", 2}};
    const auto in = states::sample_mixed(l, 3, 4);
    const auto out = teleport(in, "A1", states::make_max_entangled(3, "Ax", "Bx")).state;
    EXPECT_EQ(out.layout().labels(), (std::vector<std::string>{"B0", "Bx", "B1"}));
    EXPECT_LT((out.matrix() - in.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Concentration, SingleCopyHasNoEntanglementGain) {
    const auto d = concentration_distribution(bell_pair_labels(), 1);
    for (const auto& o : d.outcomes) EXPECT_NEAR(o.log2_dim, 0.0, 1e-15);
    const auto psi = states::psi_spectrum({0.3, 3});
    for (const auto& o : concentration_distribution(psi, 1).outcomes) {
        // The tail level groups two labels, so one copy in it is already a Bell pair.
        if (o.counts[0] == 1) {
            EXPECT_NEAR(o.log2_dim, 0.0, 1e-15);
        }
    }
}

TEST(Concentration, TwoCopiesOfBellByLabel) {
    const auto d = concentration_distribution(bell_pair_labels(), 2);
    ASSERT_EQ(d.outcomes.size(), 3u);
    std::map<std::vector<std::size_t>, ConcentrationOutcome> by;
    for (const auto& o : d.outcomes) by[o.counts] = o;
    const std::vector<std::size_t> k11{1, 1}, k20{2, 0}, k02{0, 2};
    EXPECT_NEAR(by[k11].probability, 0.5, 1e-15);
    EXPECT_NEAR(by[k11].log2_dim, 1.0, 1e-12);
    EXPECT_NEAR(by[k20].probability, 0.25, 1e-15);
    EXPECT_NEAR(by[k02].probability, 0.25, 1e-15);
    EXPECT_NEAR(by[k20].log2_dim, 0.0, 1e-15);
    const auto ps = states::psi_spectrum({0.5, 2});
    EXPECT_NEAR(concentration_success_prob(ps, 2, 1.0).p, 0.5, 1e-15);
}

TEST(Concentration, ExactProbabilitiesSumToOne) {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const states::PsiSpec p{0.05 + 0.9 * rng.uniform(), 2 + rng.below(7)};
        const auto s = states::psi_spectrum(p);
        const std::size_t n = 1 + rng.below(200);
        double total = 0.0;
        for (const auto& o : concentration_distribution(s, n).outcomes) {
            total += o.probability;
            EXPECT_GE(o.log2_dim, 0.0);
            EXPECT_GE(o.probability, 0.0);
            EXPECT_LE(o.probability, 1.0);
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
    }
}

TEST(Concentration, ProbabilityMatchesStringEnumeration) {
    // Enumerate all 3^4 label strings directly.
    const states::SchmidtSpectrum s({{0.5, 1}, {0.3, 1}, {0.2, 1}});
    std::map<std::vector<std::size_t>, double> oracle;
    const double p[3] = {0.5, 0.3, 0.2};
    for (int w = 0; w < 81; ++w) {
        std::vector<std::size_t> k(3, 0);
        double pr = 1.0;
        for (int c = 0, rem = w; c < 4; ++c, rem /= 3) {
            ++k[rem % 3];
            pr *= p[rem % 3];
        }
        oracle[k] += pr;
    }
    for (const auto& o : concentration_distribution(s, 4).outcomes) EXPECT_NEAR(o.probability, oracle[o.counts], 1e-14);
}

TEST(Concentration, MeanLogDimBelowEntropy) {
    Rng rng(8);
    for (int t = 0; t < 30; ++t) {
        std::vector<states::SchmidtLevel> lv;
        const std::size_t m = 2 + rng.below(3);
        std::vector<double> w(m);
        double tot = 0.0;
        for (auto& x : w) tot += (x = rng.exponential());
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t mult = 1 + rng.below(3);
            lv.push_back({w[i] / tot / double(mult), mult});
        }
        const states::SchmidtSpectrum s(lv);
        const std::size_t n = 1 + rng.below(60);
        EXPECT_LE(concentration_distribution(s, n).mean_log2_dim(), double(n) * s.entropy_bits() + 1e-9);
    }
}

TEST(Concentration, LargeEnumerationRequiresSampling) {
    std::vector<states::SchmidtLevel> lv(8, {1.0 / 8.0, 1});
    const states::SchmidtSpectrum s(lv);
    EXPECT_THROW(concentration_distribution(s, 200), ModeError);
    EXPECT_NO_THROW(concentration_distribution(s, 200, SamplingPlan{100, 1}));
}

TEST(Concentration, SampledWeightsAreDeterministic) {
    const auto s = states::psi_spectrum({0.5, 8});
    const auto a = concentration_distribution(s, 64, SamplingPlan{2000, 5});
    const auto b = concentration_distribution(s, 64, SamplingPlan{2000, 5});
    ASSERT_EQ(a.outcomes.size(), b.outcomes.size());
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        EXPECT_EQ(a.outcomes[i].counts, b.outcomes[i].counts);
        EXPECT_EQ(a.outcomes[i].probability, b.outcomes[i].probability);
    }
    EXPECT_FALSE(a.exact);
}

TEST(Concentration, SampledMeanAgreesWithExactMean) {
    const auto s = states::psi_spectrum({0.5, 8});
    const double exact = concentration_distribution(s, 64).mean_log2_dim() / 64.0;
    const double sampled = concentration_distribution(s, 64, SamplingPlan{100000, 11}).mean_log2_dim() / 64.0;
    EXPECT_NEAR(sampled, exact, 0.005);
}

TEST(SuccessProb, Limits) {
    const auto s = states::psi_spectrum({0.4, 4});
    EXPECT_NEAR(concentration_success_prob(s, 10, 0.0).p, 1.0, 1e-12);
    EXPECT_EQ(concentration_success_prob(s, 10, 10.0 * 2.0 + 1.0).p, 0.0);
    const auto w = concentration_success_prob(s, 10, 0.0, SamplingPlan{1000, 2});
    EXPECT_FALSE(w.exact);
    EXPECT_EQ(w.p, 1.0);
    EXPECT_LE(w.lower, 1.0);
}

TEST(SuccessProb, WilsonIntervalCoversExact) {
    const auto s = states::psi_spectrum({0.5, 8});
    const double target = 64.0 * 2.2;
    const double exact = concentration_success_prob(s, 64, target).p;
    const auto est = concentration_success_prob(s, 64, target, SamplingPlan{20000, 3});
    EXPECT_LE(est.lower, exact);
    EXPECT_GE(est.upper, exact);
}

TEST(SampleType, PsiTailRejectsLambdaOne) {
    EXPECT_THROW(states::psi_spectrum({1.0, 4}), SpecError);
}

TEST(SampleType, DeterministicAndValid) {
    const auto s = states::psi_spectrum({0.5, 8});
    const auto a = sample_type(s, 64, 77);
    EXPECT_EQ(a, sample_type(s, 64, 77));
    EXPECT_EQ(a.size(), 8u);
    std::size_t tot = 0;
    for (auto x : a) tot += x;
    EXPECT_EQ(tot, 64u);
}

TEST(SampleType, ChiSquareAgainstExactMultinomial) {
    // n = 4, two labels with lambda = 0.3: five types, four degrees of freedom.
    const auto s = states::psi_spectrum({0.3, 2});
    const std::size_t samples = 100000;
    Rng rng(2024);
    std::map<std::vector<std::size_t>, double> observed;
    for (std::size_t t = 0; t < samples; ++t) observed[sample_type(s, 4, rng)] += 1.0;
    double chi2 = 0.0;
    for (const auto& o : concentration_distribution(s, 4).outcomes) {
        const double expected = o.probability * double(samples);
        const double obs = observed[o.counts];
        chi2 += (obs - expected) * (obs - expected) / expected;
    }
    // Upper 0.001 quantile of chi-square with 4 degrees of freedom.
    EXPECT_LT(chi2, 18.4668);
}

TEST(SampleType, TailLabelsAreUniform) {
    const auto s = states::psi_spectrum({0.2, 5});
    Rng rng(1);
    std::vector<double> tail(4, 0.0);
    double k0 = 0.0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        const auto c = sample_type(s, 10, rng);
        k0 += double(c[0]);
        for (int i = 0; i < 4; ++i) tail[i] += double(c[i + 1]);
    }
    EXPECT_NEAR(k0 / trials, 2.0, 0.05);
    for (double x : tail) EXPECT_NEAR(x / trials, 2.0, 0.06);
}

TEST(Explicit, PostMeasurementStateIsMaximallyEntangled) {
    const auto s = states::psi_spectrum({0.7, 2});
    for (std::size_t n = 1; n <= 3; ++n) {
        for (const auto& o : concentration_distribution(s, n).outcomes) {
            const auto e = explicit_concentration(s, n, o.counts);
            EXPECT_NEAR(e.probability, o.probability, 1e-12);
            EXPECT_NEAR(std::log2(double(e.support)), o.log2_dim, 1e-12);
            std::set<std::string> bs;
            for (std::size_t c = 0; c < n; ++c) bs.insert("B" + std::to_string(c + 1));
            const auto marg = partial_trace(e.state.density(), bs);
            const auto ev = eigvalsh(marg.matrix());
            const double L = double(e.support);
            int nonzero = 0;
            for (Eigen::Index i = 0; i < ev.size(); ++i)
                if (ev(i) > 1e-12) {
                    ++nonzero;
                    EXPECT_NEAR(ev(i), 1.0 / L, 1e-12);
                }
            EXPECT_EQ(nonzero, static_cast<int>(e.support));
            EXPECT_NEAR(von_neumann_entropy(marg), o.log2_dim, 1e-10);
        }
    }
    EXPECT_THROW(explicit_concentration(s, 4, {2, 2}), ModeError);
}

TEST(Explicit, GroupedTailLevelGivesLargerDimension) {
    const auto s = states::psi_spectrum({0.4, 3}); // levels (0.4, x1), (0.3, x2)
    const auto e = explicit_concentration(s, 2, {0, 2});
    EXPECT_EQ(e.support, 4u);
    EXPECT_NEAR(type_log2_dim(s, {0, 2}), 2.0, 1e-12);
}

TEST(UsableCopies, FloorOfRatio) {
    EXPECT_EQ(usable_copies(3.0, 2), 3u);
    EXPECT_EQ(usable_copies(2.999, 2), 2u);
    EXPECT_EQ(usable_copies(std::log2(9.0), 3), 2u);
    EXPECT_THROW(usable_copies(1.0, 1), SpecError);
}
