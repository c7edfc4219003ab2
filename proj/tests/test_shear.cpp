#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "shearfront/shear.hpp"

using namespace shearfront;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(Sample, ZeroAmplitudeIsZero) {
    for (int n : {0, 1, 3}) {
        const auto f = sample(ShearSpec::parametric(0.0, n), GridSpec(8, 12));
        EXPECT_EQ(f.values().cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Sample, FrequencyZeroIsReplicatedSine) {
    const GridSpec g(16, 8);
    const auto f = sample(ShearSpec::parametric(1.0, 0), g);
    for (std::size_t it = 0; it < 8; ++it)
        for (std::size_t iy = 0; iy < 16; ++iy)
            EXPECT_NEAR(f.at(iy, it), std::sin(2 * kPi * g.y(iy)), 1e-15);
}

TEST(Sample, HandEvaluatedNode) {
    const GridSpec g(8, 8);
    const auto f = sample(ShearSpec::parametric(2.0, 1), g);
    EXPECT_NEAR(f.at(2, 2), 4.0, 1e-14);  // (y, tau) = (1/4, 1/4)
}

TEST(Sample, TabulatedDimensionMismatch) {
    ShearTable t{8, 8, Eigen::VectorXd::Zero(64)};
    const auto spec = ShearSpec::tabulated(t);
    EXPECT_THROW(sample(spec, GridSpec(8, 16)), DimensionMismatchError);
    EXPECT_NO_THROW(sample(spec, GridSpec(8, 8)));
    EXPECT_THROW(ShearSpec::tabulated(ShearTable{8, 8, Eigen::VectorXd::Zero(10)}),
                 DimensionMismatchError);
}

TEST(MeanOverCell, ParametricFamilyIsMeanZero) {
    for (double d : {0.1, 1.0, 10.0})
        for (int n = 0; n <= 4; ++n)
            for (std::size_t N : {16u, 32u})
                EXPECT_NEAR(mean_over_cell(sample(ShearSpec::parametric(d, n), GridSpec::square(N))),
                            0.0, 1e-14 * (1 + d));
}

TEST(MeanOverCell, ConstantField) {
    const GridSpec g(8, 8);
    EXPECT_DOUBLE_EQ(mean_over_cell(tabulated_field(g, Eigen::VectorXd::Ones(64))), 1.0);
    EXPECT_EQ(mean_over_cell(sample(ShearSpec::parametric(0, 2), g)), 0.0);
}

TEST(Nondegenerate, ZeroAndYConstantAreDegenerate) {
    const GridSpec g(16, 16);
    EXPECT_TRUE(is_degenerate(sample(ShearSpec::parametric(0.0, 1), g)));
    Eigen::VectorXd tau_only(256);
    for (std::size_t it = 0; it < 16; ++it)
        for (std::size_t iy = 0; iy < 16; ++iy)
            tau_only(static_cast<Eigen::Index>(it * 16 + iy)) = std::sin(2 * kPi * g.tau(it));
    EXPECT_LT(check_nondegenerate(tabulated_field(g, tau_only)), kDegenerateThreshold);
}

TEST(Nondegenerate, QuadratureValue) {
    // int (2 pi cos 2 pi y)^2 dy = 2 pi^2,  int (1 + sin 2 pi tau)^2 dtau = 3/2
    const auto f = sample(ShearSpec::parametric(1.0, 1), GridSpec::square(32));
    EXPECT_NEAR(check_nondegenerate(f), 2 * kPi * kPi * 1.5, 1e-9);
    EXPECT_NEAR(check_nondegenerate(f), 29.608813203268074, 1e-9);
}

TEST(TimeAverage, ParametricReducesToSteadySine) {
    const GridSpec g(16, 16);
    for (int n : {1, 2, 3}) {
        const auto avg = time_average(sample(ShearSpec::parametric(0.7, n), g));
        const auto expect = sample(ShearSpec::parametric(0.7, 0), g);
        EXPECT_LT((avg.values() - expect.values()).cwiseAbs().maxCoeff(), 1e-14);
    }
    const auto steady = sample(ShearSpec::parametric(0.7, 0), g);
    EXPECT_LT((time_average(steady).values() - steady.values()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TimeAverage, Idempotent) {
    const auto f = sample(ShearSpec::parametric(1.3, 2), GridSpec(8, 16));
    const auto once = time_average(f);
    EXPECT_LT((time_average(once).values() - once.values()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CyclicShift, PreservesMeanAndDegeneracyIntegral) {
    Eigen::VectorXd v(8 * 12);
    const GridSpec g(8, 12);
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = std::cos(0.37 * k * k) - 0.1;
    const auto f = tabulated_field(g, v);
    for (std::size_t s : {1u, 5u, 11u}) {
        const auto shifted = cyclic_shift(f, 0, s);
        EXPECT_NEAR(mean_over_cell(shifted), mean_over_cell(f), 1e-14);
        EXPECT_NEAR(check_nondegenerate(shifted), check_nondegenerate(f),
                    1e-12 * check_nondegenerate(f));
    }
}

TEST(ShearCsv, ReadsBackWrittenField) {
    const auto f = sample(ShearSpec::parametric(0.9, 2), GridSpec(4, 6));
    std::stringstream ss;
    write_shear_csv(ss, f);
    const auto spec = read_shear_csv(ss);
    ASSERT_EQ(spec.kind(), ShearSpec::Kind::tabulated);
    EXPECT_EQ(spec.table().n_y, 4u);
    EXPECT_EQ(spec.table().n_tau, 6u);
    EXPECT_EQ(spec.table().values, f.values());
}

TEST(ShearCsv, MalformedInputNamesLine) {
    std::stringstream missing_header("0,0,1\n");
    EXPECT_THROW(read_shear_csv(missing_header), ParseError);
    std::stringstream bad("i_y,i_tau,value\n0,0,1\n1,0,abc\n");
    try {
        read_shear_csv(bad);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    std::stringstream incomplete;
    incomplete << "i_y,i_tau,value\n";
    for (int k = 0; k < 15; ++k) incomplete << k % 4 << ',' << k / 4 << ",0.5\n";
    EXPECT_THROW(read_shear_csv(incomplete), ParseError);
}
