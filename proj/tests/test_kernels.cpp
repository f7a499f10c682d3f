#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"

using namespace uotv;
using uotv::testing::naive_lse;

namespace {

std::vector<double> potential(const GridSupport& s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 3.0);
    std::vector<double> h(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) h[k] = s.weights[k] > 0.0 ? s.log_weights[k] + n(rng) : neg_inf;
    return h;
}

}  // namespace

TEST(Kernels, LogSumExpSkipsMinusInfinity) {
    const std::vector<double> v{neg_inf, 0.0, std::log(3.0)};
    EXPECT_NEAR(log_sum_exp(v), std::log(4.0), 1e-15);
    EXPECT_EQ(log_sum_exp(std::vector<double>{neg_inf}), neg_inf);
    EXPECT_EQ(log_add_exp(neg_inf, 2.0), 2.0);
    EXPECT_NEAR(log_add_exp(1000.0, 1000.0), 1000.0 + std::log(2.0), 1e-12);
}

TEST(Kernels, SeparableMatchesBruteForce) {
    const auto a = uotv::testing::random_field(13, 9, 1, 0.6);
    const auto b = uotv::testing::random_field(13, 9, 2, 0.6);
    const ScalingContext sc{13.0, 10.0};
    const auto sa = make_grid_support(a, sc), sb = make_grid_support(b, sc);
    for (double eps : {0.5, 0.01, 0.0005}) {
        const SeparableOperator op(sa, sb, eps);
        const auto h = potential(sb, 3);
        for (auto wx : {AxisWeight::one, AxisWeight::cost, AxisWeight::pos, AxisWeight::neg})
            for (auto wy : {AxisWeight::one, AxisWeight::pos}) {
                std::vector<double> r(op.out_size());
                op.lse(h, wx, wy, r);
                const auto ref = naive_lse(sa, sb, h, eps, wx, wy);
                for (std::size_t i = 0; i < r.size(); ++i) {
                    if (ref[i] == neg_inf) {
                        EXPECT_EQ(r[i], neg_inf);
                        continue;
                    }
                    EXPECT_NEAR(r[i], ref[i], 1e-11 * std::max(1.0, std::abs(ref[i]))) << "eps " << eps << " i " << i;
                }
            }
    }
}

TEST(Kernels, SeparableSurvivesDeepUnderflow) {
    // eps so small that every off-diagonal kernel entry underflows.
    DensityField a(unit_grid(6, 6)), b(unit_grid(6, 6));
    a.set(0, 0, 1.0);
    a.set(5, 5, 1.0);
    b.set(5, 0, 1.0);
    const ScalingContext sc{1.0, 1.0};
    const auto sa = make_grid_support(a, sc, false), sb = make_grid_support(b, sc, false);
    const SeparableOperator op(sa, sb, 1e-4);
    const auto h = potential(sb, 5);
    std::vector<double> r(op.out_size());
    op.lse(h, r);
    const auto ref = naive_lse(sa, sb, h, 1e-4);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], ref[i], 1e-9 * std::abs(ref[i]));
}

TEST(Kernels, DenseMatchesBruteForce) {
    const auto a = uotv::testing::random_cloud(17, 4), b = uotv::testing::random_cloud(23, 5);
    std::vector<double> h(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) h[j] = b.log_weights[j] + 0.1 * static_cast<double>(j % 5);
    const DenseOperator op(a, b, 0.003);
    for (auto w : {AxisWeight::one, AxisWeight::cost, AxisWeight::neg}) {
        std::vector<double> r(a.size());
        op.lse(h, w, AxisWeight::one, r);
        const auto ref = naive_lse(a, b, h, 0.003, w, AxisWeight::one);
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (ref[i] == neg_inf)
                EXPECT_EQ(r[i], neg_inf);
            else
                EXPECT_NEAR(r[i], ref[i], 1e-11 * std::max(1.0, std::abs(ref[i])));
        }
    }
}

TEST(Kernels, DenseGuardsAgainstHugeKernels) {
    const auto a = uotv::testing::random_cloud(4000, 1), b = uotv::testing::random_cloud(4000, 2);
    EXPECT_THROW(DenseOperator(a, b, 0.01), std::length_error);
}
