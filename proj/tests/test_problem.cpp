#include <gtest/gtest.h>

#include <cmath>

#include "ablo/estimators.hpp"
#include "ablo/problem.hpp"
#include "ablo/verification.hpp"
#include "helpers.hpp"

namespace ablo {
namespace {

double ref_bce(double z, double y) { return std::log1p(std::exp(z)) - y * z; }

TEST(ScalarQuadratic, ClosedFormRollout) {
  const auto pb = make_scalar_quadratic(1.7, 0.8);
  const double a = 0.3;
  for (std::size_t r : {0u, 1u, 4u, 9u}) {
    const Vec theta = Vec::Constant(1, -1.25);
    const Rollout ro = inner_rollout(*pb, theta, Task{}, InnerSchedule::constant(a, r));
    const double u = std::pow(1.0 - a, static_cast<double>(r));
    EXPECT_NEAR(ro.phi[0], u * 0.8 + (1.0 - u) * 1.7 * -1.25, 1e-14);
  }
}

TEST(ScalarQuadratic, HandChainRule) {
  // phi_1 = theta / 2, L_out = phi_1^2 / 2, dL/dtheta = phi_1 / 2.
  const auto pb = make_scalar_quadratic(1.0, 0.0);
  const auto s = InnerSchedule::constant(0.5, 1);
  const Vec theta = Vec::Constant(1, 2.0);
  EXPECT_DOUBLE_EQ(inner_rollout(*pb, theta, Task{}, s).phi[0], 1.0);
  EXPECT_NEAR(exact_gradient_cached(*pb, theta, Task{}, s).grad[0], 0.5, 1e-15);
  EXPECT_EQ(fom_gradient(*pb, theta, Task{}, s).grad[0], 0.0);
  EXPECT_NEAR(fd_total_gradient(*pb, theta, Task{}, s)[0], 0.5, 0.5e-6);
}

TEST(ScalarQuadratic, TrivialZeros) {
  const auto pb = make_scalar_quadratic(1.0, 0.3);
  const Vec theta = Vec::Constant(1, 3.1);
  EXPECT_EQ(exact_gradient_cached(*pb, theta, Task{}, InnerSchedule{}).grad[0], 0.0);
  const auto flat = make_scalar_quadratic(0.0, 0.3);
  EXPECT_EQ(exact_gradient_cached(*flat, theta, Task{}, InnerSchedule::constant(0.2, 7)).grad[0], 0.0);
}

TEST(ScalarQuadratic, RejectsNonFinite) {
  EXPECT_THROW(make_scalar_quadratic(std::nan(""), 0.0), ConfigError);
}

TEST(WeightedToy, SigmoidWeightAtZero) {
  Mat x(1, 2);
  x << 0.4, 1.0;
  Vec y = Vec::Constant(1, 1.0);
  const auto pb = make_weighted_toy(1, x, y, x, y, 0.1);
  const Vec phi = (Vec(2) << 0.7, -0.2).finished();
  const double z = 0.4 * 0.7 - 0.2;
  EXPECT_NEAR(pb->inner_loss(Vec::Zero(1), phi, Task{}), 0.5 * ref_bce(z, 1.0), 1e-15);
}

TEST(WeightedToy, SaturatedWeightSuppressesSample) {
  Mat x(2, 2);
  x << 1.0, 1.0, -2.0, 1.0;
  Vec y(2);
  y << 1.0, 1.0;
  const auto pb = make_weighted_toy(2, x, y, x, y, 0.1);
  const Vec phi = (Vec(2) << 0.3, 0.1).finished();
  const double l1 = ref_bce(0.4, 1.0);
  const double got = pb->inner_loss((Vec(2) << 10.0, -10.0).finished(), phi, Task{});
  EXPECT_NEAR(got / l1, 1.0, 1e-4);
}

TEST(WeightedToy, ThetaGradientOfInnerLoss) {
  const auto syn = make_synthetic_weighted_data(5, 4, 3, 0.2, 3);
  const auto& d = syn.data;
  const auto pb = make_weighted_toy(5, d.features, d.labels, d.val_features, d.val_labels, 0.2);
  Rng rng = make_rng(42);
  const Vec theta = pb->sample_theta(rng);
  const Vec phi = pb->sample_phi(rng);
  FDConfig fd;
  const Vec numeric = central_gradient([&](const Vec& t) { return pb->inner_loss(t, phi, Task{}); }, theta, fd);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-theta[i]));
    const double li = ref_bce(d.features.row(i).dot(phi), d.labels[i]);
    EXPECT_NEAR(numeric[i], s * (1.0 - s) * li, 1e-6 * std::abs(s * (1.0 - s) * li) + 1e-12);
  }
}

TEST(WeightedToy, RejectsMismatchedDimensions) {
  Mat x(3, 2);
  x.setOnes();
  Vec y = Vec::Zero(3);
  EXPECT_THROW(make_weighted_toy(2, x, y, x, y, 0.1), ConfigError);
  EXPECT_THROW(make_weighted_toy(3, x, Vec::Zero(2), x, y, 0.1), ConfigError);
  EXPECT_THROW(make_weighted_toy(3, x, y, Mat::Ones(3, 3), y, 0.1), ConfigError);
  EXPECT_THROW(make_weighted_toy(3, x, y, x, Vec::Zero(1), 0.1), ConfigError);
  EXPECT_THROW(make_weighted_toy(3, x, y, x, y, 0.0), ConfigError);
  EXPECT_THROW(make_weighted_toy(3, x, Vec::Constant(3, 0.5), x, y, 0.1), ConfigError);
}

TEST(WeightedToy, SyntheticDataShapeAndCorruption) {
  const auto a = make_synthetic_weighted_data(40, 10, 4, 0.25, 9);
  const auto b = make_synthetic_weighted_data(40, 10, 4, 0.25, 9);
  EXPECT_EQ(a.data.features.rows(), 40);
  EXPECT_EQ(a.data.features.cols(), 4);
  EXPECT_TRUE((a.data.features.col(3).array() == 1.0).all());
  EXPECT_EQ(std::count(a.corrupted.begin(), a.corrupted.end(), true), 10);
  EXPECT_EQ(a.data.labels, b.data.labels);
  EXPECT_THROW(make_synthetic_weighted_data(4, 4, 1, 0.1, 0), ConfigError);
  EXPECT_THROW(make_synthetic_weighted_data(4, 4, 3, 1.5, 0), ConfigError);
}

TEST(OracleContract, FiniteDifferencesAgreeOnBuiltins) {
  for (const auto& b : testing::builtins()) {
    Rng rng = make_rng(7, {1});
    const FDReport rep = fd_check_gradients(*b.problem, 100, FDConfig{}, rng);
    EXPECT_TRUE(rep.passed()) << b.label << "\n" << rep.summary();
  }
}

TEST(OracleContract, HvpLinearInDirection) {
  for (const auto& b : testing::builtins()) {
    Rng rng = make_rng(8, {2});
    EXPECT_LT(hvp_linearity_error(*b.problem, 100, rng), 1e-10) << b.label;
  }
}

TEST(OracleContract, SamplerDrawsValidTasks) {
  const auto pb = as_problem(testing::reference_spec());
  Rng rng = make_rng(5);
  std::size_t ones = 0;
  for (int i = 0; i < 4000; ++i) ones += pb->sample_task(rng).index;
  EXPECT_NEAR(static_cast<double>(ones) / 4000.0, 0.5, 0.03);
}

}  // namespace
}  // namespace ablo
