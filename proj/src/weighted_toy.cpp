#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ablo/problem.hpp"

namespace ablo {
namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Binary cross-entropy on a logit: softplus(z) - y z.
double bce(double z, double y) { return softplus(z) - y * z; }

class WeightedToy final : public BilevelProblem {
 public:
  WeightedToy(Mat x, Vec y, Mat xv, Vec yv, double fold_step)
      : x_(std::move(x)), y_(std::move(y)), xv_(std::move(xv)), yv_(std::move(yv)), fold_(fold_step) {}

  std::string name() const override { return "weighted_toy"; }
  std::size_t outer_dim() const override { return static_cast<std::size_t>(x_.rows()); }
  std::size_t inner_dim() const override { return static_cast<std::size_t>(x_.cols()); }
  std::span<const double> task_probabilities() const override { return probs_; }

  double inner_loss(const Vec& theta, const Vec& phi, Task) const override {
    const Vec z = x_ * phi;
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) total += sigmoid(theta[i]) * bce(z[i], y_[i]);
    return total;
  }

  double outer_loss(const Vec& theta, const Vec& phi, Task t) const override {
    return validation_loss(phi - fold_ * inner_grad_phi(theta, phi, t));
  }

  Vec inner_grad_phi(const Vec& theta, const Vec& phi, Task) const override {
    return x_.transpose() * weighted_residual(theta, phi);
  }

  Vec outer_grad_theta(const Vec& theta, const Vec& phi, Task t) const override {
    const Vec gv = validation_grad(phi - fold_ * inner_grad_phi(theta, phi, t));
    return -fold_ * cross_rows(theta, phi, gv);
  }

  Vec outer_grad_phi(const Vec& theta, const Vec& phi, Task t) const override {
    const Vec gv = validation_grad(phi - fold_ * inner_grad_phi(theta, phi, t));
    return gv - fold_ * hvp_phi_phi(theta, phi, t, gv);
  }

  Vec hvp_theta_phi(const Vec& theta, const Vec& phi, Task, const Vec& b) const override {
    return cross_rows(theta, phi, b);
  }

  Vec hvp_phi_phi(const Vec& theta, const Vec& phi, Task, const Vec& b) const override {
    const Vec z = x_ * phi;
    const Vec xb = x_ * b;
    Vec c(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double s = sigmoid(z[i]);
      c[i] = sigmoid(theta[i]) * s * (1.0 - s) * xb[i];
    }
    return x_.transpose() * c;
  }

  Vec start_point(const Vec&, Task) const override { return Vec::Zero(x_.cols()); }
  Vec jvp_start(const Vec&, Task, const Vec&) const override { return Vec::Zero(x_.rows()); }

  Vec sample_theta(Rng& rng) const override {
    Vec v(x_.rows());
    for (auto& e : v) e = uniform(rng, -2.0, 2.0);
    return v;
  }

 private:
  // w_i * (sigmoid(z_i) - y_i)
  Vec weighted_residual(const Vec& theta, const Vec& phi) const {
    const Vec z = x_ * phi;
    Vec g(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) g[i] = sigmoid(theta[i]) * (sigmoid(z[i]) - y_[i]);
    return g;
  }

  // Row i: sigmoid'(theta_i) * grad(l_i)(phi) . b
  Vec cross_rows(const Vec& theta, const Vec& phi, const Vec& b) const {
    const Vec z = x_ * phi;
    const Vec xb = x_ * b;
    Vec out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double w = sigmoid(theta[i]);
      out[i] = w * (1.0 - w) * (sigmoid(z[i]) - y_[i]) * xb[i];
    }
    return out;
  }

  double validation_loss(const Vec& psi) const {
    const Vec z = xv_ * psi;
    double total = 0.0;
    for (Eigen::Index k = 0; k < z.size(); ++k) total += bce(z[k], yv_[k]);
    return total / static_cast<double>(z.size());
  }

  Vec validation_grad(const Vec& psi) const {
    const Vec z = xv_ * psi;
    Vec r(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) r[k] = sigmoid(z[k]) - yv_[k];
    return xv_.transpose() * r / static_cast<double>(z.size());
  }

  Mat x_;
  Vec y_;
  Mat xv_;
  Vec yv_;
  double fold_;
  std::vector<double> probs_{1.0};
};

bool binary(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](double e) { return e == 0.0 || e == 1.0; });
}

}  // namespace

ProblemPtr make_weighted_toy(std::size_t n, const Mat& features, const Vec& labels,
                             const Mat& val_features, const Vec& val_labels, double fold_step) {
  const auto rows = static_cast<Eigen::Index>(n);
  if (n == 0) throw ConfigError("weighted_toy: need at least one training sample");
  if (features.rows() != rows || labels.size() != rows)
    throw ConfigError("weighted_toy: features/labels do not match n");
  if (features.cols() == 0) throw ConfigError("weighted_toy: zero feature columns");
  if (val_features.cols() != features.cols() || val_features.rows() != val_labels.size())
    throw ConfigError("weighted_toy: validation features/labels mismatch");
  if (val_features.rows() == 0) throw ConfigError("weighted_toy: empty validation set");
  if (!binary(labels) || !binary(val_labels)) throw ConfigError("weighted_toy: labels must be 0 or 1");
  if (!(fold_step > 0.0)) throw ConfigError("weighted_toy: fold step must be positive");
  return std::make_shared<WeightedToy>(features, labels, val_features, val_labels, fold_step);
}

SyntheticWeightedData make_synthetic_weighted_data(std::size_t n_train, std::size_t n_val,
                                                   std::size_t dim, double corrupted_fraction,
                                                   std::uint64_t seed) {
  if (dim < 2) throw ConfigError("synthetic data: dim must be >= 2 (one bias column)");
  if (!(corrupted_fraction >= 0.0 && corrupted_fraction <= 1.0))
    throw ConfigError("synthetic data: corrupted fraction outside [0, 1]");
  Rng rng = make_rng(seed, Stream::data);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto d = static_cast<Eigen::Index>(dim);
  Vec teacher(d);
  for (Eigen::Index j = 0; j + 1 < d; ++j) teacher[j] = normal(rng);
  teacher[d - 1] = 0.0;

  auto draw = [&](std::size_t count, Mat& x, Vec& y) {
    x.resize(static_cast<Eigen::Index>(count), d);
    y.resize(static_cast<Eigen::Index>(count));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j + 1 < d; ++j) x(i, j) = normal(rng);
      x(i, d - 1) = 1.0;
      y[i] = x.row(i).dot(teacher) > 0.0 ? 1.0 : 0.0;
    }
  };

  SyntheticWeightedData out;
  draw(n_train, out.data.features, out.data.labels);
  draw(n_val, out.data.val_features, out.data.val_labels);

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_bad = static_cast<std::size_t>(std::llround(corrupted_fraction * static_cast<double>(n_train)));
  out.corrupted.assign(n_train, false);
  for (std::size_t k = 0; k < n_bad; ++k) {
    const auto i = order[k];
    out.corrupted[i] = true;
    out.data.labels[static_cast<Eigen::Index>(i)] = 1.0 - out.data.labels[static_cast<Eigen::Index>(i)];
  }
  return out;
}

}  // namespace ablo
