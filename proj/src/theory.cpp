#include "ablo/theory.hpp"

#include <cmath>
#include <string>

namespace ablo {

void CostModel::validate() const {
  if (!(C1 > 0.0) || !(C2 > 0.0)) throw ConfigError("cost model: C1 and C2 must be positive");
  if (!(epsilon >= 0.0 && epsilon < 0.5)) throw ConfigError("cost model: epsilon must lie in [0, 0.5)");
}

namespace {

// prod_{j'=first..last} (1 + alpha_j' L2); empty range gives 1.
double growth(const InnerSchedule& s, double L2, std::size_t first, std::size_t last) {
  double p = 1.0;
  for (std::size_t j = first; j <= last; ++j) p *= 1.0 + s.alpha(j) * L2;
  return p;
}

double tail_sum(const InnerSchedule& s, double L2) {
  double sum = 0.0;
  for (std::size_t j = 1; j <= s.r(); ++j) sum += s.alpha(j) * growth(s, L2, j, s.r());
  return sum;
}

}  // namespace

double d_bound(const RegularityConstants& k, const InnerSchedule& s) {
  return (1.0 + k.M1) * k.L1 * k.L2 * tail_sum(s, k.L2);
}

double v_bound(const RegularityConstants& k, const InnerSchedule& s) {
  return k.L1 + k.M1 * k.L1 * growth(s, k.L2, 1, s.r()) + k.L1 * k.L2 * tail_sum(s, k.L2);
}

LipschitzTerms lipschitz_terms(const RegularityConstants& k, const InnerSchedule& s) {
  const std::size_t r = s.r();
  auto alpha = [&](std::size_t j) { return j == 0 ? 0.0 : s.alpha(j); };
  LipschitzTerms out;
  out.A.resize(r + 1);
  out.B.resize(r + 1);
  for (std::size_t j = 0; j <= r; ++j) {
    double sum = 0.0;
    for (std::size_t jp = 1; jp <= j; ++jp) sum += alpha(jp) * growth(s, k.L2, jp + 1, j);
    out.A[j] = k.M1 * growth(s, k.L2, 1, j) + k.L2 * sum;
  }
  for (std::size_t j = 0; j <= r; ++j) {
    double sum = 0.0;
    for (std::size_t jp = j + 1; jp <= r; ++jp) sum += alpha(jp) * (1.0 + out.A[jp - 1]);
    out.B[j] = (k.L2 * (1.0 + out.A[r]) * (1.0 + alpha(j) * k.L2) + k.L1 * k.L3 * sum) *
               growth(s, k.L2, j + 1, r);
  }
  double c = k.L2 + k.L2 * out.A[r];
  for (std::size_t j = 1; j <= r; ++j)
    c += alpha(j) * (k.L2 * out.B[j] + k.L3 * (1.0 + out.A[j - 1]) * k.L1 * growth(s, k.L2, j + 1, r));
  c += k.M1 * out.B[0] + k.M2 * k.L1 * growth(s, k.L2, 1, r);
  out.C = c;
  return out;
}

double lipschitz_c(const RegularityConstants& k, const InnerSchedule& s) { return lipschitz_terms(k, s).C; }

double ufom_threshold(const CostModel& cost) {
  cost.validate();
  return cost.C_rnd() / ((2.0 / (1.0 - 2.0 * cost.epsilon)) * (cost.C_det() + cost.C_rnd()));
}

Verdict ufom_beats_exact(double D2, double V2, const CostModel& cost) {
  if (!(D2 >= 0.0) || !(V2 >= 0.0)) throw ConfigError("ufom_beats_exact: D2 and V2 must be nonnegative");
  if (V2 == 0.0) return Verdict::indeterminate;
  return D2 < ufom_threshold(cost) * V2 ? Verdict::ufom_faster : Verdict::exact_faster;
}

QuadCoeffs qstar_quadratic(double D2, double V2, const CostModel& cost) {
  cost.validate();
  const double e = cost.epsilon;
  return {cost.C_rnd() * (V2 - D2), (2.0 * e + 1.0) / (2.0 * e - 1.0) * D2 * cost.C_rnd(),
          2.0 / (2.0 * e - 1.0) * D2 * cost.C_det()};
}

double optimal_q(double D2, double V2, const CostModel& cost) {
  if (ufom_beats_exact(D2, V2, cost) != Verdict::ufom_faster) return 1.0;
  if (D2 == 0.0) return 0.0;
  const QuadCoeffs p = qstar_quadratic(D2, V2, cost);
  // a > 0, b <= 0, c < 0: exactly one positive root.
  double q = (-p.b + std::sqrt(p.b * p.b - 4.0 * p.a * p.c)) / (2.0 * p.a);
  for (int it = 0; it < 50 && std::abs(p(q)) >= 1e-12; ++it) {
    const double dp = 2.0 * p.a * q + p.b;
    if (dp == 0.0) break;
    q -= p(q) / dp;
  }
  return q;
}

double expected_time(double q, double D2, double V2, const CostModel& cost) {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("expected_time: q must lie in (0, 1]");
  cost.validate();
  const double var = (1.0 / q - 1.0) * D2 + V2;
  return std::pow(var, 2.0 / (1.0 - 2.0 * cost.epsilon)) * (cost.C_det() + cost.C_rnd() * q);
}

double convergence_rhs(double M0_minus_Mstar, double C, double q, double D2, double V2,
                       std::span<const double> gammas) {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("convergence_rhs: q must lie in (0, 1]");
  double sum = 0.0;
  for (double g : gammas) sum += g * g;
  return M0_minus_Mstar + C * ((1.0 / q - 1.0) * D2 + V2) * sum;
}

}  // namespace ablo
