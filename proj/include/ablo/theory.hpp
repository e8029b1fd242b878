#pragma once

// Closed-form bounds and the cost model for choosing the UFOM probability q.

#include <cstddef>
#include <span>
#include <vector>

#include "ablo/estimators.hpp"
#include "ablo/problem.hpp"

namespace ablo {

/// C1: time per phi-gradient, C2: time per HVP pair, epsilon in [0, 0.5).
struct CostModel {
  double C1 = 1.0;
  double C2 = 1.0;
  std::size_t r = 0;
  double epsilon = 0.0;

  double C_det() const { return C1 * static_cast<double>(r + 1); }
  double C_rnd() const {
    const double rr = static_cast<double>(r);
    return (C1 * (rr - 1.0) / 2.0 + C2) * rr;
  }
  /// Throws ConfigError on C1, C2 <= 0 or epsilon outside [0, 0.5).
  void validate() const;
};

/// (1 + M1) L1 L2 sum_j alpha_j prod_{j'=j..r} (1 + alpha_j' L2)
double d_bound(const RegularityConstants& k, const InnerSchedule& s);

/// L1 + M1 L1 prod_j (1 + alpha_j L2) + L1 L2 sum_j alpha_j prod_{j'=j..r} (1 + alpha_j' L2)
double v_bound(const RegularityConstants& k, const InnerSchedule& s);

/// Intermediate constants of the Lipschitz bound on dM/dtheta.
/// A[j], B[j] for j = 0..r; alpha_0 is taken as 0.
struct LipschitzTerms {
  std::vector<double> A;
  std::vector<double> B;
  double C = 0.0;
};

LipschitzTerms lipschitz_terms(const RegularityConstants& k, const InnerSchedule& s);
double lipschitz_c(const RegularityConstants& k, const InnerSchedule& s);

enum class Verdict { ufom_faster, exact_faster, indeterminate };

/// Threshold t with UFOM faster iff D2 < t V2.
double ufom_threshold(const CostModel& cost);

/// indeterminate when V2 = 0.
Verdict ufom_beats_exact(double D2, double V2, const CostModel& cost);

/// a q^2 + b q + c whose root in (0, 1) is q*.
struct QuadCoeffs {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double operator()(double q) const { return (a * q + b) * q + c; }
};

QuadCoeffs qstar_quadratic(double D2, double V2, const CostModel& cost);

/// Root of qstar_quadratic when UFOM is faster, otherwise 1. D2 = 0 gives 0;
/// callers floor it.
double optimal_q(double D2, double V2, const CostModel& cost);

/// ((1/q - 1) D2 + V2)^{2/(1-2 eps)} (C_det + C_rnd q). Throws ConfigError unless q in (0, 1].
double expected_time(double q, double D2, double V2, const CostModel& cost);

/// M0 - M* + C ((1/q - 1) D2 + V2) sum_u gamma_u^2
double convergence_rhs(double M0_minus_Mstar, double C, double q, double D2, double V2,
                       std::span<const double> gammas);

}  // namespace ablo
