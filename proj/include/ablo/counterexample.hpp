#pragma once

// Two-task family of convex piecewise-polynomial losses on which first-order
// meta-gradients stall away from stationarity.
//
// Task i has loss f_i(phi^(1)) with centre c_i = b_i / a_i and z = |x - c_i|:
//   z <= A          : a z^2 / 2
//   A < z <= A + 1  : -a (z-A)^3 / 6 + a (z-A)^2 / 2 + a A z - a A^2 / 2
//   z > A + 1       : (a/2 + a A) z - a/6 - a A^2 / 2 - a A / 2
// f is C^2 and f' is strictly increasing.

#include <cstddef>
#include <utility>

#include "ablo/problem.hpp"

namespace ablo {

struct CounterexampleSpec {
  double a1 = 0.0;
  double a2 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double A = 0.0;
  double D = 0.0;
  double alpha = 0.0;
  std::size_t r = 0;
};

struct StationaryStats {
  double a_star = 0.0;
  double b_star = 0.0;
  double x_star = 0.0;
  double a_hat = 0.0;
  double b_hat = 0.0;
  double limit_grad_sq = 0.0;  // (a_hat x_star - b_hat)^2, equals 2D
};

/// b1 = 0, b2 chosen so that the FOM fixed point has squared true gradient 2D,
/// A = |b1/a1 - b2/a2| + 1. Throws ConfigError when a1 == a2, a_i outside
/// (0, 1/alpha), D <= 0 or alpha <= 0.
CounterexampleSpec build_counterexample(double a1, double a2, double D, double alpha, std::size_t r);

/// Same family with b2 and A given directly; D is derived from the fixed point.
CounterexampleSpec explicit_counterexample(double a1, double a2, double b2, double A, double alpha,
                                           std::size_t r);

/// Throws ConfigError if `spec` violates the family's invariants.
void validate(const CounterexampleSpec& spec);

enum class Branch { quadratic, cubic, linear };

struct FValues {
  double f = 0.0;
  double df = 0.0;
  double d2f = 0.0;
};

/// One branch formula evaluated at x regardless of which region x lies in.
FValues f_on_branch(double a, double centre, double A, Branch branch, double x);

/// task is 1 or 2.
double f_eval(const CounterexampleSpec& spec, int task, double x);
double f_prime(const CounterexampleSpec& spec, int task, double x);
double f_second(const CounterexampleSpec& spec, int task, double x);

/// Interval where both tasks are in their quadratic region; inner GD maps it to itself.
std::pair<double, double> quadratic_interval(const CounterexampleSpec& spec);

/// a_i (1 - alpha a_i)^r (theta - b_i/a_i). Throws DomainError outside the interval.
double closed_form_fom_grad(const CounterexampleSpec& spec, int task, double theta);
/// a_i (1 - alpha a_i)^{2r} (theta - b_i/a_i). Throws DomainError outside the interval.
double closed_form_full_grad(const CounterexampleSpec& spec, int task, double theta);

StationaryStats stationary_stats(const CounterexampleSpec& spec);

/// Two equiprobable tasks, V(theta) = theta embedded in the first coordinate of a
/// p-dimensional phi; both losses equal f_i(phi^(1)). Its alpha and r are
/// not baked in: pass them to the estimators through an InnerSchedule.
ProblemPtr as_problem(const CounterexampleSpec& spec, std::size_t p = 1);

}  // namespace ablo
