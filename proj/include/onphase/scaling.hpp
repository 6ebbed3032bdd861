#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onphase/energy.hpp"
#include "onphase/error.hpp"

namespace onphase::scaling {

struct PowerLawFit {
  double exponent = 0.0;
  double log_prefactor = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of ln y on ln x.
PowerLawFit fit_power_law(std::span<const double> xs, std::span<const double> ys);

/// Exponent of y ~ z^(a/b) given y ~ x^a and z ~ x^b.
double compose_exponents(double a, double b);

struct JointLossParams {
  double critical_params = 0.0;   // P_c
  double critical_data = 0.0;     // D_c
  double alpha = 0.0;
  double beta = 0.0;
};

/// ((P_c/P)^(alpha/beta) + D_c/D)^beta
double evaluate_joint_loss(double params, double data, const JointLossParams& p);

/// d(alpha) = 2(2 - alpha)/(1 - alpha)
double internal_dimension(double alpha);
/// alpha(d) = (d - 4)/(d - 2)
double alpha_of_dimension(double d);
/// nu = 1/(d - 2)
double nu_of_dimension(double d);
/// nu d - (2 - alpha)
double hyperscaling_residual(double nu, double alpha, double d);

/// Piecewise critical law around T_c:
///   E = E_c - A_minus/(1 - alpha_prime) (T_c - T)^(1 - alpha_prime),  T < T_c
///   E = E_c + A_plus /(1 - alpha)       (T - T_c)^(1 - alpha),        T > T_c
/// A_plus and A_minus are the specific-heat amplitudes of C ~ A |T - T_c|^-a.
struct CriticalFit {
  double critical_temperature = 0.0;
  double critical_energy = 0.0;
  double amplitude_plus = 0.0;
  double amplitude_minus = 0.0;
  double alpha = 0.0;
  double alpha_prime = 0.0;
  double residual_sse = 0.0;
  double d_internal = 0.0;
  bool converged = true;
  std::size_t iterations = 0;

  double evaluate(double temperature) const;
};

struct CriticalFitOptions {
  /// Candidate critical temperatures. Empty means every interior curve
  /// temperature plus the midpoints between neighbours.
  std::vector<double> candidates;
  std::size_t min_points_per_side = 4;
  std::size_t max_iterations = 400;
  double exponent_min = -2.0;
  double exponent_max = 0.99;
  /// Refine T_c continuously between the neighbouring grid candidates.
  bool refine = true;
};

/// Raised when the optimizer cannot produce an identifiable fit. Carries the
/// best parameters seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, CriticalFit best)
      : Error(ErrorKind::Convergence, what), best_(best) {}
  const CriticalFit& best() const noexcept { return best_; }

 private:
  CriticalFit best_;
};

CriticalFit fit_critical(const energy::EnergyCurve& curve,
                         const CriticalFitOptions& options = {});

/// Per-point residual E_i - fit(T_i).
std::vector<double> fit_residuals(const energy::EnergyCurve& curve,
                                  const CriticalFit& fit);

/// Structured record with every field plus per-point residuals.
std::string fit_report_json(const energy::EnergyCurve& curve,
                            const CriticalFit& fit);

/// kind,temperature,energy,stderr rows: measured points followed by the
/// fitted branches sampled on `samples_per_branch` points each.
std::string branch_plot_csv(const energy::EnergyCurve& curve,
                            const std::optional<CriticalFit>& fit,
                            std::size_t samples_per_branch = 200);

}  // namespace onphase::scaling
