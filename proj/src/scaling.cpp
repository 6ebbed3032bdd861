#include "onphase/scaling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <json.hpp>

#include "onphase/format.hpp"

namespace onphase::scaling {

PowerLawFit fit_power_law(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorKind::Validation, "power-law fit needs equally many x and y values");
  }
  if (xs.size() < 2) {
    throw Error(ErrorKind::InsufficientData, "power-law fit needs at least 2 points");
  }
  const std::size_t n = xs.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      throw Error(ErrorKind::Domain, "power-law fit needs strictly positive finite values (point " +
                                         std::to_string(i) + ")");
    }
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::Degenerate, "all x values are equal");

  PowerLawFit fit;
  fit.exponent = sxy / sxx;
  fit.log_prefactor = my - fit.exponent * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (fit.log_prefactor + fit.exponent * lx[i]);
    sse += r * r;
  }
  if (syy > 0.0) {
    fit.r_squared = std::clamp(1.0 - sse / syy, 0.0, 1.0);
  } else {
    fit.r_squared = 1.0;  // constant y is fitted exactly by slope 0
  }
  return fit;
}

double compose_exponents(double a, double b) {
  if (b == 0.0) throw Error(ErrorKind::Domain, "cannot compose with a zero exponent");
  return a / b;
}

double evaluate_joint_loss(double params, double data, const JointLossParams& p) {
  if (!(params > 0.0) || !(data > 0.0)) {
    throw Error(ErrorKind::Domain, "parameter count and data size must be positive");
  }
  if (!(p.critical_params > 0.0 && p.critical_data > 0.0 && p.alpha > 0.0 && p.beta > 0.0)) {
    throw Error(ErrorKind::Domain, "joint-loss constants must be strictly positive");
  }
  return std::pow(std::pow(p.critical_params / params, p.alpha / p.beta) + p.critical_data / data,
                  p.beta);
}

double internal_dimension(double alpha) {
  if (!(alpha < 1.0)) throw Error(ErrorKind::Domain, "internal dimension needs alpha < 1");
  return 2.0 * (2.0 - alpha) / (1.0 - alpha);
}

double alpha_of_dimension(double d) {
  if (d == 2.0) throw Error(ErrorKind::Domain, "alpha(d) is singular at d = 2");
  return (d - 4.0) / (d - 2.0);
}

double nu_of_dimension(double d) {
  if (!(d > 2.0)) throw Error(ErrorKind::Domain, "nu(d) needs d > 2");
  return 1.0 / (d - 2.0);
}

double hyperscaling_residual(double nu, double alpha, double d) {
  return nu * d - (2.0 - alpha);
}

double CriticalFit::evaluate(double t) const {
  if (t < critical_temperature) {
    const double q = 1.0 - alpha_prime;
    return critical_energy - amplitude_minus / q * std::pow(critical_temperature - t, q);
  }
  if (t > critical_temperature) {
    const double q = 1.0 - alpha;
    return critical_energy + amplitude_plus / q * std::pow(t - critical_temperature, q);
  }
  return critical_energy;
}

namespace {

// Parameter order: E_c, A_minus, alpha_prime, A_plus, alpha.
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

struct Data {
  std::vector<double> t, e, w;
};

struct Box {
  double exponent_min;
  double exponent_max;

  void project(Vec5& p) const {
    p(1) = std::max(p(1), 0.0);
    p(3) = std::max(p(3), 0.0);
    p(2) = std::clamp(p(2), exponent_min, exponent_max);
    p(4) = std::clamp(p(4), exponent_min, exponent_max);
  }
};

// x^q / q and its derivative in q, for x >= 0.
struct PowerTerm {
  double g;
  double dg_dq;
};

PowerTerm power_term(double x, double q) {
  if (x <= 0.0) return {0.0, 0.0};
  const double xq = std::pow(x, q);
  return {xq / q, xq * std::log(x) / q - xq / (q * q)};
}

double model(double t, double tc, const Vec5& p) {
  if (t < tc) return p(0) - p(1) * power_term(tc - t, 1.0 - p(2)).g;
  if (t > tc) return p(0) + p(3) * power_term(t - tc, 1.0 - p(4)).g;
  return p(0);
}

double sse(const Data& d, double tc, const Vec5& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.t.size(); ++i) {
    const double r = d.e[i] - model(d.t[i], tc, p);
    s += d.w[i] * r * r;
  }
  return s;
}

struct LocalFit {
  Vec5 p = Vec5::Zero();
  double sse = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t iterations = 0;
};

LocalFit levenberg_marquardt(const Data& d, double tc, Vec5 p, const Box& box,
                             std::size_t max_iterations) {
  box.project(p);
  LocalFit out;
  double cost = sse(d, tc, p);
  double lambda = 1e-3;
  const std::size_t n = d.t.size();

  for (std::size_t it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    Mat5 jtj = Mat5::Zero();
    Vec5 jtr = Vec5::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      Vec5 j = Vec5::Zero();
      j(0) = 1.0;
      const double t = d.t[i];
      if (t < tc) {
        const auto pt = power_term(tc - t, 1.0 - p(2));
        j(1) = -pt.g;
        j(2) = p(1) * pt.dg_dq;  // dq/dalpha' = -1
      } else if (t > tc) {
        const auto pt = power_term(t - tc, 1.0 - p(4));
        j(3) = pt.g;
        j(4) = -p(3) * pt.dg_dq;
      }
      const double r = d.e[i] - model(t, tc, p);
      jtj.noalias() += d.w[i] * j * j.transpose();
      jtr.noalias() += d.w[i] * r * j;
    }

    // Parameters sitting on a bound whose gradient points out of the box are
    // held fixed this iteration. Without this the projected step keeps
    // hitting the wall (e.g. A_plus = 0 on a curve that falls past T_c) and
    // the remaining parameters crawl.
    std::array<bool, 5> frozen{};
    auto at_lower = [&](int k) {
      if (k == 1 || k == 3) return p(k) <= 0.0;
      if (k == 2 || k == 4) return p(k) <= box.exponent_min;
      return false;
    };
    auto at_upper = [&](int k) { return (k == 2 || k == 4) && p(k) >= box.exponent_max; };
    for (int k = 0; k < 5; ++k) {
      frozen[k] = (at_lower(k) && jtr(k) < 0.0) || (at_upper(k) && jtr(k) > 0.0);
    }
    // An exponent is unidentifiable while its amplitude is zero.
    if (p(1) <= 0.0 && frozen[1]) frozen[2] = true;
    if (p(3) <= 0.0 && frozen[3]) frozen[4] = true;
    for (int k = 0; k < 5; ++k) {
      if (!frozen[k]) continue;
      jtj.row(k).setZero();
      jtj.col(k).setZero();
      jtj(k, k) = 1.0;
      jtr(k) = 0.0;
    }

    bool improved = false;
    while (lambda < 1e12) {
      Mat5 a = jtj;
      for (int k = 0; k < 5; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      const Vec5 step = a.ldlt().solve(jtr);
      Vec5 trial = p + step;
      box.project(trial);
      const double trial_cost = sse(d, tc, trial);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double gain = cost - trial_cost;
        p = trial;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (gain <= 1e-13 * cost + 1e-300) {
          out.p = p;
          out.sse = trial_cost;
          out.converged = true;
          return out;
        }
        cost = trial_cost;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) {
      // No descent direction left inside the box: stationary point.
      out.p = p;
      out.sse = cost;
      out.converged = true;
      return out;
    }
  }
  out.p = p;
  out.sse = cost;
  out.converged = false;
  return out;
}

// Weighted linear least squares for (E_c, A_minus, A_plus) with the
// exponents fixed, amplitudes constrained nonnegative by active-set
// enumeration.
std::optional<Vec5> linear_amplitudes(const Data& d, double tc, double alpha_prime,
                                      double alpha) {
  const std::size_t n = d.t.size();
  Eigen::MatrixXd basis(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double sw = std::sqrt(d.w[i]);
    const double t = d.t[i];
    basis(i, 0) = sw;
    basis(i, 1) = t < tc ? -sw * power_term(tc - t, 1.0 - alpha_prime).g : 0.0;
    basis(i, 2) = t > tc ? sw * power_term(t - tc, 1.0 - alpha).g : 0.0;
    y(i) = sw * d.e[i];
  }
  std::optional<Vec5> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < 4; ++mask) {
    std::vector<int> cols = {0};
    if (mask & 1) cols.push_back(1);
    if (mask & 2) cols.push_back(2);
    Eigen::MatrixXd a(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) a.col(static_cast<Eigen::Index>(c)) = basis.col(cols[c]);
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);
    Vec5 p;
    p << coef(0), 0.0, alpha_prime, 0.0, alpha;
    bool feasible = true;
    for (std::size_t c = 1; c < cols.size(); ++c) {
      const double v = coef(static_cast<Eigen::Index>(c));
      if (v < 0.0) feasible = false;
      p(cols[c] == 1 ? 1 : 3) = v;
    }
    if (!feasible) continue;
    const double cost = (a * coef - y).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = p;
    }
  }
  return best;
}

double interpolate(const Data& d, double tc) {
  for (std::size_t i = 0; i + 1 < d.t.size(); ++i) {
    if (tc >= d.t[i] && tc <= d.t[i + 1]) {
      const double w = (tc - d.t[i]) / (d.t[i + 1] - d.t[i]);
      return d.e[i] + w * (d.e[i + 1] - d.e[i]);
    }
  }
  return tc < d.t.front() ? d.e.front() : d.e.back();
}

// Log-linearized branch initial guess: ln|E - E_c| against ln|T - T_c|.
std::pair<double, double> log_linear_branch(const Data& d, double tc, double ec,
                                            bool above, const Box& box) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < d.t.size(); ++i) {
    const double dt = above ? d.t[i] - tc : tc - d.t[i];
    const double de = above ? d.e[i] - ec : ec - d.e[i];
    if (dt > 0.0 && de > 0.0) {
      xs.push_back(dt);
      ys.push_back(de);
    }
  }
  if (xs.size() < 2) return {0.5, 0.0};
  try {
    const auto pl = fit_power_law(xs, ys);
    const double exponent = std::clamp(1.0 - pl.exponent, box.exponent_min, box.exponent_max);
    const double amplitude = (1.0 - exponent) * std::exp(pl.log_prefactor);
    return {exponent, std::isfinite(amplitude) ? amplitude : 0.0};
  } catch (const Error&) {
    return {0.5, 0.0};
  }
}

LocalFit fit_at(const Data& d, double tc, const Box& box, std::size_t max_iterations) {
  std::vector<Vec5> starts;

  const double ec = interpolate(d, tc);
  const auto [ap, am] = log_linear_branch(d, tc, ec, false, box);
  const auto [a, apl] = log_linear_branch(d, tc, ec, true, box);
  Vec5 loglin;
  loglin << ec, am, ap, apl, a;
  starts.push_back(loglin);

  // Coarse exponent grid with the linear parameters solved exactly.
  static constexpr std::array<double, 5> kGrid = {-0.5, 0.0, 0.3, 0.6, 0.9};
  std::optional<Vec5> grid_best;
  double grid_cost = std::numeric_limits<double>::infinity();
  for (double e1 : kGrid) {
    for (double e2 : kGrid) {
      const double x1 = std::clamp(e1, box.exponent_min, box.exponent_max);
      const double x2 = std::clamp(e2, box.exponent_min, box.exponent_max);
      if (auto p = linear_amplitudes(d, tc, x1, x2)) {
        const double c = sse(d, tc, *p);
        if (c < grid_cost) {
          grid_cost = c;
          grid_best = p;
        }
      }
    }
  }
  if (grid_best) starts.push_back(*grid_best);

  LocalFit best;
  for (const auto& s : starts) {
    LocalFit f = levenberg_marquardt(d, tc, s, box, max_iterations);
    if (f.sse < best.sse) best = f;
  }
  return best;
}

CriticalFit to_public(const LocalFit& f, double tc) {
  CriticalFit out;
  out.critical_temperature = tc;
  out.critical_energy = f.p(0);
  out.amplitude_minus = f.p(1);
  out.alpha_prime = f.p(2);
  out.amplitude_plus = f.p(3);
  out.alpha = f.p(4);
  out.residual_sse = f.sse;
  out.converged = f.converged;
  out.iterations = f.iterations;
  out.d_internal = internal_dimension(out.alpha_prime);
  return out;
}

}  // namespace

CriticalFit fit_critical(const energy::EnergyCurve& curve, const CriticalFitOptions& options) {
  const auto& pts = curve.points;
  if (pts.empty()) throw Error(ErrorKind::EmptyInput, "empty energy curve");
  if (!(options.exponent_min < options.exponent_max && options.exponent_max < 1.0)) {
    throw Error(ErrorKind::Domain, "exponent box must satisfy min < max < 1");
  }
  const Box box{options.exponent_min, options.exponent_max};

  Data d;
  bool all_positive = true;
  for (const auto& p : pts) all_positive = all_positive && p.std_error > 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0 && !(pts[i].temperature > pts[i - 1].temperature)) {
      throw Error(ErrorKind::Validation, "curve temperatures must be strictly increasing");
    }
    d.t.push_back(pts[i].temperature);
    d.e.push_back(pts[i].mean_energy);
    d.w.push_back(all_positive ? 1.0 / (pts[i].std_error * pts[i].std_error) : 1.0);
  }

  std::vector<double> candidates = options.candidates;
  if (candidates.empty()) {
    for (std::size_t i = 1; i + 1 < d.t.size(); ++i) {
      candidates.push_back(0.5 * (d.t[i - 1] + d.t[i]));
      candidates.push_back(d.t[i]);
    }
    if (d.t.size() >= 2) candidates.push_back(0.5 * (d.t[d.t.size() - 2] + d.t.back()));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  auto side_ok = [&](double tc) {
    std::size_t below = 0, above = 0;
    for (double t : d.t) {
      below += t < tc;
      above += t > tc;
    }
    return below >= options.min_points_per_side && above >= options.min_points_per_side;
  };
  std::vector<double> valid;
  for (double c : candidates) {
    if (std::isfinite(c) && side_ok(c)) valid.push_back(c);
  }
  if (valid.empty()) {
    throw Error(ErrorKind::InsufficientData,
                "no candidate T_c has " + std::to_string(options.min_points_per_side) +
                    " points on each side");
  }

  // Candidate order is ascending, so strict < keeps the lower T_c on ties.
  std::size_t best_idx = 0;
  LocalFit best;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    LocalFit f = fit_at(d, valid[i], box, options.max_iterations);
    if (f.sse < best.sse) {
      best = f;
      best_idx = i;
    }
  }
  double best_tc = valid[best_idx];

  if (options.refine && valid.size() > 1) {
    double lo = valid[best_idx > 0 ? best_idx - 1 : 0];
    double hi = valid[std::min(best_idx + 1, valid.size() - 1)];
    auto profile = [&](double tc) -> LocalFit {
      if (!side_ok(tc)) return {};
      return fit_at(d, tc, box, options.max_iterations);
    };
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    LocalFit f1 = profile(x1), f2 = profile(x2);
    for (int it = 0; it < 60 && (hi - lo) > 1e-9 * std::max(1.0, std::abs(best_tc)); ++it) {
      if (f1.sse <= f2.sse) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = profile(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = profile(x2);
      }
    }
    const bool first = f1.sse <= f2.sse;
    const LocalFit& fr = first ? f1 : f2;
    if (fr.sse < best.sse) {
      best = fr;
      best_tc = first ? x1 : x2;
    }
  }

  CriticalFit fit = to_public(best, best_tc);

  // Best constant model: weighted mean.
  double sw = 0.0, swe = 0.0;
  for (std::size_t i = 0; i < d.t.size(); ++i) {
    sw += d.w[i];
    swe += d.w[i] * d.e[i];
  }
  const double mean = swe / sw;
  double const_sse = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < d.t.size(); ++i) {
    const_sse += d.w[i] * (d.e[i] - mean) * (d.e[i] - mean);
    scale = std::max(scale, std::abs(d.e[i]));
  }
  const double tiny = 1e-24 * sw * (1.0 + scale * scale);
  const double amp_tiny = 1e-12 * (1.0 + scale);
  if (const_sse <= tiny ||
      (fit.amplitude_plus <= amp_tiny && fit.amplitude_minus <= amp_tiny)) {
    throw ConvergenceError("degenerate curve: both amplitudes vanish and T_c is unidentifiable",
                           fit);
  }
  if (!fit.converged) {
    throw ConvergenceError("critical fit did not converge in " +
                               std::to_string(options.max_iterations) + " iterations",
                           fit);
  }
  return fit;
}

std::vector<double> fit_residuals(const energy::EnergyCurve& curve, const CriticalFit& fit) {
  std::vector<double> out;
  out.reserve(curve.points.size());
  for (const auto& p : curve.points) out.push_back(p.mean_energy - fit.evaluate(p.temperature));
  return out;
}

std::string fit_report_json(const energy::EnergyCurve& curve, const CriticalFit& fit) {
  nlohmann::ordered_json j;
  j["critical_temperature"] = fit.critical_temperature;
  j["critical_energy"] = fit.critical_energy;
  j["amplitude_plus"] = fit.amplitude_plus;
  j["amplitude_minus"] = fit.amplitude_minus;
  j["alpha"] = fit.alpha;
  j["alpha_prime"] = fit.alpha_prime;
  j["residual_sse"] = fit.residual_sse;
  j["d_internal"] = fit.d_internal;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  auto points = nlohmann::ordered_json::array();
  const auto residuals = fit_residuals(curve, fit);
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i];
    nlohmann::ordered_json row;
    row["temperature"] = p.temperature;
    row["energy"] = p.mean_energy;
    row["stderr"] = p.std_error;
    row["fitted"] = fit.evaluate(p.temperature);
    row["residual"] = residuals[i];
    points.push_back(row);
  }
  j["points"] = points;
  return j.dump(2) + "\n";
}

std::string branch_plot_csv(const energy::EnergyCurve& curve,
                            const std::optional<CriticalFit>& fit,
                            std::size_t samples_per_branch) {
  std::string out = "kind,temperature,energy,stderr\n";
  for (const auto& p : curve.points) {
    out += "measured," + format_double(p.temperature) + "," + format_double(p.mean_energy) +
           "," + format_double(p.std_error) + "\n";
  }
  if (!fit || curve.points.empty() || samples_per_branch < 2) return out;
  const double lo = curve.points.front().temperature;
  const double hi = curve.points.back().temperature;
  const double tc = fit->critical_temperature;
  auto branch = [&](const char* kind, double a, double b) {
    for (std::size_t i = 0; i < samples_per_branch; ++i) {
      const double t = a + (b - a) * static_cast<double>(i) /
                               static_cast<double>(samples_per_branch - 1);
      out += std::string(kind) + "," + format_double(t) + "," + format_double(fit->evaluate(t)) + ",0\n";
    }
  };
  if (tc > lo) branch("fit_below", lo, tc);
  if (tc < hi) branch("fit_above", tc, hi);
  return out;
}

}  // namespace onphase::scaling
