#include <algorithm>
#include <bit>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

#include "onphase/error.hpp"
#include "onphase/format.hpp"
#include "onphase/lattice.hpp"
#include "onphase/scaling.hpp"

namespace onphase::lattice {

Estimate binned_mean(std::span<const double> samples, std::size_t bins) {
  if (samples.empty()) throw Error(ErrorKind::InsufficientData, "no samples");
  const std::size_t n = samples.size();
  Estimate est;
  est.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  bins = std::min(std::max<std::size_t>(bins, 2), n);
  if (n < 2) return est;
  const std::size_t width = n / bins;
  std::vector<double> means(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    const auto first = samples.begin() + static_cast<std::ptrdiff_t>(b * width);
    means[b] = std::accumulate(first, first + static_cast<std::ptrdiff_t>(width), 0.0) /
               static_cast<double>(width);
  }
  const double mb = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(bins);
  double ss = 0.0;
  for (double m : means) ss += (m - mb) * (m - mb);
  est.std_error = std::sqrt(ss / static_cast<double>(bins - 1) / static_cast<double>(bins));
  return est;
}

Estimate energy_per_site(const ObservableSeries& series, std::size_t bins) {
  Estimate e = binned_mean(series.energies, bins);
  const double v = static_cast<double>(series.site_count);
  return {e.mean / v, e.std_error / v};
}

double fluctuation_specific_heat(const ObservableSeries& series, std::size_t volume) {
  if (series.energies.size() < 2) {
    throw Error(ErrorKind::InsufficientData, "specific heat needs at least 2 measurements");
  }
  if (volume == 0 || !(series.temperature > 0.0)) {
    throw Error(ErrorKind::Domain, "specific heat needs V > 0 and T > 0");
  }
  const double n = static_cast<double>(series.energies.size());
  const double mean = std::accumulate(series.energies.begin(), series.energies.end(), 0.0) / n;
  double var = 0.0;
  for (double e : series.energies) var += (e - mean) * (e - mean);
  var /= n;
  const double t = series.temperature;
  return var / (t * t * static_cast<double>(volume));
}

double susceptibility(const ObservableSeries& series, std::size_t volume) {
  const std::size_t count = series.size();
  if (count < 2) throw Error(ErrorKind::InsufficientData, "susceptibility needs at least 2 measurements");
  if (volume == 0 || !(series.temperature > 0.0)) {
    throw Error(ErrorKind::Domain, "susceptibility needs V > 0 and T > 0");
  }
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto m = series.magnetization(i);
    const double sq = std::inner_product(m.begin(), m.end(), m.begin(), 0.0);
    m1 += std::sqrt(sq);
    m2 += sq;
  }
  m1 /= static_cast<double>(count);
  m2 /= static_cast<double>(count);
  return static_cast<double>(volume) * std::max(0.0, m2 - m1 * m1) / series.temperature;
}

ThermoPoint summarize(const ObservableSeries& series, std::size_t bins) {
  const Estimate e = energy_per_site(series, bins);
  return {series.temperature, e.mean, e.std_error,
          fluctuation_specific_heat(series, series.site_count),
          susceptibility(series, series.site_count)};
}

std::string thermo_csv(std::span<const ThermoPoint> rows) {
  std::ostringstream out;
  out << "temperature,mean_energy_per_site,stderr,specific_heat,susceptibility\n";
  for (const auto& r : rows) {
    out << format_double(r.temperature) << ',' << format_double(r.mean_energy_per_site) << ','
        << format_double(r.std_error) << ',' << format_double(r.specific_heat) << ','
        << format_double(r.susceptibility) << '\n';
  }
  return out.str();
}

namespace {

// Site index shifted by r along axis a, using the lattice's coordinate layout
// (axis 0 fastest).
std::size_t shifted(const SpinLattice& lat, std::size_t site, std::size_t axis, std::size_t r) {
  std::size_t stride = 1;
  for (std::size_t a = 0; a < axis; ++a) stride *= lat.side();
  const std::size_t c = (site / stride) % lat.side();
  return site - c * stride + ((c + r) % lat.side()) * stride;
}

}  // namespace

void CorrelationAccumulator::add(const SpinLattice& lat) {
  const std::size_t rmax = lat.side() / 2;
  if (samples_ == 0) {
    ncomp_ = lat.ncomp();
    sums_.assign(rmax, 0.0);
    mag_sum_.assign(ncomp_, 0.0);
  } else if (sums_.size() != rmax || ncomp_ != lat.ncomp()) {
    throw Error(ErrorKind::Validation, "correlation ensemble mixes lattice shapes");
  }
  const double norm = static_cast<double>(lat.site_count() * lat.dim());
  for (std::size_t r = 1; r <= rmax; ++r) {
    double acc = 0.0;
    for (std::size_t s = 0; s < lat.site_count(); ++s) {
      const auto v = lat.spin(s);
      for (std::size_t a = 0; a < lat.dim(); ++a) {
        const auto w = lat.spin(shifted(lat, s, a, r));
        acc += std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
      }
    }
    sums_[r - 1] += acc / norm;
  }
  const auto m = magnetization(lat);
  for (std::size_t c = 0; c < ncomp_; ++c) mag_sum_[c] += m[c];
  ++samples_;
}

std::vector<CorrelationPoint> CorrelationAccumulator::result() const {
  std::vector<CorrelationPoint> out;
  if (samples_ == 0) return out;
  const double n = static_cast<double>(samples_);
  double m2 = 0.0;
  for (double m : mag_sum_) m2 += (m / n) * (m / n);
  for (std::size_t r = 1; r <= sums_.size(); ++r) out.push_back({r, sums_[r - 1] / n - m2});
  return out;
}

std::vector<CorrelationPoint> correlation_function(std::span<const SpinLattice> ensemble) {
  if (ensemble.empty()) throw Error(ErrorKind::InsufficientData, "empty ensemble");
  CorrelationAccumulator acc;
  for (const auto& lat : ensemble) acc.add(lat);
  return acc.result();
}

void WallCorrelationAccumulator::add(const SpinLattice& lat) {
  const std::size_t side = lat.side();
  const std::size_t n = lat.ncomp();
  if (samples_ == 0) {
    side_ = side;
    ncomp_ = n;
    sums_.assign(side / 2, 0.0);
    wall_mean_.assign(n, 0.0);
  } else if (side_ != side || ncomp_ != n) {
    throw Error(ErrorKind::Validation, "correlation ensemble mixes lattice shapes");
  }
  const double per_wall = static_cast<double>(lat.site_count() / side);
  std::vector<double> walls(side * n);
  std::size_t stride = 1;
  for (std::size_t a = 0; a < lat.dim(); ++a) {
    std::fill(walls.begin(), walls.end(), 0.0);
    for (std::size_t s = 0; s < lat.site_count(); ++s) {
      const std::size_t c = (s / stride) % side;
      const auto v = lat.spin(s);
      for (std::size_t k = 0; k < n; ++k) walls[c * n + k] += v[k] / per_wall;
    }
    for (std::size_t r = 1; r <= side / 2; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < side; ++c) {
        const std::size_t c2 = (c + r) % side;
        for (std::size_t k = 0; k < n; ++k) acc += walls[c * n + k] * walls[c2 * n + k];
      }
      sums_[r - 1] += acc / static_cast<double>(side * lat.dim());
    }
    stride *= side;
  }
  const auto m = magnetization(lat);
  for (std::size_t k = 0; k < n; ++k) wall_mean_[k] += m[k];
  ++samples_;
}

std::vector<CorrelationPoint> WallCorrelationAccumulator::result() const {
  std::vector<CorrelationPoint> out;
  if (samples_ == 0) return out;
  const double n = static_cast<double>(samples_);
  double m2 = 0.0;
  for (double m : wall_mean_) m2 += (m / n) * (m / n);
  for (std::size_t r = 1; r <= sums_.size(); ++r) out.push_back({r, sums_[r - 1] / n - m2});
  return out;
}

double fit_correlation_length(std::span<const CorrelationPoint> g, std::size_t max_radius) {
  std::vector<CorrelationPoint> pts(g.begin(), g.end());
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.r < b.r; });
  if (max_radius > 0) {
    pts.erase(std::remove_if(pts.begin(), pts.end(), [&](const auto& p) { return p.r > max_radius; }),
              pts.end());
  }
  std::size_t nonpositive = 0;
  for (const auto& p : pts) nonpositive += !(p.g > 0.0);
  if (pts.empty() || 2 * nonpositive > pts.size()) {
    throw Error(ErrorKind::SignalTooWeak, "correlation function is nonpositive at more than half the radii");
  }
  std::vector<double> rs, logs;
  for (const auto& p : pts) {
    if (!(p.g > 0.0)) break;
    rs.push_back(static_cast<double>(p.r));
    logs.push_back(std::log(p.g));
  }
  if (rs.size() < 3) {
    throw Error(ErrorKind::SignalTooWeak, "fewer than 3 leading radii with G(r) > 0");
  }
  const double n = static_cast<double>(rs.size());
  const double mr = std::accumulate(rs.begin(), rs.end(), 0.0) / n;
  const double ml = std::accumulate(logs.begin(), logs.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    sxx += (rs[i] - mr) * (rs[i] - mr);
    sxy += (rs[i] - mr) * (logs[i] - ml);
  }
  const double slope = sxy / sxx;
  if (!(slope < 0.0)) {
    throw Error(ErrorKind::SignalTooWeak, "ln G(r) does not decrease with r");
  }
  return -1.0 / slope;
}

NuEstimate fit_nu(std::span<const XiPoint> xi_by_t, double critical_temperature) {
  std::vector<double> above_x, above_y, below_x, below_y;
  for (const auto& p : xi_by_t) {
    const double dt = p.temperature - critical_temperature;
    if (dt > 0.0) {
      above_x.push_back(dt);
      above_y.push_back(p.xi);
    } else if (dt < 0.0) {
      below_x.push_back(-dt);
      below_y.push_back(p.xi);
    }
  }
  NuEstimate out;
  auto side = [](const std::vector<double>& x, const std::vector<double>& y, const char* name)
      -> std::optional<double> {
    if (x.empty()) return std::nullopt;
    if (x.size() < 3) {
      throw Error(ErrorKind::InsufficientData,
                  std::string("nu fit needs at least 3 points ") + name + " T_c");
    }
    return -scaling::fit_power_law(x, y).exponent;
  };
  out.above = side(above_x, above_y, "above");
  out.below = side(below_x, below_y, "below");
  if (!out.above && !out.below) {
    throw Error(ErrorKind::InsufficientData, "no correlation lengths away from T_c");
  }
  return out;
}

ExactThermo enumerate_exact(std::size_t dim, std::size_t side, double temperature,
                            double coupling) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::Domain, "temperature must be positive");
  if (dim == 0 || side < 2) throw Error(ErrorKind::Domain, "need dim >= 1 and side >= 2");
  std::size_t sites = 1;
  for (std::size_t a = 0; a < dim; ++a) {
    sites *= side;
    if (sites > 24) {
      throw Error(ErrorKind::Capacity, "exact enumeration is capped at 24 sites (2^24 states)");
    }
  }

  const SpinLattice lat(dim, side, 1, coupling);
  const std::size_t bonds = sites * dim;
  // Histogram of the bond sum B = sum s_x s_y in [-bonds, bonds].
  std::vector<std::uint64_t> hist(2 * bonds + 1, 0);
  std::vector<int> spins(sites, 1);
  long long bond_sum = static_cast<long long>(bonds);
  hist[static_cast<std::size_t>(bond_sum + static_cast<long long>(bonds))] += 1;

  // Gray-code walk: state k differs from k-1 in bit ctz(k).
  const std::uint64_t states = std::uint64_t{1} << sites;
  for (std::uint64_t k = 1; k < states; ++k) {
    const auto site = static_cast<std::size_t>(std::countr_zero(k));
    int field = 0;
    for (std::size_t a = 0; a < dim; ++a) {
      field += spins[lat.neighbor(site, a, true)];
      field += spins[lat.neighbor(site, a, false)];
    }
    bond_sum -= 2LL * spins[site] * field;
    spins[site] = -spins[site];
    hist[static_cast<std::size_t>(bond_sum + static_cast<long long>(bonds))] += 1;
  }

  const double beta = 1.0 / temperature;
  double max_exponent = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (hist[i] == 0) continue;
    const double b = static_cast<double>(static_cast<long long>(i) - static_cast<long long>(bonds));
    max_exponent = std::max(max_exponent, beta * coupling * b);
  }
  double z = 0.0, e1 = 0.0, e2 = 0.0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (hist[i] == 0) continue;
    const double b = static_cast<double>(static_cast<long long>(i) - static_cast<long long>(bonds));
    const double energy = -coupling * b;
    const double w = static_cast<double>(hist[i]) * std::exp(beta * coupling * b - max_exponent);
    z += w;
    e1 += w * energy;
    e2 += w * energy * energy;
  }
  e1 /= z;
  e2 /= z;
  const double v = static_cast<double>(sites);
  return {e1 / v, std::max(0.0, e2 - e1 * e1) / (temperature * temperature * v)};
}

}  // namespace onphase::lattice
