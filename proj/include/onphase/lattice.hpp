#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace onphase::lattice {

using Rng = std::mt19937_64;

/// Per-chain generator: std::seed_seq over (low32(master), high32(master),
/// low32(chain), high32(chain)). Results depend only on the pair, never on
/// scheduling.
Rng make_chain_rng(std::uint64_t master_seed, std::uint64_t chain_index);

/// Periodic hypercubic lattice of N-component unit spins with uniform
/// nearest-neighbour coupling J. Each site owns one forward bond per axis; for
/// side == 2 the forward and wrap-around bonds join the same pair, which is
/// then counted twice.
class SpinLattice {
 public:
  SpinLattice(std::size_t dim, std::size_t side, std::size_t ncomp,
              double coupling = 1.0);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t side() const noexcept { return side_; }
  std::size_t ncomp() const noexcept { return ncomp_; }
  std::size_t site_count() const noexcept { return sites_; }
  double coupling() const noexcept { return coupling_; }

  std::span<const double> spin(std::size_t site) const {
    return {spins_.data() + site * ncomp_, ncomp_};
  }
  std::span<double> spin(std::size_t site) {
    return {spins_.data() + site * ncomp_, ncomp_};
  }
  std::span<const double> spins() const noexcept { return spins_; }

  /// Neighbour of `site` one step along `axis`, forward (+1) or backward.
  std::size_t neighbor(std::size_t site, std::size_t axis, bool forward) const {
    return neighbors_[(site * dim_ + axis) * 2 + (forward ? 0 : 1)];
  }

  /// Sum of the 2d neighbouring spins into `out`.
  void local_field(std::size_t site, std::span<double> out) const;

  void set_aligned();
  void randomize(Rng& rng);
  /// Rescales every spin to unit norm.
  void renormalize();
  double max_norm_deviation() const;

 private:
  std::size_t dim_;
  std::size_t side_;
  std::size_t ncomp_;
  std::size_t sites_;
  double coupling_;
  std::vector<double> spins_;
  std::vector<std::size_t> neighbors_;
};

/// -J sum over forward bonds of s_x . s_{x+e}
double lattice_energy(const SpinLattice& lat);

/// Mean spin vector.
std::vector<double> magnetization(const SpinLattice& lat);

/// Proposal state for single-site updates. N = 1 always flips. For N >= 2 a
/// spin is moved to normalize(s + step * g), g standard normal, or redrawn
/// uniformly on the sphere once `step` exceeds `full_sphere_step`.
struct MetropolisProposal {
  double step = 0.5;
  double full_sphere_step = 2.0;
  double min_step = 1e-3;
  bool adapt = false;
  double target_acceptance = 0.5;
};

struct SweepStats {
  std::size_t attempted = 0;
  std::size_t accepted = 0;
  double energy_change = 0.0;
};

/// One attempted update per site, visited in a random order. When proposal.adapt is set, the
/// step is retuned after the sweep toward the target acceptance.
SweepStats metropolis_sweep(SpinLattice& lat, double temperature, Rng& rng,
                            MetropolisProposal& proposal);

struct ClusterStats {
  std::size_t cluster_size = 0;
  double energy_change = 0.0;
};

/// One Wolff cluster: random seed site and random unit direction r; bonds
/// activated with p = 1 - exp(min(0, -2J (r.s_x)(r.s_y)/T)); the cluster is
/// reflected through the plane orthogonal to r.
ClusterStats wolff_update(SpinLattice& lat, double temperature, Rng& rng);

enum class Sampler { Metropolis, Wolff };
enum class Start { Cold, Hot };

Sampler parse_sampler(const std::string& name);
std::string to_string(Sampler s);

struct SimulationConfig {
  std::size_t dim = 2;
  std::size_t side = 8;
  std::size_t ncomp = 1;
  double temperature = 1.0;
  double coupling = 1.0;
  std::size_t thermalization_sweeps = 1000;
  std::size_t measurement_sweeps = 10000;
  Sampler sampler = Sampler::Wolff;
  Start start = Start::Cold;
  std::uint64_t seed = 0;
  std::uint64_t chain_index = 0;
  std::size_t max_sites = std::size_t{1} << 24;
  /// Recompute the energy from scratch every this many sweeps and fail if the
  /// tracked value drifted by more than 1e-8 (relative to site count). 0 = off.
  std::size_t energy_check_interval = 0;
};

/// For Wolff a "sweep" is a fixed number of cluster updates, chosen so that
/// the thermalization-mean cluster size times the count matches the site
/// count.
struct ObservableSeries {
  double temperature = 0.0;
  std::size_t site_count = 0;
  std::size_t ncomp = 0;
  std::vector<double> energies;
  std::vector<double> magnetizations;
  std::size_t thermalization_sweeps = 0;
  std::size_t measurement_sweeps = 0;
  std::uint64_t seed = 0;
  double acceptance_rate = 0.0;
  double mean_cluster_size = 0.0;

  std::size_t size() const noexcept { return energies.size(); }
  std::span<const double> magnetization(std::size_t i) const {
    return {magnetizations.data() + i * ncomp, ncomp};
  }
};

using MeasurementHook = std::function<void(const SpinLattice&)>;

ObservableSeries run_simulation(const SimulationConfig& config,
                                const MeasurementHook& on_measurement = {});

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Batch-means estimate over `bins` contiguous blocks.
Estimate binned_mean(std::span<const double> samples, std::size_t bins = 32);

Estimate energy_per_site(const ObservableSeries& series, std::size_t bins = 32);

/// (<E^2> - <E>^2) / (T^2 V)
double fluctuation_specific_heat(const ObservableSeries& series, std::size_t volume);

/// V (<m^2> - <|m|>^2) / T with m the mean-spin magnitude.
double susceptibility(const ObservableSeries& series, std::size_t volume);

/// One row of the simulator's per-temperature table.
struct ThermoPoint {
  double temperature = 0.0;
  double mean_energy_per_site = 0.0;
  double std_error = 0.0;
  double specific_heat = 0.0;
  double susceptibility = 0.0;
};

ThermoPoint summarize(const ObservableSeries& series, std::size_t bins = 32);

/// temperature,mean_energy_per_site,stderr,specific_heat,susceptibility
/// (readable by energy::read_curve_csv).
std::string thermo_csv(std::span<const ThermoPoint> rows);

struct CorrelationPoint {
  std::size_t r = 0;
  double g = 0.0;
};

/// Connected site-to-site correlation along the axes,
/// G(r) = <s(x).s(x + r e)> - |<m>|^2, r = 1..side/2.
class CorrelationAccumulator {
 public:
  void add(const SpinLattice& lat);
  std::size_t samples() const noexcept { return samples_; }
  std::vector<CorrelationPoint> result() const;

 private:
  std::size_t samples_ = 0;
  std::size_t ncomp_ = 0;
  std::vector<double> sums_;
  std::vector<double> mag_sum_;
};

std::vector<CorrelationPoint> correlation_function(std::span<const SpinLattice> ensemble);

/// Connected correlation of hyperplane-averaged spins along each axis. Its
/// decay is a pure exponential (up to the periodic image) without the power
/// prefactor of the site-to-site function, so it is the one used for xi.
class WallCorrelationAccumulator {
 public:
  void add(const SpinLattice& lat);
  std::size_t samples() const noexcept { return samples_; }
  std::vector<CorrelationPoint> result() const;

 private:
  std::size_t samples_ = 0;
  std::size_t side_ = 0;
  std::size_t ncomp_ = 0;
  std::vector<double> sums_;
  std::vector<double> wall_mean_;
};

/// xi from the least-squares slope of ln G(r) against r over the leading run
/// of positive values, optionally cut at `max_radius`.
double fit_correlation_length(std::span<const CorrelationPoint> g,
                              std::size_t max_radius = 0);

struct XiPoint {
  double temperature;
  double xi;
};

struct NuEstimate {
  std::optional<double> above;
  std::optional<double> below;
};

NuEstimate fit_nu(std::span<const XiPoint> xi_by_t, double critical_temperature);

struct ExactThermo {
  double energy_per_site = 0.0;
  double specific_heat_per_site = 0.0;
};

/// Brute-force Ising (N = 1) sums over all 2^(side^d) states; side^d <= 24.
ExactThermo enumerate_exact(std::size_t dim, std::size_t side, double temperature,
                            double coupling = 1.0);

}  // namespace onphase::lattice
