#include "onphase/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "onphase/error.hpp"

namespace onphase::lattice {

Rng make_chain_rng(std::uint64_t master_seed, std::uint64_t chain_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(chain_index),
                    static_cast<std::uint32_t>(chain_index >> 32)};
  return Rng(seq);
}

namespace {

std::size_t checked_site_count(std::size_t dim, std::size_t side) {
  std::size_t sites = 1;
  for (std::size_t a = 0; a < dim; ++a) {
    if (sites > std::numeric_limits<std::size_t>::max() / side) {
      throw Error(ErrorKind::Capacity, "site count side^d overflows");
    }
    sites *= side;
  }
  return sites;
}

void random_unit(std::span<double> out, Rng& rng) {
  std::normal_distribution<double> gauss;
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : out) {
      x = gauss(rng);
      norm2 += x * x;
    }
  } while (norm2 < 1e-300);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : out) x *= inv;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

SpinLattice::SpinLattice(std::size_t dim, std::size_t side, std::size_t ncomp,
                         double coupling)
    : dim_(dim), side_(side), ncomp_(ncomp), sites_(0), coupling_(coupling) {
  if (dim_ == 0) throw Error(ErrorKind::Domain, "lattice dimension must be >= 1");
  if (side_ < 2) throw Error(ErrorKind::Domain, "lattice side must be >= 2");
  if (ncomp_ == 0) throw Error(ErrorKind::Domain, "spins need at least one component");
  if (!std::isfinite(coupling_)) throw Error(ErrorKind::Domain, "coupling must be finite");
  sites_ = checked_site_count(dim_, side_);
  spins_.assign(sites_ * ncomp_, 0.0);
  neighbors_.resize(sites_ * dim_ * 2);
  for (std::size_t s = 0; s < sites_; ++s) {
    std::size_t stride = 1;
    std::size_t rest = s;
    for (std::size_t a = 0; a < dim_; ++a) {
      const std::size_t c = rest % side_;
      rest /= side_;
      const std::size_t base = s - c * stride;
      neighbors_[(s * dim_ + a) * 2 + 0] = base + ((c + 1) % side_) * stride;
      neighbors_[(s * dim_ + a) * 2 + 1] = base + ((c + side_ - 1) % side_) * stride;
      stride *= side_;
    }
  }
  set_aligned();
}

void SpinLattice::local_field(std::size_t site, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t* nb = neighbors_.data() + site * dim_ * 2;
  for (std::size_t k = 0; k < 2 * dim_; ++k) {
    const double* s = spins_.data() + nb[k] * ncomp_;
    for (std::size_t c = 0; c < ncomp_; ++c) out[c] += s[c];
  }
}

void SpinLattice::set_aligned() {
  for (std::size_t s = 0; s < sites_; ++s) {
    for (std::size_t c = 0; c < ncomp_; ++c) spins_[s * ncomp_ + c] = c == 0 ? 1.0 : 0.0;
  }
}

void SpinLattice::randomize(Rng& rng) {
  if (ncomp_ == 1) {
    std::bernoulli_distribution coin;
    for (auto& x : spins_) x = coin(rng) ? 1.0 : -1.0;
    return;
  }
  for (std::size_t s = 0; s < sites_; ++s) random_unit(spin(s), rng);
}

void SpinLattice::renormalize() {
  for (std::size_t s = 0; s < sites_; ++s) {
    auto v = spin(s);
    const double inv = 1.0 / std::sqrt(dot(v, v));
    for (auto& x : v) x *= inv;
  }
}

double SpinLattice::max_norm_deviation() const {
  double worst = 0.0;
  for (std::size_t s = 0; s < sites_; ++s) {
    const auto v = spin(s);
    worst = std::max(worst, std::abs(std::sqrt(dot(v, v)) - 1.0));
  }
  return worst;
}

double lattice_energy(const SpinLattice& lat) {
  double bonds = 0.0;
  for (std::size_t s = 0; s < lat.site_count(); ++s) {
    const auto v = lat.spin(s);
    for (std::size_t a = 0; a < lat.dim(); ++a) {
      bonds += dot(v, lat.spin(lat.neighbor(s, a, true)));
    }
  }
  return -lat.coupling() * bonds;
}

std::vector<double> magnetization(const SpinLattice& lat) {
  std::vector<double> m(lat.ncomp(), 0.0);
  for (std::size_t s = 0; s < lat.site_count(); ++s) {
    const auto v = lat.spin(s);
    for (std::size_t c = 0; c < lat.ncomp(); ++c) m[c] += v[c];
  }
  for (auto& x : m) x /= static_cast<double>(lat.site_count());
  return m;
}

SweepStats metropolis_sweep(SpinLattice& lat, double temperature, Rng& rng,
                            MetropolisProposal& proposal) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::Domain, "temperature must be positive");
  const double beta = 1.0 / temperature;
  const double j = lat.coupling();
  const std::size_t n = lat.ncomp();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss;
  std::vector<double> field(n), trial(n);
  SweepStats stats;

  // Fresh visiting order each sweep. In fixed lattice order a zero-cost move
  // (always accepted) lets a just-flipped spin drag its successors along, so
  // in 1D a new domain wall pair is swept around the ring and annihilated
  // before the sweep ends.
  std::vector<std::size_t> order(lat.site_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  for (const std::size_t s : order) {
    auto spin = lat.spin(s);
    lat.local_field(s, field);
    ++stats.attempted;
    if (n == 1) {
      const double delta = 2.0 * j * spin[0] * field[0];
      if (delta <= 0.0 || uniform(rng) < std::exp(-beta * delta)) {
        spin[0] = -spin[0];
        stats.energy_change += delta;
        ++stats.accepted;
      }
      continue;
    }
    if (proposal.step >= proposal.full_sphere_step) {
      random_unit(trial, rng);
    } else {
      double norm2 = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        trial[c] = spin[c] + proposal.step * gauss(rng);
        norm2 += trial[c] * trial[c];
      }
      if (norm2 < 1e-300) continue;
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& x : trial) x *= inv;
    }
    double delta = 0.0;
    for (std::size_t c = 0; c < n; ++c) delta -= j * (trial[c] - spin[c]) * field[c];
    if (delta <= 0.0 || uniform(rng) < std::exp(-beta * delta)) {
      std::copy(trial.begin(), trial.end(), spin.begin());
      stats.energy_change += delta;
      ++stats.accepted;
    }
  }

  if (n > 1) lat.renormalize();
  if (proposal.adapt && n > 1 && stats.attempted > 0) {
    const double rate = static_cast<double>(stats.accepted) / static_cast<double>(stats.attempted);
    const double factor = std::clamp(rate / proposal.target_acceptance, 0.5, 2.0);
    proposal.step = std::clamp(proposal.step * factor, proposal.min_step,
                               proposal.full_sphere_step * 1.01);
  }
  return stats;
}

ClusterStats wolff_update(SpinLattice& lat, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::Domain, "temperature must be positive");
  const double beta = 1.0 / temperature;
  const double j = lat.coupling();
  const std::size_t n = lat.ncomp();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, lat.site_count() - 1);

  std::vector<double> r(n, 0.0);
  if (n == 1) {
    r[0] = 1.0;
  } else {
    random_unit(r, rng);
  }

  // Projection r.s of each cluster member before its reflection.
  std::vector<double> projection(lat.site_count(), 0.0);
  std::vector<char> in_cluster(lat.site_count(), 0);
  std::vector<std::size_t> members;
  std::vector<std::size_t> stack;

  auto reflect = [&](std::size_t site) {
    auto s = lat.spin(site);
    const double p = dot(r, s);
    projection[site] = p;
    for (std::size_t c = 0; c < n; ++c) s[c] -= 2.0 * p * r[c];
    in_cluster[site] = 1;
    members.push_back(site);
    stack.push_back(site);
  };

  reflect(pick(rng));
  while (!stack.empty()) {
    const std::size_t x = stack.back();
    stack.pop_back();
    for (std::size_t a = 0; a < lat.dim(); ++a) {
      for (bool fwd : {true, false}) {
        const std::size_t y = lat.neighbor(x, a, fwd);
        if (in_cluster[y]) continue;
        const double arg = -2.0 * beta * j * projection[x] * dot(r, lat.spin(y));
        if (arg >= 0.0) continue;
        if (uniform(rng) < 1.0 - std::exp(arg)) reflect(y);
      }
    }
  }

  // Reflection preserves bonds inside the cluster; only boundary bonds change.
  ClusterStats stats;
  stats.cluster_size = members.size();
  for (std::size_t x : members) {
    for (std::size_t a = 0; a < lat.dim(); ++a) {
      for (bool fwd : {true, false}) {
        const std::size_t y = lat.neighbor(x, a, fwd);
        if (in_cluster[y]) continue;
        stats.energy_change += 2.0 * j * projection[x] * dot(r, lat.spin(y));
      }
    }
  }
  if (n > 1) {
    for (std::size_t x : members) {
      auto v = lat.spin(x);
      const double inv = 1.0 / std::sqrt(dot(v, v));
      for (auto& c : v) c *= inv;
    }
  }
  return stats;
}

Sampler parse_sampler(const std::string& name) {
  if (name == "metropolis") return Sampler::Metropolis;
  if (name == "wolff") return Sampler::Wolff;
  throw Error(ErrorKind::Validation, "unknown sampler '" + name + "' (metropolis or wolff)");
}

std::string to_string(Sampler s) { return s == Sampler::Wolff ? "wolff" : "metropolis"; }

ObservableSeries run_simulation(const SimulationConfig& config,
                                const MeasurementHook& on_measurement) {
  if (!(config.temperature > 0.0) || !std::isfinite(config.temperature)) {
    throw Error(ErrorKind::Domain, "temperature must be positive and finite");
  }
  if (config.measurement_sweeps == 0) {
    throw Error(ErrorKind::Validation, "measurement_sweeps must be positive");
  }
  if (config.dim == 0 || config.side < 2 || config.ncomp == 0) {
    throw Error(ErrorKind::Domain, "need dim >= 1, side >= 2, ncomp >= 1");
  }
  const std::size_t sites = checked_site_count(config.dim, config.side);
  if (sites > config.max_sites) {
    throw Error(ErrorKind::Capacity, "lattice has " + std::to_string(sites) +
                                         " sites, cap is " + std::to_string(config.max_sites));
  }

  Rng rng = make_chain_rng(config.seed, config.chain_index);
  SpinLattice lat(config.dim, config.side, config.ncomp, config.coupling);
  if (config.start == Start::Hot) lat.randomize(rng);
  double energy = lattice_energy(lat);

  MetropolisProposal proposal;
  std::size_t attempted = 0, accepted = 0;
  std::size_t clusters = 0, cluster_sites = 0;

  // Wolff: during thermalization a sweep runs clusters until their sizes add
  // up to the site count. Measuring at that data-dependent stopping point
  // biases toward ordered states (it tends to end right after a large
  // cluster), so measurement sweeps use a fixed cluster count derived from
  // the thermalization mean.
  std::size_t therm_clusters = 0, therm_cluster_sites = 0;
  std::size_t clusters_per_sweep = 0;

  auto sweep = [&](bool measuring) {
    if (config.sampler == Sampler::Metropolis) {
      proposal.adapt = !measuring;
      const auto st = metropolis_sweep(lat, config.temperature, rng, proposal);
      energy += st.energy_change;
      if (measuring) {
        attempted += st.attempted;
        accepted += st.accepted;
      }
    } else if (!measuring) {
      std::size_t flipped = 0;
      while (flipped < sites) {
        const auto st = wolff_update(lat, config.temperature, rng);
        energy += st.energy_change;
        flipped += st.cluster_size;
        ++therm_clusters;
        therm_cluster_sites += st.cluster_size;
      }
    } else {
      for (std::size_t k = 0; k < clusters_per_sweep; ++k) {
        const auto st = wolff_update(lat, config.temperature, rng);
        energy += st.energy_change;
        ++clusters;
        cluster_sites += st.cluster_size;
      }
    }
  };

  std::size_t sweeps_done = 0;
  auto check_energy = [&]() {
    ++sweeps_done;
    if (config.energy_check_interval == 0 || sweeps_done % config.energy_check_interval != 0) return;
    const double exact = lattice_energy(lat);
    if (std::abs(exact - energy) > 1e-8 * static_cast<double>(sites)) {
      throw Error(ErrorKind::Data, "tracked energy drifted from recomputed energy by " +
                                       std::to_string(exact - energy));
    }
    energy = exact;
  };

  for (std::size_t i = 0; i < config.thermalization_sweeps; ++i) {
    sweep(false);
    check_energy();
  }

  if (config.sampler == Sampler::Wolff) {
    if (therm_clusters == 0) sweep(false);
    const double mean_size =
        static_cast<double>(therm_cluster_sites) / static_cast<double>(therm_clusters);
    clusters_per_sweep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(sites) / mean_size)));
  }

  ObservableSeries series;
  series.temperature = config.temperature;
  series.site_count = sites;
  series.ncomp = config.ncomp;
  series.thermalization_sweeps = config.thermalization_sweeps;
  series.measurement_sweeps = config.measurement_sweeps;
  series.seed = config.seed;
  series.energies.reserve(config.measurement_sweeps);
  series.magnetizations.reserve(config.measurement_sweeps * config.ncomp);

  for (std::size_t i = 0; i < config.measurement_sweeps; ++i) {
    sweep(true);
    check_energy();
    series.energies.push_back(energy);
    const auto m = magnetization(lat);
    series.magnetizations.insert(series.magnetizations.end(), m.begin(), m.end());
    if (on_measurement) on_measurement(lat);
  }
  if (attempted > 0) series.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(attempted);
  if (clusters > 0) series.mean_cluster_size = static_cast<double>(cluster_sites) / static_cast<double>(clusters);
  return series;
}

}  // namespace onphase::lattice
