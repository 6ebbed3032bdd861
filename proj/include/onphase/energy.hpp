#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "onphase/ingest.hpp"

namespace onphase::energy {

enum class Sign { AsWritten, Hamiltonian };
enum class Diagonal { Include, Exclude };

/// How the pairwise token interaction is turned into an energy.
///
/// AsWritten + Include is the literal double sum (1/L) sum_{s,t} t_s . t_t,
/// which is never negative. The default flips the sign, drops the s == t
/// terms and normalizes every vector, i.e. a ferromagnet of unit spins.
struct EnergyConvention {
  Sign sign = Sign::Hamiltonian;
  Diagonal diagonal = Diagonal::Exclude;
  bool row_normalize = true;

  static EnergyConvention literal() {
    return {Sign::AsWritten, Diagonal::Include, false};
  }
  bool operator==(const EnergyConvention&) const = default;
};

/// "as-written/include/raw" style names used by the CLI and reports.
std::string to_string(const EnergyConvention& conv);
EnergyConvention parse_convention(const std::string& text);

double sequence_energy(const ingest::EmbeddingSequence& seq,
                       const EnergyConvention& conv = {});

struct EnergySample {
  double temperature = 0.0;
  double energy = 0.0;
  std::size_t length = 1;
  std::string prompt_id;
};

struct CurvePoint {
  double temperature = 0.0;
  double mean_energy = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;

  bool operator==(const CurvePoint&) const = default;
};

struct EnergyCurve {
  std::vector<CurvePoint> points;

  std::size_t size() const noexcept { return points.size(); }
  bool operator==(const EnergyCurve&) const = default;
};

/// Groups samples by exact temperature. Within a temperature the mean is the
/// mean of per-prompt means; the standard error is the spread of the prompt
/// means when there are several prompts and of the raw samples otherwise.
EnergyCurve energy_curve(std::vector<EnergySample> samples);

struct HeatPoint {
  double temperature;
  double specific_heat;
};

/// Central differences at interior points.
std::vector<HeatPoint> specific_heat_curve(const EnergyCurve& curve);

/// E(T_c) - E(inf), with E(T_c) linearly interpolated and E(inf) the mean of
/// the top ceil(tail_fraction * n) temperatures.
double transition_gap(const EnergyCurve& curve, double critical_temperature,
                      double tail_fraction = 0.2);

enum class Verdict { IncreaseParameters, CleanData };
std::string to_string(Verdict v);
Verdict parse_verdict(const std::string& text);

Verdict diagnose_capacity(double gap, double tolerance);

/// temperature,mean_energy,stderr,count
///
/// The reader also accepts the lattice simulator's CSV (mean_energy_per_site
/// column, no count column).
void write_curve_csv(const EnergyCurve& curve, const std::filesystem::path& path);
std::string curve_csv(const EnergyCurve& curve);
EnergyCurve read_curve_csv(const std::filesystem::path& path);

}  // namespace onphase::energy
