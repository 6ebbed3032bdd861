#include "onphase/energy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "onphase/error.hpp"
#include "onphase/format.hpp"

namespace onphase::energy {

std::string to_string(const EnergyConvention& conv) {
  std::string s = conv.sign == Sign::AsWritten ? "as-written" : "hamiltonian";
  s += conv.diagonal == Diagonal::Include ? "/include" : "/exclude";
  s += conv.row_normalize ? "/normalized" : "/raw";
  return s;
}

EnergyConvention parse_convention(const std::string& text) {
  EnergyConvention conv;
  std::istringstream in(text);
  std::string part;
  int field = 0;
  while (std::getline(in, part, '/')) {
    if (field == 0 && part == "as-written") conv.sign = Sign::AsWritten;
    else if (field == 0 && part == "hamiltonian") conv.sign = Sign::Hamiltonian;
    else if (field == 1 && part == "include") conv.diagonal = Diagonal::Include;
    else if (field == 1 && part == "exclude") conv.diagonal = Diagonal::Exclude;
    else if (field == 2 && part == "normalized") conv.row_normalize = true;
    else if (field == 2 && part == "raw") conv.row_normalize = false;
    else throw Error(ErrorKind::Validation, "bad energy convention '" + text +
                                                "' (expected sign/diagonal/normalization, "
                                                "e.g. hamiltonian/exclude/normalized)");
    ++field;
  }
  if (field != 3) {
    throw Error(ErrorKind::Validation, "bad energy convention '" + text + "'");
  }
  return conv;
}

double sequence_energy(const ingest::EmbeddingSequence& seq,
                       const EnergyConvention& conv) {
  const std::size_t n = seq.dim();
  const std::size_t len = seq.length();

  // sum_{s,t} t_s . t_t = |sum_s t_s|^2 and sum_s |t_s|^2 is the diagonal,
  // so the double sum costs O(L N).
  std::vector<double> total(n, 0.0);
  double diagonal = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const auto v = seq.vector(i);
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    double scale = 1.0;
    if (conv.row_normalize) {
      if (!(norm2 > 0.0)) {
        throw Error(ErrorKind::Degenerate,
                    "zero-norm vector at position " + std::to_string(i));
      }
      scale = 1.0 / std::sqrt(norm2);
      norm2 = 1.0;
    }
    for (std::size_t k = 0; k < n; ++k) total[k] += scale * v[k];
    diagonal += norm2;
  }
  double full = 0.0;
  for (double x : total) full += x * x;

  double sum = conv.diagonal == Diagonal::Include ? full : full - diagonal;
  if (conv.sign == Sign::Hamiltonian) sum = -sum;
  return sum / static_cast<double>(len);
}

namespace {

struct Moments {
  double mean;
  double sd;  // sample standard deviation, 0 for a single value
};

Moments moments(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

EnergyCurve energy_curve(std::vector<EnergySample> samples) {
  if (samples.empty()) throw Error(ErrorKind::EmptyInput, "no energy samples");
  std::map<double, std::map<std::string, std::vector<double>>> grouped;
  for (const auto& s : samples) {
    if (!std::isfinite(s.energy) || !std::isfinite(s.temperature)) {
      throw Error(ErrorKind::Data, "non-finite energy sample for prompt '" + s.prompt_id + "'");
    }
    grouped[s.temperature][s.prompt_id].push_back(s.energy);
  }

  EnergyCurve curve;
  for (auto& [temperature, by_prompt] : grouped) {
    CurvePoint p;
    p.temperature = temperature;
    std::vector<double> prompt_means;
    std::vector<double> all;
    for (auto& [prompt, energies] : by_prompt) {
      p.count += energies.size();
      prompt_means.push_back(moments(energies).mean);
      all.insert(all.end(), energies.begin(), energies.end());
    }
    const Moments across = moments(prompt_means);
    p.mean_energy = across.mean;
    if (prompt_means.size() > 1) {
      p.std_error = across.sd / std::sqrt(static_cast<double>(prompt_means.size()));
    } else {
      p.std_error = moments(all).sd / std::sqrt(static_cast<double>(all.size()));
    }
    curve.points.push_back(p);
  }
  return curve;
}

std::vector<HeatPoint> specific_heat_curve(const EnergyCurve& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 3) {
    throw Error(ErrorKind::InsufficientData, "specific heat needs at least 3 curve points");
  }
  std::vector<HeatPoint> out;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const double dt = pts[i + 1].temperature - pts[i - 1].temperature;
    out.push_back({pts[i].temperature,
                   (pts[i + 1].mean_energy - pts[i - 1].mean_energy) / dt});
  }
  return out;
}

double transition_gap(const EnergyCurve& curve, double critical_temperature,
                      double tail_fraction) {
  const auto& pts = curve.points;
  if (pts.empty()) throw Error(ErrorKind::EmptyInput, "empty curve");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
    throw Error(ErrorKind::Domain, "tail_fraction must lie in (0, 1]");
  }
  if (!(critical_temperature >= pts.front().temperature &&
        critical_temperature <= pts.back().temperature)) {
    throw Error(ErrorKind::Range, "T_c = " + format_double(critical_temperature) +
                                      " lies outside the curve's temperature range");
  }
  if (!(pts.back().temperature > critical_temperature)) {
    throw Error(ErrorKind::Range, "no curve points above T_c");
  }

  double at_tc = pts.front().mean_energy;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto& a = pts[i];
    const auto& b = pts[i + 1];
    if (critical_temperature >= a.temperature && critical_temperature <= b.temperature) {
      const double w = (critical_temperature - a.temperature) / (b.temperature - a.temperature);
      at_tc = a.mean_energy + w * (b.mean_energy - a.mean_energy);
      break;
    }
  }

  const auto tail = static_cast<std::size_t>(
      std::ceil(tail_fraction * static_cast<double>(pts.size()) - 1e-12));
  double sum = 0.0;
  for (std::size_t i = pts.size() - tail; i < pts.size(); ++i) sum += pts[i].mean_energy;
  return at_tc - sum / static_cast<double>(tail);
}

std::string to_string(Verdict v) {
  return v == Verdict::IncreaseParameters ? "IncreaseParameters" : "CleanData";
}

Verdict parse_verdict(const std::string& text) {
  if (text == "IncreaseParameters") return Verdict::IncreaseParameters;
  if (text == "CleanData") return Verdict::CleanData;
  throw Error(ErrorKind::Parse, "unknown verdict '" + text + "'");
}

Verdict diagnose_capacity(double gap, double tolerance) {
  if (!std::isfinite(gap)) throw Error(ErrorKind::Validation, "gap must be finite");
  if (!std::isfinite(tolerance) || tolerance < 0.0) {
    throw Error(ErrorKind::Validation, "tolerance must be finite and nonnegative");
  }
  return gap > tolerance ? Verdict::IncreaseParameters : Verdict::CleanData;
}

std::string curve_csv(const EnergyCurve& curve) {
  std::string out = "temperature,mean_energy,stderr,count\n";
  for (const auto& p : curve.points) {
    out += format_double(p.temperature) + "," + format_double(p.mean_energy) + "," +
           format_double(p.std_error) + "," + std::to_string(p.count) + "\n";
  }
  return out;
}

void write_curve_csv(const EnergyCurve& curve, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << curve_csv(curve);
  if (!f) throw Error(ErrorKind::Io, "short write to " + path.string());
}

EnergyCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::EmptyInput, path.string() + " is empty");

  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      while (!col.empty() && (col.back() == '\r' || col.back() == ' ')) col.pop_back();
      header.push_back(col);
    }
  }
  auto find = [&](std::initializer_list<const char*> names) -> int {
    for (const char* n : names) {
      auto it = std::find(header.begin(), header.end(), n);
      if (it != header.end()) return static_cast<int>(it - header.begin());
    }
    return -1;
  };
  const int ti = find({"temperature"});
  const int ei = find({"mean_energy", "mean_energy_per_site"});
  const int si = find({"stderr"});
  const int ci = find({"count"});
  if (ti < 0 || ei < 0) {
    throw Error(ErrorKind::Parse, path.string() + ": needs temperature and mean_energy columns");
  }

  EnergyCurve curve;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    auto num = [&](int idx) {
      if (idx >= static_cast<int>(cells.size())) {
        throw Error(ErrorKind::Parse, path.string() + " line " + std::to_string(lineno) + ": missing column");
      }
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[static_cast<std::size_t>(idx)], &used);
        return v;
      } catch (const std::exception&) {
        throw Error(ErrorKind::Parse, path.string() + " line " + std::to_string(lineno) +
                                          ": not a number '" + cells[static_cast<std::size_t>(idx)] + "'");
      }
    };
    CurvePoint p;
    p.temperature = num(ti);
    p.mean_energy = num(ei);
    p.std_error = si >= 0 ? num(si) : 0.0;
    p.count = ci >= 0 ? static_cast<std::size_t>(num(ci)) : 1;
    if (!std::isfinite(p.temperature) || !std::isfinite(p.mean_energy) || !std::isfinite(p.std_error)) {
      throw Error(ErrorKind::Data, path.string() + " line " + std::to_string(lineno) + ": non-finite value");
    }
    if (!curve.points.empty() && !(p.temperature > curve.points.back().temperature)) {
      throw Error(ErrorKind::Validation, path.string() + " line " + std::to_string(lineno) +
                                             ": temperatures must be strictly increasing");
    }
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace onphase::energy
