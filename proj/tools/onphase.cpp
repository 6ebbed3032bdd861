// onphase command line: lattice simulation, completion sweeps, analysis and
// report rendering. Errors print their kind and map to distinct exit codes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "onphase/energy.hpp"
#include "onphase/error.hpp"
#include "onphase/ingest.hpp"
#include "onphase/lattice.hpp"
#include "onphase/run_manifest.hpp"
#include "onphase/scaling.hpp"
#include "onphase/sweep.hpp"

namespace fs = std::filesystem;
using namespace onphase;

namespace {

// "1.5,2.5,3.5" or "lo:hi:step".
std::vector<double> parse_temperatures(const std::string& text) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw Error(ErrorKind::Parse, "bad temperature '" + s + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw Error(ErrorKind::Parse, "temperature range must be lo:hi:step");
    const double lo = number(parts[0]), hi = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0) || hi < lo) throw Error(ErrorKind::Validation, "temperature range needs step > 0 and hi >= lo");
    const auto n = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
    for (long long i = 0; i <= n; ++i) {
      // Round away accumulated error so grid values print cleanly.
      out.push_back(std::round((lo + step * static_cast<double>(i)) * 1e9) / 1e9);
    }
    return out;
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  if (out.empty()) throw Error(ErrorKind::Parse, "no temperatures given");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Validation:
    case ErrorKind::Parse:
    case ErrorKind::Range:
    case ErrorKind::Domain:
      return 2;
    case ErrorKind::Io:
    case ErrorKind::Format:
    case ErrorKind::InvalidHeader:
    case ErrorKind::Truncation:
    case ErrorKind::Data:
      return 3;
    case ErrorKind::Connectivity:
      return 4;
    case ErrorKind::Dependency:
      return 5;
    default:
      return 6;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-transition measurements for lattice spin models and sampled text"};
  app.require_subcommand(1);

  // simulate
  lattice::SimulationConfig sim;
  std::string sim_temps = "1.5,2.5,3.5";
  std::string sampler = "wolff";
  std::string sim_out;
  bool hot = false;
  auto* simulate = app.add_subcommand("simulate", "O(N) lattice Monte Carlo; writes a per-temperature CSV");
  simulate->add_option("--dim", sim.dim, "lattice dimension")->capture_default_str();
  simulate->add_option("--side", sim.side, "sites per axis")->capture_default_str();
  simulate->add_option("--ncomp", sim.ncomp, "spin components (1 = Ising)")->capture_default_str();
  simulate->add_option("--temps", sim_temps, "comma list or lo:hi:step")->capture_default_str();
  simulate->add_option("--sweeps", sim.measurement_sweeps, "measurement sweeps")->capture_default_str();
  simulate->add_option("--therm", sim.thermalization_sweeps, "thermalization sweeps")->capture_default_str();
  simulate->add_option("--sampler", sampler, "metropolis or wolff")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "master seed")->capture_default_str();
  simulate->add_option("--coupling", sim.coupling, "J")->capture_default_str();
  simulate->add_flag("--hot", hot, "start from random spins");
  simulate->add_option("--out", sim_out, "CSV path (stdout if omitted)");

  // sweep
  std::string sweep_config, sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "temperature sweep against a completion endpoint");
  sweep_cmd->add_option("--config", sweep_config, "sweep config JSON")->required();
  sweep_cmd->add_option("--out", sweep_out, "run directory")->required();

  // analyze
  std::string an_run, an_embeddings, an_convention = energy::to_string(energy::EnergyConvention{});
  sweep::AnalysisOptions an_opts;
  auto* analyze = app.add_subcommand("analyze", "energy curve, critical fit and diagnosis for a run");
  analyze->add_option("--run", an_run, "run directory")->required();
  analyze->add_option("--embeddings", an_embeddings, "ONEM embedding table")->required();
  analyze->add_option("--convention", an_convention, "sign/diagonal/normalization")->capture_default_str();
  analyze->add_option("--tail-fraction", an_opts.tail_fraction, "share of top temperatures used for E(inf)")
      ->capture_default_str();
  analyze->add_option("--tolerance", an_opts.tolerance, "gap tolerance for the verdict")->capture_default_str();

  // report
  std::string rep_run, rep_out;
  auto* report = app.add_subcommand("report", "render analysis.json into CSV and JSON files");
  report->add_option("--run", rep_run, "analyzed run directory")->required();
  report->add_option("--out", rep_out, "output directory")->required();

  // fit
  std::string fit_curve, fit_out;
  auto* fit = app.add_subcommand("fit", "critical-law fit of a curve CSV (sweep or simulator output)");
  fit->add_option("--curve", fit_curve, "curve CSV")->required();
  fit->add_option("--out", fit_out, "output directory for fit.json and plot.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      sim.sampler = lattice::parse_sampler(sampler);
      sim.start = hot ? lattice::Start::Hot : lattice::Start::Cold;
      std::vector<lattice::ThermoPoint> rows;
      const auto temps = parse_temperatures(sim_temps);
      for (std::size_t i = 0; i < temps.size(); ++i) {
        auto cfg = sim;
        cfg.temperature = temps[i];
        cfg.chain_index = i;
        rows.push_back(lattice::summarize(lattice::run_simulation(cfg)));
        std::fprintf(stderr, "T=%g E/site=%.6f +- %.6f\n", rows.back().temperature,
                     rows.back().mean_energy_per_site, rows.back().std_error);
      }
      const auto csv = lattice::thermo_csv(rows);
      if (sim_out.empty()) {
        std::cout << csv;
      } else {
        write_text(sim_out, csv);
      }
    } else if (*sweep_cmd) {
      const auto config = ingest::load_sweep_config(sweep_config);
      const auto manifest = sweep::run_sweep(config);
      ingest::save_run(manifest, sweep_out);
      std::size_t failed = 0, text_only = 0;
      for (const auto& r : manifest.records) {
        if (r.status == ingest::CellStatus::Failed) {
          ++failed;
          std::fprintf(stderr, "failed: %s (%s, %d attempts)\n", r.request_id.c_str(), r.error.c_str(), r.attempts);
        } else if (r.needs_tokenization) {
          ++text_only;
        }
      }
      std::fprintf(stderr, "%zu cells, %zu failed, %zu need tokenization; run written to %s\n",
                   manifest.records.size(), failed, text_only, sweep_out.c_str());
      if (failed > 0) return 1;
    } else if (*analyze) {
      an_opts.convention = energy::parse_convention(an_convention);
      const auto table = ingest::load_embedding_table(an_embeddings);
      const auto result = sweep::analyze_run(an_run, table, an_opts);
      sweep::save_report(result, fs::path(an_run) / sweep::kAnalysisFile);
      for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      if (result.fit) {
        std::fprintf(stderr, "T_c=%.4f alpha'=%.4f d_internal=%.3f gap=%.4f verdict=%s\n",
                     result.fit->critical_temperature, result.fit->alpha_prime, result.fit->d_internal,
                     *result.gap, energy::to_string(*result.verdict).c_str());
      }
    } else if (*report) {
      const auto result = sweep::load_report(fs::path(rep_run) / sweep::kAnalysisFile);
      for (const auto& p : sweep::render_report(result, rep_out)) std::cout << p.string() << '\n';
    } else if (*fit) {
      const auto curve = energy::read_curve_csv(fit_curve);
      const auto f = scaling::fit_critical(curve);
      write_text(fs::path(fit_out) / sweep::kFitFile, scaling::fit_report_json(curve, f));
      write_text(fs::path(fit_out) / sweep::kPlotFile, scaling::branch_plot_csv(curve, f));
      std::fprintf(stderr, "T_c=%.4f alpha=%.4f alpha'=%.4f d_internal=%.3f\n", f.critical_temperature, f.alpha,
                   f.alpha_prime, f.d_internal);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 6;
  }
  return 0;
}
