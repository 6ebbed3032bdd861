#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "onphase/energy.hpp"
#include "onphase/ingest.hpp"
#include "onphase/run_manifest.hpp"
#include "onphase/scaling.hpp"

namespace onphase::sweep {

/// JSON body of one completion request. Token-level detail is requested both
/// as `return_token_ids` and `logprobs`; servers ignore what they do not know.
std::string completion_request_body(const ingest::SweepConfig& config,
                                    const std::string& prompt_text,
                                    double temperature, std::int64_t seed);

struct CompletionResult {
  std::optional<std::vector<std::int64_t>> token_ids;
  std::string text;
};

/// Token ids are taken from `choices[0].token_ids`, or from
/// `choices[0].logprobs.tokens` when every entry reads "token_id:<n>".
CompletionResult parse_completion_response(const std::string& body);

/// Issues every (prompt, temperature, replicate) request with at most
/// `request_parallelism` in flight. Failures after the retry budget become
/// failed records; the run continues. Records come back sorted by cell key.
ingest::RunManifest run_sweep(const ingest::SweepConfig& config);

struct AnalysisOptions {
  energy::EnergyConvention convention;
  double tail_fraction = 0.2;
  double tolerance = 0.1;
  scaling::CriticalFitOptions fit;
  double intrinsic_reference_temperature = 1.0;
  std::size_t max_intrinsic_points = 4000;
  std::uint64_t subsample_seed = 0;
};

struct AnalysisReport {
  std::string model_id;
  energy::EnergyConvention convention;
  energy::EnergyCurve curve;
  std::optional<scaling::CriticalFit> fit;
  std::optional<double> gap;
  std::optional<energy::Verdict> verdict;
  double tail_fraction = 0.2;
  double tolerance = 0.1;
  std::optional<double> intrinsic_dimension_at_t1;
  std::vector<std::string> warnings;
};

/// Name of the token dump the model adapter writes into the run directory
/// for text-only runs.
inline constexpr const char* kTokenDumpFile = "tokens.jsonl";
inline constexpr const char* kAnalysisFile = "analysis.json";

/// energies -> curve -> critical fit -> internal dimension -> gap -> verdict.
/// Fit failures are reported as warnings with the fit fields left empty.
AnalysisReport analyze_run(const std::filesystem::path& run_dir,
                           const ingest::EmbeddingTable& table,
                           const AnalysisOptions& options = {});

std::string report_to_json(const AnalysisReport& report);
AnalysisReport report_from_json(const std::string& text);
void save_report(const AnalysisReport& report, const std::filesystem::path& path);
AnalysisReport load_report(const std::filesystem::path& path);

inline constexpr const char* kCurveFile = "curve.csv";
inline constexpr const char* kFitFile = "fit.json";
inline constexpr const char* kDiagnosisFile = "diagnosis.json";
inline constexpr const char* kPlotFile = "plot.csv";
inline constexpr const char* kWarningsFile = "warnings.txt";

/// Full report: curve.csv, fit.json, diagnosis.json, plot.csv. Without a fit:
/// curve.csv, plot.csv and warnings.txt.
std::vector<std::filesystem::path> render_report(const AnalysisReport& report,
                                                 const std::filesystem::path& out_dir);

}  // namespace onphase::sweep
