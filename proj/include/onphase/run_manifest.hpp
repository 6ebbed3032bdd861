#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace onphase::ingest {

struct Prompt {
  std::string id;
  std::string text;

  bool operator==(const Prompt&) const = default;
};

/// Parameters of one temperature sweep against a completion endpoint.
struct SweepConfig {
  std::string endpoint_url;
  std::string model_id;
  std::vector<double> temperatures;
  std::vector<Prompt> prompts;
  int max_tokens = 1024;
  int generations_per_cell = 1;
  int request_parallelism = 4;
  std::int64_t seed = 0;
  int max_retries = 3;
  int backoff_ms = 200;
  double timeout_s = 600.0;
  std::string api_key_env = "ONPHASE_API_KEY";

  bool operator==(const SweepConfig&) const = default;
};

/// Default grid 0.1, 0.2, ..., 2.0.
std::vector<double> default_temperature_grid();

/// Throws a validation error for negative or unsorted temperatures, empty
/// prompts, duplicate prompt ids and nonpositive counts.
void validate(const SweepConfig& config);

enum class CellStatus { Completed, Failed };

struct GenerationRecord {
  std::string prompt_id;
  double temperature = 0.0;
  int replicate = 0;
  std::string request_id;
  CellStatus status = CellStatus::Completed;
  std::optional<std::vector<std::int64_t>> token_ids;
  std::string text;
  bool needs_tokenization = false;
  int attempts = 0;
  std::string error;

  bool operator==(const GenerationRecord&) const = default;
};

struct RunManifest {
  SweepConfig config;
  std::string started_at;
  std::string finished_at;
  std::vector<GenerationRecord> records;

  bool operator==(const RunManifest&) const = default;
};

/// `<prompt_id>_T<temperature>_r<replicate>.json`, with characters outside
/// [A-Za-z0-9._-] in the prompt id replaced by '_'.
std::string generation_file_name(const GenerationRecord& record);

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kGenerationsDir = "generations";

/// Writes `root/manifest.json` and one file per record under
/// `root/generations/`. Returns `root`.
std::filesystem::path save_run(const RunManifest& manifest,
                               const std::filesystem::path& root);
RunManifest load_run(const std::filesystem::path& root);

SweepConfig load_sweep_config(const std::filesystem::path& path);

}  // namespace onphase::ingest
