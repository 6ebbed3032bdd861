#include "onphase/run_manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "onphase/error.hpp"

namespace onphase::ingest {

namespace {

using nlohmann::json;

json to_json(const SweepConfig& c) {
  json prompts = json::array();
  for (const auto& p : c.prompts) prompts.push_back({{"id", p.id}, {"text", p.text}});
  return {{"endpoint_url", c.endpoint_url},
          {"model_id", c.model_id},
          {"temperatures", c.temperatures},
          {"prompts", prompts},
          {"max_tokens", c.max_tokens},
          {"generations_per_cell", c.generations_per_cell},
          {"request_parallelism", c.request_parallelism},
          {"seed", c.seed},
          {"max_retries", c.max_retries},
          {"backoff_ms", c.backoff_ms},
          {"timeout_s", c.timeout_s},
          {"api_key_env", c.api_key_env}};
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

SweepConfig config_from_json(const json& j, const std::filesystem::path& base) {
  SweepConfig c;
  c.endpoint_url = j.at("endpoint_url").get<std::string>();
  c.model_id = j.at("model_id").get<std::string>();
  if (j.contains("temperatures")) {
    c.temperatures = j.at("temperatures").get<std::vector<double>>();
  } else {
    c.temperatures = default_temperature_grid();
  }
  for (const auto& p : j.at("prompts")) {
    Prompt prompt;
    prompt.id = p.at("id").get<std::string>();
    if (p.contains("text")) {
      prompt.text = p.at("text").get<std::string>();
    } else if (p.contains("file")) {
      const auto file = base / p.at("file").get<std::string>();
      std::ifstream in(file);
      if (!in) throw Error(ErrorKind::Io, "cannot read prompt file " + file.string());
      prompt.text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    } else {
      throw Error(ErrorKind::Validation, "prompt '" + prompt.id + "' needs text or file");
    }
    c.prompts.push_back(std::move(prompt));
  }
  read_opt(j, "max_tokens", c.max_tokens);
  read_opt(j, "generations_per_cell", c.generations_per_cell);
  read_opt(j, "request_parallelism", c.request_parallelism);
  read_opt(j, "seed", c.seed);
  read_opt(j, "max_retries", c.max_retries);
  read_opt(j, "backoff_ms", c.backoff_ms);
  read_opt(j, "timeout_s", c.timeout_s);
  read_opt(j, "api_key_env", c.api_key_env);
  return c;
}

const char* status_name(CellStatus s) {
  return s == CellStatus::Completed ? "completed" : "failed";
}

json to_json(const GenerationRecord& r) {
  json j = {{"prompt_id", r.prompt_id},
            {"temperature", r.temperature},
            {"replicate", r.replicate},
            {"request_id", r.request_id},
            {"status", status_name(r.status)},
            {"text", r.text},
            {"needs_tokenization", r.needs_tokenization},
            {"attempts", r.attempts},
            {"error", r.error}};
  j["token_ids"] = r.token_ids ? json(*r.token_ids) : json(nullptr);
  return j;
}

GenerationRecord record_from_json(const json& j) {
  GenerationRecord r;
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  r.replicate = j.at("replicate").get<int>();
  r.request_id = j.at("request_id").get<std::string>();
  const auto status = j.at("status").get<std::string>();
  if (status == "completed") {
    r.status = CellStatus::Completed;
  } else if (status == "failed") {
    r.status = CellStatus::Failed;
  } else {
    throw Error(ErrorKind::Parse, "unknown cell status '" + status + "'");
  }
  if (!j.at("token_ids").is_null()) {
    r.token_ids = j.at("token_ids").get<std::vector<std::int64_t>>();
  }
  r.text = j.at("text").get<std::string>();
  r.needs_tokenization = j.at("needs_tokenization").get<bool>();
  r.attempts = j.at("attempts").get<int>();
  r.error = j.at("error").get<std::string>();
  return r;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

}  // namespace

std::vector<double> default_temperature_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(i / 10.0);
  return grid;
}

void validate(const SweepConfig& c) {
  if (c.temperatures.empty()) throw Error(ErrorKind::Validation, "temperature grid is empty");
  for (std::size_t i = 0; i < c.temperatures.size(); ++i) {
    const double t = c.temperatures[i];
    if (!std::isfinite(t) || t < 0.0) {
      throw Error(ErrorKind::Validation, "temperature " + std::to_string(t) + " is negative or non-finite");
    }
    if (i > 0 && !(t > c.temperatures[i - 1])) {
      throw Error(ErrorKind::Validation, "temperatures must be strictly ascending");
    }
  }
  if (c.prompts.empty()) throw Error(ErrorKind::Validation, "no prompts configured");
  std::set<std::string> ids;
  for (const auto& p : c.prompts) {
    if (p.id.empty()) throw Error(ErrorKind::Validation, "prompt with empty id");
    if (!ids.insert(p.id).second) throw Error(ErrorKind::Validation, "duplicate prompt id '" + p.id + "'");
  }
  if (c.max_tokens < 1) throw Error(ErrorKind::Validation, "max_tokens must be >= 1");
  if (c.generations_per_cell < 1) throw Error(ErrorKind::Validation, "generations_per_cell must be >= 1");
  if (c.request_parallelism < 1) throw Error(ErrorKind::Validation, "request_parallelism must be >= 1");
  if (c.max_retries < 0 || c.backoff_ms < 0) throw Error(ErrorKind::Validation, "retry settings must be nonnegative");
}

std::string generation_file_name(const GenerationRecord& record) {
  std::string id = record.prompt_id;
  for (char& ch : id) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '.' || ch == '_' || ch == '-';
    if (!ok) ch = '_';
  }
  char temp[48];
  std::snprintf(temp, sizeof(temp), "%.6f", record.temperature);
  return id + "_T" + temp + "_r" + std::to_string(record.replicate) + ".json";
}

std::filesystem::path save_run(const RunManifest& manifest,
                               const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(root, ec) && !fs::is_directory(root, ec)) {
    throw Error(ErrorKind::Io, root.string() + " exists and is not a directory");
  }
  fs::create_directories(root / kGenerationsDir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + (root / kGenerationsDir).string() + ": " + ec.message());

  json files = json::array();
  std::set<std::string> seen;
  for (const auto& r : manifest.records) {
    const auto name = generation_file_name(r);
    if (!seen.insert(name).second) {
      throw Error(ErrorKind::Validation, "two generation records map to " + name);
    }
    write_json(to_json(r), root / kGenerationsDir / name);
    files.push_back(std::string(kGenerationsDir) + "/" + name);
  }
  json m = {{"format", "onphase-run"},
            {"version", 1},
            {"config", to_json(manifest.config)},
            {"started_at", manifest.started_at},
            {"finished_at", manifest.finished_at},
            {"generations", files}};
  write_json(m, root / kManifestFile);
  return root;
}

RunManifest load_run(const std::filesystem::path& root) {
  const auto manifest_path = root / kManifestFile;
  if (!std::filesystem::exists(manifest_path)) {
    throw Error(ErrorKind::Dependency, root.string() + " has no " + kManifestFile +
                                           " (run the sweep first)");
  }
  const json m = read_json(manifest_path);
  RunManifest out;
  try {
    out.config = config_from_json(m.at("config"), root);
    out.started_at = m.at("started_at").get<std::string>();
    out.finished_at = m.at("finished_at").get<std::string>();
    for (const auto& f : m.at("generations")) {
      out.records.push_back(record_from_json(read_json(root / f.get<std::string>())));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, manifest_path.string() + ": " + e.what());
  }
  return out;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    SweepConfig c = config_from_json(j, path.parent_path());
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

}  // namespace onphase::ingest
