#include "onphase/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "onphase/error.hpp"
#include "onphase/format.hpp"
#include "onphase/interaction_graph.hpp"

namespace onphase::sweep {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::Validation, "endpoint_url '" + url + "' has no scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/v1/completions"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::unique_ptr<httplib::Client> make_client(const Endpoint& ep, double timeout_s) {
  auto client = std::make_unique<httplib::Client>(ep.origin);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client->set_connection_timeout(5, 0);
  client->set_read_timeout(secs, usecs);
  client->set_write_timeout(secs, usecs);
  return client;
}

std::string temperature_tag(double t) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return buf;
}

}  // namespace

std::string completion_request_body(const ingest::SweepConfig& config,
                                    const std::string& prompt_text, double temperature,
                                    std::int64_t seed) {
  ordered_json j;
  j["model"] = config.model_id;
  j["prompt"] = prompt_text;
  j["temperature"] = temperature;
  j["max_tokens"] = config.max_tokens;
  j["seed"] = seed;
  j["logprobs"] = 1;
  j["return_token_ids"] = true;
  j["return_tokens_as_token_ids"] = true;
  return j.dump();
}

CompletionResult parse_completion_response(const std::string& body) {
  CompletionResult out;
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("completion response is not JSON: ") + e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw Error(ErrorKind::Parse, "completion response has no choices");
  }
  const auto& choice = j["choices"][0];
  if (choice.contains("text") && choice["text"].is_string()) out.text = choice["text"].get<std::string>();
  if (choice.contains("token_ids") && choice["token_ids"].is_array()) {
    out.token_ids = choice["token_ids"].get<std::vector<std::int64_t>>();
    return out;
  }
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("tokens") && choice["logprobs"]["tokens"].is_array()) {
    std::vector<std::int64_t> ids;
    for (const auto& tok : choice["logprobs"]["tokens"]) {
      if (!tok.is_string()) return out;
      const auto s = tok.get<std::string>();
      constexpr std::string_view prefix = "token_id:";
      if (s.rfind(prefix, 0) != 0) return out;
      try {
        ids.push_back(std::stoll(s.substr(prefix.size())));
      } catch (const std::exception&) {
        return out;
      }
    }
    out.token_ids = std::move(ids);
  }
  return out;
}

ingest::RunManifest run_sweep(const ingest::SweepConfig& config) {
  ingest::validate(config);
  const Endpoint ep = split_url(config.endpoint_url);

  {
    auto probe = make_client(ep, 10.0);
    auto res = probe->Get("/");
    if (!res) {
      throw Error(ErrorKind::Connectivity, "cannot reach " + ep.origin + ": " +
                                               httplib::to_string(res.error()));
    }
  }

  std::string auth;
  if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
    auth = std::string("Bearer ") + key;
  }

  struct Cell {
    const ingest::Prompt* prompt;
    double temperature;
    int replicate;
  };
  std::vector<Cell> cells;
  for (const auto& p : config.prompts)
    for (double t : config.temperatures)
      for (int r = 0; r < config.generations_per_cell; ++r) cells.push_back({&p, t, r});

  ingest::RunManifest manifest;
  manifest.config = config;
  manifest.started_at = utc_timestamp();
  manifest.records.resize(cells.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    auto client = make_client(ep, config.timeout_s);
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      ingest::GenerationRecord rec;
      rec.prompt_id = cell.prompt->id;
      rec.temperature = cell.temperature;
      rec.replicate = cell.replicate;
      rec.request_id = config.model_id + ":" + cell.prompt->id + ":T" +
                       temperature_tag(cell.temperature) + ":r" + std::to_string(cell.replicate);
      const auto body = completion_request_body(config, cell.prompt->text, cell.temperature,
                                                config.seed + static_cast<std::int64_t>(i));
      httplib::Headers headers = {{"X-Request-Id", rec.request_id}};
      if (!auth.empty()) headers.emplace("Authorization", auth);

      rec.status = ingest::CellStatus::Failed;
      for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
          std::this_thread::sleep_for(std::chrono::milliseconds(
              static_cast<long long>(config.backoff_ms) << (attempt - 1)));
        }
        rec.attempts = attempt + 1;
        auto res = client->Post(ep.path, headers, body, "application/json");
        if (!res) {
          rec.error = "transport: " + httplib::to_string(res.error());
          continue;
        }
        if (res->status < 200 || res->status >= 300) {
          rec.error = "HTTP " + std::to_string(res->status);
          const bool retryable = res->status >= 500 || res->status == 429 || res->status == 408;
          if (!retryable) break;
          continue;
        }
        try {
          auto parsed = parse_completion_response(res->body);
          rec.text = std::move(parsed.text);
          rec.token_ids = std::move(parsed.token_ids);
          rec.needs_tokenization = !rec.token_ids.has_value();
          rec.status = ingest::CellStatus::Completed;
          rec.error.clear();
        } catch (const Error& e) {
          rec.error = e.what();
        }
        break;
      }
      manifest.records[i] = std::move(rec);
    }
  };

  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(config.request_parallelism), cells.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::sort(manifest.records.begin(), manifest.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.prompt_id, a.temperature, a.replicate) <
           std::tie(b.prompt_id, b.temperature, b.replicate);
  });
  manifest.finished_at = utc_timestamp();
  return manifest;
}

AnalysisReport analyze_run(const std::filesystem::path& run_dir,
                           const ingest::EmbeddingTable& table,
                           const AnalysisOptions& options) {
  const auto manifest = ingest::load_run(run_dir);

  AnalysisReport report;
  report.model_id = manifest.config.model_id;
  report.convention = options.convention;
  report.tail_fraction = options.tail_fraction;
  report.tolerance = options.tolerance;

  std::vector<ingest::TokenSequence> sequences;
  const auto dump_path = run_dir / kTokenDumpFile;
  if (std::filesystem::exists(dump_path)) {
    sequences = ingest::load_token_dump(dump_path);
  } else {
    std::size_t failed = 0;
    for (const auto& rec : manifest.records) {
      if (rec.status != ingest::CellStatus::Completed) {
        ++failed;
        continue;
      }
      if (!rec.token_ids) {
        throw Error(ErrorKind::Dependency,
                    "generation " + rec.request_id +
                        " has text only; run the model adapter first: tokenize --model " +
                        manifest.config.model_id + " --in <run>/generations --out " +
                        dump_path.string());
      }
      sequences.push_back({*rec.token_ids, rec.temperature, rec.prompt_id, manifest.config.model_id});
    }
    if (failed > 0) report.warnings.push_back(std::to_string(failed) + " failed generation(s) skipped");
  }
  try {
    ingest::validate_token_ids(sequences, table);
  } catch (const Error& e) {
    throw Error(ErrorKind::Dependency,
                std::string(e.what()) + "; the embedding table does not match the tokenizer "
                                        "(re-run extract-embeddings for model " +
                    manifest.config.model_id + ")");
  }

  std::vector<energy::EnergySample> samples;
  std::size_t empty = 0;
  for (const auto& seq : sequences) {
    if (seq.token_ids.empty()) {
      ++empty;
      continue;
    }
    const auto emb = ingest::lookup_embeddings(table, seq);
    samples.push_back({seq.temperature, energy::sequence_energy(emb, options.convention),
                       seq.token_ids.size(), seq.prompt_id});
  }
  if (empty > 0) report.warnings.push_back(std::to_string(empty) + " empty generation(s) skipped");
  if (samples.empty()) {
    throw Error(ErrorKind::Dependency, run_dir.string() + " contains no usable generations");
  }
  report.curve = energy::energy_curve(std::move(samples));

  try {
    report.fit = scaling::fit_critical(report.curve, options.fit);
  } catch (const Error& e) {
    report.warnings.push_back(std::string("critical fit unavailable: ") + e.what());
  }
  if (report.fit) {
    try {
      report.gap = energy::transition_gap(report.curve, report.fit->critical_temperature,
                                          options.tail_fraction);
      report.verdict = energy::diagnose_capacity(*report.gap, options.tolerance);
    } catch (const Error& e) {
      report.warnings.push_back(std::string("transition gap unavailable: ") + e.what());
    }
  }

  // Intrinsic dimension of the token cloud at the grid temperature closest to
  // the reference. Identical ids give identical points, so dedupe by id.
  const auto& pts = report.curve.points;
  const auto nearest = std::min_element(pts.begin(), pts.end(), [&](const auto& a, const auto& b) {
    return std::abs(a.temperature - options.intrinsic_reference_temperature) <
           std::abs(b.temperature - options.intrinsic_reference_temperature);
  });
  if (nearest != pts.end()) {
    std::set<std::int64_t> ids;
    for (const auto& seq : sequences) {
      if (seq.temperature == nearest->temperature) ids.insert(seq.token_ids.begin(), seq.token_ids.end());
    }
    std::vector<std::int64_t> chosen(ids.begin(), ids.end());
    if (chosen.size() > options.max_intrinsic_points) {
      std::mt19937_64 rng(options.subsample_seed);
      std::shuffle(chosen.begin(), chosen.end(), rng);
      chosen.resize(options.max_intrinsic_points);
      std::sort(chosen.begin(), chosen.end());
    }
    graph::PointCloud cloud;
    cloud.dim = table.dim();
    for (auto id : chosen) {
      const auto row = table.row(static_cast<std::size_t>(id));
      cloud.coords.insert(cloud.coords.end(), row.begin(), row.end());
    }
    try {
      report.intrinsic_dimension_at_t1 = graph::twonn_dimension(cloud);
    } catch (const Error& e) {
      report.warnings.push_back(std::string("intrinsic dimension unavailable: ") + e.what());
    }
  }
  return report;
}

namespace {

ordered_json fit_to_json(const scaling::CriticalFit& f) {
  ordered_json j;
  j["critical_temperature"] = f.critical_temperature;
  j["critical_energy"] = f.critical_energy;
  j["amplitude_plus"] = f.amplitude_plus;
  j["amplitude_minus"] = f.amplitude_minus;
  j["alpha"] = f.alpha;
  j["alpha_prime"] = f.alpha_prime;
  j["residual_sse"] = f.residual_sse;
  j["d_internal"] = f.d_internal;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  return j;
}

scaling::CriticalFit fit_from_json(const json& j) {
  scaling::CriticalFit f;
  f.critical_temperature = j.at("critical_temperature").get<double>();
  f.critical_energy = j.at("critical_energy").get<double>();
  f.amplitude_plus = j.at("amplitude_plus").get<double>();
  f.amplitude_minus = j.at("amplitude_minus").get<double>();
  f.alpha = j.at("alpha").get<double>();
  f.alpha_prime = j.at("alpha_prime").get<double>();
  f.residual_sse = j.at("residual_sse").get<double>();
  f.d_internal = j.at("d_internal").get<double>();
  f.converged = j.at("converged").get<bool>();
  f.iterations = j.at("iterations").get<std::size_t>();
  return f;
}

template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorKind::Io, "short write to " + path.string());
}

}  // namespace

std::string report_to_json(const AnalysisReport& r) {
  ordered_json j;
  j["model_id"] = r.model_id;
  j["convention"] = energy::to_string(r.convention);
  auto curve = ordered_json::array();
  for (const auto& p : r.curve.points) {
    ordered_json row;
    row["temperature"] = p.temperature;
    row["mean_energy"] = p.mean_energy;
    row["stderr"] = p.std_error;
    row["count"] = p.count;
    curve.push_back(row);
  }
  j["curve"] = curve;
  j["fit"] = r.fit ? fit_to_json(*r.fit) : ordered_json(nullptr);
  j["gap"] = opt(r.gap);
  j["verdict"] = r.verdict ? ordered_json(energy::to_string(*r.verdict)) : ordered_json(nullptr);
  j["tail_fraction"] = r.tail_fraction;
  j["tolerance"] = r.tolerance;
  j["intrinsic_dimension_at_t1"] = opt(r.intrinsic_dimension_at_t1);
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

AnalysisReport report_from_json(const std::string& text) {
  AnalysisReport r;
  try {
    const json j = json::parse(text);
    r.model_id = j.at("model_id").get<std::string>();
    r.convention = energy::parse_convention(j.at("convention").get<std::string>());
    for (const auto& row : j.at("curve")) {
      r.curve.points.push_back({row.at("temperature").get<double>(), row.at("mean_energy").get<double>(),
                                row.at("stderr").get<double>(), row.at("count").get<std::size_t>()});
    }
    if (!j.at("fit").is_null()) r.fit = fit_from_json(j.at("fit"));
    if (!j.at("gap").is_null()) r.gap = j.at("gap").get<double>();
    if (!j.at("verdict").is_null()) r.verdict = energy::parse_verdict(j.at("verdict").get<std::string>());
    r.tail_fraction = j.at("tail_fraction").get<double>();
    r.tolerance = j.at("tolerance").get<double>();
    if (!j.at("intrinsic_dimension_at_t1").is_null()) {
      r.intrinsic_dimension_at_t1 = j.at("intrinsic_dimension_at_t1").get<double>();
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("analysis report: ") + e.what());
  }
  return r;
}

void save_report(const AnalysisReport& report, const std::filesystem::path& path) {
  write_text(path, report_to_json(report));
}

AnalysisReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::Dependency, "cannot open " + path.string() + " (run analyze first)");
  }
  return report_from_json({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

std::vector<std::filesystem::path> render_report(const AnalysisReport& report,
                                                 const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw Error(ErrorKind::Io, "cannot create output directory " + out_dir.string());
  }
  std::vector<std::filesystem::path> written;
  auto emit = [&](const char* name, const std::string& text) {
    const auto path = out_dir / name;
    write_text(path, text);
    written.push_back(path);
  };

  emit(kCurveFile, energy::curve_csv(report.curve));
  if (report.fit) {
    emit(kFitFile, scaling::fit_report_json(report.curve, *report.fit));
    ordered_json d;
    d["gap"] = opt(report.gap);
    d["T_c"] = report.fit->critical_temperature;
    d["tail_fraction"] = report.tail_fraction;
    d["tolerance"] = report.tolerance;
    d["verdict"] = report.verdict ? ordered_json(energy::to_string(*report.verdict)) : ordered_json(nullptr);
    d["alpha_prime"] = report.fit->alpha_prime;
    d["d_internal"] = report.fit->d_internal;
    d["intrinsic_dimension_at_t1"] = opt(report.intrinsic_dimension_at_t1);
    d["convention"] = energy::to_string(report.convention);
    emit(kDiagnosisFile, d.dump(2) + "\n");
  }
  emit(kPlotFile, scaling::branch_plot_csv(report.curve, report.fit));
  if (!report.warnings.empty() || !report.fit) {
    std::string text;
    for (const auto& w : report.warnings) text += w + "\n";
    if (!report.fit && report.warnings.empty()) text += "critical fit absent\n";
    emit(kWarningsFile, text);
  }
  return written;
}

}  // namespace onphase::sweep
