#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <tuple>

#include <json.hpp>

#include "check_error.hpp"
#include "onphase/sweep.hpp"
#include "oracles.hpp"
#include "planted.hpp"
#include "temp_dir.hpp"

using namespace onphase;
using namespace onphase::sweep;
namespace fs = std::filesystem;

namespace {

planted::EndpointOptions flat_options(double energy = -2.0) {
  planted::EndpointOptions o;
  o.profile = [energy](double) { return energy; };
  o.vocabulary.levels = 64;
  return o;
}

// Run directory written directly, without an endpoint.
ingest::RunManifest manifest_with(const std::vector<std::tuple<std::string, double, std::vector<std::int64_t>>>& gens) {
  ingest::RunManifest m;
  m.config.endpoint_url = "http://127.0.0.1:1/v1/completions";
  m.config.model_id = "planted";
  std::set<double> temps;
  std::set<std::string> prompts;
  int rep = 0;
  for (const auto& [p, t, ids] : gens) {
    temps.insert(t);
    prompts.insert(p);
    ingest::GenerationRecord r;
    r.prompt_id = p;
    r.temperature = t;
    r.replicate = rep++;
    r.request_id = p + ":" + std::to_string(t) + ":" + std::to_string(r.replicate);
    r.token_ids = ids;
    r.attempts = 1;
    m.records.push_back(r);
  }
  m.config.temperatures.assign(temps.begin(), temps.end());
  for (const auto& p : prompts) m.config.prompts.push_back({p, "text"});
  return m;
}

}  // namespace

TEST_CASE("request body carries the sampling fields") {
  ingest::SweepConfig c;
  c.model_id = "org/m";
  c.max_tokens = 1024;
  const auto j = nlohmann::json::parse(completion_request_body(c, "Hello", 0.7, 99));
  CHECK(j.at("model") == "org/m");
  CHECK(j.at("prompt") == "Hello");
  CHECK(j.at("temperature").get<double>() == 0.7);
  CHECK(j.at("max_tokens") == 1024);
  CHECK(j.at("seed") == 99);
  CHECK(j.at("return_token_ids") == true);
}

TEST_CASE("completion response parsing") {
  SUBCASE("token_ids") {
    const auto r = parse_completion_response(R"({"choices":[{"text":"ab","token_ids":[5,6]}]})");
    REQUIRE(r.token_ids);
    CHECK(*r.token_ids == std::vector<std::int64_t>{5, 6});
    CHECK(r.text == "ab");
  }
  SUBCASE("logprob tokens as ids") {
    const auto r = parse_completion_response(
        R"({"choices":[{"text":"ab","logprobs":{"tokens":["token_id:7","token_id:8"]}}]})");
    REQUIRE(r.token_ids);
    CHECK(*r.token_ids == std::vector<std::int64_t>{7, 8});
  }
  SUBCASE("plain logprob tokens leave text only") {
    const auto r = parse_completion_response(R"({"choices":[{"text":"ab","logprobs":{"tokens":["a","b"]}}]})");
    CHECK_FALSE(r.token_ids);
    CHECK(r.text == "ab");
  }
  SUBCASE("errors") {
    CHECK_ERROR_KIND(parse_completion_response("nope"), ErrorKind::Parse);
    CHECK_ERROR_KIND(parse_completion_response(R"({"choices":[]})"), ErrorKind::Parse);
  }
}

TEST_CASE("sweep against a mock endpoint") {
  planted::MockEndpoint server(flat_options());
  auto c = planted::sweep_config(server.url(), {0.5, 1.0}, 1, 1);
  const auto m = run_sweep(c);
  REQUIRE(m.records.size() == 2);
  for (const auto& r : m.records) {
    CHECK(r.status == ingest::CellStatus::Completed);
    REQUIRE(r.token_ids);
    CHECK(r.token_ids->size() == 32);
    CHECK_FALSE(r.needs_tokenization);
    CHECK(r.attempts == 1);
  }
  CHECK(m.records[0].temperature == 0.5);
  CHECK(m.records[1].temperature == 1.0);
  CHECK_FALSE(m.started_at.empty());
  CHECK_FALSE(m.finished_at.empty());
  std::set<double> seen;
  for (const auto& b : server.bodies()) seen.insert(b.at("temperature").get<double>());
  CHECK(seen == std::set<double>{0.5, 1.0});
}

TEST_CASE("endpoint failures become per-cell error records after retries") {
  auto o = flat_options();
  o.fail_status = 500;
  planted::MockEndpoint server(o);
  auto c = planted::sweep_config(server.url(), {0.5, 1.0}, 1, 1);
  c.max_retries = 3;
  const auto m = run_sweep(c);
  REQUIRE(m.records.size() == 2);
  for (const auto& r : m.records) {
    CHECK(r.status == ingest::CellStatus::Failed);
    CHECK(r.attempts == 4);
    CHECK(r.error == "HTTP 500");
  }
  CHECK(server.requests() == 8);
}

TEST_CASE("client errors are not retried") {
  auto o = flat_options();
  o.fail_status = 400;
  planted::MockEndpoint server(o);
  const auto m = run_sweep(planted::sweep_config(server.url(), {1.0}, 1, 1));
  CHECK(m.records[0].status == ingest::CellStatus::Failed);
  CHECK(m.records[0].attempts == 1);
}

TEST_CASE("request parallelism bounds in-flight requests") {
  auto o = flat_options();
  o.delay_ms = 30;
  planted::MockEndpoint server(o);
  auto c = planted::sweep_config(server.url(), {0.2, 0.4, 0.6, 0.8, 1.0, 1.2}, 2, 2);
  c.request_parallelism = 3;
  const auto m = run_sweep(c);
  CHECK(m.records.size() == 24);
  CHECK(server.max_in_flight() <= 3);
  CHECK(server.max_in_flight() >= 2);
}

TEST_CASE("records are sorted and uniquely attributable") {
  planted::MockEndpoint server(flat_options());
  auto c = planted::sweep_config(server.url(), {0.3, 0.6, 0.9}, 3, 2);
  c.request_parallelism = 5;
  const auto m = run_sweep(c);
  REQUIRE(m.records.size() == 18);
  std::set<std::tuple<std::string, double, int, std::string>> keys;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    keys.insert({r.prompt_id, r.temperature, r.replicate, r.request_id});
    if (i > 0) {
      const auto& p = m.records[i - 1];
      CHECK(std::tie(p.prompt_id, p.temperature, p.replicate) < std::tie(r.prompt_id, r.temperature, r.replicate));
    }
  }
  CHECK(keys.size() == 18);
  std::set<std::string> ids;
  for (const auto& r : m.records) ids.insert(r.request_id);
  CHECK(ids.size() == 18);
}

TEST_CASE("text-only endpoints flag records for tokenization") {
  auto o = flat_options();
  o.text_only = true;
  planted::MockEndpoint server(o);
  const auto m = run_sweep(planted::sweep_config(server.url(), {1.0}, 1, 1));
  CHECK(m.records[0].status == ingest::CellStatus::Completed);
  CHECK(m.records[0].needs_tokenization);
  CHECK_FALSE(m.records[0].token_ids);
  CHECK(m.records[0].text == "planted text");
}

TEST_CASE("ids reported through logprobs are used") {
  auto o = flat_options();
  o.ids_in_logprobs = true;
  planted::MockEndpoint server(o);
  const auto m = run_sweep(planted::sweep_config(server.url(), {1.0}, 1, 1));
  REQUIRE(m.records[0].token_ids);
  CHECK(m.records[0].token_ids->size() == 32);
}

TEST_CASE("api key is sent from the configured environment variable") {
  planted::MockEndpoint server(flat_options());
  auto c = planted::sweep_config(server.url(), {1.0}, 1, 1);
  c.api_key_env = "ONPHASE_TEST_KEY_VAR";
  setenv("ONPHASE_TEST_KEY_VAR", "sk-test", 1);
  run_sweep(c);
  unsetenv("ONPHASE_TEST_KEY_VAR");
  REQUIRE(server.authorizations().size() == 1);
  CHECK(server.authorizations()[0] == "Bearer sk-test");
}

TEST_CASE("sweep validation and connectivity") {
  auto c = planted::sweep_config("http://127.0.0.1:9/v1/completions", {-1.0}, 1, 1);
  CHECK_ERROR_KIND(run_sweep(c), ErrorKind::Validation);
  c.temperatures = {1.0};
  c.timeout_s = 2;
  CHECK_ERROR_KIND(run_sweep(c), ErrorKind::Connectivity);
  c.endpoint_url = "no-scheme";
  CHECK_ERROR_KIND(run_sweep(c), ErrorKind::Validation);
}

TEST_CASE("manifest from a live sweep survives save and load") {
  planted::MockEndpoint server(flat_options());
  const auto m = run_sweep(planted::sweep_config(server.url(), {0.5, 1.0}, 2, 1));
  testutil::TempDir dir;
  save_run(m, dir / "run");
  CHECK(ingest::load_run(dir / "run") == m);
}

TEST_CASE("analyze a planted flat run") {
  const planted::Vocabulary vocab{32, 64, 0.6};
  const auto table = vocab.table();
  std::mt19937_64 rng(1);
  std::vector<std::tuple<std::string, double, std::vector<std::int64_t>>> gens;
  for (double t : {0.5, 1.0}) gens.push_back({"p", t, vocab.stream(-3.0, rng)});
  testutil::TempDir dir;
  ingest::save_run(manifest_with(gens), dir / "run");

  const auto report = analyze_run(dir / "run", table);
  REQUIRE(report.curve.size() == 2);
  CHECK(report.curve.points[0].mean_energy == doctest::Approx(-3.0).epsilon(0.01));
  CHECK_FALSE(report.fit);
  CHECK_FALSE(report.verdict);
  CHECK_FALSE(report.warnings.empty());
  // One level's tokens form a regular simplex, which TwoNN cannot measure.
  CHECK_FALSE(report.intrinsic_dimension_at_t1);
  bool warned = false;
  for (const auto& w : report.warnings) warned |= w.find("intrinsic dimension") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("energies of planted streams match the target") {
  const planted::Vocabulary vocab;
  const auto table = vocab.table();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(vocab.min_energy() * 0.95, -0.2);
  for (int i = 0; i < 50; ++i) {
    const double target = u(rng);
    const auto ids = vocab.stream(target, rng);
    const auto emb = ingest::lookup_embeddings(table, {ids, 1.0, "p", ""});
    CHECK(std::abs(energy::sequence_energy(emb) - target) <= 2e-3);
  }
}

TEST_CASE("analysis errors") {
  testutil::TempDir dir;
  const planted::Vocabulary vocab{32, 16, 0.6};
  const auto table = vocab.table();
  SUBCASE("empty run directory") {
    fs::create_directories(dir / "empty");
    CHECK_ERROR_KIND(analyze_run(dir / "empty", table), ErrorKind::Dependency);
  }
  SUBCASE("text-only records need the adapter") {
    auto m = manifest_with({{"p", 1.0, {1, 2}}});
    m.records[0].token_ids.reset();
    m.records[0].needs_tokenization = true;
    ingest::save_run(m, dir / "run");
    try {
      analyze_run(dir / "run", table);
      FAIL("expected a dependency error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Dependency);
      CHECK(std::string(e.what()).find("tokenize") != std::string::npos);
    }
  }
  SUBCASE("ids outside the table") {
    ingest::save_run(manifest_with({{"p", 1.0, {1, 100000}}}), dir / "run");
    CHECK_ERROR_KIND(analyze_run(dir / "run", table), ErrorKind::Dependency);
  }
}

TEST_CASE("token dump written by the adapter takes precedence") {
  testutil::TempDir dir;
  const planted::Vocabulary vocab{32, 64, 0.6};
  const auto table = vocab.table();
  auto m = manifest_with({{"p", 1.0, {1, 2}}});
  m.records[0].token_ids.reset();
  m.records[0].needs_tokenization = true;
  ingest::save_run(m, dir / "run");
  std::mt19937_64 rng(2);
  ingest::write_token_dump({{vocab.stream(-2.0, rng), 1.0, "p", "planted"}}, dir / "run" / kTokenDumpFile);
  const auto report = analyze_run(dir / "run", table);
  REQUIRE(report.curve.size() == 1);
  CHECK(report.curve.points[0].mean_energy == doctest::Approx(-2.0).epsilon(0.01));
}

TEST_CASE("analysis of a planted critical run") {
  const oracle::CriticalLaw law;
  planted::EndpointOptions o;
  o.profile = law;
  o.noise = 0.02;
  planted::MockEndpoint server(o);
  auto c = planted::sweep_config(server.url(), planted::grid(0.2, 2.2, 0.05), 2, 1);
  testutil::TempDir dir;
  save_run(run_sweep(c), dir / "run");

  const auto table = o.vocabulary.table();
  const auto report = analyze_run(dir / "run", table);
  REQUIRE(report.fit);
  CHECK(std::abs(report.fit->critical_temperature - 1.2) <= 0.05);
  CHECK(std::abs(report.fit->alpha_prime - 0.5) <= 0.05);
  REQUIRE(report.verdict);
  CHECK(*report.verdict == energy::Verdict::CleanData);
  CHECK(*report.gap < 0.0);

  SUBCASE("replay is identical") {
    CHECK(report_to_json(analyze_run(dir / "run", table)) == report_to_json(report));
  }
  SUBCASE("report JSON roundtrip") {
    save_report(report, dir / "a.json");
    CHECK(report_to_json(load_report(dir / "a.json")) == report_to_json(report));
  }
  SUBCASE("render") {
    const auto files = render_report(report, dir / "out");
    std::set<std::string> names;
    for (const auto& f : files) names.insert(f.filename().string());
    CHECK(names.count(kCurveFile) == 1);
    CHECK(names.count(kFitFile) == 1);
    CHECK(names.count(kDiagnosisFile) == 1);
    CHECK(names.count(kPlotFile) == 1);
    CHECK(files.size() == 4 + (report.warnings.empty() ? 0 : 1));
    const auto before = testutil::slurp(dir / "out" / kPlotFile);
    render_report(report, dir / "out");
    CHECK(testutil::slurp(dir / "out" / kPlotFile) == before);
    for (const auto& f : files) CHECK(fs::file_size(f) > 0);
    const auto diag = nlohmann::json::parse(testutil::slurp(dir / "out" / kDiagnosisFile));
    CHECK(diag.at("verdict") == "CleanData");
    CHECK(diag.contains("gap"));
    CHECK(diag.contains("T_c"));
    CHECK(diag.contains("tail_fraction"));
  }
}

TEST_CASE("render without a fit writes curve, plot and warnings") {
  AnalysisReport r;
  r.model_id = "m";
  r.curve.points = {{1.0, -2.0, 0.0, 1}};
  r.warnings = {"critical fit unavailable: too few points"};
  testutil::TempDir dir;
  const auto files = render_report(r, dir / "out");
  REQUIRE(files.size() == 3);
  CHECK(fs::exists(dir / "out" / kCurveFile));
  CHECK(fs::exists(dir / "out" / kPlotFile));
  CHECK(testutil::slurp(dir / "out" / kWarningsFile).find("too few points") != std::string::npos);
  const auto first = testutil::slurp(dir / "out" / kCurveFile);
  render_report(r, dir / "out");
  CHECK(testutil::slurp(dir / "out" / kCurveFile) == first);
}

TEST_CASE("load_report without analysis is a dependency error") {
  testutil::TempDir dir;
  CHECK_ERROR_KIND(load_report(dir / kAnalysisFile), ErrorKind::Dependency);
}
