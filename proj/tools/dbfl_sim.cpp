// dbfl-sim: command-line front end for the simulator.
//
// Exit codes: 0 ok, 1 configuration error, 2 data error, 3 runtime error.
// Failures print one line to stderr: error code=<n> kind=<Kind> message="..."

#include <openssl/sha.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dbfl/config.hpp"
#include "dbfl/data.hpp"
#include "dbfl/report.hpp"
#include "dbfl/scenarios.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string config_path;
  std::string data_path;
  std::optional<std::string> scenario;
  std::string out = "results";
  std::string delay_sweep = "0.00075,0.001,0.00125,0.0015,0.00175";
  std::optional<int> rounds;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::size_t samples = 0;
};

int exit_code_for(const dbfl::Error& e) {
  const std::string& k = e.kind();
  if (k == "ConfigError" || k == "InvalidArgument") return 1;
  if (k == "ParseError" || k == "SchemaMismatch" || k == "EmptyDataset" || k == "IndexOutOfRange") return 2;
  return 3;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
    if (ch == '"') ch = '\'';
  }
  return s;
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << "error code=" << code << " kind=" << kind << " message=\"" << one_line(message) << "\"\n";
  return code;
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
  std::ostringstream os;
  for (unsigned char b : digest) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(b);
  return os.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

dbfl::ScenarioConfig resolve_config(const Options& o) {
  dbfl::ScenarioConfig c = dbfl::reference_scenario(dbfl::ScenarioKind::DBFL_Homogeneous);
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    if (!f) throw dbfl::ConfigError("cannot open config '" + o.config_path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    dbfl::apply_json(c, dbfl::parse_config_text(ss.str()));
  }
  if (o.rounds) c.rounds = *o.rounds;
  if (o.seed) c.seed = *o.seed;
  if (!o.data_path.empty()) {
    c.data.dataset = std::make_shared<const dbfl::Dataset>(dbfl::load_csv(o.data_path, c.data.schema));
  }
  dbfl::validate(c);
  return c;
}

std::vector<double> parse_sweep(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    double v = 0.0;
    if (!dbfl::detail::parse_double(dbfl::detail::trim(tok), v)) {
      throw dbfl::ConfigError("--delay-sweep: not a number: '" + tok + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw dbfl::ConfigError("--delay-sweep: no values");
  return out;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw dbfl::Error("IoError", "cannot write '" + p.string() + "'");
  f << content;
  if (!f) throw dbfl::Error("IoError", "write failed for '" + p.string() + "'");
}

void write_manifest(const fs::path& dir, const std::string& command, const dbfl::ScenarioConfig& c,
                    const std::vector<std::string>& outputs, const std::string& started, const Options& o) {
  const dbfl::json cfg = dbfl::to_json(c);
  dbfl::json m{{"artifact", "dbfl-sim"},
               {"artifact_version", kVersion},
               {"command", command},
               {"seed", c.seed},
               {"config_digest", "sha256:" + sha256_hex(cfg.dump())},
               {"config", cfg},
               {"data_path", o.data_path.empty() ? dbfl::json(nullptr) : dbfl::json(o.data_path)},
               {"outputs", outputs},
               {"started_at", started},
               {"finished_at", utc_now()}};
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::string trace_name(dbfl::ScenarioKind k) { return std::string("trace_") + dbfl::to_string(k) + ".csv"; }

int cmd_run(const Options& o, bool all) {
  const std::string started = utc_now();
  dbfl::ScenarioConfig base = resolve_config(o);
  std::vector<dbfl::ScenarioConfig> configs;
  if (all) {
    for (auto k : dbfl::kAllScenarios) {
      configs.push_back(base);
      configs.back().kind = k;
    }
  } else {
    if (o.scenario) base.kind = dbfl::scenario_from_string(*o.scenario);
    configs.push_back(base);
  }
  const auto results = dbfl::run_scenarios(configs, o.jobs);
  fs::create_directories(o.out);
  std::vector<std::string> outputs;
  for (const auto& r : results) {
    std::ostringstream os;
    dbfl::write_trace_csv(os, r);
    write_file(fs::path(o.out) / trace_name(r.kind), os.str());
    outputs.push_back(trace_name(r.kind));
  }
  std::ostringstream summary;
  dbfl::write_summary_csv(summary, results);
  write_file(fs::path(o.out) / "summary.csv", summary.str());
  outputs.push_back("summary.csv");
  outputs.push_back("manifest.json");
  write_manifest(o.out, all ? "compare" : "run", all ? base : configs.front(), outputs, started, o);
  for (const auto& r : results) {
    std::cout << dbfl::to_string(r.kind) << " final_accuracy=" << dbfl::format_number(r.final_accuracy())
              << " total_energy=" << dbfl::format_number(dbfl::from_ticks(r.total_energy())) << '\n';
  }
  return 0;
}

int cmd_sweep(const Options& o) {
  const std::string started = utc_now();
  const dbfl::ScenarioConfig base = resolve_config(o);
  const auto values = parse_sweep(o.delay_sweep);
  const auto rows = dbfl::delay_sweep(base, values, dbfl::kAllScenarios, o.jobs);
  fs::create_directories(o.out);
  std::ostringstream os;
  dbfl::write_sweep_csv(os, rows);
  write_file(fs::path(o.out) / "sweep.csv", os.str());
  write_manifest(o.out, "sweep", base, {"sweep.csv", "manifest.json"}, started, o);
  std::cout << os.str();
  return 0;
}

int cmd_gen_data(const Options& o) {
  const dbfl::ScenarioConfig c = resolve_config(o);
  const std::size_t n =
      o.samples ? o.samples : c.devices.size() * c.data.samples_per_device + c.data.test_samples;
  const auto ds = dbfl::gen_synthetic(c.data.schema, n, c.seed, c.data.synthetic);
  std::ostringstream os;
  dbfl::write_csv(os, ds, c.data.schema);
  if (o.out == "-") {
    std::cout << os.str();
  } else {
    const fs::path p(o.out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_file(p, os.str());
  }
  return 0;
}

int cmd_validate(const Options& o) {
  const dbfl::ScenarioConfig c = resolve_config(o);
  std::cout << "ok devices=" << c.devices.size() << " rounds=" << c.rounds << " config_digest=sha256:"
            << sha256_hex(dbfl::to_json(c).dump()) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for device-to-device clustered federated learning"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file; flags override its values")->check(CLI::ExistingFile);
    sub->add_option("--data", o.data_path, "Dataset CSV (synthetic data is generated when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("--rounds", o.rounds, "Communication rounds");
    sub->add_option("--seed", o.seed, "Seed for all randomness");
  };

  auto* run = app.add_subcommand("run", "Run one scenario and write its trace");
  common(run);
  run->add_option("--scenario", o.scenario, "cvfl | dbfl-homo | dbfl-hetero (default: config kind)")
      ->check(CLI::IsMember({"cvfl", "dbfl-homo", "dbfl-hetero"}));
  run->add_option("--out", o.out, "Output directory");

  auto* compare = app.add_subcommand("compare", "Run all three scenarios with a shared seed");
  common(compare);
  compare->add_option("--out", o.out, "Output directory");
  compare->add_option("--jobs", o.jobs, "Parallel runs")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Total energy per scenario across delay-per-meter values");
  common(sweep);
  sweep->add_option("--delay-sweep", o.delay_sweep, "Comma-separated delay-per-meter values in s/m");
  sweep->add_option("--out", o.out, "Output directory");
  sweep->add_option("--jobs", o.jobs, "Parallel runs")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  common(gen);
  gen->add_option("--samples", o.samples, "Row count (default: enough for the configured run)");
  gen->add_option("--out", o.out, "Output CSV path, or - for stdout")->required();

  auto* val = app.add_subcommand("validate", "Check a configuration");
  common(val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(1, "UsageError", e.what());
  }

  try {
    if (*run) return cmd_run(o, false);
    if (*compare) return cmd_run(o, true);
    if (*sweep) return cmd_sweep(o);
    if (*gen) return cmd_gen_data(o);
    if (*val) return cmd_validate(o);
  } catch (const dbfl::Error& e) {
    return fail(exit_code_for(e), e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail(3, "RuntimeError", e.what());
  }
  return 3;
}
