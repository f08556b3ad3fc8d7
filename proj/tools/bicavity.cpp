// Command-line driver: one subcommand per job type, configured by JSON.
//
//   bicavity <task> --config job.json [--set key=value]... [--out DIR]
//                   [--threads N] [--seed S]
//
// Exit status: 0 success, 1 configuration or I/O error, 2 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "bicavity/error.hpp"
#include "bicavity/sweep.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNumericalError = 2;

struct Args {
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "out";
  int threads = 1;
  std::uint64_t seed = 0;
};

nlohmann::json load(const Args& a) {
  std::ifstream f(a.config);
  if (!f) throw bicavity::ConfigError("/", "cannot open config file " + a.config);
  nlohmann::json doc = nlohmann::json::parse(f, nullptr, false);
  if (doc.is_discarded()) throw bicavity::ConfigError("/", "config file " + a.config + " is not valid JSON");
  for (const auto& o : a.overrides) bicavity::apply_override(doc, o);
  return doc;
}

int run(const std::string& task, const Args& a) {
  try {
    nlohmann::json doc = load(a);
    if (task != "validate") {
      if (!doc.contains("task")) doc["task"] = task;
      else if (doc["task"] != task)
        throw bicavity::ConfigError("/task", "config is for task " + doc["task"].dump() + ", not " + task);
    }
    const bicavity::JobConfig job = bicavity::JobConfig::from_json(doc);
    if (task == "validate") {
      std::cout << "ok " << bicavity::to_string(job.task) << ' ' << job.hash() << '\n';
      return kOk;
    }
    if (a.threads < 1) throw bicavity::ConfigError("/", "--threads must be at least 1");
    const bicavity::SweepOutcome r = bicavity::run_sweep(job, {a.out, a.threads, a.seed});
    std::cout << r.summary;
    if (r.failed) {
      std::cerr << "bicavity: " << r.message << '\n';
      return kNumericalError;
    }
    return kOk;
  } catch (const bicavity::ConfigError& e) {
    std::cerr << "bicavity: config error at " << e.what() << '\n';
    return kConfigError;
  } catch (const bicavity::NumericalError& e) {
    std::cerr << "bicavity: numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "bicavity: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double photonic-crystal slab cavity simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", bicavity::kToolVersion);

  Args args;
  const std::vector<std::pair<const char*, const char*>> tasks{
      {"spectrum", "Reflectance and transmittance versus frequency"},
      {"map", "Two-axis reflectance/transmittance map"},
      {"eigen", "Complex cavity eigenfrequency, optionally along a k path"},
      {"track", "Follow one mode over a gap sweep"},
      {"bic", "Track a mode, locate its BIC and evaluate the coupling there"},
      {"fom", "Optomechanical figures of merit from a coupling rate"},
      {"fp-compare", "Fabry-Perot baseline table"},
      {"fit", "Coupled-mode fits to solver spectra"},
      {"validate", "Check a configuration file and print its hash"},
  };
  std::string chosen;
  for (const auto& [name, help] : tasks) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", args.config, "Job configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", args.overrides, "Override a field, e.g. structure.period.value=0.7");
    sub->add_option("--out", args.out, "Output directory");
    sub->add_option("--threads", args.threads, "Worker threads");
    sub->add_option("--seed", args.seed, "Seed recorded with the run");
    sub->callback([&chosen, n = std::string(name)] { chosen = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  return run(chosen, args);
}
