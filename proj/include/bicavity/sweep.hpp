#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bicavity/cmt.hpp"
#include "bicavity/optomech.hpp"
#include "bicavity/rcwa.hpp"
#include "bicavity/resonance.hpp"
#include "bicavity/structure.hpp"

namespace bicavity {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Task { Spectrum, Map, Eigen, Track, Bic, Fom, FpCompare, Fit };
std::string to_string(Task t);

/// Sweep axis.  Length axes are stored in lambda0 and frequency axes in f0
/// after unit conversion; `kx`, `ky` are in 2 pi / period.
struct Axis {
  std::string name;
  double min = 0.0, max = 0.0;
  int count = 2;

  std::vector<double> values() const;
};

struct ModeSeed {
  cplx guess{1.0, 1e-4};  // f_c convention
  Parity parity = Parity::Unknown;
};

struct CouplingInput {
  std::optional<cplx> g_hz_per_m;  // G / 2pi
  cplx g2_hz_per_m2{0.0, 0.0};
  std::optional<Hertz> kappa;      // kappa / 2pi
};

struct FpInput {
  std::vector<Metres> lengths;
  double finesse = 5e5;
  Metres wavelength{1550e-9};
  std::optional<double> mim_reflectivity;
};

struct ZetaInput {
  double frequency = 0.99;  // f0
  Axis gap{"gap", 0.02, 1.0, 121};
  bool refine_fano = false;
};

struct OutputSpec {
  bool cache = true;
};

/// Validated job.  `source` keeps the (override-applied) document the job
/// was built from; its canonical form defines the hash.
struct JobConfig {
  Task task = Task::Spectrum;
  Scale scale{};
  bool is_cavity = false;
  PhcSlabSpec slab{};
  CavitySpec cavity{};
  RcwaConfig solver{};
  std::vector<Axis> axes;
  double frequency = 1.0;  // fixed frequency for maps without a frequency axis
  ModeSeed mode{};
  std::optional<MechanicalSpec> mechanics;
  CouplingInput coupling{};
  std::optional<FpInput> fp;
  std::optional<ZetaInput> zeta;
  std::string label;
  double q_m = 0.0;
  double n_im = 0.0;
  std::optional<double> reflectance;
  OutputSpec output{};
  nlohmann::json source;

  /// Throws ConfigError carrying the JSON pointer of the first bad field.
  static JobConfig from_json(const nlohmann::json& doc);
  /// SHA-256 of the canonical (sorted-key, compact) document, hex.
  std::string hash() const;
};

/// Applies "a.b.c=value" or "/a/b/c=value"; value is parsed as JSON when
/// possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& data);

struct SweepOptions {
  std::filesystem::path out_dir = "out";
  int threads = 1;
  std::uint64_t seed = 0;
};

struct PointStatus {
  std::size_t index = 0;
  bool ok = true;
  std::string message;
};

struct RunRecord {
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::string task;
  std::string started, finished;  // ISO 8601 UTC
  int threads = 1;
  std::uint64_t seed = 0;
  bool cache_hit = false;
  long solver_calls = 0;
  std::vector<PointStatus> points;
  std::vector<std::pair<std::string, std::string>> outputs;  // file name, sha256

  nlohmann::json to_json() const;
};

struct SweepOutcome {
  RunRecord record;
  /// Task-level failure (no usable result); maps to exit status 2.
  bool failed = false;
  std::string message;
  /// Short human summary written to standard output by the CLI.
  std::string summary;
};

/// Runs the job and writes its outputs plus runrecord.json into
/// `opt.out_dir`.  Throws std::filesystem::filesystem_error (or
/// std::runtime_error) before any solve when the directory is unwritable.
SweepOutcome run_sweep(const JobConfig& job, const SweepOptions& opt);

/// Evaluates `fn(i)` for i in [0, n) on `threads` workers.  Results land at
/// their own index, so the output does not depend on scheduling.
template <class T>
std::vector<T> parallel_map(std::size_t n, int threads, const std::function<T(std::size_t)>& fn);

}  // namespace bicavity

#include "bicavity/detail/parallel_map.hpp"
