#include "bicavity/sweep.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "bicavity/error.hpp"

namespace bicavity {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Task t) {
  switch (t) {
    case Task::Spectrum: return "spectrum";
    case Task::Map: return "map";
    case Task::Eigen: return "eigen";
    case Task::Track: return "track";
    case Task::Bic: return "bic";
    case Task::Fom: return "fom";
    case Task::FpCompare: return "fp-compare";
    case Task::Fit: return "fit";
  }
  return "?";
}

std::vector<double> Axis::values() const {
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[std::size_t(i)] = min + (max - min) * double(i) / double(count - 1);
  return v;
}

// ------------------------------------------------------------ parsing

namespace {

enum class Dim { Length, Frequency, Mass, Temperature, Angular, Coupling, Coupling2, Wavevector };

const char* dim_name(Dim d) {
  switch (d) {
    case Dim::Length: return "length";
    case Dim::Frequency: return "frequency";
    case Dim::Mass: return "mass";
    case Dim::Temperature: return "temperature";
    case Dim::Angular: return "angular rate";
    case Dim::Coupling: return "frequency per length";
    case Dim::Coupling2: return "frequency per length squared";
    case Dim::Wavevector: return "wavevector";
  }
  return "?";
}

// SI factor of a unit for a dimension; lambda0 and f0 resolve through the
// job scale.
std::optional<double> unit_factor(Dim d, const std::string& u, const Scale& s) {
  static const std::map<std::string, double> length{{"m", 1.0}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}};
  static const std::map<std::string, double> freq{
      {"Hz", 1.0}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}, {"THz", 1e12}};
  static const std::map<std::string, double> mass{{"kg", 1.0}, {"g", 1e-3}, {"mg", 1e-6},
                                                  {"ug", 1e-9}, {"ng", 1e-12}, {"pg", 1e-15}};
  static const std::map<std::string, double> coupling{{"Hz/m", 1.0}, {"MHz/nm", 1e15}, {"GHz/nm", 1e18}};
  static const std::map<std::string, double> coupling2{
      {"Hz/m^2", 1.0}, {"kHz/nm^2", 1e21}, {"MHz/nm^2", 1e24}, {"GHz/nm^2", 1e27}};
  auto find = [&](const std::map<std::string, double>& m) -> std::optional<double> {
    auto it = m.find(u);
    if (it == m.end()) return std::nullopt;
    return it->second;
  };
  switch (d) {
    case Dim::Length:
      if (u == "lambda0") return s.lambda0;
      return find(length);
    case Dim::Frequency:
      if (u == "f0") return s.f0();
      return find(freq);
    case Dim::Mass: return find(mass);
    case Dim::Temperature:
      if (u == "K") return 1.0;
      return std::nullopt;
    case Dim::Angular:
      if (u == "rad/s") return 1.0;
      return std::nullopt;
    case Dim::Coupling: return find(coupling);
    case Dim::Coupling2: return find(coupling2);
    case Dim::Wavevector:
      if (u == "2pi/period") return 1.0;
      return std::nullopt;
  }
  return std::nullopt;
}

class Node {
 public:
  Node(const json& j, std::string ptr) : j_(&j), ptr_(std::move(ptr)) {}

  const json& raw() const { return *j_; }
  const std::string& pointer() const { return ptr_; }
  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node operator[](const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    if (!j_->contains(key)) throw ConfigError(ptr_ + "/" + key, "required field missing");
    return Node(j_->at(key), ptr_ + "/" + key);
  }
  Node operator[](std::size_t i) const {
    if (!j_->is_array() || i >= j_->size()) fail("expected an array element " + std::to_string(i));
    return Node(j_->at(i), ptr_ + "/" + std::to_string(i));
  }
  std::size_t size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
  }

  double number() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }
  int integer() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    return j_->get<int>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }
  std::string string() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }
  /// {"value": x, "unit": "..."} converted to SI (or to lambda0 / f0 when
  /// `native` is set for length and frequency).
  double quantity(Dim d, const Scale& s, bool native = false) const {
    if (!j_->is_object()) fail(std::string("expected {\"value\", \"unit\"} for a ") + dim_name(d));
    const double v = (*this)["value"].number();
    const std::string u = (*this)["unit"].string();
    const auto f = unit_factor(d, u, s);
    if (!f) throw ConfigError(ptr_ + "/unit", "unit '" + u + "' is not a " + dim_name(d) + " unit");
    double si = v * *f;
    if (native && d == Dim::Length) si /= s.lambda0;
    if (native && d == Dim::Frequency) si /= s.f0();
    return si;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(ptr_.empty() ? "/" : ptr_, what); }

 private:
  const json* j_;
  std::string ptr_;
};

Task parse_task(const Node& n) {
  static const std::map<std::string, Task> tasks{
      {"spectrum", Task::Spectrum}, {"map", Task::Map},   {"eigen", Task::Eigen},
      {"track", Task::Track},       {"bic", Task::Bic},   {"fom", Task::Fom},
      {"fp-compare", Task::FpCompare}, {"fit", Task::Fit}};
  const std::string s = n.string();
  auto it = tasks.find(s);
  if (it == tasks.end()) n.fail("unknown task '" + s + "'");
  return it->second;
}

const std::map<std::string, Dim>& axis_dims() {
  static const std::map<std::string, Dim> m{{"frequency", Dim::Frequency}, {"gap", Dim::Length},
                                            {"period", Dim::Length},       {"hole_radius", Dim::Length},
                                            {"thickness", Dim::Length},    {"kx", Dim::Wavevector},
                                            {"ky", Dim::Wavevector}};
  return m;
}

Axis parse_axis(const Node& n, const Scale& s) {
  Axis a;
  a.name = n["name"].string();
  auto it = axis_dims().find(a.name);
  if (it == axis_dims().end()) n["name"].fail("unknown axis '" + a.name + "'");
  const std::string unit = n["unit"].string();
  const auto f = unit_factor(it->second, unit, s);
  if (!f) throw ConfigError(n.pointer() + "/unit", "unit '" + unit + "' does not fit axis " + a.name);
  double native = *f;
  if (it->second == Dim::Length) native /= s.lambda0;
  if (it->second == Dim::Frequency) native /= s.f0();
  a.min = n["min"].number() * native;
  a.max = n["max"].number() * native;
  a.count = n["count"].integer();
  if (a.count < 2) n["count"].fail("sweep axes need at least 2 points");
  return a;
}

Parity parse_parity(const Node& n) {
  const std::string p = n.string();
  if (p == "even") return Parity::Even;
  if (p == "odd") return Parity::Odd;
  if (p == "any") return Parity::Unknown;
  n.fail("parity must be even, odd or any");
}

MechanicalSpec parse_mechanics(const Node& n, const Scale& s) {
  MechanicalSpec m;
  if (n.has("omega_m_over_2pi") == n.has("omega_m"))
    n.fail("give exactly one of omega_m_over_2pi (Hz units) or omega_m (rad/s)");
  if (n.has("omega_m_over_2pi"))
    m.omega_m = to_angular(Hertz{n["omega_m_over_2pi"].quantity(Dim::Frequency, s)});
  else
    m.omega_m = RadPerSec{n["omega_m"].quantity(Dim::Angular, s)};
  if (!(m.omega_m.value > 0.0)) n.fail("mechanical frequency must be positive");
  m.m_eff = n["m_eff"].quantity(Dim::Mass, s);
  if (!(m.m_eff > 0.0)) n["m_eff"].fail("must be positive");
  m.q_m = n["q_m"].positive();
  m.temperature = n["temperature"].quantity(Dim::Temperature, s);
  if (!(m.temperature > 0.0)) n["temperature"].fail("must be positive");
  return m;
}

void require_axes(const JobConfig& job, const Node& root, std::initializer_list<std::size_t> counts,
                  std::initializer_list<const char*> allowed) {
  bool count_ok = false;
  for (auto c : counts) count_ok |= job.axes.size() == c;
  if (!count_ok) {
    std::string want;
    for (auto c : counts) want += (want.empty() ? "" : " or ") + std::to_string(c);
    throw ConfigError(root.pointer() + "/sweep/axes", "task " + to_string(job.task) + " needs " + want + " axes");
  }
  for (std::size_t i = 0; i < job.axes.size(); ++i) {
    bool ok = allowed.size() == 0;
    for (const char* a : allowed) ok |= job.axes[i].name == a;
    if (!ok)
      throw ConfigError("/sweep/axes/" + std::to_string(i) + "/name",
                        "axis " + job.axes[i].name + " not supported by task " + to_string(job.task));
  }
}

}  // namespace

JobConfig JobConfig::from_json(const json& doc) {
  JobConfig job;
  job.source = doc;
  const Node root(doc, "");
  if (!doc.is_object()) root.fail("configuration must be a JSON object");
  job.task = parse_task(root["task"]);

  if (root.has("scale")) {
    job.scale.lambda0 = root["scale"]["lambda0"].quantity(Dim::Length, Scale{});
    if (!(job.scale.lambda0 > 0.0)) root["scale"]["lambda0"].fail("must be positive");
  }
  const Scale& s = job.scale;

  const bool needs_structure = job.task != Task::Fom && job.task != Task::FpCompare;
  const bool has_gap_axis = [&] {
    if (!root.has("sweep") || !root["sweep"].has("axes")) return false;
    for (const auto& a : doc["sweep"]["axes"])
      if (a.is_object() && a.value("name", "") == "gap") return true;
    return false;
  }();
  if (needs_structure || root.has("structure")) {
    const Node st = root["structure"];
    const std::string type = st["type"].string();
    if (type != "slab" && type != "cavity") st["type"].fail("type must be slab or cavity");
    job.is_cavity = type == "cavity";
    PhcSlabSpec slab;
    slab.period = st["period"].quantity(Dim::Length, s, true);
    if (!(slab.period > 0.0)) st["period"].fail("must be positive");
    slab.hole_radius = st["hole_radius"].quantity(Dim::Length, s, true);
    if (!(slab.hole_radius >= 0.0 && slab.hole_radius < 0.5 * slab.period))
      st["hole_radius"].fail("must satisfy 0 <= radius < period / 2");
    slab.thickness = st["thickness"].quantity(Dim::Length, s, true);
    if (!(slab.thickness > 0.0)) st["thickness"].fail("must be positive");
    if (st.has("index")) {
      const Node ix = st["index"];
      slab.slab.n_re = ix["re"].positive();
      slab.slab.n_im = ix.has("im") ? ix["im"].number() : 0.0;
      if (!(slab.slab.n_im >= 0.0)) ix["im"].fail("extinction must be non-negative");
    }
    job.slab = slab;
    if (job.is_cavity) {
      job.cavity = CavitySpec::symmetric(slab, 0.5);
      if (st.has("gap")) {
        job.cavity.gap = st["gap"].quantity(Dim::Length, s, true);
        if (!(job.cavity.gap >= 0.0)) st["gap"].fail("must be non-negative");
      } else if (!has_gap_axis) {
        throw ConfigError("/structure/gap", "cavity needs a gap (or a gap sweep axis)");
      }
    }
  }

  if (root.has("solver")) {
    const Node sv = root["solver"];
    RcwaConfig& c = job.solver;
    if (sv.has("half_order")) c.half_order = sv["half_order"].integer();
    if (c.half_order < 0 || c.half_order > RcwaConfig::kMaxHalfOrder)
      sv["half_order"].fail("must lie in [0, " + std::to_string(RcwaConfig::kMaxHalfOrder) + "]");
    if (sv.has("factorization")) {
      const std::string f = sv["factorization"].string();
      if (f == "laurent") c.factorization = Factorization::Laurent;
      else if (f == "inverse_rule") c.factorization = Factorization::InverseRule;
      else sv["factorization"].fail("must be laurent or inverse_rule");
    }
    if (sv.has("polarization")) {
      const std::string p = sv["polarization"].string();
      if (p == "x") c.polarization = Polarization::X;
      else if (p == "y") c.polarization = Polarization::Y;
      else sv["polarization"].fail("must be x or y");
    }
    if (sv.has("bloch_k")) {
      const Node k = sv["bloch_k"];
      if (k.size() != 2) k.fail("expected [kx, ky]");
      c.bloch_k = {k[0].number(), k[1].number()};
    }
    if (sv.has("use_symmetry")) c.use_symmetry = sv["use_symmetry"].boolean();
  }

  if (root.has("sweep")) {
    const Node ax = root["sweep"]["axes"];
    for (std::size_t i = 0; i < ax.size(); ++i) job.axes.push_back(parse_axis(ax[i], s));
    for (std::size_t i = 0; i < job.axes.size(); ++i)
      for (std::size_t k = 0; k < i; ++k)
        if (job.axes[i].name == job.axes[k].name)
          throw ConfigError("/sweep/axes/" + std::to_string(i) + "/name", "duplicate axis " + job.axes[i].name);
  }
  if (root.has("frequency")) job.frequency = root["frequency"].quantity(Dim::Frequency, s, true);
  if (!(job.frequency > 0.0)) root["frequency"].fail("must be positive");

  if (root.has("mode")) {
    const Node m = root["mode"];
    const Node g = m["guess"];
    const std::string unit = g["unit"].string();
    if (unit != "f0") g["unit"].fail("mode guesses are given in f0");
    job.mode.guess = cplx(g["re"].positive(), g.has("im") ? g["im"].number() : 1e-4);
    if (m.has("parity")) job.mode.parity = parse_parity(m["parity"]);
  }
  if (root.has("mechanics")) job.mechanics = parse_mechanics(root["mechanics"], s);
  if (root.has("coupling")) {
    const Node c = root["coupling"];
    if (c.has("G_over_2pi")) job.coupling.g_hz_per_m = c["G_over_2pi"].quantity(Dim::Coupling, s);
    if (c.has("G2_over_2pi")) job.coupling.g2_hz_per_m2 = c["G2_over_2pi"].quantity(Dim::Coupling2, s);
    if (c.has("kappa_over_2pi")) {
      job.coupling.kappa = Hertz{c["kappa_over_2pi"].quantity(Dim::Frequency, s)};
      if (!(job.coupling.kappa->value > 0.0)) c["kappa_over_2pi"].fail("must be positive");
    }
    if (c.has("kappa")) c["kappa"].fail("give the linewidth as kappa_over_2pi in Hz units");
  }
  if (root.has("row")) {
    const Node r = root["row"];
    job.label = r.has("label") ? r["label"].string() : "";
    if (r.has("n_im")) job.n_im = r["n_im"].number();
    if (r.has("reflectance")) job.reflectance = r["reflectance"].number();
  }
  if (root.has("fp")) {
    const Node f = root["fp"];
    FpInput fp;
    const Node ls = f["lengths"];
    if (ls.size() == 0) ls.fail("at least one cavity length required");
    for (std::size_t i = 0; i < ls.size(); ++i) fp.lengths.push_back({ls[i].quantity(Dim::Length, s)});
    fp.finesse = f["finesse"].positive();
    fp.wavelength = {f["wavelength"].quantity(Dim::Length, s)};
    if (f.has("mim_reflectivity")) fp.mim_reflectivity = f["mim_reflectivity"].positive();
    for (std::size_t i = 0; i < fp.lengths.size(); ++i)
      if (fp.lengths[i].value < 0.5 * fp.wavelength.value * (1.0 - 1e-12))
        ls[i].fail("cavity length below lambda/2 supports no resonance");
    job.fp = fp;
  }
  if (root.has("zeta")) {
    const Node z = root["zeta"];
    ZetaInput zi;
    zi.frequency = z["frequency"].quantity(Dim::Frequency, s, true);
    zi.gap = parse_axis(z["gap_axis"], s);
    if (zi.gap.name != "gap") z["gap_axis"]["name"].fail("the slice axis must be gap");
    if (z.has("refine_fano")) zi.refine_fano = z["refine_fano"].boolean();
    job.zeta = zi;
  }
  if (root.has("output")) {
    const Node o = root["output"];
    if (o.has("cache")) job.output.cache = o["cache"].boolean();
  }

  // Task-specific requirements.
  switch (job.task) {
    case Task::Spectrum:
      require_axes(job, root, {1}, {"frequency"});
      break;
    case Task::Map:
      require_axes(job, root, {2}, {});
      for (std::size_t i = 0; i < 2; ++i)
        if (job.axes[i].name == "gap" && !job.is_cavity)
          throw ConfigError("/sweep/axes/" + std::to_string(i) + "/name", "gap axis needs a cavity structure");
      break;
    case Task::Eigen:
      require_axes(job, root, {0, 1}, {"kx", "ky"});
      if (!job.is_cavity) throw ConfigError("/structure/type", "eigen needs a cavity structure");
      (void)root["mode"];
      break;
    case Task::Track:
    case Task::Bic:
      require_axes(job, root, {1}, {"gap"});
      if (!job.is_cavity) throw ConfigError("/structure/type", to_string(job.task) + " needs a cavity structure");
      (void)root["mode"];
      break;
    case Task::Fom:
      (void)root["mechanics"];
      if (!job.coupling.g_hz_per_m) (void)root["coupling"]["G_over_2pi"];
      if (!job.coupling.kappa) (void)root["coupling"]["kappa_over_2pi"];
      break;
    case Task::FpCompare:
      (void)root["mechanics"];
      (void)root["fp"];
      break;
    case Task::Fit:
      require_axes(job, root, {1}, {"frequency"});
      if (job.is_cavity) throw ConfigError("/structure/type", "fit needs a single slab");
      break;
  }
  return job;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string JobConfig::hash() const { return sha256_hex(source.dump()); }

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("/", "override '" + assignment + "' is not key=value");
  std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  if (key.front() != '/') {
    std::string p = "/";
    for (char c : key) p.push_back(c == '.' ? '/' : c);
    key = p;
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  try {
    doc[json::json_pointer(key)] = value;
  } catch (const json::exception& e) {
    throw ConfigError(key, std::string("cannot apply override: ") + e.what());
  }
}

json RunRecord::to_json() const {
  json pts = json::array();
  for (const auto& p : points) {
    json e = {{"index", p.index}, {"status", p.ok ? "ok" : "error"}};
    if (!p.message.empty()) e["message"] = p.message;
    pts.push_back(e);
  }
  json outs = json::array();
  for (const auto& [name, digest] : outputs) outs.push_back({{"file", name}, {"sha256", digest}});
  return {{"config_hash", config_hash}, {"tool_version", tool_version}, {"task", task},
          {"started", started},         {"finished", finished},         {"threads", threads},
          {"seed", seed},               {"cache_hit", cache_hit},       {"solver_calls", solver_calls},
          {"points", pts},              {"outputs", outs}};
}

// ------------------------------------------------------------- running

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string g17(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* axis_unit(const std::string& name) {
  const Dim d = axis_dims().at(name);
  if (d == Dim::Frequency) return "f0";
  if (d == Dim::Wavevector) return "2pi/period";
  return "lambda0";
}

struct Artifacts {
  std::map<std::string, std::string> files;
  std::vector<PointStatus> points;
  std::string summary;
  bool failed = false;
  std::string message;
};

struct Context {
  const JobConfig& job;
  const SweepOptions& opt;
  std::atomic<long> calls{0};
};

// Geometry and frequency of one grid point.
struct PointSetup {
  PhcSlabSpec slab;
  CavitySpec cavity;
  RcwaConfig cfg;
  double freq = 1.0;
};

PointSetup setup_for(const JobConfig& job, const std::vector<std::pair<std::string, double>>& coords) {
  PointSetup p{job.slab, job.cavity, job.solver, job.frequency};
  for (const auto& [name, v] : coords) {
    if (name == "frequency") p.freq = v;
    else if (name == "gap") p.cavity.gap = v;
    else if (name == "period") p.slab.period = v;
    else if (name == "hole_radius") p.slab.hole_radius = v;
    else if (name == "thickness") p.slab.thickness = v;
    else if (name == "kx") p.cfg.bloch_k[0] = v;
    else if (name == "ky") p.cfg.bloch_k[1] = v;
  }
  p.cavity.slab1 = p.slab;
  p.cavity.slab2 = p.slab;
  return p;
}

struct GridPoint {
  bool ok = false;
  std::string message;
  ScatteringAmplitudes amp;
};

Artifacts run_grid(Context& ctx) {
  const JobConfig& job = ctx.job;
  std::vector<std::vector<double>> vals;
  std::size_t n = 1;
  for (const auto& a : job.axes) {
    vals.push_back(a.values());
    n *= vals.back().size();
  }
  // Row-major: the last axis varies fastest.
  auto coords_of = [&](std::size_t i) {
    std::vector<std::pair<std::string, double>> c(job.axes.size());
    for (std::size_t k = job.axes.size(); k-- > 0;) {
      const std::size_t m = vals[k].size();
      c[k] = {job.axes[k].name, vals[k][i % m]};
      i /= m;
    }
    return c;
  };

  const std::function<GridPoint(std::size_t)> solve = [&](std::size_t i) {
    GridPoint g;
    try {
      const PointSetup p = setup_for(job, coords_of(i));
      ++ctx.calls;
      g.amp = job.is_cavity ? rcwa_scatter(p.cavity, p.freq, p.cfg) : rcwa_scatter(p.slab, p.freq, p.cfg);
      g.ok = true;
    } catch (const std::exception& e) {
      g.message = e.what();
    }
    return g;
  };
  const std::vector<GridPoint> pts = parallel_map<GridPoint>(n, ctx.opt.threads, solve);

  Artifacts art;
  std::ostringstream csv;
  for (const auto& a : job.axes) csv << a.name << "_" << axis_unit(a.name) << ',';
  csv << "R,T,A,status\n";
  json R = json::array(), T = json::array(), A = json::array(), ok = json::array();
  std::size_t failures = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [name, v] : coords_of(i)) csv << g17(v) << ',';
    const GridPoint& g = pts[i];
    if (g.ok) {
      csv << g17(g.amp.R) << ',' << g17(g.amp.T) << ',' << g17(g.amp.A()) << ",ok\n";
      R.push_back(g.amp.R);
      T.push_back(g.amp.T);
      A.push_back(g.amp.A());
    } else {
      csv << ",,,error\n";
      R.push_back(nullptr);
      T.push_back(nullptr);
      A.push_back(nullptr);
      ++failures;
    }
    ok.push_back(g.ok);
    art.points.push_back({i, g.ok, g.message});
  }
  json axes = json::array();
  json shape = json::array();
  for (std::size_t k = 0; k < job.axes.size(); ++k) {
    axes.push_back({{"name", job.axes[k].name}, {"unit", axis_unit(job.axes[k].name)}, {"values", vals[k]}});
    shape.push_back(vals[k].size());
  }
  const json doc = {{"axes", axes}, {"shape", shape}, {"layout", "row-major, last axis fastest"},
                    {"R", R},       {"T", T},         {"A", A},
                    {"ok", ok}};
  art.files["map.csv"] = csv.str();
  art.files["map.json"] = doc.dump(1) + "\n";
  art.summary = std::to_string(n) + " points, " + std::to_string(failures) + " failed\n";
  if (failures == n) {
    art.failed = true;
    art.message = "every grid point failed: " + pts.front().message;
  }
  return art;
}

json mode_json(const Eigenmode& m) {
  return {{"q", m.q},
          {"f_c", {{"re", m.f_c.real()}, {"im", m.f_c.imag()}, {"unit", "f0"}}},
          {"Q", std::isfinite(m.Q) ? json(m.Q) : json()},
          {"parity", to_string(m.parity)},
          {"residual", m.residual},
          {"iterations", m.iterations},
          {"fit_derived", m.fit_derived}};
}

Artifacts run_eigen(Context& ctx) {
  const JobConfig& job = ctx.job;
  Artifacts art;
  if (job.axes.empty()) {
    ++ctx.calls;
    const CavityPoleProblem problem(job.cavity, job.solver);
    Eigenmode m = find_pole(problem, job.mode.guess, job.mode.parity);
    m.q = job.cavity.gap;
    ModeBranch b;
    b.modes.push_back(m);
    art.files["branch.csv"] = branch_csv(b);
    art.files["eigen.json"] = json{{"mode", mode_json(m)}}.dump(1) + "\n";
    art.points.push_back({0, true, {}});
    char buf[128];
    std::snprintf(buf, sizeof buf, "f_c = %.10f %+.4ei  Q = %.6g  parity %s\n", m.f_c.real(), m.f_c.imag(), m.Q,
                  to_string(m.parity).c_str());
    art.summary = buf;
    return art;
  }
  const Axis& ax = job.axes.front();
  std::vector<std::array<double, 2>> path;
  for (double v : ax.values()) {
    std::array<double, 2> k = job.solver.bloch_k;
    k[ax.name == "kx" ? 0 : 1] = v;
    path.push_back(k);
  }
  ctx.calls += long(2 * path.size());
  const std::vector<BandPoint> band = band_structure(job.cavity, path, job.solver, job.mode.guess, job.mode.parity);
  std::ostringstream csv;
  csv << "kx,ky,sector,re_fc_f0,im_fc_f0,Q,parity,residual,error\n";
  std::size_t failures = 0;
  for (std::size_t i = 0; i < band.size(); ++i) {
    const BandPoint& p = band[i];
    csv << g17(p.k[0]) << ',' << g17(p.k[1]) << ',' << to_string(p.sector) << ',';
    if (p.mode)
      csv << g17(p.mode->f_c.real()) << ',' << g17(p.mode->f_c.imag()) << ',' << g17(p.mode->Q) << ','
          << to_string(p.mode->parity) << ',' << g17(p.mode->residual) << ",\n";
    else {
      std::string msg = p.error;
      for (char& c : msg)
        if (c == ',' || c == '\n') c = ' ';
      csv << ",,,,," << msg << '\n';
      ++failures;
    }
    art.points.push_back({i, p.mode.has_value(), p.error});
  }
  art.files["band.csv"] = csv.str();
  art.summary = std::to_string(band.size()) + " band points, " + std::to_string(failures) + " failed\n";
  if (failures == band.size()) {
    art.failed = true;
    art.message = "no pole found on the path";
  }
  return art;
}

Artifacts run_track(Context& ctx, bool locate) {
  const JobConfig& job = ctx.job;
  Artifacts art;
  const std::vector<double> grid = job.axes.front().values();
  const CavityPoleProblem base(job.cavity, job.solver);
  ++ctx.calls;
  Eigenmode seed = find_pole(base.with_gap(grid.front()), job.mode.guess, job.mode.parity);
  seed.q = grid.front();
  const GapSolver inner = cavity_gap_solver(base, seed.parity);
  const GapSolver solve = [&](double q, cplx guess) {
    ++ctx.calls;
    return inner(q, guess);
  };
  const ModeBranch branch = track_mode(solve, grid, seed);
  art.files["branch.csv"] = branch_csv(branch);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool ok = i < branch.modes.size();
    art.points.push_back({i, ok, ok ? std::string() : branch.diagnostic});
  }
  art.summary = std::to_string(branch.modes.size()) + " of " + std::to_string(grid.size()) + " gap points tracked";
  if (branch.truncated) art.summary += " (truncated: " + branch.diagnostic + ")";
  art.summary += "\n";
  if (!locate) return art;

  if (branch.modes.size() < 5) {
    art.failed = true;
    art.message = "branch too short to locate a BIC: " + branch.diagnostic;
    return art;
  }
  const BicFit fit = locate_bic(branch, &solve);
  json doc = {{"q0", fit.q0},
              {"coeff", fit.coeff},
              {"window", {fit.q_min, fit.q_max}},
              {"residual_rms", fit.residual_rms},
              {"r_squared", fit.r_squared},
              {"q_peak", fit.q_peak},
              {"Q_peak", std::isfinite(fit.Q_peak) ? json(fit.Q_peak) : json()},
              {"points", fit.points},
              {"unit", "lambda0"}};
  // Coupling at the located BIC, seeded from the branch.
  const CouplingReport cr = coupling_derivatives(branch, solve, fit.q_peak, {}, job.scale);
  doc["coupling"] = to_json(cr);
  art.files["bic.json"] = doc.dump(1) + "\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "BIC at q = %.6f lambda0, Q_peak = %.4g, R^2 = %.5f, G/2pi = %.4g GHz/nm\n",
                fit.q_peak, fit.Q_peak, fit.r_squared, cr.g_hz_per_m().real() * 1e-18);
  art.summary += buf;
  if (job.mechanics && cr.converged) {
    ++ctx.calls;
    const Eigenmode at = solve(fit.q_peak, seed.f_c);
    const Hertz kappa = mode_linewidth(at, job.scale);
    if (kappa.value > 0.0) art.files["fom.json"] = to_json(figure_of_merit(cr, kappa, *job.mechanics)).dump(1) + "\n";
  }
  return art;
}

Artifacts run_fom(Context& ctx) {
  const JobConfig& job = ctx.job;
  Artifacts art;
  const FigureOfMerit f =
      figure_of_merit(*job.coupling.g_hz_per_m, job.coupling.g2_hz_per_m2, *job.coupling.kappa, *job.mechanics);
  json doc = to_json(f);
  if (!job.label.empty()) doc["label"] = job.label;
  art.files["fom.json"] = doc.dump(1) + "\n";
  const DphocTableRow row{job.label, job.mechanics->q_m, job.n_im, job.reflectance, f};
  art.files["table2.csv"] = dphoc_table_csv(std::span(&row, 1));
  art.points.push_back({0, true, {}});
  art.summary = art.files["table2.csv"];
  return art;
}

Artifacts run_fp(Context& ctx) {
  const JobConfig& job = ctx.job;
  Artifacts art;
  std::vector<FpTableRow> rows;
  json arr = json::array();
  for (const Metres& L : job.fp->lengths) {
    FpBaselineSpec spec{L, job.fp->finesse, job.fp->wavelength, *job.mechanics, job.fp->mim_reflectivity};
    const FpBaseline b = fp_baseline(spec);
    rows.push_back({L, b});
    json e = to_json(b.fom);
    e["length"] = {{"value", L.value}, {"unit", "m"}};
    e["G_over_2pi"] = {{"value", b.g_hz_per_m}, {"unit", "hz_per_m"}};
    arr.push_back(e);
    art.points.push_back({rows.size() - 1, true, {}});
  }
  art.files["fom.json"] = arr.dump(1) + "\n";
  art.files["table1.csv"] = fp_table_csv(rows);
  art.summary = art.files["table1.csv"];
  return art;
}

json fano_json(const FitReport& r) {
  json j = {{"omega_f", r.fano.omega_f},
            {"kappa_e", r.fano.kappa_e},
            {"kappa_i", r.fano.kappa_i},
            {"unit", "f0"},
            {"residual_rms", r.residual_rms},
            {"initial_rms", r.initial_rms},
            {"iterations", r.iterations},
            {"status", to_string(r.status)}};
  if (!r.message.empty()) j["message"] = r.message;
  if (r.zeta) j["zeta"] = {{"C", r.zeta->zeta_c}, {"delta", r.zeta->zeta_delta}, {"units", {"f0", "lambda0"}}};
  return j;
}

Artifacts run_fit(Context& ctx) {
  const JobConfig& job = ctx.job;
  Artifacts art;
  const std::vector<double> freqs = job.axes.front().values();
  const std::function<SpectrumSample(std::size_t)> sample = [&](std::size_t i) {
    ++ctx.calls;
    const ScatteringAmplitudes a = rcwa_scatter(job.slab, freqs[i], job.solver);
    return SpectrumSample{freqs[i], a.R, a.T};
  };
  const auto spectrum = parallel_map<SpectrumSample>(freqs.size(), ctx.opt.threads, sample);
  const Background bg = slab_background(job.slab);
  const FitReport fano = fit_fano(spectrum, bg);
  json doc = {{"fano", fano_json(fano)}};
  art.points.push_back({0, fano.status != FitStatus::Degenerate, fano.message});
  char buf[256];
  std::snprintf(buf, sizeof buf, "omega_F = %.6f f0, kappa_e = %.6f f0, rms = %.4g (%s)\n", fano.fano.omega_f,
                fano.fano.kappa_e, fano.residual_rms, to_string(fano.status).c_str());
  art.summary = buf;
  if (fano.status == FitStatus::Degenerate) {
    art.failed = true;
    art.message = "Fano fit degenerate: " + fano.message;
  } else if (job.zeta) {
    const std::vector<double> gaps = job.zeta->gap.values();
    const std::function<SliceSample(std::size_t)> slice_pt = [&](std::size_t i) {
      ++ctx.calls;
      const auto a = rcwa_scatter(CavitySpec::symmetric(job.slab, gaps[i]), job.zeta->frequency, job.solver);
      return SliceSample{gaps[i], a.T};
    };
    const auto slice = parallel_map<SliceSample>(gaps.size(), ctx.opt.threads, slice_pt);
    DoubleSlabCmt model;
    model.fano = fano.fano;
    model.background = bg;
    FitOptions fo;
    fo.refine_fano = job.zeta->refine_fano;
    const FitReport z = fit_zeta(model, job.zeta->frequency, slice, fo);
    doc["zeta"] = fano_json(z);
    art.points.push_back({1, z.status != FitStatus::Degenerate, z.message});
    std::snprintf(buf, sizeof buf, "C = %.5g f0, delta = %.5g lambda0, slice rms = %.4g\n",
                  z.zeta ? z.zeta->zeta_c : 0.0, z.zeta ? z.zeta->zeta_delta : 0.0, z.residual_rms);
    art.summary += buf;
  }
  art.files["fit.json"] = doc.dump(1) + "\n";
  return art;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << content;
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

SweepOutcome run_sweep(const JobConfig& job, const SweepOptions& opt) {
  // Fail on an unwritable destination before any solve.
  fs::create_directories(opt.out_dir);
  const fs::path probe = opt.out_dir / ".write_probe";
  write_file(probe, "");
  fs::remove(probe);

  SweepOutcome out;
  RunRecord& rec = out.record;
  rec.config_hash = job.hash();
  rec.task = to_string(job.task);
  rec.started = utc_now();
  rec.threads = opt.threads;
  rec.seed = opt.seed;

  const fs::path cache_dir = opt.out_dir / ".cache";
  const fs::path cache_file = cache_dir / (rec.config_hash + ".json");
  Artifacts art;
  bool hit = false;
  if (job.output.cache && fs::exists(cache_file)) {
    const json c = json::parse(read_file(cache_file), nullptr, false);
    if (!c.is_discarded() && c.value("tool_version", "") == kToolVersion) {
      for (const auto& [name, content] : c.at("files").items()) art.files[name] = content.get<std::string>();
      for (const auto& p : c.at("points"))
        art.points.push_back({p.at("index").get<std::size_t>(), p.at("ok").get<bool>(), p.at("message").get<std::string>()});
      art.summary = c.value("summary", "");
      hit = true;
    }
  }

  if (!hit) {
    Context ctx{job, opt};
    try {
      switch (job.task) {
        case Task::Spectrum:
        case Task::Map: art = run_grid(ctx); break;
        case Task::Eigen: art = run_eigen(ctx); break;
        case Task::Track: art = run_track(ctx, false); break;
        case Task::Bic: art = run_track(ctx, true); break;
        case Task::Fom: art = run_fom(ctx); break;
        case Task::FpCompare: art = run_fp(ctx); break;
        case Task::Fit: art = run_fit(ctx); break;
      }
    } catch (const NumericalError& e) {
      art.failed = true;
      art.message = e.what();
    }
    rec.solver_calls = ctx.calls;
    if (job.output.cache && !art.failed) {
      json pts = json::array();
      for (const auto& p : art.points) pts.push_back({{"index", p.index}, {"ok", p.ok}, {"message", p.message}});
      const json c = {{"tool_version", kToolVersion}, {"config_hash", rec.config_hash},
                      {"files", art.files},           {"points", pts},
                      {"summary", art.summary}};
      fs::create_directories(cache_dir);
      write_file(cache_file, c.dump());
    }
  }
  rec.cache_hit = hit;
  rec.points = art.points;

  for (const auto& [name, content] : art.files) {
    write_file(opt.out_dir / name, content);
    rec.outputs.emplace_back(name, sha256_hex(content));
  }
  rec.finished = utc_now();
  write_file(opt.out_dir / "runrecord.json", rec.to_json().dump(1) + "\n");

  out.failed = art.failed;
  out.message = art.message;
  out.summary = art.summary;
  return out;
}

}  // namespace bicavity
