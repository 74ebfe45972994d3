#include "koopcheck/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace koopcheck {

namespace {

using Json = nlohmann::json;

// Reads one JSON object, tracking which keys were consumed so that leftovers
// can be rejected as unknown.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("must be an object");
  }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(where_ + ": " + what); }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const Json& raw(const std::string& key) {
    if (!has(key)) fail("missing required key '" + key + "'");
    return j_.at(key);
  }

  std::string string(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_string()) fail("'" + key + "' must be a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
  }

  double number(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number()) fail("'" + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail("'" + key + "' must be finite");
    return d;
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
  double positive(const std::string& key, double fallback) {
    const double d = number(key, fallback);
    if (!(d > 0.0)) fail("'" + key + "' must be positive");
    return d;
  }
  double non_negative(const std::string& key, double fallback) {
    const double d = number(key, fallback);
    if (!(d >= 0.0)) fail("'" + key + "' must be non-negative");
    return d;
  }

  std::uint64_t unsigned_integer(const std::string& key) {
    const auto& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    fail("'" + key + "' must be a non-negative integer");
  }
  std::size_t count(const std::string& key, std::size_t fallback) {
    return has(key) ? static_cast<std::size_t>(unsigned_integer(key)) : fallback;
  }
  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail("'" + key + "' must be an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) fail("'" + key + "' must be a boolean");
    return v.get<bool>();
  }

  std::vector<double> numbers(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_array()) fail("'" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail("'" + key + "' must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  Vector vector(const std::string& key) {
    const auto v = numbers(key);
    if (v.empty()) fail("'" + key + "' must not be empty");
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  std::vector<int> integers(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_array() || v.empty()) fail("'" + key + "' must be a non-empty array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) fail("'" + key + "' must be an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& key) {
    if (!has(key)) return {};
    const auto& v = j_.at(key);
    if (!v.is_array()) fail("'" + key + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) fail("'" + key + "' must be an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  Box box(const std::string& key) {
    ObjectReader r(raw(key), where_ + "." + key);
    const Vector lo = r.vector("lower");
    const Vector hi = r.vector("upper");
    r.finish();
    if (lo.size() != hi.size()) fail("'" + key + "' bounds differ in dimension");
    if (!(lo.array() <= hi.array()).all()) fail("'" + key + "' has lower > upper");
    return Box(lo, hi);
  }
  const Json& array(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_array()) fail("'" + key + "' must be an array");
    return v;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) fail("unknown key '" + k + "'");
  }

  [[nodiscard]] const std::string& where() const { return where_; }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class T>
void require_unique_ids(const std::vector<T>& blocks, const char* what) {
  std::set<std::string> ids;
  for (const auto& b : blocks) {
    if (b.id.empty()) throw ConfigError(std::string(what) + " id must not be empty");
    if (!ids.insert(b.id).second) throw ConfigError(std::string("duplicate ") + what + " id '" + b.id + "'");
  }
}

SystemBlock parse_system(const Json& j, const std::string& where) {
  ObjectReader r(j, where);
  SystemBlock b;
  b.id = r.string("id");
  b.name = r.string("name");
  if (r.has("parameters")) {
    ObjectReader p(r.raw("parameters"), where + ".parameters");
    for (const auto& [k, v] : r.raw("parameters").items()) b.parameters[k] = p.number(k);
    p.finish();
  }
  b.region = r.box("region");
  b.fixed_point_seeds = r.integer("fixed_point_seeds", 0);
  if (b.fixed_point_seeds < 0) r.fail("'fixed_point_seeds' must be non-negative");
  r.finish();
  return b;
}

DictionaryBlock parse_dictionary(const Json& j, const std::string& where) {
  ObjectReader r(j, where);
  DictionaryBlock b;
  b.id = r.string("id");
  b.kind = r.string("kind");
  b.dimension = r.count("dimension", 0);
  if (b.dimension == 0) r.fail("'dimension' must be a positive integer");
  b.include_constant = r.boolean("include_constant", true);
  if (b.kind == "monomial") {
    b.max_degree = r.integer("max_degree", 0);
    if (b.max_degree < 1) r.fail("'max_degree' must be at least 1");
  } else if (b.kind == "rbf") {
    b.centers = r.count("centers", 0);
    if (b.centers == 0) r.fail("'centers' must be positive");
    b.shape = r.positive("shape", 1.0);
    b.region = r.box("region");
    if (static_cast<std::size_t>(b.region.dimension()) != b.dimension) r.fail("'region' does not match 'dimension'");
  } else {
    r.fail("unknown dictionary kind '" + b.kind + "'");
  }
  if (r.has("indicators")) {
    ObjectReader ir(r.raw("indicators"), where + ".indicators");
    IndicatorBlock ib;
    ib.system = ir.string("system");
    ib.resolution = ir.integers("resolution");
    for (int n : ib.resolution)
      if (n < 1) ir.fail("'resolution' entries must be positive");
    ib.horizon = ir.positive("horizon", kDefaultBasinHorizon);
    ib.capture_radius = ir.positive("capture_radius", kDefaultCaptureRadius);
    ir.finish();
    b.indicators = ib;
  }
  r.finish();
  return b;
}

FitBlock parse_fit(const Json& j, const std::string& where) {
  ObjectReader r(j, where);
  FitBlock b;
  b.id = r.string("id");
  b.system = r.string("system");
  b.dictionary = r.string("dictionary");
  b.method = r.string("method", "edmd");
  if (b.method != "edmd" && b.method != "generator") r.fail("unknown fit method '" + b.method + "'");
  b.dt = r.positive("dt", 0.1);
  if (r.has("gamma")) {
    b.gamma = r.non_negative("gamma", 0.0);
  }
  b.samples = r.count("samples", 2000);
  b.holdout = r.count("holdout", 500);
  if (b.samples == 0) r.fail("'samples' must be positive");
  r.finish();
  return b;
}

std::vector<Vector> parse_points(ObjectReader& r, const std::string& key) {
  std::vector<Vector> out;
  for (const auto& p : r.array(key)) {
    if (!p.is_array() || p.empty()) r.fail("'" + key + "' must be an array of points");
    Vector v(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!p[i].is_number()) r.fail("'" + key + "' must be an array of points");
      v[static_cast<Eigen::Index>(i)] = p[i].get<double>();
    }
    out.push_back(std::move(v));
  }
  return out;
}

ChecksBlock parse_checks(const Json& j) {
  ObjectReader r(j, "checks");
  ChecksBlock c;
  if (r.has("lemma1")) {
    ObjectReader b(r.raw("lemma1"), "checks.lemma1");
    Lemma1Block x;
    x.oracle_systems = b.strings("oracle_systems");
    x.fits = b.strings("fits");
    x.tol_lambda = b.non_negative("tol_lambda", x.tol_lambda);
    x.tol_phi_oracle = b.non_negative("tol_phi_oracle", x.tol_phi_oracle);
    x.tol_phi_fitted = b.non_negative("tol_phi_fitted", x.tol_phi_fitted);
    b.finish();
    c.lemma1 = x;
  }
  if (r.has("theorem2")) {
    ObjectReader b(r.raw("theorem2"), "checks.theorem2");
    Theorem2Block x;
    x.system = b.string("system");
    x.radii = b.numbers("radii");
    x.threshold = b.non_negative("threshold", x.threshold);
    b.finish();
    c.theorem2 = x;
  }
  if (r.has("theorem3")) {
    ObjectReader b(r.raw("theorem3"), "checks.theorem3");
    Theorem3Block x;
    x.system = b.string("system");
    x.region = b.box("region");
    x.starts = b.count("starts", x.starts);
    x.tol = b.non_negative("tol", x.tol);
    x.dense_resolution = b.integer("dense_resolution", x.dense_resolution);
    b.finish();
    c.theorem3 = x;
  }
  if (r.has("theorem4")) {
    ObjectReader b(r.raw("theorem4"), "checks.theorem4");
    Theorem4Block x;
    x.system = b.string("system");
    x.level = b.positive("level", x.level);
    x.start_region = b.box("start_region");
    x.starts = b.count("starts", x.starts);
    x.horizon = b.positive("horizon", x.horizon);
    x.drift_tol = b.non_negative("drift_tol", x.drift_tol);
    x.sample_dt = b.positive("sample_dt", x.sample_dt);
    b.finish();
    c.theorem4 = x;
  }
  if (r.has("exit_theorem")) {
    ObjectReader b(r.raw("exit_theorem"), "checks.exit_theorem");
    ExitBlock x;
    x.system = b.string("system");
    std::size_t k = 0;
    for (const auto& e : b.array("cases")) {
      ObjectReader cr(e, "checks.exit_theorem.cases[" + std::to_string(k++) + "]");
      ExitCase ec;
      ec.oracle = cr.string("oracle");
      ec.region = cr.box("region");
      cr.finish();
      x.cases.push_back(ec);
    }
    x.starts = b.count("starts", x.starts);
    x.horizon = b.positive("horizon", x.horizon);
    x.dense_resolution = b.integer("dense_resolution", x.dense_resolution);
    b.finish();
    c.exit_theorem = x;
  }
  if (r.has("lemma6_theorem7")) {
    ObjectReader b(r.raw("lemma6_theorem7"), "checks.lemma6_theorem7");
    BasinBlock x;
    x.fits = b.strings("fits");
    x.separation_tol = b.non_negative("separation_tol", x.separation_tol);
    b.finish();
    c.lemma6_theorem7 = x;
  }
  if (r.has("corollary5")) {
    ObjectReader b(r.raw("corollary5"), "checks.corollary5");
    Corollary5Block x;
    x.oracle_system = b.string("oracle_system");
    x.oracle_region = b.box("oracle_region");
    x.oracle_region_resolution = b.integer("oracle_region_resolution", x.oracle_region_resolution);
    x.oracle_tol = b.non_negative("oracle_tol", x.oracle_tol);
    x.fit = b.string("fit", "");
    x.offset = b.positive("offset", x.offset);
    x.horizon = b.positive("horizon", x.horizon);
    x.samples_per_branch = b.count("samples_per_branch", x.samples_per_branch);
    x.fitted_tol = b.non_negative("fitted_tol", x.fitted_tol);
    x.bound_cap = b.positive("bound_cap", x.bound_cap);
    b.finish();
    c.corollary5 = x;
  }
  if (r.has("theorem8")) {
    ObjectReader b(r.raw("theorem8"), "checks.theorem8");
    Theorem8Block x;
    std::size_t k = 0;
    for (const auto& e : b.array("cases")) {
      ObjectReader cr(e, "checks.theorem8.cases[" + std::to_string(k++) + "]");
      ClosedOrbitCase cc;
      cc.fit = cr.string("fit");
      cc.tol_re = cr.non_negative("tol_re", cc.tol_re);
      cc.tol_phi = cr.non_negative("tol_phi", cc.tol_phi);
      cr.finish();
      x.cases.push_back(cc);
    }
    x.orbit_starts = parse_points(b, "orbit_starts");
    x.horizon = b.positive("horizon", x.horizon);
    x.samples_per_orbit = b.count("samples_per_orbit", x.samples_per_orbit);
    b.finish();
    c.theorem8 = x;
  }
  r.finish();
  return c;
}

ControlBlock parse_control(const Json& j) {
  ObjectReader r(j, "control");
  ControlBlock c;
  c.system = r.string("system");
  c.label_system = r.string("label_system");
  c.state_dictionary = r.string("state_dictionary");
  c.control_state_degree = r.integer("control_state_degree", c.control_state_degree);
  c.control_input_degree = r.integer("control_input_degree", c.control_input_degree);
  if (c.control_state_degree < 0 || c.control_input_degree < 1) r.fail("control dictionary degrees out of range");
  c.input_box = r.box("input_box");
  c.samples = r.count("samples", c.samples);
  c.zero_input_fraction = r.number("zero_input_fraction", c.zero_input_fraction);
  if (r.has("gamma")) c.gamma = r.non_negative("gamma", 0.0);
  c.null_threshold = r.non_negative("null_threshold", c.null_threshold);
  c.bound_samples = r.count("bound_samples", c.bound_samples);
  c.horizon = r.positive("horizon", c.horizon);
  std::size_t k = 0;
  for (const auto& e : r.array("scenarios")) {
    ObjectReader sr(e, "control.scenarios[" + std::to_string(k++) + "]");
    ControlScenarioBlock s;
    s.id = sr.string("id");
    s.x0 = sr.vector("x0");
    s.schedule = InputSchedule::from_json(sr.raw("schedule"));
    sr.finish();
    c.scenarios.push_back(std::move(s));
  }
  require_unique_ids(c.scenarios, "control scenario");
  r.finish();
  return c;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const Json& document) {
  ObjectReader r(document, "config");
  ExperimentConfig c;
  c.schema_version = r.integer("schema_version", -1);
  if (c.schema_version != kConfigSchemaVersion)
    r.fail("unsupported schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");
  c.seed = r.unsigned_integer("seed");
  c.output_dir = r.string("output_dir", c.output_dir);
  c.integrator_tolerance = r.positive("integrator_tolerance", c.integrator_tolerance);
  if (r.has("systems")) {
    std::size_t k = 0;
    for (const auto& e : r.array("systems")) c.systems.push_back(parse_system(e, "systems[" + std::to_string(k++) + "]"));
  }
  if (r.has("dictionaries")) {
    std::size_t k = 0;
    for (const auto& e : r.array("dictionaries"))
      c.dictionaries.push_back(parse_dictionary(e, "dictionaries[" + std::to_string(k++) + "]"));
  }
  if (r.has("fits")) {
    std::size_t k = 0;
    for (const auto& e : r.array("fits")) c.fits.push_back(parse_fit(e, "fits[" + std::to_string(k++) + "]"));
  }
  if (r.has("checks")) c.checks = parse_checks(r.raw("checks"));
  if (r.has("control")) c.control = parse_control(r.raw("control"));
  r.finish();
  require_unique_ids(c.systems, "system");
  require_unique_ids(c.dictionaries, "dictionary");
  require_unique_ids(c.fits, "fit");
  c.source = document;
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  Json doc;
  try {
    doc = Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse(doc);
}

void ExperimentConfig::override_seed(std::uint64_t s) {
  seed = s;
  source["seed"] = s;
}

std::string ExperimentConfig::hash() const { return to_hex64(fnv1a64(source.dump())); }

const SystemBlock& ExperimentConfig::system(const std::string& id) const {
  for (const auto& s : systems)
    if (s.id == id) return s;
  throw ConfigError("unknown system id '" + id + "'");
}

const DictionaryBlock& ExperimentConfig::dictionary(const std::string& id) const {
  for (const auto& d : dictionaries)
    if (d.id == id) return d;
  throw ConfigError("unknown dictionary id '" + id + "'");
}

const FitBlock& ExperimentConfig::fit(const std::string& id) const {
  for (const auto& f : fits)
    if (f.id == id) return f;
  throw ConfigError("unknown fit id '" + id + "'");
}

}  // namespace koopcheck
