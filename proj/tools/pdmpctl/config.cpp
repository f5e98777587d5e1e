#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "pdmp/errors.hpp"
#include "pdmp/models.hpp"

namespace pdmpctl {

using nlohmann::json;

std::string experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kAbel: return "abel";
    case ExperimentKind::kCesaro: return "cesaro";
    case ExperimentKind::kTauberian: return "tauberian";
    case ExperimentKind::kSolve: return "solve";
    case ExperimentKind::kStepStudy: return "step_study";
    case ExperimentKind::kCoupling: return "coupling";
    case ExperimentKind::kNonexpCheck: return "nonexp_check";
    case ExperimentKind::kOccupation: return "occupation";
    case ExperimentKind::kValidate: return "validate";
  }
  return "unknown";
}

namespace {

constexpr ExperimentKind kAllKinds[] = {ExperimentKind::kAbel,        ExperimentKind::kCesaro,
                                        ExperimentKind::kTauberian,   ExperimentKind::kSolve,
                                        ExperimentKind::kStepStudy,   ExperimentKind::kCoupling,
                                        ExperimentKind::kNonexpCheck, ExperimentKind::kOccupation,
                                        ExperimentKind::kValidate};

/// Reads one JSON object, copies every value it reads (or defaults) into
/// `out`, and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& in, std::string path, json& out) : in_(in), path_(std::move(path)), out_(out) {
    if (!in_.is_object()) fail("", "expected an object");
    out_ = json::object();
  }

  bool has(const std::string& key) const { return in_.contains(key); }
  std::string at(const std::string& key) const { return path_ + "/" + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ConfigError(key.empty() ? (path_.empty() ? "/" : path_) : at(key), message);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!in_.contains(key)) fail(key, "required field is missing");
    out_[key] = in_.at(key);
    return in_.at(key);
  }

  double number(const std::string& key) {
    const json& j = raw(key);
    if (!j.is_number()) fail(key, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(key, "expected a finite number");
    return v;
  }
  double number(const std::string& key, double fallback) {
    if (!has(key)) return remember(key, fallback);
    return number(key);
  }
  double positive(const std::string& key) {
    const double v = number(key);
    if (!(v > 0.0)) fail(key, "must be positive");
    return v;
  }
  double positive(const std::string& key, double fallback) {
    if (!has(key)) return remember(key, fallback);
    return positive(key);
  }

  std::uint64_t integer(const std::string& key) {
    const json& j = raw(key);
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
      fail(key, "expected a non-negative integer");
    }
    return j.get<std::uint64_t>();
  }
  std::uint64_t count(const std::string& key) {
    const std::uint64_t v = integer(key);
    if (v == 0) fail(key, "must be at least 1");
    return v;
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return remember(key, fallback);
    return count(key);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return remember(key, fallback);
    const json& j = raw(key);
    if (!j.is_boolean()) fail(key, "expected true or false");
    return j.get<bool>();
  }

  std::string text(const std::string& key) {
    const json& j = raw(key);
    if (!j.is_string()) fail(key, "expected a string");
    return j.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return remember(key, fallback);
    return text(key);
  }

  std::vector<double> numbers(const std::string& key) {
    const json& j = raw(key);
    if (!j.is_array() || j.empty()) fail(key, "expected a nonempty array of numbers");
    std::vector<double> out;
    for (const json& e : j) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) fail(key, "expected a nonempty array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::uint64_t> counts(const std::string& key) {
    const json& j = raw(key);
    if (!j.is_array() || j.empty()) fail(key, "expected a nonempty array of positive integers");
    std::vector<std::uint64_t> out;
    for (const json& e : j) {
      if (!e.is_number_unsigned() || e.get<std::uint64_t>() == 0) {
        fail(key, "expected a nonempty array of positive integers");
      }
      out.push_back(e.get<std::uint64_t>());
    }
    return out;
  }

  std::vector<std::vector<double>> levels(const std::string& key, std::size_t dim) {
    const json& j = raw(key);
    if (!j.is_array() || j.size() != dim) {
      fail(key, "expected " + std::to_string(dim) + " nonempty level lists, one per control coordinate");
    }
    std::vector<std::vector<double>> out;
    for (const json& row : j) {
      if (!row.is_array() || row.empty()) fail(key, "every level list must be a nonempty array of numbers");
      std::vector<double>& r = out.emplace_back();
      for (const json& e : row) {
        if (!e.is_number()) fail(key, "every level list must be a nonempty array of numbers");
        r.push_back(e.get<double>());
      }
    }
    return out;
  }

  Reader object(const std::string& key) {
    raw(key);
    return Reader(in_.at(key), at(key), out_[key]);
  }

  void finish() const {
    for (auto it = in_.begin(); it != in_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key(), "unknown field");
    }
  }

  json& out() { return out_; }

 private:
  template <class T>
  T remember(const std::string& key, T value) {
    seen_.insert(key);
    out_[key] = value;
    return value;
  }

  const json& in_;
  std::string path_;
  json& out_;
  std::set<std::string> seen_;
};

double param(Reader& r, const char* key, double fallback) { return r.number(key, fallback); }

void read_phage(const ModelSpec& spec, pdmp::PhageParams& p, pdmp::PhageCost& c, json* out_params, json* out_cost) {
  json scratch_p, scratch_c;
  Reader rp(spec.params, "/model/params", out_params ? *out_params : scratch_p);
  p.alpha = param(rp, "alpha", p.alpha);
  p.u0 = param(rp, "u0", p.u0);
  p.k2 = param(rp, "k2", p.k2);
  p.k3 = param(rp, "k3", p.k3);
  p.k4 = param(rp, "k4", p.k4);
  p.kt = param(rp, "kt", p.kt);
  p.k_m2 = param(rp, "k_m2", p.k_m2);
  p.k_m3 = param(rp, "k_m3", p.k_m3);
  p.k_m4 = param(rp, "k_m4", p.k_m4);
  p.n_burst = param(rp, "n_burst", p.n_burst);
  rp.finish();
  Reader rc(spec.cost, "/model/cost", out_cost ? *out_cost : scratch_c);
  c.w1 = param(rc, "w1", c.w1);
  c.w2 = param(rc, "w2", c.w2);
  rc.finish();
}

void read_toy(const ModelSpec& spec, pdmp::ToyParams& p, json* out_params) {
  json scratch;
  Reader rp(spec.params, "/model/params", out_params ? *out_params : scratch);
  p.cost_constant = param(rp, "cost_constant", p.cost_constant);
  p.flip_rate = param(rp, "flip_rate", p.flip_rate);
  rp.finish();
  if (!spec.cost.empty()) throw ConfigError("/model/cost", "only the phage model takes a cost block");
}

pdmp::ModelPtr build_model_impl(const ModelSpec& spec, json* out_params, json* out_cost) {
  try {
    if (spec.name == "phage_lambda") {
      pdmp::PhageParams p;
      pdmp::PhageCost c;
      read_phage(spec, p, c, out_params, out_cost);
      return pdmp::phage_lambda_model(p, c);
    }
    pdmp::ToyKind kind;
    try {
      kind = pdmp::parse_toy_kind(spec.name);
    } catch (const pdmp::ModelError&) {
      throw ConfigError("/model/name", "unknown model '" + spec.name +
                                           "' (expected phage_lambda, constant_cost, decay_1d, flipflop, "
                                           "controlled_decay)");
    }
    pdmp::ToyParams p;
    read_toy(spec, p, out_params);
    if (out_cost) *out_cost = json::object();
    return pdmp::toy_model(kind, p);
  } catch (const pdmp::ModelError& e) {
    throw ConfigError("/model/params", e.what());
  } catch (const pdmp::ArgumentError& e) {
    throw ConfigError("/model/params", e.what());
  }
}

pdmp::ModeId read_mode(Reader& r, const std::string& key, const pdmp::Model& model) {
  const json& j = r.raw(key);
  if (j.is_string()) {
    for (const pdmp::Mode& m : model.info().modes) {
      if (m.label == j.get<std::string>()) return m.id;
    }
    r.fail(key, "unknown mode label '" + j.get<std::string>() + "'");
  }
  if (!j.is_number_unsigned() || j.get<std::uint64_t>() >= model.mode_count()) {
    r.fail(key, "expected a mode label or an id below " + std::to_string(model.mode_count()));
  }
  return static_cast<pdmp::ModeId>(j.get<std::uint64_t>());
}

pdmp::StateVec read_state(Reader& r, const std::string& key, const pdmp::Model& model) {
  const std::vector<double> v = r.numbers(key);
  if (v.size() != model.dim()) r.fail(key, "expected " + std::to_string(model.dim()) + " coordinates");
  pdmp::StateVec x(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) x[i] = v[i];
  const auto& box = model.info().invariant_box;
  if (box && !box->contains(x, 0.0)) r.fail(key, "state lies outside the invariant box");
  return x;
}

StartPoint read_start(Reader& parent, const std::string& key, const pdmp::Model& model) {
  Reader r = parent.object(key);
  StartPoint s;
  s.mode = read_mode(r, "mode", model);
  s.x = read_state(r, "x", model);
  r.finish();
  return s;
}

std::vector<pdmp::Probe> read_probes(Reader& parent, const pdmp::Model& model) {
  const json& arr = parent.raw("probes");
  if (!arr.is_array() || arr.empty()) parent.fail("probes", "expected a nonempty array of {mode, x}");
  std::vector<pdmp::Probe> probes;
  json& out = parent.out()["probes"];
  out = json::array();
  for (std::size_t i = 0; i < arr.size(); ++i) {
    json slot;
    Reader r(arr[i], parent.at("probes") + "/" + std::to_string(i), slot);
    pdmp::Probe p;
    p.mode = read_mode(r, "mode", model);
    p.x = read_state(r, "x", model);
    r.finish();
    out.push_back(slot);
    probes.push_back(p);
  }
  return probes;
}

ControlLevels read_controls(Reader& parent, const std::string& key, const pdmp::Model& model) {
  Reader r = parent.object(key);
  ControlLevels c;
  c.u = r.levels("u_levels", model.info().control_u.dim());
  c.v = r.levels("v_levels", model.info().control_v.dim());
  const auto check = [&r](const char* key, const std::vector<std::vector<double>>& levels, const auto& box) {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      for (double x : levels[i]) {
        if (x < box.lo[i] - 1e-12 || x > box.hi[i] + 1e-12) r.fail(key, "level outside the control set");
      }
    }
  };
  check("u_levels", c.u, model.info().control_u);
  check("v_levels", c.v, model.info().control_v);
  r.finish();
  return c;
}

pdmp::FamilySpec read_family(Reader& parent, const pdmp::Model& model) {
  Reader r = parent.object("family");
  pdmp::FamilySpec f;
  const std::string kind = r.text("kind", "constant");
  if (kind == "constant") {
    f.kind = pdmp::FamilySpec::Kind::kConstant;
  } else if (kind == "stepped") {
    f.kind = pdmp::FamilySpec::Kind::kStepped;
  } else {
    r.fail("kind", "expected 'constant' or 'stepped'");
  }
  f.u_levels = r.levels("u_levels", model.info().control_u.dim());
  f.v_levels = r.levels("v_levels", model.info().control_v.dim());
  f.n = static_cast<unsigned>(r.count("n", 1));
  f.steps = r.count("steps", 1);
  f.cap = r.count("cap", f.cap);
  r.finish();
  try {
    pdmp::enumerate_policy_family(f, model);
  } catch (const pdmp::ArgumentError& e) {
    throw ConfigError(parent.at("family"), e.what());
  }
  return f;
}

pdmp::Policy read_policy(Reader& parent, const pdmp::Model& model) {
  const auto midpoint = [](const auto& box) {
    auto v = box.lo;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * (box.lo[i] + box.hi[i]);
    return v;
  };
  if (!parent.has("policy")) {
    pdmp::Policy p = pdmp::Policy::constant({midpoint(model.info().control_u), midpoint(model.info().control_v)});
    parent.out()["policy"] = json::parse(pdmp::policy_to_json(p));
    return p;
  }
  const json& j = parent.raw("policy");
  try {
    pdmp::Policy p = pdmp::policy_from_json(j.dump());
    p.check_against(model);
    return p;
  } catch (const pdmp::ArgumentError& e) {
    throw ConfigError(parent.at("policy"), e.what());
  } catch (const pdmp::ModelError& e) {
    throw ConfigError(parent.at("policy"), e.what());
  }
}

pdmp::BellmanScheme read_scheme(Reader& r) {
  const std::string s = r.text("scheme", "time_step");
  if (s == "time_step") return pdmp::BellmanScheme::kTimeStep;
  if (s == "jump_recursion") return pdmp::BellmanScheme::kJumpRecursion;
  r.fail("scheme", "expected 'time_step' or 'jump_recursion'");
}

std::vector<std::size_t> read_nodes(Reader& r, const pdmp::Model& model) {
  const auto raw = r.counts("nodes");
  if (raw.size() != model.dim()) r.fail("nodes", "expected one node count per state coordinate");
  std::vector<std::size_t> out;
  for (auto v : raw) {
    if (v < 2) r.fail("nodes", "every axis needs at least 2 nodes");
    out.push_back(v);
  }
  return out;
}

std::vector<double> read_deltas(Reader& r, const std::string& key) {
  std::vector<double> d = r.numbers(key);
  for (double x : d) {
    if (!(x > 0.0)) r.fail(key, "every entry must be positive");
  }
  return d;
}

std::vector<unsigned> read_n_list(Reader& r) {
  std::vector<unsigned> out;
  for (auto v : r.counts("n_list")) out.push_back(static_cast<unsigned>(v));
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i] <= out[i - 1]) r.fail("n_list", "must be strictly increasing");
  }
  return out;
}

void read_block(ExperimentConfig& cfg, ExperimentKind kind, Reader& top, const pdmp::Model& model) {
  Reader r = top.object(experiment_name(kind));
  switch (kind) {
    case ExperimentKind::kAbel: {
      AbelBlock b;
      b.deltas = read_deltas(r, "deltas");
      b.n_paths = r.count("n_paths");
      b.start = read_start(r, "start", model);
      if (r.has("family")) b.family = read_family(r, model);
      b.policy = read_policy(r, model);
      b.trajectories = r.has("trajectories") ? r.integer("trajectories") : 0;
      r.finish();
      cfg.abel = std::move(b);
      break;
    }
    case ExperimentKind::kCesaro: {
      CesaroBlock b;
      b.horizons = read_deltas(r, "horizons");
      b.n_paths = r.count("n_paths");
      b.start = read_start(r, "start", model);
      if (r.has("family")) b.family = read_family(r, model);
      b.policy = read_policy(r, model);
      b.trajectories = r.has("trajectories") ? r.integer("trajectories") : 0;
      r.finish();
      cfg.cesaro = std::move(b);
      break;
    }
    case ExperimentKind::kTauberian: {
      TauberianBlock b;
      b.family = read_family(r, model);
      b.probes = read_probes(r, model);
      b.deltas = read_deltas(r, "deltas");
      for (std::size_t i = 1; i < b.deltas.size(); ++i) {
        if (!(b.deltas[i] < b.deltas[i - 1])) r.fail("deltas", "must be strictly decreasing");
      }
      b.n_paths = r.count("n_paths");
      r.finish();
      cfg.tauberian = std::move(b);
      break;
    }
    case ExperimentKind::kSolve: {
      SolveBlock b;
      b.delta = r.positive("delta");
      b.n = static_cast<unsigned>(r.count("n"));
      b.nodes = read_nodes(r, model);
      b.controls = read_controls(r, "controls", model);
      b.tolerance = r.positive("tolerance", b.tolerance);
      b.scheme = read_scheme(r);
      b.max_substep = r.positive("max_substep", b.max_substep);
      if (r.has("cross_check")) {
        Reader c = r.object("cross_check");
        CrossCheck cc;
        cc.probes = read_probes(c, model);
        cc.n_paths = c.count("n_paths");
        c.finish();
        b.cross_check = std::move(cc);
      }
      r.finish();
      cfg.solve = std::move(b);
      break;
    }
    case ExperimentKind::kStepStudy: {
      StepStudyBlock b;
      b.delta = r.positive("delta");
      b.n_list = read_n_list(r);
      b.nodes = read_nodes(r, model);
      b.controls = read_controls(r, "controls", model);
      b.tolerance = r.positive("tolerance", b.tolerance);
      b.scheme = read_scheme(r);
      b.max_substep = r.positive("max_substep", b.max_substep);
      r.finish();
      cfg.step_study = std::move(b);
      break;
    }
    case ExperimentKind::kCoupling: {
      CouplingBlock b;
      b.n_list = read_n_list(r);
      b.delta = r.positive("delta");
      b.n_paths = r.count("n_paths");
      b.start = read_start(r, "start", model);
      b.y0 = read_state(r, "y0", model);
      b.policy = read_policy(r, model);
      b.v_grid_points = r.count("v_grid_points", b.v_grid_points);
      b.tolerance = r.positive("tolerance", b.tolerance);
      b.k0 = r.number("k0", 0.0);
      if (b.k0 < 0.0) r.fail("k0", "must be non-negative");
      r.finish();
      if (!model.restricted_framework()) {
        throw ConfigError("/model/name", "coupling needs rates and kernels depending on (mode, u) only");
      }
      cfg.coupling = std::move(b);
      break;
    }
    case ExperimentKind::kNonexpCheck: {
      NonexpBlock b;
      b.n_samples = r.count("n_samples");
      b.v_grid_points = r.count("v_grid_points", b.v_grid_points);
      b.tolerance = r.positive("tolerance", b.tolerance);
      r.finish();
      if (!model.restricted_framework()) {
        throw ConfigError("/model/name", "the nonexpansive check needs rates and kernels depending on (mode, u) only");
      }
      cfg.nonexp_check = b;
      break;
    }
    case ExperimentKind::kOccupation: {
      OccupationBlock b;
      b.delta = r.positive("delta");
      b.n_paths = r.count("n_paths");
      b.start = read_start(r, "start", model);
      b.policy = read_policy(r, model);
      b.max_atoms = r.count("max_atoms", b.max_atoms);
      b.write_atoms = r.boolean("write_atoms", false);
      b.sigma = r.positive("sigma", b.sigma);
      if (r.has("coupled")) {
        Reader c = r.object("coupled");
        CoupledOccupation co;
        co.y0 = read_state(c, "y0", model);
        co.n = static_cast<unsigned>(c.count("n"));
        c.finish();
        if (!model.restricted_framework()) {
          throw ConfigError(r.at("coupled"), "coupling needs rates and kernels depending on (mode, u) only");
        }
        b.coupled = co;
      }
      r.finish();
      cfg.occupation = std::move(b);
      break;
    }
    case ExperimentKind::kValidate: {
      ValidateBlock b;
      b.n_samples = r.count("n_samples", b.n_samples);
      r.finish();
      cfg.validate = b;
      break;
    }
  }
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

pdmp::ModelPtr build_model(const ModelSpec& spec) { return build_model_impl(spec, nullptr, nullptr); }

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(line_column(text, e.byte), "invalid JSON");
  }
  ExperimentConfig cfg;
  Reader top(doc, "", cfg.resolved);

  {
    Reader m = top.object("model");
    cfg.model.name = m.text("name");
    if (m.has("params")) cfg.model.params = m.raw("params");
    if (m.has("cost")) cfg.model.cost = m.raw("cost");
    m.finish();
  }
  const pdmp::ModelPtr model =
      build_model_impl(cfg.model, &cfg.resolved["model"]["params"], &cfg.resolved["model"]["cost"]);

  const std::string name = top.text("experiment");
  bool known = false;
  for (ExperimentKind k : kAllKinds) {
    if (experiment_name(k) == name) {
      cfg.experiment = k;
      known = true;
    }
  }
  if (!known) top.fail("experiment", "unknown experiment '" + name + "'");

  cfg.seed = top.integer("seed");
  cfg.output_dir = top.text("output_dir", "pdmp_out");
  cfg.bias = top.positive("bias", cfg.bias);

  {
    json empty = json::object();
    json scratch;
    const bool given = top.has("simulation");
    Reader s = given ? top.object("simulation") : Reader(empty, "/simulation", scratch);
    cfg.simulation.ode_step = s.positive("ode_step", cfg.simulation.ode_step);
    cfg.simulation.time_tolerance = s.positive("time_tolerance", cfg.simulation.time_tolerance);
    cfg.simulation.invariance_tolerance = s.positive("invariance_tolerance", cfg.simulation.invariance_tolerance);
    const std::string inv = s.text("invariance", "assert");
    if (inv == "assert") {
      cfg.simulation.invariance = pdmp::InvarianceMode::kAssert;
    } else if (inv == "clamp") {
      cfg.simulation.invariance = pdmp::InvarianceMode::kClamp;
    } else {
      s.fail("invariance", "expected 'assert' or 'clamp'");
    }
    cfg.simulation.max_jumps = s.count("max_jumps", cfg.simulation.max_jumps);
    s.finish();
    if (!given) cfg.resolved["simulation"] = scratch;
  }

  for (ExperimentKind k : kAllKinds) {
    if (top.has(experiment_name(k))) read_block(cfg, k, top, *model);
  }
  if (!top.has(experiment_name(cfg.experiment))) {
    top.fail(experiment_name(cfg.experiment), "experiment '" + name + "' needs its parameter block");
  }
  top.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.resolved["seed"] = seed;
}

}  // namespace pdmpctl
