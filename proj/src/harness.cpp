#include "pnn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pnn/chain.hpp"
#include "pnn/quadrature.hpp"
#include "pnn/trunc.hpp"

namespace pnn {

namespace {

using json = nlohmann::json;

// Typed access to one JSON object with field paths in every error and a
// final check for unknown keys.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError((path_.empty() ? "config" : path_) + ": must be an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    if (!has(key)) throw ConfigError(at(key) + ": required field is missing");
    return j_.at(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(at(key) + ": must be a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(at(key) + ": must be finite");
    return x;
  }

  std::uint64_t unsigned_int(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = j_.at(key);
    if (!v.is_number_unsigned()) throw ConfigError(at(key) + ": must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  int integer(const std::string& key, std::optional<int> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(at(key) + ": must be an integer");
    return v.get<int>();
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(at(key) + ": must be a string");
    return v.get<std::string>();
  }

  const json& array(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(at(key) + ": must be an array");
    return v;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ConfigError(at(item.key()) + ": unknown field");
  }

 private:
  template <class T>
  T require(const std::string& key, const std::optional<T>& fallback) const {
    if (!fallback) throw ConfigError(at(key) + ": required field is missing");
    return *fallback;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

// ------------------------------------------------------------------ reading

Activation read_activation(const json& j, const std::string& path) {
  Fields f(j, path);
  std::string type = f.text("type");
  Activation a;
  if (type == "constant") {
    a = ConstantActivation{f.number("value")};
  } else if (type == "linear_clipped") {
    LinearClippedActivation x;
    x.slope = f.number("slope");
    x.intercept = f.number("intercept", 0.0);
    x.lower = f.number("lower");
    x.upper = f.number("upper");
    a = x;
  } else if (type == "logistic") {
    LogisticActivation x;
    x.lower = f.number("lower");
    x.upper = f.number("upper");
    x.gain = f.number("gain", 1.0);
    x.midpoint = f.number("midpoint", 0.0);
    a = x;
  } else {
    throw ConfigError(f.at("type") + ": unknown activation '" + type + "' (constant, linear_clipped, logistic)");
  }
  f.finish();
  return a;
}

Kernel read_kernel(const json& j, const std::string& path) {
  Fields f(j, path);
  std::string type = f.text("type");
  Kernel k;
  if (type == "zero") {
    k = ZeroKernel{};
  } else if (type == "constant") {
    k = ConstantKernel{f.number("value")};
  } else if (type == "linear") {
    k = LinearKernel{f.number("slope")};
  } else if (type == "triangular") {
    k = TriangularKernel{f.number("height"), f.number("peak", 0.5)};
  } else if (type == "alpha_bump") {
    k = AlphaBumpKernel{f.number("amplitude")};
  } else {
    throw ConfigError(f.at("type") + ": unknown kernel '" + type + "' (zero, constant, linear, triangular, alpha_bump)");
  }
  f.finish();
  return k;
}

Refractory read_refractory(const json& j, const std::string& path) {
  Fields f(j, path);
  std::string type = f.text("type");
  Refractory r;
  if (type == "none") {
    r = NoRefractory{};
  } else if (type == "hard") {
    r = HardRefractory{f.number("period")};
  } else {
    throw ConfigError(f.at("type") + ": unknown refractory '" + type + "' (none, hard)");
  }
  f.finish();
  return r;
}

NetworkConfig read_network(const json& j) {
  Fields f(j, "network");
  double theta = f.number("theta", 1.0);
  std::vector<SourceSpec> sources;
  if (f.has("sources")) {
    const json& arr = f.array("sources");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      Fields s(arr[k], indexed("network.sources", k));
      sources.push_back({s.number("rate")});
      s.finish();
    }
  }
  std::vector<NeuronSpec> neurons;
  if (f.has("neurons")) {
    const json& arr = f.array("neurons");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      std::string path = indexed("network.neurons", i);
      Fields n(arr[i], path);
      NeuronSpec spec;
      spec.activation = read_activation(n.raw("activation"), path + ".activation");
      spec.background = n.number("background", 0.0);
      if (n.has("refractory")) spec.refractory = read_refractory(n.raw("refractory"), path + ".refractory");
      n.finish();
      neurons.push_back(spec);
    }
  }
  std::vector<Synapse> synapses;
  if (f.has("synapses")) {
    const json& arr = f.array("synapses");
    for (std::size_t s = 0; s < arr.size(); ++s) {
      std::string path = indexed("network.synapses", s);
      Fields n(arr[s], path);
      Synapse syn;
      syn.post = n.unsigned_int("post");
      Fields pre(n.raw("pre"), path + ".pre");
      std::string kind = pre.text("kind");
      std::size_t index = pre.unsigned_int("index");
      pre.finish();
      if (kind == "source") {
        if (index >= sources.size()) throw ConfigError(pre.at("index") + ": source index out of range");
        syn.pre = index;
      } else if (kind == "neuron") {
        if (index >= neurons.size()) throw ConfigError(pre.at("index") + ": neuron index out of range");
        syn.pre = sources.size() + index;
      } else {
        throw ConfigError(pre.at("kind") + ": must be 'source' or 'neuron'");
      }
      syn.weight = n.number("weight");
      syn.kernel = read_kernel(n.raw("kernel"), path + ".kernel");
      n.finish();
      synapses.push_back(syn);
    }
  }
  f.finish();
  try {
    return NetworkConfig(theta, std::move(sources), std::move(neurons), std::move(synapses));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("network.") + e.what());
  }
}

std::vector<PlasticSynapse> read_plasticity(const json& j) {
  Fields f(j, "plasticity");
  std::vector<PlasticSynapse> out;
  const json& arr = f.array("synapses");
  for (std::size_t s = 0; s < arr.size(); ++s) {
    std::string path = indexed("plasticity.synapses", s);
    Fields n(arr[s], path);
    PlasticSynapse p;
    p.synapse = n.unsigned_int("synapse");
    const json& levels = n.array("levels");
    for (std::size_t l = 0; l < levels.size(); ++l) {
      if (!levels[l].is_number()) throw ConfigError(indexed(path + ".levels", l) + ": must be a number");
      p.levels.push_back(levels[l].get<double>());
    }
    p.initial_level = n.integer("initial_level", 1);
    const json& rules = n.array("rules");
    for (std::size_t r = 0; r < rules.size(); ++r) {
      Fields rule(rules[r], indexed(path + ".rules", r));
      LagRule lr;
      lr.level = rule.integer("level");
      lr.lag_lower = rule.number("lag_lower");
      lr.lag_upper = rule.number("lag_upper");
      lr.target = rule.integer("target");
      rule.finish();
      p.rules.push_back(lr);
    }
    n.finish();
    out.push_back(std::move(p));
  }
  f.finish();
  return out;
}

std::vector<std::size_t> read_counts(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": must be an array");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_unsigned()) throw ConfigError(indexed(path, i) + ": must be a non-negative integer");
    out.push_back(j[i].get<std::size_t>());
  }
  return out;
}

void validate(const ExperimentConfig& cfg) {
  const auto& r = cfg.run;
  if (!(r.horizon > 0)) throw ConfigError("run.horizon: must be > 0");
  if (!(r.burn_in >= 0 && r.burn_in < r.horizon)) throw ConfigError("run.burn_in: must lie in [0, run.horizon)");
  if (!(r.stride >= 0)) throw ConfigError("run.stride: must be >= 0 (0 selects theta/4)");
  if (r.batches < 2) throw ConfigError("run.batches: need at least 2 batches for error bars");
  if (r.histogram_bins < 1) throw ConfigError("run.histogram_bins: must be >= 1");
  if (r.replications < 1) throw ConfigError("run.replications: must be >= 1");
  if (!(r.diagnostic_horizon > 0)) throw ConfigError("run.diagnostic_horizon: must be > 0");
  if (r.coupling_blocks < r.batches) throw ConfigError("run.coupling_blocks: must be >= run.batches");
  for (std::size_t i = 0; i < r.truncation_levels.size(); ++i)
    if (r.truncation_levels[i] < 1) throw ConfigError(indexed("run.truncation_levels", i) + ": must be >= 1");
  if (cfg.truncation.neuron && *cfg.truncation.neuron < 1) throw ConfigError("truncation.neuron: must be >= 1");
  if (cfg.truncation.source && *cfg.truncation.source < 1) throw ConfigError("truncation.source: must be >= 1");

  const auto& c = cfg.chain;
  for (std::size_t i = 0; i < c.q.size(); ++i) {
    try {
      check_grid_resolution(cfg.network, c.q[i]);
    } catch (const ConfigError& e) {
      throw ConfigError(indexed("chain.q", i) + ": " + e.what());
    }
  }
  if (c.state_cap < 1) throw ConfigError("chain.state_cap: must be >= 1");
  if (!(c.tolerance > 0)) throw ConfigError("chain.tolerance: must be > 0");
  if (c.max_iterations < 1) throw ConfigError("chain.max_iterations: must be >= 1");

  const auto& a = cfg.analytic;
  double cells = std::round(1.0 / a.grid_step);
  if (!(a.grid_step > 0) || std::abs(cells * a.grid_step - 1.0) > 1e-9 || static_cast<long>(cells) % 2 != 0)
    throw ConfigError("analytic.grid_step: must be 1/K for an even integer K (e.g. 0.001)");
  if (a.n_max < 1) throw ConfigError("analytic.n_max: must be >= 1");
  if (a.shotnoise) {
    const auto& s = *a.shotnoise;
    ShotNoiseRate rate{s.activation, s.background, s.weight};
    if (!(rate(0.0) > 0)) throw ConfigError("analytic.shotnoise: gamma(0) must be > 0 for an integrable density");
    if (!(lower_bound(s.activation) >= 0)) throw ConfigError("analytic.shotnoise.activation: must be >= 0");
    if (!(s.horizon > s.burn_in && s.burn_in >= 0 && s.stride > 0))
      throw ConfigError("analytic.shotnoise: need horizon > burn_in >= 0 and stride > 0");
  }
  if (!cfg.plasticity.empty()) {
    try {
      PlasticityConfig(cfg.network, cfg.plasticity);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("plasticity.") + e.what());
    }
  }
  if (cfg.output_dir.empty()) throw ConfigError("output.dir: must not be empty");
}

// ------------------------------------------------------------------ writing

json activation_json(const Activation& a) {
  json j{{"type", type_name(a)}};
  if (const auto* x = std::get_if<ConstantActivation>(&a)) j["value"] = x->value;
  if (const auto* x = std::get_if<LinearClippedActivation>(&a)) {
    j["slope"] = x->slope;
    j["intercept"] = x->intercept;
    j["lower"] = x->lower;
    j["upper"] = x->upper;
  }
  if (const auto* x = std::get_if<LogisticActivation>(&a)) {
    j["lower"] = x->lower;
    j["upper"] = x->upper;
    j["gain"] = x->gain;
    j["midpoint"] = x->midpoint;
  }
  return j;
}

json kernel_json(const Kernel& k) {
  json j{{"type", type_name(k)}};
  if (const auto* x = std::get_if<ConstantKernel>(&k)) j["value"] = x->value;
  if (const auto* x = std::get_if<LinearKernel>(&k)) j["slope"] = x->slope;
  if (const auto* x = std::get_if<TriangularKernel>(&k)) {
    j["height"] = x->height;
    j["peak"] = x->peak;
  }
  if (const auto* x = std::get_if<AlphaBumpKernel>(&k)) j["amplitude"] = x->amplitude;
  return j;
}

json refractory_json(const Refractory& r) {
  json j{{"type", type_name(r)}};
  if (const auto* x = std::get_if<HardRefractory>(&r)) j["period"] = x->period;
  return j;
}

json config_json(const ExperimentConfig& cfg) {
  const auto& net = cfg.network;
  json sources = json::array(), neurons = json::array(), synapses = json::array();
  for (const auto& s : net.sources()) sources.push_back({{"rate", s.rate}});
  for (const auto& n : net.neurons())
    neurons.push_back({{"activation", activation_json(n.activation)},
                       {"background", n.background},
                       {"refractory", refractory_json(n.refractory)}});
  for (const auto& s : net.synapses()) {
    json pre = net.is_source(s.pre) ? json{{"kind", "source"}, {"index", s.pre}}
                                    : json{{"kind", "neuron"}, {"index", s.pre - net.num_sources()}};
    synapses.push_back({{"post", s.post}, {"pre", pre}, {"weight", s.weight}, {"kernel", kernel_json(s.kernel)}});
  }
  json j;
  j["schema_version"] = schema_version;
  j["network"] = {{"theta", net.theta()}, {"sources", sources}, {"neurons", neurons}, {"synapses", synapses}};
  j["truncation"] = {{"neuron", cfg.truncation.neuron ? json(*cfg.truncation.neuron) : json(nullptr)},
                     {"source", cfg.truncation.source ? json(*cfg.truncation.source) : json(nullptr)}};
  json plastic = json::array();
  for (const auto& p : cfg.plasticity) {
    json rules = json::array();
    for (const auto& r : p.rules)
      rules.push_back({{"level", r.level}, {"lag_lower", r.lag_lower}, {"lag_upper", r.lag_upper}, {"target", r.target}});
    plastic.push_back({{"synapse", p.synapse}, {"levels", p.levels}, {"initial_level", p.initial_level}, {"rules", rules}});
  }
  j["plasticity"] = {{"synapses", plastic}};
  const auto& r = cfg.run;
  j["run"] = {{"horizon", r.horizon},
              {"burn_in", r.burn_in},
              {"stride", r.stride},
              {"seed", r.seed},
              {"batches", r.batches},
              {"histogram_bins", r.histogram_bins},
              {"replications", r.replications},
              {"diagnostic_horizon", r.diagnostic_horizon},
              {"coupling_blocks", r.coupling_blocks},
              {"truncation_levels", r.truncation_levels}};
  const auto& c = cfg.chain;
  j["chain"] = {{"q", c.q},
                {"state_cap", c.state_cap},
                {"tolerance", c.tolerance},
                {"max_iterations", c.max_iterations},
                {"dense_limit", c.dense_limit}};
  const auto& a = cfg.analytic;
  j["analytic"] = {{"grid_step", a.grid_step}, {"n_max", a.n_max}, {"shotnoise", nullptr}};
  if (a.shotnoise) {
    const auto& s = *a.shotnoise;
    j["analytic"]["shotnoise"] = {{"activation", activation_json(s.activation)},
                                  {"background", s.background},
                                  {"weight", s.weight},
                                  {"horizon", s.horizon},
                                  {"burn_in", s.burn_in},
                                  {"stride", s.stride}};
  }
  j["output"] = {{"dir", cfg.output_dir}};
  return j;
}

}  // namespace

std::string config_to_text(const ExperimentConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

ExperimentConfig config_from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  Fields top(j, "");
  int version = top.integer("schema_version");
  if (version != schema_version)
    throw ConfigError("schema_version: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(schema_version) + ")");
  ExperimentConfig cfg;
  cfg.network = read_network(top.raw("network"));
  if (top.has("truncation")) {
    Fields t(top.raw("truncation"), "truncation");
    if (t.has("neuron")) cfg.truncation.neuron = t.unsigned_int("neuron");
    if (t.has("source")) cfg.truncation.source = t.unsigned_int("source");
    t.finish();
  }
  if (top.has("plasticity")) cfg.plasticity = read_plasticity(top.raw("plasticity"));
  if (top.has("run")) {
    Fields f(top.raw("run"), "run");
    RunBlock d;
    cfg.run.horizon = f.number("horizon", d.horizon);
    cfg.run.burn_in = f.number("burn_in", d.burn_in);
    cfg.run.stride = f.number("stride", d.stride);
    cfg.run.seed = f.unsigned_int("seed", d.seed);
    cfg.run.batches = f.unsigned_int("batches", d.batches);
    cfg.run.histogram_bins = f.unsigned_int("histogram_bins", d.histogram_bins);
    cfg.run.replications = f.unsigned_int("replications", d.replications);
    cfg.run.diagnostic_horizon = f.number("diagnostic_horizon", d.diagnostic_horizon);
    cfg.run.coupling_blocks = f.unsigned_int("coupling_blocks", d.coupling_blocks);
    if (f.has("truncation_levels")) cfg.run.truncation_levels = read_counts(f.raw("truncation_levels"), f.at("truncation_levels"));
    f.finish();
  }
  if (top.has("chain")) {
    Fields f(top.raw("chain"), "chain");
    ChainBlock d;
    if (f.has("q")) cfg.chain.q = read_counts(f.raw("q"), f.at("q"));
    cfg.chain.state_cap = f.unsigned_int("state_cap", d.state_cap);
    cfg.chain.tolerance = f.number("tolerance", d.tolerance);
    cfg.chain.max_iterations = f.unsigned_int("max_iterations", d.max_iterations);
    cfg.chain.dense_limit = f.unsigned_int("dense_limit", d.dense_limit);
    f.finish();
  }
  if (top.has("analytic")) {
    Fields f(top.raw("analytic"), "analytic");
    AnalyticBlock d;
    cfg.analytic.grid_step = f.number("grid_step", d.grid_step);
    cfg.analytic.n_max = f.unsigned_int("n_max", d.n_max);
    if (f.has("shotnoise")) {
      Fields s(f.raw("shotnoise"), "analytic.shotnoise");
      ShotNoiseBlock sd;
      ShotNoiseBlock sn;
      sn.activation = read_activation(s.raw("activation"), "analytic.shotnoise.activation");
      sn.background = s.number("background", sd.background);
      sn.weight = s.number("weight", sd.weight);
      sn.horizon = s.number("horizon", sd.horizon);
      sn.burn_in = s.number("burn_in", sd.burn_in);
      sn.stride = s.number("stride", sd.stride);
      s.finish();
      cfg.analytic.shotnoise = sn;
    }
    f.finish();
  }
  if (top.has("output")) {
    Fields f(top.raw("output"), "output");
    cfg.output_dir = f.text("dir", cfg.output_dir);
    f.finish();
  }
  top.finish();
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_text(buf.str());
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config_to_text(cfg);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::string text = config_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << hash;
  return s.str();
}

Suite parse_suite(const std::string& name) {
  if (name == "simulate") return Suite::simulate;
  if (name == "couple") return Suite::couple;
  if (name == "chain") return Suite::chain;
  if (name == "analytic") return Suite::analytic;
  if (name == "verify") return Suite::verify;
  throw std::invalid_argument("unknown suite '" + name + "' (simulate, couple, chain, analytic, verify)");
}

std::string suite_name(Suite suite) {
  switch (suite) {
    case Suite::simulate: return "simulate";
    case Suite::couple: return "couple";
    case Suite::chain: return "chain";
    case Suite::analytic: return "analytic";
    case Suite::verify: return "verify";
  }
  return "unknown";
}

bool SuiteResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

// ------------------------------------------------------------------ suites

std::string component_text(const Component& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + std::to_string(c[i]);
  return s;
}

class Artifacts {
 public:
  Artifacts(const ExperimentConfig& cfg, std::filesystem::path dir, SuiteResult& result)
      : cfg_(cfg), dir_(std::move(dir)), result_(result), hash_(hash_hex(config_hash(cfg))) {
    std::filesystem::create_directories(dir_);
  }

  std::ofstream table(const std::string& name, const std::string& kind) {
    auto path = dir_ / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(17);
    out << "# " << kind << '\n' << "# config_hash\t" << hash_ << '\n' << "# seed\t" << cfg_.run.seed << '\n';
    result_.files.push_back(path);
    return out;
  }

  void summary(json body) {
    body["config_hash"] = hash_;
    body["seed"] = cfg_.run.seed;
    body["suite"] = suite_name(result_.suite);
    auto path = dir_ / ("summary_" + suite_name(result_.suite) + ".json");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body.dump(2) << '\n';
    result_.files.push_back(path);
  }

  const std::string& hash() const { return hash_; }

 private:
  const ExperimentConfig& cfg_;
  std::filesystem::path dir_;
  SuiteResult& result_;
  std::string hash_;
};

// Plasticity objects must outlive the simulation options that point at them.
struct SimulationContext {
  std::optional<PlasticityConfig> plasticity;
  SamplingOptions sampling;
};

SimulationContext simulation_context(const ExperimentConfig& cfg) {
  SimulationContext ctx;
  ctx.sampling.horizon = cfg.run.horizon;
  ctx.sampling.burn_in = cfg.run.burn_in;
  ctx.sampling.stride = cfg.run.stride;
  ctx.sampling.seed = cfg.run.seed;
  ctx.sampling.batches = cfg.run.batches;
  ctx.sampling.simulation.truncation = cfg.truncation;
  if (!cfg.plasticity.empty()) ctx.plasticity.emplace(cfg.network, cfg.plasticity);
  return ctx;
}

void attach_plasticity(SimulationContext& ctx) {
  if (ctx.plasticity) ctx.sampling.simulation.plastic = {&*ctx.plasticity, initial_plastic_state(*ctx.plasticity)};
}

struct SimulationRun {
  ComponentMassEstimate masses;
  std::vector<DensityHistogram> histograms;
};

SimulationRun run_sampling(const ExperimentConfig& cfg) {
  SimulationContext ctx = simulation_context(cfg);
  attach_plasticity(ctx);
  SimulationRun run;
  run.masses = estimate_component_masses(cfg.network, ctx.sampling);
  for (std::size_t u = 0; u < cfg.network.num_units(); ++u) {
    Component c(cfg.network.num_units(), 0);
    c[u] = 1;
    if (run.masses.mass(c) <= 0) continue;
    run.histograms.push_back(estimate_density_1d(cfg.network, c, cfg.run.histogram_bins, ctx.sampling));
  }
  return run;
}

void write_sampling(Artifacts& art, const ExperimentConfig& cfg, const SimulationRun& run) {
  {
    auto out = art.table("components.tsv", "stationary component masses (window counts per unit)");
    out << "component\tmass\tsigma\n";
    for (const auto& [c, e] : run.masses.masses) out << component_text(c) << '\t' << e.mean << '\t' << e.sigma << '\n';
    out << "overflow\t" << run.masses.overflow.mean << '\t' << run.masses.overflow.sigma << '\n';
  }
  for (const auto& h : run.histograms) {
    auto out = art.table("density_unit" + std::to_string(h.unit) + ".tsv",
                         "one-spike density of unit " + std::to_string(h.unit) + " (age = time to expiry)");
    Component c(cfg.network.num_units(), 0);
    c[h.unit] = 1;
    out << "# density_bound\t" << density_bound(cfg.network, c) << '\n';
    out << "age_lo\tage_hi\tconditional\tconditional_sigma\tjoint\tjoint_sigma\n";
    for (std::size_t b = 0; b < h.joint.size(); ++b)
      out << h.edges[b] << '\t' << h.edges[b + 1] << '\t' << h.conditional[b].mean << '\t' << h.conditional[b].sigma
          << '\t' << h.joint[b].mean << '\t' << h.joint[b].sigma << '\n';
  }
}

void suite_simulate(const ExperimentConfig& cfg, Artifacts& art) {
  SimulationContext ctx = simulation_context(cfg);
  attach_plasticity(ctx);
  WindowState start = WindowState::empty(cfg.network.theta(), cfg.network.num_units());
  EventLog log = simulate(cfg.network, start, cfg.run.horizon, cfg.run.seed, ctx.sampling.simulation);
  {
    auto out = art.table("events.tsv", "spike events");
    write_events(out, log);
  }
  SimulationRun run = run_sampling(cfg);
  write_sampling(art, cfg, run);
  art.summary({{"events", log.events.size()},
               {"horizon", cfg.run.horizon},
               {"samples", run.masses.samples},
               {"silent_mass", run.masses.mass(Component(cfg.network.num_units(), 0))},
               {"mass_total", run.masses.total()}});
}

std::size_t saturation_count(const ExperimentConfig& cfg) {
  if (cfg.truncation.neuron) return *cfg.truncation.neuron;
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(2.0 * cfg.network.theta() * cfg.network.max_rate())));
}

struct CouplingRun {
  std::vector<CouplingStats> levels;
  MergeCurve merge;
  std::vector<double> envelope;
};

CouplingRun run_coupling(const ExperimentConfig& cfg) {
  if (!cfg.plasticity.empty()) throw std::runtime_error("coupling is only implemented for static weights");
  CouplingRun run;
  if (cfg.network.num_neurons() > 0)
    for (std::size_t level : cfg.run.truncation_levels)
      run.levels.push_back(simulate_coupled(cfg.network, level, cfg.run.coupling_blocks, cfg.run.seed, cfg.run.batches));
  const double theta = cfg.network.theta();
  std::vector<double> times;
  auto blocks = static_cast<std::size_t>(std::floor(cfg.run.diagnostic_horizon));
  for (std::size_t b = 0; b <= blocks; ++b) times.push_back(static_cast<double>(b) * theta);
  WindowState empty = WindowState::empty(theta, cfg.network.num_units());
  WindowState full = saturated_state(cfg.network, saturation_count(cfg));
  run.merge = ergodicity_diagnostic(cfg.network, empty, full, times, cfg.run.replications, cfg.run.seed, cfg.truncation);
  const double block_prob = 1.0 - std::exp(-cfg.network.total_candidate_rate() * theta);
  for (double t : times) run.envelope.push_back(std::pow(block_prob, std::floor(t / theta + 1e-9)));
  return run;
}

void write_coupling(Artifacts& art, const ExperimentConfig& cfg, const CouplingRun& run) {
  if (!run.levels.empty()) {
    auto out = art.table("coupling.tsv", "full vs truncated process disagreement");
    out << "level\tprobability\tsigma\tbound\tmismatch_length\tsplits\tmerges\n";
    for (const auto& s : run.levels)
      out << s.level << '\t' << s.probability.mean << '\t' << s.probability.sigma << '\t'
          << truncation_bound(cfg.network, s.level) << '\t' << s.mismatch_length << '\t' << s.splits << '\t'
          << s.merges << '\n';
  }
  auto out = art.table("merge.tsv", "coupled runs from the empty and the saturated state");
  out << "# replications\t" << run.merge.replications << '\n';
  out << "time\tunmerged\tsigma\tenvelope\n";
  for (std::size_t i = 0; i < run.merge.times.size(); ++i)
    out << run.merge.times[i] << '\t' << run.merge.unmerged[i] << '\t' << run.merge.sigma[i] << '\t' << run.envelope[i]
        << '\n';
}

void suite_couple(const ExperimentConfig& cfg, Artifacts& art) {
  CouplingRun run = run_coupling(cfg);
  write_coupling(art, cfg, run);
  json levels = json::array();
  for (const auto& s : run.levels)
    levels.push_back({{"level", s.level},
                      {"probability", s.probability.mean},
                      {"sigma", s.probability.sigma},
                      {"bound", truncation_bound(cfg.network, s.level)}});
  art.summary({{"levels", levels},
               {"blocks", cfg.run.coupling_blocks},
               {"replications", run.merge.replications},
               {"unmerged_final", run.merge.unmerged.back()}});
}

struct ChainRun {
  std::size_t q = 0;
  std::size_t states = 0;
  StationaryResult result;
  Embedding embedding;
  std::optional<double> dense_l1;
};

std::vector<ChainRun> run_chains(const ExperimentConfig& cfg, Artifacts* art) {
  if (!cfg.plasticity.empty()) throw std::runtime_error("the grid chain is only implemented for static weights");
  std::vector<ChainRun> runs;
  for (std::size_t q : cfg.chain.q) {
    ChainOptions options;
    options.q = q;
    options.truncation = cfg.truncation;
    options.state_cap = cfg.chain.state_cap;
    GridChain chain = enumerate_states(cfg.network, options);
    ChainRun run;
    run.q = q;
    run.states = chain.size();
    run.result = stationary(chain, {cfg.chain.tolerance, cfg.chain.max_iterations});
    run.embedding = embed(chain, run.result.pi);
    if (chain.size() <= cfg.chain.dense_limit) {
      auto dense = dense_stationary(chain, cfg.chain.dense_limit);
      double l1 = 0;
      for (std::size_t i = 0; i < dense.size(); ++i) l1 += std::abs(dense[i] - run.result.pi[i]);
      run.dense_l1 = l1;
    }
    if (art) {
      std::string stem = "chain_q" + std::to_string(q);
      {
        auto out = art->table(stem + "_triplets.tsv", "transition matrix triplets (row col probability)");
        write_chain_triplets(out, chain);
      }
      {
        auto out = art->table(stem + "_legend.tsv", "state index and ages per unit");
        write_chain_legend(out, chain);
      }
      {
        auto out = art->table(stem + "_pi.tsv", "stationary vector");
        out << "index\tprobability\n";
        for (std::size_t i = 0; i < chain.size(); ++i) out << i << '\t' << run.result.pi[i] << '\n';
      }
      {
        auto out = art->table(stem + "_components.tsv", "embedded component masses");
        out << "# boundary_mass\t" << run.embedding.boundary_mass << '\n';
        out << "component\tmass\n";
        for (const auto& [c, m] : run.embedding.masses) out << component_text(c) << '\t' << m << '\n';
      }
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

void suite_chain(const ExperimentConfig& cfg, Artifacts& art) {
  auto runs = run_chains(cfg, &art);
  json arr = json::array();
  for (const auto& r : runs) {
    json entry{{"q", r.q},
               {"states", r.states},
               {"iterations", r.result.iterations},
               {"fixed_point_residual", r.result.fixed_point_residual},
               {"balance_residual", r.result.balance_residual},
               {"silent_mass", r.embedding.mass(Component(cfg.network.num_units(), 0))},
               {"boundary_mass", r.embedding.boundary_mass}};
    entry["dense_l1"] = r.dense_l1 ? json(*r.dense_l1) : json(nullptr);
    arr.push_back(entry);
  }
  art.summary({{"chains", arr}});
}

std::optional<AgeRate> example1_applicable(const ExperimentConfig& cfg) {
  if (!cfg.plasticity.empty()) return std::nullopt;
  try {
    return example1_rate(cfg.network, cfg.truncation);
  } catch (const ConfigError&) {
    return std::nullopt;
  }
}

struct ShotNoiseCheck {
  Example2Density density;
  MomentEstimate moments;
  double ks = 0;
  double ks_limit = 0;
  std::size_t samples = 0;
  double analytic_mean = 0;
  double analytic_variance = 0;
  double max_balance_residual = 0;
};

ShotNoiseCheck run_shotnoise(const ExperimentConfig& cfg) {
  const auto& s = *cfg.analytic.shotnoise;
  ShotNoiseRate rate{s.activation, s.background, s.weight};
  LevelRate gamma = rate;
  ShotNoiseCheck out;
  out.density = example2_density(gamma, rate.bound(), cfg.analytic.n_max, cfg.analytic.grid_step);
  ShotNoiseOptions options;
  options.horizon = s.horizon;
  options.burn_in = s.burn_in;
  options.stride = s.stride;
  options.seed = cfg.run.seed;
  auto run = simulate_shotnoise(gamma, rate.bound(), options);
  out.samples = run.samples.size();
  out.moments = shotnoise_moments(run.samples, cfg.run.batches);
  const auto& d = out.density;
  out.ks = ks_statistic(run.samples, [&](double y) { return d.cdf(y); });
  out.ks_limit = ks_critical_value(run.samples.size(), 0.01);
  const double top = static_cast<double>(d.n_max + 1);
  double m1 = example2_moment(d, 1), m2 = example2_moment(d, 2);
  out.analytic_mean = m1;
  out.analytic_variance = m2 - m1 * m1;
  for (double y = 0.0125; y < std::min(5.0, top); y += 0.025)
    out.max_balance_residual = std::max(out.max_balance_residual, std::abs(example2_balance_residual(d, y)));
  return out;
}

void suite_analytic(const ExperimentConfig& cfg, Artifacts& art) {
  json summary;
  bool any = false;
  if (auto rate = example1_applicable(cfg)) {
    any = true;
    Example1Density d = example1_density(*rate, cfg.analytic.grid_step);
    auto out = art.table("example1.tsv", "single neuron silenced at two window spikes");
    write_example1_table(out, d, {config_hash(cfg), cfg.run.seed, d.step, d.normalization});
    ResidualReport report = stationary_equation_residual(component_grid(d), cfg.network, cfg.truncation);
    json residuals;
    for (const auto& item : report.items) residuals[item.equation] = {{"max", item.max_abs}, {"mean", item.mean_abs}};
    summary["example1"] = {{"silent", d.silent},
                           {"one_spike_mass", d.one_spike_mass},
                           {"two_spike_mass", d.two_spike_mass},
                           {"residuals", residuals}};
  }
  if (cfg.analytic.shotnoise) {
    any = true;
    ShotNoiseCheck sn = run_shotnoise(cfg);
    auto out = art.table("example2.tsv", "shot-noise stationary density");
    write_example2_table(out, sn.density, {config_hash(cfg), cfg.run.seed, sn.density.step, 1.0 / sn.density.scale});
    summary["example2"] = {{"tail_bound", sn.density.tail_bound},
                           {"analytic_mean", sn.analytic_mean},
                           {"analytic_variance", sn.analytic_variance},
                           {"max_balance_residual", sn.max_balance_residual},
                           {"samples", sn.samples},
                           {"sample_mean", sn.moments.mean.mean},
                           {"sample_mean_sigma", sn.moments.mean.sigma},
                           {"sample_variance", sn.moments.variance.mean},
                           {"sample_variance_sigma", sn.moments.variance.sigma},
                           {"ks", sn.ks},
                           {"ks_limit_1pct", sn.ks_limit}};
  }
  if (!any)
    throw std::runtime_error("no closed form applies: need a single neuron silenced at two window spikes (theta = 1) "
                             "or an analytic.shotnoise block");
  art.summary(summary);
}

// ------------------------------------------------------------------ verify

class CheckList {
 public:
  void at_most(const std::string& name, double value, double limit) { add(name, value, limit, "<=", value <= limit); }
  void below(const std::string& name, double value, double limit) { add(name, value, limit, "<", value < limit); }
  const std::vector<Check>& checks() const { return checks_; }

 private:
  void add(const std::string& name, double value, double limit, const char* rel, bool ok) {
    checks_.push_back({name, value, limit, rel, ok && std::isfinite(value)});
  }
  std::vector<Check> checks_;
};

double z_score(double diff, double sigma) {
  if (sigma > 0) return std::abs(diff) / sigma;
  return diff == 0 ? 0.0 : std::numeric_limits<double>::infinity();
}

double poisson_pmf(double mean, std::size_t m) {
  return std::exp(-mean + static_cast<double>(m) * std::log(mean) - std::lgamma(static_cast<double>(m) + 1.0));
}

void verify_sampling(const ExperimentConfig& cfg, const SimulationRun& run, CheckList& checks) {
  const auto& net = cfg.network;
  const double theta = net.theta();
  // Density bound for every one-spike histogram bin.
  for (const auto& h : run.histograms) {
    Component c(net.num_units(), 0);
    c[h.unit] = 1;
    double bound = density_bound(net, c), worst = -std::numeric_limits<double>::infinity();
    for (const auto& bin : h.joint) worst = std::max(worst, bin.sigma > 0 ? (bin.mean - bound) / bin.sigma : (bin.mean > bound ? INFINITY : -INFINITY));
    checks.at_most("density_bound_unit" + std::to_string(h.unit) + " (max z above bound)", worst, 3.0);
  }
  // Independent Poisson sources.
  if (net.num_neurons() == 0 && !cfg.truncation.source) {
    double worst = 0;
    for (const auto& [c, e] : run.masses.masses) {
      bool small = std::all_of(c.begin(), c.end(), [](std::size_t m) { return m <= 6; });
      if (!small) continue;
      double pmf = 1;
      for (std::size_t k = 0; k < c.size(); ++k) pmf *= poisson_pmf(net.sources()[k].rate * theta, c[k]);
      worst = std::max(worst, z_score(e.mean - pmf, e.sigma));
    }
    checks.at_most("poisson_masses (max z)", worst, 3.0);
    for (const auto& h : run.histograms) {
      double flat = 0, mean = 0, var = 0;
      for (const auto& bin : h.conditional) flat = std::max(flat, z_score(bin.mean - 1.0 / theta, bin.sigma));
      checks.at_most("flat_age_density_unit" + std::to_string(h.unit) + " (max z)", flat, 3.0);
      for (const auto& bin : h.joint) {
        mean += bin.mean / static_cast<double>(h.joint.size());
        var += bin.sigma * bin.sigma / static_cast<double>(h.joint.size() * h.joint.size());
      }
      Component c(net.num_units(), 0);
      c[h.unit] = 1;
      // Bin sigmas treated as independent; the average then has a smaller error.
      checks.at_most("density_bound_attained_unit" + std::to_string(h.unit) + " (z)",
                     z_score(mean - density_bound(net, c), std::sqrt(var)), 3.0);
    }
  }
}

void verify_example1(const ExperimentConfig& cfg, const AgeRate& rate, const SimulationRun& run,
                     const std::vector<ChainRun>& chains, CheckList& checks) {
  Example1Density d = example1_density(rate, cfg.analytic.grid_step);
  ResidualReport report = stationary_equation_residual(component_grid(d), cfg.network, cfg.truncation);
  checks.at_most("example1_closed_form_residual", report.max_abs(), 1e-8);
  Estimate silent = run.masses.estimate({0});
  checks.at_most("example1_sim_silent (z)", z_score(silent.mean - d.silent, silent.sigma), 3.0);
  Estimate two = run.masses.estimate({2});
  checks.at_most("example1_sim_two_spike_mass (z)", z_score(two.mean - d.two_spike_mass, two.sigma), 3.0);
  for (const auto& h : run.histograms) {
    double worst = 0;
    for (std::size_t b = 0; b < h.joint.size(); ++b) {
      double lo = h.edges[b], hi = h.edges[b + 1];
      double expected = quad::simpson([&](double x) { return d.psi1(x); }, lo, hi, 16) / (hi - lo);
      worst = std::max(worst, z_score(h.joint[b].mean - expected, h.joint[b].sigma));
    }
    checks.at_most("example1_sim_one_spike_density (max z)", worst, 3.0);
  }
  if (chains.size() >= 2) {
    std::size_t violations = 0;
    double previous = INFINITY;
    for (const auto& c : chains) {
      double err = std::abs(c.embedding.mass({0}) - d.silent);
      if (!(err < previous)) ++violations;
      previous = err;
    }
    checks.at_most("example1_chain_silent_error_decreasing (violations)", static_cast<double>(violations), 0.0);
  }
}

void verify_chains(const std::vector<ChainRun>& chains, CheckList& checks) {
  for (const auto& c : chains) {
    std::string tag = "chain_q" + std::to_string(c.q);
    if (!c.dense_l1) continue;
    checks.at_most(tag + "_fixed_point_residual", c.result.fixed_point_residual, 1e-12);
    checks.at_most(tag + "_balance_residual", c.result.balance_residual, 1e-12);
    checks.at_most(tag + "_dense_l1", *c.dense_l1, 1e-10);
  }
}

void verify_coupling(const ExperimentConfig& cfg, const CouplingRun& run, CheckList& checks) {
  double previous = INFINITY;
  std::size_t increases = 0;
  for (const auto& s : run.levels) {
    double bound = truncation_bound(cfg.network, s.level);
    checks.at_most("truncation_level" + std::to_string(s.level) + " (estimate - 3 sigma vs bound)",
                   s.probability.mean - 3.0 * s.probability.sigma, bound);
    if (!(s.probability.mean < previous) && !(s.probability.mean == 0 && previous == 0)) ++increases;
    previous = s.probability.mean;
  }
  if (run.levels.size() >= 2)
    checks.at_most("truncation_estimates_decreasing (violations)", static_cast<double>(increases), 0.0);
  std::size_t rises = 0;
  double excess = -INFINITY;
  for (std::size_t i = 0; i < run.merge.times.size(); ++i) {
    if (i > 0 && run.merge.unmerged[i] > run.merge.unmerged[i - 1]) ++rises;
    excess = std::max(excess, run.merge.unmerged[i] - 3.0 * run.merge.sigma[i] - run.envelope[i]);
  }
  checks.at_most("merge_curve_non_increasing (violations)", static_cast<double>(rises), 0.0);
  checks.at_most("merge_curve_envelope (max excess)", excess, 0.0);
}

void verify_shotnoise(const ShotNoiseCheck& sn, CheckList& checks) {
  checks.at_most("example2_balance_residual", sn.max_balance_residual, 1e-6);
  checks.below("example2_tail_bound", sn.density.tail_bound, 1e-6);
  checks.at_most("shotnoise_mean (z)", z_score(sn.moments.mean.mean - sn.analytic_mean, sn.moments.mean.sigma), 3.0);
  checks.at_most("shotnoise_variance (z)",
                 z_score(sn.moments.variance.mean - sn.analytic_variance, sn.moments.variance.sigma), 3.0);
  checks.below("shotnoise_ks", sn.ks, sn.ks_limit);
}

void suite_verify(const ExperimentConfig& cfg, Artifacts& art, SuiteResult& result) {
  CheckList checks;
  SimulationRun run = run_sampling(cfg);
  verify_sampling(cfg, run, checks);

  std::vector<ChainRun> chains;
  if (cfg.plasticity.empty() && !cfg.chain.q.empty()) {
    chains = run_chains(cfg, nullptr);
    verify_chains(chains, checks);
  }
  if (auto rate = example1_applicable(cfg)) verify_example1(cfg, *rate, run, chains, checks);
  if (cfg.plasticity.empty()) verify_coupling(cfg, run_coupling(cfg), checks);
  if (cfg.analytic.shotnoise) verify_shotnoise(run_shotnoise(cfg), checks);

  // Determinism: a short run repeated with the same seed.
  {
    SimulationContext ctx = simulation_context(cfg);
    attach_plasticity(ctx);
    WindowState start = WindowState::empty(cfg.network.theta(), cfg.network.num_units());
    double horizon = std::min(cfg.run.horizon, 200.0 * cfg.network.theta());
    auto a = simulate(cfg.network, start, horizon, cfg.run.seed, ctx.sampling.simulation);
    auto b = simulate(cfg.network, start, horizon, cfg.run.seed, ctx.sampling.simulation);
    checks.at_most("rerun_identical (differences)", a == b ? 0.0 : 1.0, 0.0);
  }

  result.checks = checks.checks();
  {
    auto out = art.table("verify.tsv", "cross-route checks");
    out << "check\tvalue\trelation\tlimit\tpass\n";
    for (const auto& c : result.checks)
      out << c.name << '\t' << c.value << '\t' << c.relation << '\t' << c.limit << '\t' << (c.passed ? "PASS" : "FAIL")
          << '\n';
  }
  json arr = json::array();
  for (const auto& c : result.checks)
    arr.push_back({{"check", c.name}, {"value", c.value}, {"relation", c.relation}, {"limit", c.limit}, {"pass", c.passed}});
  art.summary({{"checks", arr}, {"passed", result.passed()}});
}

}  // namespace

SuiteResult run_suite(const ExperimentConfig& cfg, Suite suite, const std::filesystem::path& out_dir) {
  SuiteResult result;
  result.suite = suite;
  try {
    Artifacts art(cfg, out_dir, result);
    switch (suite) {
      case Suite::simulate: suite_simulate(cfg, art); break;
      case Suite::couple: suite_couple(cfg, art); break;
      case Suite::chain: suite_chain(cfg, art); break;
      case Suite::analytic: suite_analytic(cfg, art); break;
      case Suite::verify: suite_verify(cfg, art, result); break;
    }
  } catch (const ChainSizeError&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error(suite_name(suite) + ": " + e.what());
  }
  return result;
}

}  // namespace pnn
