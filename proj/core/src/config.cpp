#include "sdlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sdlab {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::map<std::string, std::string>& ExperimentConfig::default_map() {
  static const std::map<std::string, std::string> defaults = {
      {"schedule.t_max", "1000"},
      {"schedule.beta_start", "0.0001"},
      {"schedule.beta_end", "0.02"},
      {"world.seed", "42"},
      {"world.n", "32"},
      {"world.d", "48"},
      {"world.pose_count", "16"},
      {"world.input_pose", "0"},
      {"world.sigma_c", "0.05"},
      {"world.k_modes", "3"},
      {"world.jitter", "2"},
      {"world.prior_sigma", "0.2"},
      {"bias.enabled", "true"},
      {"bias.gamma", "2"},
      {"bias.mean_shift", "6"},
      {"bias.offset_trainmatched", "0.1"},
      {"bias.offset_zero", "0.3"},
      {"bias.mode", "inference_zero"},
      {"guidance.omega", "7.5"},
      {"distill.engine", "usd"},
      {"distill.lambda", "0"},
      {"distill.steps", "800"},
      {"distill.learning_rate", "0.01"},
      {"distill.optimizer", "adam"},
      {"distill.beta1", "0.9"},
      {"distill.beta2", "0.95"},
      {"distill.wt", "uniform"},
      {"distill.include_sqrt_alpha", "true"},
      {"distill.theta_init", "0.5"},
      {"distill.anneal_hi_start", "0.98"},
      {"distill.anneal_hi_end", "0.5"},
      {"distill.anneal_lo", "0.02"},
      {"distill.anneal_steps", "0"},
      {"distill.beta_rv", "0.1"},
      {"distill.rv_compare", "false"},
      {"sweep.seeds", "10"},
      {"sweep.base_seed", "1234"},
      {"lambda_sweep.values", "0,0.5,1"},
      {"alpha_sweep.values", "5,7.5,10"},
      {"engines", "sds,lambda,usd,dds,csd,vsd_lite"},
      {"denoise.t_levels", "50,100,200,300"},
      {"denoise.eta", "0"},
      {"gap.t_levels", "50,100,200,300,500,600"},
      {"gap.draws", "200"},
      {"sampler.steps", "120"},
      {"sampler.seeds", "50"},
      {"sample.combiner", "collapsed"},
      {"sample.steps", "120"},
      {"sample.eta", "0"},
      {"sample.from_noise_level", "0"},
      {"sample.seed", "1"},
  };
  return defaults;
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.kv_ = default_map();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  ExperimentConfig c = defaults();
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: missing '=' at " + path + ":" + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      c.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " at " + path + ":" + std::to_string(lineno));
    }
  }
  return c;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (default_map().find(key) == default_map().end())
    throw ConfigError("config: unknown key '" + key + "'");
  if (value.empty()) throw ConfigError("config: empty value for '" + key + "'");
  kv_[key] = value;
}

void ExperimentConfig::set_pair(const std::string& pair) {
  const auto eq = pair.find('=');
  if (eq == std::string::npos) throw ConfigError("config: --set expects key=value, got '" + pair + "'");
  set(trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)));
}

const std::string& ExperimentConfig::str(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("config: unknown key '" + key + "'");
  return it->second;
}

std::int64_t ExperimentConfig::i64(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    const std::int64_t out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return out;
  } catch (...) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

double ExperimentConfig::f64(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return out;
  } catch (...) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

bool ExperimentConfig::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<double> ExperimentConfig::f64_list(const std::string& key) const {
  const std::string& v = str(key);
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("config: empty element in list '" + key + "'");
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("");
    } catch (...) {
      throw ConfigError("config: bad number '" + item + "' in list '" + key + "'");
    }
  }
  if (out.empty()) throw ConfigError("config: list '" + key + "' is empty");
  return out;
}

std::vector<int> ExperimentConfig::int_list(const std::string& key) const {
  std::vector<int> out;
  for (double v : f64_list(key)) {
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
      throw ConfigError("config: list '" + key + "' expects integers");
    out.push_back(i);
  }
  return out;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv_) {  // std::map iterates sorted
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical()); }

NoiseSchedule ExperimentConfig::schedule() const {
  return make_linear_schedule(static_cast<int>(i64("schedule.t_max")), f64("schedule.beta_start"),
                              f64("schedule.beta_end"));
}

WorldConfig ExperimentConfig::world_config() const {
  WorldConfig w;
  w.n = static_cast<int>(i64("world.n"));
  w.d = static_cast<int>(i64("world.d"));
  w.pose_count = static_cast<int>(i64("world.pose_count"));
  w.input_pose = f64("world.input_pose");
  w.sigma_c = f64("world.sigma_c");
  w.k_modes = static_cast<int>(i64("world.k_modes"));
  w.jitter = f64("world.jitter");
  w.prior_sigma = f64("world.prior_sigma");
  return w;
}

std::uint64_t ExperimentConfig::world_seed() const {
  return static_cast<std::uint64_t>(i64("world.seed"));
}

BiasConfig ExperimentConfig::bias_config(int dim) const {
  if (!flag("bias.enabled")) return BiasConfig::none(dim);
  BiasConfig b = BiasConfig::defaults(dim);
  b.gamma = f64("bias.gamma");
  b.mean_offset = f64("bias.mean_shift") * bias_shift_direction(dim);
  // offset magnitudes are per latent unit, like BiasConfig::defaults
  const Vec u = std::sqrt(static_cast<double>(dim)) * bias_offset_direction(dim);
  b.offset_train = f64("bias.offset_trainmatched") * u;
  b.offset_zero = f64("bias.offset_zero") * u;
  return b;
}

BiasMode ExperimentConfig::bias_mode() const {
  const std::string& m = str("bias.mode");
  if (m == "train_matched") return BiasMode::TrainMatched;
  if (m == "inference_zero") return BiasMode::InferenceZero;
  throw ConfigError("config: bias.mode expects train_matched or inference_zero, got '" + m + "'");
}

DistillConfig ExperimentConfig::distill_config() const {
  DistillConfig d;
  d.engine = engine_from_name(str("distill.engine"));
  d.omega = f64("guidance.omega");
  d.lambda = f64("distill.lambda");
  d.steps = static_cast<int>(i64("distill.steps"));
  d.learning_rate = f64("distill.learning_rate");
  const std::string& opt = str("distill.optimizer");
  if (opt == "adam")
    d.optimizer = OptimizerKind::AdaptiveMoment;
  else if (opt == "sgd")
    d.optimizer = OptimizerKind::PlainSgd;
  else
    throw ConfigError("config: distill.optimizer expects adam or sgd, got '" + opt + "'");
  d.beta1 = f64("distill.beta1");
  d.beta2 = f64("distill.beta2");
  const std::string& wt = str("distill.wt");
  if (wt == "uniform")
    d.wt = WtKind::Uniform;
  else if (wt == "one_minus_alpha_bar")
    d.wt = WtKind::OneMinusAlphaBar;
  else
    throw ConfigError("config: distill.wt expects uniform or one_minus_alpha_bar, got '" + wt + "'");
  d.include_sqrt_alpha_in_chain = flag("distill.include_sqrt_alpha");
  d.theta_init = f64("distill.theta_init");
  d.annealer.hi_start = f64("distill.anneal_hi_start");
  d.annealer.hi_end = f64("distill.anneal_hi_end");
  d.annealer.lo = f64("distill.anneal_lo");
  d.annealer.anneal_steps = static_cast<int>(i64("distill.anneal_steps"));
  d.beta_rv = f64("distill.beta_rv");
  d.seed = static_cast<std::uint64_t>(i64("sweep.base_seed"));
  return d;
}

}  // namespace sdlab
