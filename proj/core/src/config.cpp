#include "stacca/config.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "stacca/errors.hpp"

namespace stacca {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvTree KvTree::parse_string(const std::string& text) {
  KvTree kv;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error("config line " + std::to_string(line_no) +
                           ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) +
                         ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw config_error("config line " + std::to_string(line_no) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    kv.values_[key] = value;
  }
  return kv;
}

KvTree KvTree::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw artifact_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

void KvTree::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

bool KvTree::has(const std::string& key) const {
  consumed_.insert(key);
  return values_.count(key) > 0;
}

std::string KvTree::get_str(const std::string& key, const std::string& def) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

std::string KvTree::get_str(const std::string& key) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) throw config_error("missing required config key: " + key);
  return it->second;
}

int KvTree::get_int(const std::string& key, int def) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw config_error("config key " + key + ": expected integer, got '" +
                       it->second + "'");
  }
}

double KvTree::get_double(const std::string& key, double def) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw config_error("config key " + key + ": expected number, got '" +
                       it->second + "'");
  }
}

bool KvTree::get_bool(const std::string& key, bool def) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw config_error("config key " + key + ": expected true/false, got '" +
                     it->second + "'");
}

std::uint64_t KvTree::get_u64(const std::string& key, std::uint64_t def) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    size_t pos = 0;
    const std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw config_error("config key " + key + ": expected unsigned integer, got '" +
                       it->second + "'");
  }
}

void KvTree::require_all_consumed() const {
  for (const auto& [key, value] : values_)
    if (!consumed_.count(key))
      throw config_error("unknown config key: " + key);
}

std::vector<std::pair<std::string, std::string>> KvTree::items() const {
  return {values_.begin(), values_.end()};
}

std::string to_string(GraphFamily family) {
  return family == GraphFamily::BarabasiAlbert ? "ba" : "ws";
}

std::string to_string(EnvKind kind) {
  return kind == EnvKind::Epidemic ? "epidemic" : "rumor";
}

GraphSpec graph_spec_from_kv(const KvTree& kv, const std::string& prefix) {
  GraphSpec g;
  const std::string family = kv.get_str(prefix + ".family", "ba");
  if (family == "ba")
    g.family = GraphFamily::BarabasiAlbert;
  else if (family == "ws")
    g.family = GraphFamily::WattsStrogatz;
  else
    throw config_error("config key " + prefix + ".family: expected ba or ws");
  g.num_nodes = kv.get_int(prefix + ".n", 50);
  g.seed = kv.get_u64(prefix + ".seed", 0);
  if (g.family == GraphFamily::BarabasiAlbert) {
    g.ba_m = kv.get_int(prefix + ".m", 1);
    if (kv.has(prefix + ".k") || kv.has(prefix + ".p"))
      throw config_error("config key " + prefix + ".k/.p: WS-only parameter on a BA graph");
  } else {
    g.ws_k = kv.get_int(prefix + ".k", 4);
    g.ws_p = kv.get_double(prefix + ".p", 0.1);
    if (kv.has(prefix + ".m"))
      throw config_error("config key " + prefix + ".m: BA-only parameter on a WS graph");
  }
  return g;
}

EnvConfig env_config_from_kv(const KvTree& kv, const std::string& prefix) {
  const std::string kind = kv.get_str(prefix + ".kind", "epidemic");
  EnvConfig base;
  if (kind == "epidemic")
    base = EnvConfig::epidemic_defaults();
  else if (kind == "rumor")
    base = EnvConfig::rumor_defaults();
  else
    throw config_error("config key " + prefix + ".kind: expected epidemic or rumor");

  // cross-field consistency: reject knobs that do not exist for this kind
  if (base.kind == EnvKind::Rumor) {
    for (const char* key : {".eta", ".delta_recovery", ".reward.w_cat",
                            ".reward.cat_threshold", ".reward.cat_steepness",
                            ".reward.eradication_bonus"})
      if (kv.has(prefix + key))
        throw config_error("config key " + prefix + key +
                           ": epidemic-only parameter in a rumor config");
  } else if (kv.has(prefix + ".kappa")) {
    throw config_error("config key " + prefix +
                       ".kappa: rumor-only parameter in an epidemic config");
  }

  base.beta0 = kv.get_double(prefix + ".beta0", base.beta0);
  base.eta = kv.get_double(prefix + ".eta", base.eta);
  base.delta_recovery = kv.get_double(prefix + ".delta_recovery", base.delta_recovery);
  base.kappa = kv.get_double(prefix + ".kappa", base.kappa);
  base.delta_c = kv.get_double(prefix + ".delta_c", base.delta_c);
  base.num_seeds = kv.get_int(prefix + ".num_seeds", base.num_seeds);
  base.horizon = kv.get_int(prefix + ".horizon", base.horizon);
  base.obs_hops = kv.get_int(prefix + ".obs_hops", base.obs_hops);
  base.n_train_ref = kv.get_int(prefix + ".n_train_ref", base.n_train_ref);
  base.reward.w_ctrl = kv.get_double(prefix + ".reward.w_ctrl", base.reward.w_ctrl);
  base.reward.a_ctrl = kv.get_double(prefix + ".reward.a_ctrl", base.reward.a_ctrl);
  base.reward.w_lin = kv.get_double(prefix + ".reward.w_lin", base.reward.w_lin);
  if (base.kind == EnvKind::Epidemic) {
    base.reward.w_cat = kv.get_double(prefix + ".reward.w_cat", base.reward.w_cat);
    base.reward.cat_threshold =
        kv.get_double(prefix + ".reward.cat_threshold", base.reward.cat_threshold);
    base.reward.cat_steepness =
        kv.get_double(prefix + ".reward.cat_steepness", base.reward.cat_steepness);
    base.reward.eradication_bonus = kv.get_double(prefix + ".reward.eradication_bonus",
                                                  base.reward.eradication_bonus);
  }
  return base;
}

ModelConfig model_config_from_kv(const KvTree& kv, const std::string& prefix) {
  ModelConfig m;
  m.d_model = kv.get_int(prefix + ".d_model", m.d_model);
  m.n_gat_layers = kv.get_int(prefix + ".n_gat_layers", m.n_gat_layers);
  m.n_enc_layers = kv.get_int(prefix + ".n_enc_layers", m.n_enc_layers);
  m.n_heads = kv.get_int(prefix + ".n_heads", m.n_heads);
  m.d_ff = kv.get_int(prefix + ".d_ff", m.d_ff);
  m.actor_hidden = kv.get_int(prefix + ".actor_hidden", m.actor_hidden);
  m.critic_hidden = kv.get_int(prefix + ".critic_hidden", m.critic_hidden);
  m.variant = model_variant_from_string(kv.get_str(prefix + ".variant", "stacca"));
  m.validate();
  return m;
}

TrainConfig train_config_from_kv(const KvTree& kv, const EnvConfig& env,
                                 const std::string& prefix) {
  TrainConfig t;
  t.gamma = kv.get_double(prefix + ".gamma", t.gamma);
  t.gae_lambda = kv.get_double(prefix + ".gae_lambda", t.gae_lambda);
  t.clip_eps = kv.get_double(prefix + ".clip_eps", t.clip_eps);
  t.lr_actor = kv.get_double(prefix + ".lr_actor", t.lr_actor);
  t.lr_critic = kv.get_double(prefix + ".lr_critic", t.lr_critic);
  t.k_pi = kv.get_int(prefix + ".k_pi", t.k_pi);
  t.k_v = kv.get_int(prefix + ".k_v", t.k_v);
  t.episodes_per_iter = kv.get_int(prefix + ".episodes_per_iter", t.episodes_per_iter);
  t.horizon = kv.get_int(prefix + ".horizon", env.horizon);
  t.iters = kv.get_int(prefix + ".iters", t.iters);
  t.advantage_mode = advantage_mode_from_string(
      kv.get_str(prefix + ".advantage_mode", "counterfactual"));
  t.value_loss = value_loss_from_string(kv.get_str(prefix + ".value_loss", "huber"));
  t.huber_delta = kv.get_double(prefix + ".huber_delta", t.huber_delta);
  t.entropy_coef = kv.get_double(prefix + ".entropy_coef", t.entropy_coef);
  t.norm_eps = kv.get_double(prefix + ".norm_eps", t.norm_eps);
  t.seed = kv.get_u64(prefix + ".seed", t.seed);
  t.minibatch_size = kv.get_int(prefix + ".minibatch_size", t.minibatch_size);
  t.checkpoint_every = kv.get_int(prefix + ".checkpoint_every", t.checkpoint_every);
  t.threads = kv.get_int(prefix + ".threads", t.threads);
  t.validate();
  return t;
}

ExperimentConfig load_experiment_config(const KvTree& kv) {
  ExperimentConfig cfg;
  cfg.graph = graph_spec_from_kv(kv);
  cfg.env = env_config_from_kv(kv);
  cfg.model = model_config_from_kv(kv);
  cfg.train = train_config_from_kv(kv, cfg.env);
  cfg.output_dir = kv.get_str("output_dir", cfg.output_dir);
  cfg.run_name = kv.get_str("run_name", cfg.run_name);
  kv.require_all_consumed();
  cfg.env.validate(cfg.graph.num_nodes);
  return cfg;
}

namespace {

// shortest representation that parses back to the identical double
std::string num(double x) {
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::stod(buf) == x) break;
  }
  return buf;
}

}  // namespace

void write_graph_spec(std::ostream& out, const GraphSpec& g, const std::string& prefix) {
  out << prefix << ".family = " << to_string(g.family) << "\n";
  out << prefix << ".n = " << g.num_nodes << "\n";
  out << prefix << ".seed = " << g.seed << "\n";
  if (g.family == GraphFamily::BarabasiAlbert) {
    out << prefix << ".m = " << g.ba_m << "\n";
  } else {
    out << prefix << ".k = " << g.ws_k << "\n";
    out << prefix << ".p = " << num(g.ws_p) << "\n";
  }
}

void write_env_config(std::ostream& out, const EnvConfig& e, const std::string& prefix) {
  out << prefix << ".kind = " << to_string(e.kind) << "\n";
  out << prefix << ".beta0 = " << num(e.beta0) << "\n";
  if (e.kind == EnvKind::Epidemic) {
    out << prefix << ".eta = " << num(e.eta) << "\n";
    out << prefix << ".delta_recovery = " << num(e.delta_recovery) << "\n";
  } else {
    out << prefix << ".kappa = " << num(e.kappa) << "\n";
  }
  out << prefix << ".delta_c = " << num(e.delta_c) << "\n";
  out << prefix << ".num_seeds = " << e.num_seeds << "\n";
  out << prefix << ".horizon = " << e.horizon << "\n";
  out << prefix << ".obs_hops = " << e.obs_hops << "\n";
  out << prefix << ".n_train_ref = " << e.n_train_ref << "\n";
  out << prefix << ".reward.w_ctrl = " << num(e.reward.w_ctrl) << "\n";
  out << prefix << ".reward.a_ctrl = " << num(e.reward.a_ctrl) << "\n";
  out << prefix << ".reward.w_lin = " << num(e.reward.w_lin) << "\n";
  if (e.kind == EnvKind::Epidemic) {
    out << prefix << ".reward.w_cat = " << num(e.reward.w_cat) << "\n";
    out << prefix << ".reward.cat_threshold = " << num(e.reward.cat_threshold) << "\n";
    out << prefix << ".reward.cat_steepness = " << num(e.reward.cat_steepness) << "\n";
    out << prefix << ".reward.eradication_bonus = " << num(e.reward.eradication_bonus)
        << "\n";
  }
}

void write_model_config(std::ostream& out, const ModelConfig& m, const std::string& prefix) {
  out << prefix << ".d_model = " << m.d_model << "\n";
  out << prefix << ".n_gat_layers = " << m.n_gat_layers << "\n";
  out << prefix << ".n_enc_layers = " << m.n_enc_layers << "\n";
  out << prefix << ".n_heads = " << m.n_heads << "\n";
  out << prefix << ".d_ff = " << m.d_ff << "\n";
  out << prefix << ".actor_hidden = " << m.actor_hidden << "\n";
  out << prefix << ".critic_hidden = " << m.critic_hidden << "\n";
  out << prefix << ".variant = " << to_string(m.variant) << "\n";
}

void write_train_config(std::ostream& out, const TrainConfig& t, const std::string& prefix) {
  out << prefix << ".gamma = " << num(t.gamma) << "\n";
  out << prefix << ".gae_lambda = " << num(t.gae_lambda) << "\n";
  out << prefix << ".clip_eps = " << num(t.clip_eps) << "\n";
  out << prefix << ".lr_actor = " << num(t.lr_actor) << "\n";
  out << prefix << ".lr_critic = " << num(t.lr_critic) << "\n";
  out << prefix << ".k_pi = " << t.k_pi << "\n";
  out << prefix << ".k_v = " << t.k_v << "\n";
  out << prefix << ".episodes_per_iter = " << t.episodes_per_iter << "\n";
  out << prefix << ".horizon = " << t.horizon << "\n";
  out << prefix << ".iters = " << t.iters << "\n";
  out << prefix << ".advantage_mode = " << to_string(t.advantage_mode) << "\n";
  out << prefix << ".value_loss = " << to_string(t.value_loss) << "\n";
  out << prefix << ".huber_delta = " << num(t.huber_delta) << "\n";
  out << prefix << ".entropy_coef = " << num(t.entropy_coef) << "\n";
  out << prefix << ".norm_eps = " << num(t.norm_eps) << "\n";
  out << prefix << ".seed = " << t.seed << "\n";
  out << prefix << ".minibatch_size = " << t.minibatch_size << "\n";
  out << prefix << ".checkpoint_every = " << t.checkpoint_every << "\n";
  out << prefix << ".threads = " << t.threads << "\n";
}

void write_resolved(std::ostream& out, const ExperimentConfig& cfg) {
  out << "run_name = " << cfg.run_name << "\n";
  out << "output_dir = " << cfg.output_dir << "\n";
  write_graph_spec(out, cfg.graph);
  write_env_config(out, cfg.env);
  write_model_config(out, cfg.model);
  write_train_config(out, cfg.train);
}

}  // namespace stacca
