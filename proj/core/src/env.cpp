#include "stacca/env.hpp"

#include <algorithm>
#include <cmath>

#include "stacca/errors.hpp"

namespace stacca {

EnvConfig EnvConfig::epidemic_defaults() {
  EnvConfig c;
  c.kind = EnvKind::Epidemic;
  c.beta0 = 0.15;
  c.eta = 0.9;
  c.delta_recovery = 0.1;
  c.reward.w_ctrl = 2.0;
  c.reward.a_ctrl = 2.0;
  c.reward.w_cat = 5.0;
  c.reward.cat_threshold = 0.3;
  c.reward.cat_steepness = 20.0;
  c.reward.w_lin = 1.0;
  c.reward.eradication_bonus = 3.0;
  return c;
}

EnvConfig EnvConfig::rumor_defaults() {
  EnvConfig c;
  c.kind = EnvKind::Rumor;
  c.beta0 = 0.25;
  c.kappa = 3.0;
  c.reward.w_ctrl = 1.0;
  c.reward.a_ctrl = 2.0;
  c.reward.w_lin = 2.0;
  return c;
}

void EnvConfig::validate(int num_nodes) const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(beta0)) throw config_error("env.beta0 outside [0,1]");
  if (!in_unit(eta)) throw config_error("env.eta outside [0,1]");
  if (!in_unit(delta_recovery)) throw config_error("env.delta_recovery outside [0,1]");
  if (kind == EnvKind::Rumor && kappa <= 0.0) throw config_error("env.kappa must be positive");
  if (delta_c <= 0.0 || delta_c > 1.0) throw config_error("env.delta_c outside (0,1]");
  if (horizon < 1) throw config_error("env.horizon must be >= 1");
  if (num_seeds < 1 || num_seeds > num_nodes)
    throw config_error("env.num_seeds must be in [1, num_nodes]");
  if (obs_hops < 0) throw config_error("env.obs_hops must be >= 0");
  if (n_train_ref < 1) throw config_error("env.n_train_ref must be >= 1");
  if (reward.w_ctrl < 0 || reward.a_ctrl < 0 || reward.w_cat < 0 ||
      reward.w_lin < 0 || reward.eradication_bonus < 0)
    throw config_error("env.reward weights must be >= 0");
  if (reward.cat_threshold <= 0.0 || reward.cat_threshold >= 1.0)
    throw config_error("env.reward.cat_threshold outside (0,1)");
}

GlobalState GlobalState::from_nodes(std::vector<NodeState> nodes, int t) {
  GlobalState s;
  s.flagged_ = 0;
  s.control_sum_ = 0.0;
  for (const auto& n : nodes) {
    s.flagged_ += n.h;
    s.control_sum_ += n.c;
  }
  s.nodes_ = std::make_shared<const std::vector<NodeState>>(std::move(nodes));
  s.t_ = t;
  return s;
}

GlobalState GlobalState::with_control(int i, double c) const {
  if (override_idx_ >= 0 && override_idx_ != i)
    throw std::logic_error("GlobalState: only one overlay node supported");
  GlobalState out = *this;
  const NodeState base = node(i);
  out.override_idx_ = i;
  out.override_node_ = {base.h, c};
  out.control_sum_ = control_sum_ - base.c + c;
  return out;
}

std::vector<NodeState> GlobalState::nodes() const {
  std::vector<NodeState> out = *nodes_;
  if (override_idx_ >= 0) out[static_cast<size_t>(override_idx_)] = override_node_;
  return out;
}

TransitionNoise draw_noise(int num_nodes, RngStream& rng) {
  TransitionNoise n;
  n.u.resize(static_cast<size_t>(num_nodes));
  for (auto& u : n.u) u = rng.next_double();
  return n;
}

GlobalState reset(const EnvConfig& config, const Graph& graph, RngStream& rng) {
  config.validate(graph.num_nodes);
  std::vector<NodeState> nodes(static_cast<size_t>(graph.num_nodes));
  // partial Fisher-Yates over node indices for distinct seed nodes
  std::vector<int> order(static_cast<size_t>(graph.num_nodes));
  for (int i = 0; i < graph.num_nodes; ++i) order[static_cast<size_t>(i)] = i;
  for (int i = 0; i < config.num_seeds; ++i) {
    const int j = i + rng.next_int(graph.num_nodes - i);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    nodes[static_cast<size_t>(order[static_cast<size_t>(i)])].h = 1;
  }
  return GlobalState::from_nodes(std::move(nodes), 0);
}

GlobalState reset(const EnvConfig& config, const Graph& graph, std::uint64_t seed) {
  RngStream rng(seed, Stream::EnvReset);
  return reset(config, graph, rng);
}

int infected_neighbor_count(const GlobalState& state, const Graph& graph, int i) {
  int count = 0;
  for (int j : graph.adjacency[static_cast<size_t>(i)]) count += state.node(j).h;
  return count;
}

namespace {

// exact integer power, deterministic across libms
double ipow(double base, int e) {
  double out = 1.0;
  for (int k = 0; k < e; ++k) out *= base;
  return out;
}

double clamp_rate(double beta) {
  if (beta < -1e-12 || beta > 1.0 + 1e-12)
    throw numeric_error("transmission rate left [0,1] under a validated config");
  return std::min(std::max(beta, 0.0), 1.0);
}

}  // namespace

double transition_prob_stay_clear(const EnvConfig& config, const GlobalState& state,
                                  int i, int infected_neighbors) {
  const NodeState n = state.node(i);
  if (config.kind == EnvKind::Epidemic) {
    if (n.h == 1) return config.delta_recovery;
    const double beta = clamp_rate((1.0 - config.eta * n.c) * config.beta0);
    return ipow(1.0 - beta, infected_neighbors);
  }
  if (n.h == 1) return 0.0;  // awareness is absorbing
  const double saturation = std::pow(1.0 - state.flagged_fraction(), config.kappa);
  const double beta = clamp_rate(n.c * saturation * config.beta0);
  return ipow(1.0 - beta, infected_neighbors);
}

double team_reward(const EnvConfig& config, const GlobalState& state) {
  const RewardConfig& rw = config.reward;
  const double mean_c = state.control_mean();
  const double frac = state.flagged_fraction();
  const double ctrl_pen = rw.w_ctrl * (std::exp(rw.a_ctrl * mean_c) - 1.0);
  double r = 0.0;
  if (config.kind == EnvKind::Epidemic) {
    const double cat =
        1.0 / (1.0 + std::exp(-rw.cat_steepness * (frac - rw.cat_threshold)));
    r = -ctrl_pen - rw.w_cat * cat - rw.w_lin * frac;
    if (state.flagged_count() == 0) r += rw.eradication_bonus;
    const double lo = -(rw.w_ctrl * (std::exp(rw.a_ctrl) - 1.0) + rw.w_cat + rw.w_lin);
    if (r < lo - 1e-9 || r > rw.eradication_bonus + 1e-9)
      throw numeric_error("epidemic reward left its admissible range");
  } else {
    r = -ctrl_pen + rw.w_lin * frac;
  }
  return r;
}

StepResult step(const EnvConfig& config, const Graph& graph, const GlobalState& state,
                const std::vector<ActionDelta>& joint_action,
                const TransitionNoise& noise) {
  const int n = state.size();
  if (static_cast<int>(joint_action.size()) != n)
    throw std::invalid_argument("step: joint action size mismatch");
  if (static_cast<int>(noise.u.size()) != n)
    throw std::invalid_argument("step: noise size mismatch");

  std::vector<NodeState> next(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double stay_clear = transition_prob_stay_clear(
        config, state, i, infected_neighbor_count(state, graph, i));
    next[static_cast<size_t>(i)].h = noise.u[static_cast<size_t>(i)] < stay_clear ? 0 : 1;
    const double c = state.node(i).c + action_step(joint_action[static_cast<size_t>(i)],
                                                   config.delta_c);
    next[static_cast<size_t>(i)].c = std::min(std::max(c, 0.0), 1.0);
  }
  StepResult out;
  out.next = GlobalState::from_nodes(std::move(next), state.t() + 1);
  out.reward = team_reward(config, out.next);
  return out;
}

StepResult branch_from(const EnvConfig& config, const GlobalState& state,
                       const std::vector<ActionDelta>& joint_action,
                       const StepResult& factual, int i, ActionDelta alt) {
  const double c_alt = std::min(
      std::max(state.node(i).c + action_step(alt, config.delta_c), 0.0), 1.0);
  // status transitions do not depend on the current action, so a bitwise
  // identity branch falls out whenever the control level is unchanged
  if (c_alt == factual.next.node(i).c) return factual;
  StepResult out;
  out.next = factual.next.with_control(i, c_alt);
  out.reward = team_reward(config, out.next);
  return out;
}

StepResult counterfactual_branch(const EnvConfig& config, const Graph& graph,
                                 const GlobalState& state,
                                 const std::vector<ActionDelta>& joint_action,
                                 const TransitionNoise& noise, int i, ActionDelta alt) {
  if (joint_action[static_cast<size_t>(i)] == alt)
    return step(config, graph, state, joint_action, noise);
  return branch_from(config, state, joint_action,
                     step(config, graph, state, joint_action, noise), i, alt);
}

double degree_feature(int degree, int n_train_ref) {
  return std::log1p(static_cast<double>(degree)) /
         std::log1p(static_cast<double>(n_train_ref));
}

ObsBuilder::ObsBuilder(const EnvConfig& config, const Graph& graph) : graph_(&graph) {
  deg_feat_.resize(static_cast<size_t>(graph.num_nodes));
  for (int v = 0; v < graph.num_nodes; ++v)
    deg_feat_[static_cast<size_t>(v)] = degree_feature(graph.degree(v), config.n_train_ref);

  subs_.reserve(static_cast<size_t>(graph.num_nodes));
  static_obs_.reserve(static_cast<size_t>(graph.num_nodes));
  const double dist_norm = 1.0 / std::max(config.obs_hops, 1);
  for (int ego = 0; ego < graph.num_nodes; ++ego) {
    Subgraph sub = k_hop_subgraph(graph, ego, config.obs_hops);
    std::vector<int> dist = bfs_distances(sub.graph, sub.ego_local);
    std::vector<double> stat;
    stat.reserve(static_cast<size_t>(sub.graph.num_nodes) * 3);
    for (int local = 0; local < sub.graph.num_nodes; ++local) {
      stat.push_back(local == sub.ego_local ? 1.0 : 0.0);
      stat.push_back(deg_feat_[static_cast<size_t>(sub.node_map[static_cast<size_t>(local)])]);
      stat.push_back(dist[static_cast<size_t>(local)] * dist_norm);
    }
    static_obs_.push_back(std::move(stat));
    subs_.push_back(std::move(sub));
  }
}

void ObsBuilder::fill_obs_features(const GlobalState& state, int ego, double* out) const {
  const Subgraph& sub = subs_[static_cast<size_t>(ego)];
  const std::vector<double>& stat = static_obs_[static_cast<size_t>(ego)];
  for (int local = 0; local < sub.graph.num_nodes; ++local) {
    const NodeState n = state.node(sub.node_map[static_cast<size_t>(local)]);
    out[local * kObsFeatures + 0] = stat[static_cast<size_t>(local) * 3 + 0];
    out[local * kObsFeatures + 1] = static_cast<double>(n.h);
    out[local * kObsFeatures + 2] = n.c;
    out[local * kObsFeatures + 3] = stat[static_cast<size_t>(local) * 3 + 1];
    out[local * kObsFeatures + 4] = stat[static_cast<size_t>(local) * 3 + 2];
  }
}

LocalObservation ObsBuilder::observe(const GlobalState& state, int ego) const {
  LocalObservation obs;
  obs.subgraph = subs_[static_cast<size_t>(ego)];
  obs.ego_local = obs.subgraph.ego_local;
  obs.features.resize(static_cast<size_t>(obs.subgraph.graph.num_nodes) * kObsFeatures);
  fill_obs_features(state, ego, obs.features.data());
  return obs;
}

void ObsBuilder::fill_critic_features(const GlobalState& state, double* out) const {
  for (int v = 0; v < graph_->num_nodes; ++v) {
    const NodeState n = state.node(v);
    out[v * kCriticFeatures + 0] = static_cast<double>(n.h);
    out[v * kCriticFeatures + 1] = n.c;
    out[v * kCriticFeatures + 2] = deg_feat_[static_cast<size_t>(v)];
  }
}

LocalObservation observe(const EnvConfig& config, const Graph& graph,
                         const GlobalState& state, int ego) {
  if (ego < 0 || ego >= graph.num_nodes)
    throw std::invalid_argument("observe: ego index out of range");
  LocalObservation obs;
  obs.subgraph = k_hop_subgraph(graph, ego, config.obs_hops);
  obs.ego_local = obs.subgraph.ego_local;
  const int n = obs.subgraph.graph.num_nodes;
  obs.features.resize(static_cast<size_t>(n) * kObsFeatures);
  std::vector<int> dist = bfs_distances(obs.subgraph.graph, obs.ego_local);
  const double dist_norm = 1.0 / std::max(config.obs_hops, 1);
  for (int local = 0; local < n; ++local) {
    const int orig = obs.subgraph.node_map[static_cast<size_t>(local)];
    const NodeState ns = state.node(orig);
    double* row = obs.features.data() + local * kObsFeatures;
    row[0] = local == obs.ego_local ? 1.0 : 0.0;
    row[1] = static_cast<double>(ns.h);
    row[2] = ns.c;
    row[3] = degree_feature(graph.degree(orig), config.n_train_ref);
    row[4] = dist[static_cast<size_t>(local)] * dist_norm;
  }
  return obs;
}

std::vector<double> critic_features(const EnvConfig& config, const Graph& graph,
                                    const GlobalState& state) {
  std::vector<double> out(static_cast<size_t>(graph.num_nodes) * kCriticFeatures);
  for (int v = 0; v < graph.num_nodes; ++v) {
    const NodeState n = state.node(v);
    out[static_cast<size_t>(v) * kCriticFeatures + 0] = static_cast<double>(n.h);
    out[static_cast<size_t>(v) * kCriticFeatures + 1] = n.c;
    out[static_cast<size_t>(v) * kCriticFeatures + 2] =
        degree_feature(graph.degree(v), config.n_train_ref);
  }
  return out;
}

void append_trace(std::ostream& out, const GlobalState& state,
                  const std::vector<ActionDelta>& actions, double reward) {
  out << "{\"t\":" << state.t() << ",\"h\":\"";
  for (int i = 0; i < state.size(); ++i) out << (state.node(i).h ? '1' : '0');
  out << "\",\"c\":[";
  for (int i = 0; i < state.size(); ++i) {
    if (i) out << ",";
    out << state.node(i).c;
  }
  out << "],\"actions\":[";
  for (size_t i = 0; i < actions.size(); ++i) {
    if (i) out << ",";
    out << static_cast<int>(actions[i]);
  }
  out << "],\"reward\":" << reward << "}\n";
}

}  // namespace stacca
