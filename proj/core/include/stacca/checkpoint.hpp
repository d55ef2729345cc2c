#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stacca/env.hpp"
#include "stacca/models.hpp"

namespace stacca {

/// Binary container mapping parameter-path strings to shape + row-major
/// doubles, with a text manifest up front. Round trips are bit-exact.
struct NamedTensors {
  std::string manifest;  // KvTree-parseable text
  std::map<std::string, std::pair<std::vector<int>, std::vector<double>>> entries;
};

void save_container(const std::string& path, const NamedTensors& data);
NamedTensors load_container(const std::string& path);

/// Model checkpoints carry both networks plus the model and environment
/// configuration needed to rebuild the exact architecture.
void save_checkpoint(const std::string& path, PolicyModel& policy,
                     ValueModel& critic, const EnvConfig& env);

struct LoadedModels {
  ModelConfig model_cfg;
  EnvConfig env;
  PolicyModel policy;
  ValueModel critic;
};

LoadedModels load_checkpoint(const std::string& path);

/// Adam moments and step counters, for exact training resume.
void save_opt_state(const std::string& path, PolicyModel& policy,
                    ValueModel& critic, long adam_t_actor, long adam_t_critic);
void load_opt_state(const std::string& path, PolicyModel& policy,
                    ValueModel& critic, long& adam_t_actor, long& adam_t_critic);

}  // namespace stacca
