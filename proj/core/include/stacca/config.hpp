#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stacca/env.hpp"
#include "stacca/graph.hpp"
#include "stacca/models.hpp"
#include "stacca/train.hpp"

namespace stacca {

/// Flat dotted-key configuration tree parsed from an INI-like text format:
/// `a.b.c = value` lines, optional `[section]` headers that prefix following
/// keys, and `#` comments. Reads are tracked so loaders can reject unknown
/// keys by name.
class KvTree {
 public:
  static KvTree parse_string(const std::string& text);
  static KvTree parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_str(const std::string& key, const std::string& def) const;
  std::string get_str(const std::string& key) const;  // required
  int get_int(const std::string& key, int def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;

  /// Throws config_error naming the first key that was never consumed.
  void require_all_consumed() const;
  std::vector<std::pair<std::string, std::string>> items() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

struct ExperimentConfig {
  GraphSpec graph;
  EnvConfig env;
  ModelConfig model;
  TrainConfig train;
  std::string output_dir = "runs";
  std::string run_name = "run";
};

std::string to_string(GraphFamily family);
std::string to_string(EnvKind kind);

GraphSpec graph_spec_from_kv(const KvTree& kv, const std::string& prefix = "graph");
EnvConfig env_config_from_kv(const KvTree& kv, const std::string& prefix = "env");
ModelConfig model_config_from_kv(const KvTree& kv, const std::string& prefix = "model");
TrainConfig train_config_from_kv(const KvTree& kv, const EnvConfig& env,
                                 const std::string& prefix = "train");

/// Full experiment load; rejects unknown keys.
ExperimentConfig load_experiment_config(const KvTree& kv);

void write_graph_spec(std::ostream& out, const GraphSpec& g,
                      const std::string& prefix = "graph");
void write_env_config(std::ostream& out, const EnvConfig& e,
                      const std::string& prefix = "env");
void write_model_config(std::ostream& out, const ModelConfig& m,
                        const std::string& prefix = "model");
void write_train_config(std::ostream& out, const TrainConfig& t,
                        const std::string& prefix = "train");

/// Every default materialized; output re-parses to the identical config.
void write_resolved(std::ostream& out, const ExperimentConfig& cfg);

}  // namespace stacca
