#include "stacca/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "stacca/checkpoint.hpp"
#include "stacca/errors.hpp"

namespace stacca {

namespace fs = std::filesystem;

std::string resolve_output_dir(const std::string& configured) {
  const char* env = std::getenv("STACCA_OUT");
  return env && *env ? std::string(env) : configured;
}

namespace {

std::string periodic_ckpt_name(int iter) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_iter%05d.bin", iter);
  return buf;
}

void dump_batch_diagnostics(const std::string& path, const RolloutBatch& batch,
                            int iter) {
  nlohmann::json j;
  j["iter"] = iter;
  j["episodes"] = batch.episodes.size();
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& ep : batch.episodes) {
    nlohmann::json e;
    std::vector<double> rewards, values;
    for (const auto& rec : ep.steps) {
      rewards.push_back(rec.reward);
      values.push_back(rec.value);
    }
    e["rewards"] = rewards;
    e["values"] = values;
    e["terminal_value"] = ep.terminal_value;
    eps.push_back(std::move(e));
  }
  j["per_episode"] = std::move(eps);
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

}  // namespace

RunResult run_training(const ExperimentConfig& cfg, const std::string& run_dir,
                       bool resume) {
  fs::create_directories(run_dir);
  const std::string metrics_path = run_dir + "/metrics.csv";
  const std::string metrics_jsonl_path = run_dir + "/metrics.jsonl";
  const std::string timings_path = run_dir + "/timings.csv";
  const std::string ckpt_last = run_dir + "/ckpt_last.bin";
  const std::string ckpt_best = run_dir + "/ckpt_best.bin";
  const std::string opt_last = run_dir + "/opt_last.bin";
  const std::string resume_path = run_dir + "/resume.txt";

  {
    std::ofstream resolved(run_dir + "/resolved.cfg");
    if (!resolved) throw artifact_error("cannot write into run dir: " + run_dir);
    write_resolved(resolved, cfg);
    std::ofstream seeds(run_dir + "/seeds.txt");
    seeds << "train.seed = " << cfg.train.seed << "\n"
          << "graph.seed = " << cfg.graph.seed << "\n"
          << "streams = graph-gen env-reset env-noise policy-sampling init shuffle\n";
  }

  const Graph graph = generate(cfg.graph);
  {
    std::ofstream gout(run_dir + "/graph.txt");
    save_edge_list(graph, gout);
  }

  Trainer trainer(cfg.env, graph, cfg.model, cfg.train);

  int start_iter = 0;
  double best_reward = 0.0;
  bool have_best = false;
  if (resume) {
    const KvTree rec = KvTree::parse_file(resume_path);
    start_iter = rec.get_int("next_iter", 0);
    have_best = rec.get_bool("have_best", false);
    best_reward = rec.get_double("best_reward", 0.0);
    LoadedModels models = load_checkpoint(ckpt_last);
    auto load_params = [](auto named_src, auto named_dst) {
      for (size_t i = 0; i < named_src.size(); ++i)
        named_dst[i].second->value = named_src[i].second->value;
    };
    load_params(models.policy.named_params(), trainer.policy().named_params());
    load_params(models.critic.named_params(), trainer.critic().named_params());
    load_opt_state(opt_last, trainer.policy(), trainer.critic(),
                   trainer.adam_t_actor, trainer.adam_t_critic);
  } else {
    std::ofstream(metrics_path) << metrics_csv_header() << "\n";
    std::ofstream(metrics_jsonl_path);
    std::ofstream(timings_path) << "iter,wall_ms\n";
    // initialized models are a valid checkpoint even before the first iteration
    save_checkpoint(ckpt_last, trainer.policy(), trainer.critic(), cfg.env);
  }

  std::ofstream metrics(metrics_path, std::ios::app);
  std::ofstream metrics_jsonl(metrics_jsonl_path, std::ios::app);
  std::ofstream timings(timings_path, std::ios::app);

  TrainHooks hooks;
  hooks.on_numeric_error = [&](const RolloutBatch& batch, int iter) {
    dump_batch_diagnostics(run_dir + "/diagnostic_dump.json", batch, iter);
  };
  hooks.on_iteration = [&](const IterMetrics& m) {
    metrics << metrics_csv_row(m) << "\n" << std::flush;
    metrics_jsonl << metrics_json_row(m) << "\n" << std::flush;
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", m.wall_ms);
    timings << m.iter << "," << wall << "\n" << std::flush;

    if (!have_best || m.mean_episode_reward > best_reward) {
      best_reward = m.mean_episode_reward;
      have_best = true;
      save_checkpoint(ckpt_best, trainer.policy(), trainer.critic(), cfg.env);
    }
    const bool last = m.iter + 1 == trainer.config().iters;
    if ((m.iter + 1) % trainer.config().checkpoint_every == 0 || last)
      save_checkpoint(run_dir + "/" + periodic_ckpt_name(m.iter + 1),
                      trainer.policy(), trainer.critic(), cfg.env);
    save_checkpoint(ckpt_last, trainer.policy(), trainer.critic(), cfg.env);
    save_opt_state(opt_last, trainer.policy(), trainer.critic(),
                   trainer.adam_t_actor, trainer.adam_t_critic);
    std::ofstream rec(resume_path);
    char best[32];
    std::snprintf(best, sizeof best, "%.17g", best_reward);
    rec << "next_iter = " << m.iter + 1 << "\n"
        << "have_best = " << (have_best ? "true" : "false") << "\n"
        << "best_reward = " << best << "\n";
    return true;
  };

  RunResult result;
  result.train = trainer.run(start_iter, hooks);
  result.dir = run_dir;
  result.checkpoint_last = ckpt_last;
  result.checkpoint_best = have_best ? ckpt_best : ckpt_last;
  return result;
}

}  // namespace stacca
