#pragma once

#include <string>

#include "stacca/config.hpp"
#include "stacca/train.hpp"

namespace stacca {

/// Artifacts of one training run, rooted at `dir`:
///   resolved.cfg   - every default materialized, reparses to the same config
///   graph.txt      - training graph in canonical edge-list form
///   metrics.csv    - deterministic per-iteration metrics (+ metrics.jsonl)
///   timings.csv    - wall-clock per iteration, kept out of metrics.csv
///   ckpt_*.bin     - periodic/best/last checkpoints (+ opt_last.bin, resume.txt)
struct RunResult {
  TrainResult train;
  std::string dir;
  std::string checkpoint_last;
  std::string checkpoint_best;
};

/// Runs the full training loop with artifact management. `resume` continues
/// from ckpt_last.bin/opt_last.bin/resume.txt in the same directory.
RunResult run_training(const ExperimentConfig& cfg, const std::string& run_dir,
                       bool resume = false);

/// output root after applying the STACCA_OUT environment override
std::string resolve_output_dir(const std::string& configured);

}  // namespace stacca
