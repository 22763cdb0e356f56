#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "panoos/bpdl/bpdl.hpp"
#include "panoos/decoder/model.hpp"
#include "panoos/synthdata/scene.hpp"
#include "panoos/training/losses.hpp"

namespace panoos::train {

struct TrainConfig {
  std::size_t iterations = 2000;
  double lr = 1e-4;
  double weight_decay = 0.05;
  std::size_t batch = 4;
  LossWeights weights;
  double p_out = 0.3;
  bpdl::BpdlConfig bpdl;
  std::uint64_t seed = 7;
  std::vector<ParamGroup> groups = closed_set_groups();
  // Per-sample cap on inlier and on outlier embeddings fed to BPDL.
  std::size_t max_pixels = 4096;
  double lr_power = 0.9;

  void validate() const;

  /// Everything except the distribution prompts and frozen encoder outputs.
  static std::vector<ParamGroup> closed_set_groups();
  /// Pixel decoder, mask MLP, class head, prompt projection and distribution prompts.
  static std::vector<ParamGroup> finetune_groups();
};

struct LossRecord {
  std::size_t iteration = 0;
  double total = 0.0;
  double mask = 0.0;
  double cls = 0.0;
  double rba = 0.0;
  double bpdl = 0.0;
};

using Progress = std::function<void(const LossRecord&)>;

/// Minimizes the closed-set loss over cfg.groups. Samples must be clean
/// (no outlier pixels are required).
std::vector<LossRecord> train_closed_set(model::Model& model, const TrainConfig& cfg,
                                         const std::vector<data::SceneSample>& dataset, const Progress& progress = {});

/// Outlier-exposure fine-tuning of cfg.groups on AnomalyMix batches under the
/// closed-set + RbA + BPDL objective.
std::vector<LossRecord> finetune_oe(model::Model& model, const TrainConfig& cfg,
                                    const std::vector<data::SceneSample>& dataset, const data::OutlierBank& bank,
                                    const Progress& progress = {});

/// "iteration,total,mask,cls,rba,bpdl" with one row per record.
void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& records);

}  // namespace panoos::train
