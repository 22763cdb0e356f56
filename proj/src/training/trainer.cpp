#include "panoos/training/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>

#include "panoos/decoder/encoders.hpp"
#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/ops.hpp"
#include "panoos/numerics/random.hpp"
#include "panoos/training/augment.hpp"
#include "panoos/training/matching.hpp"
#include "panoos/training/optimizer.hpp"

namespace panoos::train {

void TrainConfig::validate() const {
  if (iterations == 0) throw ConfigError("train.iterations must be positive");
  if (batch == 0) throw ConfigError("train.batch must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be non-negative");
  if (!(p_out >= 0.0 && p_out <= 1.0)) throw ConfigError("train.p_out must lie in [0, 1]");
  if (!(weights.bce >= 0.0) || !(weights.dice >= 0.0) || !(weights.cls >= 0.0)) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (max_pixels == 0) throw ConfigError("train.max_pixels must be positive");
  if (!(lr_power >= 0.0)) throw ConfigError("train.lr_power must be non-negative");
  if (groups.empty()) throw ConfigError("no trainable parameter groups");
  bpdl.validate();
}

std::vector<ParamGroup> TrainConfig::closed_set_groups() {
  return {ParamGroup::PixelDecoder, ParamGroup::MaskMlp, ParamGroup::ClassLinear, ParamGroup::PromptProjection,
          ParamGroup::QueryInit,    ParamGroup::Pra,     ParamGroup::VoidEmbedding};
}

std::vector<ParamGroup> TrainConfig::finetune_groups() {
  return {ParamGroup::PixelDecoder, ParamGroup::MaskMlp, ParamGroup::ClassLinear, ParamGroup::PromptProjection,
          ParamGroup::DistributionPrompts};
}

namespace {

std::vector<LossRecord> run(model::Model& model, const TrainConfig& cfg, const std::vector<data::SceneSample>& dataset,
                            const data::OutlierBank* bank, const Progress& progress) {
  cfg.validate();
  if (dataset.empty()) throw ContractError("training dataset is empty");
  const bool oe = bank != nullptr;
  const std::size_t K = model.config().classes;
  const std::vector<std::size_t>& strides = model.config().strides;

  ParameterList params = model.parameters();
  set_trainable_groups(params, cfg.groups);
  AdamWOptions options;
  options.weight_decay = cfg.weight_decay;
  AdamW optimizer(params, options);

  std::vector<model::FeatureBundle> cached;
  if (!oe) {
    cached.reserve(dataset.size());
    for (const data::SceneSample& s : dataset) cached.push_back(model::encode_image(s, strides));
  }

  std::vector<LossRecord> records;
  records.reserve(cfg.iterations);
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Rng pick(mix_seed(cfg.seed, 0x5e1ec7, it));
    zero_grads(params);
    LossRecord rec;
    rec.iteration = it;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const std::size_t idx = pick.below(dataset.size());
      std::optional<data::SceneSample> mixed;
      std::optional<model::FeatureBundle> fresh;
      if (oe) {
        mixed = anomaly_mix(dataset[idx], *bank, cfg.p_out, mix_seed(cfg.seed, 0xa3a1, it, b));
        fresh = model::encode_image(*mixed, strides);
      }
      const data::LabelMap& labels = oe ? mixed->labels : dataset[idx].labels;
      const model::FeatureBundle& bundle = oe ? *fresh : cached[idx];

      Tape tape;
      const model::ForwardVars fwd = model.forward(tape, bundle);
      const GroundTruth gt = make_ground_truth(labels, fwd.stride, K);
      const MatchAssignment match = hungarian_match(fwd.probs.value(), fwd.masks.value(), gt, cfg.weights);
      LossTerms terms;
      if (oe) {
        const bpdl::PixelPartition part =
            bpdl::build_partition(fwd.pixels.fm, gt.labels, K, cfg.max_pixels, mix_seed(cfg.seed, 0xb9d1, it, b));
        terms = total_loss_oe(fwd, match, gt, part, cfg.bpdl, cfg.weights);
      } else {
        terms = total_loss_closed(fwd, match, gt, cfg.weights);
      }
      const double total = terms.total.value().item();
      if (!std::isfinite(total)) {
        throw NumericError("non-finite loss at iteration " + std::to_string(it) + ", sample " + std::to_string(idx));
      }
      tape.backward(ops::scale(terms.total, inv_batch));
      rec.total += total * inv_batch;
      rec.mask += terms.mask * inv_batch;
      rec.cls += terms.cls * inv_batch;
      rec.rba += terms.rba * inv_batch;
      rec.bpdl += terms.bpdl * inv_batch;
    }
    optimizer.step(poly_lr(cfg.lr, it, cfg.iterations, cfg.lr_power));
    if (progress) progress(rec);
    records.push_back(rec);
  }
  return records;
}

}  // namespace

std::vector<LossRecord> train_closed_set(model::Model& model, const TrainConfig& cfg,
                                         const std::vector<data::SceneSample>& dataset, const Progress& progress) {
  return run(model, cfg, dataset, nullptr, progress);
}

std::vector<LossRecord> finetune_oe(model::Model& model, const TrainConfig& cfg,
                                    const std::vector<data::SceneSample>& dataset, const data::OutlierBank& bank,
                                    const Progress& progress) {
  if (bank.empty()) throw ContractError("outlier bank is empty");
  return run(model, cfg, dataset, &bank, progress);
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,total,mask,cls,rba,bpdl\n" << std::setprecision(17);
  for (const LossRecord& r : records) {
    out << r.iteration << ',' << r.total << ',' << r.mask << ',' << r.cls << ',' << r.rba << ',' << r.bpdl << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace panoos::train
