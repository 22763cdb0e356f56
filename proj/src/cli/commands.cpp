#include "panoos/cli/commands.hpp"

#include <cstdio>
#include <iomanip>
#include <memory>
#include <ostream>

#include "panoos/cli/gradcheck.hpp"
#include "panoos/decoder/encoders.hpp"
#include "panoos/decoder/model.hpp"
#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/random.hpp"
#include "panoos/synthdata/raster.hpp"
#include "panoos/training/augment.hpp"
#include "panoos/training/checkpoint.hpp"
#include "panoos/training/trainer.hpp"

namespace panoos::cli {

namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", prefix, i);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// `inputs` records the command's path flags as comments.
void write_resolved(const fs::path& out, const RunConfig& cfg, const std::string& inputs = {}) {
  data::write_file(out / "config.resolved", inputs + cfg.serialize());
}

train::Progress progress_printer(std::ostream& log, const char* phase, std::size_t iterations) {
  const std::size_t every = std::max<std::size_t>(1, iterations / 20);
  return [&log, phase, every, iterations](const train::LossRecord& r) {
    if (r.iteration % every != 0 && r.iteration + 1 != iterations) return;
    log << phase << ' ' << r.iteration + 1 << '/' << iterations << std::setprecision(6) << " loss " << r.total
        << " (mask " << r.mask << ", cls " << r.cls << ", rba " << r.rba << ", bpdl " << r.bpdl << ")\n";
  };
}

std::vector<data::SceneSample> load_checked(const fs::path& manifest, const data::SceneConfig& scene) {
  std::vector<data::SceneSample> samples = data::load_dataset(manifest);
  for (const data::SceneSample& s : samples) {
    if (s.channels() != scene.feature_dim) {
      throw ConfigError("dataset " + manifest.string() + " has " + std::to_string(s.channels()) +
                        " feature channels, config expects " + std::to_string(scene.feature_dim));
    }
  }
  return samples;
}

}  // namespace

std::vector<data::SceneSample> make_train_scenes(const RunConfig& cfg) {
  std::vector<data::SceneSample> scenes;
  scenes.reserve(cfg.train_count);
  for (std::size_t i = 0; i < cfg.train_count; ++i) scenes.push_back(data::generate_scene(cfg.scene, mix_seed(cfg.seed, 1, i)));
  return scenes;
}

data::OutlierBank make_train_bank(const RunConfig& cfg) {
  return data::make_outlier_bank(cfg.scene, cfg.bank_size, mix_seed(cfg.seed, 3));
}

data::OutlierBank make_eval_bank(const RunConfig& cfg) {
  return data::make_outlier_bank(cfg.scene, cfg.eval_bank_size, mix_seed(cfg.seed, 5));
}

data::SceneSample make_eval_scene(const RunConfig& cfg, const data::OutlierBank& eval_bank, std::size_t i) {
  const data::SceneSample clean = data::generate_scene(cfg.scene, mix_seed(cfg.seed, 2, i));
  return train::anomaly_mix(clean, eval_bank, 1.0, mix_seed(cfg.seed, 4, i));
}

SceneScores score_scene(model::Model& model, const data::SceneSample& sample) {
  const model::SegOutput seg = model.forward_scene(model::encode_image(sample, model.config().strides));
  const std::size_t H = sample.height(), W = sample.width(), K = model.config().classes;
  SceneScores out{{H, W, std::vector<float>(H * W)}, {H, W, std::vector<std::uint8_t>(H * W)}};
  for (std::size_t i = 0; i < H * W; ++i) {
    out.anomaly.values[i] = static_cast<float>(seg.anomaly[i]);
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (seg.logits[k * H * W + i] > seg.logits[best * H * W + i]) best = k;
    out.labels.values[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

void gen_data(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  for (const char* sub : {"train", "bank", "eval"}) ensure_dir(out / sub);

  std::vector<data::ManifestEntry> train;
  const std::vector<data::SceneSample> scenes = make_train_scenes(cfg);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string stem = numbered("scene", i);
    data::ManifestEntry e{out / "train" / (stem + ".pose"), out / "train" / (stem + ".posl")};
    data::save_sample(e.features, e.labels, scenes[i]);
    train.push_back(e);
  }

  std::vector<data::ManifestEntry> bank;
  const data::OutlierBank patches = make_train_bank(cfg);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const std::string stem = numbered("patch", i);
    data::ManifestEntry e{out / "bank" / (stem + ".pose"), out / "bank" / (stem + ".posl")};
    data::save_sample(e.features, e.labels, data::SceneSample{patches[i].features, patches[i].mask});
    bank.push_back(e);
  }

  const data::OutlierBank eval_bank = make_eval_bank(cfg);
  std::vector<data::ManifestEntry> evals;
  for (std::size_t i = 0; i < cfg.eval_count; ++i) {
    const std::string stem = numbered("scene", i);
    data::ManifestEntry e{out / "eval" / (stem + ".pose"), out / "eval" / (stem + ".posl")};
    data::save_sample(e.features, e.labels, make_eval_scene(cfg, eval_bank, i));
    evals.push_back(e);
  }

  data::write_manifest(out / "train.txt", train);
  data::write_manifest(out / "bank.txt", bank);
  data::write_manifest(out / "eval.txt", evals);
  write_resolved(out, cfg);
}

void train_model(const RunConfig& cfg, const fs::path& data, const fs::path& out, std::ostream& log) {
  cfg.validate();
  const std::vector<data::SceneSample> dataset = load_checked(data / "train.txt", cfg.scene);
  model::Model model(cfg.model_config());
  if (!cfg.text_embeddings.empty()) model.set_text_embeddings(data::read_embedding(cfg.text_embeddings));
  const train::TrainConfig tc = cfg.train_config();
  const auto records = train::train_closed_set(model, tc, dataset, progress_printer(log, "train", tc.iterations));
  ensure_dir(out);
  train::save_checkpoint(out / "model.ckpt", model);
  train::write_loss_csv(out / "loss.csv", records);
  write_resolved(out, cfg);
}

void finetune_model(const RunConfig& cfg, const fs::path& data, const fs::path& checkpoint, const fs::path& out,
                    std::ostream& log) {
  cfg.validate();
  std::unique_ptr<model::Model> model = train::load_checkpoint(checkpoint);
  const model::ModelConfig& mc = model->config();
  if (mc.classes != cfg.scene.classes || mc.feature_dim != cfg.scene.feature_dim) {
    throw ConfigError("checkpoint was trained for " + std::to_string(mc.classes) + " classes and " +
                      std::to_string(mc.feature_dim) + " feature channels, config says " +
                      std::to_string(cfg.scene.classes) + " and " + std::to_string(cfg.scene.feature_dim));
  }
  const std::vector<data::SceneSample> dataset = load_checked(data / "train.txt", cfg.scene);
  const data::OutlierBank bank = data::load_bank(data / "bank.txt");
  const train::TrainConfig tc = cfg.finetune_config();
  const auto records = train::finetune_oe(*model, tc, dataset, bank, progress_printer(log, "finetune", tc.iterations));
  ensure_dir(out);
  train::save_checkpoint(out / "model.ckpt", *model);
  train::write_loss_csv(out / "loss.csv", records);
  write_resolved(out, cfg);
}

void score_scenes(const fs::path& checkpoint, const fs::path& data, const fs::path& out) {
  std::unique_ptr<model::Model> model = train::load_checkpoint(checkpoint);
  const fs::path manifest = fs::is_directory(data) ? data / "eval.txt" : data;
  const std::vector<data::ManifestEntry> entries = data::read_manifest(manifest);
  ensure_dir(out);
  for (const data::ManifestEntry& e : entries) {
    const SceneScores scored = score_scene(*model, data::load_sample(e.features, e.labels));
    const std::string stem = e.labels.stem().string();
    data::write_score_map(out / (stem + ".posm"), scored.anomaly);
    data::write_label_map(out / (stem + ".pred.posl"), scored.labels);
  }
  RunConfig resolved;
  resolved.model = model->config();
  resolved.scene.classes = model->config().classes;
  resolved.scene.feature_dim = model->config().feature_dim;
  resolved.seed = model->config().seed;
  write_resolved(out, resolved, "# score --checkpoint " + checkpoint.string() + " --data " + data.string() + "\n");
}

eval::EvalReport evaluate(const fs::path& scores, const fs::path& labels, const fs::path& manifest,
                          const fs::path& out) {
  const eval::EvalReport report = eval::evaluate_run(scores, labels, manifest);
  ensure_dir(out);
  data::write_file(out / "report.txt", report.text());
  data::write_file(out / "report.csv", report.csv());
  write_resolved(out, RunConfig{},
                 "# eval --scores " + scores.string() + " --labels " + labels.string() + " --manifest " +
                     manifest.string() + "\n");
  return report;
}

bool gradcheck(std::uint64_t seed, std::size_t size, std::ostream& out) {
  bool ok = true;
  out << std::left << std::setw(16) << "loss" << std::setw(14) << "max_rel_err" << std::setw(8) << "coords"
      << "status\n";
  for (const GradRow& r : gradient_suite(seed, size)) {
    const bool pass = r.max_rel_error < kGradTolerance;
    ok = ok && pass;
    out << std::left << std::setw(16) << r.loss << std::setw(14) << std::scientific << std::setprecision(3)
        << r.max_rel_error << std::defaultfloat << std::setw(8) << r.coordinates << (pass ? "ok" : "FAIL") << '\n';
  }
  return ok;
}

}  // namespace panoos::cli
