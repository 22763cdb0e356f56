// Acceptance gate: one PASS/FAIL line per criterion, exit status 0 only when
// every selected criterion passes. Pass criterion numbers to run a subset.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "instances.hpp"
#include "oracles.hpp"
#include "panoos/bpdl/bpdl.hpp"
#include "panoos/cli/commands.hpp"
#include "panoos/cli/gradcheck.hpp"
#include "panoos/decoder/encoders.hpp"
#include "panoos/decoder/layers.hpp"
#include "panoos/evaluation/metrics.hpp"
#include "panoos/numerics/ops.hpp"
#include "panoos/synthdata/raster.hpp"
#include "panoos/training/checkpoint.hpp"
#include "panoos/training/matching.hpp"
#include "panoos/training/trainer.hpp"

using namespace panoos;
using namespace panoos::testutil;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

// 1. Every loss against central differences, 10 seeds, 4x4 instances.
Verdict gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_loss;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const cli::GradRow& r : cli::gradient_suite(seed, 4)) {
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        worst_loss = r.loss;
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 60.0,
          "max rel err " + fmt("%.3e", worst) + " (" + worst_loss + "), " + fmt("%.1f s", t)};
}

// 2. auprc, fpr95 and miou equal the brute-force oracles exactly.
Verdict metric_oracles() {
  const auto t0 = Clock::now();
  std::size_t mismatches = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Instance in = random_instance(mix_seed(seed, 0xacc2));
    const eval::PrCurve c = eval::pr_curve(in.scores, in.labels);
    if (eval::auprc(c) != oracle_auprc(in)) ++mismatches;
    if (eval::fpr95(c) != oracle_fpr95(in)) ++mismatches;

    Rng rng(mix_seed(seed, 0xacc3));
    const std::size_t K = 2 + rng.below(5), n = 1 + rng.below(1000);
    std::vector<std::uint8_t> gt(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t r = rng.below(K + 2);
      gt[i] = r < K ? static_cast<std::uint8_t>(r) : (r == K ? OUT : IGN);
      pred[i] = static_cast<std::uint8_t>(rng.below(K));
    }
    gt[0] = 0;
    if (eval::miou(pred, gt, K).miou != oracle_miou(pred, gt, K)) ++mismatches;
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 10.0, std::to_string(mismatches) + " mismatches over 150 comparisons, " +
                                           fmt("%.2f s", t)};
}

// 3. A in (-K, 0] on real decoder outputs; raising one logit lowers A there.
Verdict rba_contract() {
  const auto t0 = Clock::now();
  std::size_t range_violations = 0, monotone_violations = 0, formula_violations = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng(mix_seed(trial, 0xacc3));
    model::ModelConfig cfg = tiny_model_config(mix_seed(trial, 0xacc4));
    cfg.classes = 2 + rng.below(5);
    cfg.queries = 2 + rng.below(12);
    const std::size_t size = 4 * (1 + rng.below(3));
    model::Model m(cfg);
    const data::SceneSample scene = random_scene(size, cfg.feature_dim, cfg.classes, mix_seed(trial, 0xacc5));
    const model::SegOutput out = m.forward_scene(model::encode_image(scene, cfg.strides));
    const std::size_t K = cfg.classes, HW = size * size;
    for (std::size_t i = 0; i < HW; ++i) {
      const double a = out.anomaly[i];
      if (!(a > -static_cast<double>(K) && a <= 0.0)) ++range_violations;
      double ref = 0.0;
      for (std::size_t k = 0; k < K; ++k) ref -= std::tanh(out.logits[k * HW + i]);
      if (std::abs(ref - a) > 1e-12) ++formula_violations;
    }
    Tape tape;
    Tensor logits = out.logits;
    const std::size_t k = rng.below(K), px = rng.below(HW);
    const double before = model::rba_score(tape.constant(logits)).value()[px];
    logits[k * HW + px] += 0.25;
    const double after = model::rba_score(tape.constant(logits)).value()[px];
    if (!(after < before)) ++monotone_violations;
  }
  const double t = seconds_since(t0);
  const bool pass = range_violations == 0 && monotone_violations == 0 && formula_violations == 0 && t < 5.0;
  return {pass, std::to_string(range_violations) + " range, " + std::to_string(monotone_violations) +
                    " monotonicity, " + std::to_string(formula_violations) + " formula violations over 100 outputs, " +
                    fmt("%.2f s", t)};
}

// 4. A zero correction gate reproduces the correction-free layer bit for bit.
Verdict init_identity() {
  std::size_t differ = 0, live = 0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    model::ModelConfig cfg = tiny_model_config(mix_seed(trial, 0xacc6));
    model::Model m(cfg);
    const model::PraLayerParams& p = m.pra_layers()[0];
    Rng rng(mix_seed(trial, 0xacc7));
    const std::size_t N = cfg.queries, C = cfg.query_dim, hw = 2 + rng.below(6);
    Tape tape;
    Var x = tape.constant(random_tensor({N, C}, rng));
    Var pos = tape.constant(random_tensor({N, C}, rng));
    Var f4 = tape.constant(random_tensor({hw, C}, rng));
    Var prompts = tape.constant(random_tensor({cfg.classes + 3, C}, rng));
    const Tensor mask = model::build_attention_mask(random_tensor({N, 1, hw}, rng, 0.0, 1.0));
    p.correction.gate->value.fill(0.0);
    const Tensor with = model::pra_layer(tape, x, pos, f4, mask, prompts, p, {true, true}).value();
    const Tensor without = model::pra_layer(tape, x, pos, f4, mask, prompts, p, {true, false}).value();
    if (!(with == without)) ++differ;
    // The branch is live once the gate moves; a fresh tape picks up the new value.
    p.correction.gate->value.fill(0.5);
    Tape moved;
    const Tensor gated = model::pra_layer(moved, moved.constant(x.value()), moved.constant(pos.value()),
                                          moved.constant(f4.value()), mask, moved.constant(prompts.value()), p,
                                          {true, true})
                             .value();
    if (!(gated == without)) ++live;
  }
  return {differ == 0 && live == 10, std::to_string(differ) + "/10 inputs differ at gate 0, correction live in " +
                                         std::to_string(live) + "/10 at gate 0.5"};
}

// 5. Fine-tuning leaves every parameter outside the tuned groups untouched.
Verdict disentanglement() {
  cli::RunConfig cfg;
  cfg.scene.height = 32;
  cfg.scene.width = 64;
  cfg.scene.classes = 3;
  cfg.scene.feature_dim = 4;
  cfg.train_count = 4;
  cfg.model.queries = 6;
  cfg.model.query_dim = cfg.model.mask_dim = 8;
  cfg.model.text_dim = 8;
  cfg.model.templates = 2;
  cfg.model.ffn_dim = 16;
  cfg.train.iterations = 4;
  cfg.finetune.iterations = 6;
  cfg.finetune.p_out = 1.0;
  const auto scenes = cli::make_train_scenes(cfg);
  model::Model m(cfg.model_config());
  train::train_closed_set(m, cfg.train_config(), scenes);
  const auto reference = train::decode_checkpoint(train::encode_checkpoint(m));
  train::finetune_oe(m, cfg.finetune_config(), scenes, cli::make_train_bank(cfg));

  const std::vector<ParamGroup> tuned = {ParamGroup::PixelDecoder, ParamGroup::MaskMlp, ParamGroup::ClassLinear,
                                         ParamGroup::PromptProjection, ParamGroup::DistributionPrompts};
  std::size_t frozen = 0, frozen_changed = 0, tuned_changed = 0;
  for (Parameter* p : m.parameters()) {
    const Tensor& before = reference->get(p->name).value;
    const bool same = std::equal(p->value.values().begin(), p->value.values().end(), before.values().begin(),
                                 [](double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); });
    if (std::find(tuned.begin(), tuned.end(), p->group) == tuned.end()) {
      ++frozen;
      if (!same) ++frozen_changed;
    } else if (!same) {
      ++tuned_changed;
    }
  }
  return {frozen_changed == 0 && tuned_changed > 0,
          std::to_string(frozen_changed) + "/" + std::to_string(frozen) + " frozen tensors changed, " +
              std::to_string(tuned_changed) + " tuned tensors moved"};
}

// 6. Hungarian matching equals the exhaustive minimum.
Verdict hungarian_exact() {
  std::size_t wrong = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(mix_seed(trial, 0xacc8));
    const std::size_t rows = 1 + rng.below(5), cols = rows + rng.below(3);
    const Matrix c = random_costs(rows, cols, rng);
    const std::vector<std::size_t> a = train::hungarian(c);
    if (std::set<std::size_t>(a.begin(), a.end()).size() != rows) ++wrong;
    else if (std::abs(assigned_cost(c, a) - exhaustive_min(c)) > 1e-12) ++wrong;
  }
  return {wrong == 0, std::to_string(wrong) + "/20 instances off the exhaustive optimum"};
}

// 7. Component ablation on the default synthetic benchmark.
struct SeedScores {
  double full = 0.0;      // PRA + BPDL
  double no_bpdl = 0.0;   // PRA, lambda_bpdl = 0
  double ma_only = 0.0;   // masked attention only + BPDL
};

std::unique_ptr<model::Model> clone(model::Model& m) { return train::decode_checkpoint(train::encode_checkpoint(m)); }

SeedScores ablation_seed(std::uint64_t seed, std::ostream& log) {
  cli::RunConfig cfg;
  cfg.seed = seed;
  cfg.eval_count = 200;
  cli::RunConfig ma = cfg;
  ma.model.prompt_attention = false;
  ma.model.adaptive_correction = false;
  cli::RunConfig no_bpdl = cfg;
  no_bpdl.finetune.bpdl.lambda = 0.0;

  const auto t0 = Clock::now();
  const auto scenes = cli::make_train_scenes(cfg);
  const data::OutlierBank bank = cli::make_train_bank(cfg);

  model::Model pra(cfg.model_config());
  train::train_closed_set(pra, cfg.train_config(), scenes);
  model::Model masked(ma.model_config());
  train::train_closed_set(masked, ma.train_config(), scenes);

  auto full = clone(pra);
  train::finetune_oe(*full, cfg.finetune_config(), scenes, bank);
  auto plain = clone(pra);
  train::finetune_oe(*plain, no_bpdl.finetune_config(), scenes, bank);
  train::finetune_oe(masked, ma.finetune_config(), scenes, bank);

  const data::OutlierBank eval_bank = cli::make_eval_bank(cfg);
  eval::PixelPool pools[3];
  model::Model* models[3] = {full.get(), plain.get(), &masked};
  for (std::size_t i = 0; i < cfg.eval_count; ++i) {
    const data::SceneSample scene = cli::make_eval_scene(cfg, eval_bank, i);
    for (int v = 0; v < 3; ++v) pools[v].add(cli::score_scene(*models[v], scene).anomaly, scene.labels);
  }
  SeedScores s{eval::auprc(pools[0].curve()), eval::auprc(pools[1].curve()), eval::auprc(pools[2].curve())};
  log << "  seed " << seed << ": AuPRC full " << fmt("%.4f", s.full) << ", lambda_bpdl=0 " << fmt("%.4f", s.no_bpdl)
      << ", masked-attention only " << fmt("%.4f", s.ma_only) << " (" << fmt("%.0f s", seconds_since(t0)) << ")\n";
  return s;
}

Verdict directional_ablation() {
  const auto t0 = Clock::now();
  std::vector<SeedScores> runs;
  for (std::uint64_t seed : {1, 2, 3}) runs.push_back(ablation_seed(seed, std::cout));
  double full = 0.0, no_bpdl = 0.0, ma = 0.0;
  int bpdl_wins = 0, pra_wins = 0;
  for (const SeedScores& s : runs) {
    full += s.full / 3.0;
    no_bpdl += s.no_bpdl / 3.0;
    ma += s.ma_only / 3.0;
    bpdl_wins += s.full >= s.no_bpdl;
    pra_wins += s.full >= s.ma_only;
  }
  const double t = seconds_since(t0);
  const bool pass = full >= no_bpdl && full >= ma && bpdl_wins >= 2 && pra_wins >= 2 && t < 1800.0;
  return {pass, "mean AuPRC full " + fmt("%.4f", full) + " vs lambda_bpdl=0 " + fmt("%.4f", no_bpdl) +
                    " vs masked-attention only " + fmt("%.4f", ma) + "; BPDL ahead in " + std::to_string(bpdl_wins) +
                    "/3 seeds, PRA ahead in " + std::to_string(pra_wins) + "/3; " + fmt("%.0f s", t)};
}

// 8. Outlier loss: empty outlier set with coincident prompts gives exactly d;
// a satisfied margin gives exactly zero gradient.
Verdict outlier_branch() {
  bool exact = true, dead = true;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(mix_seed(trial, 0xacc9));
    const std::size_t K = 2 + rng.below(4), C = 2 + rng.below(6);
    const double d = rng.uniform(0.1, 3.0);
    Tensor prompts = random_tensor({K + 3, C}, rng);
    for (std::size_t c = 0; c < C; ++c) prompts.at(K + 2, c) = prompts.at(K + 1, c);
    Tape tape;
    Var p = tape.leaf(prompts);
    bpdl::PixelPartition empty;
    empty.inliers = tape.leaf(random_tensor({3, C}, rng));
    empty.labels = {1, 1, 2};
    if (bpdl::loss_outlier(empty, p, d).value()[0] != d) exact = false;

    // Outliers far from P_in and prompts far apart: every hinge inactive.
    Tensor spread = random_tensor({K + 3, C}, rng);
    for (std::size_t c = 0; c < C; ++c) spread.at(K + 2, c) = spread.at(K + 1, c) + 50.0;
    Tensor outliers({4, C});
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < C; ++c) outliers.at(r, c) = spread.at(K + 1, c) + 50.0 + rng.uniform(-1.0, 1.0);
    Tape t2;
    Var sp = t2.leaf(spread);
    bpdl::PixelPartition part;
    part.outliers = t2.leaf(outliers);
    Var loss = bpdl::loss_outlier(part, sp, d);
    t2.backward(loss);
    const Tensor g_prompts = t2.grad(sp), g_outliers = t2.grad(part.outliers);
    for (double g : g_prompts.values()) dead = dead && g == 0.0;
    for (double g : g_outliers.values()) dead = dead && g == 0.0;
    dead = dead && loss.value()[0] == 0.0;
  }
  return {exact && dead, std::string("N_o=0 value ") + (exact ? "exactly d" : "not d") + ", satisfied-margin gradient " +
                             (dead ? "exactly zero" : "non-zero") + " on 10 instances"};
}

// 9. Two identical end-to-end CLI runs give byte-identical report.csv.
Verdict pipeline_determinism() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "panoos_acceptance_pipeline";
  fs::remove_all(root);
  const std::string config =
      "seed = 21\ndata.train_count = 8\ndata.eval_count = 8\ntrain.iterations = 10\nfinetune.iterations = 10\n";
  std::string reports[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = root / ("run" + std::to_string(run));
    fs::create_directories(dir);
    data::write_file(dir / "run.cfg", config);
    const std::string cfg = (dir / "run.cfg").string(), d = (dir / "data").string();
    const std::vector<std::vector<std::string>> steps = {
        {"gen-data", "--config", cfg, "--out", d},
        {"train", "--config", cfg, "--data", d, "--out", (dir / "train").string()},
        {"finetune", "--config", cfg, "--data", d, "--checkpoint", (dir / "train" / "model.ckpt").string(), "--out",
         (dir / "ft").string()},
        {"score", "--checkpoint", (dir / "ft" / "model.ckpt").string(), "--data", d, "--out", (dir / "scores").string()},
        {"eval", "--scores", (dir / "scores").string(), "--labels", (dir / "data" / "eval").string(), "--manifest",
         (dir / "data" / "eval.txt").string(), "--out", (dir / "report").string()}};
    for (const auto& args : steps) {
      std::ostringstream out, err;
      if (const int code = cli::run(args, out, err); code != 0) {
        return {false, args[0] + " exited with " + std::to_string(code) + ": " + err.str()};
      }
    }
    reports[run] = data::read_file(dir / "report" / "report.csv");
  }
  fs::remove_all(root);
  return {reports[0] == reports[1] && !reports[0].empty(),
          std::string(reports[0] == reports[1] ? "report.csv identical" : "report.csv differs") + " (" +
              std::to_string(reports[0].size()) + " bytes), " + fmt("%.1f s", seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"metric oracle equivalence", metric_oracles},
      {"RbA contract", rba_contract},
      {"PRA init identity", init_identity},
      {"disentanglement", disentanglement},
      {"Hungarian exactness", hungarian_exact},
      {"directional ablation", directional_ablation},
      {"outlier-loss branch", outlier_branch},
      {"pipeline determinism", pipeline_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    all = all && v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << v.detail
              << std::endl;
  }
  return all ? 0 : 1;
}
