#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "panoos/cli/config.hpp"
#include "panoos/decoder/model.hpp"
#include "panoos/evaluation/metrics.hpp"

// Dataset directory layout written by gen_data:
//   train/scene_NNNN.{pose,posl}  clean training scenes      (train.txt)
//   bank/patch_NNNN.{pose,posl}   outlier patches for OE     (bank.txt)
//   eval/scene_NNNN.{pose,posl}   scenes with pasted outliers (eval.txt)
namespace panoos::cli {

enum ExitCode : int { kOk = 0, kConfigFailure = 2, kIoFailure = 3, kNumericFailure = 4 };

// In-memory pieces of the dataset; gen_data writes exactly these.
std::vector<data::SceneSample> make_train_scenes(const RunConfig& cfg);
data::OutlierBank make_train_bank(const RunConfig& cfg);
data::OutlierBank make_eval_bank(const RunConfig& cfg);
/// Eval scene i: a clean scene with one patch from `eval_bank` pasted in.
data::SceneSample make_eval_scene(const RunConfig& cfg, const data::OutlierBank& eval_bank, std::size_t i);

struct SceneScores {
  data::ScoreMap anomaly;  // RbA score, higher is more anomalous
  data::LabelMap labels;   // argmax over classes of the pixel logits
};
SceneScores score_scene(model::Model& model, const data::SceneSample& sample);

void gen_data(const RunConfig& cfg, const std::filesystem::path& out);
void train_model(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& out,
                 std::ostream& log);
void finetune_model(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& checkpoint,
                    const std::filesystem::path& out, std::ostream& log);
/// `data` is a dataset directory (its eval.txt is scored) or a manifest file.
void score_scenes(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                  const std::filesystem::path& out);
eval::EvalReport evaluate(const std::filesystem::path& scores, const std::filesystem::path& labels,
                          const std::filesystem::path& manifest, const std::filesystem::path& out);
/// Prints one row per loss; true when every row is below kGradTolerance.
bool gradcheck(std::uint64_t seed, std::size_t size, std::ostream& out);

/// Parses argv-style arguments (without the program name), runs the command
/// and maps failures to exit codes: 2 for bad flags, config or inputs, 3 for
/// unreadable or malformed files, 4 for numeric failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace panoos::cli
