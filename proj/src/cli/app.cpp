#include <CLI11.hpp>

#include <optional>
#include <ostream>

#include "panoos/cli/commands.hpp"
#include "panoos/numerics/errors.hpp"

namespace panoos::cli {

namespace {

RunConfig load_or_default(const std::string& path) { return path.empty() ? RunConfig{} : RunConfig::load(path); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic panoramic outlier segmentation pipeline", "panoos"};
  app.require_subcommand(1);

  std::string config, out_dir, data_dir, checkpoint, scores, labels, manifest;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::uint64_t grad_seed = 0;
  std::size_t grad_size = 4;

  auto* gen = app.add_subcommand("gen-data", "Generate train, bank and eval scenes");
  gen->add_option("--config", config, "Run config file");
  gen->add_option("--out", out_dir, "Dataset directory")->required();
  gen->add_option("--count", count, "Number of training scenes (overrides data.train_count)");
  gen->add_option("--seed", seed, "Seed (overrides seed)");

  auto* tr = app.add_subcommand("train", "Closed-set training");
  tr->add_option("--config", config, "Run config file");
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--out", out_dir, "Output directory")->required();

  auto* ft = app.add_subcommand("finetune", "Outlier-exposure fine-tuning");
  ft->add_option("--config", config, "Run config file");
  ft->add_option("--data", data_dir, "Dataset directory")->required();
  ft->add_option("--checkpoint", checkpoint, "Closed-set checkpoint")->required();
  ft->add_option("--out", out_dir, "Output directory")->required();

  auto* sc = app.add_subcommand("score", "Write anomaly and label maps for every eval scene");
  sc->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  sc->add_option("--data", data_dir, "Dataset directory or manifest")->required();
  sc->add_option("--out", out_dir, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "AuPRC, FPR95 and mIoU over scored scenes");
  ev->add_option("--scores", scores, "Directory written by score")->required();
  ev->add_option("--labels", labels, "Directory of ground-truth label maps")->required();
  ev->add_option("--manifest", manifest, "Manifest listing the scenes")->required();
  ev->add_option("--out", out_dir, "Output directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every loss");
  gc->add_option("--seed", grad_seed, "Instance seed");
  gc->add_option("--size", grad_size, "Instance height and width in pixels");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (*gen) {
      RunConfig cfg = load_or_default(config);
      if (count) cfg.train_count = *count;
      if (seed) cfg.seed = *seed;
      gen_data(cfg, out_dir);
    } else if (*tr) {
      train_model(load_or_default(config), data_dir, out_dir, err);
    } else if (*ft) {
      finetune_model(load_or_default(config), data_dir, checkpoint, out_dir, err);
    } else if (*sc) {
      score_scenes(checkpoint, data_dir, out_dir);
    } else if (*ev) {
      out << evaluate(scores, labels, manifest, out_dir).text();
    } else if (*gc) {
      if (!gradcheck(grad_seed, grad_size, out)) {
        err << "gradient check failed\n";
        return kNumericFailure;
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const ContractError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const DimensionError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const FormatError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const NumericDomainError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const EvaluationError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  }
  return kOk;
}

}  // namespace panoos::cli
