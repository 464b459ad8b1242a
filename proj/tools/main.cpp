// glyphnet command-line driver: train / eval / report / synth.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
//             4 numerical divergence.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>

#include "glyphnet/glyphnet.hpp"

namespace fs = std::filesystem;
using namespace glyphnet;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

// Standard preparation pipeline: ingest -> low-shot filter/cap -> 8:4:8.
GlyphDataset prepare_dataset(const std::string& root, int min_samples, int cap,
                             std::uint64_t seed) {
  GlyphDataset ds = ingest(root).dataset;
  ds = prepare_low_shot(ds, min_samples, cap, seed);
  return split_848(ds, seed);
}

void write_eval_outputs(const MetricsReport& report,
                        const std::vector<std::string>& class_names,
                        const std::string& out_dir, const std::string& split) {
  fs::create_directories(out_dir);
  const std::string prefix = (fs::path(out_dir) / ("eval_" + split + "_")).string();
  write_metrics_report(report, class_names, prefix + "report.txt");
  write_per_class_csv(report, class_names, prefix + "per_class.csv");
  write_histogram_csv(per_class_histogram(report), prefix + "histogram.csv");

  const MisclassificationReport mis = misclassification_report(report, 10);
  std::ofstream mf(prefix + "misclassified.tsv");
  mf << "true_class\tpredicted_class\tcount\n";
  for (const auto& p : mis.top_pairs)
    mf << p.true_class << '\t' << p.predicted_class << '\t' << p.count << '\n';
  mf << "\nsample_id\tpredicted_class\ttrue_class\n";
  for (const auto& s : mis.samples)
    mf << s.sample_id << '\t' << s.predicted_class << '\t' << s.true_class << '\n';
}

int cmd_train(const std::string& stage_arg, const std::string& config_path,
              const std::string& data_root, const std::string& init_path,
              const std::string& out_dir) {
  TrainConfig cfg = parse_train_config(config_path);
  const bool baseline = stage_arg == "baseline";
  if (!baseline) {
    const int stage_flag = std::stoi(stage_arg);
    if (cfg.stage != stage_flag)
      throw ConfigError("--stage " + stage_arg + " disagrees with config stage " +
                        std::to_string(cfg.stage));
  }

  const GlyphDataset dataset =
      prepare_dataset(data_root, cfg.min_samples, cfg.cap, cfg.seed);
  std::cout << "dataset: " << dataset.num_classes() << " classes, "
            << dataset.samples.size() << " samples\n";

  fs::create_directories(out_dir);
  write_split_manifest(dataset, (fs::path(out_dir) / "split_manifest.tsv").string());

  TrainOutputs outputs;
  std::string ckpt_name;
  if (baseline) {
    outputs = run_baseline_ce(cfg, dataset);
    ckpt_name = "checkpoint_baseline.json";
  } else if (cfg.stage == 1) {
    outputs = run_stage1(cfg, dataset);
    ckpt_name = "checkpoint_stage1.json";
  } else {
    Checkpoint init;
    const Checkpoint* init_ptr = nullptr;
    if (!init_path.empty()) {
      init = Checkpoint::load(init_path);
      init_ptr = &init;
    }
    PlanObserver observer;
    if (cfg.dump_plans) {
      fs::create_directories(fs::path(out_dir) / "plans");
      observer = [&dataset, out_dir](const EpochPairPlan& plan) {
        const std::string path =
            (fs::path(out_dir) / "plans" /
             ("epoch_" + detail::zero_pad(plan.epoch, 4) + ".tsv"))
                .string();
        write_plan_file(plan, dataset.sample_ids(), path);
      };
    }
    outputs = run_stage2(cfg, dataset, init_ptr, observer);
    ckpt_name = "checkpoint_best.json";
  }

  outputs.log.write_csv((fs::path(out_dir) / "training_log.csv").string());
  outputs.checkpoint.save((fs::path(out_dir) / ckpt_name).string());
  std::cout << "checkpoint: " << (fs::path(out_dir) / ckpt_name).string() << "\n";

  if (outputs.best_epoch >= 0) {
    std::cout << "best validation accuracy " << outputs.best_val_accuracy << " at epoch "
              << outputs.best_epoch << "\n";
    const MetricsReport val = evaluate(outputs.checkpoint, dataset, Split::val);
    write_eval_outputs(val, dataset.class_names, out_dir, "val");
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_root,
             const std::string& split_name_arg, const std::string& manifest_path,
             std::string out_dir) {
  const Checkpoint ckpt = Checkpoint::load(ckpt_path);
  const Split split = split_from_name(split_name_arg);
  if (split != Split::val && split != Split::test)
    throw ConfigError("eval: --split must be val or test");

  GlyphDataset dataset;
  if (!manifest_path.empty()) {
    dataset = ingest(data_root).dataset;
    // Re-densify ids to the manifest's classes is not needed: the manifest
    // refers to the post-preparation ids, so rebuild with the stored seed
    // first and then override the assignment.
    dataset = prepare_low_shot(dataset, 20, 20, ckpt.manifest.value("seed", 0ULL));
    apply_split_manifest(dataset, manifest_path);
  } else {
    dataset = prepare_dataset(data_root, 20, 20, ckpt.manifest.value("seed", 0ULL));
  }

  const MetricsReport report = evaluate(ckpt, dataset, split);
  std::cout << "split = " << split_name_arg << "\n";
  std::cout << "accuracy = " << report.accuracy << "\n";
  std::cout << "macro_f1 = " << report.macro_f1 << "\n";
  if (out_dir.empty()) out_dir = fs::path(ckpt_path).parent_path().string();
  if (out_dir.empty()) out_dir = ".";
  write_eval_outputs(report, ckpt.manifest.value("class_names", std::vector<std::string>{}),
                     out_dir, split_name_arg);
  std::cout << "reports written to " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& log_dir) {
  const fs::path dir(log_dir);
  const fs::path log_path = dir / "training_log.csv";
  if (!fs::exists(log_path)) throw DataError("report: missing " + log_path.string());
  const TrainingLog log = TrainingLog::read_csv(log_path.string());

  std::cout << "epoch        lr       scl     focal      lmcl       l_e       l_a     "
               "total   val_acc    val_f1\n";
  char line[256];
  int best_epoch = -1;
  double best_acc = -1.0;
  for (const auto& r : log.records) {
    std::snprintf(line, sizeof(line),
                  "%5d %9.3g %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f", r.epoch,
                  r.lr, r.scl, r.focal, r.lmcl, r.l_e, r.l_a, r.total, r.val_accuracy,
                  r.val_macro_f1);
    std::cout << line << "\n";
    if (r.val_accuracy > best_acc) {
      best_acc = r.val_accuracy;
      best_epoch = r.epoch;
    }
  }
  if (best_epoch >= 0)
    std::cout << "\nbest validation accuracy " << best_acc << " at epoch " << best_epoch
              << "\n";

  for (const std::string split : {"val", "test"}) {
    const fs::path hist = dir / ("eval_" + split + "_histogram.csv");
    if (fs::exists(hist)) {
      std::cout << "\nper-class accuracy histogram (" << split << "):\n";
      std::ifstream in(hist);
      std::cout << in.rdbuf();
    }
    const fs::path rep = dir / ("eval_" + split + "_report.txt");
    if (fs::exists(rep)) {
      std::cout << "\nmetrics (" << split << "):\n";
      std::ifstream in(rep);
      std::string l;
      for (int i = 0; i < 4 && std::getline(in, l); ++i) std::cout << l << "\n";
    }
  }
  return 0;
}

int cmd_synth(const std::string& out_dir, int groups, int per_group, int samples,
              std::uint64_t seed, double noise) {
  const GlyphDataset ds = synth_resembling_glyphs(groups, per_group, samples, seed,
                                                  SynthNuisance::scaled(noise));
  dump_dataset_png(ds, out_dir);
  std::cout << "wrote " << ds.samples.size() << " images across " << ds.num_classes()
            << " classes to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glyphnet: two-stage contrastive training for resembling-glyph recognition"};
  app.require_subcommand(1);

  std::string stage, config_path, data_root, init_path, out_dir, ckpt_path, split_arg,
      manifest_path, log_dir;
  int groups = 5, per_group = 2, samples = 20;
  std::uint64_t seed = 0;
  double noise = 1.0;

  CLI::App* train = app.add_subcommand("train", "run a training stage");
  train->add_option("--stage", stage, "1, 2, or baseline")->required();
  train->add_option("--config", config_path, "key = value config file")->required();
  train->add_option("--data", data_root, "corpus root (directory per class)")->required();
  train->add_option("--init", init_path, "checkpoint for warm-start init modes");
  train->add_option("--out", out_dir, "output directory")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval_cmd->add_option("--data", data_root, "corpus root")->required();
  eval_cmd->add_option("--split", split_arg, "val or test")->required();
  eval_cmd->add_option("--manifest", manifest_path, "split manifest to reuse exactly");
  eval_cmd->add_option("--out", out_dir, "report output directory");

  CLI::App* report = app.add_subcommand("report", "render metric tables from a run directory");
  report->add_option("--log", log_dir, "training output directory")->required();

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic resembling-glyph corpus");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--groups", groups, "number of resembling groups")->required();
  synth->add_option("--per-group", per_group, "classes per group")->required();
  synth->add_option("--seed", seed, "generator seed")->required();
  synth->add_option("--samples", samples, "samples per class (default 20)");
  synth->add_option("--noise", noise, "nuisance level (default 1.0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(stage, config_path, data_root, init_path, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(ckpt_path, data_root, split_arg, manifest_path, out_dir);
    if (report->parsed()) return cmd_report(log_dir);
    if (synth->parsed()) return cmd_synth(out_dir, groups, per_group, samples, seed, noise);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
