#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fcrseg/config.hpp"
#include "fcrseg/graph.hpp"
#include "fcrseg/imgdata.hpp"
#include "fcrseg/kernels.hpp"
#include "fcrseg/metrics.hpp"
#include "fcrseg/net.hpp"
#include "fcrseg/postprocess.hpp"
#include "fcrseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace fcrseg;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string param_count(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2fM", static_cast<double>(n) / 1e6);
  return buf;
}

void print_scores(const ImageScores& s) {
  std::printf("dice2 %.4f  aji %.4f  f1 %.4f  pq %.4f\n", s.dice2, s.aji, s.f1, s.pq);
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config_file;
  std::string preset = "desk";
  std::string resume;
  int synth_n = 250;
  double synth_density = 0.3;
  std::map<std::string, std::string> overrides;
};

void add_config_flags(CLI::App* cmd, std::map<std::string, std::string>& overrides) {
  for (const auto& key : RunConfig::keys()) {
    cmd->add_option_function<std::string>(
        "--" + key,
        [&overrides, key](const std::string& v) {
          try {
            RunConfig probe;
            probe.set(key, v);
          } catch (const ConfigError& e) {
            throw CLI::ValidationError("--" + key, e.what());
          }
          overrides[key] = v;
        },
        "override config key " + key);
  }
}

int run_train(const TrainArgs& a) {
  RunConfig base;
  if (a.preset == "desk") base = RunConfig::desk();
  else if (a.preset == "full") base = RunConfig::full();
  else throw ConfigError("unknown preset " + a.preset);
  RunConfig cfg = a.config_file.empty() ? base : RunConfig::load(a.config_file, base);
  for (const auto& [k, v] : a.overrides) cfg.set(k, v);
  cfg.net.validate();
  cfg.train.validate();

  DatasetSplit data;
  if (cfg.data_dir.empty()) {
    SynthOptions so;
    so.n_images = a.synth_n;
    so.height = cfg.net.input_height;
    so.width = cfg.net.input_width;
    so.density = a.synth_density;
    so.seed = cfg.train.seed + 1;
    data = synth_blobs(so);
    std::fprintf(stderr, "synthetic data: %zu train / %zu eval\n", data.train.size(), data.eval.size());
  } else {
    data = load_dataset(cfg.data_dir, cfg.focal_plane);
    std::fprintf(stderr, "%s: %zu train / %zu eval\n", cfg.data_dir.c_str(), data.train.size(),
                 data.eval.size());
  }

  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  cfg.save(out / "config.txt");

  TrainOptions opts;
  opts.out_dir = out;
  if (!a.resume.empty()) opts.resume = load_checkpoint(a.resume);
  opts.on_epoch = [](const EpochLog& l) {
    std::fprintf(stderr, "epoch %d  loss %.4f (intra %.4f, inter %.4f)  lr %.3g  alpha %.0f", l.epoch,
                 l.total, l.l_intra, l.l_inter, l.lr, l.alpha);
    if (l.eval) std::fprintf(stderr, "  eval aji %.4f f1 %.4f", l.eval->aji, l.eval->f1);
    std::fprintf(stderr, "\n");
  };
  const TrainResult result = train(data, cfg.net, cfg.train, opts);

  if (!data.eval.empty()) {
    const double alpha = alpha_at(cfg.train.alpha_schedule, cfg.train.epochs - 1);
    const EvalReport report = evaluate(result.best, data.eval, alpha, cfg.train.post);
    write_report_csv(out / "eval.csv", report);
    std::printf("best checkpoint, eval split: ");
    print_scores(report.means);
  }
  std::printf("wrote %s\n", out.string().c_str());
  return 0;
}

// --- predict ---------------------------------------------------------------

int run_predict(const std::string& model_path, const std::string& input, const std::string& out_dir,
                bool overlay, const PostprocessOptions& post) {
  const ModelState model = load_checkpoint(model_path);
  std::vector<fs::path> files;
  if (fs::is_directory(input)) files = list_images(input);
  else files.push_back(input);
  if (files.empty()) throw DataError("no images under " + input);
  const fs::path out = out_dir;
  fs::create_directories(out);
  for (const auto& f : files) {
    const RawImage img = read_image(f);
    // Hardening takes the argmax, which any alpha preserves.
    const LabelImage labels = predict_labels(model, img, 2.0, post);
    const std::string stem = f.stem().string();
    write_labels(out / (stem + ".png"), labels);
    if (overlay) write_overlay(out / (stem + "_overlay.png"), img, labels);
    std::printf("%s: %d instances\n", stem.c_str(), count_instances(labels));
  }
  return 0;
}

// --- eval ------------------------------------------------------------------

int run_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& report_path) {
  const auto gt_files = list_images(gt_dir);
  if (gt_files.empty()) throw DataError("no label images under " + gt_dir);
  EvalReport report;
  for (const auto& g : gt_files) {
    fs::path p = fs::path(pred_dir) / g.filename();
    if (!fs::exists(p)) p = fs::path(pred_dir) / (g.stem().string() + ".png");
    if (!fs::exists(p)) throw DataError("no prediction for " + g.filename().string() + " in " + pred_dir);
    const LabelImage pred = read_labels(p);
    const LabelImage gt = read_labels(g);
    if (!pred.same_shape(gt)) throw DataError("shape mismatch for " + g.filename().string());
    report.add(g.stem().string(), pred, gt);
  }
  report.finalize();
  if (!report_path.empty()) write_report_csv(report_path, report);
  std::printf("%zu images  ", report.per_image.size());
  print_scores(report.means);
  return 0;
}

// --- synth -----------------------------------------------------------------

int run_synth(const SynthOptions& so, const std::string& out) {
  const DatasetSplit data = synth_blobs(so);
  write_dataset(out, data);
  std::printf("wrote %zu train / %zu eval samples to %s\n", data.train.size(), data.eval.size(),
              out.c_str());
  return 0;
}

// --- color-check -----------------------------------------------------------

int run_color_check(const std::string& path, int radius, int k, bool no_background) {
  const LabelImage labels = relabel_connected(read_labels(path));
  const ObjectGraph g = build_adjacency(labels, radius, !no_background);
  const auto coloring = four_colorable(g, k);
  std::printf("objects %d\nedges %zu\n%d-colorable %s\n", g.n_objects, g.edge_count(), k,
              coloring ? "yes" : "no");
  return coloring ? 0 : 1;
}

// --- report ----------------------------------------------------------------

int run_report(const std::string& eval_csv, const std::string& model_path) {
  const EvalReport report = read_report_csv(eval_csv);
  const ModelState model = load_checkpoint(model_path);
  const ImageScores& m = report.means;
  std::printf("| Dice2 | AJI | F1-score | PQ | #Parameters |\n");
  std::printf("|---|---|---|---|---|\n");
  std::printf("| %.4f | %.4f | %.4f | %.4f | %s |\n", m.dice2, m.aji, m.f1, m.pq,
              param_count(model.parameter_count()).c_str());
  return 0;
}

PostprocessOptions parse_post(int min_area, const std::string& policy, int connectivity) {
  RunConfig c;
  c.set("min_area", std::to_string(min_area));
  c.set("background_policy", policy);
  c.set("connectivity", std::to_string(connectivity));
  return c.train.post;
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads();
  CLI::App app{"Four-colour instance segmentation: training, inference and evaluation"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model; writes logs and checkpoints to out_dir");
  train_cmd->add_option("--config", train_args.config_file, "key = value config file");
  train_cmd->add_option("--preset", train_args.preset, "base configuration: desk or full")
      ->check(CLI::IsMember({"desk", "full"}));
  train_cmd->add_option("--resume", train_args.resume, "checkpoint to continue from");
  train_cmd->add_option("--synth-n", train_args.synth_n, "synthetic images when data_dir is empty")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--synth-density", train_args.synth_density, "synthetic foreground fraction")
      ->check(CLI::Range(0.01, 1.0));
  add_config_flags(train_cmd, train_args.overrides);

  std::string model_path, input, out_dir;
  bool overlay = false;
  int min_area = 10, connectivity = 4;
  std::string policy = "border_majority";
  auto* predict_cmd = app.add_subcommand("predict", "write 16-bit instance label PNGs");
  predict_cmd->add_option("--model", model_path, "checkpoint")->required();
  predict_cmd->add_option("--input", input, "image file or directory")->required();
  predict_cmd->add_option("--out", out_dir, "output directory")->required();
  predict_cmd->add_flag("--overlay", overlay, "also write colour overlays");
  predict_cmd->add_option("--min-area", min_area, "smallest kept component")->check(CLI::NonNegativeNumber);
  predict_cmd->add_option("--background-policy", policy)
      ->check(CLI::IsMember({"border_majority", "largest_component", "none"}));
  predict_cmd->add_option("--connectivity", connectivity)->check(CLI::IsMember({4, 8}));

  std::string pred_dir, gt_dir, report_path;
  auto* eval_cmd = app.add_subcommand("eval", "score predicted label maps against ground truth");
  eval_cmd->add_option("--pred", pred_dir, "directory of predicted label PNGs")->required();
  eval_cmd->add_option("--gt", gt_dir, "directory of ground-truth label PNGs")->required();
  eval_cmd->add_option("--report", report_path, "CSV output");

  SynthOptions synth;
  synth.n_images = 10;
  std::string synth_out;
  int size = 128;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic blob dataset");
  synth_cmd->add_option("--n", synth.n_images, "number of images")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--size", size, "image side length")->check(CLI::Range(8, 4096));
  synth_cmd->add_option("--density", synth.density, "target foreground fraction")
      ->check(CLI::Range(0.01, 1.0));
  synth_cmd->add_option("--seed", synth.seed, "random seed");

  std::string label_path;
  int radius = 1, k = 4;
  bool no_background = false;
  auto* color_cmd = app.add_subcommand("color-check", "test whether a label map's objects are k-colourable");
  color_cmd->add_option("labels", label_path, "16-bit label PNG")->required();
  color_cmd->add_option("--radius", radius, "adjacency radius in pixels")->check(CLI::PositiveNumber);
  color_cmd->add_option("--k", k, "number of colours")->check(CLI::PositiveNumber);
  color_cmd->add_flag("--no-background", no_background, "leave the background out of the graph");

  std::string eval_csv;
  auto* report_cmd = app.add_subcommand("report", "print a results table row");
  report_cmd->add_option("--eval", eval_csv, "CSV written by eval or train")->required();
  report_cmd->add_option("--model", model_path, "checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train_cmd) return run_train(train_args);
    if (*predict_cmd) {
      return run_predict(model_path, input, out_dir, overlay, parse_post(min_area, policy, connectivity));
    }
    if (*eval_cmd) return run_eval(pred_dir, gt_dir, report_path);
    if (*synth_cmd) {
      synth.height = synth.width = size;
      return run_synth(synth, synth_out);
    }
    if (*color_cmd) return run_color_check(label_path, radius, k, no_background);
    if (*report_cmd) return run_report(eval_csv, model_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
