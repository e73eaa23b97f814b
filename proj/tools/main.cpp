// worksight command-line driver. Exit codes: 0 success, 1 invalid input or
// configuration, 2 data or runtime failure.

#include "worksight/annotations.hpp"
#include "worksight/eaws.hpp"
#include "worksight/error.hpp"
#include "worksight/metrics.hpp"
#include "worksight/pipeline.hpp"
#include "worksight/progress.hpp"
#include "worksight/soft_dtw.hpp"
#include "worksight/synth.hpp"
#include "worksight/text_io.hpp"
#include "worksight/transformer.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace worksight;

namespace {

constexpr const char* kLogEnv = "WORKSIGHT_LOG_LEVEL";

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("worksight");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv(kLogEnv)) spdlog::set_level(spdlog::level::from_str(lvl));
}

/// Single-instance guard on an output directory.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".worksight.lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw DataError("output directory is locked by another run: " + path_.string());
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

// Top-level TOML; the [section] names the subcommand, so
// `worksight --config run_config.toml` repeats the run.
// Unset options (empty values) are left out so a rerun does not set them.
void write_resolved_config(const CLI::App& sub, const fs::path& out) {
  std::string toml = "[" + sub.get_name() + "]\n";
  for (const auto& line : text::split_lines(sub.config_to_str(true, false)))
    if (!line.ends_with("=\"\"")) toml += line + '\n';
  text::write_file(out / "run_config.toml", toml);
}

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) spdlog::warn("{}", w);
}

// ---- option groups shared by several commands ----

struct ModelOptions {
  std::size_t d_model = 64, heads = 4, layers = 2, ffn = 128;
  double dropout = 0.1;
  bool no_positional = false;

  void add(CLI::App* app) {
    app->add_option("--d-model", d_model, "Model width")->capture_default_str();
    app->add_option("--heads", heads, "Attention heads")->capture_default_str();
    app->add_option("--layers", layers, "Encoder layers")->capture_default_str();
    app->add_option("--ffn", ffn, "Feed-forward width")->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout rate")->capture_default_str();
    app->add_flag("--no-positional", no_positional, "Disable learned positional embeddings");
  }
  nn::ModelConfig config(std::size_t d_in, std::size_t n_classes, std::size_t n_tokens, std::uint64_t seed) const {
    nn::ModelConfig c;
    c.d_in = d_in;
    c.d_model = d_model;
    c.n_heads = heads;
    c.n_layers = layers;
    c.d_ffn = ffn;
    c.n_classes = n_classes;
    c.n_tokens = n_tokens;
    c.dropout_rate = dropout;
    c.positional = !no_positional;
    c.seed = seed;
    return c;
  }
};

struct DetectionOptions {
  double window = 8.0, hop = 4.0, gamma = 0.1;
  std::size_t k = 3, stride = 3;
  bool no_standardize = false;
  std::optional<double> margin;

  void add(CLI::App* app) {
    app->add_option("--window", window, "Window length (s)")->capture_default_str();
    app->add_option("--hop", hop, "Window hop (s)")->capture_default_str();
    app->add_option("--gamma", gamma, "Soft-DTW smoothing")->capture_default_str();
    app->add_option("--k", k, "Nearest exemplars averaged per class")->capture_default_str();
    app->add_option("--stride", stride, "Frame stride inside a window")->capture_default_str();
    app->add_flag("--no-standardize", no_standardize, "Skip per-feature standardization");
    app->add_option("--multi-label-margin", margin, "Also emit classes scoring within this margin of the best");
  }
  eaws::DetectionParams params() const {
    eaws::DetectionParams p;
    p.window_s = window;
    p.hop_s = hop;
    p.dtw.gamma = gamma;
    p.k = k;
    p.feature_stride = stride;
    p.standardize = !no_standardize;
    p.multi_label_margin = margin;
    return p;
  }
};

// ---- commands ----

struct SynthCmd {
  fs::path out;
  std::uint64_t seed = 1;
  std::size_t door_frames = 0;
  double jitter = 0.005;
  bool no_bystander = false;

  void run() const {
    auto spec = synth::default_scenario(seed);
    spec.door_image_frames = door_frames;
    spec.jitter_sigma_m = jitter;
    spec.bystander = !no_bystander;
    const auto sc = synth::generate(spec);
    const auto manifest = synth::write_scenario(sc, out);
    spdlog::info("wrote synthetic cycle ({} subgoals, {} episodes) to {}", sc.subgoals.size(), spec.episodes.size(),
                 manifest.string());
  }
};

struct IngestCmd {
  fs::path manifest, out;
  double rate = 30.0;

  void run() const {
    pipeline::IngestParams p;
    p.rate_hz = rate;
    const auto bundle = pipeline::ingest(load_manifest(manifest), p);
    warn_all(bundle.warnings);
    pipeline::write_bundle(bundle, out);
    spdlog::info("bundle: {} frames at {} Hz", bundle.poses.frames.size(), rate);
  }
};

struct ExemplarsCmd {
  std::vector<fs::path> bundles;
  fs::path out;
  std::size_t max_per_class = 6, stride = 3;

  void run() const {
    dtw::ExemplarLibrary lib;
    eaws::ExemplarParams p;
    p.max_per_class = max_per_class;
    p.feature_stride = stride;
    for (const auto& dir : bundles) {
      const auto b = pipeline::read_bundle(dir);
      if (b.posture_intervals.empty()) throw ValidationError("bundle " + dir.string() + " has no posture intervals");
      eaws::add_exemplars(lib, b.poses, b.posture_intervals, p);
    }
    lib.validate();
    text::write_file(out / "exemplars.txt", dtw::write_library(lib));
    spdlog::info("exemplar library: {} sequences", lib.exemplars.size());
  }
};

struct AnalyzeCmd {
  fs::path bundle, exemplars, out;
  DetectionOptions detection;

  void run() const {
    const auto b = pipeline::read_bundle(bundle);
    const auto lib = dtw::read_library(exemplars);
    const auto r = pipeline::analyze(b, lib, detection.params());
    text::write_file(out / "report.csv", eaws::write_report(r.report));
    text::write_file(out / "segments.csv", eaws::write_segments(r.detection.segments));
    text::write_file(out / "windows.csv", eaws::write_windows(r.detection.windows));
    spdlog::info("{} windows, {} segments", r.detection.windows.size(), r.detection.segments.size());
  }
};

std::vector<progress::TokenizedWindow> windows_from_bundles(const std::vector<fs::path>& dirs, bool door_yaw,
                                                            std::vector<std::string>& classes) {
  std::vector<pipeline::Bundle> bundles;
  for (const auto& d : dirs) bundles.push_back(pipeline::read_bundle(d));
  for (const auto& b : bundles)
    for (const auto& c : progress::subgoal_classes(b.annotations))
      if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
  progress::WindowingParams wp;
  wp.tokens.include_door_yaw = door_yaw;
  std::vector<progress::TokenizedWindow> out;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    auto w = progress::build_windows(bundles[i].poses, bundles[i].door, subgoals_of(bundles[i].annotations), classes,
                                     wp, dirs[i].filename().string());
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

struct WindowsCmd {
  std::vector<fs::path> bundles;
  fs::path out;
  bool door_yaw = false;

  void run() const {
    std::vector<std::string> classes;
    const auto data = windows_from_bundles(bundles, door_yaw, classes);
    text::write_file(out / "windows.txt", progress::write_dataset(data, classes));
    spdlog::info("{} windows over {} classes", data.size(), classes.size());
  }
};

struct TrainCmd {
  fs::path windows, out;
  std::vector<fs::path> bundles;
  std::size_t synthetic = 0;
  std::size_t synthetic_classes = 5;
  bool door_yaw = false;
  ModelOptions model;
  std::size_t epochs = 60, batch = 16;
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t seed = 0;
  std::string split_mode = "window";
  std::vector<double> split{0.7, 0.1, 0.2};
  std::optional<double> stop_at;

  void run() const {
    std::vector<std::string> classes;
    std::vector<progress::TokenizedWindow> data;
    const int sources = (!windows.empty()) + (!bundles.empty()) + (synthetic > 0);
    if (sources != 1) throw ValidationError("train: give exactly one of --windows, --bundle, --synthetic");
    if (!windows.empty()) {
      data = progress::parse_dataset(text::read_file(windows), &classes);
    } else if (!bundles.empty()) {
      data = windows_from_bundles(bundles, door_yaw, classes);
    } else {
      data = synth::separable_windows(synthetic, synthetic_classes, 10, 8, seed);
      for (std::size_t c = 0; c < synthetic_classes; ++c) classes.push_back("class" + std::to_string(c));
    }
    if (data.empty()) throw ValidationError("train: no windows");
    if (split.size() != 3) throw ValidationError("--split needs three fractions");

    progress::TrainConfig tc;
    tc.adam = {lr, beta1, beta2, eps};
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.split = {split[0], split[1], split[2]};
    tc.seed = seed;
    tc.split_mode = progress::parse_split_mode(split_mode);
    tc.stop_at_train_accuracy = stop_at;
    const auto mc = model.config(data.front().tokens.cols, classes.size(), data.front().tokens.rows, seed);

    const auto result = progress::train(data, mc, tc, classes);
    nn::save_checkpoint(result.model, out / "model.bin");
    text::write_file(out / "classes.txt", [&] {
      std::string s;
      for (const auto& c : classes) s += c + "\n";
      return s;
    }());
    text::write_file(out / "trace.csv", progress::write_trace(result.trace));
    text::write_file(out / "test_scores.csv", metrics::write_classification_table(result.test_scores));
    text::write_file(out / "confusion.csv", metrics::write_confusion(result.test_scores.confusion));
    text::write_file(out / "roc.csv", metrics::write_roc(result.test_roc));
    text::write_file(out / "windows.txt", progress::write_dataset(data, classes));
    spdlog::info("train accuracy {:.4f}, test accuracy {:.4f}, {} epochs", result.train_accuracy, result.test_accuracy,
                 result.trace.size());
  }
};

struct EvaluateCmd {
  fs::path out, bundle, model, windows, joint_map;
  double threshold = metrics::kPckThresholdMm;

  void run() const {
    if (bundle.empty() && model.empty()) throw ValidationError("evaluate: give --bundle and/or --model with --windows");
    if (!bundle.empty()) {
      const auto b = pipeline::read_bundle(bundle);
      if (!b.ground_truth) throw ValidationError("evaluate: bundle has no ground truth");
      const double gap = 0.5 / b.poses.rate_hz;
      auto [pred, gt] = metrics::time_aligned(b.poses, *b.ground_truth, gap);
      pred = metrics::root_align(pred, pred.topology.joints()[pred.topology.root()]);
      gt = metrics::root_align(gt, gt.topology.joints()[gt.topology.root()]);
      const auto map = joint_map.empty() ? metrics::JointMap::for_topologies(pred.topology, gt.topology)
                                         : metrics::JointMap::parse(text::read_file(joint_map));
      const auto table = metrics::evaluate_poses(pred, gt, map, threshold);
      text::write_file(out / "joint_errors.csv", metrics::write_joint_table(table));
      spdlog::info("MPJPE {:.2f} mm, PCK@{} {:.4f}", table.mean_mpjpe_mm, threshold, table.mean_pck);
    }
    if (!model.empty()) {
      if (windows.empty()) throw ValidationError("evaluate: --model needs --windows");
      const auto m = nn::load_checkpoint(model);
      std::vector<std::string> classes;
      const auto data = progress::parse_dataset(text::read_file(windows), &classes);
      std::vector<std::size_t> all(data.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const auto p = progress::predict_all(m, data, all);
      const auto n = m.config().n_classes;
      const auto scores = metrics::classification_scores(p.predicted, p.labels, n, classes);
      text::write_file(out / "classification.csv", metrics::write_classification_table(scores));
      text::write_file(out / "confusion.csv", metrics::write_confusion(scores.confusion));
      text::write_file(out / "roc.csv", metrics::write_roc(metrics::roc_auc_macro(p.probabilities, p.labels, n)));
      spdlog::info("accuracy {:.4f}, mAP {:.4f}", scores.overall_accuracy, scores.mean_precision);
    }
  }
};

struct GradCheckCmd {
  std::size_t d_model = 8, heads = 2, layers = 1, ffn = 16, d_in = 6, classes = 3;
  std::uint64_t seed = 0;
  bool zero_input = false;
  double tolerance = 1e-3;
  double step = 1e-4;

  int run() const {
    nn::ModelConfig c;
    c.d_in = d_in;
    c.d_model = d_model;
    c.n_heads = heads;
    c.n_layers = layers;
    c.d_ffn = ffn;
    c.n_classes = classes;
    c.dropout_rate = 0.0;
    c.seed = seed;
    nn::TransformerClassifier model(c);
    nn::Matrix tokens(c.n_tokens, d_in);
    if (!zero_input) {
      std::mt19937_64 rng(seed + 17);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (double& v : tokens.data) v = normal(rng);
    }
    const auto r = nn::grad_check(model, tokens, seed % classes, step);
    std::cout << "checked " << r.checked << " parameters, max relative error " << r.max_relative_error << " at "
              << r.worst_parameter << "\n";
    return r.max_relative_error <= tolerance ? 0 : 2;
  }
};

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Workstation monitoring: pose ingestion, ergonomic posture analysis, progress classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "worksight 1.0");
  app.set_config("--config", "", "Read options from a TOML file (run_config.toml of a previous run)");

  std::function<int()> action;
  fs::path out_dir;
  CLI::App* chosen = nullptr;
  auto bind = [&](CLI::App* sub, auto& cmd) {
    sub->configurable();
    sub->callback([&, sub] {
      chosen = sub;
      if constexpr (requires { cmd.out; }) out_dir = cmd.out;
      action = [&cmd] {
        if constexpr (std::is_same_v<decltype(cmd.run()), int>) return cmd.run();
        else {
          cmd.run();
          return 0;
        }
      };
    });
  };

  SynthCmd synth_cmd;
  auto* s = app.add_subcommand("synth", "Generate a synthetic task cycle with manifest");
  s->add_option("--out", synth_cmd.out, "Output directory")->required();
  s->add_option("--seed", synth_cmd.seed, "Scenario seed")->capture_default_str();
  s->add_option("--door-frames", synth_cmd.door_frames, "Depth/mask frames rendered per camera")->capture_default_str();
  s->add_option("--jitter", synth_cmd.jitter, "Joint noise sigma (m)")->capture_default_str();
  s->add_flag("--no-bystander", synth_cmd.no_bystander, "Omit the second person");
  bind(s, synth_cmd);

  IngestCmd ingest_cmd;
  s = app.add_subcommand("ingest", "Normalize a manifest's recordings into a bundle");
  s->add_option("--manifest", ingest_cmd.manifest, "Manifest JSON")->required();
  s->add_option("--out", ingest_cmd.out, "Bundle directory")->required();
  s->add_option("--rate", ingest_cmd.rate, "Output clock (Hz)")->capture_default_str();
  bind(s, ingest_cmd);

  ExemplarsCmd exemplars_cmd;
  s = app.add_subcommand("exemplars", "Cut an exemplar library from annotated bundles");
  s->add_option("--bundle", exemplars_cmd.bundles, "Bundle directories")->required();
  s->add_option("--out", exemplars_cmd.out, "Output directory")->required();
  s->add_option("--max-per-class", exemplars_cmd.max_per_class, "Exemplars kept per class")->capture_default_str();
  s->add_option("--stride", exemplars_cmd.stride, "Frame stride")->capture_default_str();
  bind(s, exemplars_cmd);

  AnalyzeCmd analyze_cmd;
  s = app.add_subcommand("analyze", "Detect postures and write the minute report");
  s->add_option("--bundle", analyze_cmd.bundle, "Bundle directory")->required();
  s->add_option("--exemplars", analyze_cmd.exemplars, "Exemplar library file")->required();
  s->add_option("--out", analyze_cmd.out, "Output directory")->required();
  analyze_cmd.detection.add(s);
  bind(s, analyze_cmd);

  WindowsCmd windows_cmd;
  s = app.add_subcommand("windows", "Tokenize labeled windows from bundles");
  s->add_option("--bundle", windows_cmd.bundles, "Bundle directories")->required();
  s->add_option("--out", windows_cmd.out, "Output directory")->required();
  s->add_flag("--door-yaw", windows_cmd.door_yaw, "Append door yaw sin/cos to every token");
  bind(s, windows_cmd);

  TrainCmd train_cmd;
  s = app.add_subcommand("train", "Train the progress classifier");
  s->add_option("--windows", train_cmd.windows, "Window dataset file");
  s->add_option("--bundle", train_cmd.bundles, "Bundle directories (windows built on the fly)");
  s->add_option("--synthetic", train_cmd.synthetic, "Use N separable synthetic windows");
  s->add_option("--synthetic-classes", train_cmd.synthetic_classes, "Classes for --synthetic")->capture_default_str();
  s->add_flag("--door-yaw", train_cmd.door_yaw, "Append door yaw sin/cos (with --bundle)");
  s->add_option("--out", train_cmd.out, "Output directory")->required();
  train_cmd.model.add(s);
  s->add_option("--epochs", train_cmd.epochs, "Epochs")->capture_default_str();
  s->add_option("--batch", train_cmd.batch, "Batch size")->capture_default_str();
  s->add_option("--lr", train_cmd.lr, "Learning rate")->capture_default_str();
  s->add_option("--beta1", train_cmd.beta1, "Adam beta1")->capture_default_str();
  s->add_option("--beta2", train_cmd.beta2, "Adam beta2")->capture_default_str();
  s->add_option("--eps", train_cmd.eps, "Adam epsilon")->capture_default_str();
  s->add_option("--seed", train_cmd.seed, "Seed for initialization, split, shuffling and dropout")->capture_default_str();
  s->add_option("--split-mode", train_cmd.split_mode, "window or group")->capture_default_str();
  s->add_option("--split", train_cmd.split, "Train/validation/test fractions")->expected(3)->delimiter(',')->capture_default_str();
  s->add_option("--stop-at", train_cmd.stop_at, "Stop once train accuracy reaches this value");
  bind(s, train_cmd);

  EvaluateCmd eval_cmd;
  s = app.add_subcommand("evaluate", "Pose metrics against ground truth and/or classifier metrics");
  s->add_option("--out", eval_cmd.out, "Output directory")->required();
  s->add_option("--bundle", eval_cmd.bundle, "Bundle with ground truth");
  s->add_option("--joint-map", eval_cmd.joint_map, "pred,gt joint pairs file");
  s->add_option("--threshold", eval_cmd.threshold, "PCK threshold (mm)")->capture_default_str();
  s->add_option("--model", eval_cmd.model, "Model checkpoint");
  s->add_option("--windows", eval_cmd.windows, "Window dataset file");
  bind(s, eval_cmd);

  GradCheckCmd grad_cmd;
  s = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients on a tiny model");
  s->add_option("--d-model", grad_cmd.d_model)->capture_default_str();
  s->add_option("--heads", grad_cmd.heads)->capture_default_str();
  s->add_option("--layers", grad_cmd.layers)->capture_default_str();
  s->add_option("--ffn", grad_cmd.ffn)->capture_default_str();
  s->add_option("--d-in", grad_cmd.d_in)->capture_default_str();
  s->add_option("--classes", grad_cmd.classes)->capture_default_str();
  s->add_option("--seed", grad_cmd.seed)->capture_default_str();
  s->add_option("--step", grad_cmd.step, "Finite-difference step")->capture_default_str();
  s->add_option("--tolerance", grad_cmd.tolerance, "Exit 2 above this error")->capture_default_str();
  s->add_flag("--zero-input", grad_cmd.zero_input, "Use an all-zero sample");
  bind(s, grad_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    std::optional<DirectoryLock> lock;
    if (!out_dir.empty()) {
      lock.emplace(out_dir);
      write_resolved_config(*chosen, out_dir);
    }
    return action();
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
