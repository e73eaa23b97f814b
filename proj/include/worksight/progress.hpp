#pragma once

#include "worksight/door_geometry.hpp"
#include "worksight/metrics.hpp"
#include "worksight/transformer.hpp"
#include "worksight/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace worksight::progress {

struct TokenizeOptions {
  std::size_t n_tokens = 10;
  bool include_door_yaw = false;  // appends sin/cos of the mean door yaw
};

/// 3 * joints + 6, plus 2 with door yaw.
std::size_t token_dim(std::size_t joint_count, const TokenizeOptions& options = {});

struct TokenizedWindow {
  nn::Matrix tokens;
  std::size_t label = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string group;  // e.g. recording or task-cycle id, used by group splits
};

/// Splits the frames into n_tokens equal-count chunks. Token c holds the
/// chunk means of the body-frame joints, the worker's global root position
/// and the door centroid (door samples inside the chunk's time span, or the
/// sample nearest its middle when none fall inside).
nn::Matrix tokenize(const PoseSequence& body_window, const std::vector<Vec3>& worker_global,
                    const std::vector<DoorObservation>& door, const TokenizeOptions& options = {});

/// Body-frames a global window itself and feeds the root track as the worker position.
nn::Matrix tokenize_global(const PoseSequence& global_window, const std::vector<DoorObservation>& door,
                           const TokenizeOptions& options = {});

/// Distinct subgoal labels in order of first appearance.
std::vector<std::string> subgoal_classes(const std::vector<AnnotationSegment>& subgoals);

struct WindowingParams {
  double window_s = 8.0;
  double hop_s = 4.0;
  TokenizeOptions tokens;
};

/// Slides windows over the recording and labels each with the subgoal it
/// overlaps most (earlier class wins a tie). Windows touching no subgoal are
/// dropped. Labels index into `classes`; unknown subgoals throw.
std::vector<TokenizedWindow> build_windows(const PoseSequence& global_seq, const std::vector<DoorObservation>& door,
                                           const std::vector<AnnotationSegment>& subgoals,
                                           const std::vector<std::string>& classes, const WindowingParams& params = {},
                                           const std::string& group = {});

enum class SplitMode { window, group };
std::string to_string(SplitMode mode);
SplitMode parse_split_mode(const std::string& text);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Window mode: per class, a seeded shuffle then rounded fractions (at
/// least one training sample per non-empty class). Group mode: whole groups
/// are shuffled and assigned by cumulative fraction. Throws when a class has
/// no training sample.
Split stratified_split(const std::vector<TokenizedWindow>& data, std::size_t n_classes,
                       const std::array<double, 3>& fractions, std::uint64_t seed, SplitMode mode = SplitMode::window);

struct TrainConfig {
  nn::AdamConfig adam;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  std::array<double, 3> split{0.7, 0.1, 0.2};
  std::uint64_t seed = 0;
  SplitMode split_mode = SplitMode::window;
  std::optional<double> stop_at_train_accuracy;  // ends training once reached

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_recall = 0.0;  // macro; NaN without validation samples
  double val_f1 = 0.0;
  double val_auc = 0.0;
};

struct Predictions {
  std::vector<int> labels;
  std::vector<int> predicted;
  std::vector<std::vector<double>> probabilities;
  double accuracy() const;
};

Predictions predict_all(const nn::TransformerClassifier& model, const std::vector<TokenizedWindow>& data,
                        const std::vector<std::size_t>& indices);

struct TrainResult {
  nn::TransformerClassifier model;
  std::vector<EpochRecord> trace;
  Split split;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  metrics::ClassificationScores test_scores;
  metrics::RocResult test_roc;
};

/// Mini-batch Adam on mean cross-entropy. Every random draw (split, shuffling,
/// dropout, initialization) derives from the configured seeds.
TrainResult train(const std::vector<TokenizedWindow>& data, const nn::ModelConfig& model_config,
                  const TrainConfig& config, const std::vector<std::string>& class_names = {});

std::string write_trace(const std::vector<EpochRecord>& trace);

// Dataset file: "worksight-windows 1", "classes <n>" then one name per line,
// "shape <tokens> <d_in>",
// then per window "window <label> <start> <end> <group>" followed by one line per token.
std::string write_dataset(const std::vector<TokenizedWindow>& data, const std::vector<std::string>& classes);
std::vector<TokenizedWindow> parse_dataset(const std::string& content, std::vector<std::string>* classes);

}  // namespace worksight::progress
