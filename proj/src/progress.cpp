#include "worksight/progress.hpp"

#include "worksight/eaws.hpp"
#include "worksight/error.hpp"
#include "worksight/pose_stream.hpp"
#include "worksight/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace worksight::progress {

std::size_t token_dim(std::size_t joint_count, const TokenizeOptions& options) {
  return 3 * joint_count + 6 + (options.include_door_yaw ? 2 : 0);
}

namespace {

// Door samples falling in [t0, t1], or the one nearest the middle.
std::vector<const DoorObservation*> door_in_span(const std::vector<DoorObservation>& door, double t0, double t1) {
  std::vector<const DoorObservation*> out;
  auto lo = std::lower_bound(door.begin(), door.end(), t0,
                             [](const DoorObservation& o, double t) { return o.timestamp < t; });
  for (auto it = lo; it != door.end() && it->timestamp <= t1; ++it) out.push_back(&*it);
  if (!out.empty()) return out;
  const double mid = 0.5 * (t0 + t1);
  const DoorObservation* best = &door.front();
  for (const auto& o : door)
    if (std::abs(o.timestamp - mid) < std::abs(best->timestamp - mid)) best = &o;
  out.push_back(best);
  return out;
}

}  // namespace

nn::Matrix tokenize(const PoseSequence& body_window, const std::vector<Vec3>& worker_global,
                    const std::vector<DoorObservation>& door, const TokenizeOptions& options) {
  const std::size_t n_frames = body_window.frames.size();
  const std::size_t n_tok = options.n_tokens;
  if (n_tok == 0) throw ValidationError("tokenize: n_tokens must be positive");
  if (n_frames < n_tok)
    throw ValidationError("tokenize: " + std::to_string(n_frames) + " frames, need at least " + std::to_string(n_tok));
  if (worker_global.size() != n_frames) throw ValidationError("tokenize: worker track length mismatch");
  if (door.empty()) throw ValidationError("tokenize: missing door series");
  const std::size_t joints = body_window.topology.expected_count();
  for (const auto& f : body_window.frames)
    if (f.positions.size() != joints) throw ValidationError("tokenize: joint count mismatch");

  nn::Matrix tokens(n_tok, token_dim(joints, options));
  for (std::size_t c = 0; c < n_tok; ++c) {
    const std::size_t first = c * n_frames / n_tok;
    const std::size_t last = (c + 1) * n_frames / n_tok;
    const double inv = 1.0 / static_cast<double>(last - first);
    auto row = tokens.row(c);
    for (std::size_t i = first; i < last; ++i) {
      const auto& f = body_window.frames[i];
      for (std::size_t j = 0; j < joints; ++j)
        for (int a = 0; a < 3; ++a) row[3 * j + a] += f.positions[j][a] * inv;
      for (int a = 0; a < 3; ++a) row[3 * joints + a] += worker_global[i][a] * inv;
    }
    const auto samples = door_in_span(door, body_window.frames[first].timestamp, body_window.frames[last - 1].timestamp);
    const double dinv = 1.0 / static_cast<double>(samples.size());
    double s = 0.0, co = 0.0;
    for (const auto* o : samples) {
      for (int a = 0; a < 3; ++a) row[3 * joints + 3 + a] += o->centroid_global[a] * dinv;
      if (o->yaw_defined) {
        s += std::sin(deg2rad(o->yaw_deg));
        co += std::cos(deg2rad(o->yaw_deg));
      }
    }
    if (options.include_door_yaw) {
      const double norm = std::hypot(s, co);
      row[3 * joints + 6] = norm > 0.0 ? s / norm : 0.0;
      row[3 * joints + 7] = norm > 0.0 ? co / norm : 0.0;
    }
  }
  return tokens;
}

nn::Matrix tokenize_global(const PoseSequence& global_window, const std::vector<DoorObservation>& door,
                           const TokenizeOptions& options) {
  std::vector<Vec3> worker;
  worker.reserve(global_window.frames.size());
  const std::size_t root = global_window.topology.root();
  for (const auto& f : global_window.frames) {
    if (root >= f.positions.size()) throw ValidationError("tokenize: base spine joint missing");
    worker.push_back(f.positions[root]);
  }
  return tokenize(to_body_frame(global_window), worker, door, options);
}

std::vector<std::string> subgoal_classes(const std::vector<AnnotationSegment>& subgoals) {
  std::vector<std::string> out;
  for (const auto& s : subgoals)
    if (s.kind == AnnotationKind::subgoal && std::find(out.begin(), out.end(), s.label) == out.end())
      out.push_back(s.label);
  return out;
}

std::vector<TokenizedWindow> build_windows(const PoseSequence& global_seq, const std::vector<DoorObservation>& door,
                                           const std::vector<AnnotationSegment>& subgoals,
                                           const std::vector<std::string>& classes, const WindowingParams& params,
                                           const std::string& group) {
  if (global_seq.frames.empty()) throw ValidationError("build_windows: empty sequence");
  const double t0 = global_seq.frames.front().timestamp;
  const double span = global_seq.frames.back().timestamp - t0 + 1.0 / global_seq.rate_hz;
  const std::size_t n = eaws::window_count(span, params.window_s, params.hop_s);
  std::vector<double> times;
  times.reserve(global_seq.frames.size());
  for (const auto& f : global_seq.frames) times.push_back(f.timestamp);

  std::vector<TokenizedWindow> out;
  for (std::size_t w = 0; w < n; ++w) {
    const double start = t0 + static_cast<double>(w) * params.hop_s;
    const double end = start + params.window_s;
    std::vector<double> overlap(classes.size(), 0.0);
    for (const auto& s : subgoals) {
      if (s.kind != AnnotationKind::subgoal) continue;
      const auto it = std::find(classes.begin(), classes.end(), s.label);
      if (it == classes.end()) throw ValidationError("build_windows: unknown subgoal " + s.label);
      overlap[static_cast<std::size_t>(it - classes.begin())] +=
          std::max(0.0, std::min(end, s.end_s) - std::max(start, s.start_s));
    }
    const auto best = std::max_element(overlap.begin(), overlap.end());
    if (best == overlap.end() || *best <= 0.0) continue;

    const auto first = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), start - 1e-9) - times.begin());
    const auto last = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), end - 1e-9) - times.begin());
    PoseSequence window{global_seq.topology, {}, global_seq.rate_hz};
    window.frames.assign(global_seq.frames.begin() + static_cast<std::ptrdiff_t>(first),
                         global_seq.frames.begin() + static_cast<std::ptrdiff_t>(last));
    TokenizedWindow tw;
    tw.tokens = tokenize_global(window, door, params.tokens);
    tw.label = static_cast<std::size_t>(best - overlap.begin());
    tw.start_s = start;
    tw.end_s = end;
    tw.group = group;
    out.push_back(std::move(tw));
  }
  return out;
}

std::string to_string(SplitMode mode) { return mode == SplitMode::window ? "window" : "group"; }

SplitMode parse_split_mode(const std::string& text) {
  if (text == "window") return SplitMode::window;
  if (text == "group") return SplitMode::group;
  throw ValidationError("unknown split mode: " + text + " (expected window or group)");
}

Split stratified_split(const std::vector<TokenizedWindow>& data, std::size_t n_classes,
                       const std::array<double, 3>& fractions, std::uint64_t seed, SplitMode mode) {
  for (double f : fractions)
    if (!(f >= 0.0)) throw ValidationError("split fractions must be non-negative");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw ValidationError("split fractions must sum to 1");
  for (const auto& w : data)
    if (w.label >= n_classes) throw ValidationError("label out of range: " + std::to_string(w.label));

  std::mt19937_64 rng(seed);
  Split split;
  if (mode == SplitMode::window) {
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);
    for (auto& idx : by_class) {
      if (idx.empty()) continue;
      std::shuffle(idx.begin(), idx.end(), rng);
      const auto n = static_cast<double>(idx.size());
      std::size_t n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fractions[0] * n)));
      n_train = std::min(n_train, idx.size());
      const std::size_t n_val =
          std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(fractions[1] * n)));
      for (std::size_t k = 0; k < idx.size(); ++k) {
        auto& dst = k < n_train ? split.train : (k < n_train + n_val ? split.validation : split.test);
        dst.push_back(idx[k]);
      }
    }
  } else {
    std::vector<std::string> groups;
    for (const auto& w : data)
      if (std::find(groups.begin(), groups.end(), w.group) == groups.end()) groups.push_back(w.group);
    std::shuffle(groups.begin(), groups.end(), rng);
    std::map<std::string, int> part;
    const auto ng = static_cast<double>(groups.size());
    const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fractions[0] * ng)));
    const auto n_val = static_cast<std::size_t>(std::llround(fractions[1] * ng));
    for (std::size_t g = 0; g < groups.size(); ++g) part[groups[g]] = g < n_train ? 0 : (g < n_train + n_val ? 1 : 2);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const int p = part[data[i].group];
      (p == 0 ? split.train : (p == 1 ? split.validation : split.test)).push_back(i);
    }
  }
  for (auto* v : {&split.train, &split.validation, &split.test}) std::sort(v->begin(), v->end());

  std::vector<bool> seen(n_classes, false);
  for (auto i : split.train) seen[data[i].label] = true;
  for (std::size_t c = 0; c < n_classes; ++c)
    if (!seen[c]) throw ValidationError("class absent from training split: " + std::to_string(c));
  return split;
}

void TrainConfig::validate() const {
  if (!(adam.learning_rate >= 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0))
    throw ValidationError("train config: invalid optimizer settings");
  if (batch_size == 0) throw ValidationError("train config: batch_size must be positive");
  if (epochs == 0) throw ValidationError("train config: epochs must be positive");
  if (std::abs(split[0] + split[1] + split[2] - 1.0) > 1e-9) throw ValidationError("train config: split must sum to 1");
}

double Predictions::accuracy() const {
  if (labels.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += labels[i] == predicted[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

Predictions predict_all(const nn::TransformerClassifier& model, const std::vector<TokenizedWindow>& data,
                        const std::vector<std::size_t>& indices) {
  Predictions p;
  for (auto i : indices) {
    auto prob = model.predict_proba(data[i].tokens);
    p.labels.push_back(static_cast<int>(data[i].label));
    p.predicted.push_back(static_cast<int>(std::max_element(prob.begin(), prob.end()) - prob.begin()));
    p.probabilities.push_back(std::move(prob));
  }
  return p;
}

TrainResult train(const std::vector<TokenizedWindow>& data, const nn::ModelConfig& model_config,
                  const TrainConfig& config, const std::vector<std::string>& class_names) {
  config.validate();
  if (data.empty()) throw ValidationError("train: empty dataset");
  const std::size_t n_classes = model_config.n_classes;
  TrainResult result{nn::TransformerClassifier(model_config), {}, {}, 0.0, 0.0, {}, {}};
  result.split = stratified_split(data, n_classes, config.split, config.seed, config.split_mode);
  auto& model = result.model;
  nn::Adam adam(model.parameters(), config.adam);
  std::mt19937_64 order_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::mt19937_64 dropout_rng(config.seed + 1);

  std::vector<std::size_t> order = result.split.train;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      auto grads = model.zero_grads();
      const double w = 1.0 / static_cast<double>(e - b);
      double batch_loss = 0.0;
      for (std::size_t k = b; k < e; ++k)
        batch_loss += model.loss_and_grad(data[order[k]].tokens, data[order[k]].label, &grads, w, &dropout_rng);
      if (!std::isfinite(batch_loss))
        throw DataError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                        std::to_string(b / config.batch_size));
      loss_sum += batch_loss;
      adam.step(model.parameters(), grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = predict_all(model, data, result.split.train).accuracy();
    const auto val = predict_all(model, data, result.split.validation);
    if (val.labels.empty()) {
      rec.val_recall = rec.val_f1 = rec.val_auc = std::numeric_limits<double>::quiet_NaN();
    } else {
      const auto scores = metrics::classification_scores(val.predicted, val.labels, n_classes);
      rec.val_recall = scores.macro_recall;
      rec.val_f1 = scores.macro_f1;
      rec.val_auc = metrics::roc_auc_macro(val.probabilities, val.labels, n_classes).macro_auc;
    }
    result.trace.push_back(rec);
    if (config.stop_at_train_accuracy && rec.train_accuracy >= *config.stop_at_train_accuracy) break;
  }

  result.train_accuracy = predict_all(model, data, result.split.train).accuracy();
  const auto test = predict_all(model, data, result.split.test);
  result.test_accuracy = test.accuracy();
  result.test_scores = metrics::classification_scores(test.predicted, test.labels, n_classes, class_names);
  result.test_roc = metrics::roc_auc_macro(test.probabilities, test.labels, n_classes);
  return result;
}

std::string write_trace(const std::vector<EpochRecord>& trace) {
  using text::format_number;
  std::string out = "epoch,train_loss,train_accuracy,val_recall,val_f1,val_auc\n";
  for (const auto& r : trace)
    out += std::to_string(r.epoch) + ',' + format_number(r.train_loss) + ',' + format_number(r.train_accuracy) + ',' +
           format_number(r.val_recall) + ',' + format_number(r.val_f1) + ',' + format_number(r.val_auc) + '\n';
  return out;
}

std::string write_dataset(const std::vector<TokenizedWindow>& data, const std::vector<std::string>& classes) {
  using text::format_number;
  std::string out = "worksight-windows 1\nclasses " + std::to_string(classes.size()) + '\n';
  for (const auto& c : classes) {
    if (c.empty() || c.find('\n') != std::string::npos) throw ValidationError("write_dataset: bad class name");
    out += c + '\n';
  }
  const std::size_t rows = data.empty() ? 0 : data.front().tokens.rows;
  const std::size_t cols = data.empty() ? 0 : data.front().tokens.cols;
  out += "shape " + std::to_string(rows) + ' ' + std::to_string(cols) + '\n';
  for (const auto& w : data) {
    if (w.tokens.rows != rows || w.tokens.cols != cols) throw ValidationError("write_dataset: inconsistent token shape");
    out += "window " + std::to_string(w.label) + ' ' + format_number(w.start_s) + ' ' + format_number(w.end_s) + ' ' +
           (w.group.empty() ? "-" : w.group) + '\n';
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (c) out += ' ';
        out += format_number(w.tokens(r, c));
      }
      out += '\n';
    }
  }
  return out;
}

std::vector<TokenizedWindow> parse_dataset(const std::string& content, std::vector<std::string>* classes) {
  std::istringstream in(content);
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "worksight-windows" || version != 1)
    throw ValidationError("not a worksight window dataset");
  std::size_t n_names = 0;
  if (!(in >> word >> n_names) || word != "classes") throw ValidationError("window dataset: expected classes line");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_names; ++i) {
    if (!std::getline(in, line)) throw ValidationError("window dataset: truncated class list");
    names.push_back(line);
  }
  std::size_t rows = 0, cols = 0;
  if (!(in >> word >> rows >> cols) || word != "shape") throw ValidationError("window dataset: expected shape line");
  std::vector<TokenizedWindow> out;
  while (in >> word) {
    if (word != "window") throw ValidationError("window dataset: expected window record");
    TokenizedWindow w;
    std::string start, end;
    if (!(in >> w.label >> start >> end >> w.group)) throw ValidationError("window dataset: truncated window header");
    if (w.label >= names.size()) throw ValidationError("window dataset: label out of range");
    w.start_s = text::parse_number(start, "window start");
    w.end_s = text::parse_number(end, "window end");
    if (w.group == "-") w.group.clear();
    w.tokens = nn::Matrix(rows, cols);
    for (double& v : w.tokens.data) {
      if (!(in >> word)) throw ValidationError("window dataset: truncated tokens");
      v = text::parse_number(word, "token value");
    }
    out.push_back(std::move(w));
  }
  if (classes) *classes = std::move(names);
  return out;
}

}  // namespace worksight::progress
