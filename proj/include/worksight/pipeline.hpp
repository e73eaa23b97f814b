#pragma once

#include "worksight/door_geometry.hpp"
#include "worksight/eaws.hpp"
#include "worksight/manifest.hpp"
#include "worksight/pose_stream.hpp"
#include "worksight/soft_dtw.hpp"
#include "worksight/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace worksight::pipeline {

/// Everything downstream stages need, on one clock and in the global frame.
struct Bundle {
  Workstation workstation = Workstation::WS10;
  PoseSequence poses;                       // active worker, global frame
  std::vector<std::string> provenance;      // per frame: chosen camera id, or "interpolated"
  std::vector<DoorObservation> door;
  std::vector<AnnotationSegment> annotations;  // subgoals with their posture records
  std::vector<AnnotationSegment> posture_intervals;
  std::optional<PoseSequence> ground_truth;  // resampled onto the bundle rate
  std::vector<std::string> warnings;
};

struct IngestParams {
  double rate_hz = 30.0;
  ViewSelectionPolicy policy;
  bool read_door_images = true;  // only used when no door series is given
};

/// Merges the camera pose streams onto a uniform clock starting at the
/// earliest timestamp. Per tick and camera, the person nearest the cart
/// (highest mean confidence without a cart location) is the worker; the
/// view rule then picks one camera. Ticks without any valid view are
/// linearly interpolated between valid neighbors.
/// Door measurements come from the door series when present, else from the
/// depth/mask frames (frame i at i / rate_hz), the camera seeing more door
/// pixels winning.
Bundle ingest(const DatasetManifest& manifest, const IngestParams& params = {});

/// Writes bundle.json plus poses.csv, door.csv and the optional tables.
void write_bundle(const Bundle& bundle, const std::filesystem::path& dir);
Bundle read_bundle(const std::filesystem::path& dir);

struct AnalyzeResult {
  eaws::Detection detection;
  eaws::EawsMinuteReport report;
};

/// Posture detection over the bundle's poses and the minute report over its
/// subgoals. Throws ValidationError on an empty bundle.
AnalyzeResult analyze(const Bundle& bundle, const dtw::ExemplarLibrary& exemplars,
                      const eaws::DetectionParams& params = {});

}  // namespace worksight::pipeline
