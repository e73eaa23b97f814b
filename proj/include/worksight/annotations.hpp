#pragma once

#include "worksight/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace worksight {

/// Parses a per-subgoal posture table: columns subgoal, start, end, an
/// optional subgoal duration, then one duration column per posture class.
/// Emits one subgoal segment per row followed by one posture record per
/// non-empty duration cell (interval = the subgoal's, duration_s = cell).
std::vector<AnnotationSegment> parse_annotations_text(const std::string& content);
std::vector<AnnotationSegment> parse_annotations(const std::filesystem::path& path);

/// Inverse of parse_annotations_text. Column set is fixed to all seven
/// posture classes; numbers are written in shortest round-trip form.
std::string write_annotations(const std::vector<AnnotationSegment>& segments);

/// Exact posture intervals, one "class,start_s,end_s" row each.
std::vector<AnnotationSegment> parse_posture_intervals_text(const std::string& content);
std::vector<AnnotationSegment> parse_posture_intervals(const std::filesystem::path& path);
std::string write_posture_intervals(const std::vector<AnnotationSegment>& postures);

std::vector<AnnotationSegment> subgoals_of(const std::vector<AnnotationSegment>& segments);
std::vector<AnnotationSegment> postures_of(const std::vector<AnnotationSegment>& segments);

/// Report column title for a posture class ("3. Bent forward", ...).
std::string posture_column_title(PostureClass c);

}  // namespace worksight
