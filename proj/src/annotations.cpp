#include "worksight/annotations.hpp"

#include "worksight/error.hpp"
#include "worksight/text_io.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <optional>

namespace worksight {

namespace {

std::string normalize_header(std::string_view s) {
  std::string out;
  for (unsigned char c : s)
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  for (std::string_view suffix : {"durations", "duration"}) {
    if (out.size() > suffix.size() && out.ends_with(suffix)) {
      out.resize(out.size() - suffix.size());
      break;
    }
  }
  return out;
}

std::optional<PostureClass> posture_from_header(std::string_view header) {
  static const std::map<std::string, PostureClass> aliases = [] {
    std::map<std::string, PostureClass> m;
    auto add = [&](PostureClass c, std::initializer_list<const char*> names) {
      for (const char* n : names) m[normalize_header(n)] = c;
      m[normalize_header(to_string(c))] = c;
      m[normalize_header(posture_column_title(c))] = c;
    };
    add(PostureClass::P1_StandingWalking,
        {"standing_walking", "standing & walking", "standing & walking in alteration", "p1"});
    add(PostureClass::P3_BentForward, {"bent_forward", "bend forward", "3. Bend forward", "p3"});
    add(PostureClass::P4_StronglyBentForward,
        {"strongly_bent_forward", "strongly bend forward", "4. Strongly bend forward", "p4"});
    add(PostureClass::P5_ElbowAtAboveShoulder,
        {"elbow_at_above_shoulder", "elbow at/above shoulder", "elbows at or above shoulders", "p5"});
    add(PostureClass::P6_HandsAboveHead, {"hands_above_head", "hands above head", "elbows above the head", "p6"});
    add(PostureClass::TrunkRotation, {"trunk_rotation"});
    add(PostureClass::LateralBending, {"lateral_bending", "lateral trunk bending"});
    return m;
  }();
  auto it = aliases.find(normalize_header(header));
  if (it == aliases.end()) return std::nullopt;
  return it->second;
}

struct Table {
  char delim = ',';
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)
};

Table read_table(const std::string& content) {
  Table t;
  const auto lines = text::split_lines(content);
  bool have_header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = text::trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      t.delim = text::detect_delimiter(line);
      t.header = text::split_fields(line, t.delim);
      have_header = true;
    } else {
      t.rows.emplace_back(i + 1, text::split_fields(line, t.delim));
    }
  }
  if (!have_header) throw ValidationError("annotation table has no header");
  return t;
}

std::string at_line(std::size_t line) { return " (line " + std::to_string(line) + ")"; }

}  // namespace

std::string posture_column_title(PostureClass c) {
  switch (c) {
    case PostureClass::P1_StandingWalking: return "1. Standing & walking";
    case PostureClass::P3_BentForward: return "3. Bent forward";
    case PostureClass::P4_StronglyBentForward: return "4. Strongly bent forward";
    case PostureClass::P5_ElbowAtAboveShoulder: return "5. Elbow at/above shoulder level";
    case PostureClass::P6_HandsAboveHead: return "6. Hands above head level";
    case PostureClass::TrunkRotation: return "Trunk Rotation";
    case PostureClass::LateralBending: return "Lateral Bending";
  }
  return "unknown";
}

std::vector<AnnotationSegment> parse_annotations_text(const std::string& content) {
  const Table t = read_table(content);
  if (t.header.size() < 3) throw ValidationError("annotation table needs subgoal, start and end columns");

  std::size_t first_posture_col = 3;
  if (t.header.size() > 3) {
    const auto h = normalize_header(t.header[3]);
    if (h == "duration" || h == "durations") first_posture_col = 4;  // subgoal length
  }
  std::vector<PostureClass> columns;
  for (std::size_t c = first_posture_col; c < t.header.size(); ++c) {
    auto cls = posture_from_header(t.header[c]);
    if (!cls) throw ValidationError("unknown posture column '" + t.header[c] + "'");
    columns.push_back(*cls);
  }

  std::vector<AnnotationSegment> out;
  for (const auto& [line, fields] : t.rows) {
    if (fields.size() > t.header.size()) throw ValidationError("too many fields" + at_line(line));
    auto field = [&](std::size_t c) -> std::string_view {
      return c < fields.size() ? std::string_view(fields[c]) : std::string_view();
    };
    AnnotationSegment sub;
    sub.kind = AnnotationKind::subgoal;
    sub.label = std::string(field(0));
    if (sub.label.empty()) throw ValidationError("empty subgoal name" + at_line(line));
    sub.start_s = text::parse_number(field(1), "start time" + at_line(line));
    sub.end_s = text::parse_number(field(2), "end time" + at_line(line));
    if (sub.start_s < 0.0) throw ValidationError("negative start time" + at_line(line));
    if (!(sub.end_s > sub.start_s)) throw ValidationError("end <= start" + at_line(line));
    sub.duration_s = sub.end_s - sub.start_s;
    sub.subgoal = sub.label;
    out.push_back(sub);

    for (std::size_t k = 0; k < columns.size(); ++k) {
      const auto cell = text::trim(field(first_posture_col + k));
      if (cell.empty()) continue;
      AnnotationSegment p;
      p.kind = AnnotationKind::posture;
      p.label = std::string(to_string(columns[k]));
      p.start_s = sub.start_s;
      p.end_s = sub.end_s;
      p.duration_s = text::parse_number(cell, "duration" + at_line(line));
      if (p.duration_s < 0.0) throw ValidationError("negative duration" + at_line(line));
      p.subgoal = sub.label;
      p.valid = p.duration_s >= kMinValidPostureSeconds;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<AnnotationSegment> parse_annotations(const std::filesystem::path& path) {
  return parse_annotations_text(text::read_file(path));
}

std::string write_annotations(const std::vector<AnnotationSegment>& segments) {
  std::string out = "Subgoal,Start [s],End [s]";
  for (auto c : kAllPostureClasses) out += "," + posture_column_title(c);
  out += "\n";

  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\";") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };

  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& sub = segments[i];
    if (sub.kind != AnnotationKind::subgoal) continue;
    std::vector<std::string> cells(kPostureClassCount);
    for (std::size_t j = i + 1; j < segments.size() && segments[j].kind == AnnotationKind::posture; ++j) {
      auto cls = parse_posture_class(segments[j].label);
      if (!cls) throw ValidationError("unknown posture label '" + segments[j].label + "'");
      cells[index_of(*cls)] = text::format_number(segments[j].duration_s);
    }
    out += quote(sub.label) + "," + text::format_number(sub.start_s) + "," + text::format_number(sub.end_s);
    for (const auto& c : cells) out += "," + c;
    out += "\n";
  }
  return out;
}

std::vector<AnnotationSegment> parse_posture_intervals_text(const std::string& content) {
  const Table t = read_table(content);
  if (t.header.size() != 3) throw ValidationError("posture interval table needs class,start_s,end_s columns");
  std::vector<AnnotationSegment> out;
  for (const auto& [line, fields] : t.rows) {
    if (fields.size() != 3) throw ValidationError("expected 3 fields" + at_line(line));
    auto cls = parse_posture_class(fields[0]);
    if (!cls) cls = posture_from_header(fields[0]);
    if (!cls) throw ValidationError("unknown posture class '" + fields[0] + "'" + at_line(line));
    AnnotationSegment p;
    p.kind = AnnotationKind::posture;
    p.label = std::string(to_string(*cls));
    p.start_s = text::parse_number(fields[1], "start time" + at_line(line));
    p.end_s = text::parse_number(fields[2], "end time" + at_line(line));
    if (p.start_s < 0.0) throw ValidationError("negative start time" + at_line(line));
    if (!(p.end_s > p.start_s)) throw ValidationError("end <= start" + at_line(line));
    p.duration_s = p.end_s - p.start_s;
    p.valid = p.duration_s >= kMinValidPostureSeconds;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<AnnotationSegment> parse_posture_intervals(const std::filesystem::path& path) {
  return parse_posture_intervals_text(text::read_file(path));
}

std::string write_posture_intervals(const std::vector<AnnotationSegment>& postures) {
  std::string out = "class,start_s,end_s\n";
  for (const auto& p : postures) {
    if (p.kind != AnnotationKind::posture) continue;
    out += p.label + "," + text::format_number(p.start_s) + "," + text::format_number(p.end_s) + "\n";
  }
  return out;
}

std::vector<AnnotationSegment> subgoals_of(const std::vector<AnnotationSegment>& segments) {
  std::vector<AnnotationSegment> out;
  for (const auto& s : segments)
    if (s.kind == AnnotationKind::subgoal) out.push_back(s);
  return out;
}

std::vector<AnnotationSegment> postures_of(const std::vector<AnnotationSegment>& segments) {
  std::vector<AnnotationSegment> out;
  for (const auto& s : segments)
    if (s.kind == AnnotationKind::posture) out.push_back(s);
  return out;
}

}  // namespace worksight
