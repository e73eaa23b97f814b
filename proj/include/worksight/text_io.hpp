#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace worksight::text {

/// Shortest decimal form that parses back to the same double.
std::string format_number(double value);

std::string_view trim(std::string_view s);

/// Splits on `delim`; surrounding double quotes on a field are removed and
/// quoted fields may contain the delimiter.
std::vector<std::string> split_fields(std::string_view line, char delim);

/// Picks ';', tab or ',' by which one occurs in the header line (',' fallback).
char detect_delimiter(std::string_view header);

/// Strict parse: the whole (trimmed) field must be a finite number.
/// `what` names the field in the ValidationError message.
double parse_number(std::string_view field, std::string_view what);
long long parse_integer(std::string_view field, std::string_view what);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Lines with trailing '\r' stripped. Blank lines are kept.
std::vector<std::string> split_lines(std::string_view content);

std::string lowercase(std::string_view s);

}  // namespace worksight::text
