#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace brushplan {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Whole-token parse; throws std::runtime_error naming `what` on failure.
double parse_double(std::string_view token, std::string_view what = "number");
/// Whitespace-separated tokens of one line.
std::vector<std::string_view> split_fields(std::string_view line);

}  // namespace brushplan
