#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "protolex/model.hpp"
#include "protolex/rationale.hpp"

namespace protolex {

enum class ReportFormat { ansi, html };

ReportFormat parse_report_format(std::string_view name);

inline constexpr std::string_view kHighlightClass = "rationale";

// Wraps each [begin, end) byte span of `text` with open/close markers.
// Non-highlighted and highlighted text both pass through `escape` when
// html is set. Spans must be sorted and non-overlapping.
std::string highlight(std::string_view text, const std::vector<Token>& spans, ReportFormat format);

std::string html_escape(std::string_view text);

// One block per sample: every top prototype gets a row pairing the input
// (extractive words marked) with the prototype's source sentence
// (abstractive words marked).
std::string render_report(const std::vector<Explanation>& explanations, const PrototypeModel& model,
                          ReportFormat format);

}  // namespace protolex
