#include "protolex/report.hpp"

#include <iomanip>
#include <sstream>

#include "protolex/error.hpp"

namespace protolex {
namespace {

constexpr std::string_view kAnsiOn = "\x1b[7m";
constexpr std::string_view kAnsiOff = "\x1b[0m";

std::string maybe_escape(std::string_view s, ReportFormat format) {
  return format == ReportFormat::html ? html_escape(s) : std::string(s);
}

std::string fmt(double x, int precision = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << x;
  return os.str();
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "ansi") return ReportFormat::ansi;
  if (name == "html") return ReportFormat::html;
  throw Error(Errc::invalid_argument, "unknown report format '" + std::string(name) + "'");
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string highlight(std::string_view text, const std::vector<Token>& spans, ReportFormat format) {
  const std::string open = format == ReportFormat::html
                               ? "<mark class=\"" + std::string(kHighlightClass) + "\">"
                               : std::string(kAnsiOn);
  const std::string close = format == ReportFormat::html ? "</mark>" : std::string(kAnsiOff);
  std::string out;
  std::size_t pos = 0;
  for (const auto& s : spans) {
    if (s.begin < pos || s.end > text.size() || s.begin > s.end)
      throw Error(Errc::invalid_argument, "highlight spans must be sorted, disjoint and inside the text");
    out += maybe_escape(text.substr(pos, s.begin - pos), format);
    out += open;
    out += maybe_escape(text.substr(s.begin, s.end - s.begin), format);
    out += close;
    pos = s.end;
  }
  out += maybe_escape(text.substr(pos), format);
  return out;
}

std::string render_report(const std::vector<Explanation>& explanations, const PrototypeModel& model,
                          ReportFormat format) {
  std::ostringstream os;
  if (format == ReportFormat::html) {
    os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Prototype explanations</title>\n"
       << "<style>table{border-collapse:collapse;width:100%}td,th{border-top:1px solid #ccc;padding:6px;"
       << "vertical-align:top;text-align:left}mark." << kHighlightClass << "{background:#ffd54f}"
       << ".meta{color:#666;font-size:smaller}</style></head><body>\n"
       << "<table>\n<tr><th>Test sample and its keywords</th><th>Prototype and its most important words</th></tr>\n";
    for (const auto& e : explanations) {
      for (const auto& p : e.prototypes) {
        const auto& proto = model.prototypes[p.contribution.prototype];
        os << "<tr><td>" << highlight(e.text, p.extractive.selected, format)
           << "<div class=\"meta\">predicted class " << e.predicted << "</div></td><td>"
           << highlight(proto.source_text.value_or(""), p.abstractive.selected, format)
           << "<div class=\"meta\">prototype " << p.contribution.prototype << ", class " << proto.class_id
           << ", contribution " << fmt(p.contribution.value) << "</div></td></tr>\n";
      }
    }
    os << "</table>\n</body></html>\n";
    return os.str();
  }

  std::size_t n = 0;
  for (const auto& e : explanations) {
    os << "[" << ++n << "] predicted class " << e.predicted;
    if (static_cast<std::size_t>(e.predicted) < e.probs.size())
      os << " (p=" << fmt(e.probs[static_cast<std::size_t>(e.predicted)]) << ")";
    os << '\n';
    for (const auto& p : e.prototypes) {
      const auto& proto = model.prototypes[p.contribution.prototype];
      os << "  sample    | " << highlight(e.text, p.extractive.selected, format) << '\n';
      os << "  prototype | " << highlight(proto.source_text.value_or(""), p.abstractive.selected, format) << '\n';
      os << "            | #" << p.contribution.prototype << ", class " << proto.class_id << ", contribution "
         << fmt(p.contribution.value) << '\n';
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace protolex
