#include <cstdio>
#include <fstream>
#include <sstream>

#include "idseq/error.hpp"
#include "idseq/evaluation.hpp"
#include "json.hpp"

namespace idseq {
namespace {

using ojson = nlohmann::ordered_json;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Shortest text that reads back as the same double.
std::string exact(double v) {
  char buf[64];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

ojson to_json(const EvalReport& r) {
  ojson doc;
  doc["split"] = r.split;
  doc["auc_overall"] = r.auc_overall;
  ojson by_type = ojson::object();
  for (const auto& [type, value] : r.auc_by_fake_type) by_type[std::string(to_string(type))] = value;
  doc["auc_by_fake_type"] = by_type;
  ojson videos = ojson::array();
  for (const auto& v : r.per_video) {
    ojson row;
    row["video_id"] = v.video_id;
    row["label"] = to_string(v.label);
    row["fake_type"] = v.fake_type ? ojson(to_string(*v.fake_type)) : ojson(nullptr);
    row["score"] = v.score;
    videos.push_back(row);
  }
  doc["per_video"] = videos;
  ojson robustness = ojson::object();
  for (const auto& [kind, curve] : r.robustness) {
    robustness[std::string(to_string(kind))] = curve;
  }
  doc["robustness"] = robustness;
  ojson decline = ojson::object();
  for (const auto& [kind, values] : r.auc_decline) {
    decline[std::string(to_string(kind))] = values;
  }
  doc["auc_decline"] = decline;
  return doc;
}

std::string render_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "row,id,label,fake_type,value\n";
  for (const auto& v : r.per_video) {
    out << "video," << v.video_id << ',' << to_string(v.label) << ','
        << (v.fake_type ? to_string(*v.fake_type) : "") << ',' << exact(v.score)
        << '\n';
  }
  for (const auto& [type, value] : r.auc_by_fake_type) {
    out << "auc," << to_string(type) << ",,," << exact(value) << '\n';
  }
  out << "auc,all,,," << exact(r.auc_overall) << '\n';
  for (const auto& [kind, curve] : r.robustness) {
    for (std::size_t s = 0; s < curve.size(); ++s) {
      out << "robustness," << to_string(kind) << ":" << s << ",,," << exact(curve[s])
          << '\n';
    }
  }
  return out.str();
}

std::string render_markdown(const EvalReport& r, const std::string& method) {
  std::ostringstream out;
  out << "Video-level AUC (%) on " << r.split << "\n\n";
  out << "| Method |";
  for (const auto& [type, value] : r.auc_by_fake_type) out << ' ' << to_string(type) << " |";
  out << " all |\n|---|";
  for (std::size_t i = 0; i < r.auc_by_fake_type.size(); ++i) out << "---|";
  out << "---|\n| " << method << " |";
  for (const auto& [type, value] : r.auc_by_fake_type) out << ' ' << fixed(100 * value, 2) << " |";
  out << ' ' << fixed(100 * r.auc_overall, 2) << " |\n";

  if (!r.robustness.empty()) {
    out << "\nAUC decline (%) with increasing distortion level\n\n";
    out << "| Corruption | AUC for pristine data | 1 | 2 | 3 | 4 | 5 |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& [kind, curve] : r.robustness) {
      out << "| " << to_string(kind) << " | " << fixed(100 * curve[0], 1) << " |";
      const auto it = r.auc_decline.find(kind);
      for (int s = 0; s < kMaxSeverity; ++s) {
        const double d = it != r.auc_decline.end()
                             ? it->second[static_cast<std::size_t>(s)]
                             : curve[0] - curve[static_cast<std::size_t>(s + 1)];
        out << ' ' << fixed(100 * d, 1) << " |";
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string render_svg(const EvalReport& r) {
  constexpr double kWidth = 560, kHeight = 360;
  constexpr double kLeft = 60, kRight = 170, kTop = 30, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                  "#d62728", "#9467bd", "#8c564b"};

  auto x_of = [&](int s) { return kLeft + plot_w * s / kMaxSeverity; };
  auto y_of = [&](double auc) { return kTop + plot_h * (1.0 - auc); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kLeft << "\" y=\"18\">Video-level AUC vs. severity ("
      << r.split << ")</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i * 0.25;
    out << "<line x1=\"" << kLeft << "\" y1=\"" << fixed(y_of(v), 1) << "\" x2=\""
        << kLeft + plot_w << "\" y2=\"" << fixed(y_of(v), 1)
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << kLeft - 8 << "\" y=\"" << fixed(y_of(v) + 4, 1)
        << "\" text-anchor=\"end\">" << fixed(v, 2) << "</text>\n";
  }
  for (int s = 0; s <= kMaxSeverity; ++s) {
    out << "<text x=\"" << fixed(x_of(s), 1) << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\">" << s << "</text>\n";
  }
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">severity</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";

  std::size_t i = 0;
  for (const auto& [kind, curve] : r.robustness) {
    const char* color = kColors[i % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (int s = 0; s <= kMaxSeverity; ++s) {
      if (s) out << ' ';
      out << fixed(x_of(s), 1) << ',' << fixed(y_of(curve[static_cast<std::size_t>(s)]), 1);
    }
    out << "\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(i);
    out << "<line x1=\"" << kLeft + plot_w + 12 << "\" y1=\"" << fixed(ly - 4, 1)
        << "\" x2=\"" << kLeft + plot_w + 32 << "\" y2=\"" << fixed(ly - 4, 1)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kLeft + plot_w + 38 << "\" y=\"" << fixed(ly, 1) << "\">"
        << to_string(kind) << "</text>\n";
    ++i;
  }
  out << "</svg>\n";
  return out.str();
}

template <std::size_t N>
std::array<double, N> read_array(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != N) {
    throw ValidationError("report: expected an array of " + std::to_string(N) + " values");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = j.at(i).get<double>();
  return out;
}

}  // namespace

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  std::string u(text);
  for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "JSON") return ReportFormat::kJson;
  if (u == "CSV") return ReportFormat::kCsv;
  if (u == "MARKDOWN" || u == "MARKDOWN-TABLE" || u == "MD") return ReportFormat::kMarkdown;
  if (u == "SVG" || u == "PLOT-SVG") return ReportFormat::kSvg;
  return std::nullopt;
}

std::string render_report(const EvalReport& report, ReportFormat format,
                          const std::string& method) {
  switch (format) {
    case ReportFormat::kJson: return to_json(report).dump(2) + "\n";
    case ReportFormat::kCsv: return render_csv(report);
    case ReportFormat::kMarkdown: return render_markdown(report, method);
    case ReportFormat::kSvg: return render_svg(report);
  }
  throw ValidationError("unknown report format");
}

void write_report(const EvalReport& report, ReportFormat format,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write report '" + path.string() + "'");
  out << render_report(report, format);
}

EvalReport report_from_json(std::string_view text) {
  EvalReport r;
  try {
    const auto doc = nlohmann::json::parse(text);
    r.split = doc.at("split").get<std::string>();
    r.auc_overall = doc.at("auc_overall").get<double>();
    for (const auto& [key, value] : doc.at("auc_by_fake_type").items()) {
      auto type = parse_fake_type(key);
      if (!type) throw ValidationError("report: unknown fake type '" + key + "'");
      r.auc_by_fake_type[*type] = value.get<double>();
    }
    for (const auto& row : doc.at("per_video")) {
      VideoScore v;
      v.video_id = row.at("video_id").get<std::string>();
      auto label = parse_label(row.at("label").get<std::string>());
      if (!label) throw ValidationError("report: bad label");
      v.label = *label;
      if (!row.at("fake_type").is_null()) {
        v.fake_type = parse_fake_type(row.at("fake_type").get<std::string>());
      }
      v.score = row.at("score").get<double>();
      r.per_video.push_back(std::move(v));
    }
    const auto robustness = doc.value("robustness", nlohmann::json::object());
    for (const auto& [key, value] : robustness.items()) {
      auto kind = parse_corruption_kind(key);
      if (!kind) throw ValidationError("report: unknown corruption '" + key + "'");
      r.robustness[*kind] = read_array<6>(value);
    }
    const auto decline = doc.value("auc_decline", nlohmann::json::object());
    for (const auto& [key, value] : decline.items()) {
      auto kind = parse_corruption_kind(key);
      if (!kind) throw ValidationError("report: unknown corruption '" + key + "'");
      r.auc_decline[*kind] = read_array<5>(value);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
  return r;
}

}  // namespace idseq
