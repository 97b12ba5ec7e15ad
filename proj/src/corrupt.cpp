#include "idseq/corrupt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <sstream>

#include "corruption_table_data.hpp"
#include "cv_bridge.hpp"
#include "idseq/error.hpp"
#include "idseq/rng.hpp"
#include "json.hpp"

namespace idseq {
namespace {

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Full-range BT.601 YCbCr.
void rgb_to_ycbcr(double r, double g, double b, double& y, double& cb, double& cr) {
  y = 0.299 * r + 0.587 * g + 0.114 * b;
  cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
  cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
}

void ycbcr_to_rgb(double y, double cb, double cr, double& r, double& g, double& b) {
  r = y + 1.402 * (cr - 128.0);
  g = y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0);
  b = y + 1.772 * (cb - 128.0);
}

Image saturation(const Image& in, double chroma_scale) {
  if (in.channels != 3) return in;
  Image out = in;
  for (std::size_t i = 0; i < in.pixels.size(); i += 3) {
    double y, cb, cr, r, g, b;
    rgb_to_ycbcr(in.pixels[i], in.pixels[i + 1], in.pixels[i + 2], y, cb, cr);
    cb = 128.0 + (cb - 128.0) * chroma_scale;
    cr = 128.0 + (cr - 128.0) * chroma_scale;
    ycbcr_to_rgb(y, cb, cr, r, g, b);
    out.pixels[i] = clamp_u8(r);
    out.pixels[i + 1] = clamp_u8(g);
    out.pixels[i + 2] = clamp_u8(b);
  }
  return out;
}

Image contrast(const Image& in, double scale) {
  Image out = in;
  for (auto& p : out.pixels) {
    p = static_cast<std::uint8_t>(std::clamp(std::floor(p * scale), 0.0, 255.0));
  }
  return out;
}

Image blockwise(const Image& in, const CorruptionTable::Params& params,
                std::uint64_t seed) {
  const int size = static_cast<int>(params.at("block_size"));
  const int value = static_cast<int>(params.at("block_value"));
  const int reference = static_cast<int>(params.at("reference_side"));
  const int per_unit = static_cast<int>(params.at("block_count"));
  // Block count scales with frame size; small frames still get one unit.
  const int units = std::max(1, std::min(in.height, in.width) / reference);
  const int count = per_unit * units;
  Image out = in;
  const int bh = std::min(size, in.height);
  const int bw = std::min(size, in.width);
  Rng rng(seed);
  for (int k = 0; k < count; ++k) {
    const int x0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(in.width - bw + 1)));
    const int y0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(in.height - bh + 1)));
    for (int y = y0; y < y0 + bh; ++y) {
      for (int x = x0; x < x0 + bw; ++x) {
        for (int c = 0; c < in.channels; ++c) {
          out.at(y, x, c) = static_cast<std::uint8_t>(value);
        }
      }
    }
  }
  return out;
}

Image gaussian_noise(const Image& in, double sigma, std::uint64_t seed) {
  Image out = in;
  Rng rng(seed);
  for (auto& p : out.pixels) p = clamp_u8(p + sigma * rng.normal());
  return out;
}

Image gaussian_blur(const Image& in, int kernel) {
  cv::Mat mat = detail::to_mat(in);
  cv::Mat blurred;
  cv::GaussianBlur(mat, blurred, cv::Size(kernel, kernel), kernel / 6.0);
  return detail::from_mat(blurred);
}

Image jpeg(const Image& in, const CorruptionTable::Params& params) {
  cv::Mat mat = detail::to_mat(in);
  if (auto it = params.find("downscale"); it != params.end()) {
    const int factor = static_cast<int>(it->second);
    const int w = std::max(1, mat.cols / factor);
    const int h = std::max(1, mat.rows / factor);
    cv::Mat small;
    cv::resize(mat, small, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
    cv::resize(small, mat, cv::Size(in.width, in.height), 0, 0, cv::INTER_LINEAR);
  }
  if (auto it = params.find("quality"); it != params.end()) {
    std::vector<std::uint8_t> buf;
    cv::imencode(".jpg", mat, buf,
                 {cv::IMWRITE_JPEG_QUALITY, static_cast<int>(it->second)});
    mat = cv::imdecode(buf, in.channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
  }
  return detail::from_mat(mat);
}

}  // namespace

std::string_view to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kSaturation: return "SATURATION";
    case CorruptionKind::kContrast: return "CONTRAST";
    case CorruptionKind::kBlockwise: return "BLOCKWISE";
    case CorruptionKind::kGaussianNoise: return "GAUSSIAN_NOISE";
    case CorruptionKind::kGaussianBlur: return "GAUSSIAN_BLUR";
    case CorruptionKind::kJpeg: return "JPEG";
  }
  return "JPEG";
}

std::optional<CorruptionKind> parse_corruption_kind(std::string_view text) {
  std::string u(text);
  for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  std::replace(u.begin(), u.end(), '-', '_');
  for (auto k : kAllCorruptions) {
    if (u == to_string(k)) return k;
  }
  if (u == "CS") return CorruptionKind::kSaturation;
  if (u == "CC") return CorruptionKind::kContrast;
  if (u == "BW" || u == "BLOCK") return CorruptionKind::kBlockwise;
  if (u == "NOISE" || u == "GNC" || u == "GAUSSIAN_NOISE") return CorruptionKind::kGaussianNoise;
  if (u == "BLUR" || u == "GB") return CorruptionKind::kGaussianBlur;
  return std::nullopt;
}

CorruptionSpec parse_corruption_spec(std::string_view text, std::uint64_t seed) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ValidationError("corruption must be kind:severity, got '" +
                          std::string(text) + "'");
  }
  auto kind = parse_corruption_kind(text.substr(0, colon));
  if (!kind) {
    throw ValidationError("unknown corruption kind '" +
                          std::string(text.substr(0, colon)) + "'");
  }
  const std::string sev(text.substr(colon + 1));
  int severity = -1;
  try {
    std::size_t used = 0;
    severity = std::stoi(sev, &used);
    if (used != sev.size()) severity = -1;
  } catch (const std::exception&) {
    severity = -1;
  }
  if (severity < 0 || severity > kMaxSeverity) {
    throw ValidationError("corruption severity must be 0..5, got '" + sev + "'");
  }
  return {*kind, severity, seed};
}

const CorruptionTable& CorruptionTable::builtin() {
  static const CorruptionTable table = from_json(detail::kBuiltinCorruptionTable);
  return table;
}

CorruptionTable CorruptionTable::from_json(std::string_view text) {
  CorruptionTable table;
  try {
    const auto doc = nlohmann::json::parse(text);
    table.version_ = doc.at("version").get<int>();
    const auto& kinds = doc.at("kinds");
    for (auto kind : kAllCorruptions) {
      const std::string name(to_string(kind));
      if (!kinds.contains(name)) {
        throw ValidationError("corruption table lacks kind " + name);
      }
      auto& levels = table.levels_[kind];
      for (int s = 1; s <= kMaxSeverity; ++s) {
        const auto& entry = kinds.at(name).at(std::to_string(s));
        for (const auto& [key, value] : entry.items()) {
          levels[static_cast<std::size_t>(s - 1)][key] = value.get<double>();
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("corruption table: ") + e.what());
  }
  for (auto kind : kAllCorruptions) {
    const std::string p = primary_parameter(kind);
    for (int s = 1; s <= kMaxSeverity; ++s) {
      const auto& lv = table.levels_[kind][static_cast<std::size_t>(s - 1)];
      if (!lv.contains(p)) {
        throw ValidationError("corruption table: " + std::string(to_string(kind)) +
                              " level " + std::to_string(s) + " lacks '" + p + "'");
      }
    }
  }
  return table;
}

CorruptionTable CorruptionTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corruption table '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const CorruptionTable::Params& CorruptionTable::level(CorruptionKind kind,
                                                      int severity) const {
  if (severity < 1 || severity > kMaxSeverity) {
    throw ValidationError("severity " + std::to_string(severity) + " has no table entry");
  }
  return levels_.at(kind)[static_cast<std::size_t>(severity - 1)];
}

double CorruptionTable::param(CorruptionKind kind, int severity,
                              const std::string& name) const {
  const auto& lv = level(kind, severity);
  auto it = lv.find(name);
  if (it == lv.end()) {
    throw ValidationError("corruption parameter '" + name + "' missing");
  }
  return it->second;
}

std::string CorruptionTable::primary_parameter(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kSaturation: return "chroma_scale";
    case CorruptionKind::kContrast: return "intensity_scale";
    case CorruptionKind::kBlockwise: return "block_count";
    case CorruptionKind::kGaussianNoise: return "sigma";
    case CorruptionKind::kGaussianBlur: return "kernel_size";
    case CorruptionKind::kJpeg: return "downscale";
  }
  return {};
}

Image apply(const Image& image, const CorruptionSpec& spec,
            const CorruptionTable& table) {
  if (spec.severity < 0 || spec.severity > kMaxSeverity) {
    throw ValidationError("corruption severity must be 0..5, got " +
                          std::to_string(spec.severity));
  }
  if (image.empty() ||
      image.pixels.size() != static_cast<std::size_t>(image.height) * image.width * image.channels) {
    throw InputError("invalid image");
  }
  if (spec.severity == 0) return image;
  const auto& params = table.level(spec.kind, spec.severity);
  const double p = params.at(CorruptionTable::primary_parameter(spec.kind));
  switch (spec.kind) {
    case CorruptionKind::kSaturation: return saturation(image, p);
    case CorruptionKind::kContrast: return contrast(image, p);
    case CorruptionKind::kBlockwise: return blockwise(image, params, spec.seed);
    case CorruptionKind::kGaussianNoise: return gaussian_noise(image, p, spec.seed);
    case CorruptionKind::kGaussianBlur: return gaussian_blur(image, static_cast<int>(p));
    case CorruptionKind::kJpeg: return jpeg(image, params);
  }
  throw ValidationError("unknown corruption kind");
}

std::vector<Frame> corrupt_video(const std::vector<Frame>& frames,
                                 const CorruptionSpec& spec,
                                 const CorruptionTable& table) {
  if (spec.severity < 0 || spec.severity > kMaxSeverity) {
    throw ValidationError("corruption severity must be 0..5, got " +
                          std::to_string(spec.severity));
  }
  std::vector<Frame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    CorruptionSpec s = spec;
    s.seed = spec.seed ^ static_cast<std::uint64_t>(f.index);
    out.push_back({apply(f.image, s, table), f.index});
  }
  return out;
}

}  // namespace idseq
