#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "idseq/image.hpp"
#include "idseq/preprocess.hpp"

namespace idseq {

enum class CorruptionKind {
  kSaturation,
  kContrast,
  kBlockwise,
  kGaussianNoise,
  kGaussianBlur,
  kJpeg,
};

inline constexpr std::array<CorruptionKind, 6> kAllCorruptions = {
    CorruptionKind::kSaturation,    CorruptionKind::kContrast,
    CorruptionKind::kBlockwise,     CorruptionKind::kGaussianNoise,
    CorruptionKind::kGaussianBlur,  CorruptionKind::kJpeg};

inline constexpr int kMaxSeverity = 5;

std::string_view to_string(CorruptionKind kind);
/// Accepts the table names ("GAUSSIAN_BLUR") and lower-case short forms
/// ("gaussian_blur", "blur", "noise", "jpeg", ...).
std::optional<CorruptionKind> parse_corruption_kind(std::string_view text);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kGaussianBlur;
  int severity = 0;  // 0 = pristine
  std::uint64_t seed = 0;
};

/// Parses "kind:severity"; throws ValidationError.
CorruptionSpec parse_corruption_spec(std::string_view text, std::uint64_t seed = 0);

/// Parameters per kind and severity 1..5. Each level is a map of named
/// numeric parameters.
class CorruptionTable {
 public:
  using Params = std::map<std::string, double>;

  /// Table shipped in data/corruption_table.json.
  static const CorruptionTable& builtin();
  static CorruptionTable from_json(std::string_view text);
  static CorruptionTable load(const std::filesystem::path& path);

  const Params& level(CorruptionKind kind, int severity) const;
  double param(CorruptionKind kind, int severity, const std::string& name) const;
  /// Name of the parameter that grows (or shrinks) with severity.
  static std::string primary_parameter(CorruptionKind kind);
  int version() const { return version_; }

 private:
  int version_ = 0;
  std::map<CorruptionKind, std::array<Params, kMaxSeverity>> levels_;
};

/// Same dimensions in and out. Severity 0 returns the input unchanged.
/// Noise and block-wise use `spec.seed`; the other kinds ignore it.
Image apply(const Image& image, const CorruptionSpec& spec,
            const CorruptionTable& table = CorruptionTable::builtin());

/// Frame i uses seed (spec.seed XOR frame index).
std::vector<Frame> corrupt_video(const std::vector<Frame>& frames,
                                 const CorruptionSpec& spec,
                                 const CorruptionTable& table = CorruptionTable::builtin());

}  // namespace idseq
