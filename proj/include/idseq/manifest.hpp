#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace idseq {

enum class Label { kReal, kFake };
enum class FakeType { kAD, kFOMM, kFS, kDFL, kFSGAN, kOther };
enum class Split { kTrain, kVal, kTest };

inline constexpr std::array<FakeType, 6> kAllFakeTypes = {
    FakeType::kAD, FakeType::kFOMM, FakeType::kFS,
    FakeType::kDFL, FakeType::kFSGAN, FakeType::kOther};
inline constexpr std::array<Split, 3> kAllSplits = {Split::kTrain, Split::kVal,
                                                    Split::kTest};

std::string_view to_string(Label label);
std::string_view to_string(FakeType type);
std::string_view to_string(Split split);
std::optional<Label> parse_label(std::string_view text);
std::optional<FakeType> parse_fake_type(std::string_view text);
/// Accepts upper or lower case ("TRAIN", "train").
std::optional<Split> parse_split(std::string_view text);

/// Face swapping methods replace the identity; reenactment keeps it.
bool is_face_swap(FakeType type);

struct VideoRecord {
  std::string video_id;
  std::string identity_id;
  Label label = Label::kReal;
  std::optional<FakeType> fake_type;
  /// Frame directory, video file or embedding cache file.
  std::string frames_path;
  /// Registered image. Empty until pair_aux_images() runs.
  std::string aux_image_path;
  /// Video the registered image was taken from, when known.
  std::string aux_video_id;
  std::optional<Split> split;

  bool operator==(const VideoRecord&) const = default;
};

struct Manifest {
  std::vector<VideoRecord> records;
  std::map<Split, std::set<std::string>> split_identities;

  bool operator==(const Manifest&) const = default;

  std::vector<const VideoRecord*> in_split(Split split) const;
  const VideoRecord* find(std::string_view video_id) const;
};

/// Checks every record and cross-record invariant; throws ValidationError.
/// Rebuilds split_identities from the records.
Manifest build_manifest(std::vector<VideoRecord> records);

/// One JSON object per line. Blank lines are skipped.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
std::string serialize_manifest(const Manifest& manifest);

/// Parses JSON-Lines records without requiring a split or aux image, for
/// inputs to make_identity_splits / pair_aux_images.
std::vector<VideoRecord> load_records(const std::filesystem::path& path);
std::vector<VideoRecord> parse_records(std::string_view text,
                                       bool require_split);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Partitions identities (not videos). Identities are sorted, shuffled with
/// `seed`, then VAL and TEST take floor(fraction * count) identities each
/// (at least one) and TRAIN keeps the remainder.
Manifest make_identity_splits(std::vector<VideoRecord> records,
                              SplitFractions fractions, std::uint64_t seed);

/// Every record receives a registered image drawn from a REAL video of the
/// same (labeled) identity with a different video_id. For FAKE records the
/// labeled identity is the impersonated one.
std::vector<VideoRecord> pair_aux_images(std::vector<VideoRecord> records,
                                         std::uint64_t seed);

}  // namespace idseq
