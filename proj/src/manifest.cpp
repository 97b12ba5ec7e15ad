#include "idseq/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "idseq/error.hpp"
#include "idseq/rng.hpp"
#include "json.hpp"

namespace idseq {
namespace {

using ojson = nlohmann::ordered_json;

std::string upper(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return out;
}

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw ValidationError("manifest line " + std::to_string(line) + ": " + what);
}

std::string require_string(const ojson& obj, const char* key,
                           std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    fail_line(line, std::string("missing field '") + key + "'");
  }
  if (!it->is_string()) {
    fail_line(line, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::string optional_string(const ojson& obj, const char* key,
                            std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) {
    fail_line(line, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

VideoRecord parse_record(const ojson& obj, std::size_t line,
                         bool require_split) {
  if (!obj.is_object()) fail_line(line, "expected a JSON object");
  VideoRecord rec;
  rec.video_id = require_string(obj, "video_id", line);
  rec.identity_id = require_string(obj, "identity_id", line);
  if (rec.video_id.empty()) fail_line(line, "empty video_id");
  if (rec.identity_id.empty()) fail_line(line, "empty identity_id");

  const std::string label = require_string(obj, "label", line);
  auto parsed_label = parse_label(label);
  if (!parsed_label) fail_line(line, "unknown label '" + label + "'");
  rec.label = *parsed_label;

  const std::string fake_type = optional_string(obj, "fake_type", line);
  if (!fake_type.empty()) {
    auto parsed = parse_fake_type(fake_type);
    if (!parsed) fail_line(line, "unknown fake_type '" + fake_type + "'");
    rec.fake_type = *parsed;
  }
  if (rec.label == Label::kFake && !rec.fake_type) {
    fail_line(line, "FAKE record '" + rec.video_id + "' has no fake_type");
  }
  if (rec.label == Label::kReal && rec.fake_type) {
    fail_line(line, "REAL record '" + rec.video_id + "' has a fake_type");
  }

  rec.frames_path = require_string(obj, "frames_path", line);
  if (require_split) {
    rec.aux_image_path = require_string(obj, "aux_image_path", line);
    if (rec.aux_image_path.empty()) fail_line(line, "empty aux_image_path");
  } else {
    rec.aux_image_path = optional_string(obj, "aux_image_path", line);
  }
  rec.aux_video_id = optional_string(obj, "aux_video_id", line);

  const std::string split = require_split
                                ? require_string(obj, "split", line)
                                : optional_string(obj, "split", line);
  if (!split.empty()) {
    auto parsed = parse_split(split);
    if (!parsed) fail_line(line, "unknown split '" + split + "'");
    rec.split = *parsed;
  }
  return rec;
}

ojson record_to_json(const VideoRecord& rec) {
  ojson obj;
  obj["video_id"] = rec.video_id;
  obj["identity_id"] = rec.identity_id;
  obj["label"] = to_string(rec.label);
  obj["fake_type"] =
      rec.fake_type ? ojson(to_string(*rec.fake_type)) : ojson(nullptr);
  obj["frames_path"] = rec.frames_path;
  obj["aux_image_path"] = rec.aux_image_path;
  if (!rec.aux_video_id.empty()) obj["aux_video_id"] = rec.aux_video_id;
  if (rec.split) obj["split"] = to_string(*rec.split);
  return obj;
}

}  // namespace

std::string_view to_string(Label label) {
  return label == Label::kReal ? "REAL" : "FAKE";
}

std::string_view to_string(FakeType type) {
  switch (type) {
    case FakeType::kAD: return "AD";
    case FakeType::kFOMM: return "FOMM";
    case FakeType::kFS: return "FS";
    case FakeType::kDFL: return "DFL";
    case FakeType::kFSGAN: return "FSGAN";
    case FakeType::kOther: return "OTHER";
  }
  return "OTHER";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "TRAIN";
    case Split::kVal: return "VAL";
    case Split::kTest: return "TEST";
  }
  return "TRAIN";
}

std::optional<Label> parse_label(std::string_view text) {
  const std::string u = upper(text);
  if (u == "REAL") return Label::kReal;
  if (u == "FAKE") return Label::kFake;
  return std::nullopt;
}

std::optional<FakeType> parse_fake_type(std::string_view text) {
  const std::string u = upper(text);
  for (FakeType t : kAllFakeTypes) {
    if (u == to_string(t)) return t;
  }
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view text) {
  const std::string u = upper(text);
  for (Split s : kAllSplits) {
    if (u == to_string(s)) return s;
  }
  return std::nullopt;
}

bool is_face_swap(FakeType type) {
  return type == FakeType::kFS || type == FakeType::kDFL ||
         type == FakeType::kFSGAN;
}

std::vector<const VideoRecord*> Manifest::in_split(Split split) const {
  std::vector<const VideoRecord*> out;
  for (const auto& rec : records) {
    if (rec.split == split) out.push_back(&rec);
  }
  return out;
}

const VideoRecord* Manifest::find(std::string_view video_id) const {
  for (const auto& rec : records) {
    if (rec.video_id == video_id) return &rec;
  }
  return nullptr;
}

Manifest build_manifest(std::vector<VideoRecord> records) {
  Manifest manifest;
  std::unordered_map<std::string, const VideoRecord*> by_id;
  std::map<std::string, Split> identity_split;

  for (const auto& rec : records) {
    if (!by_id.emplace(rec.video_id, &rec).second) {
      throw ValidationError("duplicate video_id '" + rec.video_id + "'");
    }
    if ((rec.label == Label::kFake) != rec.fake_type.has_value()) {
      throw ValidationError("record '" + rec.video_id +
                            "': fake_type must be present iff label is FAKE");
    }
    if (!rec.split) {
      throw ValidationError("record '" + rec.video_id + "' has no split");
    }
    auto [it, inserted] = identity_split.emplace(rec.identity_id, *rec.split);
    if (!inserted && it->second != *rec.split) {
      throw ValidationError("identity '" + rec.identity_id +
                            "' appears in both " +
                            std::string(to_string(it->second)) + " and " +
                            std::string(to_string(*rec.split)));
    }
  }

  for (const auto& rec : records) {
    if (rec.aux_video_id.empty()) {
      if (!rec.aux_image_path.empty() && rec.aux_image_path == rec.frames_path) {
        throw ValidationError("record '" + rec.video_id +
                              "' uses its own video as auxiliary image");
      }
      continue;
    }
    if (rec.aux_video_id == rec.video_id) {
      throw ValidationError("record '" + rec.video_id +
                            "' uses its own video as auxiliary image");
    }
    auto it = by_id.find(rec.aux_video_id);
    if (it == by_id.end()) continue;
    const VideoRecord& src = *it->second;
    if (src.identity_id != rec.identity_id) {
      throw ValidationError("record '" + rec.video_id +
                            "': auxiliary source '" + src.video_id +
                            "' belongs to identity '" + src.identity_id + "'");
    }
    if (src.label != Label::kReal) {
      throw ValidationError("record '" + rec.video_id +
                            "': auxiliary source '" + src.video_id +
                            "' is not a REAL video");
    }
  }

  for (Split s : kAllSplits) manifest.split_identities[s];
  for (const auto& [identity, split] : identity_split) {
    manifest.split_identities[split].insert(identity);
  }
  manifest.records = std::move(records);
  return manifest;
}

std::vector<VideoRecord> parse_records(std::string_view text,
                                       bool require_split) {
  std::vector<VideoRecord> records;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson obj;
    try {
      obj = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail_line(line_no, std::string("invalid JSON: ") + e.what());
    }
    records.push_back(parse_record(obj, line_no, require_split));
  }
  return records;
}

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<VideoRecord> load_records(const std::filesystem::path& path) {
  return parse_records(read_text(path), /*require_split=*/false);
}

Manifest load_manifest(const std::filesystem::path& path) {
  return build_manifest(parse_records(read_text(path), /*require_split=*/true));
}

std::string serialize_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& rec : manifest.records) {
    out += record_to_json(rec).dump();
    out += '\n';
  }
  return out;
}

void save_manifest(const Manifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << serialize_manifest(manifest);
}

Manifest make_identity_splits(std::vector<VideoRecord> records,
                              SplitFractions fractions, std::uint64_t seed) {
  if (!(fractions.train > 0 && fractions.val > 0 && fractions.test > 0)) {
    throw ValidationError("split fractions must be positive");
  }
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-6) {
    throw ValidationError("split fractions must sum to 1");
  }
  std::set<std::string> unique;
  for (const auto& rec : records) unique.insert(rec.identity_id);
  std::vector<std::string> identities(unique.begin(), unique.end());
  const std::size_t n = identities.size();
  if (n < kAllSplits.size()) {
    throw ValidationError("need at least 3 identities for 3 non-empty splits, got " +
                          std::to_string(n));
  }

  Rng rng(seed);
  rng.shuffle(identities);

  auto take = [n](double f) {
    auto k = static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
    return std::max<std::size_t>(k, 1);
  };
  std::size_t n_val = take(fractions.val);
  std::size_t n_test = take(fractions.test);
  while (n_val + n_test >= n) {
    if (n_val >= n_test && n_val > 1) {
      --n_val;
    } else {
      --n_test;
    }
  }
  const std::size_t n_train = n - n_val - n_test;

  std::map<std::string, Split> assignment;
  for (std::size_t i = 0; i < n; ++i) {
    Split s = i < n_train ? Split::kTrain
              : i < n_train + n_val ? Split::kVal
                                    : Split::kTest;
    assignment[identities[i]] = s;
  }
  for (auto& rec : records) rec.split = assignment.at(rec.identity_id);
  return build_manifest(std::move(records));
}

std::vector<VideoRecord> pair_aux_images(std::vector<VideoRecord> records,
                                         std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> reals;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == Label::kReal) {
      reals[records[i].identity_id].push_back(i);
    }
  }

  Rng rng(seed);
  std::set<std::string> unpaired;
  for (auto& rec : records) {
    std::vector<std::size_t> eligible;
    if (auto it = reals.find(rec.identity_id); it != reals.end()) {
      for (std::size_t j : it->second) {
        if (records[j].video_id != rec.video_id) eligible.push_back(j);
      }
    }
    if (eligible.empty()) {
      unpaired.insert(rec.identity_id);
      continue;
    }
    const VideoRecord& src = records[eligible[rng.uniform_index(eligible.size())]];
    rec.aux_image_path = src.frames_path;
    rec.aux_video_id = src.video_id;
  }
  if (!unpaired.empty()) {
    std::string names;
    for (const auto& id : unpaired) {
      if (!names.empty()) names += ", ";
      names += id;
    }
    throw ValidationError("no eligible auxiliary source (another REAL video of "
                          "the same identity) for identities: " + names);
  }
  return records;
}

}  // namespace idseq
