#include <cstring>

#include "byte_io.hpp"
#include "idseq/config.hpp"
#include "idseq/error.hpp"
#include "idseq/trainer.hpp"

namespace idseq {
namespace {

constexpr char kMagic[8] = {'I', 'D', 'S', 'Q', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kWhat = "checkpoint";

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  detail::ByteWriter w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  nlohmann::ordered_json header;
  header["detector"] = to_json(ckpt.model.config());
  header["meta"] = to_json(ckpt.meta);
  w.str32(header.dump());
  const auto views = ckpt.model.params().views();
  w.u32(static_cast<std::uint32_t>(views.size()));
  for (const auto& [name, v] : views) {
    w.str16(name);
    w.u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v[i]);
  }
  w.append_crc();
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  detail::ByteReader r(bytes.data(), bytes.size() - 4, kWhat);
  char magic[8];
  r.bytes(magic, sizeof magic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  detail::verify_crc(bytes, kWhat);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str32());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  DetectorConfig cfg;
  CheckpointMeta meta;
  try {
    cfg = detector_config_from_json(header.at("detector"));
    cfg.validate();
    meta = checkpoint_meta_from_json(header.at("meta"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }

  Detector model(cfg, 0);
  auto views = model.params().views();
  const std::uint32_t count = r.u32();
  if (count != views.size()) throw FormatError("checkpoint: tensor count mismatch");
  for (auto& [name, v] : views) {
    const std::string stored = r.str16();
    if (stored != name) {
      throw FormatError("checkpoint: expected tensor '" + name + "', found '" + stored + "'");
    }
    const std::uint64_t n = r.u64();
    if (n != static_cast<std::uint64_t>(v.size())) {
      throw FormatError("checkpoint: tensor '" + name + "' has the wrong size");
    }
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = r.f64();
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return {std::move(model), meta};
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::write_file(path.string(), encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path.string()));
}

}  // namespace idseq
