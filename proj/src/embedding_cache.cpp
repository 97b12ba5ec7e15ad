#include "idseq/embedding_cache.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <zlib.h>

#include "byte_io.hpp"
#include "idseq/error.hpp"

namespace idseq {
namespace detail {

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void verify_crc(const std::vector<std::uint8_t>& bytes, const char* what) {
  if (bytes.size() < 4) throw FormatError(std::string(what) + ": truncated");
  ByteReader tail(bytes.data() + bytes.size() - 4, 4, what);
  const std::uint32_t stored = tail.u32();
  if (crc32(bytes.data(), bytes.size() - 4) != stored) {
    throw FormatError(std::string(what) + ": checksum mismatch");
  }
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("short write to '" + path + "'");
}

}  // namespace detail

namespace {
constexpr char kMagic[8] = {'I', 'D', 'S', 'Q', 'E', 'M', 'B', '\0'};
constexpr const char* kWhat = "embedding cache";
}  // namespace

std::vector<std::uint8_t> encode_embedding_cache(const EmbeddingSequence& seq) {
  if (seq.aux.size() != seq.dim()) {
    throw ValidationError("auxiliary vector dim does not match frames");
  }
  detail::ByteWriter w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kEmbeddingCacheVersion);
  w.u32(static_cast<std::uint32_t>(seq.dim()));
  w.u32(static_cast<std::uint32_t>(seq.length()));
  w.str16(seq.backend_id);
  w.str16(seq.video_id);
  for (Eigen::Index r = 0; r < seq.length(); ++r) {
    for (Eigen::Index c = 0; c < seq.dim(); ++c) w.f32(seq.frames(r, c));
  }
  for (Eigen::Index c = 0; c < seq.dim(); ++c) w.f32(seq.aux[c]);
  w.append_crc();
  return std::move(w.buffer());
}

EmbeddingSequence decode_embedding_cache(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size(), kWhat);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError("embedding cache: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingCacheVersion) {
    throw FormatError("embedding cache: unsupported version " +
                      std::to_string(version));
  }
  detail::verify_crc(bytes, kWhat);

  const std::uint32_t dim = r.u32();
  const std::uint32_t length = r.u32();
  EmbeddingSequence seq;
  seq.backend_id = r.str16();
  seq.video_id = r.str16();
  const std::size_t floats =
      (static_cast<std::size_t>(length) + 1) * static_cast<std::size_t>(dim);
  if (r.remaining() != floats * 4 + 4) {
    throw FormatError("embedding cache: payload size does not match header");
  }
  seq.frames.resize(length, dim);
  for (std::uint32_t i = 0; i < length; ++i) {
    for (std::uint32_t c = 0; c < dim; ++c) seq.frames(i, c) = r.f32();
  }
  seq.aux.resize(dim);
  for (std::uint32_t c = 0; c < dim; ++c) seq.aux[c] = r.f32();
  return seq;
}

void cache_write(const EmbeddingSequence& seq, const std::filesystem::path& path) {
  detail::write_file(path.string(), encode_embedding_cache(seq));
}

EmbeddingSequence cache_read(const std::filesystem::path& path) {
  try {
    return decode_embedding_cache(detail::read_file(path.string()));
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace idseq
