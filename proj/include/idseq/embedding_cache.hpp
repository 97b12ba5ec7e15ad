#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "idseq/embedder.hpp"

namespace idseq {

/// On-disk embedding cache, all integers little-endian:
///
///   magic      8 bytes  "IDSQEMB\0"
///   version    u32      kEmbeddingCacheVersion
///   dim        u32
///   length     u32      number of frame vectors
///   backend_id u16 byte count + UTF-8 bytes
///   video_id   u16 byte count + UTF-8 bytes
///   frames     length * dim float32, row-major
///   aux        dim float32
///   crc32      u32      zlib CRC-32 of every preceding byte
inline constexpr std::uint32_t kEmbeddingCacheVersion = 1;

std::vector<std::uint8_t> encode_embedding_cache(const EmbeddingSequence& seq);
/// Throws FormatError on bad magic, unknown version, truncation or checksum
/// mismatch.
EmbeddingSequence decode_embedding_cache(const std::vector<std::uint8_t>& bytes);

void cache_write(const EmbeddingSequence& seq, const std::filesystem::path& path);
EmbeddingSequence cache_read(const std::filesystem::path& path);

}  // namespace idseq
