#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "idseq/corrupt.hpp"
#include "idseq/embedder.hpp"
#include "idseq/manifest.hpp"
#include "idseq/preprocess.hpp"

namespace idseq {

/// Source of per-video embedding sequences.
class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  /// Thread-safe.
  virtual std::shared_ptr<const EmbeddingSequence> load(
      const VideoRecord& record) const = 0;
};

/// Embeddings from cache files. A record resolves to its frames_path when
/// that is a ".emb" file, otherwise to <cache_dir>/<video_id>.emb. Relative
/// paths are resolved against `base_dir`. Loaded sequences are memoized.
class CachedEmbeddings final : public EmbeddingSource {
 public:
  explicit CachedEmbeddings(std::filesystem::path base_dir = {},
                            std::filesystem::path cache_dir = {});
  std::shared_ptr<const EmbeddingSequence> load(
      const VideoRecord& record) const override;
  void put(EmbeddingSequence seq);
  std::filesystem::path cache_path(const VideoRecord& record) const;

 private:
  std::filesystem::path base_dir_;
  std::filesystem::path cache_dir_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, std::shared_ptr<const EmbeddingSequence>> memo_;
};

struct PipelineOptions {
  int stride = 1;
  bool normalize_embeddings = true;
  /// Corrupt full frames before alignment (the capture is degraded, not the
  /// crop); otherwise corrupt the aligned crops.
  bool corrupt_before_align = true;
  /// The registered image is left pristine unless this is set.
  bool corrupt_aux = false;
  /// Frame index used when the registered image source is a video.
  int aux_frame_index = 0;
};

/// Aligner for the frames of one video, e.g. replaying that video's
/// landmark file. The registered image uses the lookup of its source video.
using AlignerLookup =
    std::function<std::shared_ptr<const FaceAligner>(const std::string& video_id)>;

/// decode -> (corrupt) -> align -> (corrupt) -> extract, per record.
/// Frames without a detected face are skipped.
class ImagePipeline final : public EmbeddingSource {
 public:
  ImagePipeline(std::shared_ptr<const FaceAligner> aligner,
                std::shared_ptr<const EmbeddingBackend> backend,
                PipelineOptions options = {}, std::filesystem::path base_dir = {});
  ImagePipeline(AlignerLookup aligners, std::shared_ptr<const EmbeddingBackend> backend,
                PipelineOptions options = {}, std::filesystem::path base_dir = {});

  std::shared_ptr<const EmbeddingSequence> load(
      const VideoRecord& record) const override;
  EmbeddingSequence embed_record(const VideoRecord& record,
                                 const std::optional<CorruptionSpec>& corruption,
                                 const CorruptionTable& table =
                                     CorruptionTable::builtin()) const;

  /// Same pipeline with every frame corrupted by `spec`.
  std::unique_ptr<EmbeddingSource> with_corruption(
      CorruptionSpec spec,
      const CorruptionTable& table = CorruptionTable::builtin()) const;

 private:
  std::filesystem::path resolve(const std::string& path) const;

  AlignerLookup aligners_;
  std::shared_ptr<const EmbeddingBackend> backend_;
  PipelineOptions options_;
  std::filesystem::path base_dir_;
};

}  // namespace idseq
