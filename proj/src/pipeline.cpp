#include "idseq/pipeline.hpp"

#include "idseq/embedding_cache.hpp"
#include "idseq/error.hpp"
#include "idseq/rng.hpp"

namespace idseq {
namespace fs = std::filesystem;

namespace {

fs::path resolve_against(const fs::path& base, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

class CorruptedSource final : public EmbeddingSource {
 public:
  CorruptedSource(const ImagePipeline& pipeline, CorruptionSpec spec,
                  const CorruptionTable& table)
      : pipeline_(pipeline), spec_(spec), table_(table) {}
  std::shared_ptr<const EmbeddingSequence> load(
      const VideoRecord& record) const override {
    return std::make_shared<const EmbeddingSequence>(
        pipeline_.embed_record(record, spec_, table_));
  }

 private:
  const ImagePipeline& pipeline_;
  CorruptionSpec spec_;
  const CorruptionTable& table_;
};

}  // namespace

CachedEmbeddings::CachedEmbeddings(fs::path base_dir, fs::path cache_dir)
    : base_dir_(std::move(base_dir)), cache_dir_(std::move(cache_dir)) {}

fs::path CachedEmbeddings::cache_path(const VideoRecord& record) const {
  if (fs::path(record.frames_path).extension() == ".emb") {
    return resolve_against(base_dir_, record.frames_path);
  }
  if (cache_dir_.empty()) {
    throw InputError("no embedding cache for video '" + record.video_id +
                     "' (frames_path is not a .emb file and no cache directory "
                     "was given)");
  }
  return resolve_against(base_dir_, cache_dir_.string()) / (record.video_id + ".emb");
}

std::shared_ptr<const EmbeddingSequence> CachedEmbeddings::load(
    const VideoRecord& record) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(record.video_id); it != memo_.end()) return it->second;
  }
  auto seq = std::make_shared<const EmbeddingSequence>(cache_read(cache_path(record)));
  std::lock_guard lock(mutex_);
  return memo_.emplace(record.video_id, std::move(seq)).first->second;
}

void CachedEmbeddings::put(EmbeddingSequence seq) {
  std::lock_guard lock(mutex_);
  std::string id = seq.video_id;
  memo_[id] = std::make_shared<const EmbeddingSequence>(std::move(seq));
}

ImagePipeline::ImagePipeline(std::shared_ptr<const FaceAligner> aligner,
                             std::shared_ptr<const EmbeddingBackend> backend,
                             PipelineOptions options, fs::path base_dir)
    : ImagePipeline(
          aligner ? AlignerLookup([aligner](const std::string&) { return aligner; })
                  : AlignerLookup(),
          std::move(backend), options, std::move(base_dir)) {}

ImagePipeline::ImagePipeline(AlignerLookup aligners,
                             std::shared_ptr<const EmbeddingBackend> backend,
                             PipelineOptions options, fs::path base_dir)
    : aligners_(std::move(aligners)),
      backend_(std::move(backend)),
      options_(options),
      base_dir_(std::move(base_dir)) {
  if (!aligners_ || !backend_) {
    throw ValidationError("image pipeline needs an aligner and a backend");
  }
  if (options_.stride < 1) throw ValidationError("stride must be >= 1");
}

fs::path ImagePipeline::resolve(const std::string& path) const {
  return resolve_against(base_dir_, path);
}

std::shared_ptr<const EmbeddingSequence> ImagePipeline::load(
    const VideoRecord& record) const {
  return std::make_shared<const EmbeddingSequence>(embed_record(record, std::nullopt));
}

EmbeddingSequence ImagePipeline::embed_record(
    const VideoRecord& record, const std::optional<CorruptionSpec>& corruption,
    const CorruptionTable& table) const {
  std::optional<CorruptionSpec> spec = corruption;
  if (spec) spec->seed = mix_seed(spec->seed, stable_hash(record.video_id));

  std::vector<Frame> frames = decode_frames(resolve(record.frames_path), options_.stride);
  if (spec && options_.corrupt_before_align) frames = corrupt_video(frames, *spec, table);

  const auto aligner = aligners_(record.video_id);
  std::vector<FaceCrop> crops;
  for (const auto& f : frames) {
    if (auto crop = align_and_crop(f.image, f.index, *aligner)) {
      crops.push_back(std::move(*crop));
    }
  }
  if (spec && !options_.corrupt_before_align) {
    for (auto& c : crops) {
      CorruptionSpec s = *spec;
      s.seed ^= static_cast<std::uint64_t>(c.source_frame_index);
      c.pixels = apply(c.pixels, s, table);
    }
  }

  if (record.aux_image_path.empty()) {
    throw ValidationError("record '" + record.video_id + "' has no auxiliary image");
  }
  Image aux_image = load_still(resolve(record.aux_image_path), options_.aux_frame_index);
  if (spec && options_.corrupt_aux) {
    CorruptionSpec s = *spec;
    s.seed = mix_seed(s.seed, 0x617578ULL);
    aux_image = apply(aux_image, s, table);
  }
  const auto aux_aligner =
      aligners_(record.aux_video_id.empty() ? record.video_id : record.aux_video_id);
  auto aux_crop = align_and_crop(aux_image, options_.aux_frame_index, *aux_aligner);
  if (!aux_crop) {
    throw InputError("no face in auxiliary image of '" + record.video_id + "'");
  }
  return extract_video(record.video_id, crops, *aux_crop, *backend_,
                       options_.normalize_embeddings);
}

std::unique_ptr<EmbeddingSource> ImagePipeline::with_corruption(
    CorruptionSpec spec, const CorruptionTable& table) const {
  return std::make_unique<CorruptedSource>(*this, spec, table);
}

}  // namespace idseq
