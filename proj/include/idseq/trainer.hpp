#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "idseq/detector.hpp"
#include "idseq/evaluation.hpp"
#include "idseq/losses.hpp"
#include "idseq/manifest.hpp"
#include "idseq/pipeline.hpp"
#include "idseq/seqfeat.hpp"

namespace idseq {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.0005;
  std::string optimizer = "ADAM";
  AdamConfig adam;
  int batch_size = 16;  // triplets per optimizer step
  std::uint64_t seed = 0;
  DiffKind embedding_type = DiffKind::kCat;
  /// Anchor and positive come from different real videos of one identity
  /// when possible.
  bool ap_same_identity = true;
  /// 0 = sequences_per_video_per_epoch x number of TRAIN fake videos.
  int triplets_per_epoch = 0;
  /// Whether the embeddings were L2-normalized at extraction. Not applied
  /// here; stored in checkpoints so frame-level evaluation embeds the same way.
  bool normalize_embeddings = true;
  /// Rotate each training sequence by a random orthogonal matrix acting on
  /// the embedding space. Preserves all difference norms while hiding
  /// identity directions; useful when TRAIN has very few identities.
  bool augment_rotation = false;
  Aggregation aggregation = Aggregation::kMean;
  int workers = 1;
  SamplerConfig sampler;
  LossConfig loss;
  /// input_dim is derived from the embeddings and embedding_type.
  DetectorConfig detector;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Labels for cross-entropy: anchor and positive REAL (0), negative FAKE (1).
inline constexpr std::array<int, 3> kTripletLabels = {0, 0, 1};

struct Triplet {
  DifferenceSequence anchor, positive, negative;
  std::string anchor_video, positive_video, negative_video;
  std::array<int, 3> labels = kTripletLabels;
};

struct TripletBatch {
  std::vector<Triplet> items;
};

/// Frame windows of one triplet, before differencing.
struct TripletPlan {
  const VideoRecord* anchor = nullptr;
  const VideoRecord* positive = nullptr;
  const VideoRecord* negative = nullptr;
  std::vector<int> anchor_frames, positive_frames, negative_frames;
};

/// Triplets of one epoch, grouped into batches of cfg.batch_size. Each fake
/// TRAIN video contributes sequences_per_video_per_epoch negatives; anchors
/// cycle through the real TRAIN videos in shuffled order. Videos shorter
/// than sequence_length are not used for training.
std::vector<std::vector<TripletPlan>> plan_epoch(const Manifest& manifest,
                                                 const EmbeddingSource& source,
                                                 const TrainConfig& cfg,
                                                 std::uint64_t seed);

TripletBatch materialize(const std::vector<TripletPlan>& plans,
                         const EmbeddingSource& source, DiffKind kind);

/// The first batch of plan_epoch(seed). Throws ValidationError when TRAIN
/// has fewer than 2 real or no fake videos.
/// Applies one Haar-random rotation of R^embedding_dim to every
/// embedding-sized block of every step (both halves of a CAT step).
void rotate_embedding_space(DifferenceSequence& seq, int embedding_dim, Rng& rng);

TripletBatch build_triplet_batch(const Manifest& manifest,
                                 const EmbeddingSource& source,
                                 const TrainConfig& cfg, std::uint64_t seed);

struct LossBreakdown {
  double total = 0, cls = 0, tri = 0, ap = 0;
};

/// Mean over triplets of (CE_a + CE_p + CE_n) / 3 + l1 * L_tri + l2 * L_ap.
/// When `grads` is non-null the parameter gradients are accumulated into it.
LossBreakdown triplet_objective(const Detector& model, const TripletBatch& batch,
                                const LossConfig& loss, bool training, Rng* rng,
                                DetectorParams* grads);

class AdamOptimizer {
 public:
  AdamOptimizer(const DetectorParams& like, double learning_rate, AdamConfig cfg);
  void step(DetectorParams& params, const DetectorParams& grads);

 private:
  double lr_;
  AdamConfig cfg_;
  long long t_ = 0;
  DetectorParams m_, v_;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0, loss_cls = 0, loss_tri = 0, loss_ap = 0;
  std::optional<double> val_auc;
};

struct CheckpointMeta {
  DiffKind embedding_type = DiffKind::kCat;
  int embedding_dim = 0;
  std::string backend_id;
  int sequence_length = 64;
  int eval_stride = 64;
  Aggregation aggregation = Aggregation::kMean;
  bool normalize_embeddings = true;
  int epoch = 0;
  std::optional<double> val_auc;
  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  Detector model;
  CheckpointMeta meta;
};

/// Binary checkpoint: magic "IDSQCKPT", u32 version, JSON header with
/// DetectorConfig and CheckpointMeta, named float64 tensors, CRC-32.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

ScoringOptions scoring_options(const CheckpointMeta& meta, int workers = 1);

struct TrainResult {
  Checkpoint best;   // max VAL AUC (latest on ties); last epoch without VAL
  Checkpoint last;
  std::vector<EpochMetrics> log;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Throws TrainingError on a non-finite loss, naming the batch's videos.
TrainResult train(const Manifest& manifest, const EmbeddingSource& source,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const Manifest& manifest,
                               Split split, const EmbeddingSource& source,
                               int workers = 1);

}  // namespace idseq
