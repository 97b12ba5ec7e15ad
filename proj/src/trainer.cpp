#include "idseq/trainer.hpp"

#include <Eigen/QR>
#include <cmath>
#include <map>

#include "idseq/error.hpp"

namespace idseq {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct TrainVideo {
  const VideoRecord* record;
  int frames;
};

/// `count` items drawn by cycling through successive shuffles of `pool`.
std::vector<std::size_t> cycle(std::size_t pool, std::size_t count, Rng& rng) {
  std::vector<std::size_t> order(pool);
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    for (std::size_t i = 0; i < pool; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < pool && out.size() < count; ++i) out.push_back(order[i]);
  }
  return out;
}

/// Hands out a video's TRAIN windows in order, drawing a fresh set when the
/// current one is used up.
class WindowPool {
 public:
  WindowPool(const SamplerConfig& sampler, std::uint64_t seed)
      : sampler_(sampler), seed_(seed) {}

  std::vector<int> next(const TrainVideo& v) {
    auto& slot = slots_[v.record->video_id];
    if (slot.cursor == slot.windows.size()) {
      const std::uint64_t s =
          mix_seed(mix_seed(seed_, stable_hash(v.record->video_id)), slot.refills++);
      slot.windows = sample_windows(v.frames, sampler_, s, Phase::kTrain);
      slot.cursor = 0;
    }
    return slot.windows[slot.cursor++];
  }

 private:
  struct Slot {
    std::vector<std::vector<int>> windows;
    std::size_t cursor = 0;
    std::uint64_t refills = 0;
  };
  const SamplerConfig& sampler_;
  std::uint64_t seed_;
  std::map<std::string, Slot> slots_;
};

std::string batch_videos(const TripletBatch& batch) {
  std::string out;
  for (const auto& t : batch.items) {
    for (const auto* id : {&t.anchor_video, &t.positive_video, &t.negative_video}) {
      if (out.find(*id) != std::string::npos) continue;
      if (!out.empty()) out += ", ";
      out += *id;
    }
  }
  return out;
}

CheckpointMeta make_meta(const TrainConfig& cfg, int embedding_dim,
                         const std::string& backend_id) {
  CheckpointMeta m;
  m.embedding_type = cfg.embedding_type;
  m.embedding_dim = embedding_dim;
  m.backend_id = backend_id;
  m.sequence_length = cfg.sampler.sequence_length;
  m.eval_stride = cfg.sampler.eval_stride;
  m.aggregation = cfg.aggregation;
  m.normalize_embeddings = cfg.normalize_embeddings;
  return m;
}

bool has_both_labels(const Manifest& manifest, Split split) {
  bool real = false, fake = false;
  for (const auto& r : manifest.records) {
    if (r.split != split) continue;
    (r.label == Label::kReal ? real : fake) = true;
  }
  return real && fake;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (optimizer != "ADAM") {
    throw ValidationError("optimizer '" + optimizer + "' is not supported (only ADAM)");
  }
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) ||
      !(adam.epsilon > 0)) {
    throw ValidationError("adam: betas must be in [0, 1) and epsilon positive");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (triplets_per_epoch < 0) throw ValidationError("triplets_per_epoch must be >= 0");
  if (workers < 1) throw ValidationError("workers must be >= 1");
  sampler.validate();
  loss.validate();
  DetectorConfig d = detector;
  d.validate();
}

std::vector<std::vector<TripletPlan>> plan_epoch(const Manifest& manifest,
                                                 const EmbeddingSource& source,
                                                 const TrainConfig& cfg,
                                                 std::uint64_t seed) {
  const int len = cfg.sampler.sequence_length;
  std::vector<TrainVideo> reals, fakes;
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::kTrain) continue;
    const int frames = static_cast<int>(source.load(rec)->length());
    if (frames < len) continue;
    (rec.label == Label::kReal ? reals : fakes).push_back({&rec, frames});
  }
  if (reals.size() < 2) {
    throw ValidationError("TRAIN needs at least 2 real videos with >= " +
                          std::to_string(len) + " frames, found " +
                          std::to_string(reals.size()));
  }
  if (fakes.empty()) {
    throw ValidationError("TRAIN has no fake videos with >= " + std::to_string(len) +
                          " frames");
  }

  const std::size_t count =
      cfg.triplets_per_epoch > 0
          ? static_cast<std::size_t>(cfg.triplets_per_epoch)
          : static_cast<std::size_t>(cfg.sampler.sequences_per_video_per_epoch) *
                fakes.size();

  std::map<std::string, std::vector<std::size_t>> same_identity;
  for (std::size_t i = 0; i < reals.size(); ++i) {
    same_identity[reals[i].record->identity_id].push_back(i);
  }

  Rng rng(seed);
  const auto negatives = cycle(fakes.size(), count, rng);
  const auto anchors = cycle(reals.size(), count, rng);
  WindowPool windows(cfg.sampler, seed);

  std::vector<std::vector<TripletPlan>> batches;
  for (std::size_t i = 0; i < count; ++i) {
    const TrainVideo& a = reals[anchors[i]];
    std::vector<std::size_t> candidates;
    if (cfg.ap_same_identity) {
      for (std::size_t j : same_identity[a.record->identity_id]) {
        if (j != anchors[i]) candidates.push_back(j);
      }
    }
    if (candidates.empty()) {
      for (std::size_t j = 0; j < reals.size(); ++j) {
        if (j != anchors[i]) candidates.push_back(j);
      }
    }
    const TrainVideo& p = reals[candidates[rng.uniform_index(candidates.size())]];
    const TrainVideo& n = fakes[negatives[i]];

    TripletPlan plan;
    plan.anchor = a.record;
    plan.positive = p.record;
    plan.negative = n.record;
    plan.anchor_frames = windows.next(a);
    plan.positive_frames = windows.next(p);
    plan.negative_frames = windows.next(n);
    if (batches.empty() || batches.back().size() == static_cast<std::size_t>(cfg.batch_size)) {
      batches.emplace_back();
    }
    batches.back().push_back(std::move(plan));
  }
  return batches;
}

TripletBatch materialize(const std::vector<TripletPlan>& plans,
                         const EmbeddingSource& source, DiffKind kind) {
  auto build = [&](const VideoRecord* rec, const std::vector<int>& frames) {
    const auto seq = source.load(*rec);
    return difference_sequence(select_frames(*seq, frames), kind);
  };
  TripletBatch batch;
  batch.items.reserve(plans.size());
  for (const auto& p : plans) {
    Triplet t;
    t.anchor = build(p.anchor, p.anchor_frames);
    t.positive = build(p.positive, p.positive_frames);
    t.negative = build(p.negative, p.negative_frames);
    t.anchor_video = p.anchor->video_id;
    t.positive_video = p.positive->video_id;
    t.negative_video = p.negative->video_id;
    batch.items.push_back(std::move(t));
  }
  return batch;
}

void rotate_embedding_space(DifferenceSequence& seq, int embedding_dim, Rng& rng) {
  if (embedding_dim < 1 || seq.step_dim() % embedding_dim != 0) {
    throw ValidationError("step dim is not a multiple of the embedding dim");
  }
  MatrixXd g(embedding_dim, embedding_dim);
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  // Sign fix so the distribution is uniform over rotations.
  const VectorXd diag = qr.matrixQR().diagonal();
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    if (diag[c] < 0) q.col(c) = -q.col(c);
  }
  for (Eigen::Index block = 0; block < seq.step_dim(); block += embedding_dim) {
    RowMatrixD part = seq.steps.middleCols(block, embedding_dim) * q;
    seq.steps.middleCols(block, embedding_dim) = part;
  }
}

TripletBatch build_triplet_batch(const Manifest& manifest, const EmbeddingSource& source,
                                 const TrainConfig& cfg, std::uint64_t seed) {
  const auto plans = plan_epoch(manifest, source, cfg, seed);
  return materialize(plans.front(), source, cfg.embedding_type);
}

LossBreakdown triplet_objective(const Detector& model, const TripletBatch& batch,
                                const LossConfig& loss, bool training, Rng* rng,
                                DetectorParams* grads) {
  const std::size_t B = batch.items.size();
  if (B == 0) throw ValidationError("empty triplet batch");
  // Rows 0..B-1 anchors, B..2B-1 positives, 2B..3B-1 negatives.
  std::vector<const RowMatrixD*> seqs(3 * B);
  for (std::size_t i = 0; i < B; ++i) {
    seqs[i] = &batch.items[i].anchor.steps;
    seqs[B + i] = &batch.items[i].positive.steps;
    seqs[2 * B + i] = &batch.items[i].negative.steps;
  }
  ForwardCache cache;
  const BatchOutput out = model.forward(seqs, training, rng, grads ? &cache : nullptr);

  const auto rows = static_cast<Eigen::Index>(3 * B);
  MatrixXd d_logits = MatrixXd::Zero(rows, 2);
  MatrixXd d_embedding = MatrixXd::Zero(rows, out.embedding.cols());
  const double inv_b = 1.0 / static_cast<double>(B);

  LossBreakdown lb;
  for (std::size_t i = 0; i < B; ++i) {
    const auto ia = static_cast<Eigen::Index>(i);
    const Eigen::Index rows_of[3] = {ia, ia + static_cast<Eigen::Index>(B),
                                     ia + static_cast<Eigen::Index>(2 * B)};
    double ce = 0;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector2d g;
      const Eigen::Vector2d logits = out.logits.row(rows_of[k]).transpose();
      ce += softmax_cross_entropy(batch.items[i].labels[static_cast<std::size_t>(k)],
                                  logits, &g);
      d_logits.row(rows_of[k]) = g.transpose() * (inv_b / 3.0);
    }
    ce /= 3.0;

    const VectorXd a = out.embedding.row(rows_of[0]).transpose();
    const VectorXd p = out.embedding.row(rows_of[1]).transpose();
    const VectorXd n = out.embedding.row(rows_of[2]).transpose();
    const TripletGrad tg = triplet_loss_grad(a, p, n, loss.margin);
    const PairGrad pg = anchor_positive_loss_grad(a, p);

    d_embedding.row(rows_of[0]) =
        (loss.lambda1 * tg.d_anchor + loss.lambda2 * pg.d_anchor).transpose() * inv_b;
    d_embedding.row(rows_of[1]) =
        (loss.lambda1 * tg.d_positive + loss.lambda2 * pg.d_positive).transpose() * inv_b;
    d_embedding.row(rows_of[2]) = (loss.lambda1 * tg.d_negative).transpose() * inv_b;

    lb.cls += ce * inv_b;
    lb.tri += tg.loss * inv_b;
    lb.ap += pg.loss * inv_b;
  }
  lb.total = total_loss(lb.cls, lb.tri, lb.ap, loss.lambda1, loss.lambda2);
  if (grads) model.backward(cache, d_embedding, d_logits, *grads);
  return lb;
}

AdamOptimizer::AdamOptimizer(const DetectorParams& like, double learning_rate,
                             AdamConfig cfg)
    : lr_(learning_rate), cfg_(cfg), m_(like.zeros_like()), v_(like.zeros_like()) {}

void AdamOptimizer::step(DetectorParams& params, const DetectorParams& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto p = params.views();
  const auto g = grads.views();
  auto m = m_.views();
  auto v = v_.views();
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto& pk = p[k].second;
    const auto& gk = g[k].second;
    auto& mk = m[k].second;
    auto& vk = v[k].second;
    mk = cfg_.beta1 * mk + (1.0 - cfg_.beta1) * gk;
    vk = cfg_.beta2 * vk + (1.0 - cfg_.beta2) * gk.cwiseProduct(gk);
    pk.array() -= lr_ * (mk.array() / c1) / ((vk.array() / c2).sqrt() + cfg_.epsilon);
  }
}

ScoringOptions scoring_options(const CheckpointMeta& meta, int workers) {
  ScoringOptions o;
  o.embedding_type = meta.embedding_type;
  o.sampler.sequence_length = meta.sequence_length;
  o.sampler.eval_stride = meta.eval_stride;
  o.aggregation = meta.aggregation;
  o.workers = workers;
  return o;
}

TrainResult train(const Manifest& manifest, const EmbeddingSource& source,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();

  int embedding_dim = 0;
  std::string backend_id;
  for (const auto& rec : manifest.records) {
    const auto seq = source.load(rec);
    if (embedding_dim == 0) {
      embedding_dim = static_cast<int>(seq->dim());
      backend_id = seq->backend_id;
    } else if (seq->dim() != embedding_dim || seq->backend_id != backend_id) {
      throw ValidationError("video '" + rec.video_id + "' has embeddings from '" +
                            seq->backend_id + "' (dim " + std::to_string(seq->dim()) +
                            "), expected '" + backend_id + "' (dim " +
                            std::to_string(embedding_dim) + ")");
    }
  }
  if (embedding_dim == 0) throw ValidationError("manifest has no records");

  DetectorConfig dc = cfg.detector;
  dc.input_dim = step_dim_for(cfg.embedding_type, embedding_dim);
  Detector model(dc, cfg.seed);
  AdamOptimizer optimizer(model.params(), cfg.learning_rate, cfg.adam);

  const bool has_val = has_both_labels(manifest, Split::kVal);
  CheckpointMeta meta = make_meta(cfg, embedding_dim, backend_id);
  const ScoringOptions scoring = scoring_options(meta, cfg.workers);

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    const auto plans = plan_epoch(manifest, source, cfg, mix_seed(cfg.seed, e));
    Rng dropout_rng(mix_seed(cfg.seed ^ 0x64726f70ULL, e));
    Rng augment_rng(mix_seed(cfg.seed ^ 0x726f74ULL, e));

    EpochMetrics metrics;
    metrics.epoch = epoch;
    std::size_t seen = 0;
    for (const auto& plan : plans) {
      TripletBatch batch = materialize(plan, source, cfg.embedding_type);
      if (cfg.augment_rotation) {
        for (auto& t : batch.items) {
          for (auto* s : {&t.anchor, &t.positive, &t.negative}) {
            rotate_embedding_space(*s, embedding_dim, augment_rng);
          }
        }
      }
      DetectorParams grads = model.params().zeros_like();
      const LossBreakdown lb =
          triplet_objective(model, batch, cfg.loss, true, &dropout_rng, &grads);
      if (!std::isfinite(lb.total)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                            " in a batch with videos: " + batch_videos(batch));
      }
      optimizer.step(model.params(), grads);
      const auto w = static_cast<double>(batch.items.size());
      metrics.loss += lb.total * w;
      metrics.loss_cls += lb.cls * w;
      metrics.loss_tri += lb.tri * w;
      metrics.loss_ap += lb.ap * w;
      seen += batch.items.size();
    }
    const double inv = 1.0 / static_cast<double>(seen);
    metrics.loss *= inv;
    metrics.loss_cls *= inv;
    metrics.loss_tri *= inv;
    metrics.loss_ap *= inv;

    if (has_val) {
      metrics.val_auc = evaluate(model, manifest, Split::kVal, source, scoring).auc_overall;
    }
    meta.epoch = epoch;
    meta.val_auc = metrics.val_auc;
    result.last = {model, meta};
    // Ties go to the later epoch: small VAL sets saturate early.
    if (!has_val || epoch == 1 ||
        (metrics.val_auc && *metrics.val_auc >= result.best.meta.val_auc.value_or(-1.0))) {
      result.best = result.last;
    }
    result.log.push_back(metrics);
    if (on_epoch) on_epoch(metrics);
  }
  return result;
}

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const Manifest& manifest,
                               Split split, const EmbeddingSource& source, int workers) {
  const int expected_dim = step_dim_for(ckpt.meta.embedding_type, ckpt.meta.embedding_dim);
  if (expected_dim != ckpt.model.config().input_dim) {
    throw ValidationError("checkpoint is inconsistent: embedding_type " +
                          std::string(to_string(ckpt.meta.embedding_type)) +
                          " with embedding_dim " + std::to_string(ckpt.meta.embedding_dim) +
                          " does not give input_dim " +
                          std::to_string(ckpt.model.config().input_dim));
  }
  for (const auto& rec : manifest.records) {
    if (rec.split != split) continue;
    const auto seq = source.load(rec);
    if (seq->dim() != ckpt.meta.embedding_dim) {
      throw ValidationError("video '" + rec.video_id + "' has embedding dim " +
                            std::to_string(seq->dim()) + " but the checkpoint expects " +
                            std::to_string(ckpt.meta.embedding_dim));
    }
  }
  return evaluate(ckpt.model, manifest, split, source, scoring_options(ckpt.meta, workers));
}

}  // namespace idseq
