#include <limits>

#include "doctest.h"
#include "grad_check.hpp"
#include "helpers.hpp"
#include "idseq/error.hpp"
#include "idseq/synth.hpp"

using namespace idseq;

namespace {

TripletBatch random_batch(int batch, int steps, int dim, DiffKind kind, std::uint64_t seed) {
  Rng rng(seed);
  TripletBatch b;
  for (int i = 0; i < batch; ++i) {
    Triplet t;
    for (auto* s : {&t.anchor, &t.positive, &t.negative}) {
      s->kind = kind;
      s->steps.resize(steps, dim);
      for (Eigen::Index r = 0; r < s->steps.rows(); ++r) {
        for (Eigen::Index c = 0; c < s->steps.cols(); ++c) s->steps(r, c) = rng.normal();
      }
    }
    b.items.push_back(std::move(t));
  }
  return b;
}

}  // namespace

TEST_CASE("full objective gradient matches central differences") {
  DetectorConfig cfg;
  cfg.input_dim = 8;  // CAT of d = 4
  cfg.hidden_size = 8;
  cfg.head_hidden = 6;
  const Detector model(cfg, 3);
  const auto batch = random_batch(3, 4, 8, DiffKind::kCat, 11);
  LossConfig loss;
  loss.margin = 0.3;
  const auto r = testing::check_gradients(model, batch, loss);
  CHECK(r.checked > 100);
  CHECK(r.max_rel_error <= 1e-3);
}

namespace {

struct SmallSetup {
  SyntheticDataset data;
  CachedEmbeddings source;
  TrainConfig cfg;

  explicit SmallSetup(std::uint64_t seed = 1) {
    SynthConfig sc;
    sc.identities = 6;
    sc.frames = 24;
    sc.dim = 8;
    sc.fractions = {0.5, 0.25, 0.25};
    sc.seed = seed;
    data = make_synthetic_dataset(sc);
    for (const auto& [id, seq] : data.sequences) source.put(seq);
    cfg.epochs = 5;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 4;
    cfg.seed = seed;
    cfg.sampler.sequence_length = 8;
    cfg.sampler.sequences_per_video_per_epoch = 4;
    cfg.sampler.eval_stride = 8;
    cfg.detector.hidden_size = 8;
    cfg.detector.head_hidden = 8;
  }
};

VideoRecord record(const std::string& id, Label label) {
  VideoRecord r;
  r.video_id = id;
  r.identity_id = "p" + id;
  r.label = label;
  if (label == Label::kFake) r.fake_type = FakeType::kFS;
  r.frames_path = id + ".emb";
  r.aux_image_path = "aux.png";
  r.split = Split::kTrain;
  return r;
}

}  // namespace

TEST_CASE("triplet batches pair real anchors and positives with a fake negative") {
  SmallSetup s;
  const auto batch = build_triplet_batch(s.data.manifest, s.source, s.cfg, 3);
  REQUIRE(batch.items.size() == 4);
  for (const auto& t : batch.items) {
    const auto* a = s.data.manifest.find(t.anchor_video);
    const auto* p = s.data.manifest.find(t.positive_video);
    const auto* n = s.data.manifest.find(t.negative_video);
    CHECK(a->label == Label::kReal);
    CHECK(p->label == Label::kReal);
    CHECK(n->label == Label::kFake);
    CHECK(a->video_id != p->video_id);
    CHECK(a->split == Split::kTrain);
    CHECK(n->split == Split::kTrain);
    CHECK(t.labels == std::array<int, 3>{0, 0, 1});
    CHECK(t.anchor.length() == 7);
    CHECK(t.anchor.step_dim() == 16);
  }
  const auto again = build_triplet_batch(s.data.manifest, s.source, s.cfg, 3);
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    CHECK(again.items[i].negative_video == batch.items[i].negative_video);
    CHECK(again.items[i].anchor.steps == batch.items[i].anchor.steps);
  }
}

TEST_CASE("triplet batch needs two real videos and a fake in TRAIN") {
  CachedEmbeddings source;
  Rng rng(1);
  for (const char* id : {"r0", "r1", "f0"}) {
    auto seq = testing::random_sequence(12, 4, rng, id);
    source.put(seq);
  }
  TrainConfig cfg;
  cfg.sampler.sequence_length = 4;
  cfg.batch_size = 2;
  Manifest ok{{record("r0", Label::kReal), record("r1", Label::kReal),
               record("f0", Label::kFake)}, {}};
  const auto batch = build_triplet_batch(ok, source, cfg, 0);
  CHECK(batch.items.size() == 2);
  CHECK(batch.items[0].negative_video == "f0");

  Manifest one_real{{record("r0", Label::kReal), record("f0", Label::kFake)}, {}};
  CHECK_THROWS_AS(build_triplet_batch(one_real, source, cfg, 0), ValidationError);
  Manifest no_fake{{record("r0", Label::kReal), record("r1", Label::kReal)}, {}};
  CHECK_THROWS_AS(build_triplet_batch(no_fake, source, cfg, 0), ValidationError);
}

TEST_CASE("without triplet terms the objective is plain cross-entropy") {
  SmallSetup s;
  const auto batch = build_triplet_batch(s.data.manifest, s.source, s.cfg, 0);
  DetectorConfig dc = s.cfg.detector;
  dc.input_dim = 16;
  const Detector model(dc, 2);
  LossConfig none;
  none.lambda1 = 0;
  none.lambda2 = 0;
  const auto r = triplet_objective(model, batch, none, false, nullptr, nullptr);
  CHECK(r.total == r.cls);
  const auto full = triplet_objective(model, batch, s.cfg.loss, false, nullptr, nullptr);
  CHECK(full.cls == r.cls);
  CHECK(full.total == doctest::Approx(r.cls + full.tri + 0.1 * full.ap).epsilon(1e-12));
}

TEST_CASE("training lowers the loss and is reproducible") {
  SmallSetup s;
  std::vector<EpochMetrics> seen;
  const auto result = train(s.data.manifest, s.source, s.cfg,
                            [&](const EpochMetrics& m) { seen.push_back(m); });
  REQUIRE(result.log.size() == 5);
  CHECK(seen.size() == 5);
  CHECK(result.log.back().loss < result.log.front().loss);
  CHECK(result.log.front().val_auc.has_value());
  CHECK(result.last.meta.epoch == 5);

  SmallSetup t;
  const auto again = train(t.data.manifest, t.source, t.cfg);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(again.log[i].loss == result.log[i].loss);
    CHECK(again.log[i].val_auc == result.log[i].val_auc);
  }
  CHECK(encode_checkpoint(again.best) == encode_checkpoint(result.best));
}

TEST_CASE("invalid training configs are rejected") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.optimizer = "SGD";
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  SmallSetup s;
  s.cfg.epochs = 0;
  CHECK_THROWS_AS(train(s.data.manifest, s.source, s.cfg), ValidationError);
}

TEST_CASE("a checkpoint reloads to the same VAL AUC") {
  SmallSetup s;
  s.cfg.epochs = 2;
  const auto result = train(s.data.manifest, s.source, s.cfg);
  testing::TempDir dir;
  save_checkpoint(result.best, dir / "best.ckpt");
  const auto loaded = load_checkpoint(dir / "best.ckpt");
  CHECK(loaded.meta == result.best.meta);
  const auto a = evaluate_checkpoint(result.best, s.data.manifest, Split::kVal, s.source);
  const auto b = evaluate_checkpoint(loaded, s.data.manifest, Split::kVal, s.source);
  CHECK(a.auc_overall == b.auc_overall);
  CHECK(a.per_video == b.per_video);
  REQUIRE(result.best.meta.val_auc.has_value());
  CHECK(a.auc_overall == *result.best.meta.val_auc);

  auto bytes = encode_checkpoint(result.best);
  bytes[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
  bytes = encode_checkpoint(result.best);
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
}

TEST_CASE("a non-finite loss aborts training and names the videos") {
  SmallSetup s;
  for (const auto& rec : s.data.manifest.records) {
    if (rec.split == Split::kTrain && rec.label == Label::kFake) {
      auto seq = s.data.sequences.at(rec.video_id);
      seq.frames.setConstant(std::numeric_limits<float>::quiet_NaN());
      s.source.put(seq);
    }
  }
  s.cfg.normalize_embeddings = false;
  try {
    train(s.data.manifest, s.source, s.cfg);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("_f") != std::string::npos);
  }
}

TEST_CASE("embedding-space rotation preserves norms and ties CAT halves") {
  Rng rng(4);
  DifferenceSequence d;
  d.kind = DiffKind::kCat;
  d.steps.resize(5, 12);
  for (Eigen::Index r = 0; r < 5; ++r) {
    for (Eigen::Index c = 0; c < 6; ++c) d.steps(r, c) = d.steps(r, c + 6) = rng.normal();
  }
  const auto before = d.steps;
  rotate_embedding_space(d, 6, rng);
  CHECK(d.steps != before);
  for (Eigen::Index r = 0; r < 5; ++r) {
    CHECK(d.steps.row(r).head(6).norm() == doctest::Approx(before.row(r).head(6).norm()));
    CHECK(d.steps.row(r).head(6).isApprox(d.steps.row(r).tail(6), 1e-12));
    // Inner products between steps survive too.
    CHECK(d.steps.row(r).head(6).dot(d.steps.row(0).head(6)) ==
          doctest::Approx(before.row(r).head(6).dot(before.row(0).head(6))));
  }
}

TEST_CASE("first Adam step moves each weight by about the learning rate") {
  DetectorConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden_size = 2;
  cfg.head_hidden = 2;
  Detector model(cfg, 0);
  const auto before = model.params();
  auto grads = before.zeros_like();
  for (auto& [name, g] : grads.views()) {
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = (i % 2 ? 3.0 : -0.01);
  }
  AdamOptimizer opt(model.params(), 0.05, AdamConfig{});
  opt.step(model.params(), grads);
  const auto after_views = model.params().views();
  const auto before_views = before.views();
  for (std::size_t v = 0; v < after_views.size(); ++v) {
    const auto& a = after_views[v].second;
    const auto& b = before_views[v].second;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double expected = i % 2 ? -0.05 : 0.05;
      CHECK(a[i] - b[i] == doctest::Approx(expected).epsilon(1e-5));
    }
  }
}
