#include "doctest.h"
#include "helpers.hpp"
#include "idseq/embedding_cache.hpp"
#include "idseq/error.hpp"
#include "idseq/image.hpp"
#include "idseq/seqfeat.hpp"
#include "idseq/synth.hpp"

using namespace idseq;

TEST_CASE("synthetic embeddings: splits, pairing and determinism") {
  SynthConfig cfg;
  cfg.identities = 5;
  cfg.frames = 10;
  cfg.dim = 6;
  const auto a = make_synthetic_dataset(cfg);
  CHECK(a.manifest.records.size() == 5 * 4);
  CHECK(a.sequences.size() == a.manifest.records.size());
  for (const auto& rec : a.manifest.records) {
    const auto& seq = a.sequences.at(rec.video_id);
    CHECK(seq.length() == 10);
    CHECK(seq.dim() == 6);
    CHECK(rec.split.has_value());
    const auto* src = a.manifest.find(rec.aux_video_id);
    REQUIRE(src != nullptr);
    CHECK(src->label == Label::kReal);
    CHECK(src->identity_id == rec.identity_id);
    CHECK(src->video_id != rec.video_id);
    CHECK(seq.aux == a.sequences.at(src->video_id).frames.row(0).transpose());
  }
  // No identity in two splits.
  for (const auto& x : a.manifest.split_identities.at(Split::kTrain)) {
    CHECK(a.manifest.split_identities.at(Split::kTest).count(x) == 0);
  }
  const auto b = make_synthetic_dataset(cfg);
  CHECK(a.manifest == b.manifest);
  CHECK(a.sequences == b.sequences);
  cfg.seed = 1;
  CHECK(make_synthetic_dataset(cfg).sequences != a.sequences);
}

TEST_CASE("synthetic config validation") {
  SynthConfig cfg;
  cfg.identities = 2;
  CHECK_THROWS_AS(make_synthetic_dataset(cfg), ValidationError);
  cfg = SynthConfig{};
  cfg.frames = 1;
  CHECK_THROWS_AS(make_synthetic_dataset(cfg), ValidationError);
}

TEST_CASE("synthetic datasets write readable caches and images") {
  testing::TempDir dir;
  SynthConfig cfg;
  cfg.identities = 3;
  cfg.frames = 5;
  cfg.dim = 4;
  cfg.fractions = {0.34, 0.33, 0.33};
  const auto data = make_synthetic_dataset(cfg);
  write_synthetic_dataset(data, dir.path());
  CHECK(load_manifest(dir / "manifest.jsonl") == data.manifest);
  const auto& rec = data.manifest.records.front();
  CHECK(cache_read(dir.path() / rec.frames_path) == data.sequences.at(rec.video_id));

  SynthImageConfig ic;
  ic.identities = 3;
  ic.frames = 3;
  ic.fractions = {0.34, 0.33, 0.33};
  testing::TempDir img_dir;
  const auto m = write_synthetic_images(ic, img_dir.path());
  const auto& r0 = m.records.front();
  const Image first = read_image(img_dir.path() / r0.frames_path / "0000.png");
  CHECK(first.height == 112);
  CHECK(first.width == 112);
  CHECK(std::filesystem::exists(img_dir.path() / r0.aux_image_path));
}

TEST_CASE("equal real and fake jitter removes the temporal signal of reenactments") {
  auto mean_step = [](const SyntheticDataset& d, std::optional<FakeType> type) {
    double total = 0;
    int n = 0;
    for (const auto& rec : d.manifest.records) {
      if (rec.fake_type != type) continue;
      const auto steps = tdc_sequence(d.sequences.at(rec.video_id)).steps;
      for (Eigen::Index t = 0; t < steps.rows(); ++t) total += steps.row(t).norm();
      n += static_cast<int>(steps.rows());
    }
    return total / n;
  };
  SynthConfig cfg;
  cfg.frames = 40;
  const auto normal = make_synthetic_dataset(cfg);
  CHECK(mean_step(normal, FakeType::kFOMM) > 2 * mean_step(normal, std::nullopt));
  cfg.sigma_fake = cfg.sigma_real;
  const auto control = make_synthetic_dataset(cfg);
  const double ratio = mean_step(control, FakeType::kFOMM) / mean_step(control, std::nullopt);
  CHECK(ratio == doctest::Approx(1.0).epsilon(0.05));
}
