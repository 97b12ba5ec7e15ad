#include "idseq/synth.hpp"

#include <cmath>
#include <cstdio>
#include <opencv2/imgproc.hpp>

#include "cv_bridge.hpp"
#include "idseq/embedding_cache.hpp"
#include "idseq/error.hpp"
#include "idseq/image.hpp"
#include "idseq/preprocess.hpp"
#include "idseq/rng.hpp"

namespace idseq {
namespace {

std::string identity_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "id%02d", i);
  return buf;
}

struct Planned {
  VideoRecord record;
  enum class Kind { kReal, kSwap, kReenact } kind = Kind::kReal;
  int source_identity = 0;  // visual identity of a swap
};

void check_counts(int identities, int reals, int swaps, int reenact, int frames) {
  if (identities < 3) throw ValidationError("synth: need at least 3 identities");
  if (reals < 2) throw ValidationError("synth: need at least 2 real videos per identity");
  if (swaps < 0 || reenact < 0 || swaps + reenact < 1) {
    throw ValidationError("synth: need at least one fake video per identity");
  }
  if (frames < 2) throw ValidationError("synth: need at least 2 frames per video");
}

/// Record list, aux pairing and identity split shared by both generators.
std::vector<Planned> plan_videos(int identities, int reals, int swaps, int reenact,
                                 const std::string& ext, SplitFractions fractions,
                                 std::uint64_t seed, Manifest& manifest) {
  Rng rng(mix_seed(seed, 0x706c616eULL));
  std::vector<Planned> planned;
  for (int i = 0; i < identities; ++i) {
    const std::string id = identity_name(i);
    auto add = [&](Planned::Kind kind, const std::string& tag, int k, int source) {
      Planned p;
      p.kind = kind;
      p.source_identity = source;
      p.record.video_id = id + "_" + tag + std::to_string(k);
      p.record.identity_id = id;
      p.record.label = kind == Planned::Kind::kReal ? Label::kReal : Label::kFake;
      if (kind == Planned::Kind::kSwap) p.record.fake_type = FakeType::kFS;
      if (kind == Planned::Kind::kReenact) p.record.fake_type = FakeType::kFOMM;
      p.record.frames_path = ext == ".emb" ? "embeddings/" + p.record.video_id + ".emb"
                                           : "frames/" + p.record.video_id;
      planned.push_back(std::move(p));
    };
    for (int k = 0; k < reals; ++k) add(Planned::Kind::kReal, "real", k, i);
    for (int k = 0; k < swaps; ++k) {
      int other = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(identities - 1)));
      if (other >= i) ++other;
      add(Planned::Kind::kSwap, "fs", k, other);
    }
    for (int k = 0; k < reenact; ++k) add(Planned::Kind::kReenact, "fomm", k, i);
  }

  std::vector<VideoRecord> records;
  for (const auto& p : planned) records.push_back(p.record);
  records = pair_aux_images(std::move(records), mix_seed(seed, 0x617578ULL));
  manifest = make_identity_splits(std::move(records), fractions, mix_seed(seed, 0x73706c74ULL));
  for (std::size_t i = 0; i < planned.size(); ++i) planned[i].record = manifest.records[i];
  return planned;
}

Eigen::VectorXd unit_direction(int identity, int dim, std::uint64_t seed) {
  Rng rng(mix_seed(seed, stable_hash(identity_name(identity))));
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) v[k] = rng.normal();
  return v.normalized();
}

Eigen::VectorXf jittered(const Eigen::VectorXd& base, double sigma, Rng& rng) {
  Eigen::VectorXd v = base;
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] += sigma * rng.normal();
  return v.normalized().cast<float>();
}

struct Ellipse {
  double cx, cy, ax, ay, angle;
  cv::Scalar color;
};

std::vector<Ellipse> identity_shapes(int identity, std::uint64_t seed) {
  Rng rng(mix_seed(seed ^ 0x696d67ULL, stable_hash(identity_name(identity))));
  std::vector<Ellipse> shapes;
  for (int k = 0; k < 5; ++k) {
    Ellipse e;
    e.cx = 20 + 72 * rng.uniform();
    e.cy = 20 + 72 * rng.uniform();
    e.ax = 10 + 20 * rng.uniform();
    e.ay = 10 + 20 * rng.uniform();
    e.angle = 180 * rng.uniform();
    e.color = cv::Scalar(40 + 200 * rng.uniform(), 40 + 200 * rng.uniform(),
                         40 + 200 * rng.uniform());
    shapes.push_back(e);
  }
  return shapes;
}

Image render(const std::vector<Ellipse>& shapes, double jitter, Rng& rng) {
  cv::Mat mat(kCropSize, kCropSize, CV_8UC3, cv::Scalar(90, 110, 130));
  for (const auto& e : shapes) {
    const double dx = jitter * rng.normal(), dy = jitter * rng.normal();
    cv::ellipse(mat, cv::Point(cvRound((e.cx + dx) * 16), cvRound((e.cy + dy) * 16)),
                cv::Size(static_cast<int>(e.ax * 16), static_cast<int>(e.ay * 16)),
                e.angle + 4 * jitter * rng.normal(), 0, 360, e.color, cv::FILLED,
                cv::LINE_AA, 4);
  }
  return detail::from_mat(mat);
}

}  // namespace

void SynthConfig::validate() const {
  check_counts(identities, reals_per_identity, swaps_per_identity,
               reenactments_per_identity, frames);
  if (dim < 2) throw ValidationError("synth: dim must be >= 2");
  if (!(sigma_real >= 0) || !(sigma_fake >= 0)) {
    throw ValidationError("synth: sigmas must be non-negative");
  }
  if (!(flip_prob >= 0 && flip_prob <= 1)) {
    throw ValidationError("synth: flip_prob must be in [0, 1]");
  }
}

void SynthImageConfig::validate() const {
  check_counts(identities, reals_per_identity, swaps_per_identity,
               reenactments_per_identity, frames);
  if (!(jitter >= 0) || !(fake_jitter >= 0)) {
    throw ValidationError("synth: jitter must be non-negative");
  }
  if (!(flip_prob >= 0 && flip_prob <= 1)) {
    throw ValidationError("synth: flip_prob must be in [0, 1]");
  }
}

SyntheticDataset make_synthetic_dataset(const SynthConfig& cfg) {
  cfg.validate();
  SyntheticDataset data;
  const auto planned = plan_videos(cfg.identities, cfg.reals_per_identity,
                                   cfg.swaps_per_identity, cfg.reenactments_per_identity,
                                   ".emb", cfg.fractions, cfg.seed, data.manifest);

  std::vector<Eigen::VectorXd> bases;
  for (int i = 0; i < cfg.identities; ++i) bases.push_back(unit_direction(i, cfg.dim, cfg.seed));
  auto identity_index = [](const std::string& id) { return std::stoi(id.substr(2)); };

  for (const auto& p : planned) {
    const auto& rec = p.record;
    Rng rng(mix_seed(cfg.seed, stable_hash(rec.video_id)));
    const int own = identity_index(rec.identity_id);
    EmbeddingSequence seq;
    seq.video_id = rec.video_id;
    seq.backend_id = "synthetic";
    seq.frames.resize(cfg.frames, cfg.dim);
    for (int t = 0; t < cfg.frames; ++t) {
      Eigen::VectorXf v;
      switch (p.kind) {
        case Planned::Kind::kReal:
          v = jittered(bases[static_cast<std::size_t>(own)], cfg.sigma_real, rng);
          break;
        case Planned::Kind::kSwap: {
          const bool flip = rng.uniform() < cfg.flip_prob;
          const int who = flip ? own : p.source_identity;
          v = jittered(bases[static_cast<std::size_t>(who)], cfg.sigma_real, rng);
          break;
        }
        case Planned::Kind::kReenact:
          v = jittered(bases[static_cast<std::size_t>(own)], cfg.sigma_fake, rng);
          break;
      }
      seq.frames.row(t) = v.transpose();
    }
    data.sequences.emplace(rec.video_id, std::move(seq));
  }
  for (const auto& rec : data.manifest.records) {
    data.sequences.at(rec.video_id).aux =
        data.sequences.at(rec.aux_video_id).frames.row(0).transpose();
  }
  return data;
}

void write_synthetic_dataset(const SyntheticDataset& data,
                             const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "embeddings");
  for (const auto& rec : data.manifest.records) {
    cache_write(data.sequences.at(rec.video_id), dir / rec.frames_path);
  }
  save_manifest(data.manifest, dir / "manifest.jsonl");
}

Manifest write_synthetic_images(const SynthImageConfig& cfg,
                                const std::filesystem::path& dir) {
  cfg.validate();
  Manifest manifest;
  auto planned = plan_videos(cfg.identities, cfg.reals_per_identity, cfg.swaps_per_identity,
                             cfg.reenactments_per_identity, ".png", cfg.fractions,
                             cfg.seed, manifest);
  std::vector<std::vector<Ellipse>> shapes;
  for (int i = 0; i < cfg.identities; ++i) shapes.push_back(identity_shapes(i, cfg.seed));
  auto identity_index = [](const std::string& id) { return std::stoi(id.substr(2)); };

  for (const auto& p : planned) {
    const auto& rec = p.record;
    const auto folder = dir / rec.frames_path;
    std::filesystem::create_directories(folder);
    Rng rng(mix_seed(cfg.seed, stable_hash(rec.video_id)));
    const int own = identity_index(rec.identity_id);
    for (int t = 0; t < cfg.frames; ++t) {
      Image frame;
      switch (p.kind) {
        case Planned::Kind::kReal:
          frame = render(shapes[static_cast<std::size_t>(own)], cfg.jitter, rng);
          break;
        case Planned::Kind::kSwap: {
          const bool flip = rng.uniform() < cfg.flip_prob;
          const int who = flip ? own : p.source_identity;
          frame = render(shapes[static_cast<std::size_t>(who)], cfg.jitter, rng);
          break;
        }
        case Planned::Kind::kReenact:
          frame = render(shapes[static_cast<std::size_t>(own)], cfg.fake_jitter, rng);
          break;
      }
      char name[16];
      std::snprintf(name, sizeof name, "%04d.png", t);
      write_image(folder / name, frame);
    }
  }
  // Registered images point at frame 0 of the paired real video.
  for (auto& rec : manifest.records) {
    rec.aux_image_path = rec.aux_image_path + "/0000.png";
  }
  save_manifest(manifest, dir / "manifest.jsonl");
  return manifest;
}

}  // namespace idseq
