#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "idseq/embedder.hpp"
#include "idseq/manifest.hpp"

namespace idseq {

/// Oracle dataset in embedding space. A real video is a unit identity
/// direction plus per-frame Gaussian jitter sigma_real. A swap-like fake (FS)
/// sits near another identity's direction and flips back to the labeled
/// identity with probability flip_prob per frame. A reenactment-like fake
/// (FOMM) keeps the labeled identity but with jitter sigma_fake. The
/// registered vector is frame 0 of a paired real video of the identity.
struct SynthConfig {
  int identities = 10;
  int reals_per_identity = 2;
  int swaps_per_identity = 1;
  int reenactments_per_identity = 1;
  int frames = 96;
  int dim = 64;
  double sigma_real = 0.02;
  double sigma_fake = 0.08;
  double flip_prob = 0.1;
  SplitFractions fractions{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  Manifest manifest;  // frames_path = "embeddings/<video_id>.emb"
  std::map<std::string, EmbeddingSequence> sequences;
};

SyntheticDataset make_synthetic_dataset(const SynthConfig& cfg);

/// Writes <dir>/manifest.jsonl and <dir>/embeddings/*.emb.
void write_synthetic_dataset(const SyntheticDataset& data,
                             const std::filesystem::path& dir);

/// Same scheme rendered as 112x112 PNG frame folders, for exercising the
/// image pipeline and corruptions. Each identity is a fixed arrangement of
/// colored ellipses; frames move the ellipses by `jitter` pixels (real) or
/// `fake_jitter` pixels (reenactment-like).
struct SynthImageConfig {
  int identities = 10;
  int reals_per_identity = 2;
  int swaps_per_identity = 1;
  int reenactments_per_identity = 1;
  int frames = 12;
  double jitter = 0.5;
  double fake_jitter = 4.0;
  double flip_prob = 0.15;
  SplitFractions fractions{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Writes <dir>/manifest.jsonl and <dir>/frames/<video_id>/NNNN.png and
/// returns the manifest (paths relative to `dir`).
Manifest write_synthetic_images(const SynthImageConfig& cfg,
                                const std::filesystem::path& dir);

}  // namespace idseq
