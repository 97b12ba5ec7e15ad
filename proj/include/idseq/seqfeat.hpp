#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "idseq/embedder.hpp"

namespace idseq {

using RowMatrixD =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class DiffKind { kTmp, kAux, kCat };

std::string_view to_string(DiffKind kind);
std::optional<DiffKind> parse_diff_kind(std::string_view text);

/// One row per timestep. Always length() == frames - 1.
struct DifferenceSequence {
  DiffKind kind = DiffKind::kCat;
  RowMatrixD steps;

  Eigen::Index length() const { return steps.rows(); }
  Eigen::Index step_dim() const { return steps.cols(); }
};

/// steps[t] = f(x_{t+1}) - f(x_t), t = 1..l-1.
DifferenceSequence tdc_sequence(const EmbeddingSequence& seq);
/// steps[t] = f(x_t) - f(x_aux), t = 1..l-1 (the last frame is not used).
DifferenceSequence adc_sequence(const EmbeddingSequence& seq);
/// Per-timestep concatenation [tmp_t ; aux_t].
DifferenceSequence cat_sequence(const DifferenceSequence& tmp,
                                const DifferenceSequence& aux);
/// Builds the requested kind from a window of embeddings.
DifferenceSequence difference_sequence(const EmbeddingSequence& seq,
                                       DiffKind kind);

/// Step dimension of `kind` for embeddings of dimension `embedding_dim`.
int step_dim_for(DiffKind kind, int embedding_dim);

enum class SamplingMode { kSlidingWindow, kRandom };
enum class Phase { kTrain, kEval };

std::string_view to_string(SamplingMode mode);
std::optional<SamplingMode> parse_sampling_mode(std::string_view text);

struct SamplerConfig {
  int sequence_length = 64;
  int sequences_per_video_per_epoch = 20;
  SamplingMode mode = SamplingMode::kSlidingWindow;
  int eval_stride = 64;

  void validate() const;
  bool operator==(const SamplerConfig&) const = default;
};

/// TRAIN: sequences_per_video_per_epoch windows; sliding windows start at
/// uniform offsets, random windows are l distinct ascending indices.
/// EVAL: contiguous windows at eval_stride plus a right-aligned final window
/// when frames remain. Throws ValidationError when num_frames < l.
std::vector<std::vector<int>> sample_windows(int num_frames,
                                             const SamplerConfig& cfg,
                                             std::uint64_t seed, Phase phase);

}  // namespace idseq
