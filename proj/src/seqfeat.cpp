#include "idseq/seqfeat.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "idseq/error.hpp"
#include "idseq/rng.hpp"

namespace idseq {
namespace {

void require_frames(const EmbeddingSequence& seq) {
  if (seq.length() < 2) {
    throw ValidationError("difference sequences need at least 2 frames, got " +
                          std::to_string(seq.length()));
  }
}

}  // namespace

std::string_view to_string(DiffKind kind) {
  switch (kind) {
    case DiffKind::kTmp: return "TMP";
    case DiffKind::kAux: return "AUX";
    case DiffKind::kCat: return "CAT";
  }
  return "CAT";
}

std::optional<DiffKind> parse_diff_kind(std::string_view text) {
  std::string u(text);
  for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "TMP") return DiffKind::kTmp;
  if (u == "AUX") return DiffKind::kAux;
  if (u == "CAT") return DiffKind::kCat;
  return std::nullopt;
}

std::string_view to_string(SamplingMode mode) {
  return mode == SamplingMode::kSlidingWindow ? "SLIDING_WINDOW" : "RANDOM";
}

std::optional<SamplingMode> parse_sampling_mode(std::string_view text) {
  std::string u(text);
  for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "SLIDING_WINDOW" || u == "SLIDING") return SamplingMode::kSlidingWindow;
  if (u == "RANDOM") return SamplingMode::kRandom;
  return std::nullopt;
}

DifferenceSequence tdc_sequence(const EmbeddingSequence& seq) {
  require_frames(seq);
  const Eigen::Index n = seq.length() - 1;
  DifferenceSequence out{DiffKind::kTmp, RowMatrixD(n, seq.dim())};
  const RowMatrixD frames = seq.frames.cast<double>();
  out.steps = frames.bottomRows(n) - frames.topRows(n);
  return out;
}

DifferenceSequence adc_sequence(const EmbeddingSequence& seq) {
  require_frames(seq);
  if (seq.aux.size() == 0) {
    throw ValidationError("video '" + seq.video_id + "' has no auxiliary vector");
  }
  if (seq.aux.size() != seq.dim()) {
    throw ValidationError("auxiliary vector dim does not match frames");
  }
  const Eigen::Index n = seq.length() - 1;
  DifferenceSequence out{DiffKind::kAux, RowMatrixD(n, seq.dim())};
  const Eigen::RowVectorXd aux = seq.aux.cast<double>().transpose();
  out.steps = seq.frames.topRows(n).cast<double>().rowwise() - aux;
  return out;
}

DifferenceSequence cat_sequence(const DifferenceSequence& tmp,
                                const DifferenceSequence& aux) {
  if (tmp.length() != aux.length()) {
    throw ValidationError("cannot concatenate sequences of length " +
                          std::to_string(tmp.length()) + " and " +
                          std::to_string(aux.length()));
  }
  if (tmp.step_dim() != aux.step_dim()) {
    throw ValidationError("cannot concatenate steps of dim " +
                          std::to_string(tmp.step_dim()) + " and " +
                          std::to_string(aux.step_dim()));
  }
  DifferenceSequence out{DiffKind::kCat,
                         RowMatrixD(tmp.length(), tmp.step_dim() * 2)};
  out.steps.leftCols(tmp.step_dim()) = tmp.steps;
  out.steps.rightCols(aux.step_dim()) = aux.steps;
  return out;
}

DifferenceSequence difference_sequence(const EmbeddingSequence& seq,
                                       DiffKind kind) {
  switch (kind) {
    case DiffKind::kTmp: return tdc_sequence(seq);
    case DiffKind::kAux: return adc_sequence(seq);
    case DiffKind::kCat: return cat_sequence(tdc_sequence(seq), adc_sequence(seq));
  }
  throw ValidationError("unknown difference kind");
}

int step_dim_for(DiffKind kind, int embedding_dim) {
  return kind == DiffKind::kCat ? 2 * embedding_dim : embedding_dim;
}

void SamplerConfig::validate() const {
  if (sequence_length < 2) throw ValidationError("sequence_length must be >= 2");
  if (sequences_per_video_per_epoch < 1) {
    throw ValidationError("sequences_per_video_per_epoch must be >= 1");
  }
  if (eval_stride < 1) throw ValidationError("eval_stride must be >= 1");
}

std::vector<std::vector<int>> sample_windows(int num_frames,
                                             const SamplerConfig& cfg,
                                             std::uint64_t seed, Phase phase) {
  cfg.validate();
  const int len = cfg.sequence_length;
  if (num_frames < len) {
    throw ValidationError("video has " + std::to_string(num_frames) +
                          " frames, fewer than sequence_length " +
                          std::to_string(len));
  }
  auto contiguous = [len](int start) {
    std::vector<int> w(static_cast<std::size_t>(len));
    std::iota(w.begin(), w.end(), start);
    return w;
  };

  std::vector<std::vector<int>> windows;
  if (phase == Phase::kEval) {
    int start = 0;
    for (; start + len <= num_frames; start += cfg.eval_stride) {
      windows.push_back(contiguous(start));
    }
    const int covered = windows.back().back() + 1;
    if (covered < num_frames) windows.push_back(contiguous(num_frames - len));
    return windows;
  }

  Rng rng(seed);
  const auto starts = static_cast<std::uint64_t>(num_frames - len + 1);
  for (int i = 0; i < cfg.sequences_per_video_per_epoch; ++i) {
    if (cfg.mode == SamplingMode::kSlidingWindow) {
      windows.push_back(contiguous(static_cast<int>(rng.uniform_index(starts))));
    } else {
      // Partial Fisher-Yates over all frame indices.
      std::vector<int> pool(static_cast<std::size_t>(num_frames));
      std::iota(pool.begin(), pool.end(), 0);
      for (int k = 0; k < len; ++k) {
        const auto j = k + static_cast<int>(rng.uniform_index(
                               static_cast<std::uint64_t>(num_frames - k)));
        std::swap(pool[k], pool[j]);
      }
      pool.resize(static_cast<std::size_t>(len));
      std::sort(pool.begin(), pool.end());
      windows.push_back(std::move(pool));
    }
  }
  return windows;
}

}  // namespace idseq
