#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "idseq/rng.hpp"
#include "idseq/seqfeat.hpp"

namespace idseq {

struct DetectorConfig {
  int input_dim = 1024;
  int hidden_size = 1024;
  bool bidirectional = true;
  int head_hidden = 512;
  double dropout_pre_rnn = 0.2;
  double dropout_pre_head = 0.5;
  int num_classes = 2;

  void validate() const;
  int embedding_dim() const { return hidden_size * (bidirectional ? 2 : 1); }
  bool operator==(const DetectorConfig&) const = default;
};

/// One GRU direction, gate order (reset, update, new) along the rows.
struct GruWeights {
  Eigen::MatrixXd w_ih;  // 3H x I
  Eigen::MatrixXd w_hh;  // 3H x H
  Eigen::VectorXd b_ih;  // 3H
  Eigen::VectorXd b_hh;  // 3H
};

struct DetectorParams {
  std::vector<GruWeights> directions;  // forward, then backward
  Eigen::MatrixXd head_w1;             // K x D
  Eigen::VectorXd head_b1;
  Eigen::MatrixXd head_w2;  // 2 x K
  Eigen::VectorXd head_b2;

  /// Zero tensors with the same shapes.
  DetectorParams zeros_like() const;
  /// Flat views in a fixed order, for optimizers and serialization.
  std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> views();
  std::vector<std::pair<std::string, Eigen::Map<const Eigen::VectorXd>>> views() const;
  std::size_t parameter_count() const;
};

/// Activations kept by a training forward pass for backpropagation.
struct ForwardCache {
  struct Direction {
    std::vector<Eigen::MatrixXd> h_prev, r, z, n, gh_n;  // per processed step
  };
  std::vector<Eigen::MatrixXd> inputs;  // per timestep, B x I, after dropout
  std::vector<Direction> directions;
  Eigen::MatrixXd embedding;       // B x D (before head dropout)
  Eigen::MatrixXd head_input;      // B x D (after head dropout)
  Eigen::MatrixXd head_pre;        // B x K
  Eigen::MatrixXd head_hidden;     // B x K
  Eigen::MatrixXd head_mask;       // B x D, already scaled
};

struct BatchOutput {
  Eigen::MatrixXd embedding;  // B x D
  Eigen::MatrixXd logits;     // B x 2, columns (REAL, FAKE)
  Eigen::MatrixXd probs;      // B x 2
};

/// Dropout -> bidirectional GRU -> final states H -> dropout -> Linear ->
/// ReLU -> Linear -> softmax over (REAL, FAKE).
class Detector {
 public:
  Detector() = default;
  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  Detector(DetectorConfig config, std::uint64_t seed);
  Detector(DetectorConfig config, DetectorParams params);

  const DetectorConfig& config() const { return config_; }
  DetectorParams& params() { return params_; }
  const DetectorParams& params() const { return params_; }

  /// All sequences must share length and step_dim == input_dim. `rng` is
  /// required when training with nonzero dropout. `cache` may be null.
  BatchOutput forward(const std::vector<const RowMatrixD*>& batch, bool training,
                      Rng* rng, ForwardCache* cache) const;

  /// Accumulates parameter gradients given dL/dH (B x D, may be empty) and
  /// dL/dlogits (B x 2).
  void backward(const ForwardCache& cache, const Eigen::MatrixXd& d_embedding,
                const Eigen::MatrixXd& d_logits, DetectorParams& grads) const;

  /// H for one sequence. With training=false the result is deterministic.
  Eigen::VectorXd forward_embed(const DifferenceSequence& diff, bool training,
                                std::uint64_t rng_seed) const;
  Eigen::Vector2d head_logits(const Eigen::VectorXd& embedding, bool training,
                              std::uint64_t rng_seed) const;
  /// P(FAKE) for an embedding.
  double forward_prob(const Eigen::VectorXd& embedding, bool training = false,
                      std::uint64_t rng_seed = 0) const;
  /// P(FAKE) per window, inference mode.
  std::vector<double> window_probs(const std::vector<DifferenceSequence>& windows,
                                   std::size_t batch_size = 64) const;

 private:
  void check_batch(const std::vector<const RowMatrixD*>& batch) const;

  DetectorConfig config_;
  DetectorParams params_;
};

/// Numerically stable two-class softmax, returns P(class 1).
double softmax_fake(double logit_real, double logit_fake);

/// Arithmetic mean of window probabilities. Throws on an empty list.
double score_video(const Detector& model,
                   const std::vector<DifferenceSequence>& windows);

}  // namespace idseq
