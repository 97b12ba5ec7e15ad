#pragma once

#include <Eigen/Core>

namespace idseq {

struct LossConfig {
  double margin = 0.2;   // triplet margin alpha
  double lambda1 = 1.0;  // triplet weight
  double lambda2 = 0.1;  // anchor-positive weight

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

/// Clamp applied to p[y] before the log.
inline constexpr double kLogClamp = 1e-12;

/// max(|a - p| - |a - n| + margin, 0)
double triplet_loss(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                    const Eigen::VectorXd& negative, double margin);
/// |a - p|
double anchor_positive_loss(const Eigen::VectorXd& anchor,
                            const Eigen::VectorXd& positive);
/// -log p[y] for y in {0 (REAL), 1 (FAKE)}; p must sum to 1.
double classification_loss(int label, const Eigen::Vector2d& probs);
double total_loss(double cls, double tri, double ap, double lambda1, double lambda2);

struct TripletGrad {
  double loss = 0;
  Eigen::VectorXd d_anchor, d_positive, d_negative;
};

/// Loss and gradients. At the hinge kink (loss argument exactly 0) and at a
/// zero distance the subgradient 0 is used.
TripletGrad triplet_loss_grad(const Eigen::VectorXd& anchor,
                              const Eigen::VectorXd& positive,
                              const Eigen::VectorXd& negative, double margin);

struct PairGrad {
  double loss = 0;
  Eigen::VectorXd d_anchor, d_positive;
};
PairGrad anchor_positive_loss_grad(const Eigen::VectorXd& anchor,
                                   const Eigen::VectorXd& positive);

/// Softmax cross-entropy on logits (REAL, FAKE) with the log clamp; returns
/// the loss and writes dL/dlogits.
double softmax_cross_entropy(int label, const Eigen::Vector2d& logits,
                             Eigen::Vector2d* d_logits);

}  // namespace idseq
