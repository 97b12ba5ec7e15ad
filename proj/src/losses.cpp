#include "idseq/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "idseq/error.hpp"

namespace idseq {
namespace {

void same_dims(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw ValidationError("embedding dims differ: " + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()));
  }
}

void check_label(int label) {
  if (label != 0 && label != 1) throw ValidationError("label must be 0 or 1");
}

}  // namespace

void LossConfig::validate() const {
  if (!(margin > 0)) throw ValidationError("triplet margin must be positive");
  if (!(lambda1 >= 0) || !(lambda2 >= 0)) {
    throw ValidationError("loss weights must be non-negative");
  }
}

double triplet_loss(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                    const Eigen::VectorXd& negative, double margin) {
  same_dims(anchor, positive);
  same_dims(anchor, negative);
  const double ap = (anchor - positive).norm();
  const double an = (anchor - negative).norm();
  return std::max(ap - an + margin, 0.0);
}

double anchor_positive_loss(const Eigen::VectorXd& anchor,
                            const Eigen::VectorXd& positive) {
  same_dims(anchor, positive);
  return (anchor - positive).norm();
}

double classification_loss(int label, const Eigen::Vector2d& probs) {
  check_label(label);
  return -std::log(std::max(probs[label], kLogClamp));
}

double total_loss(double cls, double tri, double ap, double lambda1,
                  double lambda2) {
  return cls + lambda1 * tri + lambda2 * ap;
}

TripletGrad triplet_loss_grad(const Eigen::VectorXd& anchor,
                              const Eigen::VectorXd& positive,
                              const Eigen::VectorXd& negative, double margin) {
  same_dims(anchor, positive);
  same_dims(anchor, negative);
  TripletGrad g;
  const Eigen::VectorXd d_ap = anchor - positive;
  const Eigen::VectorXd d_an = anchor - negative;
  const double ap = d_ap.norm();
  const double an = d_an.norm();
  const double arg = ap - an + margin;
  g.loss = std::max(arg, 0.0);
  g.d_anchor = Eigen::VectorXd::Zero(anchor.size());
  g.d_positive = Eigen::VectorXd::Zero(anchor.size());
  g.d_negative = Eigen::VectorXd::Zero(anchor.size());
  if (arg <= 0) return g;
  if (ap > 0) {
    g.d_anchor += d_ap / ap;
    g.d_positive -= d_ap / ap;
  }
  if (an > 0) {
    g.d_anchor -= d_an / an;
    g.d_negative += d_an / an;
  }
  return g;
}

PairGrad anchor_positive_loss_grad(const Eigen::VectorXd& anchor,
                                   const Eigen::VectorXd& positive) {
  same_dims(anchor, positive);
  PairGrad g;
  const Eigen::VectorXd diff = anchor - positive;
  g.loss = diff.norm();
  if (g.loss > 0) {
    g.d_anchor = diff / g.loss;
  } else {
    g.d_anchor = Eigen::VectorXd::Zero(anchor.size());
  }
  g.d_positive = -g.d_anchor;
  return g;
}

double softmax_cross_entropy(int label, const Eigen::Vector2d& logits,
                             Eigen::Vector2d* d_logits) {
  check_label(label);
  const double m = logits.maxCoeff();
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const Eigen::Vector2d p(e0 / (e0 + e1), e1 / (e0 + e1));
  const double loss = -std::log(std::max(p[label], kLogClamp));
  if (d_logits) {
    if (p[label] < kLogClamp) {
      d_logits->setZero();
    } else {
      *d_logits = p;
      (*d_logits)[label] -= 1.0;
    }
  }
  return loss;
}

}  // namespace idseq
