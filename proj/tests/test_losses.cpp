#include <Eigen/QR>
#include <cmath>

#include "doctest.h"
#include "idseq/error.hpp"
#include "idseq/losses.hpp"
#include "idseq/rng.hpp"

using namespace idseq;
using Eigen::VectorXd;

namespace {

VectorXd v2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

VectorXd random_vec(int n, Rng& rng) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("triplet_loss examples") {
  const VectorXd x = v2(0.3, -1.2);
  CHECK(triplet_loss(x, x, x, 0.2) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(triplet_loss(v2(0, 0), v2(0, 0), v2(1, 0), 0.2) == 0.0);
  CHECK(std::abs(triplet_loss(v2(0, 0), v2(3, 4), v2(1, 0), 0.5) - 4.5) <= 1e-9);
}

TEST_CASE("triplet hinge is inactive exactly at |a-n| = |a-p| + margin") {
  CHECK(triplet_loss(v2(0, 0), v2(3, 4), v2(5.5, 0), 0.5) == 0.0);
  CHECK(triplet_loss(v2(0, 0), v2(3, 4), v2(5.25, 0), 0.5) == doctest::Approx(0.25));
  const auto g = triplet_loss_grad(v2(0, 0), v2(3, 4), v2(5.5, 0), 0.5);
  CHECK(g.loss == 0.0);
  CHECK(g.d_anchor.isZero(0));
}

TEST_CASE("anchor_positive_loss examples") {
  const VectorXd x = v2(2, 7);
  CHECK(anchor_positive_loss(x, x) == 0.0);
  CHECK(anchor_positive_loss(v2(3, 4), v2(0, 0)) == doctest::Approx(5.0).epsilon(1e-12));
  Rng rng(1);
  const VectorXd a = random_vec(5, rng), p = random_vec(5, rng);
  CHECK(anchor_positive_loss(a, p) == anchor_positive_loss(p, a));
}

TEST_CASE("classification_loss examples") {
  CHECK(classification_loss(1, Eigen::Vector2d(0, 1)) == 0.0);
  CHECK(std::abs(classification_loss(1, Eigen::Vector2d(0.5, 0.5)) - std::log(2.0)) <= 1e-9);
  CHECK(std::abs(classification_loss(0, Eigen::Vector2d(0.9, 0.1)) + std::log(0.9)) <= 1e-9);
  // p[y] = 0 is clamped instead of producing infinity.
  CHECK(classification_loss(0, Eigen::Vector2d(0, 1)) ==
        doctest::Approx(-std::log(kLogClamp)));
  CHECK_THROWS_AS(classification_loss(2, Eigen::Vector2d(0.5, 0.5)), ValidationError);
}

TEST_CASE("total_loss examples") {
  CHECK(total_loss(1.0, 2.0, 3.0, 0, 0) == 1.0);
  CHECK(std::abs(total_loss(0.5, 0.2, 0.1, 1.0, 0.1) - 0.71) <= 1e-9);
  CHECK(total_loss(0, 0, 0, 1.0, 0.1) == 0.0);
}

TEST_CASE("dimension mismatch is rejected") {
  VectorXd three = VectorXd::Zero(3);
  CHECK_THROWS_AS(triplet_loss(v2(0, 0), three, v2(0, 0), 0.2), ValidationError);
  CHECK_THROWS_AS(anchor_positive_loss(v2(0, 0), three), ValidationError);
}

TEST_CASE("triplet loss properties on random inputs") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(6));
    const VectorXd a = random_vec(n, rng), p = random_vec(n, rng), q = random_vec(n, rng);
    const double margin = 0.05 + rng.uniform();
    const double l = triplet_loss(a, p, q, margin);
    CHECK(l >= 0.0);
    const bool inactive = (a - q).norm() >= (a - p).norm() + margin;
    CHECK((l == 0.0) == inactive);

    // Invariance under a common rotation (random orthogonal via QR).
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i) g.col(i) = random_vec(n, rng);
    const Eigen::MatrixXd rot = g.householderQr().householderQ();
    CHECK(triplet_loss(rot * a, rot * p, rot * q, margin) ==
          doctest::Approx(l).epsilon(1e-9));
  }
}

TEST_CASE("loss gradients match central differences") {
  Rng rng(11);
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(4));
    VectorXd a = random_vec(n, rng), p = random_vec(n, rng), q = random_vec(n, rng);
    const double margin = 0.5 + rng.uniform();
    const auto tg = triplet_loss_grad(a, p, q, margin);
    const auto pg = anchor_positive_loss_grad(a, p);
    const double arg = (a - p).norm() - (a - q).norm() + margin;
    if (std::abs(arg) < 1e-3) continue;  // too close to the kink
    auto check = [&](VectorXd& x, const VectorXd& analytic, auto loss_fn) {
      for (int i = 0; i < n; ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = loss_fn();
        x[i] = saved - h;
        const double down = loss_fn();
        x[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3});
        CHECK(std::abs(numeric - analytic[i]) / scale <= 1e-4);
      }
    };
    auto tri = [&] { return triplet_loss(a, p, q, margin); };
    auto ap = [&] { return anchor_positive_loss(a, p); };
    check(a, tg.d_anchor, tri);
    check(p, tg.d_positive, tri);
    check(q, tg.d_negative, tri);
    check(a, pg.d_anchor, ap);
    check(p, pg.d_positive, ap);

    Eigen::Vector2d logits(rng.normal(), rng.normal()), d;
    for (int y = 0; y < 2; ++y) {
      softmax_cross_entropy(y, logits, &d);
      for (int i = 0; i < 2; ++i) {
        Eigen::Vector2d up = logits, down = logits;
        up[i] += h;
        down[i] -= h;
        const double numeric =
            (softmax_cross_entropy(y, up, nullptr) - softmax_cross_entropy(y, down, nullptr)) /
            (2 * h);
        CHECK(std::abs(numeric - d[i]) <= 1e-4 * std::max(1.0, std::abs(d[i])));
      }
    }
  }
}

TEST_CASE("LossConfig validation") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.margin = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = LossConfig{};
  c.lambda2 = -0.1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
