#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "idseq/corrupt.hpp"
#include "idseq/error.hpp"

using namespace idseq;
using idseq::testing::gradient_image;

namespace {

double noise_sigma(const Image& clean, const Image& noisy) {
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double d = double(noisy.pixels[i]) - double(clean.pixels[i]);
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(clean.size());
  return std::sqrt(sq / n - (sum / n) * (sum / n));
}

}  // namespace

TEST_CASE("severity 0 is bit-identical for every kind") {
  const Image img = gradient_image(64, 48, 3);
  for (auto kind : kAllCorruptions) {
    CHECK(apply(img, {kind, 0, 17}) == img);
  }
}

TEST_CASE("corruption is deterministic and keeps dimensions") {
  for (const auto& [h, w] : {std::pair{64, 48}, {112, 112}, {31, 77}}) {
    const Image img = gradient_image(h, w, 1);
    for (auto kind : kAllCorruptions) {
      for (int s = 1; s <= kMaxSeverity; ++s) {
        const Image a = apply(img, {kind, s, 99});
        CHECK(a == apply(img, {kind, s, 99}));
        CHECK(a.height == h);
        CHECK(a.width == w);
        CHECK(a.channels == 3);
      }
    }
  }
  const Image img = gradient_image(64, 64, 2);
  CHECK(apply(img, {CorruptionKind::kGaussianNoise, 3, 1}) !=
        apply(img, {CorruptionKind::kGaussianNoise, 3, 2}));
}

TEST_CASE("noise standard deviation follows the table") {
  const Image gray(200, 200, 3, 128);
  const auto& table = CorruptionTable::builtin();
  for (int s = 1; s <= kMaxSeverity; ++s) {
    const double sigma = table.param(CorruptionKind::kGaussianNoise, s, "sigma");
    const double est =
        noise_sigma(gray, apply(gray, {CorruptionKind::kGaussianNoise, s, 5}));
    CHECK(std::abs(est - sigma) <= 0.1 * sigma);
  }
}

TEST_CASE("saturation and contrast behave as documented") {
  const Image img = gradient_image(40, 40, 4);
  const Image gray = apply(img, {CorruptionKind::kSaturation, 5, 0});  // chroma 0
  for (int y = 0; y < 40; y += 7) {
    for (int x = 0; x < 40; x += 7) {
      CHECK(std::abs(int(gray.at(y, x, 0)) - int(gray.at(y, x, 1))) <= 1);
      CHECK(std::abs(int(gray.at(y, x, 1)) - int(gray.at(y, x, 2))) <= 1);
    }
  }
  const Image flat(10, 10, 3, 200);
  const Image dim = apply(flat, {CorruptionKind::kContrast, 1, 0});  // x0.85
  CHECK(dim.pixels.front() == 170);
}

TEST_CASE("blockwise paints gray blocks") {
  const Image black(64, 64, 3, 0);
  const Image out = apply(black, {CorruptionKind::kBlockwise, 1, 3});
  int painted = 0;
  for (auto p : out.pixels) {
    if (p == 128) ++painted;
    else CHECK(p == 0);
  }
  CHECK(painted > 0);
  CHECK(painted <= 16 * 8 * 8 * 3);
}

TEST_CASE("severity is monotone in the builtin table") {
  const auto& t = CorruptionTable::builtin();
  for (auto kind : kAllCorruptions) {
    const auto key = CorruptionTable::primary_parameter(kind);
    const bool decreasing =
        kind == CorruptionKind::kSaturation || kind == CorruptionKind::kContrast;
    for (int s = 1; s < kMaxSeverity; ++s) {
      const double a = t.param(kind, s, key), b = t.param(kind, s + 1, key);
      if (decreasing) CHECK(b < a);
      else CHECK(b > a);
    }
  }
  CHECK(t.param(CorruptionKind::kGaussianBlur, 1, "kernel_size") == 7);
}

TEST_CASE("severity outside 0..5 is rejected") {
  const Image img = gradient_image(8, 8);
  CHECK_THROWS_AS(apply(img, {CorruptionKind::kJpeg, 6, 0}), ValidationError);
  CHECK_THROWS_AS(apply(img, {CorruptionKind::kJpeg, -1, 0}), ValidationError);
  CHECK_THROWS_AS(corrupt_video({{img, 0}}, {CorruptionKind::kJpeg, 6, 0}), ValidationError);
}

TEST_CASE("corrupt_video seeds frames by index") {
  const Image img = gradient_image(32, 32);
  const std::vector<Frame> frames = {{img, 0}, {img, 1}, {img, 2}};
  const CorruptionSpec spec{CorruptionKind::kGaussianNoise, 2, 40};
  const auto out = corrupt_video(frames, spec);
  REQUIRE(out.size() == 3);
  CHECK(out[1].index == 1);
  CHECK(out[0].image != out[1].image);
  CHECK(out[2].image == apply(img, {spec.kind, spec.severity, 40 ^ 2}));
  CHECK(corrupt_video(frames, {spec.kind, 0, 40})[1].image == img);
}

TEST_CASE("corruption spec parsing") {
  const auto s = parse_corruption_spec("gaussian_blur:3", 7);
  CHECK(s.kind == CorruptionKind::kGaussianBlur);
  CHECK(s.severity == 3);
  CHECK(s.seed == 7);
  CHECK(parse_corruption_spec("JPEG:0").severity == 0);
  CHECK(parse_corruption_spec("noise:5").kind == CorruptionKind::kGaussianNoise);
  CHECK_THROWS_AS(parse_corruption_spec("blur"), ValidationError);
  CHECK_THROWS_AS(parse_corruption_spec("blur:6"), ValidationError);
  CHECK_THROWS_AS(parse_corruption_spec("sparkle:1"), ValidationError);
  CHECK_THROWS_AS(parse_corruption_spec("blur:2x"), ValidationError);
}

TEST_CASE("custom tables are validated") {
  CHECK_THROWS_AS(CorruptionTable::from_json(R"({"version": 1, "kinds": {}})"),
                  ValidationError);
  CHECK_THROWS_AS(CorruptionTable::from_json("not json"), ValidationError);
}
