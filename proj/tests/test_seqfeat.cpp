#include "doctest.h"
#include "helpers.hpp"
#include "idseq/error.hpp"
#include "idseq/seqfeat.hpp"

using namespace idseq;

namespace {

EmbeddingSequence seq_of(std::initializer_list<std::initializer_list<float>> rows,
                         std::initializer_list<float> aux) {
  EmbeddingSequence s;
  s.video_id = "v";
  s.backend_id = "test";
  s.frames.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (float v : row) s.frames(r, c++) = v;
    ++r;
  }
  s.aux.resize(static_cast<Eigen::Index>(aux.size()));
  Eigen::Index c = 0;
  for (float v : aux) s.aux[c++] = v;
  return s;
}

RowMatrixD rows(std::initializer_list<std::initializer_list<double>> values) {
  RowMatrixD m(static_cast<Eigen::Index>(values.size()),
               static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : values) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

}  // namespace

TEST_CASE("tdc_sequence examples") {
  const auto d = tdc_sequence(seq_of({{1, 0}, {0, 1}, {1, 1}}, {0, 0}));
  CHECK(d.kind == DiffKind::kTmp);
  CHECK(d.steps == rows({{-1, 1}, {1, 0}}));

  const auto zero = tdc_sequence(seq_of({{0.3f, 0.4f}, {0.3f, 0.4f}, {0.3f, 0.4f}}, {0, 0}));
  CHECK(zero.steps.isZero(0));

  Rng rng(1);
  CHECK(tdc_sequence(testing::random_sequence(64, 8, rng)).length() == 63);
}

TEST_CASE("adc_sequence examples") {
  const auto d = adc_sequence(seq_of({{1, 0}, {0, 1}}, {1, 0}));
  CHECK(d.kind == DiffKind::kAux);
  CHECK(d.steps == rows({{0, 0}}));

  const auto same = adc_sequence(seq_of({{0.5f, 2}, {0.5f, 2}, {0.5f, 2}}, {0.5f, 2}));
  CHECK(same.steps.isZero(0));

  Rng rng(2);
  CHECK(adc_sequence(testing::random_sequence(64, 8, rng)).length() == 63);

  auto no_aux = seq_of({{1, 0}, {0, 1}}, {1, 0});
  no_aux.aux.resize(0);
  CHECK_THROWS_AS(adc_sequence(no_aux), ValidationError);
}

TEST_CASE("cat_sequence examples") {
  DifferenceSequence tmp{DiffKind::kTmp, rows({{-1, 1}})};
  DifferenceSequence aux{DiffKind::kAux, rows({{0, 0}})};
  const auto cat = cat_sequence(tmp, aux);
  CHECK(cat.kind == DiffKind::kCat);
  CHECK(cat.steps == rows({{-1, 1, 0, 0}}));

  Rng rng(3);
  const auto big = testing::random_sequence(64, 512, rng);
  const auto d = difference_sequence(big, DiffKind::kCat);
  CHECK(d.length() == 63);
  CHECK(d.step_dim() == 1024);
  CHECK(step_dim_for(DiffKind::kCat, 512) == 1024);
  CHECK(step_dim_for(DiffKind::kTmp, 512) == 512);

  DifferenceSequence t63{DiffKind::kTmp, RowMatrixD::Zero(63, 4)};
  DifferenceSequence a62{DiffKind::kAux, RowMatrixD::Zero(62, 4)};
  CHECK_THROWS_AS(cat_sequence(t63, a62), ValidationError);
  DifferenceSequence a63_wide{DiffKind::kAux, RowMatrixD::Zero(63, 5)};
  CHECK_THROWS_AS(cat_sequence(t63, a63_wide), ValidationError);
}

TEST_CASE("fewer than two frames is an error") {
  const auto one = seq_of({{1, 2}}, {0, 0});
  CHECK_THROWS_AS(tdc_sequence(one), ValidationError);
  CHECK_THROWS_AS(adc_sequence(one), ValidationError);
}

TEST_CASE("sample_windows: 64 frames, l = 64, TRAIN sliding -> 20 copies of 0..63") {
  SamplerConfig cfg;
  const auto w = sample_windows(64, cfg, 5, Phase::kTrain);
  REQUIRE(w.size() == 20);
  for (const auto& win : w) {
    REQUIRE(win.size() == 64);
    for (int i = 0; i < 64; ++i) CHECK(win[static_cast<std::size_t>(i)] == i);
  }
}

TEST_CASE("sample_windows: 100 frames, EVAL stride 64 -> starts 0 and 36") {
  SamplerConfig cfg;
  const auto w = sample_windows(100, cfg, 0, Phase::kEval);
  REQUIRE(w.size() == 2);
  CHECK(w[0].front() == 0);
  CHECK(w[1].front() == 36);
  CHECK(w[1].back() == 99);

  cfg.eval_stride = 16;
  const auto dense = sample_windows(100, cfg, 0, Phase::kEval);
  CHECK(dense.size() == 4);  // 0, 16, 32, then right-aligned 36
  CHECK(dense.back().front() == 36);
  CHECK(sample_windows(128, SamplerConfig{}, 0, Phase::kEval).size() == 2);
}

TEST_CASE("sample_windows: deterministic under seed, valid in both modes") {
  SamplerConfig cfg;
  cfg.sequence_length = 10;
  cfg.sequences_per_video_per_epoch = 30;
  for (auto mode : {SamplingMode::kSlidingWindow, SamplingMode::kRandom}) {
    cfg.mode = mode;
    const auto a = sample_windows(50, cfg, 77, Phase::kTrain);
    CHECK(a == sample_windows(50, cfg, 77, Phase::kTrain));
    CHECK(a != sample_windows(50, cfg, 78, Phase::kTrain));
    CHECK(a.size() == 30);
    for (const auto& w : a) {
      REQUIRE(w.size() == 10);
      for (std::size_t i = 1; i < w.size(); ++i) {
        CHECK(w[i] > w[i - 1]);
        if (mode == SamplingMode::kSlidingWindow) CHECK(w[i] == w[i - 1] + 1);
      }
      CHECK(w.front() >= 0);
      CHECK(w.back() < 50);
    }
  }
}

TEST_CASE("sample_windows: too few frames and bad configs") {
  SamplerConfig cfg;
  CHECK_THROWS_AS(sample_windows(63, cfg, 0, Phase::kTrain), ValidationError);
  cfg.sequence_length = 1;
  CHECK_THROWS_AS(sample_windows(63, cfg, 0, Phase::kEval), ValidationError);
  cfg.sequence_length = 2;  // shortest usable window
  cfg.eval_stride = 2;
  CHECK(sample_windows(5, cfg, 0, Phase::kEval).size() == 3);
}

TEST_CASE("diff kinds parse from CLI spellings") {
  CHECK(parse_diff_kind("tmp") == DiffKind::kTmp);
  CHECK(parse_diff_kind("AUX") == DiffKind::kAux);
  CHECK(parse_diff_kind("cat") == DiffKind::kCat);
  CHECK_FALSE(parse_diff_kind("sum").has_value());
  CHECK(parse_sampling_mode("sliding") == SamplingMode::kSlidingWindow);
  CHECK(parse_sampling_mode("random") == SamplingMode::kRandom);
}
