#include "idseq/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "idseq/error.hpp"
#include "parallel.hpp"

namespace idseq {

double auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw ValidationError("AUC is undefined without both positive and negative scores");
  }
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(positives.size() + negatives.size());
  for (double s : positives) items.push_back({s, true});
  for (double s : negatives) items.push_back({s, false});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });

  // Count, for each positive, the negatives strictly below it plus half the
  // tied negatives. Integer arithmetic in units of one half.
  std::uint64_t half_pairs = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < items.size() && items[j].score == items[i].score) {
      (items[j].positive ? pos : neg) += 1;
      ++j;
    }
    half_pairs += pos * (2 * negatives_below + neg);
    negatives_below += neg;
    i = j;
  }
  const double pairs = static_cast<double>(positives.size()) *
                       static_cast<double>(negatives.size());
  return static_cast<double>(half_pairs) / 2.0 / pairs;
}

std::string_view to_string(Aggregation agg) {
  return agg == Aggregation::kMean ? "MEAN" : "MAX";
}

std::optional<Aggregation> parse_aggregation(std::string_view text) {
  std::string u(text);
  for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "MEAN") return Aggregation::kMean;
  if (u == "MAX") return Aggregation::kMax;
  return std::nullopt;
}

std::vector<DifferenceSequence> eval_windows(const EmbeddingSequence& seq,
                                             const ScoringOptions& options) {
  const auto frames = static_cast<int>(seq.length());
  if (frames < 2) {
    throw ValidationError("video '" + seq.video_id + "' has fewer than 2 frames");
  }
  std::vector<DifferenceSequence> windows;
  if (frames < options.sampler.sequence_length) {
    windows.push_back(difference_sequence(seq, options.embedding_type));
    return windows;
  }
  for (const auto& idx : sample_windows(frames, options.sampler, 0, Phase::kEval)) {
    windows.push_back(difference_sequence(select_frames(seq, idx), options.embedding_type));
  }
  return windows;
}

double score_embeddings(const Detector& model, const EmbeddingSequence& seq,
                        const ScoringOptions& options) {
  const auto windows = eval_windows(seq, options);
  const auto probs = model.window_probs(windows, options.batch_size);
  if (options.aggregation == Aggregation::kMax) {
    return *std::max_element(probs.begin(), probs.end());
  }
  return std::accumulate(probs.begin(), probs.end(), 0.0) /
         static_cast<double>(probs.size());
}

void summarize(EvalReport& report) {
  std::vector<double> reals, fakes;
  std::map<FakeType, std::vector<double>> by_type;
  for (const auto& v : report.per_video) {
    if (v.label == Label::kReal) {
      reals.push_back(v.score);
    } else {
      fakes.push_back(v.score);
      by_type[v.fake_type.value_or(FakeType::kOther)].push_back(v.score);
    }
  }
  if (reals.empty() || fakes.empty()) {
    throw ValidationError("split '" + report.split +
                          "' contains a single class; AUC is undefined");
  }
  report.auc_overall = auc(fakes, reals);
  report.auc_by_fake_type.clear();
  for (const auto& [type, scores] : by_type) {
    report.auc_by_fake_type[type] = auc(scores, reals);
  }
}

EvalReport evaluate(const Detector& model, const Manifest& manifest, Split split,
                    const EmbeddingSource& source, const ScoringOptions& options) {
  const auto records = manifest.in_split(split);
  if (records.empty()) {
    throw ValidationError("split " + std::string(to_string(split)) + " is empty");
  }
  EvalReport report;
  report.split = std::string(to_string(split));
  report.per_video.resize(records.size());
  detail::parallel_for(records.size(), options.workers, [&](std::size_t i) {
    const VideoRecord& rec = *records[i];
    const auto seq = source.load(rec);
    report.per_video[i] = {rec.video_id, rec.label, rec.fake_type,
                           score_embeddings(model, *seq, options)};
  });
  summarize(report);
  return report;
}

EvalReport robustness_sweep(const Detector& model, const Manifest& manifest,
                            Split split, const ImagePipeline& pipeline,
                            std::span<const CorruptionKind> kinds,
                            const ScoringOptions& options, std::uint64_t seed,
                            const CorruptionTable& table) {
  if (kinds.empty()) throw ValidationError("robustness sweep needs at least one kind");
  const auto pristine_source =
      pipeline.with_corruption({kinds.front(), 0, seed}, table);
  EvalReport report = evaluate(model, manifest, split, *pristine_source, options);
  for (CorruptionKind kind : kinds) {
    auto& curve = report.robustness[kind];
    curve[0] = report.auc_overall;
    for (int s = 1; s <= kMaxSeverity; ++s) {
      const auto source = pipeline.with_corruption({kind, s, seed}, table);
      curve[static_cast<std::size_t>(s)] =
          evaluate(model, manifest, split, *source, options).auc_overall;
    }
    auto& decline = report.auc_decline[kind];
    for (int s = 1; s <= kMaxSeverity; ++s) {
      decline[static_cast<std::size_t>(s - 1)] = curve[0] - curve[static_cast<std::size_t>(s)];
    }
  }
  return report;
}

}  // namespace idseq
