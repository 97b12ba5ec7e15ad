#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idseq/corrupt.hpp"
#include "idseq/detector.hpp"
#include "idseq/manifest.hpp"
#include "idseq/pipeline.hpp"
#include "idseq/seqfeat.hpp"

namespace idseq {

/// Mann-Whitney AUC with FAKE as the positive class: the fraction of
/// (positive, negative) pairs where the positive scores higher, ties 0.5.
/// Throws ValidationError when either list is empty.
double auc(std::span<const double> positives, std::span<const double> negatives);

enum class Aggregation { kMean, kMax };
std::string_view to_string(Aggregation agg);
std::optional<Aggregation> parse_aggregation(std::string_view text);

struct VideoScore {
  std::string video_id;
  Label label = Label::kReal;
  std::optional<FakeType> fake_type;
  double score = 0;
  bool operator==(const VideoScore&) const = default;
};

struct EvalReport {
  std::string split;
  std::vector<VideoScore> per_video;
  double auc_overall = 0;
  /// AUC of each fake type's videos against all real videos.
  std::map<FakeType, double> auc_by_fake_type;
  /// Severity 0..5 per corruption kind.
  std::map<CorruptionKind, std::array<double, 6>> robustness;
  /// auc(severity 0) - auc(severity s), s = 1..5.
  std::map<CorruptionKind, std::array<double, 5>> auc_decline;

  bool operator==(const EvalReport&) const = default;
};

/// How videos are cut into windows and scored.
struct ScoringOptions {
  DiffKind embedding_type = DiffKind::kCat;
  SamplerConfig sampler;
  Aggregation aggregation = Aggregation::kMean;
  std::size_t batch_size = 64;
  int workers = 1;
};

/// Evaluation windows for one video. Videos shorter than sequence_length are
/// scored as a single window over all their frames.
std::vector<DifferenceSequence> eval_windows(const EmbeddingSequence& seq,
                                             const ScoringOptions& options);

double score_embeddings(const Detector& model, const EmbeddingSequence& seq,
                        const ScoringOptions& options);

/// Scores every record of `split`, fills AUC overall and per fake type.
/// Throws ValidationError when the split is empty or has a single class.
EvalReport evaluate(const Detector& model, const Manifest& manifest, Split split,
                    const EmbeddingSource& source, const ScoringOptions& options);

/// Recomputes AUCs from per_video scores.
void summarize(EvalReport& report);

/// Re-scores the split under every (kind, severity 0..5) and fills
/// robustness and auc_decline. The pristine entry comes from the severity-0
/// run.
EvalReport robustness_sweep(const Detector& model, const Manifest& manifest,
                            Split split, const ImagePipeline& pipeline,
                            std::span<const CorruptionKind> kinds,
                            const ScoringOptions& options, std::uint64_t seed,
                            const CorruptionTable& table = CorruptionTable::builtin());

enum class ReportFormat { kJson, kCsv, kMarkdown, kSvg };
std::optional<ReportFormat> parse_report_format(std::string_view text);

/// Deterministic serialization.
///  CSV: header "row,id,label,fake_type,value"; one "video" row per video,
///  then "auc" summary rows (each fake type, then "all"), then one
///  "robustness" row per kind and severity.
///  MARKDOWN: AUC (%) table with one column per fake type plus "all"; a
///  decline table follows when robustness data is present.
///  SVG: AUC-vs-severity lines per corruption kind.
std::string render_report(const EvalReport& report, ReportFormat format,
                          const std::string& method = "Ours");
void write_report(const EvalReport& report, ReportFormat format,
                  const std::filesystem::path& path);
EvalReport report_from_json(std::string_view text);

}  // namespace idseq
