// idseq command-line tool: synthetic data, manifest preparation, embedding
// extraction, training, evaluation, corruption and report rendering.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "idseq/config.hpp"
#include "idseq/corrupt.hpp"
#include "idseq/embedding_cache.hpp"
#include "idseq/error.hpp"
#include "idseq/evaluation.hpp"
#include "idseq/image.hpp"
#include "idseq/manifest.hpp"
#include "idseq/pipeline.hpp"
#include "idseq/preprocess.hpp"
#include "idseq/synth.hpp"
#include "idseq/trainer.hpp"
#include "json.hpp"
#include "parallel.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace idseq;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Run {
  std::vector<std::string> argv;
  std::string command;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

/// Reproducibility record written next to every command's outputs.
void write_run_record(const fs::path& dir, const Run& run, ojson settings) {
  ojson doc;
  doc["tool"] = "idseq";
  doc["version"] = kVersion;
  doc["command"] = run.command;
  doc["argv"] = run.argv;
  doc["settings"] = std::move(settings);
  write_text(dir / "run.json", doc.dump(2) + "\n");
}

fs::path manifest_dir(const fs::path& manifest) {
  return manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
}

Split parse_split_or_throw(const std::string& text) {
  auto s = parse_split(text);
  if (!s) throw ValidationError("unknown split '" + text + "'");
  return *s;
}

SplitFractions parse_fractions(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ValidationError("bad split fraction '" + part + "'");
    }
  }
  if (v.size() != 3) throw ValidationError("--fractions needs three comma-separated values");
  return {v[0], v[1], v[2]};
}

/// Options shared by every command that runs the image pipeline.
struct PipelineArgs {
  std::string backend = "webface12m_r100_adaface";
  std::string model;
  std::string model_dir = "models";
  int dim = 64;
  std::string aligner = "center";
  std::string landmarks_dir;
  int stride = 1;
  bool no_normalize = false;
  bool corrupt_after_align = false;
  bool corrupt_aux = false;
  std::uint64_t seed = 0;

  void add_to(CLI::App* app) {
    app->add_option("--backend", backend,
                    "Embedding backend: a pretrained slot id, 'onnx', 'pixel-projection' "
                    "or 'synthetic'")
        ->capture_default_str();
    app->add_option("--model", model, "ONNX model file (default <model-dir>/<backend>.onnx)");
    app->add_option("--model-dir", model_dir, "Directory holding pretrained ONNX models")
        ->capture_default_str();
    app->add_option("--dim", dim, "Output dimension for pixel-projection/synthetic")
        ->capture_default_str();
    app->add_option("--aligner", aligner, "Face alignment: center or landmarks")
        ->check(CLI::IsMember({"center", "landmarks"}))
        ->capture_default_str();
    app->add_option("--landmarks-dir", landmarks_dir,
                    "Directory of <video_id>.json detections for --aligner landmarks");
    app->add_option("--stride", stride, "Use every n-th frame")->capture_default_str();
    app->add_flag("--no-normalize", no_normalize, "Keep raw backend features");
    app->add_flag("--corrupt-after-align", corrupt_after_align,
                  "Corrupt aligned crops instead of full frames");
    app->add_flag("--corrupt-aux", corrupt_aux, "Also corrupt the registered image");
  }

  ImagePipeline build(const fs::path& base_dir) const {
    BackendOptions bo;
    bo.id = backend;
    bo.model_path = model;
    bo.model_dir = model_dir;
    bo.dim = dim;
    bo.seed = seed;
    std::shared_ptr<const EmbeddingBackend> b = make_backend(bo);

    PipelineOptions po;
    po.stride = stride;
    po.normalize_embeddings = !no_normalize;
    po.corrupt_before_align = !corrupt_after_align;
    po.corrupt_aux = corrupt_aux;

    if (aligner == "landmarks") {
      if (landmarks_dir.empty()) {
        throw ValidationError("--aligner landmarks needs --landmarks-dir");
      }
      const fs::path dir = landmarks_dir;
      AlignerLookup lookup = [dir](const std::string& video_id) {
        auto detector = std::make_shared<LandmarkFileDetector>(dir / (video_id + ".json"));
        return std::make_shared<const LandmarkAligner>(std::move(detector));
      };
      return ImagePipeline(std::move(lookup), b, po, base_dir);
    }
    return ImagePipeline(std::make_shared<CenterCropAligner>(), b, po, base_dir);
  }

  ojson settings() const {
    return {{"backend", backend},   {"model", model},   {"model_dir", model_dir},
            {"dim", dim},           {"aligner", aligner}, {"landmarks_dir", landmarks_dir},
            {"stride", stride},     {"normalize", !no_normalize},
            {"corrupt_before_align", !corrupt_after_align}, {"corrupt_aux", corrupt_aux}};
  }
};

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string out;
  bool images = false;
  int identities = 10;
  int frames = 0;
  int dim = 64;
  double sigma_real = 0.02;
  double sigma_fake = 0.08;
  double flip_prob = -1;
  std::string fractions = "0.6,0.2,0.2";
  std::uint64_t seed = 0;
};

void run_synth(const SynthArgs& a, const Run& run) {
  const fs::path out = a.out;
  if (a.images) {
    SynthImageConfig cfg;
    cfg.identities = a.identities;
    if (a.frames > 0) cfg.frames = a.frames;
    if (a.flip_prob >= 0) cfg.flip_prob = a.flip_prob;
    cfg.fractions = parse_fractions(a.fractions);
    cfg.seed = a.seed;
    const Manifest m = write_synthetic_images(cfg, out);
    std::cerr << "wrote " << m.records.size() << " videos to " << out << "\n";
  } else {
    SynthConfig cfg;
    cfg.identities = a.identities;
    if (a.frames > 0) cfg.frames = a.frames;
    cfg.dim = a.dim;
    cfg.sigma_real = a.sigma_real;
    cfg.sigma_fake = a.sigma_fake;
    if (a.flip_prob >= 0) cfg.flip_prob = a.flip_prob;
    cfg.fractions = parse_fractions(a.fractions);
    cfg.seed = a.seed;
    const auto data = make_synthetic_dataset(cfg);
    write_synthetic_dataset(data, out);
    std::cerr << "wrote " << data.manifest.records.size() << " videos to " << out << "\n";
  }
  write_run_record(out, run,
                   {{"images", a.images}, {"identities", a.identities}, {"frames", a.frames},
                    {"dim", a.dim}, {"sigma_real", a.sigma_real},
                    {"sigma_fake", a.sigma_fake}, {"flip_prob", a.flip_prob},
                    {"fractions", a.fractions}, {"seed", a.seed}});
}

// ---- prepare ---------------------------------------------------------------

struct PrepareArgs {
  std::string records;
  std::string out;
  std::string fractions = "0.8,0.1,0.1";
  std::uint64_t seed = 0;
};

void run_prepare(const PrepareArgs& a, const Run& run) {
  auto records = load_records(a.records);
  const auto with_split = std::count_if(records.begin(), records.end(),
                                        [](const auto& r) { return r.split.has_value(); });
  if (with_split != 0 && static_cast<std::size_t>(with_split) != records.size()) {
    throw ValidationError("either every record or no record may carry a split");
  }
  const bool needs_pairing = std::any_of(records.begin(), records.end(),
                                         [](const auto& r) { return r.aux_image_path.empty(); });
  if (needs_pairing) records = pair_aux_images(std::move(records), a.seed);
  // Records that already carry splits are validated as given.
  const Manifest m = with_split ? build_manifest(std::move(records))
                                : make_identity_splits(std::move(records),
                                                       parse_fractions(a.fractions), a.seed);
  save_manifest(m, a.out);
  std::cerr << "wrote manifest with " << m.records.size() << " records to " << a.out << "\n";
  write_run_record(manifest_dir(a.out), run,
                   {{"records", a.records}, {"fractions", a.fractions}, {"seed", a.seed},
                    {"paired_aux", needs_pairing}, {"kept_splits", with_split != 0}});
}

// ---- embed -----------------------------------------------------------------

struct EmbedArgs {
  std::string manifest;
  std::string out;
  std::string corruption;
  int workers = 1;
  PipelineArgs pipeline;
};

void run_embed(const EmbedArgs& a, const Run& run) {
  const Manifest m = load_manifest(a.manifest);
  const ImagePipeline pipeline = a.pipeline.build(manifest_dir(a.manifest));
  std::optional<CorruptionSpec> spec;
  if (!a.corruption.empty()) spec = parse_corruption_spec(a.corruption, a.pipeline.seed);
  const fs::path out = a.out;
  fs::create_directories(out);
  detail::parallel_for(m.records.size(), a.workers, [&](std::size_t i) {
    const auto& rec = m.records[i];
    cache_write(pipeline.embed_record(rec, spec), out / (rec.video_id + ".emb"));
  });
  std::cerr << "embedded " << m.records.size() << " videos into " << out << "\n";
  auto settings = a.pipeline.settings();
  settings["manifest"] = a.manifest;
  settings["corruption"] = a.corruption;
  settings["seed"] = a.pipeline.seed;
  settings["workers"] = a.workers;
  write_run_record(out, run, settings);
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string cache_dir;
  std::string config;
  std::vector<std::string> overrides;
  std::string embedding_type;
  int sequence_length = 0;
  std::string sampling;
  int epochs = 0;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string out;
};

void run_train(const TrainArgs& a, const Run& run) {
  std::vector<std::string> overrides = a.overrides;
  if (!a.embedding_type.empty()) overrides.push_back("embedding_type=\"" + a.embedding_type + "\"");
  if (a.sequence_length > 0) {
    overrides.push_back("sampler.sequence_length=" + std::to_string(a.sequence_length));
  }
  if (!a.sampling.empty()) overrides.push_back("sampler.sampling_mode=\"" + a.sampling + "\"");
  if (a.epochs > 0) overrides.push_back("epochs=" + std::to_string(a.epochs));
  if (a.seed) overrides.push_back("seed=" + std::to_string(*a.seed));
  if (a.workers > 0) overrides.push_back("workers=" + std::to_string(a.workers));
  const TrainConfig cfg = load_train_config(a.config, overrides);

  const Manifest m = load_manifest(a.manifest);
  const CachedEmbeddings source(manifest_dir(a.manifest), a.cache_dir);
  const fs::path out = a.out;
  fs::create_directories(out);
  write_text(out / "config.json", to_json(cfg).dump(2) + "\n");

  std::ofstream metrics(out / "metrics.jsonl", std::ios::trunc);
  const auto result = train(m, source, cfg, [&](const EpochMetrics& e) {
    ojson row;
    row["epoch"] = e.epoch;
    row["loss"] = e.loss;
    row["loss_cls"] = e.loss_cls;
    row["loss_tri"] = e.loss_tri;
    row["loss_ap"] = e.loss_ap;
    row["val_auc"] = e.val_auc ? ojson(*e.val_auc) : ojson(nullptr);
    metrics << row.dump() << "\n" << std::flush;
    std::fprintf(stderr, "epoch %d  loss %.6f", e.epoch, e.loss);
    if (e.val_auc) std::fprintf(stderr, "  val_auc %.4f", *e.val_auc);
    std::fprintf(stderr, "\n");
  });
  save_checkpoint(result.best, out / "best.ckpt");
  save_checkpoint(result.last, out / "last.ckpt");
  std::cerr << "best checkpoint: epoch " << result.best.meta.epoch;
  if (result.best.meta.val_auc) std::cerr << ", VAL AUC " << *result.best.meta.val_auc;
  std::cerr << "\n";

  ojson settings;
  settings["manifest"] = a.manifest;
  settings["cache_dir"] = a.cache_dir;
  settings["config"] = to_json(cfg);
  settings["best_epoch"] = result.best.meta.epoch;
  settings["best_val_auc"] =
      result.best.meta.val_auc ? ojson(*result.best.meta.val_auc) : ojson(nullptr);
  write_run_record(out, run, settings);
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "TEST";
  std::string cache_dir;
  std::string out;
  std::string format;
  std::string corruption;
  std::vector<std::string> sweep;
  std::string table;
  int workers = 1;
  bool image_pipeline = false;
  PipelineArgs pipeline;
};

ReportFormat format_for(const std::string& format, const fs::path& out) {
  std::string text = format;
  if (text.empty()) {
    const auto ext = out.extension().string();
    text = ext == ".csv" ? "csv" : ext == ".md" ? "markdown" : ext == ".svg" ? "svg" : "json";
  }
  auto f = parse_report_format(text);
  if (!f) throw ValidationError("unknown report format '" + text + "'");
  return *f;
}

void run_eval(const EvalArgs& a, const Run& run) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Manifest m = load_manifest(a.manifest);
  const Split split = parse_split_or_throw(a.split);
  const fs::path base = manifest_dir(a.manifest);
  const CorruptionTable table =
      a.table.empty() ? CorruptionTable::builtin() : CorruptionTable::load(a.table);
  const ScoringOptions scoring = scoring_options(ckpt.meta, a.workers);

  const bool needs_images = a.image_pipeline || !a.corruption.empty() || !a.sweep.empty();
  EvalReport report;
  if (needs_images) {
    if (ckpt.meta.normalize_embeddings == a.pipeline.no_normalize) {
      throw ValidationError(ckpt.meta.normalize_embeddings
                                ? "checkpoint expects normalized embeddings; drop --no-normalize"
                                : "checkpoint expects raw embeddings; pass --no-normalize");
    }
    const ImagePipeline pipeline = a.pipeline.build(base);
    if (!a.sweep.empty()) {
      std::vector<CorruptionKind> kinds;
      for (const auto& k : a.sweep) {
        if (k == "all") {
          kinds.assign(kAllCorruptions.begin(), kAllCorruptions.end());
          continue;
        }
        auto kind = parse_corruption_kind(k);
        if (!kind) throw ValidationError("unknown corruption kind '" + k + "'");
        kinds.push_back(*kind);
      }
      report = robustness_sweep(ckpt.model, m, split, pipeline, kinds, scoring,
                                a.pipeline.seed, table);
    } else if (!a.corruption.empty()) {
      const auto source =
          pipeline.with_corruption(parse_corruption_spec(a.corruption, a.pipeline.seed), table);
      report = evaluate_checkpoint(ckpt, m, split, *source, a.workers);
    } else {
      report = evaluate_checkpoint(ckpt, m, split, pipeline, a.workers);
    }
  } else {
    const CachedEmbeddings source(base, a.cache_dir);
    report = evaluate_checkpoint(ckpt, m, split, source, a.workers);
  }

  std::fprintf(stderr, "%s AUC %.4f", a.split.c_str(), report.auc_overall);
  for (const auto& [type, value] : report.auc_by_fake_type) {
    std::fprintf(stderr, "  %s %.4f", std::string(to_string(type)).c_str(), value);
  }
  std::fprintf(stderr, "\n");

  if (a.out.empty()) {
    std::cout << render_report(report, format_for(a.format, "report.json"));
    return;
  }
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_report(report, format_for(a.format, out), out);
  auto settings = a.pipeline.settings();
  settings["checkpoint"] = a.checkpoint;
  settings["manifest"] = a.manifest;
  settings["split"] = a.split;
  settings["cache_dir"] = a.cache_dir;
  settings["corruption"] = a.corruption;
  settings["sweep"] = a.sweep;
  settings["image_pipeline"] = needs_images;
  settings["seed"] = a.pipeline.seed;
  settings["workers"] = a.workers;
  write_run_record(out.has_parent_path() ? out.parent_path() : fs::path("."), run, settings);
}

// ---- corrupt ---------------------------------------------------------------

struct CorruptArgs {
  std::string input;
  std::string out;
  std::string corruption;
  std::string table;
  std::uint64_t seed = 0;
};

void run_corrupt(const CorruptArgs& a) {
  const CorruptionTable table =
      a.table.empty() ? CorruptionTable::builtin() : CorruptionTable::load(a.table);
  const CorruptionSpec spec = parse_corruption_spec(a.corruption, a.seed);
  const fs::path in = a.input;
  const fs::path out = a.out;
  const auto ext = out.extension().string();
  if (!fs::is_directory(in) && (ext == ".png" || ext == ".jpg" || ext == ".bmp")) {
    write_image(out, apply(load_still(in, 0), spec, table));
    return;
  }
  const auto frames = corrupt_video(decode_frames(in), spec, table);
  fs::create_directories(out);
  for (const auto& f : frames) {
    char name[32];
    std::snprintf(name, sizeof name, "%06d.png", f.index);
    write_image(out / name, f.image);
  }
  std::cerr << "wrote " << frames.size() << " frames to " << out << "\n";
}

// ---- report ----------------------------------------------------------------

struct ReportArgs {
  std::string input;
  std::string out;
  std::string format = "markdown";
  std::string method = "Ours";
};

void run_report(const ReportArgs& a) {
  std::ifstream in(a.input);
  if (!in) throw InputError("cannot read report '" + a.input + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const EvalReport report = report_from_json(ss.str());
  auto format = parse_report_format(a.format);
  if (!format) throw ValidationError("unknown report format '" + a.format + "'");
  const std::string text = render_report(report, *format, a.method);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identity-sequence deepfake detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Run run;
  for (int i = 0; i < argc; ++i) run.argv.emplace_back(argv[i]);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic dataset");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_flag("--images", synth.images, "Render PNG frame folders instead of embeddings");
  c_synth->add_option("--identities", synth.identities)->capture_default_str();
  c_synth->add_option("--frames", synth.frames, "Frames per video (default 96, or 12 with --images)");
  c_synth->add_option("--dim", synth.dim)->capture_default_str();
  c_synth->add_option("--sigma-real", synth.sigma_real)->capture_default_str();
  c_synth->add_option("--sigma-fake", synth.sigma_fake)->capture_default_str();
  c_synth->add_option("--flip-prob", synth.flip_prob, "Identity flip probability of swap fakes");
  c_synth->add_option("--fractions", synth.fractions, "TRAIN,VAL,TEST identity fractions")
      ->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();

  PrepareArgs prepare;
  auto* c_prepare = app.add_subcommand(
      "prepare", "Pair registered images and split identities into a manifest");
  c_prepare->add_option("--records", prepare.records, "JSON-Lines records")->required();
  c_prepare->add_option("--out", prepare.out, "Output manifest")->required();
  c_prepare->add_option("--fractions", prepare.fractions)->capture_default_str();
  c_prepare->add_option("--seed", prepare.seed)->capture_default_str();

  EmbedArgs embed;
  auto* c_embed = app.add_subcommand("embed", "Extract identity vectors into a cache directory");
  c_embed->add_option("--manifest", embed.manifest)->required();
  c_embed->add_option("--out", embed.out, "Cache directory")->required();
  c_embed->add_option("--corruption", embed.corruption, "kind:severity");
  c_embed->add_option("--seed", embed.pipeline.seed)->capture_default_str();
  c_embed->add_option("--workers", embed.workers)->capture_default_str();
  embed.pipeline.add_to(c_embed);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the detector on cached embeddings");
  c_train->add_option("--manifest", tr.manifest)->required();
  c_train->add_option("--cache-dir", tr.cache_dir,
                      "Embedding cache directory (not needed when frames_path is .emb)");
  c_train->add_option("--config", tr.config, "JSON config file");
  c_train->add_option("--set", tr.overrides, "Config override key=value (repeatable)");
  c_train->add_option("--embedding-type", tr.embedding_type)
      ->check(CLI::IsMember({"tmp", "aux", "cat"}, CLI::ignore_case));
  c_train->add_option("--sequence-length", tr.sequence_length);
  c_train->add_option("--sampling", tr.sampling)
      ->check(CLI::IsMember({"sliding", "random", "sliding_window"}, CLI::ignore_case));
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--seed", tr.seed);
  c_train->add_option("--workers", tr.workers);
  c_train->add_option("--out", tr.out, "Run directory")->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score a split and write a report");
  c_eval->add_option("--checkpoint", ev.checkpoint)->required();
  c_eval->add_option("--manifest", ev.manifest)->required();
  c_eval->add_option("--split", ev.split)->capture_default_str();
  c_eval->add_option("--cache-dir", ev.cache_dir);
  c_eval->add_option("--out", ev.out, "Report file (stdout when omitted)");
  c_eval->add_option("--format", ev.format, "json, csv, markdown or svg (default from --out)");
  c_eval->add_option("--corruption", ev.corruption, "kind:severity, re-embeds from frames");
  c_eval->add_option("--sweep", ev.sweep, "Corruption kinds for a severity sweep, or 'all'");
  c_eval->add_option("--corruption-table", ev.table, "JSON corruption parameter table");
  c_eval->add_flag("--from-frames", ev.image_pipeline, "Embed frames instead of reading caches");
  c_eval->add_option("--seed", ev.pipeline.seed)->capture_default_str();
  c_eval->add_option("--workers", ev.workers)->capture_default_str();
  ev.pipeline.add_to(c_eval);

  CorruptArgs co;
  auto* c_corrupt = app.add_subcommand("corrupt", "Corrupt an image, frame folder or video");
  c_corrupt->add_option("--input", co.input)->required();
  c_corrupt->add_option("--out", co.out, "Image file, or directory for frame output")->required();
  c_corrupt->add_option("--corruption", co.corruption, "kind:severity")->required();
  c_corrupt->add_option("--corruption-table", co.table);
  c_corrupt->add_option("--seed", co.seed)->capture_default_str();

  ReportArgs rep;
  auto* c_report = app.add_subcommand("report", "Render a JSON report in another format");
  c_report->add_option("--input", rep.input)->required();
  c_report->add_option("--format", rep.format)->capture_default_str();
  c_report->add_option("--out", rep.out);
  c_report->add_option("--method", rep.method, "Row label for the AUC table")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_synth) {
      run.command = "synth";
      run_synth(synth, run);
    } else if (*c_prepare) {
      run.command = "prepare";
      run_prepare(prepare, run);
    } else if (*c_embed) {
      run.command = "embed";
      run_embed(embed, run);
    } else if (*c_train) {
      run.command = "train";
      run_train(tr, run);
    } else if (*c_eval) {
      run.command = "eval";
      run_eval(ev, run);
    } else if (*c_corrupt) {
      run_corrupt(co);
    } else if (*c_report) {
      run_report(rep);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
