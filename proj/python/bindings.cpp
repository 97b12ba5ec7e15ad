#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "idseq/config.hpp"
#include "idseq/corrupt.hpp"
#include "idseq/error.hpp"
#include "idseq/evaluation.hpp"
#include "idseq/losses.hpp"
#include "idseq/synth.hpp"
#include "idseq/trainer.hpp"

namespace py = pybind11;
using namespace idseq;
namespace fs = std::filesystem;

namespace {

EmbeddingSequence make_sequence(const RowMatrixF& frames, const Eigen::VectorXf& aux) {
  EmbeddingSequence seq;
  seq.video_id = "array";
  seq.backend_id = "array";
  seq.frames = frames;
  seq.aux = aux;
  return seq;
}

DiffKind diff_kind(const std::string& text) {
  auto kind = parse_diff_kind(text);
  if (!kind) throw ValidationError("unknown embedding type '" + text + "'");
  return *kind;
}

Split split_of(const std::string& text) {
  auto split = parse_split(text);
  if (!split) throw ValidationError("unknown split '" + text + "'");
  return *split;
}

Image to_image(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ValidationError("image must be HxW or HxWxC");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(h, w, c);
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

py::array_t<std::uint8_t> from_image(const Image& img) {
  std::vector<py::ssize_t> shape = {img.height, img.width};
  if (img.channels != 1) shape.push_back(img.channels);
  py::array_t<std::uint8_t> out(shape);
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

std::unique_ptr<EmbeddingSource> source_for(const fs::path& manifest,
                                            const fs::path& cache_dir) {
  return std::make_unique<CachedEmbeddings>(manifest.parent_path(), cache_dir);
}

}  // namespace

PYBIND11_MODULE(_idseq, m) {
  m.doc() = "Identity-sequence deepfake detection core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ExtractionError>(m, "ExtractionError", PyExc_RuntimeError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  // Differencing. Frames are (length, dim) float32, aux is (dim,).
  m.def("tdc", [](const RowMatrixF& frames) {
    return tdc_sequence(make_sequence(frames, Eigen::VectorXf())).steps;
  }, py::arg("frames"));
  m.def("adc", [](const RowMatrixF& frames, const Eigen::VectorXf& aux) {
    return adc_sequence(make_sequence(frames, aux)).steps;
  }, py::arg("frames"), py::arg("aux"));
  m.def("difference_sequence",
        [](const RowMatrixF& frames, const Eigen::VectorXf& aux, const std::string& kind) {
          return difference_sequence(make_sequence(frames, aux), diff_kind(kind)).steps;
        },
        py::arg("frames"), py::arg("aux"), py::arg("kind") = "cat");

  m.def("triplet_loss", &triplet_loss, py::arg("anchor"), py::arg("positive"),
        py::arg("negative"), py::arg("margin") = 0.2);
  m.def("anchor_positive_loss", &anchor_positive_loss, py::arg("anchor"), py::arg("positive"));
  m.def("classification_loss", &classification_loss, py::arg("label"), py::arg("probs"));
  m.def("total_loss", &total_loss, py::arg("cls"), py::arg("tri"), py::arg("ap"),
        py::arg("lambda1") = 1.0, py::arg("lambda2") = 0.1);

  m.def("auc", [](const std::vector<double>& fakes, const std::vector<double>& reals) {
    return auc(fakes, reals);
  }, py::arg("fakes"), py::arg("reals"));

  m.def("corrupt",
        [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> image,
           const std::string& kind, int severity, std::uint64_t seed) {
          auto parsed = parse_corruption_kind(kind);
          if (!parsed) throw ValidationError("unknown corruption kind '" + kind + "'");
          return from_image(apply(to_image(image), {*parsed, severity, seed}));
        },
        py::arg("image"), py::arg("kind"), py::arg("severity"), py::arg("seed") = 0);

  m.def("make_synthetic",
        [](const fs::path& out, int identities, int frames, int dim, double sigma_real,
           double sigma_fake, std::uint64_t seed) {
          SynthConfig cfg;
          cfg.identities = identities;
          cfg.frames = frames;
          cfg.dim = dim;
          cfg.sigma_real = sigma_real;
          cfg.sigma_fake = sigma_fake;
          cfg.seed = seed;
          write_synthetic_dataset(make_synthetic_dataset(cfg), out);
          return out / "manifest.jsonl";
        },
        py::arg("out"), py::arg("identities") = 10, py::arg("frames") = 96,
        py::arg("dim") = 64, py::arg("sigma_real") = 0.02, py::arg("sigma_fake") = 0.08,
        py::arg("seed") = 0);

  m.def("serialize_manifest", [](const fs::path& path) {
    return serialize_manifest(load_manifest(path));
  }, py::arg("path"));

  m.def("default_train_config", [] { return to_json(TrainConfig{}).dump(); });

  // Trains on cached embeddings and writes best.ckpt / last.ckpt into out.
  // Returns the per-epoch log as a list of dicts.
  m.def("train",
        [](const fs::path& manifest_path, const fs::path& out, const std::string& config_json,
           const std::vector<std::string>& overrides, const fs::path& cache_dir,
           const std::function<void(py::dict)>& on_epoch) {
          nlohmann::json doc = nlohmann::json::object();
          if (!config_json.empty()) {
            try {
              doc = nlohmann::json::parse(config_json);
            } catch (const nlohmann::json::exception& e) {
              throw ValidationError(std::string("config: ") + e.what());
            }
          }
          for (const auto& o : overrides) apply_override(doc, o);
          const TrainConfig cfg = train_config_from_json(doc);
          const Manifest manifest = load_manifest(manifest_path);
          const auto source = source_for(manifest_path, cache_dir);
          auto to_dict = [](const EpochMetrics& e) {
            py::dict d;
            d["epoch"] = e.epoch;
            d["loss"] = e.loss;
            d["loss_cls"] = e.loss_cls;
            d["loss_tri"] = e.loss_tri;
            d["loss_ap"] = e.loss_ap;
            d["val_auc"] = e.val_auc ? py::cast(*e.val_auc) : py::none();
            return d;
          };
          TrainResult result;
          {
            // Training runs without the GIL; the callback re-acquires it.
            py::gil_scoped_release release;
            result = train(manifest, *source, cfg, [&](const EpochMetrics& e) {
              if (!on_epoch) return;
              py::gil_scoped_acquire acquire;
              on_epoch(to_dict(e));
            });
          }
          fs::create_directories(out);
          save_checkpoint(result.best, out / "best.ckpt");
          save_checkpoint(result.last, out / "last.ckpt");
          py::list log;
          for (const auto& e : result.log) log.append(to_dict(e));
          return log;
        },
        py::arg("manifest"), py::arg("out"), py::arg("config_json") = "",
        py::arg("overrides") = std::vector<std::string>{}, py::arg("cache_dir") = fs::path(),
        py::arg("on_epoch") = nullptr);

  // Report as JSON text.
  m.def("evaluate",
        [](const fs::path& checkpoint, const fs::path& manifest_path, const std::string& split,
           const fs::path& cache_dir, int workers) {
          const Checkpoint ckpt = load_checkpoint(checkpoint);
          const Manifest manifest = load_manifest(manifest_path);
          const auto source = source_for(manifest_path, cache_dir);
          py::gil_scoped_release release;
          const auto report =
              evaluate_checkpoint(ckpt, manifest, split_of(split), *source, workers);
          return render_report(report, ReportFormat::kJson);
        },
        py::arg("checkpoint"), py::arg("manifest"), py::arg("split") = "TEST",
        py::arg("cache_dir") = fs::path(), py::arg("workers") = 1);

  m.def("render_report",
        [](const std::string& report_json, const std::string& format, const std::string& method) {
          auto f = parse_report_format(format);
          if (!f) throw ValidationError("unknown report format '" + format + "'");
          return render_report(report_from_json(report_json), *f, method);
        },
        py::arg("report_json"), py::arg("format") = "markdown", py::arg("method") = "Ours");

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def_property_readonly("meta_json", [](const Checkpoint& c) { return to_json(c.meta).dump(); })
      .def_property_readonly("parameter_count",
                             [](const Checkpoint& c) { return c.model.params().parameter_count(); })
      .def("score",
           [](const Checkpoint& c, const RowMatrixF& frames, const Eigen::VectorXf& aux) {
             if (frames.cols() != c.meta.embedding_dim) {
               throw ValidationError("frames have dim " + std::to_string(frames.cols()) +
                                     ", checkpoint expects " +
                                     std::to_string(c.meta.embedding_dim));
             }
             return score_embeddings(c.model, make_sequence(frames, aux), scoring_options(c.meta));
           },
           py::arg("frames"), py::arg("aux"),
           "P(FAKE) for one video given its frame embeddings and registered vector.");
}
