#include "idseq/embedder.hpp"

#include <cmath>
#include <opencv2/dnn.hpp>
#include <opencv2/imgproc.hpp>

#include "cv_bridge.hpp"
#include "idseq/error.hpp"
#include "idseq/rng.hpp"

namespace idseq {

EmbeddingSequence select_frames(const EmbeddingSequence& seq,
                                const std::vector<int>& indices) {
  EmbeddingSequence out;
  out.video_id = seq.video_id;
  out.backend_id = seq.backend_id;
  out.aux = seq.aux;
  out.frames.resize(static_cast<Eigen::Index>(indices.size()), seq.dim());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int row = indices[i];
    if (row < 0 || row >= seq.length()) {
      throw ValidationError("frame index " + std::to_string(row) +
                            " out of range for '" + seq.video_id + "'");
    }
    out.frames.row(static_cast<Eigen::Index>(i)) = seq.frames.row(row);
  }
  return out;
}

// --- synthetic -------------------------------------------------------------

Eigen::VectorXf SyntheticBackend::base_direction(const std::string& identity_seed,
                                                 int dim) {
  Rng rng(stable_hash(identity_seed));
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  v.normalize();
  return v.cast<float>();
}

SyntheticBackend::SyntheticBackend(std::string identity_seed, double jitter,
                                   std::uint64_t rng_seed, int dim)
    : identity_seed_(std::move(identity_seed)),
      jitter_(jitter),
      rng_seed_(rng_seed),
      dim_(dim) {
  if (dim_ < 1) throw ValidationError("embedding dim must be >= 1");
  if (jitter_ < 0) throw ValidationError("jitter must be >= 0");
  base_ = base_direction(identity_seed_, dim_);
}

Eigen::VectorXf SyntheticBackend::vector_at(int frame_index) const {
  Eigen::VectorXd v = base_.cast<double>();
  if (jitter_ > 0) {
    Rng rng(mix_seed(rng_seed_ ^ stable_hash(identity_seed_),
                     static_cast<std::uint64_t>(frame_index)));
    for (int i = 0; i < dim_; ++i) v[i] += jitter_ * rng.normal();
  }
  v.normalize();
  return v.cast<float>();
}

Eigen::VectorXf SyntheticBackend::embed(const FaceCrop& crop) const {
  return vector_at(crop.source_frame_index);
}

// --- pixel projection --------------------------------------------------------

PixelProjectionBackend::PixelProjectionBackend(int dim, std::uint64_t seed,
                                               int grid)
    : dim_(dim), grid_(grid) {
  if (dim_ < 1 || grid_ < 1) {
    throw ValidationError("pixel-projection needs positive dim and grid");
  }
  const int inputs = grid_ * grid_ * 3;
  Rng rng(mix_seed(seed, 0x70697865ULL));
  projection_.resize(dim_, inputs);
  const double scale = 1.0 / std::sqrt(static_cast<double>(inputs));
  for (int r = 0; r < dim_; ++r) {
    for (int c = 0; c < inputs; ++c) {
      projection_(r, c) = static_cast<float>(rng.normal() * scale);
    }
  }
}

Eigen::VectorXf PixelProjectionBackend::embed(const FaceCrop& crop) const {
  cv::Mat mat = detail::to_mat(crop.pixels);
  cv::Mat small;
  cv::resize(mat, small, cv::Size(grid_, grid_), 0, 0, cv::INTER_AREA);
  Eigen::VectorXf x(grid_ * grid_ * 3);
  for (int y = 0; y < grid_; ++y) {
    for (int xx = 0; xx < grid_; ++xx) {
      const auto& px = small.at<cv::Vec3b>(y, xx);
      for (int c = 0; c < 3; ++c) {
        x[(y * grid_ + xx) * 3 + c] = static_cast<float>(px[c]);
      }
    }
  }
  const float mean = x.mean();
  x.array() -= mean;
  const float sd = std::sqrt(x.squaredNorm() / static_cast<float>(x.size()));
  if (sd > 0) x /= sd;
  return projection_ * x;
}

// --- ONNX ------------------------------------------------------------------

struct OnnxBackend::Impl {
  cv::dnn::Net net;
};

namespace {

cv::Mat crop_blob(const Image& pixels, bool bgr) {
  cv::Mat mat = detail::to_mat(pixels);  // BGR
  return cv::dnn::blobFromImage(mat, 1.0 / 127.5, cv::Size(kCropSize, kCropSize),
                                cv::Scalar(127.5, 127.5, 127.5),
                                /*swapRB=*/!bgr, /*crop=*/false, CV_32F);
}

}  // namespace

OnnxBackend::OnnxBackend(std::string backend_id,
                         const std::filesystem::path& model, bool bgr_input)
    : backend_id_(std::move(backend_id)),
      bgr_input_(bgr_input),
      impl_(std::make_unique<Impl>()) {
  if (!std::filesystem::exists(model)) {
    throw ExtractionError("backend '" + backend_id_ + "': model file '" +
                          model.string() + "' not found");
  }
  try {
    impl_->net = cv::dnn::readNetFromONNX(model.string());
    FaceCrop probe{Image(kCropSize, kCropSize, 3, 127), 0};
    impl_->net.setInput(crop_blob(probe.pixels, bgr_input_));
    cv::Mat out = impl_->net.forward();
    dim_ = static_cast<int>(out.total());
  } catch (const cv::Exception& e) {
    throw ExtractionError("backend '" + backend_id_ + "': " + e.what());
  }
  if (dim_ < 1) {
    throw ExtractionError("backend '" + backend_id_ + "': empty model output");
  }
}

OnnxBackend::~OnnxBackend() = default;

Eigen::VectorXf OnnxBackend::embed(const FaceCrop& crop) const {
  std::lock_guard lock(mutex_);
  impl_->net.setInput(crop_blob(crop.pixels, bgr_input_));
  cv::Mat out = impl_->net.forward();
  cv::Mat flat = out.reshape(1, 1);
  Eigen::VectorXf v(static_cast<Eigen::Index>(flat.total()));
  for (int i = 0; i < v.size(); ++i) v[i] = flat.at<float>(0, i);
  return v;
}

const std::vector<PretrainedSlot>& pretrained_slots() {
  static const std::vector<PretrainedSlot> slots = {
      {"webface12m_r100_adaface", "WebFace12M / ResNet100 / AdaFace", true},
      {"ms1mv2_r100_adaface", "MS1MV2 / ResNet100 / AdaFace", true},
      {"ms1mv2_r100_arcface", "MS1MV2 / ResNet100 / ArcFace", false},
  };
  return slots;
}

std::unique_ptr<EmbeddingBackend> make_backend(const BackendOptions& options) {
  if (options.id == "synthetic") {
    return std::make_unique<SyntheticBackend>(options.identity_seed,
                                              options.jitter, options.seed,
                                              options.dim);
  }
  if (options.id == "pixel-projection") {
    return std::make_unique<PixelProjectionBackend>(options.dim, options.seed);
  }
  for (const auto& slot : pretrained_slots()) {
    if (slot.id == options.id) {
      auto path = options.model_path.empty()
                      ? options.model_dir / (slot.id + ".onnx")
                      : options.model_path;
      return std::make_unique<OnnxBackend>(slot.id, path, slot.bgr_input);
    }
  }
  if (options.id == "onnx") {
    return std::make_unique<OnnxBackend>("onnx", options.model_path, false);
  }
  throw ValidationError("unknown embedding backend '" + options.id + "'");
}

IdentityVector extract(const FaceCrop& crop, const EmbeddingBackend& backend,
                       bool normalize) {
  check_crop(crop);
  Eigen::VectorXf v;
  try {
    v = backend.embed(crop);
  } catch (const ExtractionError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExtractionError("backend '" + backend.id() + "': " + e.what());
  }
  if (v.size() != backend.dim()) {
    throw ExtractionError("backend '" + backend.id() + "' returned dim " +
                          std::to_string(v.size()) + ", expected " +
                          std::to_string(backend.dim()));
  }
  if (!v.allFinite()) {
    throw ExtractionError("backend '" + backend.id() + "' returned non-finite values");
  }
  if (normalize) {
    const double norm = v.cast<double>().norm();
    if (norm == 0.0) {
      throw ExtractionError("backend '" + backend.id() + "' returned a zero vector");
    }
    v = (v.cast<double>() / norm).cast<float>();
  }
  return {std::move(v), backend.id()};
}

EmbeddingSequence assemble_sequence(std::string video_id,
                                    const std::vector<IdentityVector>& frames,
                                    const IdentityVector& aux) {
  if (frames.size() < 2) {
    throw ValidationError("video '" + video_id + "' needs at least 2 frames, got " +
                          std::to_string(frames.size()));
  }
  const auto& first = frames.front();
  EmbeddingSequence seq;
  seq.video_id = std::move(video_id);
  seq.backend_id = first.backend_id;
  seq.frames.resize(static_cast<Eigen::Index>(frames.size()), first.values.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.backend_id != first.backend_id || f.values.size() != first.values.size()) {
      throw ValidationError("frame " + std::to_string(i) + " of '" + seq.video_id +
                            "' comes from backend '" + f.backend_id + "' (dim " +
                            std::to_string(f.values.size()) + "), expected '" +
                            first.backend_id + "'");
    }
    seq.frames.row(static_cast<Eigen::Index>(i)) = f.values.transpose();
  }
  if (aux.backend_id != first.backend_id || aux.values.size() != first.values.size()) {
    throw ValidationError("auxiliary vector of '" + seq.video_id +
                          "' comes from backend '" + aux.backend_id +
                          "', expected '" + first.backend_id + "'");
  }
  seq.aux = aux.values;
  return seq;
}

EmbeddingSequence extract_video(std::string video_id,
                                const std::vector<FaceCrop>& crops,
                                const FaceCrop& aux,
                                const EmbeddingBackend& backend,
                                bool normalize) {
  if (crops.size() < 2) {
    throw ValidationError("video '" + video_id + "' needs at least 2 crops, got " +
                          std::to_string(crops.size()));
  }
  std::vector<IdentityVector> vectors;
  vectors.reserve(crops.size());
  for (std::size_t i = 0; i < crops.size(); ++i) {
    try {
      vectors.push_back(extract(crops[i], backend, normalize));
    } catch (const ExtractionError& e) {
      throw ExtractionError("frame " + std::to_string(i) + ": " + e.what());
    }
  }
  IdentityVector aux_vec;
  try {
    aux_vec = extract(aux, backend, normalize);
  } catch (const ExtractionError& e) {
    throw ExtractionError(std::string("auxiliary image: ") + e.what());
  }
  return assemble_sequence(std::move(video_id), vectors, aux_vec);
}

}  // namespace idseq
