#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "idseq/preprocess.hpp"

namespace idseq {

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct IdentityVector {
  Eigen::VectorXf values;
  std::string backend_id;
};

/// Per-frame identity vectors of one video plus its registered image.
struct EmbeddingSequence {
  std::string video_id;
  std::string backend_id;
  RowMatrixF frames;  // length x dim
  Eigen::VectorXf aux;

  Eigen::Index length() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
  bool operator==(const EmbeddingSequence& o) const {
    return video_id == o.video_id && backend_id == o.backend_id &&
           frames.rows() == o.frames.rows() && frames.cols() == o.frames.cols() &&
           frames == o.frames && aux.size() == o.aux.size() && aux == o.aux;
  }
};

/// Rows `indices` of the sequence, aux unchanged.
EmbeddingSequence select_frames(const EmbeddingSequence& seq,
                                const std::vector<int>& indices);

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  /// Raw (unnormalized) features of one crop.
  virtual Eigen::VectorXf embed(const FaceCrop& crop) const = 0;
};

/// (identity seed, frame index, jitter, rng seed) -> unit vector: a fixed
/// direction per identity plus isotropic Gaussian jitter, renormalized. The
/// crop's pixels are ignored; only source_frame_index matters.
class SyntheticBackend final : public EmbeddingBackend {
 public:
  SyntheticBackend(std::string identity_seed, double jitter,
                   std::uint64_t rng_seed, int dim = 512);

  std::string id() const override { return "synthetic"; }
  int dim() const override { return dim_; }
  Eigen::VectorXf embed(const FaceCrop& crop) const override;

  Eigen::VectorXf vector_at(int frame_index) const;
  static Eigen::VectorXf base_direction(const std::string& identity_seed,
                                        int dim);

 private:
  std::string identity_seed_;
  double jitter_;
  std::uint64_t rng_seed_;
  int dim_;
  Eigen::VectorXf base_;
};

/// Fixed random projection of a downsampled, standardized crop. Has no
/// recognition ability beyond pixel similarity; stands in for a trained
/// network in hermetic pipeline tests where corruptions must reach the
/// features.
class PixelProjectionBackend final : public EmbeddingBackend {
 public:
  explicit PixelProjectionBackend(int dim = 64, std::uint64_t seed = 0,
                                  int grid = 16);
  std::string id() const override { return "pixel-projection"; }
  int dim() const override { return dim_; }
  Eigen::VectorXf embed(const FaceCrop& crop) const override;

 private:
  int dim_;
  int grid_;
  Eigen::MatrixXf projection_;
};

/// Pretrained recognition network loaded from an ONNX file through OpenCV's
/// DNN module. Input 1x3x112x112, pixels scaled to [-1, 1].
class OnnxBackend final : public EmbeddingBackend {
 public:
  OnnxBackend(std::string backend_id, const std::filesystem::path& model,
              bool bgr_input);
  ~OnnxBackend() override;
  std::string id() const override { return backend_id_; }
  int dim() const override { return dim_; }
  Eigen::VectorXf embed(const FaceCrop& crop) const override;

 private:
  struct Impl;
  std::string backend_id_;
  bool bgr_input_;
  int dim_ = 0;
  std::unique_ptr<Impl> impl_;
  mutable std::mutex mutex_;  // cv::dnn::Net::forward is not reentrant
};

struct PretrainedSlot {
  std::string id;
  std::string description;
  bool bgr_input;
};

/// Recognition backbones with published weights. The first entry is the
/// default.
const std::vector<PretrainedSlot>& pretrained_slots();

struct BackendOptions {
  std::string id = "webface12m_r100_adaface";
  /// ONNX file for pretrained slots. Defaults to <model_dir>/<id>.onnx.
  std::filesystem::path model_path;
  std::filesystem::path model_dir = "models";
  int dim = 64;
  std::uint64_t seed = 0;
  // synthetic backend only
  std::string identity_seed;
  double jitter = 0.0;
};

std::unique_ptr<EmbeddingBackend> make_backend(const BackendOptions& options);

/// Unit-norm identity vector. Backend failures and non-finite output become
/// ExtractionError naming the backend.
IdentityVector extract(const FaceCrop& crop, const EmbeddingBackend& backend,
                       bool normalize = true);

/// Throws ValidationError on fewer than 2 frames or mixed backends/dims.
EmbeddingSequence assemble_sequence(std::string video_id,
                                    const std::vector<IdentityVector>& frames,
                                    const IdentityVector& aux);

EmbeddingSequence extract_video(std::string video_id,
                                const std::vector<FaceCrop>& crops,
                                const FaceCrop& aux,
                                const EmbeddingBackend& backend,
                                bool normalize = true);

}  // namespace idseq
