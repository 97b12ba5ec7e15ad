#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "idseq/image.hpp"

namespace idseq {

inline constexpr int kCropSize = 112;

/// Aligned 112x112x3 face crop.
struct FaceCrop {
  Image pixels;
  int source_frame_index = 0;
};

/// Throws ValidationError unless the crop is exactly 112x112x3.
void check_crop(const FaceCrop& crop);

struct Frame {
  Image image;
  int index = 0;
};

/// Decodes a video file or a directory of numbered image files, keeping
/// every `stride`-th frame (ceil(total / stride) frames, temporal order).
std::vector<Frame> decode_frames(const std::filesystem::path& source,
                                 int stride = 1);

/// Number of frames the source holds, without keeping them in memory.
std::size_t count_frames(const std::filesystem::path& source);

/// Single frame at `index` of a video/directory, or the image itself when the
/// path is an image file. Used for registered images.
Image load_still(const std::filesystem::path& source, int index = 0);

class FaceAligner {
 public:
  virtual ~FaceAligner() = default;
  virtual std::string name() const = 0;
  /// Returns std::nullopt when no face is found.
  virtual std::optional<FaceCrop> align(const Image& frame,
                                        int frame_index) const = 0;
};

/// Center square crop resized to 112x112. Used with synthetic fixtures where
/// the face already fills the frame. Uniform frames (no intensity variation)
/// count as NoFace. Stateless and safe for concurrent use.
class CenterCropAligner final : public FaceAligner {
 public:
  std::string name() const override { return "center"; }
  std::optional<FaceCrop> align(const Image& frame,
                                int frame_index) const override;
};

struct Point2 {
  float x = 0;
  float y = 0;
};

struct FaceDetection {
  // x, y, width, height
  std::array<float, 4> box{};
  /// Left eye, right eye, nose tip, left mouth corner, right mouth corner.
  std::array<Point2, 5> landmarks{};
  float score = 1.0f;
};

class LandmarkDetector {
 public:
  virtual ~LandmarkDetector() = default;
  virtual std::vector<FaceDetection> detect(const Image& frame,
                                            int frame_index) const = 0;
};

/// Replays detections produced by an external MTCNN-style detector. The file
/// is JSON: {"frames": {"<index>": [{"box": [x,y,w,h], "landmarks":
/// [[x,y] x5], "score": s}, ...]}}. Frames without an entry have no face.
class LandmarkFileDetector final : public LandmarkDetector {
 public:
  explicit LandmarkFileDetector(const std::filesystem::path& path);
  std::vector<FaceDetection> detect(const Image& frame,
                                    int frame_index) const override;

 private:
  std::vector<std::pair<int, std::vector<FaceDetection>>> frames_;
};

/// Standard 5-point template for 112x112 recognition crops.
inline constexpr std::array<Point2, 5> kArcFaceTemplate = {{
    {38.2946f, 51.6963f},
    {73.5318f, 51.5014f},
    {56.0252f, 71.7366f},
    {41.5493f, 92.3655f},
    {70.7299f, 92.2041f},
}};

/// Similarity transform of the largest detected face onto kArcFaceTemplate.
class LandmarkAligner final : public FaceAligner {
 public:
  explicit LandmarkAligner(std::shared_ptr<const LandmarkDetector> detector);
  std::string name() const override { return "landmarks"; }
  std::optional<FaceCrop> align(const Image& frame,
                                int frame_index) const override;

 private:
  std::shared_ptr<const LandmarkDetector> detector_;
};

/// 2x3 row-major similarity transform mapping `src` onto `dst` (least squares).
std::array<double, 6> estimate_similarity(const std::array<Point2, 5>& src,
                                          const std::array<Point2, 5>& dst);

std::optional<FaceCrop> align_and_crop(const Image& frame, int frame_index,
                                       const FaceAligner& aligner);

}  // namespace idseq
