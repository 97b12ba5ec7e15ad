#include "idseq/preprocess.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <fstream>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "cv_bridge.hpp"
#include "idseq/error.hpp"
#include "json.hpp"

namespace idseq {
namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" ||
         ext == ".ppm" || ext == ".pgm" || ext == ".tif" || ext == ".tiff";
}

/// Orders "frame2.png" before "frame10.png".
bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) &&
        std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      na.erase(0, std::min(na.find_first_not_of('0'), na.size()));
      nb.erase(0, std::min(nb.find_first_not_of('0'), nb.size()));
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

std::vector<fs::path> list_frame_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return natural_less(a.filename().string(), b.filename().string());
  });
  return files;
}

cv::VideoCapture open_video(const fs::path& source) {
  cv::VideoCapture cap;
  try {
    cap.open(source.string());
  } catch (const cv::Exception& e) {
    throw InputError("cannot open video '" + source.string() + "': " + e.what());
  }
  if (!cap.isOpened()) {
    throw InputError("cannot open video '" + source.string() + "'");
  }
  return cap;
}

}  // namespace

void check_crop(const FaceCrop& crop) {
  const Image& img = crop.pixels;
  if (img.height != kCropSize || img.width != kCropSize || img.channels != 3 ||
      img.pixels.size() != static_cast<std::size_t>(kCropSize) * kCropSize * 3) {
    throw ValidationError("face crop must be 112x112x3, got " +
                          std::to_string(img.height) + "x" +
                          std::to_string(img.width) + "x" +
                          std::to_string(img.channels));
  }
  if (crop.source_frame_index < 0) {
    throw ValidationError("negative source_frame_index");
  }
}

std::vector<Frame> decode_frames(const fs::path& source, int stride) {
  if (stride < 1) throw ValidationError("stride must be >= 1");
  if (!fs::exists(source)) {
    throw InputError("frame source '" + source.string() + "' does not exist");
  }
  std::vector<Frame> frames;
  if (fs::is_directory(source)) {
    const auto files = list_frame_files(source);
    for (std::size_t i = 0; i < files.size(); i += static_cast<std::size_t>(stride)) {
      frames.push_back({read_image(files[i]), static_cast<int>(i)});
    }
    return frames;
  }
  if (is_image_file(source)) {
    frames.push_back({read_image(source), 0});
    return frames;
  }
  cv::VideoCapture cap = open_video(source);
  cv::Mat mat;
  for (int i = 0; cap.read(mat); ++i) {
    if (i % stride == 0) frames.push_back({detail::from_mat(mat), i});
  }
  if (frames.empty()) {
    throw InputError("no decodable frames in '" + source.string() + "'");
  }
  return frames;
}

std::size_t count_frames(const fs::path& source) {
  if (!fs::exists(source)) {
    throw InputError("frame source '" + source.string() + "' does not exist");
  }
  if (fs::is_directory(source)) return list_frame_files(source).size();
  if (is_image_file(source)) return 1;
  cv::VideoCapture cap = open_video(source);
  std::size_t n = 0;
  while (cap.grab()) ++n;
  return n;
}

Image load_still(const fs::path& source, int index) {
  if (!fs::exists(source)) {
    throw InputError("image source '" + source.string() + "' does not exist");
  }
  if (fs::is_directory(source)) {
    const auto files = list_frame_files(source);
    if (index < 0 || static_cast<std::size_t>(index) >= files.size()) {
      throw InputError("frame " + std::to_string(index) + " not in '" +
                       source.string() + "'");
    }
    return read_image(files[static_cast<std::size_t>(index)]);
  }
  if (is_image_file(source)) return read_image(source);
  cv::VideoCapture cap = open_video(source);
  cv::Mat mat;
  for (int i = 0; cap.read(mat); ++i) {
    if (i == index) return detail::from_mat(mat);
  }
  throw InputError("frame " + std::to_string(index) + " not in '" +
                   source.string() + "'");
}

std::optional<FaceCrop> CenterCropAligner::align(const Image& frame,
                                                 int frame_index) const {
  if (frame.empty()) throw InputError("empty frame");
  auto [lo, hi] = std::minmax_element(frame.pixels.begin(), frame.pixels.end());
  if (*lo == *hi) return std::nullopt;

  if (frame.height == kCropSize && frame.width == kCropSize && frame.channels == 3) {
    return FaceCrop{frame, frame_index};
  }
  cv::Mat mat = detail::to_mat(frame);
  if (mat.channels() == 1) cv::cvtColor(mat, mat, cv::COLOR_GRAY2BGR);
  const int side = std::min(mat.rows, mat.cols);
  cv::Rect roi((mat.cols - side) / 2, (mat.rows - side) / 2, side, side);
  cv::Mat resized;
  cv::resize(mat(roi), resized, cv::Size(kCropSize, kCropSize), 0, 0,
             side > kCropSize ? cv::INTER_AREA : cv::INTER_LINEAR);
  return FaceCrop{detail::from_mat(resized), frame_index};
}

LandmarkFileDetector::LandmarkFileDetector(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open landmark file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
    for (const auto& [key, dets] : doc.at("frames").items()) {
      std::vector<FaceDetection> list;
      for (const auto& d : dets) {
        FaceDetection det;
        for (int k = 0; k < 4; ++k) det.box[k] = d.at("box").at(k).get<float>();
        for (int k = 0; k < 5; ++k) {
          det.landmarks[k] = {d.at("landmarks").at(k).at(0).get<float>(),
                              d.at("landmarks").at(k).at(1).get<float>()};
        }
        det.score = d.value("score", 1.0f);
        list.push_back(det);
      }
      frames_.emplace_back(std::stoi(key), std::move(list));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("landmark file '" + path.string() + "': " + e.what());
  }
  std::sort(frames_.begin(), frames_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
}

std::vector<FaceDetection> LandmarkFileDetector::detect(const Image&,
                                                        int frame_index) const {
  auto it = std::lower_bound(
      frames_.begin(), frames_.end(), frame_index,
      [](const auto& entry, int idx) { return entry.first < idx; });
  if (it == frames_.end() || it->first != frame_index) return {};
  return it->second;
}

std::array<double, 6> estimate_similarity(const std::array<Point2, 5>& src,
                                          const std::array<Point2, 5>& dst) {
  Eigen::Matrix<double, 2, 5> s, d;
  for (int i = 0; i < 5; ++i) {
    s(0, i) = src[i].x;
    s(1, i) = src[i].y;
    d(0, i) = dst[i].x;
    d(1, i) = dst[i].y;
  }
  const Eigen::Matrix3d t = Eigen::umeyama(s, d, /*with_scaling=*/true);
  return {t(0, 0), t(0, 1), t(0, 2), t(1, 0), t(1, 1), t(1, 2)};
}

LandmarkAligner::LandmarkAligner(std::shared_ptr<const LandmarkDetector> detector)
    : detector_(std::move(detector)) {
  if (!detector_) throw ValidationError("landmark aligner needs a detector");
}

std::optional<FaceCrop> LandmarkAligner::align(const Image& frame,
                                               int frame_index) const {
  if (frame.empty()) throw InputError("empty frame");
  const auto detections = detector_->detect(frame, frame_index);
  if (detections.empty()) return std::nullopt;
  const auto largest = std::max_element(
      detections.begin(), detections.end(),
      [](const FaceDetection& a, const FaceDetection& b) {
        return a.box[2] * a.box[3] < b.box[2] * b.box[3];
      });
  const auto t = estimate_similarity(largest->landmarks, kArcFaceTemplate);
  cv::Mat affine = (cv::Mat_<double>(2, 3) << t[0], t[1], t[2], t[3], t[4], t[5]);
  cv::Mat mat = detail::to_mat(frame);
  if (mat.channels() == 1) cv::cvtColor(mat, mat, cv::COLOR_GRAY2BGR);
  cv::Mat warped;
  cv::warpAffine(mat, warped, affine, cv::Size(kCropSize, kCropSize),
                 cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar(0, 0, 0));
  return FaceCrop{detail::from_mat(warped), frame_index};
}

std::optional<FaceCrop> align_and_crop(const Image& frame, int frame_index,
                                       const FaceAligner& aligner) {
  auto crop = aligner.align(frame, frame_index);
  if (crop) check_crop(*crop);
  return crop;
}

}  // namespace idseq
