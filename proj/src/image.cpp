#include "idseq/image.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cv_bridge.hpp"
#include "idseq/error.hpp"

namespace idseq {
namespace detail {

cv::Mat to_mat(const Image& image) {
  const int type = CV_8UC(image.channels);
  cv::Mat wrapped(image.height, image.width, type,
                  const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat out;
  if (image.channels == 3) {
    cv::cvtColor(wrapped, out, cv::COLOR_RGB2BGR);
  } else {
    out = wrapped.clone();
  }
  return out;
}

Image from_mat(const cv::Mat& mat) {
  if (mat.depth() != CV_8U) throw InputError("expected an 8-bit image");
  cv::Mat src = mat;
  if (mat.channels() == 4) {
    cv::cvtColor(mat, src, cv::COLOR_BGRA2BGR);
  }
  cv::Mat rgb;
  if (src.channels() == 3) {
    cv::cvtColor(src, rgb, cv::COLOR_BGR2RGB);
  } else {
    rgb = src.clone();
  }
  if (!rgb.isContinuous()) rgb = rgb.clone();
  Image out(rgb.rows, rgb.cols, rgb.channels());
  std::memcpy(out.pixels.data(), rgb.data, out.pixels.size());
  return out;
}

}  // namespace detail

Image decode_image(std::span<const std::uint8_t> encoded) {
  if (encoded.empty()) throw InputError("empty image buffer");
  cv::Mat buf(1, static_cast<int>(encoded.size()), CV_8U,
              const_cast<std::uint8_t*>(encoded.data()));
  cv::Mat mat;
  try {
    mat = cv::imdecode(buf, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw InputError(std::string("undecodable image: ") + e.what());
  }
  if (mat.empty()) throw InputError("undecodable image");
  return detail::from_mat(mat);
}

Image read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_image(bytes);
  } catch (const InputError& e) {
    throw InputError("'" + path.string() + "': " + e.what());
  }
}

void write_image(const std::filesystem::path& path, const Image& image) {
  cv::Mat mat = detail::to_mat(image);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw InputError("cannot write image '" + path.string() + "': " + e.what());
  }
  if (!ok) throw InputError("cannot write image '" + path.string() + "'");
}

}  // namespace idseq
