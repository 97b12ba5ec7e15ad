#pragma once

#include <opencv2/core.hpp>

#include "idseq/image.hpp"

namespace idseq::detail {

/// Deep copies between Image (RGB) and cv::Mat (BGR for 3 channels).
cv::Mat to_mat(const Image& image);
Image from_mat(const cv::Mat& mat);

}  // namespace idseq::detail
