#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "idseq/embedder.hpp"
#include "idseq/image.hpp"
#include "idseq/rng.hpp"

namespace idseq::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("idseq_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Image gradient_image(int h, int w, int seed = 0) {
  Image img(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = static_cast<std::uint8_t>((x * 2 + seed) % 256);
      img.at(y, x, 1) = static_cast<std::uint8_t>((y * 2 + 3 * seed) % 256);
      img.at(y, x, 2) = static_cast<std::uint8_t>((x + y + 7 * seed) % 256);
    }
  }
  return img;
}

inline Image noise_image(int h, int w, std::uint64_t seed) {
  Image img(h, w, 3);
  Rng rng(seed);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_index(256));
  return img;
}

inline EmbeddingSequence random_sequence(int length, int dim, Rng& rng,
                                         std::string id = "v") {
  EmbeddingSequence s;
  s.video_id = std::move(id);
  s.backend_id = "test";
  s.frames.resize(length, dim);
  for (Eigen::Index r = 0; r < s.frames.rows(); ++r) {
    for (Eigen::Index c = 0; c < s.frames.cols(); ++c) {
      s.frames(r, c) = static_cast<float>(rng.normal());
    }
  }
  s.aux.resize(dim);
  for (int c = 0; c < dim; ++c) s.aux[c] = static_cast<float>(rng.normal());
  return s;
}

}  // namespace idseq::testing
