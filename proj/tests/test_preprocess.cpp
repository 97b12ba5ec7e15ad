#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "idseq/error.hpp"
#include "idseq/preprocess.hpp"

using namespace idseq;

namespace {

void write_frames(const std::filesystem::path& dir, int n) {
  std::filesystem::create_directories(dir);
  // Unpadded names check natural ordering (2 before 10).
  for (int i = 0; i < n; ++i) {
    write_image(dir / (std::to_string(i) + ".png"), testing::gradient_image(40, 60, i));
  }
}

}  // namespace

TEST_CASE("center aligner: centered face fixture gives a 112x112 crop") {
  const CenterCropAligner aligner;
  const auto crop = align_and_crop(testing::gradient_image(240, 320), 4, aligner);
  REQUIRE(crop.has_value());
  CHECK(crop->pixels.height == kCropSize);
  CHECK(crop->pixels.width == kCropSize);
  CHECK(crop->pixels.channels == 3);
  CHECK(crop->source_frame_index == 4);
  CHECK_NOTHROW(check_crop(*crop));
}

TEST_CASE("center aligner: an exact-size frame passes through unchanged") {
  const CenterCropAligner aligner;
  const Image img = testing::noise_image(112, 112, 5);
  const auto crop = align_and_crop(img, 0, aligner);
  REQUIRE(crop.has_value());
  CHECK(crop->pixels == img);
}

TEST_CASE("all-black frame is NoFace") {
  const CenterCropAligner aligner;
  CHECK_FALSE(align_and_crop(Image(200, 200, 3, 0), 0, aligner).has_value());
}

TEST_CASE("truncated image file is an input error, not NoFace") {
  testing::TempDir dir;
  write_image(dir / "ok.png", testing::gradient_image(32, 32));
  std::ifstream in(dir / "ok.png", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ofstream(dir / "bad.png", std::ios::binary) << bytes.substr(0, bytes.size() / 3);
  CHECK_THROWS_AS(read_image(dir / "bad.png"), InputError);
  CHECK_THROWS_AS(read_image(dir / "missing.png"), InputError);
}

TEST_CASE("decode_frames: count follows ceil(total / stride), order preserved") {
  testing::TempDir dir;
  write_frames(dir / "clip", 10);
  const auto all = decode_frames(dir / "clip", 1);
  CHECK(all.size() == 10);
  const auto strided = decode_frames(dir / "clip", 3);
  REQUIRE(strided.size() == 4);
  CHECK(strided[0].index == 0);
  CHECK(strided[3].index == 9);
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i].index > all[i - 1].index);
  CHECK(all[2].image == testing::gradient_image(40, 60, 2));
  CHECK(all[9].image == testing::gradient_image(40, 60, 9));
  CHECK(count_frames(dir / "clip") == 10);
}

TEST_CASE("decode_frames: missing source and bad stride") {
  testing::TempDir dir;
  CHECK_THROWS_AS(decode_frames(dir / "nope.mp4", 1), InputError);
  write_frames(dir / "clip", 2);
  CHECK_THROWS_AS(decode_frames(dir / "clip", 0), ValidationError);
}

TEST_CASE("load_still reads an image file or a frame of a folder") {
  testing::TempDir dir;
  write_frames(dir / "clip", 3);
  CHECK(load_still(dir / "clip", 1) == testing::gradient_image(40, 60, 1));
  CHECK(load_still(dir / "clip" / "2.png") == testing::gradient_image(40, 60, 2));
  CHECK_THROWS_AS(load_still(dir / "clip", 5), InputError);
}

TEST_CASE("image codec round trip keeps RGB order") {
  testing::TempDir dir;
  Image img(4, 5, 3, 0);
  img.at(1, 2, 0) = 255;  // pure red pixel
  write_image(dir / "x.png", img);
  const Image back = read_image(dir / "x.png");
  CHECK(back == img);
}

TEST_CASE("check_crop rejects wrong shapes") {
  FaceCrop c{Image(100, 112, 3), 0};
  CHECK_THROWS_AS(check_crop(c), ValidationError);
  c.pixels = Image(112, 112, 1);
  CHECK_THROWS_AS(check_crop(c), ValidationError);
}

TEST_CASE("estimate_similarity recovers a known similarity transform") {
  // dst = 0.5 * R(30deg) * src + (3, -2)
  const double c = 0.5 * std::cos(0.5235987755982988), s = 0.5 * std::sin(0.5235987755982988);
  std::array<Point2, 5> src{}, dst{};
  for (int i = 0; i < 5; ++i) {
    src[i] = {kArcFaceTemplate[i].x * 2 + 10, kArcFaceTemplate[i].y * 2 + 5};
    dst[i] = {static_cast<float>(c * src[i].x - s * src[i].y + 3),
              static_cast<float>(s * src[i].x + c * src[i].y - 2)};
  }
  const auto t = estimate_similarity(src, dst);
  CHECK(t[0] == doctest::Approx(c).epsilon(1e-4));
  CHECK(t[1] == doctest::Approx(-s).epsilon(1e-4));
  CHECK(t[2] == doctest::Approx(3).epsilon(1e-3));
  CHECK(t[3] == doctest::Approx(s).epsilon(1e-4));
  CHECK(t[5] == doctest::Approx(-2).epsilon(1e-3));
}

TEST_CASE("landmark aligner keeps the largest face and maps it to the template") {
  testing::TempDir dir;
  // Face at 2x scale, offset (50, 30); a smaller face elsewhere.
  std::string big = "[", small = "[";
  for (int i = 0; i < 5; ++i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s[%.4f,%.4f]", i ? "," : "",
                  kArcFaceTemplate[i].x * 2 + 50, kArcFaceTemplate[i].y * 2 + 30);
    big += buf;
    std::snprintf(buf, sizeof buf, "%s[%.4f,%.4f]", i ? "," : "",
                  kArcFaceTemplate[i].x * 0.5 + 5, kArcFaceTemplate[i].y * 0.5 + 5);
    small += buf;
  }
  big += "]";
  small += "]";
  std::ofstream(dir / "lm.json")
      << R"({"frames": {"0": [{"box": [5,5,56,56], "landmarks": )" << small
      << R"(, "score": 0.99}, {"box": [50,30,224,224], "landmarks": )" << big << "}]}}";

  // Frame: a bright square exactly where the big face's 112x112 crop maps.
  Image frame(320, 320, 3, 10);
  for (int y = 30; y < 30 + 224; ++y) {
    for (int x = 50; x < 50 + 224; ++x) {
      for (int ch = 0; ch < 3; ++ch) frame.at(y, x, ch) = 200;
    }
  }
  const LandmarkAligner aligner(std::make_shared<LandmarkFileDetector>(dir / "lm.json"));
  const auto crop = align_and_crop(frame, 0, aligner);
  REQUIRE(crop.has_value());
  CHECK(crop->pixels.height == kCropSize);
  // Interior of the crop comes from the bright square.
  CHECK(crop->pixels.at(56, 56, 0) == 200);
  CHECK(crop->pixels.at(5, 5, 1) == 200);
  // No entry for frame 1 means no face.
  CHECK_FALSE(align_and_crop(frame, 1, aligner).has_value());
}
