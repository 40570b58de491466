#include "style3d/checkpoint.hpp"
#include "style3d/error.hpp"
#include "style3d/image.hpp"
#include "style3d/image_io.hpp"
#include "style3d/rng.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace style3d;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("style3d_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Image random_image(int w, int h, int c, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h, c);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("PNG round trip keeps 8-bit values for every channel layout") {
  const fs::path dir = temp_dir("png");
  for (int c : {1, 2, 3, 4}) {
    const Image img = quantize8(random_image(7, 5, c, 10 + c));
    write_png(dir / "a.png", img);
    const Image back = read_image(dir / "a.png");
    REQUIRE(back.channels == c);
    REQUIRE(back.width == 7);
    REQUIRE(back.height == 5);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(back.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-12));
  }
}

TEST_CASE("PNG output bytes are deterministic") {
  const fs::path dir = temp_dir("png_det");
  const Image img = random_image(16, 9, 3, 3);
  write_png(dir / "a.png", img);
  write_png(dir / "b.png", img);
  std::ifstream a(dir / "a.png", std::ios::binary), b(dir / "b.png", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("unsupported or missing images are rejected") {
  const fs::path dir = temp_dir("bad_img");
  std::ofstream(dir / "x.png") << "this is not an image";
  CHECK_THROWS_AS(read_image(dir / "x.png"), ValidationError);
  CHECK_THROWS_AS(read_image(dir / "missing.png"), ValidationError);
}

TEST_CASE("PFM round trip is exact at float precision") {
  const fs::path dir = temp_dir("pfm");
  for (int c : {1, 3}) {
    Image img = random_image(5, 4, c, 20 + c);
    for (double& v : img.pixels) v = static_cast<float>(v * 10 - 3);
    write_pfm(dir / "a.pfm", img);
    CHECK(read_pfm(dir / "a.pfm") == img);
  }
}

TEST_CASE("preprocessing composites alpha over white and pads to a centered square") {
  Image rgba(4, 2, 4, 0.0);  // fully transparent black
  rgba.at(1, 0, 3) = 1.0;    // one opaque black pixel
  const Image rgb = to_rgb_over_white(rgba);
  CHECK(rgb.at(0, 0, 0) == 1.0);
  CHECK(rgb.at(1, 0, 0) == 0.0);
  const Image sq = pad_to_square(rgb);
  CHECK(sq.width == 4);
  CHECK(sq.height == 4);
  CHECK(sq.at(1, 1, 0) == 0.0);  // shifted down by one row
  CHECK(sq.at(1, 0, 0) == 1.0);
  const Image small = preprocess_for_model(rgba, 2);
  CHECK(small.width == 2);
  CHECK(small.channels == 3);
}

TEST_CASE("area resampling preserves the mean") {
  const Image img = random_image(12, 12, 3, 5);
  const Image down = resize_area(img, 4, 4);
  const Image odd = resize_area(img, 5, 7);
  auto mean = [](const Image& im) {
    double s = 0;
    for (double v : im.pixels) s += v;
    return s / im.pixels.size();
  };
  CHECK(mean(down) == doctest::Approx(mean(img)).epsilon(1e-12));
  CHECK(mean(odd) == doctest::Approx(mean(img)).epsilon(1e-2));
}

TEST_CASE("checkpoint container round trip") {
  const fs::path dir = temp_dir("ckpt");
  Checkpoint ck;
  ck.meta = {{"kind", "test"}, {"n", 3}};
  Rng rng(7);
  ck.tensors.emplace_back("a", rng.normal_matrix(3, 4, 1.0));
  ck.tensors.emplace_back("b.empty", Matrix(0, 5));
  ck.tensors.emplace_back("c", rng.normal_matrix(1, 1, 1.0));
  save_checkpoint(dir / "m.s3d", ck);
  const Checkpoint back = load_checkpoint(dir / "m.s3d");
  CHECK(back.meta == ck.meta);
  REQUIRE(back.tensors.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.tensors[i].first == ck.tensors[i].first);
    CHECK(back.tensors[i].second == ck.tensors[i].second);
  }
  CHECK_THROWS_AS(back.get("zzz"), ValidationError);

  std::ofstream(dir / "bad.s3d") << "NOTACKPTxxxxxxxx";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.s3d"), ValidationError);
}
