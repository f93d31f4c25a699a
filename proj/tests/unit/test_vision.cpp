#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "semlink/common/rng.hpp"
#include "semlink/vision/image.hpp"
#include "semlink/vision/keypoints.hpp"
#include "semlink/vision/metrics.hpp"
#include "semlink/vision/patch.hpp"

using namespace semlink;
using namespace semlink::vision;
namespace fs = std::filesystem;

namespace {

ImageTensor random_8bit_image(int h, int w, Rng& rng) {
  ImageTensor img(h, w, 3);
  for (auto& v : img.data)
    v = static_cast<float>(rng.uniform_int(0, 255)) / 255.0f;
  return img;
}

ImageTensor gaussian_blob(int h, int w, double cx, double cy, double sigma) {
  ImageTensor img(h, w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      float v = static_cast<float>(std::exp(-d2 / (2.0 * sigma * sigma)));
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = v;
    }
  return img;
}

fs::path tmp_file(const char* name) { return fs::temp_directory_path() / name; }

}  // namespace

TEST_CASE("ppm: 2x2 all-black loads as zeros") {
  auto path = tmp_file("semlink_black.ppm");
  {
    std::ofstream f(path, std::ios::binary);
    f << "P6\n2 2\n255\n";
    char z[12] = {0};
    f.write(z, 12);
  }
  ImageTensor img = load_image(path);
  CHECK(img.height == 2);
  CHECK(img.width == 2);
  CHECK(img.channels == 3);
  for (float v : img.data) CHECK(v == 0.0f);
  fs::remove(path);
}

TEST_CASE("ppm: save then load reproduces 8-bit values exactly") {
  Rng rng(11);
  auto path = tmp_file("semlink_rt.ppm");
  ImageTensor img = random_8bit_image(13, 9, rng);
  save_image(img, path);
  ImageTensor back = load_image(path);
  REQUIRE(back.numel() == img.numel());
  for (size_t i = 0; i < img.numel(); ++i) CHECK(back.data[i] == img.data[i]);
  fs::remove(path);
}

TEST_CASE("ppm: unsupported maxval and malformed inputs report the byte offset") {
  auto path = tmp_file("semlink_bad.ppm");
  {
    std::ofstream f(path, std::ios::binary);
    f << "P6\n2 2\n65535\n";
    for (int i = 0; i < 24; ++i) f.put(0);
  }
  CHECK_THROWS_WITH_AS(load_image(path), doctest::Contains("unsupported maxval"),
                       std::runtime_error);
  {
    std::ofstream f(path, std::ios::binary);
    f << "P5\n2 2\n255\n";
  }
  CHECK_THROWS_WITH_AS(load_image(path), doctest::Contains("P6"), std::runtime_error);
  {
    std::ofstream f(path, std::ios::binary);
    f << "P6\n4 4\n255\n";
    f.put(0);  // far too short
  }
  CHECK_THROWS_WITH_AS(load_image(path), doctest::Contains("truncated"), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("patchify: 224/16 gives 196 patches, 32/8 gives 16") {
  ImageTensor big(224, 224, 3);
  auto patches = patchify(big, 16);
  CHECK(patches.size() == 196);
  CHECK(patches[0].size() == 16 * 16 * 3);

  ImageTensor toy(32, 32, 3);
  CHECK(patchify(toy, 8).size() == 16);
}

TEST_CASE("patchify round trip is exact and layout is row-major") {
  Rng rng(21);
  for (auto [h, w, p] : {std::tuple{32, 32, 8}, {16, 24, 8}, {48, 32, 16}, {22, 33, 11}}) {
    ImageTensor img = random_8bit_image(h, w, rng);
    auto patches = patchify(img, p);
    ImageTensor back = unpatchify(patches, h, w, 3, p);
    CHECK(back.data == img.data);
  }
  // patch k covers rows floor(k/(W/P))*P.., cols (k mod (W/P))*P..
  ImageTensor img(16, 32, 3);
  img.at(8, 16, 1) = 0.5f;  // patch row 1, col 2 at P=8 -> k = 1*4+2 = 6
  auto patches = patchify(img, 8);
  CHECK(patches[6][0 * 3 + 1] == 0.5f);
  CHECK_THROWS_AS(patchify(ImageTensor(30, 32, 3), 8), std::invalid_argument);
}

TEST_CASE("dog_keypoints: constant image has none, tiny image sets the flag") {
  ImageTensor flat(32, 32, 3);
  for (auto& v : flat.data) v = 0.4f;
  auto kps = dog_keypoints(flat);
  CHECK(kps.points.empty());
  CHECK(!kps.too_small);

  auto tiny = dog_keypoints(ImageTensor(8, 8, 3));
  CHECK(tiny.points.empty());
  CHECK(tiny.too_small);
}

TEST_CASE("dog_keypoints: horizontal linear ramp has no extrema") {
  ImageTensor ramp(32, 32, 3);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) ramp.at(y, x, c) = static_cast<float>(x) / 31.0f;
  auto kps = dog_keypoints(ramp);
  CHECK(kps.points.empty());
}

TEST_CASE("dog_keypoints: synthetic blob fires near its center") {
  ImageTensor blob = gaussian_blob(32, 32, 16, 16, 3.0);
  auto kps = dog_keypoints(blob);
  bool found = false;
  for (const auto& kp : kps.points)
    if (std::abs(kp.x - 16) <= 2 && std::abs(kp.y - 16) <= 2) found = true;
  CHECK(found);
}

TEST_CASE("dog_keypoints: detection follows a 4px shift of the blob") {
  auto centers = [](const KeypointList& kps) {
    REQUIRE(!kps.points.empty());
    // strongest response
    const Keypoint* best = &kps.points[0];
    for (const auto& kp : kps.points)
      if (std::abs(kp.response) > std::abs(best->response)) best = &kp;
    return std::pair{best->x, best->y};
  };
  auto a = centers(dog_keypoints(gaussian_blob(48, 48, 20, 24, 3.0)));
  auto b = centers(dog_keypoints(gaussian_blob(48, 48, 24, 24, 3.0)));
  CHECK(std::abs((b.first - a.first) - 4.0) <= 1.0);
  CHECK(std::abs(b.second - a.second) <= 1.0);
}

TEST_CASE("keypoints_per_patch: assignment and boundary convention") {
  PatchGrid grid(32, 32, 8);
  KeypointList kps;
  CHECK(keypoints_per_patch(kps, grid) == std::vector<int>(16, 0));

  kps.points.push_back({0, 0, 1, 1});
  auto counts = keypoints_per_patch(kps, grid);
  CHECK(counts[0] == 1);

  kps.points.clear();
  kps.points.push_back({8.0, 0.0, 1, 1});  // exactly on x = P: right patch
  counts = keypoints_per_patch(kps, grid);
  CHECK(counts[1] == 1);

  Rng rng(3);
  kps.points.clear();
  for (int i = 0; i < 57; ++i)
    kps.points.push_back({rng.uniform(0, 31.999), rng.uniform(0, 31.999), 1, 1});
  counts = keypoints_per_patch(kps, grid);
  int sum = 0;
  for (int c : counts) sum += c;
  CHECK(sum == 57);
}

TEST_CASE("psnr: cap, endpoints, worked example, symmetry") {
  ImageTensor a(16, 16, 3), b(16, 16, 3);
  for (auto& v : a.data) v = 0.37f;
  CHECK(psnr(a, a) == 100.0);

  for (auto& v : a.data) v = 0.0f;
  for (auto& v : b.data) v = 1.0f;
  CHECK(psnr(a, b) == doctest::Approx(0.0));

  for (auto& v : a.data) v = 0.5f;
  for (auto& v : b.data) v = 0.25f;
  CHECK(psnr(a, b) == doctest::Approx(12.0412).epsilon(1e-4));
  CHECK(psnr(a, b) == psnr(b, a));

  CHECK_THROWS_AS(psnr(a, ImageTensor(8, 8, 3)), std::invalid_argument);
}

TEST_CASE("psnr strictly decreases as noise amplitude grows") {
  Rng rng(5);
  ImageTensor base = random_8bit_image(24, 24, rng);
  double prev = 1e9;
  for (int step = 1; step <= 20; ++step) {
    double amp = 0.01 * step;
    ImageTensor noisy = base;
    Rng nrng(99);  // same noise shape, scaled amplitude
    for (auto& v : noisy.data)
      v = static_cast<float>(v + amp * nrng.uniform(-1, 1));
    double p = psnr(base, noisy);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("ssim: identity is exactly 1, constant-vs-constant matches closed form") {
  Rng rng(6);
  ImageTensor a = random_8bit_image(20, 20, rng);
  CHECK(ssim(a, a) == 1.0);

  ImageTensor z(16, 16, 3), o(16, 16, 3);
  for (auto& v : o.data) v = 1.0f;
  // constant images: SSIM = C1/(1+C1) with C1 = 1e-4
  double expect = 1e-4 / (1.0 + 1e-4);
  CHECK(ssim(z, o) == doctest::Approx(expect).epsilon(1e-6));

  ImageTensor b = random_8bit_image(20, 20, rng);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)));
  double v = ssim(a, b);
  CHECK(v >= -1.0);
  CHECK(v <= 1.0);

  CHECK_THROWS_AS(ssim(ImageTensor(8, 8, 3), ImageTensor(8, 8, 3)), std::invalid_argument);
}
