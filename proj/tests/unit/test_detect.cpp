#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "semlink/detect/detections.hpp"
#include "semlink/detect/score.hpp"

using namespace semlink::detect;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  auto d = fs::temp_directory_path() / "semlink_detect_test";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("iou: symmetry, identity, disjoint") {
  BBox a{0, 0, 10, 10};
  BBox b{5, 5, 15, 15};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, b) == doctest::Approx(iou(b, a)));
  CHECK(iou(a, b) == doctest::Approx(25.0 / 175.0));
  CHECK(iou(a, BBox{20, 20, 30, 30}) == 0.0);
  CHECK(iou(a, BBox{10, 0, 20, 10}) == 0.0);  // touching edges do not overlap
}

TEST_CASE("load_detections: sidecar, missing file, bad bbox, malformed json") {
  auto dir = tmp_dir();
  auto img = dir / "a.ppm";
  {
    std::ofstream f(img);
    f << "placeholder";
  }
  {
    std::ofstream f(sidecar_path(img));
    f << R"([{"class":"cat","conf":0.8,"bbox":[1,2,10,12]},
            {"class":"dog","conf":0.5,"bbox":[0,0,5,5]}])";
  }
  auto dets = load_detections(img, 32, 32);
  REQUIRE(dets.size() == 2);
  CHECK(dets.source == DetectionSource::kSidecar);
  CHECK(dets.items[0].cls == "cat");
  CHECK(dets.items[0].conf == doctest::Approx(0.8));
  CHECK(dets.items[0].box.x1 == 10);

  auto missing = load_detections(dir / "nope.ppm", 32, 32);
  CHECK(missing.empty());
  CHECK(missing.source == DetectionSource::kStub);

  {
    std::ofstream f(sidecar_path(img));
    f << R"([{"class":"cat","conf":0.8,"bbox":[1,2,40,12]}])";  // x1 > width
  }
  CHECK_THROWS_WITH_AS(load_detections(img, 32, 32), doctest::Contains("bounds"),
                       std::runtime_error);

  {
    std::ofstream f(sidecar_path(img));
    f << "[{\"class\": oops";
  }
  CHECK_THROWS_AS(load_detections(img, 32, 32), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("detections sidecar save/load round trip") {
  auto dir = tmp_dir();
  auto img = dir / "b.ppm";
  DetectionSet d;
  d.items.push_back({"circle", 0.75, BBox{2, 3, 14, 17}});
  save_detections(d, sidecar_path(img));
  auto back = load_detections(img, 32, 32);
  REQUIRE(back.size() == 1);
  CHECK(back.items[0].cls == "circle");
  CHECK(back.items[0].conf == doctest::Approx(0.75));
  CHECK(back.items[0].box.y1 == doctest::Approx(17));
  fs::remove_all(dir);
}

TEST_CASE("run_external_detector: stub command, failure, timeout") {
  auto dir = tmp_dir();
  auto img = dir / "c.ppm";
  {
    std::ofstream f(img);
    f << "x";
  }
  auto dets = run_external_detector(
      "echo '[{\"class\":\"box\",\"conf\":0.9,\"bbox\":[0,0,8,8]}]' # {image}", img, 32, 32);
  REQUIRE(dets.size() == 1);
  CHECK(dets.source == DetectionSource::kExternal);
  CHECK(dets.items[0].conf == doctest::Approx(0.9));

  CHECK_THROWS_WITH_AS(run_external_detector("echo boom >&2; exit 1", img, 32, 32),
                       doctest::Contains("boom"), std::runtime_error);

  CHECK_THROWS_WITH_AS(run_external_detector("sleep 2", img, 32, 32, 300),
                       doctest::Contains("timeout"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("confidence_score: exact match, misses, partial") {
  DetectionSet gt;
  gt.items.push_back({"cat", 1.0, BBox{0, 0, 10, 10}});
  gt.items.push_back({"dog", 1.0, BBox{20, 20, 30, 30}});

  DetectionSet pred;
  pred.items.push_back({"cat", 0.9, BBox{0, 0, 10, 10}});
  pred.items.push_back({"dog", 0.9, BBox{20, 20, 30, 30}});
  auto r = confidence_score(gt, pred);
  CHECK(r.cs == doctest::Approx(0.9));
  CHECK(r.matched == 2);

  DetectionSet none;
  auto r2 = confidence_score(gt, none);
  CHECK(r2.cs == 0.0);
  CHECK(r2.unmatched == 2);

  DetectionSet half;
  half.items.push_back({"cat", 0.8, BBox{0, 0, 10, 10}});
  auto r3 = confidence_score(gt, half);
  CHECK(r3.cs == doctest::Approx(0.4));  // mean of {0.8, 0}

  // empty ground truth scores 1
  CHECK(confidence_score(none, pred).cs == 1.0);

  // class mismatch or IoU < 0.5 does not match
  DetectionSet wrong;
  wrong.items.push_back({"dog", 0.8, BBox{0, 0, 10, 10}});
  wrong.items.push_back({"cat", 0.8, BBox{7, 7, 17, 17}});
  CHECK(confidence_score(gt, wrong).cs == 0.0);
}

TEST_CASE("confidence_score monotone in prediction confidence") {
  DetectionSet gt;
  gt.items.push_back({"cat", 1.0, BBox{0, 0, 10, 10}});
  double prev = -1;
  for (double conf : {0.1, 0.3, 0.5, 0.8, 1.0}) {
    DetectionSet pred;
    pred.items.push_back({"cat", conf, BBox{1, 1, 10, 10}});
    double cs = confidence_score(gt, pred).cs;
    CHECK(cs >= prev);
    prev = cs;
  }
}

TEST_CASE("combined_metrics: endpoints, worked example, equal-weight identity") {
  auto m = combined_metrics(40.0, 1.0, 1.0);
  CHECK(m.psnr_cs == doctest::Approx(1.0));
  CHECK(m.ssim_cs == doctest::Approx(1.0));

  auto m2 = combined_metrics(20.0, 0.5, 0.6);
  CHECK(m2.psnr_cs == doctest::Approx(0.55));  // 0.25 + 0.30

  // PSNR 0 with CS 1: object half carries exactly its 1/2 weight
  auto m3 = combined_metrics(0.0, 0.0, 1.0);
  CHECK(m3.psnr_cs == doctest::Approx(0.5));
  CHECK(m3.ssim_cs == doctest::Approx(0.5));

  // clamping: PSNR beyond 40 dB and negative SSIM
  auto m4 = combined_metrics(55.0, -0.4, 0.0);
  CHECK(m4.psnr_cs == doctest::Approx(0.5));
  CHECK(m4.ssim_cs == doctest::Approx(0.0));
  CHECK_THROWS_AS(combined_metrics(10, 0.5, 1.5), std::invalid_argument);
}

TEST_CASE("metric pair record: format and parse the reported style") {
  CombinedMetrics m{0.911, 0.936};
  CHECK(format_metric_pair(m) == "0.911/0.936");
  auto back = parse_metric_pair("0.911/0.936");
  CHECK(back.psnr_cs == doctest::Approx(0.911));
  CHECK(back.ssim_cs == doctest::Approx(0.936));
  CHECK_THROWS_AS(parse_metric_pair("garbage"), std::invalid_argument);
}
