#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "semlink/common/rng.hpp"
#include "semlink/detect/score.hpp"
#include "semlink/masking/mask_plan.hpp"
#include "semlink/masking/mr_policy.hpp"
#include "semlink/masking/restore.hpp"

using namespace semlink;
using namespace semlink::masking;
using namespace semlink::vision;
using detect::BBox;
using detect::Detection;
using detect::DetectionSet;
namespace fs = std::filesystem;

namespace {

DetectionSet one_box(double x0, double y0, double x1, double y1) {
  DetectionSet d;
  d.items.push_back({"thing", 0.9, BBox{x0, y0, x1, y1}});
  d.source = detect::DetectionSource::kSidecar;
  return d;
}

}  // namespace

TEST_CASE("importance_order: objects first, then by keypoint count") {
  PatchGrid grid(16, 16, 8);  // 2x2 grid, patches 0..3
  std::vector<int> counts{5, 2, 7, 1};
  // bbox covering only patch 3 (bottom-right)
  auto det = one_box(9, 9, 15, 15);
  auto order = importance_order(det, counts, grid);
  CHECK(order == std::vector<int>{3, 2, 0, 1});

  // no detections, equal counts: ascending index tie-break
  DetectionSet none;
  auto order2 = importance_order(none, {4, 4, 4, 4}, grid);
  CHECK(order2 == std::vector<int>{0, 1, 2, 3});

  // bbox covering everything: order by counts only, all unmaskable
  auto all = one_box(0, 0, 16, 16);
  auto order3 = importance_order(all, counts, grid);
  CHECK(order3 == std::vector<int>{2, 0, 1, 3});
  auto plan = build_mask_plan(order3, 0.7, all, grid, 16, 16, 3);
  CHECK(plan.n_masked() == 0);
}

TEST_CASE("importance_order is a permutation with non-increasing counts off objects") {
  Rng rng(31);
  PatchGrid grid(64, 64, 8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> counts(static_cast<size_t>(grid.total()));
    for (auto& c : counts) c = rng.uniform_int(0, 9);
    DetectionSet det;
    int nbox = rng.uniform_int(0, 2);
    for (int b = 0; b < nbox; ++b) {
      double x0 = rng.uniform(0, 48), y0 = rng.uniform(0, 48);
      det.items.push_back({"t", 0.5, BBox{x0, y0, x0 + rng.uniform(4, 16), y0 + rng.uniform(4, 16)}});
    }
    auto order = importance_order(det, counts, grid);
    std::vector<uint8_t> seen(order.size(), 0);
    for (int idx : order) {
      REQUIRE(idx >= 0);
      REQUIRE(idx < grid.total());
      CHECK(!seen[static_cast<size_t>(idx)]);
      seen[static_cast<size_t>(idx)] = 1;
    }
    auto obj = object_patches(det, grid);
    int prev = 1 << 30;
    for (int idx : order) {
      if (obj[static_cast<size_t>(idx)]) continue;
      CHECK(counts[static_cast<size_t>(idx)] <= prev);
      prev = counts[static_cast<size_t>(idx)];
    }
  }
}

TEST_CASE("build_mask_plan: tail masking, counts, and object protection") {
  PatchGrid grid(16, 16, 8);
  DetectionSet none;
  auto plan = build_mask_plan({3, 2, 0, 1}, 0.5, none, grid, 16, 16, 3);
  CHECK(plan.n_masked() == 2);
  CHECK(plan.n_unmasked == 2);
  CHECK(plan.masked[0] == 1);
  CHECK(plan.masked[1] == 1);
  CHECK(plan.masked[2] == 0);
  CHECK(plan.masked[3] == 0);

  auto plan0 = build_mask_plan({0, 1, 2, 3}, 0.0, none, grid, 16, 16, 3);
  CHECK(plan0.n_masked() == 0);
  for (float v : plan0.mask.data) CHECK(v == 1.0f);

  PatchGrid fullgrid(224, 224, 16);
  std::vector<int> order(196);
  for (int i = 0; i < 196; ++i) order[static_cast<size_t>(i)] = i;
  auto plan196 = build_mask_plan(order, 0.7, none, fullgrid, 224, 224, 3);
  CHECK(plan196.n_masked() == 137);  // floor(0.7 * 196)
}

TEST_CASE("build_mask_plan: mask matrix is patch-constant over all channels") {
  PatchGrid grid(32, 32, 8);
  DetectionSet det = one_box(2, 2, 12, 12);
  std::vector<int> counts(16, 0);
  auto order = importance_order(det, counts, grid);
  auto plan = build_mask_plan(order, 0.6, det, grid, 32, 32, 3);
  for (int k = 0; k < 16; ++k) {
    float expect = plan.masked[static_cast<size_t>(k)] ? 0.0f : 1.0f;
    int py = (k / 4) * 8, px = (k % 4) * 8;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int c = 0; c < 3; ++c) CHECK(plan.mask.at(py + y, px + x, c) == expect);
  }
}

TEST_CASE("masking invariants over randomized detections and MR") {
  Rng rng(77);
  PatchGrid grid(32, 32, 8);
  for (int trial = 0; trial < 500; ++trial) {
    DetectionSet det;
    int nbox = rng.uniform_int(0, 3);
    for (int b = 0; b < nbox; ++b) {
      double x0 = rng.uniform(0, 24), y0 = rng.uniform(0, 24);
      det.items.push_back(
          {"t", 0.8, BBox{x0, y0, x0 + rng.uniform(2, 30 - x0 + 2), y0 + rng.uniform(2, 30 - y0 + 2)}});
    }
    for (auto& d : det.items) {
      d.box.x1 = std::min(d.box.x1, 32.0);
      d.box.y1 = std::min(d.box.y1, 32.0);
    }
    std::vector<int> counts(16, 0);
    for (auto& c : counts) c = rng.uniform_int(0, 5);
    double mr = rng.uniform(0, 0.7);
    auto order = importance_order(det, counts, grid);
    auto plan = build_mask_plan(order, mr, det, grid, 32, 32, 3);
    auto obj = object_patches(det, grid);
    int nobj = 0;
    for (uint8_t o : obj) nobj += o;
    int expect = std::min(static_cast<int>(std::floor(mr * 16 + 1e-9)), 16 - nobj);
    CHECK(plan.n_masked() == expect);
    for (int k = 0; k < 16; ++k)
      if (obj[static_cast<size_t>(k)]) CHECK(!plan.masked[static_cast<size_t>(k)]);
  }
}

TEST_CASE("apply_mask: identity, zeroing, and checker selectivity") {
  Rng rng(9);
  PatchGrid grid(16, 16, 8);
  ImageTensor s(16, 16, 3);
  for (auto& v : s.data) v = static_cast<float>(rng.uniform());
  DetectionSet none;

  auto plan = build_mask_plan({0, 1, 2, 3}, 0.0, none, grid, 16, 16, 3);
  auto p = apply_mask(s, plan);
  CHECK(p.data == s.data);

  auto plan2 = build_mask_plan({0, 1, 2, 3}, 0.5, none, grid, 16, 16, 3);
  auto p2 = apply_mask(s, plan2);
  for (int k = 0; k < 4; ++k) {
    int py = (k / 2) * 8, px = (k % 2) * 8;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int c = 0; c < 3; ++c) {
          float v = p2.at(py + y, px + x, c);
          if (plan2.masked[static_cast<size_t>(k)])
            CHECK(v == 0.0f);
          else
            CHECK(v == s.at(py + y, px + x, c));
        }
  }
  CHECK_THROWS_AS(apply_mask(ImageTensor(8, 8, 3), plan), std::invalid_argument);
}

TEST_CASE("mr_policy: paper-anchored defaults and range") {
  auto policy = MrPolicy::paper_default();
  CHECK(policy.eval(10, 0.05) == doctest::Approx(0.0));
  CHECK(policy.eval(0, 0.3) == doctest::Approx(0.7));
  CHECK(policy.eval(-5, 0.3) == doctest::Approx(0.7));
  CHECK(policy.eval(-40, 0.0) == doctest::Approx(0.7));  // clamped far below range
  CHECK(policy.eval(40, 1.0) == doctest::Approx(0.0));
  Rng rng(4);
  double prev = 1.0;
  for (double snr = -10; snr <= 20; snr += 0.5) {
    double v = policy.eval(snr, 0.25);
    CHECK(v >= 0.0);
    CHECK(v <= 0.7);
    CHECK(v <= prev + 1e-12);  // non-increasing in SNR
    prev = v;
  }
}

TEST_CASE("mr_policy fit: argmax per SNR, tie toward less masking, monotone projection") {
  std::vector<SweepRecord> sweep;
  for (double mr : {0.0, 0.2, 0.4, 0.7}) {
    sweep.push_back({-5, mr, mr});            // peaks at 0.7
    sweep.push_back({15, mr, 1.0 - mr});      // peaks at 0
    sweep.push_back({5, mr, 0.5});            // plateau: smallest MR wins
  }
  auto policy = MrPolicy::fit(sweep);
  CHECK(policy.eval(-5, 0) == doctest::Approx(0.7));
  CHECK(policy.eval(15, 0) == doctest::Approx(0.0));
  CHECK(policy.eval(5, 0) == doctest::Approx(0.0));

  // single-SNR sweep: constant policy
  std::vector<SweepRecord> single;
  for (double mr : {0.0, 0.3, 0.5, 0.7}) single.push_back({10, mr, mr == 0.3 ? 2.0 : 1.0});
  auto cpol = MrPolicy::fit(single);
  CHECK(cpol.eval(-5, 0) == doctest::Approx(0.3));
  CHECK(cpol.eval(20, 1) == doctest::Approx(0.3));

  CHECK_THROWS_AS(MrPolicy::fit({}), std::invalid_argument);
}

TEST_CASE("mr_policy: perceptron distillation fits the table under 0.01 MSE") {
  auto table = MrPolicy::paper_default();
  double mse = 1;
  auto net = MrPolicy::distill_perceptron(table, 1234, &mse);
  CHECK(mse < 0.01);
  CHECK(net.kind() == MrPolicy::Kind::kPerceptron);
  double prev = 1.0;
  for (double snr = -8; snr <= 18; snr += 0.25) {
    double v = net.eval(snr, 0.2);
    CHECK(v >= 0.0);
    CHECK(v <= 0.7);
    CHECK(v <= prev + 1e-9);
    prev = v;
  }
  CHECK(net.eval(-5, 0.2) > 0.5);
  CHECK(net.eval(15, 0.2) < 0.2);
}

TEST_CASE("mr_policy: csv round trip") {
  auto path = fs::temp_directory_path() / "semlink_policy.csv";
  auto policy = MrPolicy::paper_default();
  policy.save_csv(path);
  auto back = MrPolicy::load_csv(path);
  for (double snr : {-5.0, -2.5, 0.0, 7.5, 15.0})
    CHECK(back.eval(snr, 0.5) == doctest::Approx(policy.eval(snr, 0.5)));
  fs::remove(path);
}

TEST_CASE("restore_background: verbatim unmasked, border-mean fill, global fallback") {
  PatchGrid grid(24, 8, 8);  // 3x1 grid: patches 0,1,2 stacked vertically
  DetectionSet none;
  ImageTensor img(24, 8, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = 0.2f;        // top patch
        img.at(8 + y, x, c) = 0.9f;    // middle (will be masked)
        img.at(16 + y, x, c) = 0.6f;   // bottom patch
      }
  // order puts patch 1 last so MR=1/3 masks exactly it
  auto plan = build_mask_plan({0, 2, 1}, 0.34, none, grid, 24, 8, 3);
  REQUIRE(plan.n_masked() == 1);
  REQUIRE(plan.masked[1] == 1);

  NeighborMeanRestorer restorer;
  auto out = restorer.restore(img, plan);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) {
        CHECK(out.at(y, x, c) == 0.2f);
        CHECK(out.at(16 + y, x, c) == 0.6f);
        CHECK(out.at(8 + y, x, c) == doctest::Approx(0.4f));  // mean of 0.2 and 0.6
      }

  // no masked patches: identity
  auto plan0 = build_mask_plan({0, 1, 2}, 0.0, none, grid, 24, 8, 3);
  auto same = restorer.restore(img, plan0);
  CHECK(same.data == img.data);
}

TEST_CASE("restore_background: global fallback when no unmasked neighbor exists") {
  // 3x3 grid, only the corner patch unmasked; center has no unmasked neighbor
  PatchGrid grid(24, 24, 8);
  DetectionSet det = one_box(0, 0, 7, 7);  // protect patch 0 only
  std::vector<int> counts(9, 0);
  auto order = importance_order(det, counts, grid);
  auto plan = build_mask_plan(order, 0.7, det, grid, 24, 24, 3);
  // MR cap masks floor(0.7*9)=6 patches; force the specific worst case by hand
  for (int k = 1; k < 9; ++k) plan.masked[static_cast<size_t>(k)] = 1;
  plan.n_unmasked = 1;
  for (int k = 0; k < 9; ++k) {
    float v = plan.masked[static_cast<size_t>(k)] ? 0.0f : 1.0f;
    int py = (k / 3) * 8, px = (k % 3) * 8;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int c = 0; c < 3; ++c) plan.mask.at(py + y, px + x, c) = v;
  }
  ImageTensor img(24, 24, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.8f;
  NeighborMeanRestorer restorer;
  auto out = restorer.restore(img, plan);
  // center patch (1,1) = patch 4 has only masked neighbors: global mean 0.8
  for (int y = 8; y < 16; ++y)
    for (int x = 8; x < 16; ++x) CHECK(out.at(y, x, 0) == doctest::Approx(0.8f));

  // all patches masked is rejected
  plan.masked[0] = 1;
  plan.n_unmasked = 0;
  CHECK_THROWS_AS(restorer.restore(img, plan), std::invalid_argument);
}

TEST_CASE("restore never alters unmasked pixels (randomized)") {
  Rng rng(123);
  PatchGrid grid(32, 32, 8);
  NeighborMeanRestorer restorer;
  for (int trial = 0; trial < 30; ++trial) {
    ImageTensor img(32, 32, 3);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    std::vector<int> counts(16, 0);
    for (auto& c : counts) c = rng.uniform_int(0, 5);
    DetectionSet none;
    auto order = importance_order(none, counts, grid);
    auto plan = build_mask_plan(order, rng.uniform(0, 0.7), none, grid, 32, 32, 3);
    auto out = restorer.restore(img, plan);
    for (int k = 0; k < 16; ++k) {
      if (plan.masked[static_cast<size_t>(k)]) continue;
      int py = (k / 4) * 8, px = (k % 4) * 8;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          for (int c = 0; c < 3; ++c)
            CHECK(out.at(py + y, px + x, c) == img.at(py + y, px + x, c));
    }
  }
}
