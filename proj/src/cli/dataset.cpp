#include "semlink/cli/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "semlink/common/rng.hpp"
#include "semlink/masking/mask_plan.hpp"

namespace semlink::cli {

using vision::ImageTensor;

std::vector<EvalImage> load_dataset(const std::filesystem::path& dir, int max_count,
                                    int patch_size) {
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("dataset: not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("dataset: no .ppm images in " + dir.string());
  if (max_count > 0 && static_cast<int>(files.size()) > max_count)
    files.resize(static_cast<size_t>(max_count));

  std::vector<EvalImage> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    EvalImage ei;
    ei.path = f;
    ei.image = vision::load_image(f);
    ei.dets = detect::load_detections(f, ei.image.width, ei.image.height);
    vision::PatchGrid grid(ei.image.height, ei.image.width, patch_size);
    auto kps = vision::dog_keypoints(ei.image);
    ei.kp_counts = vision::keypoints_per_patch(kps, grid);
    ei.order = masking::importance_order(ei.dets, ei.kp_counts, grid);
    auto obj = masking::object_patches(ei.dets, grid);
    int n_obj = 0;
    for (uint8_t o : obj) n_obj += o;
    ei.object_area_frac = static_cast<double>(n_obj) / grid.total();
    out.push_back(std::move(ei));
  }
  return out;
}

std::vector<codec::TrainSample> to_train_samples(const std::vector<EvalImage>& images) {
  std::vector<codec::TrainSample> out;
  out.reserve(images.size());
  for (const auto& ei : images) {
    codec::TrainSample s;
    s.image = ei.image;
    s.kp_counts = ei.kp_counts;
    s.dets = ei.dets;
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

void draw_scene(ImageTensor& img, detect::DetectionSet& dets, Rng& rng) {
  const int h = img.height, w = img.width;
  // bilinear gradient background from four corner colors
  float corner[4][3];
  for (auto& c : corner)
    for (auto& v : c) v = static_cast<float>(rng.uniform(0.15, 0.9));
  // low-frequency waves over the gradient keep a per-image constant from
  // being a strong predictor while staying learnable structure
  double wf[3][3];
  for (auto& row : wf) {
    row[0] = rng.uniform(0.5, 2.5) * 2.0 * M_PI / w;
    row[1] = rng.uniform(0.5, 2.5) * 2.0 * M_PI / h;
    row[2] = rng.uniform(0.0, 2.0 * M_PI);
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float ty = static_cast<float>(y) / (h - 1);
      float tx = static_cast<float>(x) / (w - 1);
      for (int c = 0; c < 3; ++c) {
        float top = corner[0][c] * (1 - tx) + corner[1][c] * tx;
        float bot = corner[2][c] * (1 - tx) + corner[3][c] * tx;
        float wave = 0.22f * static_cast<float>(
                                 std::sin(wf[c][0] * x + wf[c][1] * y + wf[c][2]));
        img.at(y, x, c) = std::clamp(top * (1 - ty) + bot * ty + wave, 0.0f, 1.0f);
      }
    }

  int n_obj = rng.uniform_int(1, 2);
  for (int i = 0; i < n_obj; ++i) {
    bool circle = rng.uniform() < 0.5;
    double cx = rng.uniform(w * 0.25, w * 0.75);
    double cy = rng.uniform(h * 0.25, h * 0.75);
    double r = rng.uniform(w * 0.12, w * 0.22);
    float col[3];
    for (auto& v : col) v = static_cast<float>(rng.uniform(0.0, 1.0));
    uint64_t tex_seed = rng.next_u64();

    double x0 = std::max(0.0, cx - r), x1 = std::min<double>(w, cx + r);
    double y0 = std::max(0.0, cy - r), y1 = std::min<double>(h, cy + r);
    for (int y = static_cast<int>(y0); y < static_cast<int>(std::ceil(y1)); ++y)
      for (int x = static_cast<int>(x0); x < static_cast<int>(std::ceil(x1)); ++x) {
        bool inside;
        if (circle) {
          double dx = x - cx, dy = y - cy;
          inside = dx * dx + dy * dy <= r * r;
        } else {
          inside = true;  // the bbox itself is the rectangle
        }
        if (!inside) continue;
        // speckle texture gives the detector stage features to count
        Rng t(Rng::derive(tex_seed, static_cast<uint64_t>(y) * 8191 + x));
        float spark = static_cast<float>(t.uniform(-0.18, 0.18));
        for (int c = 0; c < 3; ++c) {
          float v = col[c] + spark;
          img.at(y, x, c) = std::clamp(v, 0.0f, 1.0f);
        }
      }
    detect::Detection d;
    d.cls = circle ? "circle" : "rect";
    d.conf = rng.uniform(0.7, 0.99);
    d.box = {x0, y0, x1, y1};
    dets.items.push_back(std::move(d));
  }
  dets.source = detect::DetectionSource::kSidecar;
}

}  // namespace

void generate_dataset(const std::filesystem::path& dir, int count, int size, uint64_t seed) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    Rng rng(Rng::derive(seed, static_cast<uint64_t>(i)));
    ImageTensor img(size, size, 3);
    detect::DetectionSet dets;
    draw_scene(img, dets, rng);
    char name[32];
    std::snprintf(name, sizeof name, "img%04d.ppm", i);
    auto path = dir / name;
    vision::save_image(img, path);
    detect::save_detections(dets, detect::sidecar_path(path));
  }
}

}  // namespace semlink::cli
