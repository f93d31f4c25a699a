#include "semlink/vision/keypoints.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace semlink::vision {

namespace {

struct Plane {
  int h = 0, w = 0;
  std::vector<float> v;
  Plane() = default;
  Plane(int hh, int ww) : h(hh), w(ww), v(static_cast<size_t>(hh) * ww, 0.0f) {}
  float at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  float& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
};

// separable Gaussian blur, replicate borders
Plane blur(const Plane& src, double sigma) {
  if (sigma < 1e-6) return src;
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kern(static_cast<size_t>(radius) * 2 + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    double e = std::exp(-0.5 * i * i / (sigma * sigma));
    kern[static_cast<size_t>(i + radius)] = e;
    sum += e;
  }
  for (auto& k : kern) k /= sum;

  Plane tmp(src.h, src.w), out(src.h, src.w);
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        int xx = std::clamp(x + i, 0, src.w - 1);
        acc += kern[static_cast<size_t>(i + radius)] * src.at(y, xx);
      }
      tmp.at(y, x) = static_cast<float>(acc);
    }
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        int yy = std::clamp(y + i, 0, src.h - 1);
        acc += kern[static_cast<size_t>(i + radius)] * tmp.at(yy, x);
      }
      out.at(y, x) = static_cast<float>(acc);
    }
  return out;
}

Plane downsample2(const Plane& src) {
  Plane out(src.h / 2, src.w / 2);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) out.at(y, x) = src.at(2 * y, 2 * x);
  return out;
}

}  // namespace

KeypointList dog_keypoints(const ImageTensor& img, const DogParams& params) {
  KeypointList result;
  if (img.height < 16 || img.width < 16) {
    result.too_small = true;
    return result;
  }

  const int s = params.scales_per_octave;
  const double k = std::pow(2.0, 1.0 / s);
  const int levels = s + 3;  // gaussians per octave; s DoG layers searchable

  Plane base;
  base.h = img.height;
  base.w = img.width;
  base.v = to_gray(img);
  // lift the input (nominal sigma 0.5) to the base scale of the pyramid
  base = blur(base, std::sqrt(std::max(params.sigma * params.sigma - 0.25, 0.01)));

  const double r = params.edge_ratio;
  const double edge_limit = (r + 1.0) * (r + 1.0) / r;

  for (int octave = 0; octave < params.octaves; ++octave) {
    if (base.h < 8 || base.w < 8) break;
    std::vector<Plane> gauss(static_cast<size_t>(levels));
    gauss[0] = base;
    for (int i = 1; i < levels; ++i) {
      double prev = params.sigma * std::pow(k, i - 1);
      double cur = prev * k;
      gauss[static_cast<size_t>(i)] =
          blur(gauss[static_cast<size_t>(i - 1)], std::sqrt(cur * cur - prev * prev));
    }
    std::vector<Plane> dog(static_cast<size_t>(levels - 1));
    for (int i = 0; i < levels - 1; ++i) {
      dog[static_cast<size_t>(i)] = Plane(base.h, base.w);
      for (size_t j = 0; j < dog[static_cast<size_t>(i)].v.size(); ++j)
        dog[static_cast<size_t>(i)].v[j] =
            gauss[static_cast<size_t>(i + 1)].v[j] - gauss[static_cast<size_t>(i)].v[j];
    }

    const int scale_mul = 1 << octave;
    for (int layer = 1; layer <= s; ++layer) {
      const Plane& d0 = dog[static_cast<size_t>(layer - 1)];
      const Plane& d1 = dog[static_cast<size_t>(layer)];
      const Plane& d2 = dog[static_cast<size_t>(layer + 1)];
      for (int y = 1; y < base.h - 1; ++y)
        for (int x = 1; x < base.w - 1; ++x) {
          float c = d1.at(y, x);
          if (std::fabs(c) < params.contrast_threshold) continue;
          bool is_max = true, is_min = true;
          for (int dy = -1; dy <= 1 && (is_max || is_min); ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              float a = d0.at(y + dy, x + dx);
              float b = d1.at(y + dy, x + dx);
              float e = d2.at(y + dy, x + dx);
              if (a >= c || e >= c || (b >= c && (dy || dx))) is_max = false;
              if (a <= c || e <= c || (b <= c && (dy || dx))) is_min = false;
              if (!is_max && !is_min) break;
            }
          if (!is_max && !is_min) continue;
          // principal-curvature (edge) test on the 2x2 spatial Hessian
          double dxx = d1.at(y, x + 1) + d1.at(y, x - 1) - 2.0 * c;
          double dyy = d1.at(y + 1, x) + d1.at(y - 1, x) - 2.0 * c;
          double dxy = (d1.at(y + 1, x + 1) - d1.at(y + 1, x - 1) - d1.at(y - 1, x + 1) +
                        d1.at(y - 1, x - 1)) /
                       4.0;
          double tr = dxx + dyy;
          double det = dxx * dyy - dxy * dxy;
          if (det <= 0 || tr * tr / det >= edge_limit) continue;
          Keypoint kp;
          kp.x = static_cast<double>(x) * scale_mul;
          kp.y = static_cast<double>(y) * scale_mul;
          kp.scale = params.sigma * std::pow(k, layer) * scale_mul;
          kp.response = c;
          result.points.push_back(kp);
        }
    }
    // next octave starts from the gaussian at twice the base sigma
    base = downsample2(gauss[static_cast<size_t>(s)]);
  }
  return result;
}

std::vector<int> keypoints_per_patch(const KeypointList& kps, const PatchGrid& grid) {
  std::vector<int> counts(static_cast<size_t>(grid.total()), 0);
  for (const auto& kp : kps.points) counts[static_cast<size_t>(grid.patch_of(kp.x, kp.y))] += 1;
  return counts;
}

void save_keypoints_csv(const KeypointList& kps, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("keypoints: cannot open " + path.string());
  f << "x,y,scale,response\n";
  char line[128];
  for (const auto& kp : kps.points) {
    std::snprintf(line, sizeof line, "%.3f,%.3f,%.4f,%.6f\n", kp.x, kp.y, kp.scale, kp.response);
    f << line;
  }
}

}  // namespace semlink::vision
