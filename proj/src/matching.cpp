#include "stvo/matching.hpp"

#include <cmath>
#include <string>

#include "stvo/error.hpp"
#include "stvo/kernels.hpp"
#include "stvo/ops.hpp"

namespace stvo {

namespace {

constexpr int kStages = 3;

std::vector<int> stage_widths(int width) {
  return {std::max(width / 2, 1), std::max(3 * width / 4, 1), std::max(width, 1)};
}

DenseArray conv(const DenseArray& x, const WeightStore& w, const std::string& name,
                int stride) {
  const DenseArray& k = w.at(name + ".weight");
  return ops::conv2d(x, k, w.at(name + ".bias"),
                     ops::Conv2dSpec::same(k.dim(2), stride, kernels::PadMode::kReplicate));
}

// Per-corner zero-padded bilinear sample of the trailing [hl,wl] plane.
double sample_plane(const double* plane, int hl, int wl, double sx, double sy) {
  const double fx = std::floor(sx), fy = std::floor(sy);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const double tx = sx - fx, ty = sy - fy;
  double acc = 0.0;
  auto tap = [&](int yy, int xx, double wgt) {
    if (wgt != 0.0 && xx >= 0 && xx < wl && yy >= 0 && yy < hl) {
      acc += wgt * plane[static_cast<std::size_t>(yy) * wl + xx];
    }
  };
  tap(y0, x0, (1 - tx) * (1 - ty));
  tap(y0, x0 + 1, tx * (1 - ty));
  tap(y0 + 1, x0, (1 - tx) * ty);
  tap(y0 + 1, x0 + 1, tx * ty);
  return acc;
}

DenseArray pool_features(const DenseArray& f) {
  const int d = f.dim(0), h = f.dim(1) / 2, w = f.dim(2) / 2;
  DenseArray out({d, h, w});
  for (int c = 0; c < d; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out(c, y, x) = 0.25 * (f(c, 2 * y, 2 * x) + f(c, 2 * y, 2 * x + 1) +
                               f(c, 2 * y + 1, 2 * x) + f(c, 2 * y + 1, 2 * x + 1));
  return out;
}

void check_coords(const DenseArray& coords, int h, int w) {
  require_shape(coords, {2, h, w}, "correlation lookup coordinates");
}

}  // namespace

void add_feature_encoder_weights(WeightStore& store, const NetworkDims& dims,
                                 std::mt19937_64& rng) {
  const auto widths = stage_widths(dims.encoder_width);
  int in = 3;
  for (int s = 0; s < kStages; ++s) {
    const std::string p = "enc.s" + std::to_string(s + 1);
    store.add_conv(p + ".conv1", widths[s], in, 3, rng);
    store.add_conv(p + ".conv2", widths[s], widths[s], 3, rng);
    store.add_conv(p + ".skip", widths[s], in, 1, rng);
    in = widths[s];
  }
  store.add_conv("enc.fmap", dims.feature_dim, in, 1, rng);
  store.add_conv("enc.cmap", dims.context_dim, in, 1, rng);
}

FeaturePair extract_features(const DenseArray& image, const WeightStore& weights) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw Error(ErrorCode::kBadDimensions, "image must be [1|3,H,W]");
  }
  const int h = image.dim(1), w = image.dim(2);
  if (h % 8 != 0 || w % 8 != 0 || h == 0 || w == 0) {
    throw Error(ErrorCode::kBadDimensions,
                std::to_string(w) + "x" + std::to_string(h) + " not divisible by 8");
  }
  DenseArray x({3, h, w});
  for (int c = 0; c < 3; ++c) {
    const int src = image.dim(0) == 1 ? 0 : c;
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) x(c, y, xx) = 2.0 * image(src, y, xx) - 1.0;
  }
  for (int s = 0; s < kStages; ++s) {
    const std::string p = "enc.s" + std::to_string(s + 1);
    DenseArray y = ops::relu(conv(x, weights, p + ".conv1", 2));
    y = conv(y, weights, p + ".conv2", 1);
    x = ops::relu(ops::add(y, conv(x, weights, p + ".skip", 2)));
  }
  return {conv(x, weights, "enc.fmap", 1), conv(x, weights, "enc.cmap", 1)};
}

CorrPyramid build_pyramid(const DenseArray& feat_i, const DenseArray& feat_j, int levels) {
  require_same_shape(feat_i, feat_j, "build_pyramid");
  if (feat_i.rank() != 3 || levels < 1) {
    throw Error(ErrorCode::kShapeMismatch, "build_pyramid expects [D,H,W] and L >= 1");
  }
  const int d = feat_i.dim(0), h = feat_i.dim(1), w = feat_i.dim(2);
  CorrPyramid pyr;
  DenseArray level0({h, w, h, w});
  kernels::correlation(d, h, w, h, w, feat_i.data(), feat_j.data(),
                       1.0 / std::sqrt(static_cast<double>(d)), level0.data());
  pyr.levels.push_back(std::move(level0));
  for (int l = 1; l < levels; ++l) {
    const DenseArray& prev = pyr.levels.back();
    const int hl = prev.dim(2), wl = prev.dim(3);
    if (hl < 2 || wl < 2) {
      throw Error(ErrorCode::kShapeMismatch, "too many pyramid levels for the raster");
    }
    DenseArray next({h, w, hl / 2, wl / 2});
    kernels::avg_pool_trailing(h, w, hl, wl, prev.data(), next.data());
    pyr.levels.push_back(std::move(next));
  }
  return pyr;
}

DenseArray lookup(const CorrPyramid& pyramid, const DenseArray& coords, int radius) {
  const DenseArray& l0 = pyramid.levels.at(0);
  const int h = l0.dim(0), w = l0.dim(1);
  check_coords(coords, h, w);
  const int win = 2 * radius + 1;
  const int levels = static_cast<int>(pyramid.levels.size());
  DenseArray out({win * win * levels, h, w});
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int l = 0; l < levels; ++l) {
        const DenseArray& vol = pyramid.levels[l];
        const int hl = vol.dim(2), wl = vol.dim(3);
        const double* plane = vol.ptr() + (static_cast<std::size_t>(y) * w + x) * hl * wl;
        const double s = 1.0 / static_cast<double>(1 << l);
        const double cx = coords(0, y, x) * s, cy = coords(1, y, x) * s;
        for (int dy = -radius; dy <= radius; ++dy) {
          for (int dx = -radius; dx <= radius; ++dx) {
            const int ch = l * win * win + (dy + radius) * win + (dx + radius);
            out(ch, y, x) = sample_plane(plane, hl, wl, cx + dx, cy + dy);
          }
        }
      }
    }
  }
  return out;
}

CorrelationSampler::CorrelationSampler(const DenseArray& feat_i, const DenseArray& feat_j,
                                       int levels)
    : feat_i_(&feat_i), scale_(1.0 / std::sqrt(static_cast<double>(feat_i.dim(0)))) {
  require_same_shape(feat_i, feat_j, "CorrelationSampler");
  pooled_j_.push_back(feat_j);
  for (int l = 1; l < levels; ++l) {
    if (pooled_j_.back().dim(1) < 2 || pooled_j_.back().dim(2) < 2) {
      throw Error(ErrorCode::kShapeMismatch, "too many pyramid levels for the raster");
    }
    pooled_j_.push_back(pool_features(pooled_j_.back()));
  }
}

DenseArray CorrelationSampler::lookup(const DenseArray& coords, int radius) const {
  const DenseArray& fi = *feat_i_;
  const int d = fi.dim(0), h = fi.dim(1), w = fi.dim(2);
  check_coords(coords, h, w);
  const int win = 2 * radius + 1;
  const int levels = static_cast<int>(pooled_j_.size());
  DenseArray out({win * win * levels, h, w});
#pragma omp parallel
  {
    std::vector<double> f(d);
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < d; ++c) f[c] = fi(c, y, x);
        for (int l = 0; l < levels; ++l) {
          const DenseArray& fj = pooled_j_[l];
          const int hl = fj.dim(1), wl = fj.dim(2);
          auto corr = [&](int v, int u) {
            if (u < 0 || u >= wl || v < 0 || v >= hl) return 0.0;
            double acc = 0.0;
            for (int c = 0; c < d; ++c) acc += f[c] * fj(c, v, u);
            return acc * scale_;
          };
          const double s = 1.0 / static_cast<double>(1 << l);
          const double cx = coords(0, y, x) * s, cy = coords(1, y, x) * s;
          for (int dy = -radius; dy <= radius; ++dy) {
            for (int dx = -radius; dx <= radius; ++dx) {
              const double sx = cx + dx, sy = cy + dy;
              const double fx = std::floor(sx), fy = std::floor(sy);
              const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
              const double tx = sx - fx, ty = sy - fy;
              double acc = 0.0;
              if ((1 - tx) * (1 - ty) != 0.0) acc += (1 - tx) * (1 - ty) * corr(y0, x0);
              if (tx * (1 - ty) != 0.0) acc += tx * (1 - ty) * corr(y0, x0 + 1);
              if ((1 - tx) * ty != 0.0) acc += (1 - tx) * ty * corr(y0 + 1, x0);
              if (tx * ty != 0.0) acc += tx * ty * corr(y0 + 1, x0 + 1);
              out(l * win * win + (dy + radius) * win + (dx + radius), y, x) = acc;
            }
          }
        }
      }
    }
  }
  return out;
}

DenseArray coordinate_grid(int height, int width) {
  DenseArray g({2, height, width});
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      g(0, y, x) = x;
      g(1, y, x) = y;
    }
  }
  return g;
}

}  // namespace stvo
