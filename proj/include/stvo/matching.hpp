#pragma once

#include <vector>

#include "stvo/network.hpp"
#include "stvo/tensor.hpp"
#include "stvo/weights.hpp"

namespace stvo {

struct FeaturePair {
  DenseArray features;  // [D_f, H1/8, W1/8]
  DenseArray context;   // [D_c, H1/8, W1/8]
};

// Three stride-2 residual stages with replicate padding, then 1x1 heads for
// the matching and context rasters. `image` is [C,H1,W1] with values in
// [0,1]; single-channel images are broadcast to three channels. Throws
// BadDimensions unless H1 and W1 are divisible by 8.
FeaturePair extract_features(const DenseArray& image, const WeightStore& weights);

void add_feature_encoder_weights(WeightStore& store, const NetworkDims& dims,
                                 std::mt19937_64& rng);

// All-pairs correlation pyramid for one edge. Level l has shape
// (H, W, H >> l, W >> l) (floor halving); level 0 is
// <f_i[p], f_j[q]> / sqrt(D_f) and each further level 2x2-average-pools the
// target axes of the previous one.
struct CorrPyramid {
  std::vector<DenseArray> levels;
};

CorrPyramid build_pyramid(const DenseArray& feat_i, const DenseArray& feat_j, int levels);

// Bilinear (2R+1)^2 window around the correspondence at every level, with
// coordinates scaled by 2^-l. Channels are ordered level-major, then window
// row (dy), then window column (dx). Corners outside a level read as zero.
DenseArray lookup(const CorrPyramid& pyramid, const DenseArray& coords, int radius);

// Same values as build_pyramid + lookup without materializing the
// O((HW)^2) volumes: pooling the target features commutes with the dot
// product, so each level is evaluated against pooled copies of f_j.
class CorrelationSampler {
 public:
  CorrelationSampler(const DenseArray& feat_i, const DenseArray& feat_j, int levels);
  DenseArray lookup(const DenseArray& coords, int radius) const;

 private:
  const DenseArray* feat_i_;
  std::vector<DenseArray> pooled_j_;  // level l: [D, H >> l, W >> l]
  double scale_;
};

// Identity correspondence grid [2,H,W]: (x, y) at every pixel.
DenseArray coordinate_grid(int height, int width);

}  // namespace stvo
