#include "stvo/spatial.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "stvo/error.hpp"
#include "stvo/ops.hpp"

namespace stvo {

DenseArray attention_input(const DenseArray& depth, DepthNormalization mode) {
  if (depth.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "depth raster must be [H,W]");
  for (double v : depth.data()) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidDepth, "depth " + std::to_string(v));
    }
  }
  const int n = static_cast<int>(depth.size());
  DenseArray z({n, 1});
  if (mode == DepthNormalization::kRaw) {
    for (int i = 0; i < n; ++i) z[i] = depth[i];
    return z;
  }
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += 1.0 / depth[i];
  mean /= n;
  double var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c = 1.0 / depth[i] - mean;
    var += c * c;
  }
  var /= n;
  // A flat frame carries no spatial structure: every logit is equal.
  if (!(var > 1e-24)) return z;
  const double inv_std = 1.0 / std::sqrt(var);
  for (int i = 0; i < n; ++i) z[i] = (1.0 / depth[i] - mean) * inv_std;
  return z;
}

void check_sam_budget(std::size_t pixels, std::size_t budget_bytes) {
  const long double bytes = static_cast<long double>(pixels) * pixels * sizeof(double);
  if (bytes > static_cast<long double>(budget_bytes)) {
    throw Error(ErrorCode::kMemoryBudget,
                "attention matrix for " + std::to_string(pixels) + " pixels needs " +
                    std::to_string(static_cast<unsigned long long>(bytes)) +
                    " bytes, budget is " + std::to_string(budget_bytes));
  }
}

ad::Var build_sam(ad::Tape& t, ad::Var z, ad::Var w_q, ad::Var w_k) {
  ad::Var q = ad::matmul_abt(t, z, ad::transpose2d(t, w_q));
  ad::Var k = ad::matmul_abt(t, z, ad::transpose2d(t, w_k));
  return ad::softmax_rows(t, ad::matmul_abt(t, q, k));
}

DenseArray build_sam(const DenseArray& depth, const DenseArray& w_q, const DenseArray& w_k,
                     DepthNormalization mode, std::size_t budget_bytes) {
  if (w_q.rank() != 2 || w_q.dim(0) != 1 || !w_q.same_shape(w_k)) {
    throw Error(ErrorCode::kShapeMismatch, "attention projections must be [1,D_in]");
  }
  DenseArray z = attention_input(depth, mode);
  check_sam_budget(z.size(), budget_bytes);
  ad::Tape t(/*recording=*/false);
  ad::Var sam = build_sam(t, t.input(std::move(z)), t.param(w_q), t.param(w_k));
  return t.value(sam);
}

DenseArray activate(const DenseArray& feature, const DenseArray& sam, double alpha) {
  if (alpha == 0.0) {
    if (feature.rank() != 3) throw Error(ErrorCode::kShapeMismatch, "feature must be [C,H,W]");
    const int n = feature.dim(1) * feature.dim(2);
    require_shape(sam, {n, n}, "activate SAM");
    return feature;
  }
  return ops::add(feature, ops::scale(ops::spatial_mix(sam, feature), alpha));
}

ad::Var activate(ad::Tape& t, ad::Var feature, ad::Var sam, ad::Var alpha) {
  return ad::add(t, feature, ad::scalar_mul(t, alpha, ad::spatial_mix(t, sam, feature)));
}

void add_spatial_weights(WeightStore& store, const NetworkDims& dims, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (const char* name : {"sam.w_q", "sam.w_k"}) {
    DenseArray w({1, dims.attention_dim});
    for (double& v : w.data()) v = dist(rng);
    store.set(name, std::move(w));
  }
  store.set("sam.alpha_context", DenseArray({1}));
  store.set("sam.alpha_motion", DenseArray({1}));
}

DenseArray select_depth_source(DepthSource mode,
                               const std::optional<std::filesystem::path>& external_file,
                               const InverseDepthMap& ba_inv_depth, int height, int width) {
  if (mode == DepthSource::kBa) {
    const DenseArray& inv = ba_inv_depth.values();
    require_shape(inv, {height, width}, "ba inverse depth");
    DenseArray depth({height, width});
    for (std::size_t i = 0; i < inv.size(); ++i) {
      if (!(inv[i] > 0.0) || !std::isfinite(inv[i])) {
        throw Error(ErrorCode::kDegenerateBADepth, "inverse depth " + std::to_string(inv[i]));
      }
      depth[i] = 1.0 / inv[i];
    }
    return depth;
  }
  if (!external_file || !std::filesystem::exists(*external_file)) {
    throw Error(ErrorCode::kMissingDepthFile,
                external_file ? external_file->string() : std::string("no depth file for frame"));
  }
  DenseArray raw = read_depth_file(*external_file);
  const int rh = raw.dim(0), rw = raw.dim(1);
  if (rh == height && rw == width) return raw;
  if (rh % height != 0 || rw % width != 0 || rh / height != rw / width) {
    throw Error(ErrorCode::kBadDimensions, "depth file " + external_file->string() + " is " +
                                               std::to_string(rw) + "x" + std::to_string(rh));
  }
  const int f = rh / height;
  DenseArray depth({height, width});
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < f; ++dy)
        for (int dx = 0; dx < f; ++dx) acc += raw(y * f + dy, x * f + dx);
      depth(y, x) = acc / (f * f);
    }
  }
  return depth;
}

void write_depth_file(const std::filesystem::path& path, const DenseArray& depth) {
  if (depth.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "depth raster must be [H,W]");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kMalformedFile, "cannot write " + path.string());
  os.write("DPR1", 4);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(depth.dim(0)));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(depth.dim(1)));
  for (double v : depth.data()) detail::write_f32(os, static_cast<float>(v));
  if (!os) throw Error(ErrorCode::kMalformedFile, "write failed: " + path.string());
}

DenseArray read_depth_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kMissingDepthFile, path.string());
  detail::expect_magic(is, "DPR1");
  const auto h = detail::read_le<std::uint32_t>(is);
  const auto w = detail::read_le<std::uint32_t>(is);
  if (h == 0 || w == 0 || h > 1u << 15 || w > 1u << 15) {
    throw Error(ErrorCode::kMalformedFile, "implausible depth raster size in " + path.string());
  }
  DenseArray depth({static_cast<int>(h), static_cast<int>(w)});
  for (double& v : depth.data()) v = detail::read_f32(is);
  return depth;
}

}  // namespace stvo
