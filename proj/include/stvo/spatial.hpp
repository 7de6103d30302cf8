#pragma once

// Spatial activation: a depth-derived attention matrix over the HW pixels of
// a keyframe, used to blend context and motion features spatially.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>

#include "stvo/camera.hpp"
#include "stvo/network.hpp"
#include "stvo/tape.hpp"
#include "stvo/weights.hpp"

namespace stvo {

// kRaw feeds depths straight into the projections. kStandardized feeds the
// inverse depth shifted to zero mean and scaled to unit variance over the
// frame, which makes the matrix invariant to global depth scale.
enum class DepthNormalization { kRaw, kStandardized };

inline constexpr std::size_t kDefaultSamBudgetBytes = std::size_t{256} << 20;

// Projection input z [HW,1] for a depth raster [H,W]. Throws InvalidDepth on
// non-positive or non-finite entries.
DenseArray attention_input(const DenseArray& depth, DepthNormalization mode);

// Throws MemoryBudget when an N x N float64 matrix exceeds `budget_bytes`.
void check_sam_budget(std::size_t pixels, std::size_t budget_bytes);

// softmax_rows((z W_q)(z W_k)^T) for z [N,1] and W_q, W_k [1,D_in].
ad::Var build_sam(ad::Tape& t, ad::Var z, ad::Var w_q, ad::Var w_k);

// Tape-free SAM [HW,HW] from a depth raster.
DenseArray build_sam(const DenseArray& depth, const DenseArray& w_q, const DenseArray& w_k,
                     DepthNormalization mode = DepthNormalization::kStandardized,
                     std::size_t budget_bytes = kDefaultSamBudgetBytes);

// x + alpha * (SAM x) per channel, x [C,H,W]. alpha = 0 returns x unchanged.
DenseArray activate(const DenseArray& feature, const DenseArray& sam, double alpha);
ad::Var activate(ad::Tape& t, ad::Var feature, ad::Var sam, ad::Var alpha);

void add_spatial_weights(WeightStore& store, const NetworkDims& dims, std::mt19937_64& rng);

enum class DepthSource { kExternal, kBa };

// Depth raster feeding the attention matrix. External mode reads the DPR1
// file (MissingDepthFile if absent); ba mode inverts the current inverse
// depths (DegenerateBADepth on any non-positive entry). External rasters at
// the input resolution are reduced to `height` x `width` by block averaging.
DenseArray select_depth_source(DepthSource mode,
                               const std::optional<std::filesystem::path>& external_file,
                               const InverseDepthMap& ba_inv_depth, int height, int width);

// DPR1: "DPR1", u32 H, u32 W, then H*W little-endian float32, row-major.
void write_depth_file(const std::filesystem::path& path, const DenseArray& depth);
DenseArray read_depth_file(const std::filesystem::path& path);

}  // namespace stvo
