#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "stvo/tensor.hpp"

namespace stvo {

// Named tensors for every learned parameter. Unknown names are an error,
// never a silent default.
class WeightStore {
 public:
  WeightStore() = default;
  WeightStore(std::uint64_t seed, std::string init_scheme)
      : seed_(seed), init_scheme_(std::move(init_scheme)) {}

  const DenseArray& at(const std::string& name) const;
  DenseArray& at(const std::string& name);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  void set(const std::string& name, DenseArray value);
  std::vector<std::string> names() const;
  std::size_t size() const { return tensors_.size(); }

  std::uint64_t seed() const { return seed_; }
  const std::string& init_scheme() const { return init_scheme_; }

  // Adds a conv layer "<name>.weight" [out,in,k,k] drawn from
  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) (Kaiming-uniform with a = sqrt(5))
  // and a zero "<name>.bias" [out].
  void add_conv(const std::string& name, int out_channels, int in_channels,
                int kernel, std::mt19937_64& rng);

  // STVW container: "STVW", u32 count, then per tensor u16 name length,
  // utf-8 name, u8 rank, u32 dims, float64 values. Little-endian.
  void save(const std::filesystem::path& path) const;
  static WeightStore load(const std::filesystem::path& path);

  bool operator==(const WeightStore& other) const;

 private:
  std::map<std::string, DenseArray> tensors_;
  std::uint64_t seed_ = 0;
  std::string init_scheme_ = "external";
};

}  // namespace stvo
