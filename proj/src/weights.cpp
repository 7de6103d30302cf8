#include "stvo/weights.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "stvo/error.hpp"

namespace stvo {

const DenseArray& WeightStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error(ErrorCode::kUnknownWeight, name);
  return it->second;
}

DenseArray& WeightStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error(ErrorCode::kUnknownWeight, name);
  return it->second;
}

void WeightStore::set(const std::string& name, DenseArray value) {
  tensors_[name] = std::move(value);
}

std::vector<std::string> WeightStore::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, _] : tensors_) out.push_back(name);
  return out;
}

void WeightStore::add_conv(const std::string& name, int out_channels,
                           int in_channels, int kernel, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel * kernel));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseArray w({out_channels, in_channels, kernel, kernel});
  for (double& v : w.data()) v = dist(rng);
  set(name + ".weight", std::move(w));
  set(name + ".bias", DenseArray({out_channels}));
}

void WeightStore::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kMalformedFile, "cannot write " + path.string());
  os.write("STVW", 4);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors_.size()));
  for (const auto& [name, t] : tensors_) {
    detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape()) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (double v : t.data()) detail::write_f64(os, v);
  }
  if (!os) throw Error(ErrorCode::kMalformedFile, "write failed: " + path.string());
}

WeightStore WeightStore::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kMalformedFile, "cannot open " + path.string());
  detail::expect_magic(is, "STVW");
  WeightStore store;
  const auto count = detail::read_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::read_le<std::uint16_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw Error(ErrorCode::kMalformedFile, "truncated name");
    const auto rank = detail::read_le<std::uint8_t>(is);
    if (rank > 4) throw Error(ErrorCode::kMalformedFile, "tensor rank > 4: " + name);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(detail::read_le<std::uint32_t>(is));
    DenseArray t(shape);
    for (double& v : t.data()) v = detail::read_f64(is);
    store.set(name, std::move(t));
  }
  return store;
}

bool WeightStore::operator==(const WeightStore& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (const auto& [name, t] : tensors_) {
    auto it = other.tensors_.find(name);
    if (it == other.tensors_.end() || !t.same_shape(it->second)) return false;
    if (!std::equal(t.data().begin(), t.data().end(), it->second.data().begin()))
      return false;
  }
  return true;
}

}  // namespace stvo
