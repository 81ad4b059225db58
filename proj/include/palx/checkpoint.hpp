#pragma once

#include <string>
#include <utility>
#include <vector>

#include "palx/tensor.hpp"

namespace palx {

// Ordered name -> tensor records; order is part of the on-disk byte layout,
// so identical insertion order yields bit-identical files.
class NamedTensors {
 public:
  void put(const std::string& name, Tensor t);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  size_t size() const { return items_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// Binary container: magic "PALX", u32 version, u32 record count, then per
// record u32 name length, name bytes, u32 rank, u64 dims, little-endian
// float64 payload. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const NamedTensors& records);
NamedTensors load_checkpoint(const std::string& path);

}  // namespace palx
