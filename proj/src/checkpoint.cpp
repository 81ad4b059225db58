#include "palx/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace palx {

namespace {

constexpr char kMagic[4] = {'P', 'A', 'L', 'X'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<uint64_t>(d)); }

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n) const {
    if (pos + n > buf.size())
      throw ParseError(path + ": truncated checkpoint (need " + std::to_string(n) +
                       " bytes at offset " + std::to_string(pos) + ")");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void NamedTensors::put(const std::string& name, Tensor t) {
  if (contains(name)) throw ContractError("duplicate checkpoint record name: " + name);
  if (!t.defined()) throw ContractError("undefined tensor for checkpoint record: " + name);
  items_.emplace_back(name, std::move(t));
}

bool NamedTensors::contains(const std::string& name) const {
  for (const auto& [n, _] : items_)
    if (n == name) return true;
  return false;
}

const Tensor& NamedTensors::at(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return t;
  throw SchemaError("checkpoint record not found: " + name);
}

void save_checkpoint(const std::string& path, const NamedTensors& records) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(records.size()));
  for (const auto& [name, t] : records.items()) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    const Shape& s = t.shape();
    put_u32(out, static_cast<uint32_t>(s.size()));
    for (int d : s) put_u64(out, static_cast<uint64_t>(d));
    const double* v = t.data();
    for (int64_t i = 0; i < t.size(); ++i) put_f64(out, v[i]);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("short write to checkpoint: " + path);
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf, 0, path};
  if (r.bytes(4) != std::string(kMagic, 4))
    throw ParseError(path + ": not a checkpoint file (bad magic)");
  uint32_t version = r.u32();
  if (version != kVersion)
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  uint32_t count = r.u32();
  NamedTensors out;
  for (uint32_t k = 0; k < count; ++k) {
    uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    uint32_t rank = r.u32();
    Shape shape;
    int64_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      uint64_t d = r.u64();
      if (d == 0 || d > (1u << 30))
        throw ParseError(path + ": implausible dimension " + std::to_string(d) +
                         " in record " + name);
      shape.push_back(static_cast<int>(d));
      numel *= static_cast<int64_t>(d);
    }
    std::vector<double> data(numel);
    for (int64_t i = 0; i < numel; ++i) data[i] = r.f64();
    out.put(name, Tensor(shape, std::move(data)));
  }
  if (r.pos != buf.size())
    throw ParseError(path + ": trailing bytes after last record");
  return out;
}

}  // namespace palx
