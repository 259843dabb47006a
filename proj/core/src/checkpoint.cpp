#include "hearken/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hearken {

namespace {
constexpr const char* kMagic = "hearken-checkpoint v1";

// Stored little-endian; this codebase targets little-endian hosts.
static_assert(sizeof(double) == 8, "checkpoint format assumes 8-byte doubles");
}  // namespace

std::uint64_t ParamRegistry::content_hash() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a offset basis
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& e : entries_) {
    mix_bytes(e.name.data(), e.name.size());
    for (int d : e.value.shape) mix_bytes(&d, sizeof(d));
    mix_bytes(e.value.data.data(), e.value.data.size() * sizeof(double));
  }
  return h;
}

std::string serialize_params(const ParamRegistry& reg) {
  std::ostringstream manifest;
  manifest << kMagic << '\n';
  manifest << "count " << reg.size() << '\n';
  std::size_t offset = 0;
  for (const auto& e : reg.entries()) {
    manifest << e.name << ' ' << e.value.shape.size();
    for (int d : e.value.shape) manifest << ' ' << d;
    manifest << ' ' << (e.trainable ? 1 : 0) << ' ' << offset << '\n';
    offset += e.value.data.size() * sizeof(double);
  }
  manifest << "DATA\n";

  std::string out = manifest.str();
  const std::size_t header_len = out.size();
  out.resize(header_len + offset);
  std::size_t cursor = header_len;
  for (const auto& e : reg.entries()) {
    const std::size_t n = e.value.data.size() * sizeof(double);
    std::memcpy(out.data() + cursor, e.value.data.data(), n);
    cursor += n;
  }
  return out;
}

ParamRegistry deserialize_params(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw std::runtime_error("checkpoint: bad magic/version line");
  }
  if (!std::getline(in, line) || line.rfind("count ", 0) != 0) {
    throw std::runtime_error("checkpoint: missing count line");
  }
  const std::size_t count = std::stoul(line.substr(6));

  struct Rec {
    std::string name;
    std::vector<int> shape;
    bool trainable;
    std::size_t offset;
  };
  std::vector<Rec> recs;
  recs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated manifest");
    std::istringstream ls(line);
    Rec r;
    std::size_t ndim = 0;
    ls >> r.name >> ndim;
    r.shape.resize(ndim);
    for (auto& d : r.shape) ls >> d;
    int trainable = 0;
    ls >> trainable >> r.offset;
    if (!ls) throw std::runtime_error("checkpoint: malformed manifest line: " + line);
    r.trainable = trainable != 0;
    recs.push_back(std::move(r));
  }
  if (!std::getline(in, line) || line != "DATA") {
    throw std::runtime_error("checkpoint: missing DATA marker");
  }
  const std::size_t data_start = static_cast<std::size_t>(in.tellg());

  ParamRegistry reg;
  for (const auto& r : recs) {
    Tensor t = Tensor::zeros(r.shape);
    const std::size_t n = t.data.size() * sizeof(double);
    if (data_start + r.offset + n > bytes.size()) {
      throw std::runtime_error("checkpoint: data section truncated for " + r.name);
    }
    std::memcpy(t.data.data(), bytes.data() + data_start + r.offset, n);
    reg.add(r.name, std::move(t), r.trainable);
  }
  return reg;
}

void save_checkpoint(const std::string& path, const ParamRegistry& reg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  const std::string bytes = serialize_params(reg);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

ParamRegistry load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_params(ss.str());
}

}  // namespace hearken
