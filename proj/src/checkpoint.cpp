#include "ddfusion/checkpoint.hpp"

#include "ddfusion/config.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ddf {

namespace {
constexpr char kMagic[4] = {'D', 'D', 'F', 'U'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}
}  // namespace

uint64_t Checkpoint::content_digest(const std::string& prefix) const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, t] : segments) {
    if (name.rfind(prefix, 0) != 0) continue;
    h = fnv1a64(name.data(), name.size(), h);
    auto c = t.to(torch::kFloat32).contiguous();
    h = fnv1a64(c.data_ptr<float>(), c.numel() * sizeof(float), h);
  }
  return h;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, 4);
  write_pod(out, version);
  write_pod(out, config_digest);
  write_pod(out, stage1_steps);
  write_pod(out, stage2_steps);
  write_pod(out, static_cast<uint32_t>(segments.size()));
  for (const auto& [name, t] : segments) {
    write_pod(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    auto c = t.to(torch::kFloat32).contiguous();
    write_pod(out, static_cast<uint32_t>(c.dim()));
    for (int64_t d = 0; d < c.dim(); ++d) write_pod(out, c.size(d));
    out.write(reinterpret_cast<const char*>(c.data_ptr<float>()),
              static_cast<std::streamsize>(c.numel() * sizeof(float)));
  }
  write_pod(out, content_digest());
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  Checkpoint ck;
  ck.version = read_pod<uint32_t>(in);
  if (ck.version != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version");
  ck.config_digest = read_pod<uint64_t>(in);
  ck.stage1_steps = read_pod<int64_t>(in);
  ck.stage2_steps = read_pod<int64_t>(in);
  const auto count = read_pod<uint32_t>(in);
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto ndim = read_pod<uint32_t>(in);
    std::vector<int64_t> shape(ndim);
    for (auto& d : shape) d = read_pod<int64_t>(in);
    auto t = torch::empty(shape, torch::kFloat32);
    in.read(reinterpret_cast<char*>(t.data_ptr<float>()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!in) throw std::runtime_error("checkpoint: truncated segment " + name);
    ck.segments[name] = t;
  }
  const auto stored = read_pod<uint64_t>(in);
  if (stored != ck.content_digest())
    throw std::runtime_error("checkpoint: content digest mismatch in " + path);
  return ck;
}

void Checkpoint::put_module(const std::string& prefix, const torch::nn::Module& m) {
  for (const auto& p : m.named_parameters())
    segments[prefix + "." + p.key()] = p.value().detach().to(torch::kFloat32).clone();
  for (const auto& b : m.named_buffers())
    segments[prefix + ".buf." + b.key()] = b.value().detach().to(torch::kFloat32).clone();
}

void Checkpoint::load_into(const std::string& prefix, torch::nn::Module& m) const {
  torch::NoGradGuard g;
  for (auto p : m.named_parameters()) {
    auto it = segments.find(prefix + "." + p.key());
    if (it == segments.end())
      throw std::runtime_error("checkpoint: missing segment " + prefix + "." + p.key());
    if (it->second.sizes() != p.value().sizes())
      throw std::runtime_error("checkpoint: shape mismatch for " + p.key());
    p.value().copy_(it->second.to(p.value().dtype()));
  }
  for (auto b : m.named_buffers()) {
    auto it = segments.find(prefix + ".buf." + b.key());
    if (it != segments.end()) b.value().copy_(it->second.to(b.value().dtype()));
  }
}

}  // namespace ddf
