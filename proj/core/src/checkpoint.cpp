#include "solido/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace solido {

namespace {

const std::array<std::uint32_t, 256>& crc_table() {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  return table;
}

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& buf, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(buf, v);
}

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const { require(pos + n <= buf.size(), "checkpoint: truncated file"); }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[pos + static_cast<std::size_t>(i)];
    pos += 4;
    return v;
  }
  float f32() {
    std::uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(&buf[pos]), n);
    pos += n;
    return s;
  }
};

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t seed) {
  std::uint32_t c = seed ^ 0xffffffffu;
  for (std::size_t i = 0; i < n; ++i) c = crc_table()[(c ^ data[i]) & 0xff] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

void Checkpoint::put(const std::string& name, const Tensor& t) {
  Entry e;
  e.shape = t.shape();
  e.data.reserve(t.numel());
  for (double v : t.data()) e.data.push_back(static_cast<float>(v));
  tensors[name] = std::move(e);
}

Tensor Checkpoint::get(const std::string& name) const {
  auto it = tensors.find(name);
  require(it != tensors.end(), "checkpoint: no tensor named '" + name + "'");
  std::vector<double> d(it->second.data.begin(), it->second.data.end());
  return Tensor::from(it->second.shape, std::move(d));
}

void Checkpoint::store(const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) {
    require(tensors.count(p->name) == 0, "checkpoint: duplicate tensor name '" + p->name + "'");
    put(p->name, p->tensor);
  }
}

void Checkpoint::restore(const std::vector<Parameter*>& params) const {
  std::string missing;
  for (const Parameter* p : params)
    if (!tensors.count(p->name)) missing += (missing.empty() ? "" : ", ") + p->name;
  require(missing.empty(), "checkpoint: missing tensors for: " + missing);
  for (Parameter* p : params) {
    const Entry& e = tensors.at(p->name);
    require(e.shape == p->tensor.shape(), "checkpoint: shape mismatch for '" + p->name + "': file " +
                                              shape_str(e.shape) + " vs model " + shape_str(p->tensor.shape()));
    auto dst = p->tensor.mut_data();
    for (std::size_t i = 0; i < e.data.size(); ++i) dst[i] = static_cast<double>(e.data[i]);
  }
}

void Checkpoint::save(const std::string& path) const {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), {'S', 'L', 'D', 'O'});
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(config_json.size()));
  buf.insert(buf.end(), config_json.begin(), config_json.end());
  put_u32(buf, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, e] : tensors) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    put_u32(buf, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) put_u32(buf, static_cast<std::uint32_t>(d));
    for (float f : e.data) put_f32(buf, f);
  }
  put_u32(buf, crc32(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary);
  require(out.good(), "checkpoint: cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  require(out.good(), "checkpoint: write failure on " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "checkpoint: cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(buf.size() >= 16, "checkpoint: file too small");

  std::uint32_t stored_crc = 0;
  for (int i = 3; i >= 0; --i) stored_crc = (stored_crc << 8) | buf[buf.size() - 4 + static_cast<std::size_t>(i)];
  require(crc32(buf.data(), buf.size() - 4) == stored_crc, "checkpoint: checksum failure (corrupted file)");

  Reader r{buf};
  require(r.str(4) == "SLDO", "checkpoint: bad magic");
  std::uint32_t version = r.u32();
  require(version == kVersion, "checkpoint: unsupported format version " + std::to_string(version));

  Checkpoint ck;
  std::uint32_t cfg_len = r.u32();
  ck.config_json = r.str(cfg_len);
  std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    std::uint32_t ndim = r.u32();
    Entry e;
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      e.shape.push_back(r.u32());
      numel *= e.shape.back();
    }
    e.data.resize(numel);
    for (std::size_t j = 0; j < numel; ++j) e.data[j] = r.f32();
    ck.tensors[name] = std::move(e);
  }
  return ck;
}

}  // namespace solido
