#include "semlink/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace semlink::nn {

namespace {

const char kMagic[4] = {'S', 'L', 'N', 'N'};

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::vector<char>& buf;
  size_t pos = 0;

  void need(size_t n, const char* what) {
    if (pos + n > buf.size())
      throw std::runtime_error("checkpoint truncated reading " + std::string(what) +
                               " at byte " + std::to_string(pos));
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<uint8_t>(buf[pos++]);
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint8_t>(buf[pos]) |
                 (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  float f32(const char* what) {
    uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::map<std::string, TensorF>& tensors) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xffff)
      throw std::invalid_argument("checkpoint: tensor name too long: " + name);
    if (t.rank() > 0xff) throw std::invalid_argument("checkpoint: rank too large: " + name);
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.append(name);
    out.push_back(static_cast<char>(t.rank()));
    for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
    for (float v : t.data) put_f32(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open for write: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

std::map<std::string, TensorF> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf};
  r.need(4, "magic");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  r.pos = 4;
  uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  uint32_t count = r.u32("tensor count");
  std::map<std::string, TensorF> out;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t nlen = r.u16("name length");
    r.need(nlen, "name");
    std::string name(buf.data() + r.pos, nlen);
    r.pos += nlen;
    uint8_t rank = r.u8("rank");
    std::vector<int> shape(rank);
    size_t numel = 1;
    for (int d = 0; d < rank; ++d) {
      shape[static_cast<size_t>(d)] = static_cast<int>(r.u32("dim"));
      numel *= static_cast<size_t>(shape[static_cast<size_t>(d)]);
    }
    TensorF t(shape);
    for (size_t j = 0; j < numel; ++j) t.data[j] = r.f32("tensor data");
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace semlink::nn
