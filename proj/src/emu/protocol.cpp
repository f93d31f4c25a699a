#include "semlink/emu/protocol.hpp"

#include <cstring>

namespace semlink::emu {

namespace {

void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(static_cast<uint8_t>(v & 0xff));
  b.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<uint8_t> pack_frame(const FrameHeader& h, const uint8_t* payload, size_t len) {
  std::vector<uint8_t> out;
  out.reserve(kHeaderSize + len);
  put_u32(out, h.magic);
  out.push_back(h.version);
  out.push_back(h.msg_type);
  put_u32(out, h.frame_id);
  put_u32(out, h.total_samples);
  put_u16(out, h.chunk_idx);
  put_u16(out, h.chunk_cnt);
  if (len) out.insert(out.end(), payload, payload + len);
  return out;
}

bool parse_header(const uint8_t* data, size_t len, FrameHeader* out) {
  if (len < kHeaderSize) return false;
  FrameHeader h;
  h.magic = get_u32(data);
  h.version = data[4];
  h.msg_type = data[5];
  h.frame_id = get_u32(data + 6);
  h.total_samples = get_u32(data + 10);
  h.chunk_idx = get_u16(data + 14);
  h.chunk_cnt = get_u16(data + 16);
  if (h.magic != kMagic || h.version != kVersion) return false;
  *out = h;
  return true;
}

uint16_t chunk_count(uint32_t total_samples) {
  uint64_t bytes = static_cast<uint64_t>(total_samples) * 8;
  uint64_t n = (bytes + kMaxChunkPayload - 1) / kMaxChunkPayload;
  return static_cast<uint16_t>(n == 0 ? 1 : n);
}

size_t chunk_payload_bytes(uint32_t total_samples, uint16_t chunk_idx, uint16_t chunk_cnt) {
  uint64_t bytes = static_cast<uint64_t>(total_samples) * 8;
  if (chunk_idx + 1 < chunk_cnt) return kMaxChunkPayload;
  return static_cast<size_t>(bytes - static_cast<uint64_t>(chunk_cnt - 1) * kMaxChunkPayload);
}

std::vector<std::vector<uint8_t>> chunk_samples(MsgType type, uint32_t frame_id,
                                                const std::vector<float>& iq) {
  const uint32_t total = static_cast<uint32_t>(iq.size() / 2);
  const uint16_t cnt = chunk_count(total);
  const uint8_t* raw = reinterpret_cast<const uint8_t*>(iq.data());
  std::vector<std::vector<uint8_t>> out;
  out.reserve(cnt);
  size_t off = 0;
  for (uint16_t i = 0; i < cnt; ++i) {
    FrameHeader h;
    h.msg_type = static_cast<uint8_t>(type);
    h.frame_id = frame_id;
    h.total_samples = total;
    h.chunk_idx = i;
    h.chunk_cnt = cnt;
    size_t len = chunk_payload_bytes(total, i, cnt);
    out.push_back(pack_frame(h, raw + off, len));
    off += len;
  }
  return out;
}

std::vector<float> to_iq(const std::vector<std::complex<float>>& samples) {
  std::vector<float> iq(samples.size() * 2);
  for (size_t i = 0; i < samples.size(); ++i) {
    iq[2 * i] = samples[i].real();
    iq[2 * i + 1] = samples[i].imag();
  }
  return iq;
}

std::vector<std::complex<float>> from_iq(const std::vector<float>& iq) {
  std::vector<std::complex<float>> out(iq.size() / 2);
  for (size_t i = 0; i < out.size(); ++i) out[i] = {iq[2 * i], iq[2 * i + 1]};
  return out;
}

bool FrameAssembler::add(const FrameHeader& h, const uint8_t* payload, size_t len,
                         std::string* err) {
  if (h.total_samples > kMaxSamples || h.chunk_cnt == 0 || h.chunk_idx >= h.chunk_cnt) {
    if (err) *err = "chunk header out of range";
    return false;
  }
  if (h.chunk_cnt != chunk_count(h.total_samples)) {
    if (err) *err = "chunk count does not match total_samples";
    return false;
  }
  if (len != chunk_payload_bytes(h.total_samples, h.chunk_idx, h.chunk_cnt)) {
    if (err) *err = "chunk payload length mismatch";
    return false;
  }
  if (expected_ == 0) {
    total_samples_ = h.total_samples;
    expected_ = h.chunk_cnt;
    iq_.assign(static_cast<size_t>(total_samples_) * 2, 0.0f);
    seen_.assign(static_cast<size_t>(expected_), false);
  } else if (h.total_samples != total_samples_ || h.chunk_cnt != expected_) {
    if (err) *err = "chunk disagrees with earlier chunks of the frame";
    return false;
  }
  size_t off = static_cast<size_t>(h.chunk_idx) * kMaxChunkPayload;
  std::memcpy(reinterpret_cast<uint8_t*>(iq_.data()) + off, payload, len);
  if (!seen_[h.chunk_idx]) {
    seen_[h.chunk_idx] = true;
    ++received_;
  }
  return true;
}

std::vector<uint8_t> pack_config(const EmuConfig& c) {
  std::vector<uint8_t> out;
  out.push_back(static_cast<uint8_t>(c.channel));
  uint32_t snr_bits;
  std::memcpy(&snr_bits, &c.snr_db, 4);
  put_u32(out, snr_bits);
  put_u32(out, static_cast<uint32_t>(c.seed & 0xffffffffu));
  put_u32(out, static_cast<uint32_t>(c.seed >> 32));
  put_u32(out, c.fft_size);
  put_u32(out, c.symbols_per_frame);
  out.push_back(c.taps);
  return out;
}

bool parse_config(const uint8_t* payload, size_t len, EmuConfig* out) {
  if (len != 22) return false;
  EmuConfig c;
  if (payload[0] > 3) return false;
  c.channel = static_cast<phy::ChannelModel>(payload[0]);
  uint32_t snr_bits = get_u32(payload + 1);
  std::memcpy(&c.snr_db, &snr_bits, 4);
  c.seed = static_cast<uint64_t>(get_u32(payload + 5)) |
           (static_cast<uint64_t>(get_u32(payload + 9)) << 32);
  c.fft_size = get_u32(payload + 13);
  c.symbols_per_frame = get_u32(payload + 17);
  c.taps = payload[21];
  *out = c;
  return true;
}

}  // namespace semlink::emu
