#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "semlink/phy/link.hpp"

namespace semlink::emu {

// Wire format (all multi-byte fields little-endian):
//   u32 magic 0x49435021, u8 version (=1), u8 msg_type, u32 frame_id,
//   u32 total_samples, u16 chunk_idx, u16 chunk_cnt, payload.
// Data payloads are interleaved 32-bit float I/Q, at most 1400 bytes per
// chunk (non-final chunks exactly 1400).
inline constexpr uint32_t kMagic = 0x49435021;
inline constexpr uint8_t kVersion = 1;
inline constexpr size_t kHeaderSize = 18;
inline constexpr size_t kMaxChunkPayload = 1400;
inline constexpr uint32_t kMaxSamples = 1u << 31;

enum class MsgType : uint8_t {
  kData = 0,
  kConfig = 1,
  kPing = 2,
  kDataResponse = 3,
  kConfigAck = 4,
};

struct FrameHeader {
  uint32_t magic = kMagic;
  uint8_t version = kVersion;
  uint8_t msg_type = 0;
  uint32_t frame_id = 0;
  uint32_t total_samples = 0;
  uint16_t chunk_idx = 0;
  uint16_t chunk_cnt = 1;
};

std::vector<uint8_t> pack_frame(const FrameHeader& h, const uint8_t* payload, size_t len);
// false on short datagram, bad magic, or unsupported version
bool parse_header(const uint8_t* data, size_t len, FrameHeader* out);

// expected chunk count / payload length for a sample count
uint16_t chunk_count(uint32_t total_samples);
size_t chunk_payload_bytes(uint32_t total_samples, uint16_t chunk_idx, uint16_t chunk_cnt);

// raw float32 sample buffer <-> datagram set
std::vector<std::vector<uint8_t>> chunk_samples(MsgType type, uint32_t frame_id,
                                                const std::vector<float>& iq);

std::vector<float> to_iq(const std::vector<std::complex<float>>& samples);
std::vector<std::complex<float>> from_iq(const std::vector<float>& iq);

// Order-insensitive reassembly of one frame's chunks.
class FrameAssembler {
 public:
  // returns false and sets *err on an inconsistent chunk (malformed)
  bool add(const FrameHeader& h, const uint8_t* payload, size_t len, std::string* err);
  bool complete() const { return expected_ > 0 && received_ == expected_; }
  const std::vector<float>& iq() const { return iq_; }
  uint32_t total_samples() const { return total_samples_; }

 private:
  std::vector<float> iq_;
  std::vector<bool> seen_;
  uint32_t total_samples_ = 0;
  int expected_ = 0;
  int received_ = 0;
};

// Channel configuration carried by config messages. The frame-geometry
// fields mirror the testbed parameters and are advisory metadata; the
// emulator itself is baseband and sample-rate agnostic.
struct EmuConfig {
  phy::ChannelModel channel = phy::ChannelModel::kNoiseless;
  float snr_db = 10.0f;
  uint64_t seed = 1;
  uint32_t fft_size = 256;           // advisory (testbed preset)
  uint32_t symbols_per_frame = 41;   // advisory (testbed preset)
  uint8_t taps = 8;
};

std::vector<uint8_t> pack_config(const EmuConfig& c);
bool parse_config(const uint8_t* payload, size_t len, EmuConfig* out);

}  // namespace semlink::emu
