#pragma once

#include <complex>
#include <string>
#include <vector>

#include "semlink/emu/protocol.hpp"

namespace semlink::emu {

// Blocking UDP client for the channel service: one in-flight frame at a
// time, 2 s response timeout with up to 3 resends. Use one client (socket)
// per worker.
class EmuClient {
 public:
  EmuClient(const std::string& host, uint16_t port, int timeout_ms = 2000, int retries = 3);
  ~EmuClient();

  EmuClient(const EmuClient&) = delete;
  EmuClient& operator=(const EmuClient&) = delete;

  // chunks, transmits, reassembles the impaired response (order preserved)
  std::vector<std::complex<float>> send_frame(const std::vector<std::complex<float>>& samples);

  void configure(const EmuConfig& config);  // waits for the ack

  std::string ping(const std::string& payload = "");  // echo; "stats" returns counters
  std::string stats_text() { return ping("stats"); }

  // sends unit-power reference samples and returns 10*log10(P_signal/P_error),
  // capped at 200 dB for a bit-exact echo
  double calibrate(size_t n_samples, uint64_t seed);

 private:
  bool await(uint8_t want_type, uint32_t frame_id, FrameAssembler* assembler,
             std::vector<uint8_t>* single_payload, int deadline_ms);

  int fd_ = -1;
  int timeout_ms_;
  int retries_;
  uint32_t next_frame_id_ = 1;
};

}  // namespace semlink::emu
