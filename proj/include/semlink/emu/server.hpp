#pragma once

#include <atomic>
#include <mutex>
#include <string>

#include "semlink/emu/protocol.hpp"

struct sockaddr_in;

namespace semlink::emu {

struct ServerStats {
  uint64_t frames_ok = 0;
  uint64_t frames_dropped = 0;   // reassembly timeouts
  uint64_t frames_malformed = 0;
};

// Single-event-loop UDP channel service: reassembles data frames, applies
// the configured channel, and returns the impaired samples. Config messages
// swap the channel between frames (frame-atomic); pings echo, and a "stats"
// ping returns line-oriented counters.
class EmuServer {
 public:
  EmuServer(const std::string& bind_host, uint16_t port, EmuConfig initial, uint64_t seed);
  ~EmuServer();

  EmuServer(const EmuServer&) = delete;
  EmuServer& operator=(const EmuServer&) = delete;

  uint16_t port() const { return port_; }
  void run(std::atomic<bool>& stop);  // blocking; polls in ~50 ms ticks
  ServerStats stats() const;

 private:
  struct Pending;
  void handle_datagram(const uint8_t* data, size_t len, const ::sockaddr_in& peer);
  std::vector<float> apply_channel(const std::vector<float>& iq);

  int fd_ = -1;
  uint16_t port_ = 0;
  EmuConfig config_;
  uint64_t seed_;
  uint64_t frame_counter_ = 0;
  mutable std::mutex stats_mu_;
  ServerStats stats_;
  std::map<std::string, Pending>* pending_;  // keyed by peer+frame id
};

}  // namespace semlink::emu
