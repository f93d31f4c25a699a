#include "semlink/emu/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <thread>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "semlink/common/rng.hpp"
#include "semlink/phy/channel.hpp"

namespace semlink::emu {

namespace {

using clock_type = std::chrono::steady_clock;
constexpr auto kReassemblyTimeout = std::chrono::seconds(2);

void enlarge_buffers(int fd) {
  int size = 16 * 1024 * 1024;
  if (setsockopt(fd, SOL_SOCKET, SO_RCVBUFFORCE, &size, sizeof size) != 0)
    setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &size, sizeof size);
  if (setsockopt(fd, SOL_SOCKET, SO_SNDBUFFORCE, &size, sizeof size) != 0)
    setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &size, sizeof size);
}

std::string peer_key(const sockaddr_in& peer, uint32_t frame_id) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%08x:%u:%u", ntohl(peer.sin_addr.s_addr),
                ntohs(peer.sin_port), frame_id);
  return buf;
}

void send_to(int fd, const sockaddr_in& peer, const std::vector<uint8_t>& datagram) {
  (void)sendto(fd, datagram.data(), datagram.size(), 0,
               reinterpret_cast<const sockaddr*>(&peer), sizeof peer);
}

}  // namespace

struct EmuServer::Pending {
  FrameAssembler assembler;
  sockaddr_in peer{};
  clock_type::time_point deadline;
};

EmuServer::EmuServer(const std::string& bind_host, uint16_t port, EmuConfig initial,
                     uint64_t seed)
    : config_(initial), seed_(seed), pending_(new std::map<std::string, Pending>) {
  fd_ = socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw std::runtime_error("emu server: socket() failed");
  enlarge_buffers(fd_);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    close(fd_);
    throw std::runtime_error("emu server: bad bind address " + bind_host);
  }
  if (bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    close(fd_);
    throw std::runtime_error("emu server: cannot bind " + bind_host + ":" +
                             std::to_string(port));
  }
  socklen_t alen = sizeof addr;
  getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
  port_ = ntohs(addr.sin_port);
}

EmuServer::~EmuServer() {
  if (fd_ >= 0) close(fd_);
  delete pending_;
}

ServerStats EmuServer::stats() const {
  std::lock_guard<std::mutex> lock(stats_mu_);
  return stats_;
}

std::vector<float> EmuServer::apply_channel(const std::vector<float>& iq) {
  if (config_.channel == phy::ChannelModel::kNoiseless) return iq;  // bit-identical echo

  std::vector<phy::cplx> x(iq.size() / 2);
  for (size_t i = 0; i < x.size(); ++i) x[i] = phy::cplx(iq[2 * i], iq[2 * i + 1]);

  const uint64_t frame_seed = Rng::derive(config_.seed ^ seed_, frame_counter_++);
  double power = 0;
  for (const auto& v : x) power += std::norm(v);
  power /= std::max<size_t>(1, x.size());

  if (config_.channel == phy::ChannelModel::kRayleighFlat ||
      config_.channel == phy::ChannelModel::kRayleighMultipath) {
    phy::LinkConfig lc;
    lc.channel = config_.channel;
    lc.taps = config_.taps;
    lc.cp = config_.taps;  // the guard; framing is the client's concern
    auto taps = phy::draw_fading_taps(lc, Rng::derive(frame_seed, 0xfade));
    x = phy::apply_taps(x, taps, lc);
  }
  if (std::isfinite(config_.snr_db)) {
    double n0 = power * std::pow(10.0, -static_cast<double>(config_.snr_db) / 10.0);
    x = phy::awgn_n0(x, n0, Rng::derive(frame_seed, 0x0153));
  }

  std::vector<float> out(iq.size());
  for (size_t i = 0; i < x.size(); ++i) {
    out[2 * i] = static_cast<float>(x[i].real());
    out[2 * i + 1] = static_cast<float>(x[i].imag());
  }
  return out;
}

void EmuServer::handle_datagram(const uint8_t* data, size_t len, const ::sockaddr_in& peer) {
  FrameHeader h;
  if (!parse_header(data, len, &h)) {
    std::lock_guard<std::mutex> lock(stats_mu_);
    ++stats_.frames_malformed;
    return;
  }
  const uint8_t* payload = data + kHeaderSize;
  const size_t payload_len = len - kHeaderSize;

  switch (static_cast<MsgType>(h.msg_type)) {
    case MsgType::kPing: {
      static const char kStatsReq[] = "stats";
      if (payload_len == sizeof(kStatsReq) - 1 &&
          std::memcmp(payload, kStatsReq, payload_len) == 0) {
        ServerStats s = stats();
        char text[128];
        int n = std::snprintf(text, sizeof text,
                              "frames_ok %llu\nframes_dropped %llu\nframes_malformed %llu\n",
                              static_cast<unsigned long long>(s.frames_ok),
                              static_cast<unsigned long long>(s.frames_dropped),
                              static_cast<unsigned long long>(s.frames_malformed));
        FrameHeader r = h;
        r.total_samples = 0;
        r.chunk_idx = 0;
        r.chunk_cnt = 1;
        send_to(fd_, peer, pack_frame(r, reinterpret_cast<uint8_t*>(text),
                                      static_cast<size_t>(n)));
      } else {
        send_to(fd_, peer, pack_frame(h, payload, payload_len));  // echo
      }
      return;
    }
    case MsgType::kConfig: {
      EmuConfig next;
      if (!parse_config(payload, payload_len, &next)) {
        std::lock_guard<std::mutex> lock(stats_mu_);
        ++stats_.frames_malformed;
        return;
      }
      config_ = next;  // next completed frame sees the new channel
      FrameHeader ack;
      ack.msg_type = static_cast<uint8_t>(MsgType::kConfigAck);
      ack.frame_id = h.frame_id;
      ack.total_samples = 0;
      send_to(fd_, peer, pack_frame(ack, nullptr, 0));
      return;
    }
    case MsgType::kData: {
      auto key = peer_key(peer, h.frame_id);
      auto& entry = (*pending_)[key];
      entry.peer = peer;
      entry.deadline = clock_type::now() + kReassemblyTimeout;
      std::string err;
      if (!entry.assembler.add(h, payload, payload_len, &err)) {
        pending_->erase(key);
        std::lock_guard<std::mutex> lock(stats_mu_);
        ++stats_.frames_malformed;
        return;
      }
      if (!entry.assembler.complete()) return;
      auto impaired = apply_channel(entry.assembler.iq());
      int burst = 0;
      for (const auto& dg : chunk_samples(MsgType::kDataResponse, h.frame_id, impaired)) {
        send_to(fd_, peer, dg);
        if (++burst % 64 == 0)
          std::this_thread::sleep_for(std::chrono::microseconds(500));
      }
      pending_->erase(key);
      {
        std::lock_guard<std::mutex> lock(stats_mu_);
        ++stats_.frames_ok;
      }
      return;
    }
    default: {
      // unsolicited response types are not ours to process
      std::lock_guard<std::mutex> lock(stats_mu_);
      ++stats_.frames_malformed;
      return;
    }
  }
}

void EmuServer::run(std::atomic<bool>& stop) {
  std::vector<uint8_t> buf(kHeaderSize + kMaxChunkPayload + 64);
  while (!stop.load(std::memory_order_relaxed)) {
    pollfd pfd{fd_, POLLIN, 0};
    int rc = poll(&pfd, 1, 50);
    if (rc > 0 && (pfd.revents & POLLIN)) {
      sockaddr_in peer{};
      socklen_t plen = sizeof peer;
      ssize_t n = recvfrom(fd_, buf.data(), buf.size(), 0,
                           reinterpret_cast<sockaddr*>(&peer), &plen);
      if (n > 0) handle_datagram(buf.data(), static_cast<size_t>(n), peer);
    }
    // reap stale partial frames
    auto now = clock_type::now();
    for (auto it = pending_->begin(); it != pending_->end();) {
      if (it->second.deadline < now) {
        it = pending_->erase(it);
        std::lock_guard<std::mutex> lock(stats_mu_);
        ++stats_.frames_dropped;
      } else {
        ++it;
      }
    }
  }
}

}  // namespace semlink::emu
