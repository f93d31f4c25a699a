#include "semlink/emu/client.hpp"

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

namespace semlink::emu {

namespace {
using clock_type = std::chrono::steady_clock;

void enlarge_buffers(int fd) {
  int size = 16 * 1024 * 1024;
  if (setsockopt(fd, SOL_SOCKET, SO_RCVBUFFORCE, &size, sizeof size) != 0)
    setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &size, sizeof size);
  if (setsockopt(fd, SOL_SOCKET, SO_SNDBUFFORCE, &size, sizeof size) != 0)
    setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &size, sizeof size);
}

}  // namespace

EmuClient::EmuClient(const std::string& host, uint16_t port, int timeout_ms, int retries)
    : timeout_ms_(timeout_ms), retries_(retries) {
  fd_ = socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw std::runtime_error("emu client: socket() failed");
  enlarge_buffers(fd_);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    close(fd_);
    throw std::runtime_error("emu client: bad host " + host);
  }
  if (connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    close(fd_);
    throw std::runtime_error("emu client: connect failed for " + host + ":" +
                             std::to_string(port));
  }
}

EmuClient::~EmuClient() {
  if (fd_ >= 0) close(fd_);
}

bool EmuClient::await(uint8_t want_type, uint32_t frame_id, FrameAssembler* assembler,
                      std::vector<uint8_t>* single_payload, int deadline_ms) {
  std::vector<uint8_t> buf(kHeaderSize + kMaxChunkPayload + 64);
  auto deadline = clock_type::now() + std::chrono::milliseconds(deadline_ms);
  while (clock_type::now() < deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline -
                                                                      clock_type::now());
    pollfd pfd{fd_, POLLIN, 0};
    int rc = poll(&pfd, 1, static_cast<int>(std::max<long long>(1, left.count())));
    if (rc <= 0 || !(pfd.revents & POLLIN)) continue;
    ssize_t n = recv(fd_, buf.data(), buf.size(), 0);
    if (n <= 0) continue;
    FrameHeader h;
    if (!parse_header(buf.data(), static_cast<size_t>(n), &h)) continue;
    if (h.msg_type != want_type || h.frame_id != frame_id) continue;
    const uint8_t* payload = buf.data() + kHeaderSize;
    const size_t plen = static_cast<size_t>(n) - kHeaderSize;
    if (assembler) {
      std::string err;
      if (!assembler->add(h, payload, plen, &err))
        throw std::runtime_error("emu client: bad response chunk for frame " +
                                 std::to_string(frame_id) + ": " + err);
      if (assembler->complete()) return true;
    } else {
      if (single_payload) single_payload->assign(payload, payload + plen);
      return true;
    }
  }
  return false;
}

std::vector<std::complex<float>> EmuClient::send_frame(
    const std::vector<std::complex<float>>& samples) {
  if (samples.empty()) throw std::invalid_argument("emu client: empty frame");
  if (samples.size() > kMaxSamples)
    throw std::invalid_argument("emu client: frame exceeds the 2^31 sample limit");
  const uint32_t frame_id = next_frame_id_++;
  auto datagrams = chunk_samples(MsgType::kData, frame_id, to_iq(samples));
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    int burst = 0;
    for (const auto& dg : datagrams) {
      if (send(fd_, dg.data(), dg.size(), 0) < 0)
        throw std::runtime_error("emu client: send failed");
      if (++burst % 64 == 0)
        std::this_thread::sleep_for(std::chrono::microseconds(500));
    }
    FrameAssembler assembler;
    if (await(static_cast<uint8_t>(MsgType::kDataResponse), frame_id, &assembler, nullptr,
              timeout_ms_)) {
      auto out = from_iq(assembler.iq());
      if (out.size() != samples.size())
        throw std::runtime_error("emu client: response length mismatch for frame " +
                                 std::to_string(frame_id));
      return out;
    }
  }
  throw std::runtime_error("emu client: timeout waiting for frame " +
                           std::to_string(frame_id) + " after " +
                           std::to_string(retries_ + 1) + " attempts");
}

void EmuClient::configure(const EmuConfig& config) {
  const uint32_t frame_id = next_frame_id_++;
  auto payload = pack_config(config);
  FrameHeader h;
  h.msg_type = static_cast<uint8_t>(MsgType::kConfig);
  h.frame_id = frame_id;
  h.total_samples = 0;
  auto dg = pack_frame(h, payload.data(), payload.size());
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    if (send(fd_, dg.data(), dg.size(), 0) < 0)
      throw std::runtime_error("emu client: send failed");
    if (await(static_cast<uint8_t>(MsgType::kConfigAck), frame_id, nullptr, nullptr,
              timeout_ms_))
      return;
  }
  throw std::runtime_error("emu client: config not acknowledged");
}

std::string EmuClient::ping(const std::string& payload) {
  const uint32_t frame_id = next_frame_id_++;
  FrameHeader h;
  h.msg_type = static_cast<uint8_t>(MsgType::kPing);
  h.frame_id = frame_id;
  h.total_samples = 0;
  auto dg = pack_frame(h, reinterpret_cast<const uint8_t*>(payload.data()), payload.size());
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    if (send(fd_, dg.data(), dg.size(), 0) < 0)
      throw std::runtime_error("emu client: send failed");
    std::vector<uint8_t> reply;
    if (await(static_cast<uint8_t>(MsgType::kPing), frame_id, nullptr, &reply, timeout_ms_))
      return std::string(reply.begin(), reply.end());
  }
  throw std::runtime_error("emu client: ping timeout");
}

double EmuClient::calibrate(size_t n_samples, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::complex<float>> ref(n_samples);
  for (auto& v : ref) {
    double a = rng.uniform(0.0, 2.0 * M_PI);
    v = {static_cast<float>(std::cos(a)), static_cast<float>(std::sin(a))};
  }
  auto rx = send_frame(ref);
  double ps = 0, pe = 0;
  for (size_t i = 0; i < ref.size(); ++i) {
    ps += std::norm(std::complex<double>(ref[i]));
    pe += std::norm(std::complex<double>(rx[i]) - std::complex<double>(ref[i]));
  }
  if (pe <= 0) return 200.0;  // bit-exact echo
  return 10.0 * std::log10(ps / pe);
}

}  // namespace semlink::emu
