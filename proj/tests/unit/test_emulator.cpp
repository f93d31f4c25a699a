#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "semlink/common/rng.hpp"
#include "semlink/emu/client.hpp"
#include "semlink/emu/server.hpp"

using namespace semlink;
using namespace semlink::emu;

namespace {

struct ServerFixture {
  EmuServer server;
  std::atomic<bool> stop{false};
  std::thread thread;

  explicit ServerFixture(EmuConfig cfg, uint64_t seed = 99)
      : server("127.0.0.1", 0, cfg, seed),
        thread([this] { server.run(stop); }) {}

  ~ServerFixture() {
    stop = true;
    thread.join();
  }
};

std::vector<std::complex<float>> random_samples(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::complex<float>> out(n);
  for (auto& v : out)
    v = {static_cast<float>(rng.gaussian()), static_cast<float>(rng.gaussian())};
  return out;
}

}  // namespace

TEST_CASE("protocol: chunk arithmetic matches the wire contract") {
  // 175 complex samples = 1400 bytes = exactly one chunk
  auto one = chunk_samples(MsgType::kData, 7, std::vector<float>(350, 0.0f));
  CHECK(one.size() == 1);
  CHECK(one[0].size() == kHeaderSize + 1400);

  // 1000 samples = 8000 bytes = 6 chunks
  auto six = chunk_samples(MsgType::kData, 8, std::vector<float>(2000, 0.0f));
  CHECK(six.size() == 6);
  for (size_t i = 0; i + 1 < six.size(); ++i) CHECK(six[i].size() == kHeaderSize + 1400);
  CHECK(six.back().size() == kHeaderSize + (8000 - 5 * 1400));
}

TEST_CASE("protocol: reassembly is order-insensitive") {
  auto samples = random_samples(1000, 3);
  auto iq = to_iq(samples);
  auto datagrams = chunk_samples(MsgType::kData, 5, iq);
  REQUIRE(datagrams.size() == 6);

  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    auto perm = datagrams;
    for (size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    FrameAssembler fa;
    std::string err;
    for (const auto& dg : perm) {
      FrameHeader h;
      REQUIRE(parse_header(dg.data(), dg.size(), &h));
      REQUIRE(fa.add(h, dg.data() + kHeaderSize, dg.size() - kHeaderSize, &err));
    }
    REQUIRE(fa.complete());
    CHECK(fa.iq() == iq);
  }
}

TEST_CASE("protocol: header rejects bad magic and version, config round-trips") {
  std::vector<uint8_t> dg = pack_frame(FrameHeader{}, nullptr, 0);
  FrameHeader h;
  CHECK(parse_header(dg.data(), dg.size(), &h));
  dg[0] ^= 0xff;
  CHECK(!parse_header(dg.data(), dg.size(), &h));
  dg[0] ^= 0xff;
  dg[4] = 9;  // version
  CHECK(!parse_header(dg.data(), dg.size(), &h));
  CHECK(!parse_header(dg.data(), 5, &h));  // short datagram

  EmuConfig c;
  c.channel = phy::ChannelModel::kRayleighMultipath;
  c.snr_db = 7.25f;
  c.seed = 0x0123456789abcdefULL;
  c.taps = 6;
  auto pl = pack_config(c);
  EmuConfig back;
  REQUIRE(parse_config(pl.data(), pl.size(), &back));
  CHECK(back.channel == c.channel);
  CHECK(back.snr_db == c.snr_db);
  CHECK(back.seed == c.seed);
  CHECK(back.taps == c.taps);
  CHECK(back.fft_size == 256);
  CHECK(back.symbols_per_frame == 41);
}

TEST_CASE("emulator: ping echo and noiseless bit-identical loopback") {
  EmuConfig cfg;
  cfg.channel = phy::ChannelModel::kNoiseless;
  ServerFixture fx(cfg);
  EmuClient client("127.0.0.1", fx.server.port(), 1000, 2);

  CHECK(client.ping("hello") == "hello");

  auto samples = random_samples(777, 4);
  auto rx = client.send_frame(samples);
  REQUIRE(rx.size() == samples.size());
  for (size_t i = 0; i < rx.size(); ++i) {
    CHECK(rx[i].real() == samples[i].real());
    CHECK(rx[i].imag() == samples[i].imag());
  }
}

TEST_CASE("emulator: frame order preserved over consecutive frames") {
  EmuConfig cfg;
  cfg.channel = phy::ChannelModel::kNoiseless;
  ServerFixture fx(cfg);
  EmuClient client("127.0.0.1", fx.server.port(), 1000, 2);
  for (int i = 0; i < 10; ++i) {
    auto s = random_samples(200 + static_cast<size_t>(i), 100 + static_cast<uint64_t>(i));
    auto rx = client.send_frame(s);
    REQUIRE(rx.size() == s.size());
    CHECK(rx[0].real() == s[0].real());
  }
  auto st = fx.server.stats();
  CHECK(st.frames_ok == 10);
}

TEST_CASE("emulator: AWGN calibration at 10 and 0 dB, noiseless floor") {
  EmuConfig cfg;
  cfg.channel = phy::ChannelModel::kNoiseless;
  ServerFixture fx(cfg);
  EmuClient client("127.0.0.1", fx.server.port(), 2000, 2);

  CHECK(client.calibrate(20000, 5) >= 80.0);

  cfg.channel = phy::ChannelModel::kAwgn;
  cfg.snr_db = 10.0f;
  client.configure(cfg);
  double m10 = client.calibrate(100000, 6);
  CHECK(std::abs(m10 - 10.0) <= 0.5);

  cfg.snr_db = 0.0f;
  client.configure(cfg);
  double m0 = client.calibrate(100000, 7);
  CHECK(std::abs(m0 - 0.0) <= 0.5);
}

TEST_CASE("emulator: malformed datagrams are counted, never fatal") {
  EmuConfig cfg;
  cfg.channel = phy::ChannelModel::kNoiseless;
  ServerFixture fx(cfg);

  int raw = socket(AF_INET, SOCK_DGRAM, 0);
  REQUIRE(raw >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(fx.server.port());
  inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  const char garbage[] = "definitely not a frame";
  sendto(raw, garbage, sizeof garbage, 0, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  // header ok but inconsistent chunk accounting
  FrameHeader h;
  h.msg_type = 0;
  h.frame_id = 9;
  h.total_samples = 10;  // needs 80 bytes in one chunk
  h.chunk_idx = 0;
  h.chunk_cnt = 5;  // wrong
  auto dg = pack_frame(h, nullptr, 0);
  sendto(raw, dg.data(), dg.size(), 0, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  close(raw);

  // the service keeps answering
  EmuClient client("127.0.0.1", fx.server.port(), 1000, 2);
  auto rx = client.send_frame(random_samples(64, 8));
  CHECK(rx.size() == 64);
  auto st = fx.server.stats();
  CHECK(st.frames_malformed >= 2);
  CHECK(st.frames_ok == 1);
}

TEST_CASE("emulator: stats endpoint reports counters as text") {
  EmuConfig cfg;
  cfg.channel = phy::ChannelModel::kNoiseless;
  ServerFixture fx(cfg);
  EmuClient client("127.0.0.1", fx.server.port(), 1000, 2);
  client.send_frame(random_samples(32, 9));
  auto text = client.stats_text();
  CHECK(text.find("frames_ok 1") != std::string::npos);
  CHECK(text.find("frames_dropped") != std::string::npos);
  CHECK(text.find("frames_malformed") != std::string::npos);
}

TEST_CASE("emulator: config changes are frame-atomic") {
  EmuConfig cfg;
  cfg.channel = phy::ChannelModel::kNoiseless;
  ServerFixture fx(cfg);
  EmuClient client("127.0.0.1", fx.server.port(), 2000, 2);

  auto samples = random_samples(5000, 10);
  auto clean = client.send_frame(samples);
  CHECK(clean == samples);

  cfg.channel = phy::ChannelModel::kAwgn;
  cfg.snr_db = 5.0f;
  client.configure(cfg);
  auto noisy = client.send_frame(samples);
  CHECK(noisy != samples);

  cfg.channel = phy::ChannelModel::kNoiseless;
  client.configure(cfg);
  auto clean2 = client.send_frame(samples);
  CHECK(clean2 == samples);
}

TEST_CASE("emulator client: timeout error names the frame") {
  // a bound socket nobody serves
  int dead = socket(AF_INET, SOCK_DGRAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = 0;
  inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  bind(dead, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t alen = sizeof addr;
  getsockname(dead, reinterpret_cast<sockaddr*>(&addr), &alen);

  EmuClient client("127.0.0.1", ntohs(addr.sin_port), 100, 1);
  CHECK_THROWS_WITH_AS(client.send_frame(random_samples(16, 11)),
                       doctest::Contains("timeout"), std::runtime_error);
  close(dead);
}
