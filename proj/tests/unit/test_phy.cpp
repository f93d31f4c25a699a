#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "semlink/common/rng.hpp"
#include "semlink/phy/channel.hpp"
#include "semlink/phy/fft.hpp"
#include "semlink/phy/link.hpp"
#include "semlink/phy/ofdm.hpp"
#include "semlink/phy/qam.hpp"

using namespace semlink;
using namespace semlink::phy;

namespace {

std::vector<double> random_levels(size_t n, Rng& rng) {
  static const double lv[4] = {-3, -1, 1, 3};
  std::vector<double> out(n);
  for (auto& v : out) v = lv[rng.uniform_int(0, 3)];
  return out;
}

size_t count_level_errors(const std::vector<double>& sent, const std::vector<double>& soft) {
  size_t errs = 0;
  for (size_t i = 0; i < sent.size(); ++i)
    if (nearest_level(soft[i]) != sent[i]) ++errs;
  return errs;
}

}  // namespace

TEST_CASE("qam16: worked mapping, round trip, unit mean power") {
  auto syms = qam16_map({3, -1});
  REQUIRE(syms.size() == 1);
  CHECK(syms[0].real() == doctest::Approx(0.9487).epsilon(1e-4));
  CHECK(syms[0].imag() == doctest::Approx(-0.3162).epsilon(1e-4));

  std::vector<double> all;
  for (double i : {-3, -1, 1, 3})
    for (double q : {-3, -1, 1, 3}) {
      all.push_back(i);
      all.push_back(q);
    }
  auto mapped = qam16_map(all);
  auto back = qam16_demap(mapped);
  CHECK(back == all);

  double p = 0;
  for (const auto& s : mapped) p += std::norm(s);
  CHECK(p / 16.0 == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(qam16_map({1, 1, 3}), std::invalid_argument);
}

TEST_CASE("fft: unitary scaling conserves power (Parseval)") {
  Rng rng(2);
  std::vector<cplx> x(64);
  for (auto& v : x) v = cplx(rng.gaussian(), rng.gaussian());
  auto f = fft_copy(x, false);
  double pt = 0, pf = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    pt += std::norm(x[i]);
    pf += std::norm(f[i]);
  }
  CHECK(std::abs(pt - pf) < 1e-9);
  auto back = fft_copy(f, true);
  for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-12);
  std::vector<cplx> bad(48);
  CHECK_THROWS_AS(fft(bad, false), std::invalid_argument);
}

TEST_CASE("ofdm: shapes, pad accounting, noiseless loopback") {
  LinkConfig cfg;
  Rng rng(3);

  auto syms = qam16_map(random_levels(110, rng));
  REQUIRE(syms.size() == 55);
  auto frame = ofdm_modulate(syms, cfg);
  CHECK(frame.n_symbols == 1);
  CHECK(frame.pad == 0);
  CHECK(frame.time.size() == 80);  // 64 + 16

  auto syms2 = qam16_map(random_levels(2 * 9408, rng));
  auto frame2 = ofdm_modulate(syms2, cfg);
  CHECK(frame2.n_symbols == 172);  // ceil(9408 / 55)
  CHECK(frame2.pad == 52);         // 172*55 - 9408

  auto bins = ofdm_demodulate(frame2.time, cfg);
  const auto db = data_bins(cfg);
  REQUIRE(db.size() == 55);
  double worst = 0;
  for (size_t s = 0; s < bins.data.size(); ++s)
    for (size_t d = 0; d < db.size(); ++d) {
      size_t idx = s * db.size() + d;
      cplx expect = idx < syms2.size() ? syms2[idx] : pad_symbol();
      worst = std::max(worst, std::abs(bins.data[s][d] - expect));
    }
  CHECK(worst < 1e-9);

  CHECK_THROWS_AS(ofdm_modulate({}, cfg), std::invalid_argument);
}

TEST_CASE("ofdm: time-domain power equals frequency-domain power") {
  LinkConfig cfg;
  Rng rng(4);
  auto syms = qam16_map(random_levels(110 * 4, rng));
  auto frame = ofdm_modulate(syms, cfg);
  // drop CP samples when accounting: each symbol's 64-sample body
  double pt = 0, pf = 0;
  for (int s = 0; s < frame.n_symbols; ++s)
    for (int i = 0; i < cfg.fft_size; ++i)
      pt += std::norm(frame.time[static_cast<size_t>(s) * 80 + 16 + i]);
  for (const auto& v : syms) pf += std::norm(v);
  pf += 4 * 9;  // pilots: 9 unit-power pilots per OFDM symbol
  CHECK(std::abs(pt - pf) < 1e-9);
}

TEST_CASE("awgn: sentinel, calibration, reproducibility") {
  Rng rng(5);
  std::vector<cplx> x(100000);
  for (auto& v : x) {
    double a = rng.uniform(0, 2 * M_PI);
    v = cplx(std::cos(a), std::sin(a));  // unit power
  }
  auto same = awgn(x, std::numeric_limits<double>::infinity(), 7);
  CHECK(same == x);

  auto noisy = awgn(x, 10.0, 7);
  double perr = 0;
  for (size_t i = 0; i < x.size(); ++i) perr += std::norm(noisy[i] - x[i]);
  perr /= static_cast<double>(x.size());
  double measured = 10.0 * std::log10(1.0 / perr);
  CHECK(measured == doctest::Approx(10.0).epsilon(0.01));  // +-0.1 dB

  auto again = awgn(x, 10.0, 7);
  CHECK(again == noisy);
  auto other = awgn(x, 10.0, 8);
  CHECK(other != noisy);
}

TEST_CASE("fading taps: identity, scaling, unit mean power") {
  LinkConfig cfg;
  cfg.channel = ChannelModel::kRayleighMultipath;

  std::vector<cplx> x(160);
  Rng rng(6);
  for (auto& v : x) v = cplx(rng.gaussian(), rng.gaussian());

  auto y = apply_taps(x, {cplx(1, 0)}, cfg);
  CHECK(y == x);

  auto gains = taps_to_gains({cplx(2, 0)}, 64);
  for (const auto& g : gains) CHECK(std::abs(g - cplx(2, 0)) < 1e-12);

  double total = 0;
  for (int d = 0; d < 10000; ++d) {
    auto taps = draw_fading_taps(cfg, Rng::derive(777, static_cast<uint64_t>(d)));
    REQUIRE(taps.size() == 8);
    for (const auto& t : taps) total += std::norm(t);
  }
  CHECK(total / 10000.0 == doctest::Approx(1.0).epsilon(0.02));

  LinkConfig tight = cfg;
  tight.cp = 4;
  CHECK_THROWS_AS(apply_taps(x, std::vector<cplx>(8, cplx(0.3, 0)), tight),
                  std::invalid_argument);
}

TEST_CASE("ls_estimate: flat channel, pilot-bin exactness, zero pilot rejected") {
  LinkConfig cfg;
  auto tx = pilot_sequence(cfg);
  std::vector<cplx> rx(tx.size());
  for (size_t i = 0; i < tx.size(); ++i) rx[i] = tx[i] * cplx(2, 0);
  auto est = ls_estimate(rx, tx, cfg);
  for (const auto& g : est.gains) CHECK(std::abs(g - cplx(2, 0)) < 1e-12);

  // frequency-selective channel: exact at pilot bins
  auto taps = draw_fading_taps([] {
    LinkConfig c;
    c.channel = ChannelModel::kRayleighMultipath;
    return c;
  }(), 42);
  auto gains = taps_to_gains(taps, cfg.fft_size);
  for (size_t i = 0; i < tx.size(); ++i)
    rx[i] = tx[i] * gains[static_cast<size_t>(cfg.pilot_bins[i])];
  auto est2 = ls_estimate(rx, tx, cfg);
  for (size_t i = 0; i < cfg.pilot_bins.size(); ++i) {
    size_t bin = static_cast<size_t>(cfg.pilot_bins[i]);
    CHECK(std::abs(est2.gains[bin] - gains[bin]) < 1e-12);
  }

  std::vector<cplx> zeros(tx.size(), cplx(0, 0));
  CHECK_THROWS_AS(ls_estimate(rx, zeros, cfg), std::invalid_argument);
}

TEST_CASE("ls_estimate MSE decreases with SNR over the full chain") {
  Rng rng(8);
  double mse[3] = {0, 0, 0};
  const double snrs[3] = {0, 10, 20};
  LinkConfig base;
  base.channel = ChannelModel::kRayleighMultipath;
  for (int s = 0; s < 3; ++s) {
    LinkConfig cfg = base;
    cfg.snr_db = snrs[s];
    for (int frame = 0; frame < 300; ++frame) {
      uint64_t seed = Rng::derive(1000 + s, static_cast<uint64_t>(frame));
      auto levels = random_levels(110, rng);
      auto syms = qam16_map(levels);
      auto mod = ofdm_modulate(syms, cfg);
      auto out = rayleigh_apply(mod.time, cfg, 1.0, seed);
      auto binsrx = ofdm_demodulate(out.samples, cfg);
      auto est = ls_estimate(binsrx.pilots[0], pilot_sequence(cfg), cfg);
      for (int k = 0; k < cfg.fft_size; ++k)
        mse[s] += std::norm(est.gains[static_cast<size_t>(k)] -
                            out.true_gains[static_cast<size_t>(k)]);
    }
  }
  CHECK(mse[1] < mse[0]);
  CHECK(mse[2] < mse[1]);
}

TEST_CASE("zf_equalize: passthrough, exactness, erasure") {
  LinkConfig cfg;
  auto bins = data_bins(cfg);
  CsiEstimate ones;
  ones.gains.assign(64, cplx(1, 0));
  std::vector<cplx> rx(bins.size(), cplx(0.3, -0.4));
  auto eq = zf_equalize(rx, bins, ones);
  CHECK(eq == rx);

  CsiEstimate tiny;
  tiny.gains.assign(64, cplx(1e-13, 0));
  auto erased = zf_equalize(rx, bins, tiny);
  for (const auto& v : erased) CHECK(v == cplx(0, 0));
}

TEST_CASE("transmit_link: noiseless chain is an exact identity") {
  Rng rng(9);
  LinkConfig cfg;
  cfg.channel = ChannelModel::kNoiseless;
  auto levels = random_levels(2000, rng);
  auto soft = transmit_link(levels, cfg, 0);
  REQUIRE(soft.size() == levels.size());
  CHECK(count_level_errors(levels, soft) == 0);
  double worst = 0;
  for (size_t i = 0; i < levels.size(); ++i)
    worst = std::max(worst, std::abs(soft[i] - levels[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("transmit_link: flat Rayleigh with perfect CSI and no noise is exact") {
  Rng rng(10);
  LinkConfig cfg;
  cfg.channel = ChannelModel::kRayleighFlat;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  cfg.perfect_csi = true;
  auto levels = random_levels(2000, rng);
  auto soft = transmit_link(levels, cfg, 3);
  CHECK(count_level_errors(levels, soft) == 0);
  double worst = 0;
  for (size_t i = 0; i < levels.size(); ++i)
    worst = std::max(worst, std::abs(soft[i] - levels[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("transmit_link: AWGN 30 dB level error rate under 1e-3") {
  Rng rng(11);
  LinkConfig cfg;
  cfg.snr_db = 30;
  auto levels = random_levels(100000, rng);
  auto soft = transmit_link(levels, cfg, 1);
  double rate = static_cast<double>(count_level_errors(levels, soft)) /
                static_cast<double>(levels.size());
  CHECK(rate < 1e-3);
}

TEST_CASE("transmit_link: post-equalization SNR matches configured within 0.2 dB") {
  Rng rng(12);
  LinkConfig cfg;
  cfg.snr_db = 10;
  cfg.perfect_csi = true;
  auto levels = random_levels(220000, rng);
  auto syms = qam16_map(levels);
  auto soft = transmit_link(levels, cfg, 5);
  auto eq = qam16_map(soft);  // same scaling back to symbol domain
  double sig = 0, err = 0;
  for (size_t i = 0; i < syms.size(); ++i) {
    sig += std::norm(syms[i]);
    err += std::norm(eq[i] - syms[i]);
  }
  double measured = 10.0 * std::log10(sig / err);
  CHECK(measured == doctest::Approx(10.0).epsilon(0.02));
}

TEST_CASE("transmit_link: deterministic under a fixed seed") {
  Rng rng(13);
  LinkConfig cfg;
  cfg.channel = ChannelModel::kRayleighMultipath;
  cfg.snr_db = 5;
  auto levels = random_levels(1000, rng);
  auto a = transmit_link(levels, cfg, 77);
  auto b = transmit_link(levels, cfg, 77);
  CHECK(a == b);
  auto c = transmit_link(levels, cfg, 78);
  CHECK(a != c);
}

TEST_CASE("ser_oracle: limits, monotonicity, Monte-Carlo agreement at 8 dB") {
  CHECK(ser_oracle(60) < 1e-12);
  double prev = 1.0;
  for (double db = -5; db <= 20; db += 1) {
    double v = ser_oracle(db);
    CHECK(v < prev);
    CHECK(v >= 0);
    prev = v;
  }

  Rng rng(14);
  LinkConfig cfg;
  cfg.snr_db = 8;
  cfg.perfect_csi = true;
  auto levels = random_levels(200000, rng);
  auto soft = transmit_link(levels, cfg, 2);
  size_t sym_errs = 0;
  for (size_t i = 0; i < levels.size(); i += 2) {
    bool bad = nearest_level(soft[i]) != levels[i] || nearest_level(soft[i + 1]) != levels[i + 1];
    sym_errs += bad ? 1 : 0;
  }
  double measured = static_cast<double>(sym_errs) / (levels.size() / 2.0);
  double expect = ser_oracle(8.0);
  CHECK(std::abs(measured - expect) / expect < 0.1);
}

TEST_CASE("iq dump: round trip through float32") {
  Rng rng(15);
  std::vector<cplx> x(321);
  for (auto& v : x) v = cplx(rng.gaussian(), rng.gaussian());
  auto path = std::filesystem::temp_directory_path() / "semlink_iq.bin";
  save_iq(x, path);
  auto back = load_iq(path);
  REQUIRE(back.size() == x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(back[i].real() == doctest::Approx(x[i].real()).epsilon(1e-6));
    CHECK(back[i].imag() == doctest::Approx(x[i].imag()).epsilon(1e-6));
  }
  std::filesystem::remove(path);
}
