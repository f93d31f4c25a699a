#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semlink/codec/config.hpp"
#include "semlink/phy/link.hpp"

namespace semlink::cli {

// Flat key = value run configuration with CLI-flag overrides. Unknown keys
// are rejected. SEMLINK_SEED is the seed fallback when none is given.
struct RunConfig {
  std::filesystem::path dataset_dir;
  std::string preset = "toy";  // toy | full
  codec::CodecVariant variant = codec::CodecVariant::kVit;

  phy::ChannelModel channel = phy::ChannelModel::kAwgn;
  double snr_db = 10.0;
  bool perfect_csi = false;
  std::vector<double> snr_list = {-5, 0, 5, 10, 15};
  std::vector<double> mr_list = {0.0, 0.2, 0.4, 0.6};

  std::string train_snr = "10";  // "uniform" for U[-5,15]
  int epochs = 20;               // paper full-scale runs use 200
  int warmup_epochs = 4;         // clip-surrogate quantizer warm-up
  int batch = 8;
  double lr = 2e-4;

  uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  std::string transport = "local";  // "local" or host:port of the emulator
  std::filesystem::path policy_file;  // empty: the built-in anchored table
  std::filesystem::path checkpoint;      // evaluation / stage>=2 input
  std::filesystem::path checkpoint_cnn;  // cnn-only scheme for snr sweeps
  std::string detector_cmd;  // external detector template, {image} placeholder
  int eval_count = 50;
  int threads = 0;  // 0 = hardware concurrency

  codec::CodecConfig codec_config() const;
  phy::LinkConfig link_config() const;
  bool use_emulator() const { return transport != "local"; }
  void parse_transport(std::string* host, uint16_t* port) const;

  void set(const std::string& key, const std::string& value);  // one assignment
};

RunConfig load_run_config(const std::filesystem::path& path);
uint64_t seed_from_env_or(uint64_t fallback);

}  // namespace semlink::cli
