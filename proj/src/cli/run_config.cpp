#include "semlink/cli/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace semlink::cli {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(std::stod(cell));
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

}  // namespace

codec::CodecConfig RunConfig::codec_config() const {
  return codec::CodecConfig::preset(preset, variant);
}

phy::LinkConfig RunConfig::link_config() const {
  phy::LinkConfig lc;
  lc.channel = channel;
  lc.snr_db = snr_db;
  lc.seed = seed;
  lc.perfect_csi = perfect_csi;
  return lc;
}

void RunConfig::parse_transport(std::string* host, uint16_t* port) const {
  auto colon = transport.rfind(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("transport '" + transport + "' is not host:port");
  *host = transport.substr(0, colon);
  int p = std::stoi(transport.substr(colon + 1));
  if (p <= 0 || p > 65535) throw std::invalid_argument("transport port out of range");
  *port = static_cast<uint16_t>(p);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset_dir") dataset_dir = value;
  else if (key == "preset") preset = value;
  else if (key == "variant") variant = codec::variant_from_name(value);
  else if (key == "channel") channel = phy::channel_from_name(value);
  else if (key == "snr_db") snr_db = std::stod(value);
  else if (key == "perfect_csi") perfect_csi = (value == "1" || value == "true");
  else if (key == "snr_list") snr_list = parse_list(value);
  else if (key == "mr_list") mr_list = parse_list(value);
  else if (key == "train_snr") train_snr = value;
  else if (key == "epochs") epochs = std::stoi(value);
  else if (key == "warmup_epochs") warmup_epochs = std::stoi(value);
  else if (key == "batch") batch = std::stoi(value);
  else if (key == "lr") lr = std::stod(value);
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "out_dir") out_dir = value;
  else if (key == "transport") transport = value;
  else if (key == "policy_file") policy_file = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "checkpoint_cnn") checkpoint_cnn = value;
  else if (key == "detector_cmd") detector_cmd = value;
  else if (key == "eval_count") eval_count = std::stoi(value);
  else if (key == "threads") threads = std::stoi(value);
  else throw std::invalid_argument("run config: unknown key '" + key + "'");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("run config: cannot open " + path.string());
  RunConfig rc;
  rc.seed = seed_from_env_or(rc.seed);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("run config " + path.string() + ":" + std::to_string(lineno) +
                               ": expected key = value");
    try {
      rc.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::runtime_error("run config " + path.string() + ":" + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return rc;
}

uint64_t seed_from_env_or(uint64_t fallback) {
  const char* env = std::getenv("SEMLINK_SEED");
  if (!env || !*env) return fallback;
  return std::strtoull(env, nullptr, 10);
}

}  // namespace semlink::cli
