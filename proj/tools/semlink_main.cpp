// semlink: adaptive image semantic transmission simulator over an OFDM link,
// with a UDP channel-emulator service standing in for over-the-air hardware.

#include <CLI11.hpp>
#include <iostream>

#include "semlink/cli/commands.hpp"
#include "semlink/cli/run_config.hpp"

using namespace semlink;

namespace {

// Every common flag is sugar for a run-config assignment; precedence is
// defaults < SEMLINK_SEED < --config file < flags/--set in argv order.
struct Assignments {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> kv;
};

void add_common(CLI::App* sub, Assignments& a) {
  sub->add_option("--config", a.config_file, "run-config file (key = value lines)");
  auto map = [sub, &a](const std::string& flag, const std::string& key,
                       const std::string& desc) {
    sub->add_option_function<std::string>(
        flag, [&a, key](const std::string& v) { a.kv.emplace_back(key, v); }, desc);
  };
  map("--dataset", "dataset_dir", "dataset directory of .ppm images");
  map("--out", "out_dir", "output directory");
  map("--seed", "seed", "run seed (SEMLINK_SEED is the fallback)");
  map("--preset", "preset", "codec preset: toy|full");
  map("--variant", "variant", "codec variant: vit|cnn-only");
  map("--channel", "channel", "noiseless|awgn|rayleigh-flat|rayleigh-mp");
  map("--snr", "snr_db", "channel SNR in dB");
  map("--transport", "transport", "local or emulator host:port");
  map("--checkpoint", "checkpoint", "parameter checkpoint to use");
  map("--policy", "policy_file", "MR policy CSV (snr_db,area_frac,mr)");
  map("--eval-count", "eval_count", "evaluation image cap");
  map("--threads", "threads", "worker threads (0 = hardware)");
  map("--detector", "detector_cmd", "external detector command, {image} placeholder");
  sub->add_option_function<std::vector<std::string>>(
      "--set",
      [&a](const std::vector<std::string>& vs) {
        for (const auto& kv : vs) {
          auto eq = kv.find('=');
          if (eq == std::string::npos)
            throw CLI::ValidationError("--set expects key=value, got '" + kv + "'");
          a.kv.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
      },
      "override any run-config key, e.g. --set mr_list=0,0.3,0.6");
}

cli::RunConfig build_config(const Assignments& a) {
  cli::RunConfig rc;
  rc.seed = cli::seed_from_env_or(rc.seed);
  if (!a.config_file.empty()) rc = cli::load_run_config(a.config_file);
  for (const auto& [k, v] : a.kv) rc.set(k, v);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semlink: adaptive image semantic transmission over OFDM"};
  app.require_subcommand(1);

  Assignments a;

  int stage = 1;
  auto* train = app.add_subcommand("train", "run one training stage (1, 2 or 3)");
  add_common(train, a);
  train->add_option("--stage", stage, "training stage")->required()->check(CLI::Range(1, 3));
  for (auto [flag, key] : {std::pair{"--epochs", "epochs"}, {"--batch", "batch"},
                           {"--lr", "lr"}, {"--train-snr", "train_snr"}})
    train->add_option_function<std::string>(
        flag, [&a, key = std::string(key)](const std::string& v) { a.kv.emplace_back(key, v); },
        "");

  auto* mr_sweep = app.add_subcommand("mr-sweep", "combined metrics over an (SNR, MR) grid");
  add_common(mr_sweep, a);

  auto* snr_sweep = app.add_subcommand("snr-sweep", "scheme comparison across SNRs");
  add_common(snr_sweep, a);
  snr_sweep->add_option_function<std::string>(
      "--checkpoint-cnn",
      [&a](const std::string& v) { a.kv.emplace_back("checkpoint_cnn", v); },
      "cnn-only scheme checkpoint");

  std::string image_path;
  double forced_mr = -1.0;
  auto* transmit = app.add_subcommand("transmit", "send one image end to end");
  add_common(transmit, a);
  transmit->add_option("image", image_path, "input .ppm")->required();
  transmit->add_option("--mr", forced_mr, "force a mask ratio (default: policy decides)");

  std::string bind = "127.0.0.1:9009";
  auto* emulate = app.add_subcommand("emulate", "run the UDP channel-emulator service");
  add_common(emulate, a);
  emulate->add_option("--bind", bind, "bind address host:port");

  std::vector<std::string> report_inputs;
  std::string report_out = "report.csv";
  auto* report = app.add_subcommand("report", "aggregate sweep CSVs (means + 95% CIs)");
  report->add_option("inputs", report_inputs, "sweep CSV files")->required();
  report->add_option("--out", report_out, "aggregated CSV path");

  int gen_count = 200, gen_size = 32;
  auto* gen = app.add_subcommand("gen-dataset", "write a synthetic PPM dataset + sidecars");
  add_common(gen, a);
  gen->add_option("--count", gen_count, "image count");
  gen->add_option("--size", gen_size, "square image size in pixels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> inputs(report_inputs.begin(), report_inputs.end());
      return cli::cmd_report(inputs, report_out);
    }
    cli::RunConfig rc = build_config(a);
    if (train->parsed()) return cli::cmd_train(stage, rc);
    if (mr_sweep->parsed()) return cli::cmd_mr_sweep(rc);
    if (snr_sweep->parsed()) return cli::cmd_snr_sweep(rc);
    if (transmit->parsed()) return cli::cmd_transmit(image_path, forced_mr, rc);
    if (emulate->parsed()) return cli::cmd_emulate(bind, rc);
    if (gen->parsed()) return cli::cmd_gen_dataset(rc, gen_count, gen_size);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
