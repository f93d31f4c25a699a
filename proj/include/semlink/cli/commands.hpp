#pragma once

#include <filesystem>
#include <vector>

#include "semlink/cli/run_config.hpp"

namespace semlink::cli {

// Subcommand bodies; each returns a process exit code and throws on
// configuration errors (main reports them).
int cmd_train(int stage, const RunConfig& rc);
int cmd_mr_sweep(const RunConfig& rc);
int cmd_snr_sweep(const RunConfig& rc);
int cmd_transmit(const std::filesystem::path& image, double forced_mr, const RunConfig& rc);
int cmd_report(const std::vector<std::filesystem::path>& inputs,
               const std::filesystem::path& out_path);
int cmd_emulate(const std::string& bind, const RunConfig& rc);
int cmd_gen_dataset(const RunConfig& rc, int count, int size);

// checkpoint path convention: <out_dir>/stage<N>[_cnn].slnn
std::filesystem::path stage_checkpoint_path(const RunConfig& rc, int stage,
                                            codec::CodecVariant variant);
}  // namespace semlink::cli
