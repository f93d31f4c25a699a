#pragma once

#include <string>
#include <vector>

namespace semlink::codec {

enum class CodecVariant : uint8_t { kVit = 0, kCnnOnly = 1 };

const char* variant_name(CodecVariant v);
CodecVariant variant_from_name(const std::string& name);

struct VitSpec {
  int patch = 8;
  int embed = 128;
  int heads = 4;
  int blocks = 4;
  int mlp_ratio = 2;
};

struct ConvSpec {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 1;
  int stride = 1;
};

int conv_pad(const ConvSpec& c);  // size-preserving for k1/k3, halving for k4 s2

// Geometry and network stacks for one codec instance. The symbol budget is
// exact by construction: n_symbols = H*W*C/bcr_den complex symbols, carried
// as 2*n_symbols levels spread uniformly over the patch grid.
struct CodecConfig {
  int height = 32;
  int width = 32;
  int channels = 3;
  int patch = 8;
  CodecVariant variant = CodecVariant::kVit;
  VitSpec vit;
  std::vector<ConvSpec> compression;     // per-patch 1x1 stack (vit) or image downsampler (cnn)
  std::vector<ConvSpec> channel_coding;  // residual 3x3 stack mixing across patch slots
  int bcr_den = 16;                      // BCR = 1/bcr_den

  int grid_rows() const { return height / patch; }
  int grid_cols() const { return width / patch; }
  int n_patches() const { return grid_rows() * grid_cols(); }
  int patch_values() const { return patch * patch * channels; }
  int n_symbols() const { return height * width * channels / bcr_den; }
  int n_levels() const { return 2 * n_symbols(); }
  int levels_per_patch() const { return n_levels() / n_patches(); }

  void validate() const;

  // presets; hyperparameters live here, not in the model code
  static CodecConfig toy_vit();
  static CodecConfig toy_cnn();
  static CodecConfig full_vit();
  static CodecConfig full_cnn();
  static CodecConfig preset(const std::string& name, CodecVariant variant);
};

}  // namespace semlink::codec
