#include "semlink/codec/config.hpp"

#include <stdexcept>

namespace semlink::codec {

const char* variant_name(CodecVariant v) {
  return v == CodecVariant::kVit ? "vit" : "cnn-only";
}

CodecVariant variant_from_name(const std::string& name) {
  if (name == "vit") return CodecVariant::kVit;
  if (name == "cnn-only" || name == "cnn") return CodecVariant::kCnnOnly;
  throw std::invalid_argument("unknown codec variant '" + name + "'");
}

int conv_pad(const ConvSpec& c) {
  if (c.kernel == 1) return 0;
  if (c.kernel == 4) return 1;  // halves/doubles cleanly at stride 2
  return (c.kernel - 1) / 2;
}

void CodecConfig::validate() const {
  if (height % patch != 0 || width % patch != 0)
    throw std::invalid_argument("codec: image dims not divisible by patch size");
  if ((height * width * channels) % bcr_den != 0)
    throw std::invalid_argument("codec: H*W*C not divisible by 1/BCR");
  if (n_levels() % n_patches() != 0)
    throw std::invalid_argument("codec: level budget does not tile the patch grid");
  if (vit.embed % vit.heads != 0)
    throw std::invalid_argument("codec: embed dim not divisible by head count");
  if (compression.empty() || channel_coding.empty())
    throw std::invalid_argument("codec: empty network stack");
  if (compression.back().out_ch != levels_per_patch())
    throw std::invalid_argument("codec: compression stack must end at " +
                                std::to_string(levels_per_patch()) + " channels, got " +
                                std::to_string(compression.back().out_ch));
  if (channel_coding.front().in_ch != levels_per_patch() ||
      channel_coding.back().out_ch != levels_per_patch())
    throw std::invalid_argument("codec: channel-coding stack must preserve " +
                                std::to_string(levels_per_patch()) + " channels");
}

CodecConfig CodecConfig::toy_vit() {
  CodecConfig c;
  c.height = c.width = 32;
  c.patch = 8;
  c.variant = CodecVariant::kVit;
  c.vit = {8, 128, 4, 4, 2};
  c.compression = {{128, 64, 1, 1}, {64, 24, 1, 1}};
  c.channel_coding = {{24, 48, 3, 1}, {48, 24, 3, 1}};
  c.validate();
  return c;
}

CodecConfig CodecConfig::toy_cnn() {
  CodecConfig c;
  c.height = c.width = 32;
  c.patch = 8;
  c.variant = CodecVariant::kCnnOnly;
  c.compression = {{3, 32, 4, 2}, {32, 64, 4, 2}, {64, 128, 4, 2}, {128, 24, 1, 1}};
  c.channel_coding = {{24, 48, 3, 1}, {48, 24, 3, 1}};
  c.validate();
  return c;
}

CodecConfig CodecConfig::full_vit() {
  CodecConfig c;
  c.height = c.width = 224;
  c.patch = 16;
  c.variant = CodecVariant::kVit;
  c.vit = {16, 256, 8, 6, 4};
  c.compression = {{256, 128, 1, 1}, {128, 96, 1, 1}};
  c.channel_coding = {{96, 128, 3, 1}, {128, 96, 3, 1}};
  c.validate();
  return c;
}

CodecConfig CodecConfig::full_cnn() {
  CodecConfig c;
  c.height = c.width = 224;
  c.patch = 16;
  c.variant = CodecVariant::kCnnOnly;
  c.compression = {
      {3, 32, 4, 2}, {32, 64, 4, 2}, {64, 128, 4, 2}, {128, 128, 4, 2}, {128, 96, 1, 1}};
  c.channel_coding = {{96, 128, 3, 1}, {128, 96, 3, 1}};
  c.validate();
  return c;
}

CodecConfig CodecConfig::preset(const std::string& name, CodecVariant variant) {
  if (name == "toy") return variant == CodecVariant::kVit ? toy_vit() : toy_cnn();
  if (name == "full") return variant == CodecVariant::kVit ? full_vit() : full_cnn();
  throw std::invalid_argument("unknown codec preset '" + name + "' (toy|full)");
}

}  // namespace semlink::codec
