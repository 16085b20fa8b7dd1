#pragma once

#include <optional>
#include <string>
#include <vector>

#include "revi/adapter.hpp"
#include "revi/tensor.hpp"

namespace revi {

struct BackboneConfig {
  int image_size = 64;
  int patch_size = 4;
  int embed_dim = 64;
  int depth = 4;  // encoder blocks
  int heads = 4;
  int mlp_hidden = 256;
  // Frozen bottleneck context stage between encoder and decoder. It is not
  // a transformer block, so it never hosts adapters; its width carries the
  // bulk of the frozen parameter mass.
  int neck_hidden = 2048;
  int neck_pool = 4;
  int dec1_channels = 32;
  int dec2_channels = 16;

  void validate() const;
  int grid() const { return image_size / patch_size; }
  int tokens() const { return grid() * grid(); }
};

struct LinearLayer {
  Tensor w;  // [out, in]
  Tensor b;  // [out]
  Tensor forward(const Tensor& x) const { return add_row_bias(matmul_nt(x, w), b); }
};

// Attention projection whose weight matrix can carry a LoRA update.
struct AttnProj {
  Tensor w;  // [out, in]
  Tensor b;
  std::optional<LoraWeights> lora;
  double lora_scaling = 0.0;
  Tensor forward(const Tensor& x) const;
};

struct EncoderBlock {
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;
  AttnProj q, k, v;
  LinearLayer attn_out, mlp1, mlp2;
  int heads = 1;
  Tensor forward(const Tensor& tokens) const;
};

// Pooled wide bottleneck with a residual connection back onto the grid.
struct Neck {
  Tensor w1, b1, w2, b2;
  int pool = 4;
  Tensor forward(const Tensor& grid) const;
};

// One upsampling conv block: nearest 2x, then 3x3 conv, then ReLU.
struct DecoderBlock {
  Tensor w, b;
  Tensor forward(const Tensor& grid) const;
};

class AdaptedModel;

// Patch-embedding transformer encoder with a convolutional segmentation
// head emitting one manipulation logit per pixel.
class ToyBackbone {
 public:
  BackboneConfig cfg;
  Tensor patch_w, patch_b;
  Tensor pos_embed;
  std::vector<EncoderBlock> encoder;
  Neck neck;
  std::vector<DecoderBlock> decoder;
  Tensor head_w, head_b;  // trainable 1x1 conv head

  static ToyBackbone init(const BackboneConfig& cfg, SeedStream& rng);

  Tensor forward(const Tensor& img) const;
  std::vector<NamedParam> parameters();
  // Marks every parameter except the segmentation head frozen. Idempotent.
  void freeze_backbone();
  // Grid dims at a decoder block's input / output.
  void decoder_io(int block, int& c, int& h, int& w, int& oc, int& oh, int& ow) const;
};

enum class Placement { encoder, decoder, both };
enum class AdapterKind { revi, conv_equal, none };

Placement placement_from(const std::string& name);
const char* placement_name(Placement p);
AdapterKind adapter_kind_from(const std::string& name);
const char* adapter_kind_name(AdapterKind k);

struct AdapterSiteInfo {
  bool is_encoder = true;
  int block = 0;
  int c = 0, h = 0, w = 0;           // grid at block input
  int out_c = 0, out_h = 0, out_w = 0;
};

struct ForwardTrace {
  struct Site {
    int site = 0;
    bool is_encoder = true;
    int block = 0;
    Tensor b;        // SKA output
    Tensor o_raw;    // MKE output at the block-input grid
    Tensor o_state;  // hidden state handed to the next adapted block
    Tensor o_in;     // hidden state this site received
  };
  std::vector<Site> sites;
};

struct ParamCensus {
  struct Row {
    std::string name;
    std::vector<int> shape;
    long numel = 0;
    bool frozen = false;
  };
  std::vector<Row> rows;
  long frozen_total = 0;
  long trainable_total = 0;
  double trainable_ratio() const {
    long total = frozen_total + trainable_total;
    return total ? static_cast<double>(trainable_total) / total : 0.0;
  }
  std::string to_table() const;
};

// Frozen backbone plus adapters. With kind == none and rank == 0 this is a
// plain wrapper around the backbone.
class AdaptedModel {
 public:
  ToyBackbone backbone;
  AdapterKind kind = AdapterKind::none;
  Placement placement = Placement::encoder;
  int lora_rank = 0;
  std::vector<AdapterSiteInfo> sites;
  std::vector<ReviAdapterWeights> revi;
  std::vector<ConvStackAdapter> conv_stack;

  Tensor forward(const Tensor& img, ForwardTrace* trace = nullptr) const;
  std::vector<NamedParam> parameters();
  ParamCensus census();
};

// Freezes the backbone (head stays trainable), installs one adapter per
// selected block and LoRA (rank > 0) on the q/k/v projections of selected
// encoder blocks. LoRA scaling is 1/rank.
AdaptedModel attach_adapters(ToyBackbone backbone, AdapterKind kind, Placement placement,
                             int lora_rank, double rho_init, double alpha_init,
                             SeedStream& rng);

}  // namespace revi
