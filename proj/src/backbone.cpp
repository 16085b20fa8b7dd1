#include "revi/backbone.hpp"

#include <cmath>
#include <sstream>

#include "revi/rng.hpp"

namespace revi {

namespace {

Tensor xavier(int out, int in, SeedStream& rng) {
  double bound = std::sqrt(6.0 / (in + out));
  return Tensor::uniform({out, in}, -bound, bound, rng, true);
}

Tensor kaiming_conv(int out_c, int in_c, int k, SeedStream& rng) {
  double bound = std::sqrt(6.0 / (in_c * k * k));
  return Tensor::uniform({out_c, in_c, k, k}, -bound, bound, rng, true);
}

}  // namespace

void BackboneConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
    throw ShapeError("backbone config: image_size must be divisible by patch_size");
  if (embed_dim <= 0 || heads <= 0 || embed_dim % heads != 0)
    throw ShapeError("backbone config: embed_dim must be divisible by heads");
  if (depth < 1 || mlp_hidden < 1 || neck_hidden < 1 || dec1_channels < 1 ||
      dec2_channels < 1)
    throw ShapeError("backbone config: non-positive layer size");
  if (grid() % neck_pool != 0)
    throw ShapeError("backbone config: grid not divisible by neck_pool");
  if (image_size % 4 != 0)
    throw ShapeError("backbone config: decoder upsamples twice, image_size % 4 != 0");
}

Tensor AttnProj::forward(const Tensor& x) const {
  if (lora) return add_row_bias(lora_forward(x, *lora, lora_scaling), b);
  return add_row_bias(matmul_nt(x, w), b);
}

Tensor EncoderBlock::forward(const Tensor& tokens) const {
  Tensor t1 = layer_norm(tokens, ln1_g, ln1_b);
  Tensor att = attention(q.forward(t1), k.forward(t1), v.forward(t1), heads);
  Tensor x = add(tokens, attn_out.forward(att));
  Tensor t2 = layer_norm(x, ln2_g, ln2_b);
  return add(x, mlp2.forward(relu(mlp1.forward(t2))));
}

Tensor Neck::forward(const Tensor& grid) const {
  Tensor pooled = avgpool(grid, pool);
  Tensor h = relu(conv2d(pooled, w1, b1));
  Tensor ctx = conv2d(h, w2, b2);
  Tensor up = bilinear_resize(ctx, grid.dim(1), grid.dim(2));
  return add(grid, up);
}

Tensor DecoderBlock::forward(const Tensor& grid) const {
  return relu(conv2d(upsample_nearest2x(grid), w, b));
}

ToyBackbone ToyBackbone::init(const BackboneConfig& cfg, SeedStream& rng) {
  cfg.validate();
  ToyBackbone bb;
  bb.cfg = cfg;
  int patch_dim = 3 * cfg.patch_size * cfg.patch_size;
  bb.patch_w = xavier(cfg.embed_dim, patch_dim, rng);
  bb.patch_b = Tensor::zeros({cfg.embed_dim}, true);
  bb.pos_embed = Tensor::normal({cfg.tokens(), cfg.embed_dim}, 0.02, rng, true);
  for (int i = 0; i < cfg.depth; ++i) {
    EncoderBlock blk;
    blk.heads = cfg.heads;
    blk.ln1_g = Tensor::full({cfg.embed_dim}, 1.0, true);
    blk.ln1_b = Tensor::zeros({cfg.embed_dim}, true);
    blk.ln2_g = Tensor::full({cfg.embed_dim}, 1.0, true);
    blk.ln2_b = Tensor::zeros({cfg.embed_dim}, true);
    for (AttnProj* p : {&blk.q, &blk.k, &blk.v}) {
      p->w = xavier(cfg.embed_dim, cfg.embed_dim, rng);
      p->b = Tensor::zeros({cfg.embed_dim}, true);
    }
    blk.attn_out.w = xavier(cfg.embed_dim, cfg.embed_dim, rng);
    blk.attn_out.b = Tensor::zeros({cfg.embed_dim}, true);
    blk.mlp1.w = Tensor::uniform({cfg.mlp_hidden, cfg.embed_dim},
                                 -std::sqrt(6.0 / cfg.embed_dim),
                                 std::sqrt(6.0 / cfg.embed_dim), rng, true);
    blk.mlp1.b = Tensor::zeros({cfg.mlp_hidden}, true);
    blk.mlp2.w = xavier(cfg.embed_dim, cfg.mlp_hidden, rng);
    blk.mlp2.b = Tensor::zeros({cfg.embed_dim}, true);
    bb.encoder.push_back(std::move(blk));
  }
  bb.neck.pool = cfg.neck_pool;
  bb.neck.w1 = kaiming_conv(cfg.neck_hidden, cfg.embed_dim, 3, rng);
  bb.neck.b1 = Tensor::zeros({cfg.neck_hidden}, true);
  bb.neck.w2 = kaiming_conv(cfg.embed_dim, cfg.neck_hidden, 3, rng);
  bb.neck.b2 = Tensor::zeros({cfg.embed_dim}, true);
  DecoderBlock d1, d2;
  d1.w = kaiming_conv(cfg.dec1_channels, cfg.embed_dim, 3, rng);
  d1.b = Tensor::zeros({cfg.dec1_channels}, true);
  d2.w = kaiming_conv(cfg.dec2_channels, cfg.dec1_channels, 3, rng);
  d2.b = Tensor::zeros({cfg.dec2_channels}, true);
  bb.decoder.push_back(std::move(d1));
  bb.decoder.push_back(std::move(d2));
  bb.head_w = kaiming_conv(1, cfg.dec2_channels, 1, rng);
  bb.head_b = Tensor::zeros({1}, true);
  return bb;
}

void ToyBackbone::decoder_io(int block, int& c, int& h, int& w, int& oc, int& oh,
                             int& ow) const {
  int g = cfg.grid();
  if (block == 0) {
    c = cfg.embed_dim;
    h = w = g;
    oc = cfg.dec1_channels;
    oh = ow = 2 * g;
  } else if (block == 1) {
    c = cfg.dec1_channels;
    h = w = 2 * g;
    oc = cfg.dec2_channels;
    oh = ow = 4 * g;
  } else {
    throw ShapeError("decoder_io: block index out of range");
  }
}

std::vector<NamedParam> ToyBackbone::parameters() {
  std::vector<NamedParam> out;
  out.push_back({"patch.w", patch_w});
  out.push_back({"patch.b", patch_b});
  out.push_back({"pos_embed", pos_embed});
  for (size_t i = 0; i < encoder.size(); ++i) {
    auto& blk = encoder[i];
    std::string p = "enc" + std::to_string(i);
    out.push_back({p + ".ln1.g", blk.ln1_g});
    out.push_back({p + ".ln1.b", blk.ln1_b});
    out.push_back({p + ".attn.q.w", blk.q.w});
    out.push_back({p + ".attn.q.b", blk.q.b});
    out.push_back({p + ".attn.k.w", blk.k.w});
    out.push_back({p + ".attn.k.b", blk.k.b});
    out.push_back({p + ".attn.v.w", blk.v.w});
    out.push_back({p + ".attn.v.b", blk.v.b});
    out.push_back({p + ".attn.o.w", blk.attn_out.w});
    out.push_back({p + ".attn.o.b", blk.attn_out.b});
    out.push_back({p + ".ln2.g", blk.ln2_g});
    out.push_back({p + ".ln2.b", blk.ln2_b});
    out.push_back({p + ".mlp.fc1.w", blk.mlp1.w});
    out.push_back({p + ".mlp.fc1.b", blk.mlp1.b});
    out.push_back({p + ".mlp.fc2.w", blk.mlp2.w});
    out.push_back({p + ".mlp.fc2.b", blk.mlp2.b});
  }
  out.push_back({"neck.conv1.w", neck.w1});
  out.push_back({"neck.conv1.b", neck.b1});
  out.push_back({"neck.conv2.w", neck.w2});
  out.push_back({"neck.conv2.b", neck.b2});
  for (size_t i = 0; i < decoder.size(); ++i) {
    std::string p = "dec" + std::to_string(i);
    out.push_back({p + ".conv.w", decoder[i].w});
    out.push_back({p + ".conv.b", decoder[i].b});
  }
  out.push_back({"head.w", head_w});
  out.push_back({"head.b", head_b});
  return out;
}

void ToyBackbone::freeze_backbone() {
  for (auto& p : parameters())
    if (p.name != "head.w" && p.name != "head.b") p.tensor.set_requires_grad(false);
}

namespace {

// One shared forward routine keeps the adapted and plain code paths
// identical on the backbone side; a zero-initialized adapter then matches
// the frozen backbone bit for bit.
Tensor forward_model(const ToyBackbone& bb, const AdaptedModel* adapted,
                     const Tensor& img, ForwardTrace* trace) {
  const auto& cfg = bb.cfg;
  if (img.shape() != std::vector<int>{3, cfg.image_size, cfg.image_size})
    throw ShapeError("backbone forward: expected [3," + std::to_string(cfg.image_size) +
                     "," + std::to_string(cfg.image_size) + "], got " +
                     shape_str(img.shape()));
  int g = cfg.grid();

  // The same site may appear in encoder and decoder sweeps; resolve by tag.
  auto find_site = [&](bool is_encoder, int block) -> int {
    if (!adapted) return -1;
    for (size_t s = 0; s < adapted->sites.size(); ++s)
      if (adapted->sites[s].is_encoder == is_encoder && adapted->sites[s].block == block)
        return static_cast<int>(s);
    return -1;
  };

  AdapterState state;
  bool state_valid = false;

  auto run_site = [&](int site_idx, const Tensor& grid_in, const BlockFn& block) {
    const auto& info = adapted->sites[static_cast<size_t>(site_idx)];
    if (!state_valid) {
      state.o = Tensor::zeros({info.c, info.h, info.w});
      state_valid = true;
    }
    Tensor o_in = state.o;
    Tensor d_out;
    Tensor b_trace, o_raw_trace;
    if (adapted->kind == AdapterKind::revi) {
      auto res = adapter_step(block, grid_in, state, adapted->revi[static_cast<size_t>(site_idx)]);
      d_out = res.d;
      state = res.state;
      b_trace = res.b;
      o_raw_trace = res.o_raw;
    } else {  // conv_equal: plain stack, no hidden state between blocks
      const auto& a = adapted->conv_stack[static_cast<size_t>(site_idx)];
      Tensor f = a.forward(grid_in);
      Tensor f_out = a.out_proj ? a.out_proj->forward(f) : f;
      d_out = add(block(grid_in), scale(f_out, a.alpha));
      state.o = Tensor::zeros({info.out_c, info.out_h, info.out_w});
    }
    if (trace) {
      ForwardTrace::Site ts;
      ts.site = site_idx;
      ts.is_encoder = info.is_encoder;
      ts.block = info.block;
      ts.b = b_trace;
      ts.o_raw = o_raw_trace;
      ts.o_state = state.o;
      ts.o_in = o_in;
      trace->sites.push_back(std::move(ts));
    }
    return d_out;
  };

  Tensor tokens = add(add_row_bias(matmul_nt(patchify(img, cfg.patch_size), bb.patch_w),
                                   bb.patch_b),
                      bb.pos_embed);
  for (size_t i = 0; i < bb.encoder.size(); ++i) {
    int site = find_site(true, static_cast<int>(i));
    if (site < 0) {
      tokens = bb.encoder[i].forward(tokens);
      continue;
    }
    // adapters work on the spatial grid; the reshape is a pure permutation
    BlockFn block = [&](const Tensor& grid_in) {
      Tensor t = bb.encoder[i].forward(grid_to_tokens(grid_in));
      return tokens_to_grid(t, cfg.embed_dim, g, g);
    };
    Tensor grid_in = tokens_to_grid(tokens, cfg.embed_dim, g, g);
    Tensor grid_out = run_site(site, grid_in, block);
    tokens = grid_to_tokens(grid_out);
  }

  Tensor grid = tokens_to_grid(tokens, cfg.embed_dim, g, g);
  grid = bb.neck.forward(grid);

  for (size_t i = 0; i < bb.decoder.size(); ++i) {
    int site = find_site(false, static_cast<int>(i));
    if (site < 0) {
      grid = bb.decoder[i].forward(grid);
      continue;
    }
    BlockFn block = [&](const Tensor& grid_in) { return bb.decoder[i].forward(grid_in); };
    grid = run_site(site, grid, block);
  }
  return conv2d(grid, bb.head_w, bb.head_b);
}

}  // namespace

Tensor ToyBackbone::forward(const Tensor& img) const {
  return forward_model(*this, nullptr, img, nullptr);
}

Placement placement_from(const std::string& name) {
  if (name == "encoder") return Placement::encoder;
  if (name == "decoder") return Placement::decoder;
  if (name == "both") return Placement::both;
  throw ShapeError("unknown placement '" + name + "' (encoder|decoder|both)");
}

const char* placement_name(Placement p) {
  switch (p) {
    case Placement::encoder: return "encoder";
    case Placement::decoder: return "decoder";
    case Placement::both: return "both";
  }
  return "?";
}

AdapterKind adapter_kind_from(const std::string& name) {
  if (name == "revi") return AdapterKind::revi;
  if (name == "conv-equal") return AdapterKind::conv_equal;
  if (name == "none") return AdapterKind::none;
  throw ShapeError("unknown adapter kind '" + name + "' (revi|conv-equal|none)");
}

const char* adapter_kind_name(AdapterKind k) {
  switch (k) {
    case AdapterKind::revi: return "revi";
    case AdapterKind::conv_equal: return "conv-equal";
    case AdapterKind::none: return "none";
  }
  return "?";
}

Tensor AdaptedModel::forward(const Tensor& img, ForwardTrace* trace) const {
  return forward_model(backbone, this, img, trace);
}

std::vector<NamedParam> AdaptedModel::parameters() {
  std::vector<NamedParam> out = backbone.parameters();
  for (size_t i = 0; i < backbone.encoder.size(); ++i) {
    auto& blk = backbone.encoder[i];
    std::string p = "lora.enc" + std::to_string(i);
    auto push_lora = [&](const char* tag, AttnProj& proj) {
      if (!proj.lora) return;
      out.push_back({p + "." + tag + ".down", proj.lora->down});
      out.push_back({p + "." + tag + ".up", proj.lora->up});
    };
    push_lora("q", blk.q);
    push_lora("k", blk.k);
    push_lora("v", blk.v);
  }
  for (size_t s = 0; s < sites.size(); ++s) {
    const auto& info = sites[s];
    std::string p = std::string("adapter.") + (info.is_encoder ? "enc" : "dec") +
                    std::to_string(info.block);
    if (kind == AdapterKind::revi)
      revi[s].collect(p, out);
    else if (kind == AdapterKind::conv_equal)
      conv_stack[s].collect(p, out);
  }
  return out;
}

ParamCensus AdaptedModel::census() {
  ParamCensus c;
  for (const auto& p : parameters()) {
    ParamCensus::Row row;
    row.name = p.name;
    row.shape = p.tensor.shape();
    row.numel = p.tensor.numel();
    row.frozen = p.frozen();
    (row.frozen ? c.frozen_total : c.trainable_total) += row.numel;
    c.rows.push_back(std::move(row));
  }
  return c;
}

std::string ParamCensus::to_table() const {
  std::ostringstream os;
  os << "name\tshape\tparams\tstate\n";
  for (const auto& r : rows)
    os << r.name << "\t" << shape_str(r.shape) << "\t" << r.numel << "\t"
       << (r.frozen ? "frozen" : "trainable") << "\n";
  os << "total frozen\t\t" << frozen_total << "\n";
  os << "total trainable\t\t" << trainable_total << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * trainable_ratio());
  os << "trainable ratio\t\t" << buf << "\n";
  return os.str();
}

AdaptedModel attach_adapters(ToyBackbone backbone, AdapterKind kind, Placement placement,
                             int lora_rank, double rho_init, double alpha_init,
                             SeedStream& rng) {
  AdaptedModel m;
  m.backbone = std::move(backbone);
  m.kind = kind;
  m.placement = placement;
  m.lora_rank = lora_rank;
  m.backbone.freeze_backbone();
  if (kind == AdapterKind::none && lora_rank == 0) return m;

  const auto& cfg = m.backbone.cfg;
  bool want_encoder = placement == Placement::encoder || placement == Placement::both;
  bool want_decoder = placement == Placement::decoder || placement == Placement::both;

  if (want_encoder && lora_rank > 0) {
    for (auto& blk : m.backbone.encoder) {
      for (AttnProj* p : {&blk.q, &blk.k, &blk.v}) {
        p->lora = LoraWeights::make(p->w, lora_rank, rng);
        p->lora_scaling = 1.0 / lora_rank;
      }
    }
  }
  if (kind == AdapterKind::none) return m;

  auto add_site = [&](bool is_encoder, int block) {
    AdapterSiteInfo info;
    info.is_encoder = is_encoder;
    info.block = block;
    if (is_encoder) {
      info.c = cfg.embed_dim;
      info.h = info.w = cfg.grid();
      info.out_c = info.c;
      info.out_h = info.h;
      info.out_w = info.w;
    } else {
      m.backbone.decoder_io(block, info.c, info.h, info.w, info.out_c, info.out_h,
                            info.out_w);
    }
    bool needs_proj =
        info.c != info.out_c || info.h != info.out_h || info.w != info.out_w;
    if (kind == AdapterKind::revi) {
      auto w = ReviAdapterWeights::init(info.c, rho_init, alpha_init, rng);
      if (needs_proj) w.out_proj = Reproj::init(info.c, info.out_c, info.out_h, info.out_w, rng);
      m.revi.push_back(std::move(w));
    } else {
      auto a = ConvStackAdapter::init(info.c, rng);
      if (needs_proj) a.out_proj = Reproj::init(info.c, info.out_c, info.out_h, info.out_w, rng);
      m.conv_stack.push_back(std::move(a));
    }
    m.sites.push_back(info);
  };

  if (want_encoder)
    for (int i = 0; i < cfg.depth; ++i) add_site(true, i);
  if (want_decoder)
    for (int i = 0; i < static_cast<int>(m.backbone.decoder.size()); ++i)
      add_site(false, i);
  return m;
}

}  // namespace revi
