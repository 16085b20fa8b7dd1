#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "revi/backbone.hpp"
#include "revi/checkpoint.hpp"
#include "revi/image_io.hpp"
#include "revi/losses.hpp"
#include "revi/optim.hpp"
#include "revi/rng.hpp"

using namespace revi;
namespace fs = std::filesystem;

namespace {

// Small config keeping unit tests fast; the acceptance suite runs defaults.
BackboneConfig small_cfg() {
  BackboneConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 4;
  cfg.embed_dim = 16;
  cfg.depth = 2;
  cfg.heads = 2;
  cfg.mlp_hidden = 32;
  cfg.neck_hidden = 24;
  cfg.neck_pool = 2;
  cfg.dec1_channels = 8;
  cfg.dec2_channels = 4;
  return cfg;
}

ToyBackbone small_backbone(uint64_t seed) {
  SeedStream rng(seed);
  return ToyBackbone::init(small_cfg(), rng);
}

}  // namespace

TEST_CASE("forward produces finite logits of the right shape") {
  ToyBackbone bb = small_backbone(1);
  Tensor img = Tensor::zeros({3, 16, 16});
  Tensor logits = bb.forward(img);
  CHECK(logits.shape() == std::vector<int>{1, 16, 16});
  for (double v : logits.data()) CHECK(std::isfinite(v));
}

TEST_CASE("forward rejects wrong image sizes") {
  ToyBackbone bb = small_backbone(2);
  CHECK_THROWS_AS(bb.forward(Tensor::zeros({3, 8, 8})), ShapeError);
}

TEST_CASE("forward is deterministic") {
  ToyBackbone bb = small_backbone(3);
  SeedStream rng(4);
  Tensor img = Tensor::uniform({3, 16, 16}, 0, 1, rng);
  Tensor a_t = bb.forward(img);
  auto a = a_t.data();
  Tensor b_t = bb.forward(img);
  auto b = b_t.data();
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("perturbing any encoder weight changes the output") {
  ToyBackbone bb = small_backbone(5);
  SeedStream rng(6);
  Tensor img = Tensor::uniform({3, 16, 16}, 0, 1, rng);
  auto base = bb.forward(img);
  std::vector<double> base_v(base.data().begin(), base.data().end());
  for (auto& p : bb.parameters()) {
    if (p.name.rfind("enc", 0) != 0 || p.name.find(".w") == std::string::npos) continue;
    auto data = p.tensor.mutable_data();
    double saved = data[0];
    data[0] = saved + 0.75;
    Tensor perturbed_t = bb.forward(img);
    auto perturbed = perturbed_t.data();
    double diff = 0.0;
    for (size_t i = 0; i < perturbed.size(); ++i)
      diff += std::fabs(perturbed[i] - base_v[i]);
    INFO(p.name);
    CHECK(diff > 0.0);
    data[0] = saved;
  }
}

TEST_CASE("zero-initialized revi + zero-up lora is bit-identical to the backbone") {
  ToyBackbone bb = small_backbone(7);
  Tensor img1, img2;
  SeedStream rng(8);
  // capture plain outputs before attaching (attach moves the backbone)
  std::vector<std::vector<double>> plain;
  std::vector<Tensor> imgs;
  for (int i = 0; i < 8; ++i) {
    imgs.push_back(Tensor::uniform({3, 16, 16}, 0, 1, rng));
    Tensor d_t = bb.forward(imgs.back());
    auto d = d_t.data();
    plain.emplace_back(d.begin(), d.end());
  }
  SeedStream arng(9);
  AdaptedModel model = attach_adapters(std::move(bb), AdapterKind::revi,
                                       Placement::encoder, 4, 0.1, 0.0, arng);
  for (size_t i = 0; i < imgs.size(); ++i) {
    Tensor adapted_t = model.forward(imgs[i]);
    auto adapted = adapted_t.data();
    for (size_t j = 0; j < adapted.size(); ++j) CHECK(adapted[j] == plain[i][j]);
  }
}

TEST_CASE("adapter placement selects the right blocks") {
  for (auto [placement, want_sites] :
       {std::pair{Placement::encoder, 2}, {Placement::decoder, 2}, {Placement::both, 4}}) {
    ToyBackbone bb = small_backbone(10);
    SeedStream rng(11);
    AdaptedModel m = attach_adapters(std::move(bb), AdapterKind::revi, placement, 2, 0.1,
                                     0.0, rng);
    CHECK(static_cast<int>(m.sites.size()) == want_sites);
    int enc = 0, dec = 0;
    for (const auto& s : m.sites) (s.is_encoder ? enc : dec)++;
    if (placement == Placement::encoder) {
      CHECK(enc == 2);
      CHECK(dec == 0);
      // decoder untouched: no lora either (decoder blocks have no attention)
    }
    if (placement == Placement::decoder) {
      CHECK(dec == 2);
      CHECK(enc == 0);
      for (const auto& blk : m.backbone.encoder) CHECK_FALSE(blk.q.lora.has_value());
    }
    if (placement == Placement::both) CHECK(enc + dec == 4);
  }
  CHECK_THROWS_AS(placement_from("middle"), ShapeError);
}

TEST_CASE("default-config census ratio stays below 25% for all placements") {
  for (Placement placement : {Placement::encoder, Placement::decoder, Placement::both}) {
    SeedStream rng(12);
    BackboneConfig cfg;  // spec defaults
    ToyBackbone bb = ToyBackbone::init(cfg, rng);
    AdaptedModel m =
        attach_adapters(std::move(bb), AdapterKind::revi, placement, 4, 0.1, 0.0, rng);
    ParamCensus census = m.census();
    INFO(placement_name(placement));
    CHECK(census.trainable_ratio() < 0.25);
    CHECK(census.trainable_total > 0);
  }
}

TEST_CASE("conv-equal baseline is parameter-matched to revi") {
  SeedStream rng(13);
  BackboneConfig cfg;  // defaults
  ToyBackbone bb1 = ToyBackbone::init(cfg, rng);
  AdaptedModel revi_m = attach_adapters(std::move(bb1), AdapterKind::revi,
                                        Placement::encoder, 4, 0.1, 0.0, rng);
  ToyBackbone bb2 = ToyBackbone::init(cfg, rng);
  AdaptedModel conv_m = attach_adapters(std::move(bb2), AdapterKind::conv_equal,
                                        Placement::encoder, 4, 0.1, 0.0, rng);
  long revi_trainable = revi_m.census().trainable_total;
  long conv_trainable = conv_m.census().trainable_total;
  // within 5%, and the plain stack is the (slightly) larger side
  CHECK(conv_trainable >= revi_trainable);
  CHECK(static_cast<double>(conv_trainable - revi_trainable) / revi_trainable < 0.05);
}

TEST_CASE("freeze is idempotent and keeps exactly adapter/lora/head trainable") {
  ToyBackbone bb = small_backbone(14);
  SeedStream rng(15);
  AdaptedModel m = attach_adapters(std::move(bb), AdapterKind::revi, Placement::encoder,
                                   2, 0.1, 0.0, rng);
  m.backbone.freeze_backbone();
  m.backbone.freeze_backbone();
  for (const auto& p : m.parameters()) {
    bool trainable = !p.frozen();
    bool expected = p.name.rfind("adapter.", 0) == 0 || p.name.rfind("lora.", 0) == 0 ||
                    p.name.rfind("head.", 0) == 0;
    INFO(p.name);
    CHECK(trainable == expected);
  }
}

TEST_CASE("frozen backbone checksums survive optimizer steps") {
  ToyBackbone bb = small_backbone(16);
  SeedStream rng(17);
  AdaptedModel m = attach_adapters(std::move(bb), AdapterKind::revi, Placement::encoder,
                                   2, 0.1, 0.0, rng);
  auto params = m.parameters();
  std::vector<uint64_t> frozen_sums;
  for (const auto& p : params)
    if (p.frozen()) frozen_sums.push_back(checksum(p.tensor));

  OptimConfig cfg;
  cfg.lr_init = 1e-2;
  AdamW opt(cfg);
  SeedStream drng(18);
  Tensor img = Tensor::uniform({3, 16, 16}, 0, 1, drng);
  std::vector<double> mask(256, 0.0);
  for (int i = 60; i < 120; ++i) mask[static_cast<size_t>(i)] = 1.0;
  Tensor gt = Tensor::from_data({1, 16, 16}, mask);
  for (int step = 0; step < 10; ++step) {
    for (auto& p : params) p.tensor.zero_grad();
    backward(total_loss(m.forward(img), gt));
    opt.step(params, 1e-2);
  }
  size_t idx = 0;
  for (const auto& p : params)
    if (p.frozen()) {
      INFO(p.name);
      CHECK(checksum(p.tensor) == frozen_sums[idx++]);
    }
  // and something trainable actually moved
  bool moved = false;
  for (const auto& p : params)
    if (!p.frozen() && p.tensor.grad() != nullptr) moved = true;
  CHECK(moved);
}

TEST_CASE("checkpoint round trip is bit-exact including moments") {
  ToyBackbone bb = small_backbone(19);
  SeedStream rng(20);
  AdaptedModel m = attach_adapters(std::move(bb), AdapterKind::revi, Placement::both, 2,
                                   0.1, 0.0, rng);
  auto params = m.parameters();

  OptimConfig ocfg;
  AdamW opt(ocfg);
  SeedStream drng(21);
  Tensor img = Tensor::uniform({3, 16, 16}, 0, 1, drng);
  std::vector<double> mask(256, 0.0);
  for (int i = 0; i < 80; ++i) mask[static_cast<size_t>(i)] = 1.0;
  Tensor gt = Tensor::from_data({1, 16, 16}, mask);
  for (int step = 0; step < 3; ++step) {
    for (auto& p : params) p.tensor.zero_grad();
    backward(total_loss(m.forward(img), gt));
    opt.step(params, 1e-3);
  }

  fs::path path = fs::temp_directory_path() / "revi_ckpt_test.bin";
  save_checkpoint(path, params, &opt);

  std::vector<uint64_t> sums;
  for (const auto& p : params) sums.push_back(checksum(p.tensor));

  // rebuild the same architecture with different init, load, compare bits
  ToyBackbone bb2 = small_backbone(999);
  SeedStream rng2(998);
  AdaptedModel m2 = attach_adapters(std::move(bb2), AdapterKind::revi, Placement::both, 2,
                                    0.1, 0.0, rng2);
  auto params2 = m2.parameters();
  Checkpoint ckpt = read_checkpoint(path);
  apply_checkpoint(ckpt, params2);
  REQUIRE(params2.size() == params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    CHECK(params2[i].name == params[i].name);
    CHECK(checksum(params2[i].tensor) == sums[i]);
    CHECK(params2[i].frozen() == params[i].frozen());
  }
  REQUIRE(ckpt.moments.has_value());
  CHECK(ckpt.optimizer_steps == 3);
  CHECK(ckpt.moments->size() == opt.slots().size());
  for (size_t i = 0; i < opt.slots().size(); ++i) {
    CHECK((*ckpt.moments)[i].m == opt.slots()[i].m);
    CHECK((*ckpt.moments)[i].v == opt.slots()[i].v);
  }

  // shape mismatch must be rejected
  ToyBackbone bb3 = small_backbone(30);
  SeedStream rng3(31);
  AdaptedModel m3 = attach_adapters(std::move(bb3), AdapterKind::revi, Placement::encoder,
                                    2, 0.1, 0.0, rng3);
  auto params3 = m3.parameters();
  CHECK_THROWS_AS(apply_checkpoint(ckpt, params3), IoError);  // both-placement extras
}

TEST_CASE("conv_equal and none adapters run forward") {
  for (AdapterKind kind : {AdapterKind::conv_equal, AdapterKind::none}) {
    ToyBackbone bb = small_backbone(32);
    SeedStream rng(33);
    AdaptedModel m =
        attach_adapters(std::move(bb), kind, Placement::encoder, 2, 0.1, 0.0, rng);
    SeedStream drng(34);
    Tensor img = Tensor::uniform({3, 16, 16}, 0, 1, drng);
    Tensor logits = m.forward(img);
    CHECK(logits.shape() == std::vector<int>{1, 16, 16});
    for (double v : logits.data()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("conv_equal starts as the exact backbone too") {
  ToyBackbone bb = small_backbone(35);
  SeedStream rng(36);
  Tensor img = Tensor::uniform({3, 16, 16}, 0, 1, rng);
  auto plain = bb.forward(img);
  std::vector<double> want(plain.data().begin(), plain.data().end());
  AdaptedModel m = attach_adapters(std::move(bb), AdapterKind::conv_equal,
                                   Placement::encoder, 2, 0.1, 0.0, rng);
  Tensor got_t = m.forward(img);
  auto got = got_t.data();
  for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
}

TEST_CASE("forward trace exposes hidden-state propagation between blocks") {
  ToyBackbone bb = small_backbone(37);
  SeedStream rng(38);
  AdaptedModel m = attach_adapters(std::move(bb), AdapterKind::revi, Placement::encoder,
                                   2, 0.1, 0.0, rng);
  // give the adapters real dynamics so O is nonzero
  for (auto& w : m.revi) {
    for (Tensor t : {w.phi2_w, w.delta_w}) {
      auto d = t.mutable_data();
      SeedStream prng(39);
      for (auto& v : d) v = prng.uniform(-0.3, 0.3);
    }
  }
  SeedStream drng(40);
  Tensor img = Tensor::uniform({3, 16, 16}, 0, 1, drng);
  ForwardTrace trace;
  m.forward(img, &trace);
  REQUIRE(trace.sites.size() == 2);
  CHECK(trace.sites[0].is_encoder);
  CHECK(trace.sites[0].block == 0);
  CHECK(trace.sites[1].block == 1);
  // the state handed to block 1 is exactly block 0's output state
  auto sent = trace.sites[0].o_state.data();
  auto received = trace.sites[1].o_in.data();
  REQUIRE(sent.size() == received.size());
  for (size_t i = 0; i < sent.size(); ++i) CHECK(sent[i] == received[i]);
  // and it is nonzero (the propagation carries information)
  double norm = 0.0;
  for (double v : sent) norm += std::fabs(v);
  CHECK(norm > 0.0);
  // first block received the zero state
  for (double v : trace.sites[0].o_in.data()) CHECK(v == 0.0);
}

TEST_CASE("every placement trains for 50 steps with decreasing loss") {
  SeedStream drng(41);
  // memorize four fixed samples; the loss must drop
  std::vector<Tensor> imgs;
  std::vector<Tensor> masks;
  for (int i = 0; i < 4; ++i) {
    imgs.push_back(Tensor::uniform({3, 16, 16}, 0, 1, drng));
    std::vector<double> m(256, 0.0);
    int base = 16 * (4 + i);
    for (int j = base; j < base + 40; ++j) m[static_cast<size_t>(j)] = 1.0;
    masks.push_back(Tensor::from_data({1, 16, 16}, m));
  }
  for (Placement placement : {Placement::encoder, Placement::decoder, Placement::both}) {
    ToyBackbone bb = small_backbone(42);
    SeedStream rng(43);
    AdaptedModel m =
        attach_adapters(std::move(bb), AdapterKind::revi, placement, 2, 0.1, 0.0, rng);
    auto params = m.parameters();
    OptimConfig ocfg;
    ocfg.lr_init = 3e-3;
    ocfg.total_steps = 50;
    AdamW opt(ocfg);
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 50; ++step) {
      size_t idx = static_cast<size_t>(step % 4);
      for (auto& p : params) p.tensor.zero_grad();
      Tensor loss = total_loss(m.forward(imgs[idx]), masks[idx]);
      if (step == 0) first = loss.item();
      last = loss.item();
      CHECK(std::isfinite(last));
      backward(loss);
      opt.step(params, cosine_lr(step, ocfg));
    }
    INFO(placement_name(placement));
    CHECK(last < first);
  }
}
