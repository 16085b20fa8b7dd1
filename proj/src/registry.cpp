#include "revi/backbone.hpp"
#include "revi/gradcheck.hpp"
#include "revi/losses.hpp"
#include "revi/rng.hpp"

namespace revi {

namespace {

Tensor rand_t(std::vector<int> shape, SeedStream& rng, bool grad = true) {
  return Tensor::uniform(std::move(shape), -1.0, 1.0, rng, grad);
}

// Builds one check around a loss closure over named parameters.
GradCheckCase make_case(std::string name, double tol,
                        std::function<std::pair<std::function<Tensor()>,
                                                std::vector<NamedParam>>()> build) {
  GradCheckCase c;
  c.name = std::move(name);
  c.tol = tol;
  c.run = [build] {
    auto [f, params] = build();
    return grad_check(f, params);
  };
  return c;
}

}  // namespace

std::vector<GradCheckCase> gradcheck_registry() {
  std::vector<GradCheckCase> cases;
  const double tol = 1e-3;

  cases.push_back(make_case("elementwise add/sub/mul/div", tol, [] {
    SeedStream rng(11);
    Tensor a = rand_t({3, 5}, rng);
    Tensor b = Tensor::uniform({3, 5}, 0.5, 1.5, rng, true);  // away from zero for div
    std::vector<NamedParam> params{{"a", a}, {"b", b}};
    auto f = [a, b] { return sum(div(mul(add(a, b), sub(a, b)), b)); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("scalar ops and scale", tol, [] {
    SeedStream rng(12);
    Tensor a = rand_t({4, 4}, rng);
    Tensor s = rand_t({1}, rng);
    std::vector<NamedParam> params{{"a", a}, {"s", s}};
    auto f = [a, s] { return sum(scale(add_scalar(mul_scalar(a, 1.7), 0.3), s)); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("relu/sigmoid", tol, [] {
    SeedStream rng(13);
    // keep entries away from the relu kink
    Tensor a = Tensor::uniform({6, 6}, 0.1, 1.0, rng, true);
    Tensor b = rand_t({6, 6}, rng);
    std::vector<NamedParam> params{{"a", a}, {"b", b}};
    auto f = [a, b] { return mean(mul(relu(a), sigmoid(b))); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("matmul", 1e-5, [] {
    SeedStream rng(14);
    Tensor a = rand_t({4, 5}, rng);
    Tensor b = rand_t({5, 3}, rng);
    std::vector<NamedParam> params{{"a", a}, {"b", b}};
    auto f = [a, b] { return sum(matmul(a, b)); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("matmul_nt/transpose/slice/concat", tol, [] {
    SeedStream rng(15);
    Tensor a = rand_t({4, 6}, rng);
    Tensor b = rand_t({5, 6}, rng);
    std::vector<NamedParam> params{{"a", a}, {"b", b}};
    auto f = [a, b] {
      Tensor prod = matmul_nt(a, b);                       // [4,5]
      Tensor t = transpose2d(prod);                        // [5,4]
      Tensor s1 = slice_cols(t, 0, 2), s2 = slice_cols(t, 2, 2);
      return sum(mul(concat_cols({s2, s1}), t));
    };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("softmax/layer_norm", tol, [] {
    SeedStream rng(16);
    Tensor x = rand_t({5, 7}, rng);
    Tensor g = Tensor::uniform({7}, 0.5, 1.5, rng, true);
    Tensor b = rand_t({7}, rng);
    std::vector<NamedParam> params{{"x", x}, {"g", g}, {"b", b}};
    auto f = [x, g, b] { return sum(mul(softmax_rows(x), layer_norm(x, g, b))); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("attention", 1e-4, [] {
    SeedStream rng(17);
    Tensor q = rand_t({4, 8}, rng);
    Tensor k = rand_t({4, 8}, rng);
    Tensor v = rand_t({4, 8}, rng);
    std::vector<NamedParam> params{{"q", q}, {"k", k}, {"v", v}};
    auto f = [q, k, v] { return sum(attention(q, k, v, 2)); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("conv2d 3x3", 1e-4, [] {
    SeedStream rng(18);
    Tensor x = rand_t({2, 8, 8}, rng);
    Tensor w = rand_t({3, 2, 3, 3}, rng);
    Tensor b = rand_t({3}, rng);
    std::vector<NamedParam> params{{"x", x}, {"w", w}, {"b", b}};
    auto f = [x, w, b] { return sum(conv2d(x, w, b)); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("conv2d 1x1/5x5", tol, [] {
    SeedStream rng(19);
    Tensor x = rand_t({2, 6, 6}, rng);
    Tensor w1 = rand_t({4, 2, 1, 1}, rng);
    Tensor b1 = rand_t({4}, rng);
    Tensor w5 = rand_t({1, 4, 5, 5}, rng);
    Tensor b5 = rand_t({1}, rng);
    std::vector<NamedParam> params{{"x", x}, {"w1", w1}, {"b1", b1}, {"w5", w5}, {"b5", b5}};
    auto f = [=] { return sum(conv2d(conv2d(x, w1, b1), w5, b5)); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("grid reshapes and resampling", tol, [] {
    SeedStream rng(20);
    Tensor img = rand_t({3, 8, 8}, rng);
    std::vector<NamedParam> params{{"img", img}};
    auto f = [img] {
      Tensor tok = patchify(img, 4);                  // [4, 48]
      Tensor grid = tokens_to_grid(grid_to_tokens(tokens_to_grid(tok, 48, 2, 2)), 48, 2, 2);
      Tensor up = upsample_nearest2x(grid);           // [48,4,4]
      Tensor rs = bilinear_resize(up, 3, 5);
      Tensor pooled = avgpool(up, 2);
      return add(sum(rs), sum(reshape(pooled, {48 * 4})));
    };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("max/min pool", tol, [] {
    SeedStream rng(21);
    Tensor x = rand_t({1, 7, 7}, rng);
    std::vector<NamedParam> params{{"x", x}};
    auto f = [x] { return sum(sub(maxpool3x3(x), minpool3x3(x))); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("bce with logits", 1e-4, [] {
    SeedStream rng(22);
    Tensor logits = rand_t({1, 6, 6}, rng);
    std::vector<double> tdata(36);
    SeedStream trng(23);
    for (auto& v : tdata) v = trng.uniform() < 0.5 ? 0.0 : 1.0;
    Tensor target = Tensor::from_data({1, 6, 6}, tdata);
    std::vector<NamedParam> params{{"logits", logits}};
    auto f = [logits, target] { return bce_with_logits(logits, target); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("bce on probabilities", tol, [] {
    SeedStream rng(24);
    Tensor p = Tensor::uniform({1, 5, 5}, 0.1, 0.9, rng, true);
    std::vector<double> tdata(25);
    SeedStream trng(25);
    for (auto& v : tdata) v = trng.uniform() < 0.5 ? 0.0 : 1.0;
    Tensor target = Tensor::from_data({1, 5, 5}, tdata);
    std::vector<NamedParam> params{{"p", p}};
    auto f = [p, target] { return bce_probs(p, target); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("lora_forward", tol, [] {
    SeedStream rng(26);
    Tensor w0 = rand_t({8, 8}, rng, false);
    LoraWeights lw = LoraWeights::make(w0, 2, rng);
    // perturb up away from its zero init so the check is non-trivial
    {
      auto up = lw.up.mutable_data();
      SeedStream urng(27);
      for (auto& v : up) v = urng.uniform(-0.5, 0.5);
    }
    Tensor x = rand_t({3, 8}, rng);
    std::vector<NamedParam> params{{"x", x}, {"down", lw.down}, {"up", lw.up}};
    auto f = [x, lw] { return sum(lora_forward(x, lw, 0.5)); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("ska/mke/enhance chain", tol, [] {
    SeedStream rng(28);
    ReviAdapterWeights w = ReviAdapterWeights::init(3, 0.3, 0.2, rng);
    // zero-initialized pieces get real values so every path carries signal
    for (Tensor t : {w.phi2_w, w.delta_w}) {
      auto d = t.mutable_data();
      SeedStream prng(29);
      for (auto& v : d) v = prng.uniform(-0.3, 0.3);
    }
    Tensor d_prev = rand_t({3, 6, 6}, rng);
    Tensor o_prev = rand_t({3, 6, 6}, rng);
    std::vector<NamedParam> params;
    w.collect("adapter", params);
    params.push_back({"d_prev", d_prev});
    params.push_back({"o_prev", o_prev});
    auto f = [d_prev, o_prev, w] {
      Tensor b = ska_forward(d_prev, o_prev, w);
      Tensor o = mke_forward(d_prev, b, o_prev, w);
      Tensor d = enhance(mul_scalar(d_prev, 0.9), o, w.alpha);
      return mean(mul(d, d));
    };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("edge and total loss", tol, [] {
    SeedStream rng(30);
    Tensor logits = rand_t({1, 6, 6}, rng);
    std::vector<double> mdata(36, 0.0);
    for (int y = 2; y <= 3; ++y)
      for (int x = 2; x <= 3; ++x) mdata[static_cast<size_t>(y) * 6 + x] = 1.0;
    Tensor gt = Tensor::from_data({1, 6, 6}, mdata);
    std::vector<NamedParam> params{{"logits", logits}};
    auto f = [logits, gt] { return total_loss(logits, gt); };
    return std::make_pair(std::function<Tensor()>(f), params);
  }));

  cases.push_back(make_case("full model loss (revi, both placements)", tol, [] {
    BackboneConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 4;
    cfg.embed_dim = 16;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.mlp_hidden = 24;
    cfg.neck_hidden = 20;
    cfg.neck_pool = 2;
    cfg.dec1_channels = 8;
    cfg.dec2_channels = 6;
    SeedStream rng(31);
    ToyBackbone bb = ToyBackbone::init(cfg, rng);
    AdaptedModel model = attach_adapters(std::move(bb), AdapterKind::revi,
                                         Placement::both, 2, 0.3, 0.15, rng);
    // light perturbation of the zero-initialized tensors, as above
    SeedStream prng(32);
    for (auto& w : model.revi)
      for (Tensor t : {w.phi2_w, w.delta_w, w.alpha}) {
        auto d = t.mutable_data();
        for (auto& v : d) v = prng.uniform(-0.2, 0.2);
      }
    for (auto& blk : model.backbone.encoder)
      for (AttnProj* p : {&blk.q, &blk.k, &blk.v}) {
        auto d = p->lora->up.mutable_data();
        for (auto& v : d) v = prng.uniform(-0.2, 0.2);
      }
    auto all = model.parameters();
    std::vector<NamedParam> trainable;
    for (auto& p : all)
      if (!p.frozen()) trainable.push_back(p);
    Tensor img = Tensor::uniform({3, 16, 16}, 0.0, 1.0, prng);
    std::vector<double> mdata(static_cast<size_t>(16) * 16, 0.0);
    for (int y = 5; y < 10; ++y)
      for (int x = 4; x < 11; ++x) mdata[static_cast<size_t>(y) * 16 + x] = 1.0;
    Tensor gt = Tensor::from_data({1, 16, 16}, mdata);
    auto shared = std::make_shared<AdaptedModel>(std::move(model));
    auto f = [shared, img, gt] { return total_loss(shared->forward(img), gt); };
    return std::make_pair(std::function<Tensor()>(f), trainable);
  }));

  return cases;
}

}  // namespace revi
