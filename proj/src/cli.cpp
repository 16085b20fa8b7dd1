#include "revi/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "revi/checkpoint.hpp"
#include "revi/gradcheck.hpp"
#include "revi/losses.hpp"
#include "revi/rng.hpp"
#include "revi/rpca.hpp"

namespace revi {

namespace {

Tensor image_tensor(const std::vector<double>& img, int size) {
  return Tensor::from_data({3, size, size}, img);
}

Tensor mask_tensor(const std::vector<double>& mask, int size) {
  return Tensor::from_data({1, size, size}, mask);
}

std::vector<double> predict_probs(const AdaptedModel& model, const std::vector<double>& img,
                                  int size) {
  Tensor logits = model.forward(image_tensor(img, size));
  auto span = logits.data();
  std::vector<double> probs(span.size());
  for (size_t i = 0; i < span.size(); ++i)
    probs[i] = 1.0 / (1.0 + std::exp(-span[i]));
  return probs;
}

// Deterministic epoch shuffle feeding the step loop.
struct SampleOrder {
  std::vector<int> order;
  size_t cursor = 0;
  uint64_t seed;
  int epoch = 0;
  int n;

  SampleOrder(int count, uint64_t seed) : seed(seed), n(count) { reshuffle(); }
  void reshuffle() {
    order.resize(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    SeedStream rng = substream(seed, "epoch", static_cast<uint64_t>(epoch));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    cursor = 0;
    ++epoch;
  }
  int next() {
    if (cursor >= order.size()) reshuffle();
    return order[cursor++];
  }
};

double mean_iou(const AdaptedModel& model, const std::vector<LoadedSample>& samples) {
  double acc = 0.0;
  int n = 0;
  for (const auto& s : samples) {
    int size = s.image.width;
    auto probs = predict_probs(model, to_unit(s.image), size);
    auto gt = u8_to_mask(s.mask);
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
      bool p = probs[i] >= 0.5;
      bool t = gt[i] != 0.0;
      if (p && t) ++tp;
      if (p && !t) ++fp;
      if (!p && t) ++fn;
    }
    acc += (tp + fp + fn) ? static_cast<double>(tp) / (tp + fp + fn) : 1.0;
    ++n;
  }
  return n ? acc / n : 0.0;
}

}  // namespace

AdaptedModel build_model(const RunConfig& cfg, SeedStream& rng) {
  ToyBackbone bb = ToyBackbone::init(cfg.backbone, rng);
  SeedStream arng = substream(cfg.seed, "adapters");
  return attach_adapters(std::move(bb), cfg.adapter_kind, cfg.placement, cfg.lora_rank,
                         cfg.rho_init, cfg.alpha_init, arng);
}

Predictor make_predictor(const AdaptedModel& model) {
  return [&model](const std::vector<double>& img, int size) {
    return predict_probs(model, img, size);
  };
}

void cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  int size = cfg.backbone.image_size;
  SplitSpec train{"train", cfg.train_authentic, cfg.train_copy_move, cfg.train_splice,
                  cfg.train_removal, 0};
  SplitSpec test{"test", cfg.test_authentic, cfg.test_copy_move, cfg.test_splice,
                 cfg.test_removal, 0};
  SplitSpec ptrain{"proxy_train", 0, 0, 0, 0, cfg.proxy_train};
  SplitSpec pval{"proxy_val", 0, 0, 0, 0, cfg.proxy_val};
  for (const auto& spec : {train, test, ptrain, pval})
    if (spec.total() > 0) generate_split(out_dir / spec.name, spec, size, cfg.seed);
  write_resolved_config(out_dir, cfg);
}

TrainStats cmd_pretrain(const RunConfig& cfg, const std::filesystem::path& data_dir,
                        const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "train.log");

  auto train_set = load_split(data_dir / "proxy_train");
  auto val_set = load_split(data_dir / "proxy_val");
  if (train_set.empty()) throw IoError("pretrain: empty proxy_train split");

  SeedStream init_rng = substream(cfg.seed, "backbone-init");
  ToyBackbone bb = ToyBackbone::init(cfg.backbone, init_rng);
  // Plain wrapper: no adapters, nothing frozen, head included.
  AdaptedModel model;
  model.backbone = std::move(bb);
  auto params = model.parameters();

  int size = cfg.backbone.image_size;
  int total_steps = cfg.pretrain_epochs * static_cast<int>(train_set.size());
  OptimConfig ocfg = cfg.optim;
  ocfg.lr_init = cfg.pretrain_lr;
  ocfg.total_steps = std::max(total_steps, 1);
  AdamW opt(ocfg);
  SampleOrder order(static_cast<int>(train_set.size()), substream(cfg.seed, "pretrain-order").next_u64());

  TrainStats stats;
  for (int step = 0; step < total_steps; ++step) {
    const auto& s = train_set[static_cast<size_t>(order.next())];
    Tensor img = image_tensor(to_unit(s.image), size);
    Tensor gt = mask_tensor(u8_to_mask(s.mask), size);
    for (auto& p : params) p.tensor.zero_grad();
    Tensor loss = bce_loss(model.forward(img), gt, cfg.loss.bce_epsilon);
    double lv = loss.item();
    if (!std::isfinite(lv))
      throw NumericalError("pretrain: loss diverged at step " + std::to_string(step) +
                           " (sample seed " + std::to_string(s.seed) + ")");
    if (step == 0) stats.first_loss = lv;
    stats.last_loss = lv;
    backward(loss);
    opt.step(params, cosine_lr(step, ocfg));
    ++stats.steps;
    if (step % cfg.log_every == 0)
      log << "step " << step << " lr " << cosine_lr(step, ocfg) << " loss " << lv << "\n";
  }
  stats.val_iou = val_set.empty() ? 0.0 : mean_iou(model, val_set);
  log << "val_iou " << stats.val_iou << "\n";
  save_checkpoint(out_dir / "checkpoint.bin", params);
  write_resolved_config(out_dir, cfg);
  return stats;
}

TrainStats cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
                     const std::filesystem::path& pretrain_checkpoint,
                     const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "train.log");

  auto train_set = load_split(data_dir / "train");
  if (train_set.empty()) throw IoError("train: empty train split");

  SeedStream init_rng = substream(cfg.seed, "backbone-init");
  AdaptedModel model = build_model(cfg, init_rng);
  auto params = model.parameters();
  // Backbone weights come from the pretraining run; adapters/LoRA/head keep
  // their init. The current frozen mask (set by attach_adapters) stands.
  load_checkpoint(pretrain_checkpoint, params, /*allow_missing=*/true,
                  /*apply_frozen_mask=*/false);

  ParamCensus census = model.census();
  {
    std::ofstream cf(out_dir / "census.txt");
    cf << census.to_table();
  }
  log << "trainable ratio " << census.trainable_ratio() << "\n";

  int size = cfg.backbone.image_size;
  OptimConfig ocfg = cfg.optim;
  AdamW opt(ocfg);
  SampleOrder order(static_cast<int>(train_set.size()),
                    substream(cfg.seed, "train-order").next_u64());

  TrainStats stats;
  for (int step = 0; step < ocfg.total_steps; ++step) {
    const auto& s = train_set[static_cast<size_t>(order.next())];
    Tensor img = image_tensor(to_unit(s.image), size);
    Tensor gt = mask_tensor(u8_to_mask(s.mask), size);
    for (auto& p : params) p.tensor.zero_grad();
    Tensor logits = model.forward(img);
    Tensor el = edge_loss(logits, gt, cfg.loss.bce_epsilon);
    Tensor loss = add(bce_loss(logits, gt, cfg.loss.bce_epsilon),
                      mul_scalar(el, cfg.loss.lambda_edge));
    double lv = loss.item();
    if (!std::isfinite(lv))
      throw NumericalError("train: loss diverged at step " + std::to_string(step) +
                           " (sample seed " + std::to_string(s.seed) + ")");
    if (step == 0) stats.first_loss = lv;
    stats.last_loss = lv;
    backward(loss);
    opt.step(params, cosine_lr(step, ocfg));
    ++stats.steps;
    if (step % cfg.log_every == 0)
      log << "step " << step << " lr " << cosine_lr(step, ocfg) << " loss " << lv
          << " edge " << el.item() << "\n";
  }
  save_checkpoint(out_dir / "checkpoint.bin", params, &opt);
  write_resolved_config(out_dir, cfg);
  return stats;
}

EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                    const std::filesystem::path& data_dir,
                    const std::vector<Distortion>& distortions,
                    const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  auto test_set = load_split(data_dir / "test");

  SeedStream init_rng = substream(cfg.seed, "backbone-init");
  AdaptedModel model = build_model(cfg, init_rng);
  auto params = model.parameters();
  load_checkpoint(checkpoint, params);

  EvalOptions opts;
  opts.pooled = cfg.eval_pooled;
  opts.distortions = distortions;
  opts.noise_seed = cfg.seed;
  EvalReport rep = evaluate(make_predictor(model), test_set, opts);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream tsv(out_dir / "report.tsv");
    tsv << rep.to_tsv();
    std::ofstream summary(out_dir / "report.txt");
    summary << rep.to_summary_line() << "\n";
    write_resolved_config(out_dir, cfg);
  }
  return rep;
}

namespace {

Mat pgm_to_mat(const std::filesystem::path& path) {
  ImageU8 img = read_pgm(path);
  Mat m(img.height, img.width);
  for (size_t i = 0; i < img.data.size(); ++i) m.data[i] = img.data[i] / 255.0;
  return m;
}

void write_renormalized(const std::filesystem::path& path, const Mat& m) {
  double lo = m.data[0], hi = m.data[0];
  for (double v : m.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span = hi - lo;
  std::vector<double> unit(m.data.size());
  for (size_t i = 0; i < m.data.size(); ++i)
    unit[i] = span > 0.0 ? (m.data[i] - lo) / span : 0.0;
  write_pgm(path, to_u8_gray(unit, m.rows, m.cols));
}

}  // namespace

void cmd_decompose_classical(const std::filesystem::path& input_pgm,
                             const std::filesystem::path& out_dir, int max_iter) {
  std::filesystem::create_directories(out_dir);
  Mat d = pgm_to_mat(input_pgm);
  RpcaConfig cfg;
  cfg.max_iter = max_iter;
  RpcaResult res = rpca_decompose(d, cfg);
  if (!res.converged)
    std::cerr << "decompose: rpca did not reach tolerance in " << res.iterations
              << " iterations (residual "
              << (res.residual_history.empty() ? 0.0 : res.residual_history.back())
              << ")\n";
  write_renormalized(out_dir / "B.pgm", res.low_rank);
  write_renormalized(out_dir / "O.pgm", res.sparse);
}

void cmd_decompose_learned(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                           const std::filesystem::path& input_pgm,
                           const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ImageU8 gray = read_pgm(input_pgm);
  int size = cfg.backbone.image_size;

  // grayscale -> RGB, resized to the model's input size
  std::vector<double> img(static_cast<size_t>(3) * size * size);
  std::vector<double> unit = to_unit(gray);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double fy = std::clamp((y + 0.5) * gray.height / size - 0.5, 0.0, gray.height - 1.0);
      double fx = std::clamp((x + 0.5) * gray.width / size - 0.5, 0.0, gray.width - 1.0);
      int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
      int y1 = std::min(y0 + 1, gray.height - 1), x1 = std::min(x0 + 1, gray.width - 1);
      double wy = fy - y0, wx = fx - x0;
      double v = (1 - wy) * ((1 - wx) * unit[static_cast<size_t>(y0) * gray.width + x0] +
                             wx * unit[static_cast<size_t>(y0) * gray.width + x1]) +
                 wy * ((1 - wx) * unit[static_cast<size_t>(y1) * gray.width + x0] +
                       wx * unit[static_cast<size_t>(y1) * gray.width + x1]);
      for (int c = 0; c < 3; ++c)
        img[static_cast<size_t>(c) * size * size + static_cast<size_t>(y) * size + x] = v;
    }

  SeedStream init_rng = substream(cfg.seed, "backbone-init");
  AdaptedModel model = build_model(cfg, init_rng);
  auto params = model.parameters();
  load_checkpoint(checkpoint, params);
  if (model.sites.empty())
    throw IoError("decompose --learned: configured model has no adapters");

  ForwardTrace trace;
  model.forward(image_tensor(img, size), &trace);
  for (const auto& site : trace.sites) {
    std::string tag = (site.is_encoder ? "enc" : "dec") + std::to_string(site.block);
    auto dump = [&](const Tensor& t, const std::string& name) {
      int c = t.dim(0), h = t.dim(1), w = t.dim(2);
      Mat m(h, w);
      auto span = t.data();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double acc = 0.0;
          for (int ch = 0; ch < c; ++ch)
            acc += span[(static_cast<size_t>(ch) * h + y) * w + x];
          m.at(y, x) = acc / c;
        }
      write_renormalized(out_dir / (std::string("block_") + tag + "_" + name + ".pgm"), m);
    };
    dump(site.b, "B");
    dump(site.o_raw, "O");
  }
}

std::string cmd_census(const RunConfig& cfg) {
  SeedStream init_rng = substream(cfg.seed, "backbone-init");
  AdaptedModel model = build_model(cfg, init_rng);
  return model.census().to_table();
}

bool cmd_gradcheck(std::string& report_out) {
  std::ostringstream os;
  bool all_pass = true;
  for (const auto& check : gradcheck_registry()) {
    GradCheckReport rep = check.run();
    bool pass = rep.pass(check.tol);
    all_pass = all_pass && pass;
    os << (pass ? "[PASS] " : "[FAIL] ") << check.name << "  max_rel_err "
       << rep.max_rel_err << "  tol " << check.tol << "\n";
  }
  report_out = os.str();
  return all_pass;
}

}  // namespace revi
