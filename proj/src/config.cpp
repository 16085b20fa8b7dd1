#include "revi/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace revi {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Schema {
  std::map<std::string, std::function<void(RunConfig&, const std::string&)>> setters;
  std::map<std::string, std::function<std::string(const RunConfig&)>> getters;

  void field_nested(const std::string& key, std::function<void(RunConfig&, const std::string&)> set,
                    std::function<std::string(const RunConfig&)> get) {
    setters[key] = std::move(set);
    getters[key] = std::move(get);
  }
};

long to_long(const std::string& key, const std::string& v) {
  try {
    size_t pos;
    long r = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Schema build_schema() {
  Schema s;
  auto add_int = [&s](const std::string& key, int RunConfig::* m) {
    s.field_nested(
        key,
        [key, m](RunConfig& c, const std::string& v) { c.*m = static_cast<int>(to_long(key, v)); },
        [m](const RunConfig& c) { return std::to_string(c.*m); });
  };
  auto add_double = [&s](const std::string& key, double RunConfig::* m) {
    s.field_nested(
        key, [key, m](RunConfig& c, const std::string& v) { c.*m = to_double(key, v); },
        [m](const RunConfig& c) { return fmt_double(c.*m); });
  };
  auto add_bint = [&s](const std::string& key, auto getter, auto setter) {
    s.field_nested(key, setter, getter);
  };

  add_bint(
      "run.seed", [](const RunConfig& c) { return std::to_string(c.seed); },
      [](RunConfig& c, const std::string& v) {
        c.seed = static_cast<uint64_t>(to_long("run.seed", v));
      });

  auto add_bb = [&s](const std::string& key, int BackboneConfig::* m) {
    s.field_nested(
        key,
        [key, m](RunConfig& c, const std::string& v) {
          c.backbone.*m = static_cast<int>(to_long(key, v));
        },
        [m](const RunConfig& c) { return std::to_string(c.backbone.*m); });
  };
  add_bb("backbone.image_size", &BackboneConfig::image_size);
  add_bb("backbone.patch_size", &BackboneConfig::patch_size);
  add_bb("backbone.embed_dim", &BackboneConfig::embed_dim);
  add_bb("backbone.depth", &BackboneConfig::depth);
  add_bb("backbone.heads", &BackboneConfig::heads);
  add_bb("backbone.mlp_hidden", &BackboneConfig::mlp_hidden);
  add_bb("backbone.neck_hidden", &BackboneConfig::neck_hidden);
  add_bb("backbone.neck_pool", &BackboneConfig::neck_pool);
  add_bb("backbone.dec1_channels", &BackboneConfig::dec1_channels);
  add_bb("backbone.dec2_channels", &BackboneConfig::dec2_channels);

  s.field_nested(
      "adapter.kind",
      [](RunConfig& c, const std::string& v) { c.adapter_kind = adapter_kind_from(v); },
      [](const RunConfig& c) { return adapter_kind_name(c.adapter_kind); });
  s.field_nested(
      "adapter.placement",
      [](RunConfig& c, const std::string& v) { c.placement = placement_from(v); },
      [](const RunConfig& c) { return placement_name(c.placement); });
  add_int("adapter.lora_rank", &RunConfig::lora_rank);
  add_double("adapter.rho_init", &RunConfig::rho_init);
  add_double("adapter.alpha_init", &RunConfig::alpha_init);

  s.field_nested(
      "loss.lambda_edge",
      [](RunConfig& c, const std::string& v) {
        c.loss.lambda_edge = to_double("loss.lambda_edge", v);
      },
      [](const RunConfig& c) { return fmt_double(c.loss.lambda_edge); });
  s.field_nested(
      "loss.bce_epsilon",
      [](RunConfig& c, const std::string& v) {
        c.loss.bce_epsilon = to_double("loss.bce_epsilon", v);
      },
      [](const RunConfig& c) { return fmt_double(c.loss.bce_epsilon); });

  auto add_opt = [&s](const std::string& key, double OptimConfig::* m) {
    s.field_nested(
        key,
        [key, m](RunConfig& c, const std::string& v) { c.optim.*m = to_double(key, v); },
        [m](const RunConfig& c) { return fmt_double(c.optim.*m); });
  };
  add_opt("optim.lr_init", &OptimConfig::lr_init);
  add_opt("optim.lr_min", &OptimConfig::lr_min);
  add_opt("optim.beta1", &OptimConfig::beta1);
  add_opt("optim.beta2", &OptimConfig::beta2);
  add_opt("optim.weight_decay", &OptimConfig::weight_decay);
  s.field_nested(
      "optim.total_steps",
      [](RunConfig& c, const std::string& v) {
        c.optim.total_steps = static_cast<int>(to_long("optim.total_steps", v));
      },
      [](const RunConfig& c) { return std::to_string(c.optim.total_steps); });

  add_double("pretrain.lr", &RunConfig::pretrain_lr);
  add_int("pretrain.epochs", &RunConfig::pretrain_epochs);

  add_int("data.train_authentic", &RunConfig::train_authentic);
  add_int("data.train_copy_move", &RunConfig::train_copy_move);
  add_int("data.train_splice", &RunConfig::train_splice);
  add_int("data.train_removal", &RunConfig::train_removal);
  add_int("data.test_authentic", &RunConfig::test_authentic);
  add_int("data.test_copy_move", &RunConfig::test_copy_move);
  add_int("data.test_splice", &RunConfig::test_splice);
  add_int("data.test_removal", &RunConfig::test_removal);
  add_int("data.proxy_train", &RunConfig::proxy_train);
  add_int("data.proxy_val", &RunConfig::proxy_val);

  add_int("train.log_every", &RunConfig::log_every);
  s.field_nested(
      "eval.pooled",
      [](RunConfig& c, const std::string& v) {
        if (v == "true")
          c.eval_pooled = true;
        else if (v == "false")
          c.eval_pooled = false;
        else
          throw ConfigError("eval.pooled must be true or false");
      },
      [](const RunConfig& c) { return c.eval_pooled ? "true" : "false"; });
  s.field_nested(
      "paths.dataset_dir",
      [](RunConfig& c, const std::string& v) { c.dataset_dir = v; },
      [](const RunConfig& c) { return c.dataset_dir; });
  return s;
}

const Schema& schema() {
  static Schema s = build_schema();
  return s;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  const Schema& s = schema();
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'section.key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = s.setters.find(key);
    if (it == s.setters.end())
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" +
                        key + "'");
    it->second(cfg, value);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

std::string RunConfig::serialize() const {
  const Schema& s = schema();
  std::ostringstream os;
  for (const auto& [key, get] : s.getters) os << key << " = " << get(*this) << "\n";
  return os.str();
}

void write_resolved_config(const std::filesystem::path& dir, const RunConfig& cfg) {
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / "config.resolved");
  if (!f) throw ConfigError("cannot write resolved config in " + dir.string());
  f << cfg.serialize();
}

}  // namespace revi
