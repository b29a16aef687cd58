#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "nftm/experiment.hpp"

namespace nftm {

namespace {

using json = nlohmann::json;

template <class E>
struct EnumNames;

template <>
struct EnumNames<CaKind> {
  static constexpr std::pair<CaKind, const char*> items[] = {{CaKind::elementary, "elementary"},
                                                             {CaKind::life, "life"}};
};
template <>
struct EnumNames<AlphaInputs> {
  static constexpr std::pair<AlphaInputs, const char*> items[] = {{AlphaInputs::coords, "coords"},
                                                                  {AlphaInputs::u_coords, "u_coords"}};
};
template <>
struct EnumNames<MaskKind> {
  static constexpr std::pair<MaskKind, const char*> items[] = {
      {MaskKind::dropout, "dropout"}, {MaskKind::block, "block"}, {MaskKind::mixture, "mixture"}};
};
template <>
struct EnumNames<Pointwise> {
  static constexpr std::pair<Pointwise, const char*> items[] = {
      {Pointwise::relu, "relu"}, {Pointwise::tanh, "tanh"}, {Pointwise::sigmoid, "sigmoid"},
      {Pointwise::softplus, "softplus"}, {Pointwise::identity, "identity"}};
};

template <class E>
std::string enum_name(E v) {
  for (const auto& [e, n] : EnumNames<E>::items) {
    if (e == v) return n;
  }
  throw std::logic_error("unnamed enum value");
}

template <class E>
E enum_parse(const std::string& s, const std::string& where) {
  std::string options;
  for (const auto& [e, n] : EnumNames<E>::items) {
    if (s == n) return e;
    options += options.empty() ? n : std::string(", ") + n;
  }
  throw ConfigError(where + ": '" + s + "' is not one of " + options);
}

template <class T>
concept Enum = std::is_enum_v<T>;

const char* type_name(const json& v) { return v.type_name(); }

template <class T>
void read_value(const json& v, T& out, const std::string& where) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean, got " + type_name(v));
    out = v.get<bool>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number, got " + type_name(v));
    out = v.get<double>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer, got " + v.dump());
    out = v.get<T>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer, got " + v.dump());
    out = v.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string, got " + type_name(v));
    out = v.get<std::string>();
  } else if constexpr (Enum<T>) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string, got " + type_name(v));
    out = enum_parse<T>(v.get<std::string>(), where);
  } else {
    if (!v.is_array()) throw ConfigError(where + ": expected an array, got " + type_name(v));
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      typename T::value_type item{};
      read_value(v[i], item, where + "[" + std::to_string(i) + "]");
      out.push_back(item);
    }
  }
}

template <class T>
json write_value(const T& v) {
  if constexpr (Enum<T>) {
    return enum_name(v);
  } else {
    return json(v);
  }
}

struct Reader {
  static constexpr bool reading = true;
  const json& j;
  std::string path;
  std::set<std::string> seen;

  template <class T>
  void operator()(const char* key, T& field) {
    seen.insert(key);
    if (auto it = j.find(key); it != j.end()) read_value(*it, field, path + key);
  }
  template <class F>
  void block(const char* key, F&& fn) {
    seen.insert(key);
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_object()) throw ConfigError(path + key + ": expected an object, got " + type_name(*it));
    Reader sub{*it, path + key + ".", {}};
    fn(sub);
    sub.finish();
  }
  void finish() const {
    for (const auto& [k, v] : j.items()) {
      if (!seen.count(k)) throw ConfigError("unknown key '" + path + k + "'");
    }
  }
};

struct Writer {
  static constexpr bool reading = false;
  json& j;

  template <class T>
  void operator()(const char* key, T& field) {
    j[key] = write_value(field);
  }
  template <class F>
  void block(const char* key, F&& fn) {
    json sub = json::object();
    Writer w{sub};
    fn(w);
    j[key] = std::move(sub);
  }
};

template <class V>
void visit(V& v, CaTrainConfig& c) {
  v("hidden", c.hidden);
  v("lr", c.lr);
  v("epochs", c.epochs);
  v("initial_states", c.initial_states);
  v("steps", c.steps);
  v("height", c.height);
  v("width", c.width);
}

template <class V>
void visit(V& v, CaExperiment& e) {
  const CaKind before = e.kind;
  v("kind", e.kind);
  // Training defaults depend on the automaton; explicit values override them.
  if (e.kind != before) e.train = e.kind == CaKind::life ? CaTrainConfig::life_defaults() : CaTrainConfig::elementary_defaults();
  v("rule", e.rule);
  v("eval_width", e.eval_width);
  v("horizons", e.horizons);
  v("life_size", e.life_size);
  v("life_trials", e.life_trials);
  v.block("train", [&](auto& b) { visit(b, e.train); });
}

template <class V>
void visit(V& v, HeatDataOptions& d) {
  v("bumps_min", d.bumps_min);
  v("bumps_max", d.bumps_max);
  v("width_min", d.width_min);
  v("width_max", d.width_max);
  v("noise_std", d.noise_std);
}

template <class V>
void visit(V& v, PdeTrainConfig& c) {
  v("inputs", c.inputs);
  v("beta", c.beta);
  v("gamma", c.gamma);
  v("learn_variance", c.learn_variance);
  v("lambda_alpha", c.lambda_alpha);
  v("lambda_s", c.lambda_s);
  v("lambda_tv_alpha", c.lambda_tv_alpha);
  v("lr", c.lr);
  v("adam_eps", c.adam_eps);
  v("lr_final_fraction", c.lr_final_fraction);
  v("epochs_a", c.epochs_a);
  v("epochs_b", c.epochs_b);
  v("lr_b", c.lr_b);
  v("rollout_steps", c.rollout_steps);
  v("batch_sequences_b", c.batch_sequences_b);
  v("batch_sites", c.batch_sites);
  v("init_alpha", c.init_alpha);
  v("hidden", c.hidden);
  v("fourier_frequencies", c.fourier_frequencies);
}

template <class V>
void visit(V& v, HeatExperiment& e) {
  v("alpha", e.alpha);
  v("height", e.height);
  v("width", e.width);
  v("sequences", e.sequences);
  v("frames", e.frames);
  v("eval_sequences", e.eval_sequences);
  v("eval_steps", e.eval_steps);
  v.block("data", [&](auto& b) { visit(b, e.data); });
  v.block("train", [&](auto& b) { visit(b, e.train); });
}

template <class V>
void visit(V& v, InpaintConfig& c) {
  v("sigma", c.sigma);
  v("lambda_tv_loss", c.lambda_tv_loss);
  v("lambda_tv_energy", c.lambda_tv_energy);
  v("lambda_contract", c.lambda_contract);
  v("k_start", c.k_start);
  v("k_increment", c.k_increment);
  v("k_every", c.k_every);
  v("k_max", c.k_max);
  v("k_eval", c.k_eval);
  v("beta0", c.beta0);
  v("beta_final", c.beta_final);
  v("clip0", c.clip0);
  v("clip_decay", c.clip_decay);
  v("backtrack", c.backtrack);
  v("max_backtracks", c.max_backtracks);
  v("lr", c.lr);
  v("hidden", c.hidden);
  v("conv_layers", c.conv_layers);
  v("activation", c.activation);
  v("epochs", c.epochs);
  v("images_per_epoch", c.images_per_epoch);
  v("batch", c.batch);
  v("loss_all_steps", c.loss_all_steps);
}

template <class V>
void visit(V& v, InpaintExperiment& e) {
  v("height", e.height);
  v("width", e.width);
  v("train_images", e.train_images);
  v("test_images", e.test_images);
  v("cifar", e.cifar);
  v("eval_beta", e.eval_beta);
  v("filmstrips", e.filmstrips);
  v.block("mask", [&](auto& b) {
    b("fraction_lo", e.mask.fraction_lo);
    b("fraction_hi", e.mask.fraction_hi);
    b("kind", e.mask.kind);
  });
  v.block("train", [&](auto& b) { visit(b, e.train); });
}

template <class V>
void visit(V& v, BenchExperiment& e) {
  v("sides", e.sides);
  v("steps", e.steps);
  v("repeats", e.repeats);
  v("controller_hidden", e.controller_hidden);
}

template <class V>
void visit(V& v, GradcheckExperiment& e) {
  v("trials", e.trials);
  v("eps", e.eps);
  v("tolerance", e.tolerance);
  v("filter", e.filter);
}

template <class V>
void visit(V& v, ExperimentConfig& c) {
  v("seed", c.seed);
  v("out_dir", c.out_dir);
  v.block("ca", [&](auto& b) { visit(b, c.ca); });
  v.block("heat", [&](auto& b) { visit(b, c.heat); });
  v.block("inpaint", [&](auto& b) { visit(b, c.inpaint); });
  v.block("bench", [&](auto& b) { visit(b, c.bench); });
  v.block("gradcheck", [&](auto& b) { visit(b, c.gradcheck); });
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

Task parse_task(std::string_view name) {
  for (Task t : {Task::ca, Task::heat_global, Task::heat_var, Task::inpaint, Task::bench, Task::gradcheck}) {
    if (name == to_string(t)) return t;
  }
  throw ConfigError("unknown task '" + std::string(name) +
                    "' (expected ca, heat-global, heat-var, inpaint, bench or gradcheck)");
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::ca: return "ca";
    case Task::heat_global: return "heat-global";
    case Task::heat_var: return "heat-var";
    case Task::inpaint: return "inpaint";
    case Task::bench: return "bench";
    case Task::gradcheck: return "gradcheck";
  }
  return "?";
}

ExperimentConfig default_config(Task task) {
  ExperimentConfig c;
  c.task = task;
  if (task == Task::heat_global) c.heat.train.model = AlphaModelKind::global;
  if (task == Task::heat_var) {
    c.heat.train.model = AlphaModelKind::spatial;
    c.heat.height = c.heat.width = 64;
    c.heat.sequences = 32;
  }
  return c;
}

ExperimentConfig parse_config(std::string_view json_text, Task task) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (auto it = j.find("task"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("task: expected a string");
    const Task named = parse_task(it->get<std::string>());
    if (named != task) {
      throw ConfigError("config is for task '" + it->get<std::string>() + "' but the command is '" +
                        std::string(to_string(task)) + "'");
    }
  }
  ExperimentConfig c = default_config(task);
  Reader r{j, "", {}};
  r.seen.insert("task");
  visit(r, c);
  r.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, Task task) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), task);
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  json j = json::object();
  j["task"] = std::string(to_string(cfg.task));
  Writer w{j};
  visit(w, copy);
  return j.dump(2) + "\n";
}

void validate(const ExperimentConfig& c) {
  require(!c.out_dir.empty(), "out_dir must not be empty");
  switch (c.task) {
    case Task::ca: {
      const auto& e = c.ca;
      require(e.rule >= 0 && e.rule <= 255, "ca.rule must be in [0, 255]");
      require(e.eval_width >= 3, "ca.eval_width must be >= 3");
      require(!e.horizons.empty(), "ca.horizons must not be empty");
      require(e.train.epochs > 0 && e.train.initial_states > 0 && e.train.steps > 0, "ca.train sizes must be > 0");
      require(!e.train.hidden.empty(), "ca.train.hidden must not be empty");
      require(e.train.lr > 0, "ca.train.lr must be > 0");
      if (e.kind == CaKind::life) {
        require(e.life_size >= 3 && e.life_trials > 0, "ca.life_size must be >= 3 and ca.life_trials > 0");
        require(e.train.height >= 3 && e.train.width >= 3, "ca.train grid must be at least 3x3 for life");
      }
      break;
    }
    case Task::heat_global:
    case Task::heat_var: {
      const auto& e = c.heat;
      const std::size_t min_side = c.task == Task::heat_var ? 16 : 3;
      require(e.height >= min_side && e.width >= min_side,
              "heat grid must be at least " + std::to_string(min_side) + "x" + std::to_string(min_side));
      require(e.alpha >= 0.0 && e.alpha <= kCflLimit, "heat.alpha must lie in [0, 0.25] (explicit-step stability)");
      require(e.sequences > 0 && e.frames > 0 && e.eval_sequences > 0 && e.eval_steps > 0,
              "heat sequence counts and lengths must be > 0");
      require(e.data.bumps_min >= 1 && e.data.bumps_min <= e.data.bumps_max, "heat.data bump counts invalid");
      require(e.data.width_min > 0 && e.data.width_min <= e.data.width_max, "heat.data bump widths invalid");
      require(e.data.noise_std >= 0, "heat.data.noise_std must be >= 0");
      require(e.train.lr > 0 && e.train.lr_b > 0, "heat.train learning rates must be > 0");
      require(e.train.beta > 0, "heat.train.beta must be > 0");
      require(e.train.init_alpha > 0 && e.train.init_alpha <= kCflLimit, "heat.train.init_alpha must lie in (0, 0.25]");
      require(e.train.epochs_b == 0 || (e.train.rollout_steps >= 1 && e.train.rollout_steps <= e.frames),
              "heat.train.rollout_steps must lie in [1, heat.frames]");
      if (c.task == Task::heat_var) require(!e.train.hidden.empty(), "heat.train.hidden must not be empty");
      break;
    }
    case Task::inpaint: {
      const auto& e = c.inpaint;
      const auto& t = e.train;
      require(e.height >= 4 && e.width >= 4, "inpaint images must be at least 4x4");
      require(e.train_images > 0 && e.test_images > 0, "inpaint image counts must be > 0");
      require(e.mask.fraction_lo > 0 && e.mask.fraction_lo <= e.mask.fraction_hi && e.mask.fraction_hi < 1,
              "inpaint.mask fractions must satisfy 0 < lo <= hi < 1");
      require(t.sigma > 0 && t.lr > 0 && t.backtrack > 0 && t.backtrack < 1, "inpaint.train sigma, lr, backtrack invalid");
      require(t.k_start >= 1 && t.k_start <= t.k_max && t.k_eval >= 1 && t.k_every >= 1, "inpaint.train K schedule invalid");
      require(t.beta0 > 0 && t.beta_final > 0 && t.clip0 > 0 && t.clip_decay > 0, "inpaint.train step sizes must be > 0");
      require(t.epochs > 0 && t.batch > 0 && t.images_per_epoch > 0 && t.conv_layers > 0 && t.hidden > 0,
              "inpaint.train sizes must be > 0");
      if (!e.cifar.empty()) {
        require(std::filesystem::is_regular_file(e.cifar), "inpaint.cifar: no such file " + e.cifar);
        require(e.height == 32 && e.width == 32, "CIFAR-10 images are 32x32");
      }
      break;
    }
    case Task::bench: {
      const auto& e = c.bench;
      require(!e.sides.empty(), "bench.sides must not be empty");
      for (std::size_t i = 0; i < e.sides.size(); ++i) {
        require(e.sides[i] >= 4, "bench.sides must be >= 4");
        require(i == 0 || e.sides[i] > e.sides[i - 1], "bench.sides must be increasing");
      }
      require(e.steps > 0 && e.repeats > 0 && e.controller_hidden > 0, "bench sizes must be > 0");
      break;
    }
    case Task::gradcheck:
      require(c.gradcheck.trials > 0 && c.gradcheck.eps > 0 && c.gradcheck.tolerance > 0,
              "gradcheck trials, eps and tolerance must be > 0");
      break;
  }
}

}  // namespace nftm
