#include "nftm/ca.hpp"

#include <stdexcept>
#include <string>

namespace nftm {

namespace {

void check_binary(std::span<const std::uint8_t> cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] > 1) {
      throw std::invalid_argument("cell " + std::to_string(i) + " holds " + std::to_string(cells[i]) +
                                  ", expected 0 or 1");
    }
  }
}

std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

std::size_t block_index(std::span<const std::uint8_t> g, std::size_t h, std::size_t w, std::size_t y,
                        std::size_t x) {
  std::size_t k = 0;
  for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
    for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
      const auto yy = wrap(static_cast<std::ptrdiff_t>(y) + dy, h);
      const auto xx = wrap(static_cast<std::ptrdiff_t>(x) + dx, w);
      k = (k << 1) | g[yy * w + xx];
    }
  }
  return k;
}

// Rows of every configuration of `arity` bits, most significant bit first.
Tensor all_configurations(std::size_t arity) {
  const std::size_t n = std::size_t{1} << arity;
  std::vector<double> x(n * arity);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < arity; ++j) x[k * arity + j] = static_cast<double>((k >> (arity - 1 - j)) & 1u);
  }
  return Tensor({n, arity}, std::move(x));
}

}  // namespace

CaRule rule_truth_table(int rule_number) {
  if (rule_number < 0 || rule_number > 255) {
    throw std::invalid_argument("rule number " + std::to_string(rule_number) + " outside 0..255");
  }
  CaRule r{CaKind::elementary, Bits(8)};
  for (int k = 0; k < 8; ++k) r.table[k] = static_cast<std::uint8_t>((rule_number >> k) & 1);
  return r;
}

CaRule life_rule() {
  CaRule r{CaKind::life, Bits(512)};
  for (std::size_t k = 0; k < 512; ++k) {
    const bool alive = (k >> 4) & 1u;
    int n = 0;
    for (std::size_t b = 0; b < 9; ++b) n += (b != 4) && ((k >> b) & 1u);
    r.table[k] = static_cast<std::uint8_t>(n == 3 || (alive && n == 2));
  }
  return r;
}

Bits ca1d_step_exact(std::span<const std::uint8_t> row, const CaRule& rule) {
  if (rule.kind != CaKind::elementary) throw std::invalid_argument("ca1d_step_exact needs an elementary rule");
  check_binary(row);
  const std::size_t n = row.size();
  Bits out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<std::ptrdiff_t>(i);
    const unsigned k = (row[wrap(ii - 1, n)] << 2) | (row[i] << 1) | row[wrap(ii + 1, n)];
    out[i] = rule.table[k];
  }
  return out;
}

Bits gol_step_exact(std::span<const std::uint8_t> grid, std::size_t h, std::size_t w) {
  if (grid.size() != h * w) {
    throw std::invalid_argument("grid has " + std::to_string(grid.size()) + " cells, expected " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
  check_binary(grid);
  Bits out(grid.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      int n = 0;
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          n += grid[wrap(static_cast<std::ptrdiff_t>(y) + dy, h) * w + wrap(static_cast<std::ptrdiff_t>(x) + dx, w)];
        }
      }
      const bool alive = grid[y * w + x];
      out[y * w + x] = static_cast<std::uint8_t>(n == 3 || (alive && n == 2));
    }
  }
  return out;
}

std::vector<Bits> ca1d_rollout_exact(const Bits& row, const CaRule& rule, std::size_t steps) {
  std::vector<Bits> out{row};
  for (std::size_t t = 0; t < steps; ++t) out.push_back(ca1d_step_exact(out.back(), rule));
  return out;
}

std::vector<Bits> gol_rollout_exact(const Bits& grid, std::size_t h, std::size_t w, std::size_t steps) {
  std::vector<Bits> out{grid};
  for (std::size_t t = 0; t < steps; ++t) out.push_back(gol_step_exact(out.back(), h, w));
  return out;
}

Bits random_bits(std::size_t n, double density, Rng& rng) {
  Bits b(n);
  for (auto& v : b) v = rng.coin(density) ? 1 : 0;
  return b;
}

Tensor bits_to_tensor(const Bits& bits, Shape shape) {
  return Tensor(std::move(shape), std::vector<double>(bits.begin(), bits.end()));
}

Bits tensor_to_bits(const Tensor& t) {
  Bits out(t.numel());
  auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0 && v[i] != 1.0) {
      throw std::invalid_argument("entry " + std::to_string(i) + " is " + std::to_string(v[i]) +
                                  ", expected 0 or 1");
    }
    out[i] = static_cast<std::uint8_t>(v[i]);
  }
  return out;
}

CaTrainConfig CaTrainConfig::elementary_defaults() { return CaTrainConfig{}; }

CaTrainConfig CaTrainConfig::life_defaults() {
  CaTrainConfig c;
  c.hidden = {32, 32};
  c.epochs = 1500;
  c.height = 16;
  c.width = 16;
  return c;
}

CaTrainReport train_ca_controller(const CaRule& rule, const CaTrainConfig& cfg) {
  if (cfg.epochs == 0) throw std::invalid_argument("CA training needs epochs > 0");
  if (cfg.initial_states == 0 || cfg.steps == 0) throw std::invalid_argument("CA training needs at least one pair");
  const bool life = rule.kind == CaKind::life;
  const std::size_t arity = rule.arity(), configs = std::size_t{1} << arity;
  if (rule.table.size() != configs) throw std::invalid_argument("rule table has the wrong size");
  const std::size_t h = life ? cfg.height : 1, w = cfg.width;

  // Count teacher-forced (neighbourhood, next bit) pairs.
  Rng data_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<double> count(configs, 0.0);
  std::size_t pairs = 0;
  for (std::size_t s = 0; s < cfg.initial_states; ++s) {
    // Life states use a spread of densities so crowded blocks are seen too.
    const double density = life ? data_rng.uniform(0.15, 0.85) : 0.5;
    Bits state = random_bits(h * w, density, data_rng);
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          std::size_t k;
          if (life) {
            k = block_index(state, h, w, y, x);
          } else {
            k = (state[wrap(static_cast<std::ptrdiff_t>(x) - 1, w)] << 2) | (state[x] << 1) | state[wrap(x + 1, w)];
          }
          count[k] += 1.0;
          ++pairs;
        }
      }
      state = life ? gol_step_exact(state, h, w) : ca1d_step_exact(state, rule);
    }
  }
  std::vector<std::size_t> seen;
  for (std::size_t k = 0; k < configs; ++k) {
    if (count[k] > 0) seen.push_back(k);
  }
  if (seen.size() != configs) {
    throw std::runtime_error("CA training pairs cover only " + std::to_string(seen.size()) + " of " +
                             std::to_string(configs) + " neighbourhood configurations");
  }

  Tensor x = all_configurations(arity);
  std::vector<double> target(configs);
  for (std::size_t k = 0; k < configs; ++k) target[k] = rule.table[k];

  Rng init_rng(cfg.seed);
  CaTrainReport rep;
  rep.controller.kind = rule.kind;
  std::vector<std::size_t> sizes{arity};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  rep.controller.mlp = Mlp::build(rep.controller.params, "ca", sizes, Pointwise::tanh, init_rng);

  Adam adam;
  adam.lr = cfg.lr;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    Tensor loss = bce_with_logits(rep.controller.logits(x), target, count);
    loss.backward();
    adam.step(rep.controller.params);
    rep.final_loss = loss.item();
  }
  rep.final_loss = bce_with_logits(rep.controller.logits(x), target, count).item();
  rep.pairs = pairs;
  rep.distinct_neighbourhoods = seen.size();
  const CaRule learned = extract_learned_table(rep.controller);
  for (std::size_t k = 0; k < configs; ++k) rep.table_mismatches += learned.table[k] != rule.table[k];
  return rep;
}

RolloutTrace nftm_ca_rollout(const CaController& controller, const FieldGrid& f0, std::size_t steps) {
  tensor_to_bits(f0.data);
  const bool life = controller.kind == CaKind::life;
  if (life != f0.two_d() || f0.channels() != 1) {
    throw std::invalid_argument(std::string("a ") + (life ? "Life" : "1D") + " controller cannot run on field " +
                                shape_str(f0.data.shape()));
  }
  MachineSpec m;
  m.mode = UpdateMode::direct_write;
  m.layout = HeadLayout::dense;
  m.radius = 1.0;
  m.support = Support::box;
  m.g = Pointwise::sigmoid;
  m.read_transform = [](const Tensor& t) { return ste_binarize(t); };
  m.write_transform = [](const Tensor& t) { return ste_binarize(t); };
  m.controller = [&controller](const Tensor& patches, std::size_t) {
    return ControllerOutput{controller.logits(patches), {}};
  };
  return rollout(m, f0, steps);
}

CaRule extract_learned_table(const CaController& controller) {
  const std::size_t arity = controller.kind == CaKind::elementary ? 3 : 9;
  Tensor bits = ste_binarize(sigmoid(controller.logits(all_configurations(arity))));
  return CaRule{controller.kind, tensor_to_bits(bits)};
}

Tensor trace_image(const std::vector<Bits>& rows) {
  if (rows.empty()) throw std::invalid_argument("trace_image: empty trace");
  std::vector<double> v;
  v.reserve(rows.size() * rows[0].size());
  for (const auto& r : rows) {
    if (r.size() != rows[0].size()) throw std::invalid_argument("trace_image: ragged rows");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), rows[0].size()}, std::move(v));
}

Tensor trace_image(const RolloutTrace& trace) {
  std::vector<Bits> rows;
  for (const auto& f : trace.fields) {
    if (f.two_d()) throw std::invalid_argument("trace_image: needs a 1D trace");
    rows.push_back(tensor_to_bits(f.data));
  }
  return trace_image(rows);
}

}  // namespace nftm
