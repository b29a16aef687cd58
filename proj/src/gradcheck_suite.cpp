#include "nftm/gradcheck_suite.hpp"

#include <cmath>
#include <memory>
#include <numeric>

#include "nftm/field.hpp"
#include "nftm/heat.hpp"
#include "nftm/inpaint.hpp"
#include "nftm/ops.hpp"

namespace nftm {

namespace {

std::vector<double> uniform_values(std::size_t n, Rng& rng, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

Tensor leaf(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  const std::size_t n = numel_of(shape);
  return Tensor(std::move(shape), uniform_values(n, rng, lo, hi), true);
}

// Values at least `margin` away from each kink.
Tensor leaf_away(Shape shape, Rng& rng, std::vector<double> kinks, double lo = -1.0, double hi = 1.0,
                 double margin = 0.02) {
  const std::size_t n = numel_of(shape);
  auto v = uniform_values(n, rng, lo, hi);
  for (auto& x : v) {
    for (double k : kinks) {
      if (std::fabs(x - k) < margin) x = k + (x < k ? -margin : margin);
    }
  }
  return Tensor(std::move(shape), std::move(v), true);
}

std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

// Contracts the output with fixed random weights so every output entry
// contributes an O(1) gradient.
GradCheckInstance probe(std::vector<Tensor> params, std::function<Tensor()> f, Rng& rng) {
  Tensor out = f();
  Tensor r(out.shape(), uniform_values(out.numel(), rng, -1.0, 1.0));
  return {[f, r] { return sum(mul(f(), r)); }, std::move(params)};
}

std::vector<Tensor> param_list(const ParamSet& ps) {
  std::vector<Tensor> out;
  for (const auto& e : ps.entries()) out.push_back(e.value);
  return out;
}

void add_pointwise(std::vector<GradCheckCase>& cases) {
  const std::pair<Pointwise, std::vector<double>> kinds[] = {
      {Pointwise::sigmoid, {}}, {Pointwise::tanh, {}},   {Pointwise::relu, {0.0}},
      {Pointwise::softplus, {}}, {Pointwise::exp, {}},   {Pointwise::log, {}},
      {Pointwise::square, {}},  {Pointwise::abs, {0.0}}, {Pointwise::identity, {}}};
  for (const auto& [kind, kinks] : kinds) {
    cases.push_back({"pointwise:" + std::string(to_string(kind)), [kind, kinks](Rng& rng) {
                       const double lo = kind == Pointwise::log ? 0.2 : -2.0;
                       Tensor x = leaf_away({dim(rng, 1, 4), dim(rng, 1, 6)}, rng, kinks, lo, 2.0);
                       return probe({x}, [=] { return pointwise(kind, x); }, rng);
                     }});
  }
}

}  // namespace

std::vector<GradCheckCase> standard_gradcheck_cases() {
  std::vector<GradCheckCase> c;
  add_pointwise(c);

  auto binary = [&](const char* name, Tensor (*op)(const Tensor&, const Tensor&)) {
    c.push_back({name, [op](Rng& rng) {
                   Shape s{dim(rng, 1, 4), dim(rng, 1, 5)};
                   Tensor a = leaf(s, rng), b = leaf(s, rng);
                   return probe({a, b}, [=] { return op(a, b); }, rng);
                 }});
  };
  binary("add", add);
  binary("sub", sub);
  binary("mul", mul);
  c.push_back({"scale", [](Rng& rng) {
                 Tensor x = leaf({dim(rng, 1, 8)}, rng);
                 const double k = rng.uniform(-3.0, 3.0);
                 return probe({x}, [=] { return scale(x, k); }, rng);
               }});
  c.push_back({"add_scalar", [](Rng& rng) {
                 Tensor x = leaf({dim(rng, 1, 8)}, rng);
                 const double k = rng.uniform(-3.0, 3.0);
                 return probe({x}, [=] { return add_scalar(x, k); }, rng);
               }});
  c.push_back({"broadcast_to", [](Rng& rng) {
                 const std::size_t n = dim(rng, 1, 4);
                 Tensor x = leaf({1, n}, rng);
                 Shape target{dim(rng, 1, 3), dim(rng, 1, 3), n};
                 return probe({x}, [=] { return broadcast_to(x, target); }, rng);
               }});
  c.push_back({"affine", [](Rng& rng) {
                 const std::size_t rows = dim(rng, 1, 5), in = dim(rng, 1, 6), out = dim(rng, 1, 4);
                 Tensor x = leaf({rows, in}, rng), wt = leaf({in, out}, rng), b = leaf({out}, rng);
                 return probe({x, wt, b}, [=] { return affine(x, wt, b); }, rng);
               }});
  for (Boundary bd : {Boundary::periodic, Boundary::replicate, Boundary::zero}) {
    c.push_back({"conv2d:" + std::string(to_string(bd)), [bd](Rng& rng) {
                   const std::size_t ci = dim(rng, 1, 3), co = dim(rng, 1, 3), k = rng.coin() ? 3 : 1;
                   Tensor x = leaf({ci, dim(rng, 3, 6), dim(rng, 3, 6)}, rng);
                   Tensor kern = leaf({co, ci, k, k}, rng), b = leaf({co}, rng);
                   return probe({x, kern, b}, [=] { return conv2d(x, kern, b, bd); }, rng);
                 }});
  }
  c.push_back({"clamp_through", [](Rng& rng) {
                 Tensor x = leaf_away({dim(rng, 2, 10)}, rng, {-1.0, 1.0}, -2.0, 2.0);
                 return probe({x}, [=] { return clamp_through(x, -1.0, 1.0); }, rng);
               }});
  c.push_back({"sum", [](Rng& rng) {
                 Tensor x = leaf({dim(rng, 1, 4), dim(rng, 1, 4)}, rng);
                 return probe({x}, [=] { return sum(x); }, rng);
               }});
  c.push_back({"mean", [](Rng& rng) {
                 Tensor x = leaf({dim(rng, 1, 4), dim(rng, 1, 4)}, rng);
                 return probe({x}, [=] { return mean(x); }, rng);
               }});
  c.push_back({"sum_last", [](Rng& rng) {
                 Tensor x = leaf({dim(rng, 1, 4), dim(rng, 1, 5)}, rng);
                 return probe({x}, [=] { return sum_last(x); }, rng);
               }});
  c.push_back({"reshape", [](Rng& rng) {
                 const std::size_t a = dim(rng, 1, 4), b = dim(rng, 1, 4);
                 Tensor x = leaf({a, b}, rng);
                 return probe({x}, [=] { return reshape(x, {b, a}); }, rng);
               }});
  c.push_back({"concat", [](Rng& rng) {
                 const std::size_t w = dim(rng, 1, 4);
                 Tensor a = leaf({dim(rng, 1, 3), w}, rng), b = leaf({dim(rng, 1, 3), w}, rng);
                 return probe({a, b}, [=] { return concat({a, b, a}); }, rng);
               }});
  c.push_back({"slice", [](Rng& rng) {
                 const std::size_t rows = dim(rng, 2, 6);
                 Tensor x = leaf({rows, dim(rng, 1, 3)}, rng);
                 const std::size_t b = rng.below(rows - 1), e = b + 1 + rng.below(rows - b - 1);
                 return probe({x}, [=] { return slice(x, b, e); }, rng);
               }});
  c.push_back({"laplacian5", [](Rng& rng) {
                 Tensor x = leaf({dim(rng, 1, 2), dim(rng, 2, 6), dim(rng, 2, 6)}, rng);
                 return probe({x}, [=] { return laplacian5(x); }, rng);
               }});
  c.push_back({"tv_l1", [](Rng& rng) {
                 // A scaled random permutation: any two entries differ by at least 0.03.
                 Shape s{dim(rng, 1, 3), dim(rng, 2, 6), dim(rng, 2, 6)};
                 std::vector<double> v(numel_of(s));
                 std::iota(v.begin(), v.end(), 0.0);
                 for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
                 for (auto& x : v) x = 0.05 * x + rng.uniform(-0.01, 0.01);
                 Tensor x(s, v, true);
                 return GradCheckInstance{[=] { return tv_l1(x); }, {x}};
               }});
  c.push_back({"mask_blend", [](Rng& rng) {
                 Shape s{dim(rng, 1, 3), dim(rng, 2, 5)};
                 std::vector<double> m(numel_of(s));
                 for (auto& x : m) x = rng.coin() ? 1.0 : 0.0;
                 Tensor x = leaf(s, rng), mask(s, m), obs(s, uniform_values(m.size(), rng, -1, 1));
                 return probe({x}, [=] { return mask_blend(x, mask, obs); }, rng);
               }});
  c.push_back({"bce_with_logits", [](Rng& rng) {
                 const std::size_t n = dim(rng, 1, 10);
                 Tensor x = leaf({n, 1}, rng, -4.0, 4.0);
                 std::vector<double> t(n), wt(n);
                 for (std::size_t i = 0; i < n; ++i) {
                   t[i] = rng.coin() ? 1.0 : 0.0;
                   wt[i] = rng.uniform(0.1, 3.0);
                 }
                 return GradCheckInstance{[=] { return bce_with_logits(x, t, wt); }, {x}};
               }});
  c.push_back({"linear_map", [](Rng& rng) {
                 const std::size_t in = dim(rng, 2, 8), out = dim(rng, 1, 6);
                 auto map = std::make_shared<SparseMap>();
                 map->out_shape = {out};
                 for (std::size_t r = 0; r < out; ++r) {
                   for (std::size_t k = 0, n = rng.below(4); k < n; ++k) map->push(rng.below(in), rng.uniform(-1, 1));
                   map->end_row();
                 }
                 Tensor x = leaf({in}, rng);
                 return probe({x}, [=] { return linear_map(x, *map); }, rng);
               }});
  c.push_back({"gather_neighborhoods", [](Rng& rng) {
                 const std::size_t ch = dim(rng, 1, 2), h = dim(rng, 2, 5), w = dim(rng, 2, 5);
                 const Boundary bd = rng.coin() ? Boundary::periodic : Boundary::replicate;
                 Tensor x = leaf({ch, h, w}, rng);
                 auto offs = kernels::box_offsets(1, true);
                 return probe({x}, [=] { return gather_neighborhoods(x, ch, h, w, offs, bd); }, rng);
               }});
  c.push_back({"read_patch", [](Rng& rng) {
                 const std::size_t h = dim(rng, 3, 6), w = dim(rng, 3, 6);
                 Tensor x = leaf({h, w}, rng);
                 Head head{{rng.uniform(0.0, h - 1.0), rng.uniform(0.0, w - 1.0)}, 1.0, Support::box};
                 return probe({x}, [=] { return read_patch(FieldGrid::grid(x, Boundary::periodic), head); }, rng);
               }});
  c.push_back({"scatter_write", [](Rng& rng) {
                 const std::size_t n = dim(rng, 4, 10), heads = dim(rng, 1, 4);
                 Tensor x = leaf({n}, rng), vals = leaf({heads}, rng);
                 std::vector<Head> hs;
                 for (std::size_t i = 0; i < heads; ++i) hs.push_back({{rng.uniform(0.0, n - 1.0)}, 1.0, Support::box});
                 return probe({x, vals},
                              [=] { return scatter_write(FieldGrid{x, Boundary::periodic}, hs, vals).data; },
                              rng);
               }});
  c.push_back({"attention_update", [](Rng& rng) {
                 const std::size_t h = dim(rng, 2, 5), w = dim(rng, 2, 5);
                 Tensor x = leaf({h, w}, rng), a = leaf({h * w, 9}, rng, -0.5, 0.5);
                 return probe({x, a},
                              [=] {
                                return attention_update(FieldGrid::grid(x, Boundary::replicate), a,
                                                        Pointwise::tanh, 1.0)
                                    .data;
                              },
                              rng);
               }});
  c.push_back({"hetero_nll", [](Rng& rng) {
                 const std::size_t cells = dim(rng, 2, 8), sites = 2 * cells;
                 const bool per_cell = rng.coin();
                 Tensor a = leaf({per_cell ? cells : 1}, rng, 0.05, 0.2), s = leaf({per_cell ? cells : 1}, rng, -2, 0);
                 auto delta = uniform_values(sites, rng, -0.3, 0.3), lap = uniform_values(sites, rng, -1.0, 1.0);
                 for (auto& l : lap) l += l < 0 ? -0.05 : 0.05;
                 HeteroOptions opt{rng.uniform(0.5, 1.5), rng.coin() ? 0.0 : 0.5};
                 return GradCheckInstance{[=] { return hetero_nll(a, s, delta, lap, cells, opt); }, {a, s}};
               }});

  c.push_back({"rollout:field-2step", [](Rng& rng) {
                 const std::size_t h = dim(rng, 3, 5), w = dim(rng, 3, 5);
                 Tensor a = leaf({h * w, 9}, rng, -0.3, 0.3);
                 Tensor f0({h, w}, uniform_values(h * w, rng, 0, 1));
                 Tensor target({h, w}, uniform_values(h * w, rng, 0, 1));
                 auto loss = [=] {
                   MachineSpec m;
                   m.mode = UpdateMode::attention_kernel;
                   m.g = Pointwise::tanh;
                   m.controller = [a](const Tensor&, std::size_t) { return ControllerOutput{a, {}}; };
                   auto tr = rollout(m, FieldGrid::grid(f0, Boundary::replicate), 2);
                   return sum(square(sub(tr.fields.back().data, target)));
                 };
                 return GradCheckInstance{loss, {a}};
               }});
  c.push_back({"rollout:heat-2step", [](Rng& rng) {
                 PdeTrainConfig cfg;
                 cfg.model = AlphaModelKind::spatial;
                 cfg.hidden = {6};
                 cfg.fourier_frequencies = 2;
                 cfg.seed = rng.next();
                 auto model = std::make_shared<HeatModel>(HeatModel::build(cfg, 8, 8));
                 auto d = gen_heat_dataset(std::vector<double>{rng.uniform(0.05, 0.2)}, 1, 8, 8, 2, rng.next());
                 Tensor u0({1, 8, 8}, d.sequences[0][0]), u2({1, 8, 8}, d.sequences[0][2]);
                 auto loss = [=] { return sum(square(sub(model->step(model->step(u0)), u2))); };
                 return GradCheckInstance{loss, param_list(model->params)};
               }});
  c.push_back({"rollout:inpaint-2step", [](Rng& rng) {
                 InpaintConfig cfg;
                 cfg.hidden = 4;
                 cfg.conv_layers = 2;
                 // relu is checked on its own; here kinks would be crossed by the probes.
                 cfg.activation = Pointwise::tanh;
                 cfg.lambda_contract = 0.05;
                 Rng init(rng.next());
                 auto ctl = std::make_shared<InpaintController>(InpaintController::build(cfg, init));
                 // Values well inside (-1, 1) so the clamp stays inactive.
                 auto gt = make_blob_images(1, 6, 6, rng.next())[0];
                 auto g = gt.values();
                 std::vector<double> small(g.begin(), g.end());
                 for (auto& v : small) v *= 0.3;
                 Tensor gts({3, 6, 6}, small);
                 Mask m = make_mask(MaskSpec{0.3, 0.5, MaskKind::dropout, rng.next()}, 6, 6);
                 Tensor start = corrupt(gts, m.known, rng);
                 std::vector<double> s(start.values().begin(), start.values().end());
                 for (auto& v : s) v *= 0.3;
                 InpaintSample sample{gts, m.known, Tensor({3, 6, 6}, s)};
                 auto loss = [=] { return sample_loss(*ctl, sample, 2, 0.5, cfg, false); };
                 return GradCheckInstance{loss, param_list(ctl->params)};
               }});
  return c;
}

std::vector<GradCheckSummary> run_gradcheck_suite(std::size_t trials, double eps, std::uint64_t seed,
                                                  const std::string& filter) {
  std::vector<GradCheckSummary> out;
  Rng master(seed);
  for (const auto& cs : standard_gradcheck_cases()) {
    const std::uint64_t case_seed = master.next();
    if (!filter.empty() && cs.name.find(filter) == std::string::npos) continue;
    GradCheckSummary sum{cs.name, 0, 0.0, {}};
    Rng rng(case_seed);
    for (std::size_t t = 0; t < trials; ++t) {
      auto inst = cs.make(rng);
      auto rep = finite_diff_check(inst.loss, inst.params, eps);
      if (t == 0 || rep.max_rel_error > sum.max_rel_error) {
        sum.max_rel_error = rep.max_rel_error;
        sum.worst = rep;
      }
      ++sum.trials;
    }
    out.push_back(std::move(sum));
  }
  return out;
}

}  // namespace nftm
