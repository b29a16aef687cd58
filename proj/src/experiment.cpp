#include "nftm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "nftm/io.hpp"
#include "nftm/kernels.hpp"
#include "nftm/ops.hpp"

namespace nftm {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path prepare(const ExperimentConfig& cfg) {
  fs::path dir(cfg.out_dir);
  ensure_directory(dir);
  std::ofstream(dir / "config.json") << resolved_config_json(cfg);
  return dir;
}

Tensor bits_image(const std::vector<Bits>& rows) { return trace_image(rows); }

// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void write_csv(const fs::path& path, std::span<const double> v, std::size_t h, std::size_t w) {
  std::ofstream out(path);
  out.precision(17);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) out << (j ? "," : "") << v[i * w + j];
    out << '\n';
  }
}

}  // namespace

CaResult run_ca(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const auto& e = cfg.ca;
  const fs::path dir = prepare(cfg);
  MetricsWriter metrics(dir / "metrics.jsonl");
  CaResult res;
  CaTrainConfig tc = e.train;
  tc.seed = cfg.seed;
  const CaRule rule = e.kind == CaKind::life ? life_rule() : rule_truth_table(e.rule);
  const auto rep = train_ca_controller(rule, tc);
  const CaRule learned = extract_learned_table(rep.controller);
  res.table_match = learned == rule;
  for (std::size_t i = 0; i < rule.table.size(); ++i) res.table_mismatches += learned.table[i] != rule.table[i];
  metrics.write({{"final_loss", rep.final_loss},
                 {"pairs", static_cast<std::int64_t>(rep.pairs)},
                 {"table_mismatches", static_cast<std::int64_t>(res.table_mismatches)}});

  Rng rng(cfg.seed + 1);
  if (e.kind == CaKind::elementary) {
    const std::string stem = "rule" + std::to_string(e.rule);
    for (std::size_t horizon : e.horizons) {
      Bits row = random_bits(e.eval_width, 0.5, rng);
      auto exact = ca1d_rollout_exact(row, rule, horizon);
      auto tr = nftm_ca_rollout(rep.controller, FieldGrid::line({row.begin(), row.end()}, Boundary::periodic), horizon);
      std::vector<Bits> learned_rows;
      std::int64_t first_mismatch = -1;
      for (std::size_t t = 0; t <= horizon; ++t) {
        learned_rows.push_back(tensor_to_bits(tr.fields[t].data));
        if (first_mismatch < 0 && learned_rows.back() != exact[t]) first_mismatch = static_cast<std::int64_t>(t);
      }
      const bool match = first_mismatch < 0;
      res.horizons.push_back(horizon);
      res.rollout_match.push_back(match);
      const std::string tag = stem + "_T" + std::to_string(horizon);
      write_pgm(dir / (tag + "_nftm.pgm"), bits_image(learned_rows), ValueRange{0, 1});
      write_pgm(dir / (tag + "_exact.pgm"), bits_image(exact), ValueRange{0, 1});
      metrics.write({{"horizon", static_cast<std::int64_t>(horizon)},
                     {"width", static_cast<std::int64_t>(e.eval_width)},
                     {"match", static_cast<std::int64_t>(match)},
                     {"first_mismatch_step", first_mismatch}});
    }
  } else {
    const std::size_t n = e.life_size;
    for (std::size_t i = 0; i < e.life_trials; ++i) {
      Bits g = random_bits(n * n, 0.5, rng);
      auto tr = nftm_ca_rollout(rep.controller, FieldGrid::grid(bits_to_tensor(g, {n, n}), Boundary::periodic), 1);
      const Bits next = tensor_to_bits(tr.fields[1].data);
      const Bits exact = gol_step_exact(g, n, n);
      res.life_matches += next == exact;
      if (i == 0) {
        write_pgm(dir / "life_state.pgm", bits_to_tensor(g, {n, n}), ValueRange{0, 1});
        write_pgm(dir / "life_nftm_step.pgm", bits_to_tensor(next, {n, n}), ValueRange{0, 1});
        write_pgm(dir / "life_exact_step.pgm", bits_to_tensor(exact, {n, n}), ValueRange{0, 1});
      }
    }
    res.life_trials = e.life_trials;
    metrics.write({{"life_trials", static_cast<std::int64_t>(res.life_trials)},
                   {"life_matches", static_cast<std::int64_t>(res.life_matches)}});
  }
  res.seconds = seconds_since(t0);
  return res;
}

HeatResult run_heat(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const auto& e = cfg.heat;
  const bool global = cfg.task == Task::heat_global;
  const fs::path dir = prepare(cfg);
  const std::size_t h = e.height, w = e.width;
  const std::vector<double> truth = global ? std::vector<double>{e.alpha} : make_variable_alpha(h, w);
  const auto data = gen_heat_dataset(truth, e.sequences, h, w, e.frames, cfg.seed + 1, e.data);
  PdeTrainConfig tc = e.train;
  tc.model = global ? AlphaModelKind::global : AlphaModelKind::spatial;
  tc.seed = cfg.seed;
  HeatModel model = HeatModel::build(tc, h, w);
  const auto pa = train_phase_a(data, model, tc);
  PhaseReport pb;
  if (tc.epochs_b > 0) pb = train_phase_b(data, model, tc);
  {
    MetricsWriter train(dir / "train.jsonl");
    for (std::size_t i = 0; i < pa.losses.size(); ++i) {
      train.write({{"phase", std::string("a")}, {"epoch", static_cast<std::int64_t>(i)}, {"loss", pa.losses[i]}});
    }
    for (std::size_t i = 0; i < pb.losses.size(); ++i) {
      train.write({{"phase", std::string("b")}, {"epoch", static_cast<std::int64_t>(i)}, {"loss", pb.losses[i]}});
    }
  }

  HeatResult res;
  res.alpha_hat = model.alpha_map();
  const AlphaError err = eval_alpha(res.alpha_hat, truth);
  res.alpha_mae = err.mae;
  res.alpha_abs_error = global ? std::fabs(res.alpha_hat[0] - e.alpha) : err.max_abs;

  HeatDataOptions clean = e.data;
  clean.noise_std = 0.0;
  const auto test = gen_heat_dataset(truth, e.eval_sequences, h, w, e.eval_steps, cfg.seed + 2, clean);
  res.rollout_psnr.assign(e.eval_steps, 0.0);
  for (const auto& seq : test.sequences) {
    auto p = rollout_psnr(model, seq, e.eval_steps);
    for (std::size_t t = 0; t < p.size(); ++t) res.rollout_psnr[t] += p[t] / static_cast<double>(test.sequences.size());
  }
  res.mean_psnr = std::accumulate(res.rollout_psnr.begin(), res.rollout_psnr.end(), 0.0) /
                  static_cast<double>(res.rollout_psnr.size());

  MetricsWriter metrics(dir / "metrics.jsonl");
  for (std::size_t t = 0; t < res.rollout_psnr.size(); ++t) {
    metrics.write({{"step", static_cast<std::int64_t>(t + 1)}, {"psnr", res.rollout_psnr[t]}, {"mae", res.alpha_mae}});
  }
  if (global) {
    metrics.write({{"alpha_true", e.alpha}, {"alpha_hat", res.alpha_hat[0]}, {"abs_error", res.alpha_abs_error}});
  } else {
    const ValueRange range{0.0, 0.2};
    std::vector<double> error(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) error[i] = std::fabs(res.alpha_hat[i] - truth[i]);
    write_pgm(dir / "alpha_true.pgm", Tensor({h, w}, truth), range);
    write_pgm(dir / "alpha_learned.pgm", Tensor({h, w}, res.alpha_hat), range);
    write_pgm(dir / "alpha_error.pgm", Tensor({h, w}, error));
    write_csv(dir / "alpha_true.csv", truth, h, w);
    write_csv(dir / "alpha_learned.csv", res.alpha_hat, h, w);
    write_csv(dir / "alpha_error.csv", error, h, w);
  }
  res.seconds = seconds_since(t0);
  return res;
}

InpaintResult run_inpaint(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const auto& e = cfg.inpaint;
  const fs::path dir = prepare(cfg);
  std::vector<Tensor> train_imgs, test_imgs;
  if (!e.cifar.empty()) {
    auto recs = load_cifar10(e.cifar, e.train_images + e.test_images);
    if (recs.size() < e.train_images + e.test_images) {
      throw std::runtime_error(e.cifar + " holds " + std::to_string(recs.size()) + " records, need " +
                               std::to_string(e.train_images + e.test_images));
    }
    for (std::size_t i = 0; i < recs.size(); ++i) (i < e.train_images ? train_imgs : test_imgs).push_back(recs[i].image);
  } else {
    train_imgs = make_blob_images(e.train_images, e.height, e.width, cfg.seed + 1);
    test_imgs = make_blob_images(e.test_images, e.height, e.width, cfg.seed + 2);
  }
  const auto train_set = make_inpaint_set(train_imgs, e.mask, cfg.seed + 3);
  const auto test_set = make_inpaint_set(test_imgs, e.mask, cfg.seed + 4);

  InpaintConfig tc = e.train;
  tc.seed = cfg.seed;
  Rng init(cfg.seed + 5);
  auto ctl = InpaintController::build(tc, init);
  InpaintResult res;
  {
    MetricsWriter train(dir / "train.jsonl");
    res.train = train_inpaint(ctl, train_set, tc, [&](std::size_t epoch, double loss, std::size_t k) {
      train.write({{"epoch", static_cast<std::int64_t>(epoch)}, {"loss", loss}, {"k", static_cast<std::int64_t>(k)}});
    });
  }
  const double beta = e.eval_beta < 0 ? tc.beta_final : e.eval_beta;
  res.guarded = eval_rollout(ctl, test_set, tc.k_eval, true, beta, tc);
  res.unguarded = eval_rollout(ctl, test_set, tc.k_eval, false, beta, tc);
  for (const auto& en : res.guarded.energies) {
    for (std::size_t t = 1; t < en.size(); ++t) res.energy_violations += en[t] > en[t - 1];
  }
  MetricsWriter metrics(dir / "metrics.jsonl");
  for (std::size_t t = 0; t <= tc.k_eval; ++t) {
    metrics.write({{"step", static_cast<std::int64_t>(t)},
                   {"psnr", res.unguarded.mean_psnr[t]},
                   {"psnr_guarded", res.guarded.mean_psnr[t]}});
  }

  // Filmstrip: gt | corrupted | unguarded steps 1, 5, 10, 20, 30 (those <= K).
  std::vector<std::size_t> shown;
  for (std::size_t s : {1, 5, 10, 20, 30}) {
    if (s <= tc.k_eval) shown.push_back(s);
  }
  for (std::size_t i = 0; i < std::min(e.filmstrips, test_set.size()); ++i) {
    const auto& sample = test_set[i];
    std::vector<Tensor> frames{sample.gt, sample.init};
    ImageState s = ImageState::start(sample, beta);
    for (std::size_t t = 1; t <= shown.back(); ++t) {
      s = inpaint_step(ctl, s, tc, false);
      s.image = s.image.detach();
      if (std::find(shown.begin(), shown.end(), t) != shown.end()) frames.push_back(s.image);
    }
    const std::size_t h = sample.gt.dim(1), w = sample.gt.dim(2), n = frames.size();
    std::vector<double> strip(3 * h * w * n);
    for (std::size_t f = 0; f < n; ++f) {
      auto v = frames[f].values();
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) strip[(c * h + y) * w * n + f * w + x] = v[(c * h + y) * w + x];
        }
      }
    }
    write_ppm(dir / ("filmstrip_" + std::to_string(i) + ".ppm"), Tensor({3, h, w * n}, strip), ValueRange{-1, 1});
  }
  res.seconds = seconds_since(t0);
  return res;
}

double time_machine_step(std::size_t side, std::size_t steps, std::size_t repeats, std::size_t hidden,
                         std::uint64_t seed) {
  Rng rng(seed);
  // Constant weights: the benchmark measures the forward machine only.
  Tensor w1 = glorot({9, hidden}, 9, hidden, rng), b1 = Tensor::zeros({hidden});
  Tensor w2 = glorot({hidden, 9}, hidden, 9, rng), b2 = Tensor::zeros({9});
  const auto base = diffusion_kernel_weights(std::vector<double>{0.1}, side * side);
  Tensor prior({side * side, 9}, base);
  MachineSpec m;
  m.mode = UpdateMode::attention_kernel;
  m.controller = [&](const Tensor& patches, std::size_t) {
    Tensor hdn = tanh(affine(patches, w1, b1));
    return ControllerOutput{add(prior, scale(tanh(affine(hdn, w2, b2)), 0.01)), {}};
  };
  std::vector<double> u0(side * side);
  for (auto& v : u0) v = rng.uniform();
  const FieldGrid f0 = FieldGrid::grid(Tensor({side, side}, u0), Boundary::replicate);
  rollout(m, f0, 1);  // warm-up
  std::vector<double> per_step;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    rollout(m, f0, steps);
    per_step.push_back(seconds_since(t0) / static_cast<double>(steps));
  }
  std::sort(per_step.begin(), per_step.end());
  return per_step[per_step.size() / 2];
}

BenchResult run_bench(const ExperimentConfig& cfg) {
  const auto& e = cfg.bench;
  const fs::path dir = prepare(cfg);
  MetricsWriter metrics(dir / "metrics.jsonl");
  BenchResult res;
  for (std::size_t side : e.sides) {
    const double t = time_machine_step(side, e.steps, e.repeats, e.controller_hidden, cfg.seed);
    res.cells.push_back(side * side);
    res.seconds_per_step.push_back(t);
    metrics.write({{"side", static_cast<std::int64_t>(side)},
                   {"cells", static_cast<std::int64_t>(side * side)},
                   {"seconds_per_step", t},
                   {"threads", static_cast<std::int64_t>(thread_count())}});
  }
  if (res.cells.size() > 1) {
    std::vector<double> x(res.cells.begin(), res.cells.end());
    res.slope = log_log_slope(x, res.seconds_per_step);
    res.fitted = true;
  }
  const std::size_t s0 = e.sides.front();
  const double t1 = time_machine_step(s0, e.steps, e.repeats, e.controller_hidden, cfg.seed) * e.steps;
  const double t2 = time_machine_step(s0, 2 * e.steps, e.repeats, e.controller_hidden, cfg.seed) * 2 * e.steps;
  res.doubling_ratio = t2 / t1;
  MetricRecord fit{{"doubling_ratio", res.doubling_ratio}};
  if (res.fitted) fit["slope"] = res.slope;
  metrics.write(fit);
  return res;
}

GradcheckResult run_gradcheck(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const auto& e = cfg.gradcheck;
  const fs::path dir = prepare(cfg);
  GradcheckResult res;
  res.cases = run_gradcheck_suite(e.trials, e.eps, cfg.seed, e.filter);
  if (res.cases.empty()) throw std::runtime_error("no gradient-check case matches '" + e.filter + "'");
  MetricsWriter metrics(dir / "metrics.jsonl");
  for (const auto& c : res.cases) {
    res.max_rel_error = std::max(res.max_rel_error, c.max_rel_error);
    metrics.write({{"case", c.name},
                   {"trials", static_cast<std::int64_t>(c.trials)},
                   {"max_rel_error", c.max_rel_error},
                   {"worst_param", c.worst.worst_param},
                   {"worst_index", static_cast<std::int64_t>(c.worst.worst_index)}});
  }
  res.seconds = seconds_since(t0);
  return res;
}

bool run_task(const ExperimentConfig& cfg) {
  nlohmann::json s = nlohmann::json::object();
  s["task"] = std::string(to_string(cfg.task));
  bool ok = false;
  switch (cfg.task) {
    case Task::ca: {
      auto r = run_ca(cfg);
      ok = r.table_match;
      for (bool m : r.rollout_match) ok = ok && m;
      if (cfg.ca.kind == CaKind::life) ok = ok && r.life_matches == r.life_trials;
      s["table_match"] = r.table_match;
      s["horizons"] = r.horizons;
      s["rollout_match"] = r.rollout_match;
      s["life_matches"] = r.life_matches;
      s["seconds"] = r.seconds;
      break;
    }
    case Task::heat_global:
    case Task::heat_var: {
      auto r = run_heat(cfg);
      if (cfg.task == Task::heat_global) {
        const double tol = cfg.heat.alpha < 0.075 ? 0.03 : 0.01;
        ok = r.alpha_abs_error <= tol;
        s["alpha_hat"] = r.alpha_hat[0];
        s["abs_error"] = r.alpha_abs_error;
      } else {
        ok = r.alpha_mae < 0.02 && r.mean_psnr >= 35.0 && r.rollout_psnr.back() >= 30.0;
        s["alpha_mae"] = r.alpha_mae;
        s["psnr_last"] = r.rollout_psnr.back();
      }
      s["mean_psnr"] = r.mean_psnr;
      s["seconds"] = r.seconds;
      break;
    }
    case Task::inpaint: {
      auto r = run_inpaint(cfg);
      const auto& p = r.unguarded.mean_psnr;
      const std::size_t k = p.size() - 1;
      bool monotone = true;
      for (std::size_t t = 2; t <= k; ++t) monotone = monotone && p[t] >= p[t - 1] - 0.1;
      const double gain = p[k] - p[1];
      const bool tail = k < 20 || p[k] >= p[20] - 0.1;
      ok = r.energy_violations == 0 && gain >= 5.0 && monotone && tail;
      s["energy_violations"] = r.energy_violations;
      s["psnr_step1"] = p[1];
      s["psnr_last"] = p[k];
      s["gain_db"] = gain;
      s["monotone"] = monotone;
      s["seconds"] = r.seconds;
      break;
    }
    case Task::bench: {
      auto r = run_bench(cfg);
      s["cells"] = r.cells;
      s["seconds_per_step"] = r.seconds_per_step;
      if (r.fitted) s["slope"] = r.slope;
      s["doubling_ratio"] = r.doubling_ratio;
      ok = !r.fitted || (r.slope > 0.5 && r.slope < 1.5);
      break;
    }
    case Task::gradcheck: {
      auto r = run_gradcheck(cfg);
      ok = r.max_rel_error <= cfg.gradcheck.tolerance;
      s["cases"] = r.cases.size();
      s["max_rel_error"] = r.max_rel_error;
      s["seconds"] = r.seconds;
      break;
    }
  }
  s["passed"] = ok;
  std::ofstream(fs::path(cfg.out_dir) / "summary.json") << s.dump(2) << "\n";
  return ok;
}

}  // namespace nftm
