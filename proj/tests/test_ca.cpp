#include "doctest.h"

#include <vector>

#include "nftm/ca.hpp"

using namespace nftm;

namespace {

// Rule table written out by hand, independent of the bit arithmetic.
Bits rule110_by_hand() {
  // index = 4 L + 2 C + R : 000 001 010 011 100 101 110 111
  return {0, 1, 1, 1, 0, 1, 1, 0};
}

const CaTrainReport& trained_rule110() {
  static const CaTrainReport rep = train_ca_controller(rule_truth_table(110), CaTrainConfig::elementary_defaults());
  return rep;
}

}  // namespace

TEST_CASE("rule tables follow the binary expansion of the rule number") {
  CHECK(rule_truth_table(110).table == rule110_by_hand());
  CHECK(rule_truth_table(0).table == Bits(8, 0));
  CHECK(rule_truth_table(255).table == Bits(8, 1));
  CHECK_THROWS_AS(rule_truth_table(256), std::invalid_argument);
  CHECK_THROWS_AS(rule_truth_table(-1), std::invalid_argument);
}

TEST_CASE("elementary exact step") {
  const auto r = rule_truth_table(110);
  CHECK(ca1d_step_exact(Bits{0, 0, 0, 1, 0, 0, 0}, r) == Bits{0, 0, 1, 1, 0, 0, 0});
  CHECK(ca1d_step_exact(Bits(9, 0), r) == Bits(9, 0));
  CHECK(ca1d_step_exact(Bits{1, 1, 1}, r) == Bits{0, 0, 0});
  CHECK_THROWS_AS(ca1d_step_exact(Bits{0, 2, 0}, r), std::invalid_argument);
}

TEST_CASE("life exact step on canonical patterns") {
  Bits blinker(25, 0);
  blinker[1 * 5 + 2] = blinker[2 * 5 + 2] = blinker[3 * 5 + 2] = 1;
  Bits horizontal(25, 0);
  horizontal[2 * 5 + 1] = horizontal[2 * 5 + 2] = horizontal[2 * 5 + 3] = 1;
  CHECK(gol_step_exact(blinker, 5, 5) == horizontal);
  CHECK(gol_step_exact(horizontal, 5, 5) == blinker);

  Bits block(16, 0);
  block[5] = block[6] = block[9] = block[10] = 1;
  CHECK(gol_step_exact(block, 4, 4) == block);
  CHECK(gol_step_exact(Bits(36, 0), 6, 6) == Bits(36, 0));
  CHECK_THROWS_AS(gol_step_exact(Bits{0, 3, 0, 0}, 2, 2), std::invalid_argument);
}

TEST_CASE("life rule table agrees with the direct neighbour count") {
  const auto table = life_rule();
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Bits g = random_bits(8 * 9, 0.4, rng);
    Bits via_table(g.size());
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 0; x < 9; ++x) {
        std::size_t k = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) k = (k << 1) | g[((y + 8 + dy) % 8) * 9 + (x + 9 + dx) % 9];
        }
        via_table[y * 9 + x] = table.table[k];
      }
    }
    CHECK(via_table == gol_step_exact(g, 8, 9));
  }
}

TEST_CASE("trained rule 110 controller recovers the table and rolls out exactly") {
  const auto& rep = trained_rule110();
  CHECK(rep.distinct_neighbourhoods == 8);
  CHECK(rep.converged());
  CHECK(extract_learned_table(rep.controller) == rule_truth_table(110));

  Rng rng(7);
  const auto rule = rule_truth_table(110);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t width = 20 + rng.below(40);
    Bits row = random_bits(width, 0.5, rng);
    auto exact = ca1d_rollout_exact(row, rule, 200);
    auto tr = nftm_ca_rollout(rep.controller, FieldGrid::line({row.begin(), row.end()}, Boundary::periodic), 200);
    REQUIRE(tr.fields.size() == 201);
    bool same = true;
    for (std::size_t t = 0; t <= 200; ++t) same = same && tensor_to_bits(tr.fields[t].data) == exact[t];
    CHECK(same);
  }
}

TEST_CASE("rule 0 trains to the constant-zero controller") {
  auto rep = train_ca_controller(rule_truth_table(0), CaTrainConfig::elementary_defaults());
  CHECK(rep.converged());
  CHECK(extract_learned_table(rep.controller).table == Bits(8, 0));
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto cfg = CaTrainConfig::elementary_defaults();
  cfg.epochs = 40;
  auto a = train_ca_controller(rule_truth_table(30), cfg);
  auto b = train_ca_controller(rule_truth_table(30), cfg);
  CHECK(a.final_loss == b.final_loss);
  CHECK(extract_learned_table(a.controller) == extract_learned_table(b.controller));
}

TEST_CASE("too little training data is reported rather than ignored") {
  auto cfg = CaTrainConfig::elementary_defaults();
  cfg.initial_states = 1;
  cfg.steps = 1;
  cfg.width = 3;
  CHECK_THROWS_AS(train_ca_controller(rule_truth_table(110), cfg), std::runtime_error);
  cfg = CaTrainConfig::elementary_defaults();
  cfg.epochs = 0;
  CHECK_THROWS_AS(train_ca_controller(rule_truth_table(110), cfg), std::invalid_argument);
}

TEST_CASE("an untrained controller still produces binary snapshots") {
  auto cfg = CaTrainConfig::elementary_defaults();
  cfg.epochs = 1;
  auto rep = train_ca_controller(rule_truth_table(90), cfg);
  Rng rng(3);
  Bits row = random_bits(31, 0.5, rng);
  auto tr = nftm_ca_rollout(rep.controller, FieldGrid::line({row.begin(), row.end()}, Boundary::periodic), 25);
  for (const auto& f : tr.fields) CHECK_NOTHROW(tensor_to_bits(f.data));
  CHECK_THROWS_AS(nftm_ca_rollout(rep.controller, FieldGrid::line({0.0, 0.5, 1.0}, Boundary::periodic), 1),
                  std::invalid_argument);
}

TEST_CASE("trace image stacks one row per step") {
  std::vector<Bits> rows{{0, 1, 0}, {1, 1, 0}};
  auto img = trace_image(rows);
  CHECK(img.shape() == Shape{2, 3});
  CHECK(img.at(3) == 1.0);
}

TEST_CASE("trained Life controller matches the exact step on held-out states") {
  auto rep = train_ca_controller(life_rule(), CaTrainConfig::life_defaults());
  CHECK(rep.distinct_neighbourhoods == 512);
  CHECK(rep.converged());
  Rng rng(99);
  int matches = 0;
  for (int i = 0; i < 100; ++i) {
    Bits g = random_bits(256, 0.5, rng);
    auto tr = nftm_ca_rollout(rep.controller, FieldGrid::grid(bits_to_tensor(g, {16, 16}), Boundary::periodic), 1);
    matches += tensor_to_bits(tr.fields[1].data) == gol_step_exact(g, 16, 16);
  }
  CHECK(matches == 100);
}
