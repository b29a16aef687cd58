#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "nftm/gradcheck.hpp"
#include "nftm/nn.hpp"
#include "nftm/ops.hpp"
#include "nftm/optim.hpp"
#include "nftm/random.hpp"

using namespace nftm;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), true);
}

// sum(w ⊙ y) for fixed random w, so every output entry carries a distinct weight.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(y.numel());
  for (auto& x : w) x = rng.uniform(0.5, 1.5);
  return sum(mul(y, Tensor(y.shape(), std::move(w))));
}

}  // namespace

TEST_CASE("tensor construction validates shape") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0}, {}), std::invalid_argument);
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  CHECK(t.numel() == 6);
  CHECK(t.grad().size() == 6);
}

TEST_CASE("pointwise sigmoid and relu at the stated points") {
  Tensor x = Tensor::scalar(0.0, true);
  Tensor y = sigmoid(x);
  CHECK(y.item() == doctest::Approx(0.5));
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(0.25));

  Tensor r = Tensor::scalar(-3.0, true);
  Tensor ry = relu(r);
  CHECK(ry.item() == 0.0);
  ry.backward();
  CHECK(r.grad()[0] == 0.0);
}

TEST_CASE("softplus at 10 and its gradient against central differences") {
  Tensor x = Tensor::scalar(10.0, true);
  CHECK(softplus(x).item() == doctest::Approx(10.0000453989).epsilon(1e-10));
  auto rep = finite_diff_check([&] { return sum(softplus(x)); }, {x});
  CHECK(rep.max_rel_error <= 1e-6);
}

TEST_CASE("log of non-positive entries names the index") {
  Tensor x({3}, {1.0, 0.5, -1.0});
  try {
    log(x);
    FAIL("expected a domain error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }
}

TEST_CASE("non-finite results raise instead of propagating") {
  Tensor x = Tensor::scalar(1000.0);
  CHECK_THROWS_AS(exp(x), std::domain_error);
}

TEST_CASE("affine examples") {
  Tensor x({1, 2}, {1, 2});
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor zero({2}, {0, 0});
  auto y = affine(x, eye, zero);
  CHECK(y.values()[0] == 1.0);
  CHECK(y.values()[1] == 2.0);

  auto z = affine(Tensor({1, 2}, {1, 1}), Tensor({2, 1}, {1, 1}), Tensor({1}, {1}));
  CHECK(z.item() == 3.0);

  try {
    affine(Tensor({1, 3}, {1, 2, 3}), eye, zero);
    FAIL("expected shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[1x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("affine gradient w.r.t. W matches finite differences") {
  Rng rng(7);
  auto x = random_tensor({4, 3}, rng);
  auto W = random_tensor({3, 2}, rng);
  auto b = random_tensor({2}, rng);
  auto rep = finite_diff_check([&] { return sum(affine(x, W, b)); }, {W});
  CHECK(rep.max_rel_error <= 1e-6);
}

TEST_CASE("conv2d with a centred delta kernel is the identity for every padding") {
  Rng rng(3);
  auto x = random_tensor({2, 5, 6}, rng);
  std::vector<double> k(2 * 2 * 9, 0.0);
  for (std::size_t c = 0; c < 2; ++c) k[(c * 2 + c) * 9 + 4] = 1.0;
  Tensor kernels({2, 2, 3, 3}, k);
  Tensor bias({2}, {0, 0});
  for (auto pad : {Boundary::replicate, Boundary::periodic, Boundary::zero}) {
    auto y = conv2d(x, kernels, bias, pad);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.values()[i] == x.values()[i]);
  }
}

TEST_CASE("conv2d all-ones kernel on all-ones input with replicate padding") {
  auto y = conv2d(Tensor::full({1, 5, 5}, 1.0), Tensor::full({1, 1, 3, 3}, 1.0), Tensor({1}, {0.0}),
                  Boundary::replicate);
  for (double v : y.values()) CHECK(v == doctest::Approx(9.0));
}

TEST_CASE("conv2d rejects even kernels and channel mismatch") {
  CHECK_THROWS_AS(conv2d(Tensor::full({1, 4, 4}, 1.0), Tensor::full({1, 1, 2, 2}, 1.0), Tensor({1}, {0.0}),
                         Boundary::zero),
                  std::invalid_argument);
  CHECK_THROWS_AS(conv2d(Tensor::full({2, 4, 4}, 1.0), Tensor::full({1, 1, 3, 3}, 1.0), Tensor({1}, {0.0}),
                         Boundary::zero),
                  std::invalid_argument);
}

TEST_CASE("conv2d gradients match central differences") {
  Rng rng(11);
  auto x = random_tensor({2, 4, 4}, rng);
  auto k = random_tensor({3, 2, 3, 3}, rng);
  auto b = random_tensor({3}, rng);
  for (auto pad : {Boundary::replicate, Boundary::periodic, Boundary::zero}) {
    auto rep = finite_diff_check([&] { return weighted_sum(conv2d(x, k, b, pad), 5); }, {x, k, b});
    CHECK(rep.max_rel_error <= 1e-5);
  }
}

TEST_CASE("ste_binarize forward rounding and identity backward") {
  Tensor x({3}, {0.7, 0.49, 0.5}, true);
  auto y = ste_binarize(x);
  CHECK(y.values()[0] == 1.0);
  CHECK(y.values()[1] == 0.0);
  CHECK(y.values()[2] == 1.0);
  sum(y).backward();
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("ste_binarize output is binary and its backward is exactly the upstream gradient") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor({16}, rng, -3.0, 3.0);
    auto y = ste_binarize(x);
    for (double v : y.values()) CHECK((v == 0.0 || v == 1.0));
    Tensor up({16}, std::vector<double>(x.values().begin(), x.values().end()));
    sum(mul(y, up)).backward();
    for (std::size_t i = 0; i < 16; ++i) CHECK(x.grad()[i] == up.values()[i]);
  }
}

TEST_CASE("clamp_through forward and hard-indicator backward") {
  Tensor x = Tensor::scalar(1.4, true);
  auto y = clamp_through(x, -1, 1);
  CHECK(y.item() == 1.0);
  y.backward();
  CHECK(x.grad()[0] == 0.0);

  Tensor x2 = Tensor::scalar(0.3, true);
  auto y2 = clamp_through(x2, -1, 1);
  CHECK(y2.item() == doctest::Approx(0.3));
  y2.backward();
  CHECK(x2.grad()[0] == 1.0);

  auto v = clamp_through(Tensor({3}, {-2, 0, 2}), -1, 1);
  CHECK(v.values()[0] == -1.0);
  CHECK(v.values()[1] == 0.0);
  CHECK(v.values()[2] == 1.0);
  CHECK_THROWS_AS(clamp_through(x, 1, 1), std::invalid_argument);
}

TEST_CASE("reduce sum and mean") {
  CHECK(sum(Tensor({3}, {1, 2, 3})).item() == 6.0);
  Tensor x({2}, {2, 4}, true);
  auto m = mean(x);
  CHECK(m.item() == 3.0);
  m.backward();
  CHECK(x.grad()[0] == 0.5);
  CHECK(x.grad()[1] == 0.5);

  Tensor ones = Tensor::full({3, 3}, 1.0, true);
  sum(ones).backward();
  for (double g : ones.grad()) CHECK(g == 1.0);
  CHECK_THROWS_AS(sum(Tensor()), std::invalid_argument);
}

TEST_CASE("backward accumulates and rejects non-scalar losses") {
  Tensor x = Tensor::full({2, 2}, 1.0, true);
  sum(x).backward();
  for (double g : x.grad()) CHECK(g == 1.0);
  sum(x).backward();
  for (double g : x.grad()) CHECK(g == 2.0);
  CHECK_THROWS_AS(square(x).backward(), std::invalid_argument);

  Tensor s({1}, {3.0}, true);
  sum(square(s)).backward();
  CHECK(s.grad()[0] == 6.0);
}

TEST_CASE("backward twice with a reset yields bitwise-identical gradients") {
  Rng rng(23);
  auto x = random_tensor({2, 5, 5}, rng);
  auto k = random_tensor({2, 2, 3, 3}, rng);
  auto b = random_tensor({2}, rng);
  auto loss = [&] { return sum(square(tanh(conv2d(x, k, b, Boundary::replicate)))); };
  loss().backward();
  std::vector<double> first(k.grad().begin(), k.grad().end());
  k.zero_grad();
  x.zero_grad();
  b.zero_grad();
  loss().backward();
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(k.grad()[i] == first[i]);
}

TEST_CASE("composite graph gradients match central differences") {
  Rng rng(29);
  auto x = random_tensor({3, 4}, rng);
  auto W = random_tensor({4, 2}, rng);
  auto b = random_tensor({2}, rng);
  auto loss = [&] {
    auto h = sigmoid(affine(x, W, b));
    return mean(add(square(h), softplus(scale(h, 2.0))));
  };
  auto rep = finite_diff_check(loss, {x, W, b});
  CHECK(rep.max_rel_error <= 1e-4);
}

TEST_CASE("finite_diff_check on a linear function is exact to float noise") {
  ParamSet params;
  Rng rng(31);
  params.add("W", random_tensor({3, 3}, rng));
  auto rep = finite_diff_check([&] { return sum(params.get("W")); }, params);
  CHECK(rep.max_rel_error <= 1e-10);
}

TEST_CASE("adam first step moves by about lr against the gradient sign") {
  ParamSet params;
  params.add("w", Tensor::scalar(1.0, true));
  params.get("w").grad_mut()[0] = 1.0;
  Adam{0.1, 0.9, 0.999, 1e-8, {}}.step(params);
  CHECK(params.get("w").item() == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(params.get("w").grad()[0] == 0.0);
}

TEST_CASE("adam leaves a parameter with zero gradient unchanged") {
  ParamSet params;
  params.add("w", Tensor::scalar(1.0, true));
  params.get("w").grad_mut()[0] = 0.0;
  Adam{0.1, 0.9, 0.999, 1e-8, {}}.step(params);
  CHECK(params.get("w").item() == 1.0);
}

TEST_CASE("adam reports a parameter that received no gradient") {
  ParamSet params;
  params.add("used", Tensor::scalar(1.0, true));
  params.add("unused", Tensor::scalar(1.0, true));
  sum(params.get("used")).backward();
  try {
    Adam{}.step(params);
    FAIL("expected error");
  } catch (const std::logic_error& e) {
    CHECK(std::string(e.what()).find("unused") != std::string::npos);
  }
}

TEST_CASE("adam decreases a convex quadratic monotonically") {
  ParamSet params;
  params.add("w", Tensor({2}, {3.0, -2.0}, true));
  Adam opt{0.1, 0.9, 0.999, 1e-8, {}};
  double prev = 1e300;
  for (int it = 0; it < 20; ++it) {
    auto loss = sum(square(params.get("w")));
    CHECK(loss.item() < prev);
    prev = loss.item();
    loss.backward();
    opt.step(params);
  }
}

TEST_CASE("mlp and conv stack register named parameters") {
  ParamSet params;
  Rng rng(1);
  auto mlp = Mlp::build(params, "ctrl", {3, 16, 16, 1}, Pointwise::tanh, rng);
  CHECK(params.size() == 6);
  auto y = mlp.forward(params, Tensor::full({5, 3}, 0.5));
  CHECK(y.shape() == Shape{5, 1});
  CHECK_THROWS_AS(params.add("ctrl.w0", Tensor::scalar(0.0)), std::invalid_argument);

  auto conv = ConvStack::build(params, "conv", {7, 8, 4}, 3, Boundary::replicate, Pointwise::relu, rng);
  auto z = conv.forward(params, Tensor::full({7, 6, 6}, 0.1));
  CHECK(z.shape() == Shape{4, 6, 6});
}
