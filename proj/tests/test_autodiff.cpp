#include <doctest.h>

#include <cmath>

#include "solido/ops.hpp"
#include "solido/rng.hpp"
#include "solido/tensor.hpp"

using namespace solido;

namespace {
Tensor t1(std::vector<double> v, bool rg = false) {
  Shape s{v.size()};
  return Tensor::from(s, std::move(v), rg);
}
}  // namespace

TEST_CASE("elementwise arithmetic") {
  Tensor r = add(t1({1, 2}), t1({3, 4}));
  CHECK(r.data()[0] == 4.0);
  CHECK(r.data()[1] == 6.0);

  Tensor s = scale(t1({1, -2}), 0.5);
  CHECK(s.data()[0] == 0.5);
  CHECK(s.data()[1] == -1.0);

  CHECK_THROWS_AS(add(t1({1, 2}), t1({1, 2, 3})), Error);
}

TEST_CASE("mul gradient matches finite difference") {
  Tensor a = t1({2.0}, true);
  Tensor b = t1({3.0});
  sum_all(mul(a, b)).backward();
  CHECK(a.grad()[0] == doctest::Approx(3.0));
  double err = finite_difference_check([&](Tensor& x) { return sum_all(mul(x, b)); }, a);
  CHECK(err < 1e-6);
}

TEST_CASE("linear layer op") {
  Tensor x = Tensor::from({1, 2}, {1, 0});
  Tensor w_id = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor zero_bias = Tensor::from({2}, {0, 0});
  Tensor y = linear(x, w_id, zero_bias);
  CHECK(y.data()[0] == 1.0);
  CHECK(y.data()[1] == 0.0);

  Tensor x2 = Tensor::from({1, 2}, {1, 2});
  Tensor w = Tensor::from({2, 2}, {1, 1, 0, 1});
  Tensor bias = Tensor::from({2}, {1, 1});
  Tensor y2 = linear(x2, w, bias);
  CHECK(y2.data()[0] == 4.0);  // 1*1 + 2*1 + 1
  CHECK(y2.data()[1] == 3.0);  // 0 + 2 + 1

  Tensor wv = Tensor::from({2, 2}, {0.3, -0.7, 1.2, 0.4}, true);
  double err =
      finite_difference_check([&](Tensor& v) { return mean_all(linear(x2, v, bias)); }, wv);
  CHECK(err < 1e-4);
}

TEST_CASE("conv1d hand examples") {
  Tensor x = Tensor::from({1, 1, 3}, {1, 2, 3});
  Tensor k = Tensor::from({1, 1, 3}, {1, 0, -1});
  ConvSpec spec{1, 1, 1, 1};
  Tensor y = conv1d(x, k, Tensor(), spec);
  REQUIRE(y.shape() == Shape{1, 1, 3});
  CHECK(y.data()[0] == -2.0);
  CHECK(y.data()[1] == -2.0);
  CHECK(y.data()[2] == 2.0);

  Tensor impulse = Tensor::from({1, 1, 3}, {0, 1, 0});
  Tensor yi = conv1d(x, impulse, Tensor(), spec);
  for (std::size_t i = 0; i < 3; ++i) CHECK(yi.data()[i] == x.data()[i]);

  CHECK(conv_out_len(5, 3, ConvSpec{2, 1, 1, 1}) == 3);
}

TEST_CASE("depthwise conv equals per-channel independent conv") {
  Rng rng(7);
  std::vector<double> xv(2 * 9), k0(3), k1(3);
  for (double& v : xv) v = rng.gaussian();
  for (double& v : k0) v = rng.gaussian();
  for (double& v : k1) v = rng.gaussian();
  Tensor x = Tensor::from({1, 2, 9}, xv);
  Tensor k = Tensor::from({2, 1, 3}, {k0[0], k0[1], k0[2], k1[0], k1[1], k1[2]});
  ConvSpec dw{1, 1, 1, 2};
  Tensor y = conv1d(x, k, Tensor(), dw);

  ConvSpec single{1, 1, 1, 1};
  Tensor x0 = Tensor::from({1, 1, 9}, std::vector<double>(xv.begin(), xv.begin() + 9));
  Tensor x1 = Tensor::from({1, 1, 9}, std::vector<double>(xv.begin() + 9, xv.end()));
  Tensor y0 = conv1d(x0, Tensor::from({1, 1, 3}, k0), Tensor(), single);
  Tensor y1 = conv1d(x1, Tensor::from({1, 1, 3}, k1), Tensor(), single);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(std::abs(y.data()[i] - y0.data()[i]) < 1e-12);
    CHECK(std::abs(y.data()[9 + i] - y1.data()[i]) < 1e-12);
  }
}

TEST_CASE("activations") {
  Tensor r = relu(t1({-1, 0, 2}));
  CHECK(r.data()[0] == 0.0);
  CHECK(r.data()[1] == 0.0);
  CHECK(r.data()[2] == 2.0);

  CHECK(sigmoid(t1({0})).data()[0] == doctest::Approx(0.5));

  Tensor x = t1({2.0}, true);
  log_op(x).backward();
  CHECK(x.grad()[0] == doctest::Approx(0.5));
  double err = finite_difference_check([](Tensor& v) { return sum_all(log_op(v)); }, x);
  CHECK(err < 1e-6);

  CHECK_THROWS_AS(log_op(t1({-1.0})), Error);
  CHECK_THROWS_AS(log_op(t1({0.0})), Error);
}

TEST_CASE("reduce_mean") {
  CHECK(mean_all(t1({2, 4})).item() == doctest::Approx(3.0));

  // mean over time of a constant map is the constant, any length
  for (std::size_t L : {3u, 17u, 101u}) {
    Tensor c = Tensor::from({1, 2, L}, std::vector<double>(2 * L, 0.7));
    Tensor m = reduce_mean(c, {2});
    REQUIRE(m.shape() == Shape{1, 2});
    CHECK(m.data()[0] == doctest::Approx(0.7));
    CHECK(m.data()[1] == doctest::Approx(0.7));
  }

  Tensor x = t1({1, 2, 3, 4}, true);
  mean_all(x).backward();
  for (double g : x.grad()) CHECK(g == doctest::Approx(0.25));
}

TEST_CASE("l1_distance") {
  Tensor a = t1({1, 2});
  CHECK(l1_distance(a, a).item() == 0.0);
  CHECK(l1_distance(t1({1, 2}), t1({0, 0})).item() == doctest::Approx(3.0));

  Tensor x = t1({1.5, -0.5, 2.0}, true);
  Tensor b = t1({1.0, 0.5, 3.0});
  l1_distance(x, b).backward();
  CHECK(x.grad()[0] == 1.0);   // x > b
  CHECK(x.grad()[1] == -1.0);  // x < b
  CHECK(x.grad()[2] == -1.0);
  double err = finite_difference_check([&](Tensor& v) { return l1_distance(v, b); }, x);
  CHECK(err < 1e-6);

  // subgradient at a tie is 0
  Tensor tie = t1({1.0}, true);
  l1_distance(tie, t1({1.0})).backward();
  CHECK(tie.grad()[0] == 0.0);
}

TEST_CASE("bce_with_logits") {
  Tensor z = Tensor::from({1, 4}, {0, 0, 0, 0});
  Tensor tgt = Tensor::from({1, 4}, {1, 0, 1, 1});
  CHECK(bce_with_logits(z, tgt).item() == doctest::Approx(std::log(2.0)));

  Tensor sat = Tensor::from({1, 4}, {20, -20, 20, 20});
  CHECK(bce_with_logits(sat, tgt).item() <= 1e-8);

  Tensor logits = Tensor::from({1, 4}, {0.3, -1.2, 0.8, -0.1}, true);
  double err =
      finite_difference_check([&](Tensor& v) { return bce_with_logits(v, tgt); }, logits);
  CHECK(err < 1e-4);
}

TEST_CASE("backward semantics") {
  // loss = sum(x W^T), linear in W: grad(W) has the structure of x summed over batch
  Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor w = Tensor::from({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, true);
  sum_all(linear(x, w, Tensor())).backward();
  // d/dW[j,k] = sum_b x[b,k]
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(w.grad()[j * 3 + k] == doctest::Approx(x.data()[k] + x.data()[3 + k]));

  // loss independent of a parameter: no gradient buffer is ever allocated
  Tensor unused = t1({5.0}, true);
  Tensor y = t1({1.0}, true);
  sum_all(y).backward();
  CHECK(!unused.has_grad());

  // two paths to the same tensor accumulate
  Tensor p = t1({1.5}, true);
  add(scale(p, 2.0), scale(p, 3.0)).backward();
  CHECK(p.grad()[0] == doctest::Approx(5.0));
  double err = finite_difference_check(
      [](Tensor& v) { return sum_all(add(scale(v, 2.0), mul(v, v))); }, p);
  CHECK(err < 1e-6);
}

TEST_CASE("frozen tensors never allocate grad") {
  Tensor frozen = t1({1, 2, 3});  // requires_grad = false
  Tensor live = t1({4, 5, 6}, true);
  sum_all(mul(frozen, live)).backward();
  CHECK(!frozen.has_grad());
  CHECK(live.has_grad());
}

TEST_CASE("backward requires a scalar") {
  Tensor v = t1({1, 2}, true);
  CHECK_THROWS_AS(add(v, v).backward(), Error);
}

TEST_CASE("finite_difference_check sanity") {
  Tensor x = t1({1, 2}, true);
  CHECK(finite_difference_check([](Tensor& v) { return sum_all(mul(v, v)); }, x) < 1e-8);

  Tensor pos = t1({0.5, 1.5, 2.5}, true);
  CHECK(finite_difference_check([](Tensor& v) { return sum_all(relu(v)); }, pos) < 1e-8);

  Rng rng(3);
  std::vector<double> xv(2 * 8), kv(2 * 2 * 3);
  for (double& v : xv) v = rng.gaussian();
  for (double& v : kv) v = rng.gaussian();
  Tensor xc = Tensor::from({1, 2, 8}, xv, true);
  Tensor k = Tensor::from({2, 2, 3}, kv);
  ConvSpec spec{1, 1, 1, 1};
  CHECK(finite_difference_check(
            [&](Tensor& v) { return mean_all(conv1d(v, k, Tensor(), spec)); }, xc) < 1e-4);
}

TEST_CASE("rng streams are reproducible and reasonable") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.gaussian() == b.gaussian());
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  for (int i = 0; i < 100; ++i) CHECK(a.uniform_int(17) == b.uniform_int(17));

  Rng c(99);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double g = c.gaussian();
    sum += g;
    sq += g * g;
  }
  double mean = sum / n, var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));

  Rng d(7);
  for (int i = 0; i < 1000; ++i) {
    double u = d.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
