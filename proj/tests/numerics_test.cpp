#include <doctest.h>

#include <cmath>
#include <vector>

#include "ednas/grad_check.hpp"
#include "ednas/losses.hpp"
#include "ednas/ops.hpp"
#include "ednas/optim.hpp"
#include "ednas/rng.hpp"
#include "ednas/tape.hpp"
#include "ednas/tensor.hpp"

using namespace ednas;

namespace {

TensorPtr random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0,
                        double hi = 1.0) {
  auto t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t->size(); ++i)
    t->data()[i] = rng.uniform(lo, hi);
  return t;
}

// Keeps coordinates away from |x| < margin (relu kinks etc).
void push_from_zero(const TensorPtr& t, double margin) {
  for (std::size_t i = 0; i < t->size(); ++i) {
    double& v = t->data()[i];
    if (std::fabs(v) < margin) v = v < 0 ? v - margin : v + margin;
  }
}

}  // namespace

TEST_CASE("softmax hand values") {
  auto a = ops::softmax(nullptr, Tensor::from({2}, {0.0, 0.0}), 0);
  CHECK(a->data()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(a->data()[1] == doctest::Approx(0.5).epsilon(1e-12));

  auto b = ops::softmax(nullptr, Tensor::from({2}, {std::log(3.0), 0.0}), 0);
  CHECK(b->data()[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(b->data()[1] == doctest::Approx(0.25).epsilon(1e-12));

  for (double c : {-17.0, 0.0, 3.5, 1e4}) {
    auto u = ops::softmax(nullptr, Tensor::from({3}, {c, c, c}), 0);
    for (int i = 0; i < 3; ++i)
      CHECK(u->data()[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
}

TEST_CASE("softmax slices sum to one and are shift invariant") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 1 + rng.uniform_int(5), n = 1 + rng.uniform_int(9);
    auto x = random_tensor(rng, {m, n}, -30.0, 30.0);
    auto y = ops::softmax_rows(nullptr, x);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        const double v = y->at(i, j);
        CHECK(v >= 0.0);
        s += v;
      }
      CHECK(std::fabs(s - 1.0) <= 1e-6);
    }
    const double shift = rng.uniform(-50.0, 50.0);
    auto xs = Tensor::zeros(x->shape());
    for (std::size_t i = 0; i < x->size(); ++i)
      xs->data()[i] = x->data()[i] + shift;
    auto ys = ops::softmax_rows(nullptr, xs);
    for (std::size_t i = 0; i < y->size(); ++i)
      CHECK(std::fabs(y->data()[i] - ys->data()[i]) <= 1e-9);
  }
}

TEST_CASE("softmax rejects a bad axis") {
  auto x = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(ops::softmax(nullptr, x, 2), std::invalid_argument);
  CHECK_THROWS_AS(ops::softmax(nullptr, x, -1), std::invalid_argument);
}

TEST_CASE("layer_norm hand values") {
  auto gain = Tensor::from({3}, {1, 1, 1});
  auto bias = Tensor::from({3}, {0, 0, 0});
  auto y = ops::layer_norm(nullptr, Tensor::from({1, 3}, {1, 2, 3}), gain,
                           bias, 1e-5);
  CHECK(y->data()[0] == doctest::Approx(-1.2247).epsilon(1e-3));
  CHECK(y->data()[1] == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(y->data()[2] == doctest::Approx(1.2247).epsilon(1e-3));

  auto z = ops::layer_norm(nullptr, Tensor::from({1, 3}, {5, 5, 5}), gain,
                           bias, 1e-5);
  for (int j = 0; j < 3; ++j)
    CHECK(std::fabs(z->data()[j]) <= 1e-9);

  auto zero_gain = Tensor::from({3}, {0, 0, 0});
  auto b = Tensor::from({3}, {0.3, -0.7, 2.0});
  auto w = ops::layer_norm(nullptr, Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}),
                           zero_gain, b, 1e-5);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(w->at(i, j) == doctest::Approx(b->data()[j]).epsilon(1e-12));
}

TEST_CASE("layer_norm standardizes rows before the affine map") {
  Rng rng(5);
  auto gain = Tensor::from({8}, std::vector<double>(8, 1.0));
  auto bias = Tensor::from({8}, std::vector<double>(8, 0.0));
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor(rng, {4, 8}, -5.0, 5.0);
    auto y = ops::layer_norm(nullptr, x, gain, bias, 1e-5);
    for (int i = 0; i < 4; ++i) {
      double mu = 0, var = 0;
      for (int j = 0; j < 8; ++j) mu += y->at(i, j);
      mu /= 8;
      for (int j = 0; j < 8; ++j) var += (y->at(i, j) - mu) * (y->at(i, j) - mu);
      var /= 8;
      CHECK(std::fabs(mu) <= 1e-5);
      CHECK(std::fabs(var - 1.0) <= 1e-3);
    }
  }
}

TEST_CASE("smooth_l1 hand values") {
  auto t = Tensor::from({2}, {1.0, -2.0});
  CHECK(losses::smooth_l1(nullptr, t, t)->value() == 0.0);
  CHECK(losses::smooth_l1(nullptr, Tensor::from({1}, {0.5}),
                          Tensor::from({1}, {0.0}))
            ->value() == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(losses::smooth_l1(nullptr, Tensor::from({1}, {2.0}),
                          Tensor::from({1}, {0.0}))
            ->value() == doctest::Approx(1.5).epsilon(1e-12));
  CHECK_THROWS_AS(losses::smooth_l1(nullptr, Tensor::from({1}, {1.0}),
                                    Tensor::from({2}, {1.0, 2.0})),
                  std::invalid_argument);
}

TEST_CASE("kl_divergence hand values and Gibbs bound") {
  auto half = Tensor::from({2}, {0.5, 0.5});
  CHECK(losses::kl_divergence(nullptr, half, half)->value() == 0.0);
  CHECK(losses::kl_divergence(nullptr, Tensor::from({2}, {1.0, 0.0}), half)
            ->value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + rng.uniform_int(6);
    std::vector<double> p(n), q(n);
    double sp = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      p[i] = rng.uniform(1e-4, 1.0);
      q[i] = rng.uniform(1e-4, 1.0);
      sp += p[i];
      sq += q[i];
    }
    for (int i = 0; i < n; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    CHECK(losses::kl_divergence(nullptr, Tensor::from({n}, p),
                                Tensor::from({n}, q))
              ->value() >= -1e-9);
  }

  CHECK_THROWS_AS(
      losses::kl_divergence(nullptr, Tensor::from({2}, {0.9, 0.2}), half),
      std::invalid_argument);
}

TEST_CASE("binary_cross_entropy hand values") {
  CHECK(losses::binary_cross_entropy(nullptr, Tensor::scalar(0.5), 1.0)->value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(losses::binary_cross_entropy(nullptr, Tensor::scalar(0.5), 0.0)->value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(losses::binary_cross_entropy(nullptr, Tensor::scalar(0.9), 1.0)->value() ==
        doctest::Approx(0.1053605156578263).epsilon(1e-10));
  // score -> label drives the loss to zero
  CHECK(losses::binary_cross_entropy(nullptr, Tensor::scalar(1.0 - 1e-9), 1.0)
            ->value() <= 2e-9);
  CHECK(losses::binary_cross_entropy(nullptr, Tensor::scalar(1e-9), 0.0)
            ->value() <= 2e-9);
}

TEST_CASE("softmax_cross_entropy hand values") {
  CHECK(losses::softmax_cross_entropy(nullptr, Tensor::from({3}, {0, 0, 0}), 1)
            ->value() == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(losses::softmax_cross_entropy(nullptr, Tensor::from({2}, {10, 0}), 0)
            ->value() == doctest::Approx(4.539889921686465e-05).epsilon(1e-8));
  // shift invariance
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor(rng, {5}, -3, 3);
    auto xs = Tensor::zeros({5});
    const double c = rng.uniform(-40, 40);
    for (int i = 0; i < 5; ++i) xs->data()[i] = x->data()[i] + c;
    const int label = rng.uniform_int(5);
    CHECK(losses::softmax_cross_entropy(nullptr, x, label)->value() ==
          doctest::Approx(
              losses::softmax_cross_entropy(nullptr, xs, label)->value())
              .epsilon(1e-9));
  }
  CHECK_THROWS_AS(
      losses::softmax_cross_entropy(nullptr, Tensor::from({2}, {0, 0}), 2),
      std::invalid_argument);
}

TEST_CASE("gradient_check on quadratic, composite and constant functions") {
  auto quad = [](Tape* tape, const std::vector<TensorPtr>& xs) {
    return ops::sum_all(tape, ops::mul(tape, xs[0], xs[0]));
  };
  auto x = Tensor::from({1}, {3.0});
  CHECK(gradient_check(quad, x) < 1e-6);
  {
    Tape tape;
    x->set_requires_grad(true);
    auto loss = quad(&tape, {x});
    tape.backward(loss);
    CHECK(x->grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
    x->zero_grad();
  }

  Rng rng(29);
  auto w = random_tensor(rng, {4, 3});
  auto composite = [&](Tape* tape, const std::vector<TensorPtr>& xs) {
    return losses::softmax_cross_entropy(
        tape, ops::reshape(tape, ops::matmul(tape, xs[0], w), {3}), 1);
  };
  for (int trial = 0; trial < 10; ++trial) {
    auto xin = random_tensor(rng, {1, 4});
    CHECK(gradient_check(composite, xin) < 1e-4);
  }

  auto constant = [](Tape* tape, const std::vector<TensorPtr>& xs) {
    (void)xs;
    (void)tape;
    return Tensor::scalar(2.5);
  };
  CHECK(gradient_check(constant, random_tensor(rng, {3})) <= 1e-8);
}

TEST_CASE("every differentiable op passes gradient checks on random inputs") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 2 + rng.uniform_int(3), k = 2 + rng.uniform_int(3),
              n = 2 + rng.uniform_int(3);
    auto a = random_tensor(rng, {m, k});
    auto b = random_tensor(rng, {k, n});
    auto bt = random_tensor(rng, {n, k});
    auto at = random_tensor(rng, {k, m});
    auto same1 = random_tensor(rng, {m, k});
    auto row = random_tensor(rng, {k});

    auto sum_of = [](auto opfn) {
      return [opfn](Tape* tape, const std::vector<TensorPtr>& xs) {
        return ops::sum_all(tape, opfn(tape, xs));
      };
    };

    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::matmul(t, xs[0], xs[1]);
          }), {a, b}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::matmul_nt(t, xs[0], xs[1]);
          }), {a, bt}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::matmul_tn(t, xs[0], xs[1]);
          }), {at, b}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::mul(t, ops::add(t, xs[0], xs[1]),
                            ops::sub(t, xs[0], xs[1]));
          }), {a, same1}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::add_row(t, xs[0], xs[1]);
          }), {a, row}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::scale(t, xs[0], -1.7);
          }), {a}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::mul_scalar(t, xs[0], xs[1]);
          }), {a, Tensor::scalar(0.8)}) < 1e-4);

    auto pos = random_tensor(rng, {m, k}, 0.2, 2.0);
    auto away = random_tensor(rng, {m, k});
    push_from_zero(away, 0.05);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::relu(t, xs[0]);
          }), {away}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::sigmoid(t, xs[0]);
          }), {a}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::tanh(t, xs[0]);
          }), {a}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::log_shift(t, xs[0], 1e-6);
          }), {pos}) < 1e-4);

    // softmax composed with a weighting so the gradient is nontrivial
    auto wmat = random_tensor(rng, {m, k});
    CHECK(gradient_check(
              [&](Tape* t, const std::vector<TensorPtr>& xs) {
                return ops::sum_all(
                    t, ops::mul(t, ops::softmax_rows(t, xs[0]), wmat));
              },
              {a}) < 1e-4);

    auto gain = random_tensor(rng, {k}, 0.5, 1.5);
    auto bias = random_tensor(rng, {k});
    CHECK(gradient_check(
              [&](Tape* t, const std::vector<TensorPtr>& xs) {
                return ops::sum_all(
                    t, ops::mul(t,
                                ops::layer_norm(t, xs[0], xs[1], xs[2], 1e-5),
                                wmat));
              },
              {a, gain, bias}) < 1e-4);

    auto mask = Tensor::zeros({m, k});
    for (std::size_t i = 0; i < mask->size(); ++i)
      mask->data()[i] = rng.bernoulli(0.5) ? 1.0 / 0.9 : 0.0;
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::apply_mask(t, xs[0], mask);
          }), {a}) < 1e-4);

    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::concat_rows(t, {xs[0], xs[1]});
          }), {a, same1}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::concat_cols(t, {xs[0], xs[1]});
          }), {a, same1}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::reshape(t, xs[0], {k, m});
          }), {a}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::gather_rows(t, xs[0], {0, m - 1, 0});
          }), {a}) < 1e-4);
    CHECK(gradient_check(sum_of([&](Tape* t, const std::vector<TensorPtr>& xs) {
            return ops::embedding_rows(t, xs[0], {m - 1, 0});
          }), {a}) < 1e-4);
    CHECK(gradient_check(
              [&](Tape* t, const std::vector<TensorPtr>& xs) {
                return ops::mean_all(t, ops::mul(t, xs[0], xs[0]));
              },
              {a}) < 1e-4);

    // losses
    auto target = random_tensor(rng, {m, k});
    auto pred = random_tensor(rng, {m, k}, -3.0, 3.0);
    for (std::size_t i = 0; i < pred->size(); ++i) {
      const double e = pred->data()[i] - target->data()[i];
      if (std::fabs(std::fabs(e) - 1.0) < 0.05)
        pred->data()[i] += 0.1;  // keep away from the huber kink
    }
    CHECK(gradient_check(
              [&](Tape* t, const std::vector<TensorPtr>& xs) {
                return losses::smooth_l1(t, xs[0], target);
              },
              {pred}) < 1e-4);

    std::vector<double> pv(static_cast<std::size_t>(k)),
        qv(static_cast<std::size_t>(k));
    double sp = 0, sq = 0;
    for (int i = 0; i < k; ++i) {
      pv[static_cast<std::size_t>(i)] = rng.uniform(0.1, 1.0);
      qv[static_cast<std::size_t>(i)] = rng.uniform(0.1, 1.0);
      sp += pv[static_cast<std::size_t>(i)];
      sq += qv[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < k; ++i) {
      pv[static_cast<std::size_t>(i)] /= sp;
      qv[static_cast<std::size_t>(i)] /= sq;
    }
    auto pfix = Tensor::from({k}, pv);
    // check through a softmax so q stays a distribution under perturbation
    auto qlogits = random_tensor(rng, {k});
    CHECK(gradient_check(
              [&](Tape* t, const std::vector<TensorPtr>& xs) {
                return losses::kl_divergence(t, pfix,
                                             ops::softmax(t, xs[0], 0));
              },
              {qlogits}) < 1e-4);

    auto score_logit = random_tensor(rng, {1, 1});
    CHECK(gradient_check(
              [&](Tape* t, const std::vector<TensorPtr>& xs) {
                return losses::binary_cross_entropy(
                    t, ops::sigmoid(t, xs[0]), 1.0);
              },
              {score_logit}) < 1e-4);
    auto lg = random_tensor(rng, {5}, -2, 2);
    CHECK(gradient_check(
              [&](Tape* t, const std::vector<TensorPtr>& xs) {
                return losses::softmax_cross_entropy(t, xs[0], 2);
              },
              {lg}) < 1e-4);
  }
}

TEST_CASE("backward replays each recorded step exactly once") {
  Rng rng(37);
  auto x = random_tensor(rng, {3, 3});
  x->set_requires_grad(true);
  Tape tape;
  auto y = ops::mul(&tape, ops::add(&tape, x, x), ops::softmax_rows(&tape, x));
  auto loss = ops::sum_all(&tape, y);
  tape.backward(loss);
  auto counts = tape.replay_counts();
  REQUIRE(counts.size() == tape.size());
  REQUIRE(tape.size() > 0);
  for (int c : counts) CHECK(c == 1);
}

TEST_CASE("gradients accumulate once per use of a tensor") {
  auto x = Tensor::from({2}, {1.0, 2.0}, true);
  Tape tape;
  auto loss = ops::sum_all(&tape, ops::add(&tape, x, x));
  tape.backward(loss);
  CHECK(x->grad()[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(x->grad()[1] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("values stay finite through forward and backward") {
  Rng rng(41);
  auto x = random_tensor(rng, {4, 6});
  x->set_requires_grad(true);
  Tape tape;
  auto gain = Tensor::from({6}, std::vector<double>(6, 1.0), true);
  auto bias = Tensor::from({6}, std::vector<double>(6, 0.0), true);
  auto y = ops::layer_norm(&tape, ops::softmax_rows(&tape, x), gain, bias);
  auto loss = ops::mean_all(&tape, ops::mul(&tape, y, y));
  tape.backward(loss);
  CHECK(x->all_finite());
  CHECK(y->all_finite());
  CHECK(gain->all_finite());
}

// ---------------------------------------------------------------------------
// Optimizer

TEST_CASE("optimizer leaves parameters alone for zero gradient or zero lr") {
  auto p = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
  const std::vector<double> before = p->values();

  Adam opt({.lr = 1e-2});
  p->ensure_grad();
  opt.step({p});
  CHECK(p->values() == before);

  Adam frozen({.lr = 0.0});
  p->grad()[0] = 1.0;
  p->grad()[1] = -3.0;
  frozen.step({p});
  CHECK(p->values() == before);
}

TEST_CASE("optimizer strictly decreases a convex probe over 100 steps") {
  auto w = Tensor::from({1}, {0.0}, true);
  Adam opt({.lr = 0.01});
  double prev = 9.0;  // (0-3)^2
  for (int step = 0; step < 100; ++step) {
    Tape tape;
    auto diff = ops::add(&tape, w, Tensor::from({1}, {-3.0}));
    auto loss = ops::sum_all(&tape, ops::mul(&tape, diff, diff));
    tape.backward(loss);
    opt.step({w});
    Adam::zero_grad({w});
    Tape eval;
    eval.set_recording(false);
    auto d2 = ops::add(&eval, w, Tensor::from({1}, {-3.0}));
    const double now = ops::sum_all(&eval, ops::mul(&eval, d2, d2))->value();
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("optimizer converges to the quadratic minimizer") {
  auto w = Tensor::from({1}, {0.0}, true);
  Adam opt({.lr = 0.05});
  for (int step = 0; step < 500; ++step) {
    Tape tape;
    auto diff = ops::add(&tape, w, Tensor::from({1}, {-3.0}));
    auto loss = ops::sum_all(&tape, ops::mul(&tape, diff, diff));
    tape.backward(loss);
    opt.step({w});
    Adam::zero_grad({w});
  }
  CHECK(std::fabs(w->data()[0] - 3.0) < 1e-3);
}

TEST_CASE("optimizer skips and reports non-finite gradients") {
  auto p = Tensor::from({2}, {1.0, 2.0}, true);
  const std::vector<double> before = p->values();
  p->ensure_grad();
  p->grad()[0] = std::numeric_limits<double>::quiet_NaN();
  Adam opt({.lr = 0.1});
  auto stats = opt.step({p});
  CHECK(stats.skipped_nonfinite == 1);
  CHECK(stats.updated == 0);
  CHECK(p->values() == before);
}
