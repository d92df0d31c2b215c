#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ednas/attention.hpp"
#include "ednas/grad_check.hpp"
#include "ednas/rng.hpp"

using namespace ednas;

namespace {

TensorPtr random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0,
                        double hi = 1.0) {
  auto t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t->size(); ++i)
    t->data()[i] = rng.uniform(lo, hi);
  return t;
}

void zero_all(const std::vector<TensorPtr>& ts) {
  for (auto& t : ts)
    for (std::size_t i = 0; i < t->size(); ++i) t->data()[i] = 0.0;
}

TensorPtr permute_rows(const TensorPtr& x, const std::vector<int>& perm) {
  auto out = Tensor::zeros(x->shape());
  const int n = x->cols();
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (int j = 0; j < n; ++j)
      out->data()[i * n + j] =
          x->data()[static_cast<std::size_t>(perm[i]) * n + j];
  return out;
}

std::vector<int> random_perm(Rng& rng, int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p);
  return p;
}

EvalCtx eval_ctx(Tape* tape, AttentionProbe* probe = nullptr) {
  EvalCtx ctx;
  ctx.tape = tape;
  ctx.training = false;
  ctx.probe = probe;
  return ctx;
}

}  // namespace

TEST_CASE("operation pools and names") {
  CHECK(encoder_pool() == std::vector<OperationKind>{OperationKind::SA,
                                                     OperationKind::FFN});
  CHECK(decoder_pool() ==
        std::vector<OperationKind>{OperationKind::SA, OperationKind::RSA,
                                   OperationKind::GA, OperationKind::FFN});
  for (auto k : decoder_pool()) CHECK(op_from_name(op_name(k)) == k);
  CHECK(!op_from_name("GAA").has_value());
}

TEST_CASE("single-key attention returns the value row exactly") {
  Rng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + rng.uniform_int(8);
    auto q = random_tensor(rng, {3, d});
    auto k = random_tensor(rng, {1, d});
    auto v = random_tensor(rng, {1, d});
    auto f = generalized_attention(nullptr, q, k, v, nullptr);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < d; ++j) CHECK(f->at(i, j) == v->data()[j]);
  }
}

TEST_CASE("generalized attention two-key hand case") {
  auto q = Tensor::from({1, 1}, {0.0});
  auto k = Tensor::from({2, 1}, {0.0, 0.0});
  auto v = Tensor::from({2, 1}, {1.0, 3.0});
  auto bias = Tensor::from({1, 2}, {std::log(3.0), 0.0});
  AttentionProbe probe;
  auto f = generalized_attention(nullptr, q, k, v, bias, &probe);
  REQUIRE(probe.head_weights.size() == 1);
  CHECK(probe.head_weights[0][0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(probe.head_weights[0][1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(f->value() == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("identical keys with no bias average the values") {
  Rng rng(103);
  const int d = 4, n = 5;
  auto q = random_tensor(rng, {2, d});
  auto k0 = random_tensor(rng, {1, d});
  auto k = Tensor::zeros({n, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) k->data()[static_cast<std::size_t>(i) * d + j] = k0->data()[j];
  auto v = random_tensor(rng, {n, d});
  auto f = generalized_attention(nullptr, q, k, v, nullptr);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < d; ++j) {
      double mean = 0;
      for (int r = 0; r < n; ++r) mean += v->at(r, j);
      mean /= n;
      CHECK(f->at(i, j) == doctest::Approx(mean).epsilon(1e-9));
    }
  CHECK_THROWS_AS(
      generalized_attention(nullptr, q, Tensor::zeros({n, d + 1}), v, nullptr),
      std::invalid_argument);
}

TEST_CASE("multi-head attention degenerates with identity projections") {
  Rng rng(107);
  const int d = 3, m = 4, n = 2;
  AttentionParams params(d, 1, rng);
  zero_all({params.wq[0], params.wk[0], params.wv[0], params.wo});
  for (int i = 0; i < d; ++i) {
    params.wq[0]->data()[static_cast<std::size_t>(i) * d + i] = 1.0;
    params.wk[0]->data()[static_cast<std::size_t>(i) * d + i] = 1.0;
    params.wv[0]->data()[static_cast<std::size_t>(i) * d + i] = 1.0;
    params.wo->data()[static_cast<std::size_t>(i) * d + i] = 1.0;
  }
  auto q = random_tensor(rng, {m, d});
  auto k = random_tensor(rng, {n, d});
  auto v = random_tensor(rng, {n, d});
  auto direct = generalized_attention(nullptr, q, k, v, nullptr);
  auto mha = multi_head_attention(nullptr, q, k, v, nullptr, params);
  for (std::size_t i = 0; i < direct->size(); ++i)
    CHECK(mha->data()[i] == doctest::Approx(direct->data()[i]).epsilon(1e-14));
}

TEST_CASE("multi-head attention shape contract and zero output projection") {
  Rng rng(109);
  for (int d : {8, 16}) {
    for (int h : {1, 2, 4}) {
      const int m = 1 + rng.uniform_int(8);
      AttentionParams params(d, h, rng);
      auto q = random_tensor(rng, {m, d});
      auto kv = random_tensor(rng, {3, d});
      auto out = multi_head_attention(nullptr, q, kv, kv, nullptr, params);
      CHECK(out->rows() == m);
      CHECK(out->cols() == d);

      zero_all({params.wo});
      auto zeroed = multi_head_attention(nullptr, q, kv, kv, nullptr, params);
      for (std::size_t i = 0; i < zeroed->size(); ++i)
        CHECK(zeroed->data()[i] == 0.0);
    }
  }
  Rng rng2(1);
  CHECK_THROWS_AS(AttentionParams(10, 3, rng2), std::invalid_argument);
}

TEST_CASE("attention weight rows sum to one for every head of every op") {
  Rng rng(113);
  const int d = 8, h = 2, m = 5, d_r = 4;
  SaOp sa(d, d, h, rng);
  GaOp ga(d, d, h, rng);
  RsaOp rsa(d, d, h, d_r, rng);
  auto x = random_tensor(rng, {m, d}, -2.0, 2.0);
  auto y = random_tensor(rng, {3, d});
  auto rel = random_tensor(rng, {m * m, d_r});

  AttentionProbe probe;
  auto ctx = eval_ctx(nullptr, &probe);
  sa.forward(ctx, x, nullptr);
  ga.forward(ctx, x, y, nullptr);
  rsa.forward(ctx, x, rel, nullptr);
  REQUIRE(probe.head_weights.size() == 3 * h);
  for (std::size_t w = 0; w < probe.head_weights.size(); ++w) {
    const auto [rows, cols] = probe.head_dims[w];
    for (int i = 0; i < rows; ++i) {
      double s = 0;
      for (int j = 0; j < cols; ++j)
        s += probe.head_weights[w][static_cast<std::size_t>(i) * cols + j];
      CHECK(std::fabs(s - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("sa_op single token and eval determinism") {
  Rng rng(127);
  const int d = 8;
  SaOp sa(6, d, 2, rng);  // width adapter in play
  auto x = random_tensor(rng, {1, 6});
  auto ctx = eval_ctx(nullptr);
  auto z1 = sa.forward(ctx, x, nullptr);
  auto z2 = sa.forward(ctx, x, nullptr);
  CHECK(z1->cols() == d);
  for (std::size_t i = 0; i < z1->size(); ++i)
    CHECK(z1->data()[i] == z2->data()[i]);

  AttentionProbe probe;
  auto pctx = eval_ctx(nullptr, &probe);
  sa.forward(pctx, x, nullptr);
  for (const auto& w : probe.head_weights) {
    REQUIRE(w.size() == 1);
    CHECK(w[0] == 1.0);
  }
}

TEST_CASE("sa_op and ffn_op are permutation equivariant in rows") {
  Rng rng(131);
  const int d = 8, m = 6;
  SaOp sa(d, d, 2, rng);
  FfnOp ffn(d, d, rng);
  auto ctx = eval_ctx(nullptr);
  for (int trial = 0; trial < 8; ++trial) {
    auto x = random_tensor(rng, {m, d});
    auto perm = random_perm(rng, m);
    auto xp = permute_rows(x, perm);

    auto z = sa.forward(ctx, x, nullptr);
    auto zp = sa.forward(ctx, xp, nullptr);
    auto z_perm = permute_rows(z, perm);
    for (std::size_t i = 0; i < z->size(); ++i)
      CHECK(zp->data()[i] == doctest::Approx(z_perm->data()[i]).epsilon(1e-11));

    auto f = ffn.forward(ctx, x);
    auto fp = ffn.forward(ctx, xp);
    auto f_perm = permute_rows(f, perm);
    for (std::size_t i = 0; i < f->size(); ++i)
      CHECK(fp->data()[i] == doctest::Approx(f_perm->data()[i]).epsilon(1e-11));
  }
}

TEST_CASE("ga_op collapses onto a single guiding row and ignores Y order") {
  Rng rng(137);
  const int d = 8, m = 4;
  GaOp ga(d, d, 2, rng);
  auto ctx = eval_ctx(nullptr);
  auto x = random_tensor(rng, {m, d});

  // n = 1: attention output is the projected single row for every query
  auto y1 = random_tensor(rng, {1, d});
  AttentionProbe probe;
  auto pctx = eval_ctx(nullptr, &probe);
  ga.forward(pctx, x, y1, nullptr);
  for (const auto& w : probe.head_weights)
    for (double v : w) CHECK(v == 1.0);

  // permutation invariance in Y
  auto y = random_tensor(rng, {5, d});
  auto z = ga.forward(ctx, x, y, nullptr);
  for (int trial = 0; trial < 5; ++trial) {
    auto zp = ga.forward(ctx, x, permute_rows(y, random_perm(rng, 5)), nullptr);
    for (std::size_t i = 0; i < z->size(); ++i)
      CHECK(zp->data()[i] == doctest::Approx(z->data()[i]).epsilon(1e-11));
  }

  // zeroing one X row only changes the matching output row
  auto x2 = Tensor::from(x->shape(), x->values());
  for (int j = 0; j < d; ++j) x2->data()[static_cast<std::size_t>(2) * d + j] = 0.0;
  auto z2 = ga.forward(ctx, x2, y, nullptr);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == 2) continue;
      CHECK(z2->at(i, j) == doctest::Approx(z->at(i, j)).epsilon(1e-12));
    }
}

TEST_CASE("ffn_op zero weights reduce to layer norm and dropout is eval-silent") {
  Rng rng(139);
  const int d = 6, m = 3;
  FfnOp ffn(d, d, rng);
  zero_all({ffn.fc_expand.w, ffn.fc_expand.b, ffn.fc_contract.w,
            ffn.fc_contract.b});
  auto x = random_tensor(rng, {m, d});
  auto ctx = eval_ctx(nullptr);
  auto z = ffn.forward(ctx, x);
  auto ln = ffn.norm.apply(nullptr, x);
  for (std::size_t i = 0; i < z->size(); ++i)
    CHECK(z->data()[i] == ln->data()[i]);

  FfnOp ffn2(d, d, rng);
  auto a = ffn2.forward(ctx, x);
  auto b = ffn2.forward(ctx, x);
  for (std::size_t i = 0; i < a->size(); ++i)
    CHECK(a->data()[i] == b->data()[i]);
}

TEST_CASE("relation_bias hand cases") {
  Rng rng(149);
  const int d_r = 4, d_h = 4, m = 3;
  RelationMlpParams mlp(d_r, d_h, rng);
  zero_all({mlp.fc1.w, mlp.fc1.b, mlp.fc2.w, mlp.fc2.b});
  auto rel = random_tensor(rng, {m * m, d_r});
  auto bias = relation_bias(nullptr, rel, m, mlp);
  for (std::size_t i = 0; i < bias->size(); ++i)
    CHECK(bias->data()[i] == doctest::Approx(std::log(1e-6)).epsilon(1e-9));
  CHECK(bias->data()[0] == doctest::Approx(-13.8155).epsilon(1e-3));

  // constant relation features give a constant bias matrix
  RelationMlpParams mlp2(d_r, d_h, rng);
  auto crel = Tensor::zeros({m * m, d_r});
  for (int i = 0; i < m * m; ++i)
    for (int j = 0; j < d_r; ++j)
      crel->data()[static_cast<std::size_t>(i) * d_r + j] = 0.3 * (j + 1);
  auto cbias = relation_bias(nullptr, crel, m, mlp2);
  for (std::size_t i = 1; i < cbias->size(); ++i)
    CHECK(cbias->data()[i] == cbias->data()[0]);

  // single pair against direct arithmetic through a fixed 2-layer relu mlp
  RelationMlpParams fixed(2, 2, rng);
  fixed.fc1.w->values() = {0.5, -1.0, 2.0, 0.25};
  fixed.fc1.b->values() = {0.1, -0.2};
  fixed.fc2.w->values() = {1.5, -0.5};
  fixed.fc2.b->values() = {0.05};
  auto pair = Tensor::from({1, 2}, {0.4, -0.6});
  auto got = relation_bias(nullptr, pair, 1, fixed);
  const double h0 = std::max(0.0, 0.4 * 0.5 + (-0.6) * 2.0 + 0.1);
  const double h1 = std::max(0.0, 0.4 * (-1.0) + (-0.6) * 0.25 + (-0.2));
  const double o = std::max(0.0, h0 * 1.5 + h1 * (-0.5) + 0.05);
  CHECK(got->value() == doctest::Approx(std::log(o + 1e-6)).epsilon(1e-12));
}

TEST_CASE("rsa_op with pairwise-constant bias matches sa_op attention weights") {
  Rng rng(151);
  const int d = 8, h = 2, m = 4, d_r = 4;
  SaOp sa(d, d, h, rng);
  RsaOp rsa(d, d, h, d_r, rng);
  rsa.attn = sa.attn;  // shared projections
  rsa.norm = sa.norm;
  zero_all({rsa.relation_mlp.fc1.w, rsa.relation_mlp.fc1.b,
            rsa.relation_mlp.fc2.w, rsa.relation_mlp.fc2.b});
  auto x = random_tensor(rng, {m, d});
  auto rel = random_tensor(rng, {m * m, d_r});

  AttentionProbe p_sa, p_rsa;
  auto ctx_sa = eval_ctx(nullptr, &p_sa);
  auto ctx_rsa = eval_ctx(nullptr, &p_rsa);
  sa.forward(ctx_sa, x, nullptr);
  rsa.forward(ctx_rsa, x, rel, nullptr);
  REQUIRE(p_sa.head_weights.size() == p_rsa.head_weights.size());
  for (std::size_t w = 0; w < p_sa.head_weights.size(); ++w)
    for (std::size_t i = 0; i < p_sa.head_weights[w].size(); ++i)
      CHECK(std::fabs(p_sa.head_weights[w][i] - p_rsa.head_weights[w][i]) <=
            1e-9);
}

TEST_CASE("rsa_op on one token matches sa_op bitwise") {
  Rng rng(157);
  const int d = 8, h = 2, d_r = 4;
  SaOp sa(d, d, h, rng);
  RsaOp rsa(d, d, h, d_r, rng);
  rsa.attn = sa.attn;
  rsa.norm = sa.norm;
  auto x = random_tensor(rng, {1, d});
  auto rel = random_tensor(rng, {1, d_r});
  auto ctx = eval_ctx(nullptr);
  auto za = sa.forward(ctx, x, nullptr);
  auto zb = rsa.forward(ctx, x, rel, nullptr);
  for (std::size_t i = 0; i < za->size(); ++i)
    CHECK(za->data()[i] == zb->data()[i]);
}

TEST_CASE("a +/-20 bias saturates the attention row") {
  Rng rng(163);
  const int d = 4, m = 3;
  auto x = random_tensor(rng, {m, d});
  auto bias = Tensor::zeros({m, m});
  for (std::size_t i = 0; i < bias->size(); ++i) bias->data()[i] = -20.0;
  bias->data()[0 * m + 2] = 20.0;  // pair (0, 2)
  AttentionProbe probe;
  generalized_attention(nullptr, x, x, x, bias, &probe);
  CHECK(probe.head_weights[0][2] > 0.99);
}

TEST_CASE("rsa_op rejects mismatched relation shapes") {
  Rng rng(167);
  RsaOp rsa(8, 8, 2, 4, rng);
  auto x = random_tensor(rng, {3, 8});
  auto bad = random_tensor(rng, {4, 4});
  auto ctx = eval_ctx(nullptr);
  CHECK_THROWS_AS(rsa.forward(ctx, x, bad, nullptr), std::invalid_argument);
}

TEST_CASE("all four ops pass end-to-end gradient checks") {
  Rng rng(173);
  const int d = 8, h = 2, m = 3, d_r = 4, d_in = 6;
  SaOp sa(d_in, d, h, rng);
  GaOp ga(d, d, h, rng);
  FfnOp ffn(d_in, d, rng);
  RsaOp rsa(d, d, h, d_r, rng);

  auto x_in = random_tensor(rng, {m, d_in});
  auto x_d = random_tensor(rng, {m, d});
  auto y = random_tensor(rng, {4, d});
  auto rel = random_tensor(rng, {m * m, d_r}, 0.1, 1.0);

  auto check_op = [&](auto&& fwd, std::vector<TensorPtr> leaves) {
    LossFn f = [&](Tape* tape, const std::vector<TensorPtr>&) {
      EvalCtx ctx;
      ctx.tape = tape;
      ctx.training = false;
      return ops::sum_all(tape, fwd(ctx));
    };
    CHECK(gradient_check(f, leaves, 1e-5) < 1e-4);
  };

  std::vector<TensorPtr> leaves;
  sa.collect(leaves);
  leaves.push_back(x_in);
  check_op([&](EvalCtx& ctx) { return sa.forward(ctx, x_in, nullptr); },
           leaves);

  leaves.clear();
  ga.collect(leaves);
  leaves.push_back(x_d);
  leaves.push_back(y);
  check_op([&](EvalCtx& ctx) { return ga.forward(ctx, x_d, y, nullptr); },
           leaves);

  leaves.clear();
  ffn.collect(leaves);
  leaves.push_back(x_in);
  check_op([&](EvalCtx& ctx) { return ffn.forward(ctx, x_in); }, leaves);

  leaves.clear();
  rsa.collect(leaves);
  leaves.push_back(x_d);
  check_op([&](EvalCtx& ctx) { return rsa.forward(ctx, x_d, rel, nullptr); },
           leaves);
}

TEST_CASE("cloned ops reproduce forward output bitwise") {
  Rng rng(179);
  const int d = 8;
  RsaOp rsa(6, d, 2, 4, rng);
  auto x = random_tensor(rng, {3, 6});
  auto rel = random_tensor(rng, {9, 4});
  auto clone = rsa.clone();
  auto ctx = eval_ctx(nullptr);
  BlockInputs in;
  in.x = x;
  in.relation = rel;
  auto a = rsa.forward(ctx, in);
  auto b = clone->forward(ctx, in);
  CHECK(clone->kind() == OperationKind::RSA);
  for (std::size_t i = 0; i < a->size(); ++i)
    CHECK(a->data()[i] == b->data()[i]);
}
