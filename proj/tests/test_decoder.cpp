#include <cmath>
#include <cstring>

#include <doctest.h>

#include "palx/decoder.hpp"
#include "palx/positional.hpp"
#include "test_support.hpp"

using namespace palx;

namespace {

// Synthetic grid: random content plus a real positional field.
FeatureGrid toy_grid(int gh, int gw, int d, Rng& rng, bool rg = false) {
  FeatureGrid g;
  g.features = testsup::random_tensor({gh * gw, d}, rng, -1.0, 1.0, rg);
  g.pos = reshape(image_positional_encoding(gh, gw, d), {gh * gw, d});
  g.gh = gh;
  g.gw = gw;
  return g;
}

DecoderConfig tiny_config(int vocab = 7, int d = 16, int layers = 2, int heads = 2) {
  DecoderConfig cfg;
  cfg.vocab = vocab;
  cfg.d_model = d;
  cfg.num_layers = layers;
  cfg.num_heads = heads;
  cfg.d_ff = 24;
  cfg.dropout = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("causal mask is the inclusive lower triangle") {
  CHECK(causal_mask(1) == std::vector<uint8_t>{1});
  std::vector<uint8_t> m3 = causal_mask(3);
  CHECK(m3 == std::vector<uint8_t>{1, 0, 0, 1, 1, 0, 1, 1, 1});
  for (int L : {2, 5, 9}) {
    std::vector<uint8_t> m = causal_mask(L);
    for (int i = 0; i < L; ++i) {
      int row = 0;
      for (int j = 0; j < L; ++j) row += m[i * L + j];
      CHECK(row == i + 1);
    }
  }
  CHECK_THROWS_AS(causal_mask(0), ContractError);
}

TEST_CASE("scaled dot attention matches its closed form") {
  Rng rng(3);

  // single key: output is that value row regardless of the query
  Tensor q1 = testsup::random_tensor({3, 4}, rng);
  Tensor k1 = testsup::random_tensor({1, 4}, rng);
  Tensor v1 = testsup::random_tensor({1, 5}, rng);
  Tensor out1 = scaled_dot_attention(q1, k1, v1);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 5; ++c) CHECK(out1.at({r, c}) == v1.at({0, c}));

  // zero queries: uniform weights, each row the mean of V
  Tensor q0(Shape{2, 4}, 0.0);
  Tensor k = testsup::random_tensor({3, 4}, rng);
  Tensor v = testsup::random_tensor({3, 5}, rng);
  Tensor out0 = scaled_dot_attention(q0, k, v);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 5; ++c) {
      double m = (v.at({0, c}) + v.at({1, c}) + v.at({2, c})) / 3.0;
      CHECK(out0.at({r, c}) == doctest::Approx(m).epsilon(1e-12));
    }

  // random case against a direct evaluation
  Tensor q = testsup::random_tensor({3, 4}, rng);
  Tensor w;
  Tensor out = scaled_dot_attention(q, k, v, nullptr, &w);
  for (int r = 0; r < 3; ++r) {
    double denom = 0.0;
    std::vector<double> e(3);
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) s += q.at({r, c}) * k.at({j, c});
      e[j] = std::exp(s / 2.0);  // sqrt(d_k) = 2
      denom += e[j];
    }
    double wsum = 0.0;
    for (int j = 0; j < 3; ++j) wsum += w.at({r, j});
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
    for (int c = 0; c < 5; ++c) {
      double expect = 0.0;
      for (int j = 0; j < 3; ++j) expect += e[j] / denom * v.at({j, c});
      CHECK(out.at({r, c}) == doctest::Approx(expect).epsilon(1e-10));
    }
  }

  std::vector<uint8_t> dead(9, 0);
  CHECK_THROWS_AS(scaled_dot_attention(q, k, v, &dead), ContractError);
  CHECK_THROWS_AS(scaled_dot_attention(testsup::random_tensor({3, 5}, rng), k, v),
                  DimensionError);
}

TEST_CASE("multi-head attention agrees with explicit per-head evaluation") {
  Rng rng(17);
  for (int heads : {2, 4}) {
    for (int trial = 0; trial < 10; ++trial) {
      int d = 8, Lq = 5, Lk = 6;
      MultiHead mh = make_multi_head(d, heads, rng);
      Tensor q = testsup::random_tensor({Lq, d}, rng);
      Tensor k = testsup::random_tensor({Lk, d}, rng);
      Tensor v = testsup::random_tensor({Lk, d}, rng);
      Tensor fused = multi_head_attention(mh, q, k, v);

      // reference: materialize each head's projection columns separately
      int dk = d / heads;
      std::vector<Tensor> head_outs;
      for (int i = 0; i < heads; ++i) {
        Tensor wq_i = slice(mh.wq, 1, i * dk, dk);
        Tensor wk_i = slice(mh.wk, 1, i * dk, dk);
        Tensor wv_i = slice(mh.wv, 1, i * dk, dk);
        head_outs.push_back(
            scaled_dot_attention(matmul(q, wq_i), matmul(k, wk_i), matmul(v, wv_i)));
      }
      Tensor ref = matmul(concat(head_outs, 1), mh.wo);
      CHECK(testsup::max_abs_diff(fused, ref) <= 1e-10);
    }
  }
}

TEST_CASE("single-head attention reduces to projected scaled dot attention") {
  Rng rng(29);
  int d = 6;
  MultiHead mh = make_multi_head(d, 1, rng);
  Tensor q = testsup::random_tensor({4, d}, rng);
  Tensor k = testsup::random_tensor({3, d}, rng);
  Tensor v = testsup::random_tensor({3, d}, rng);
  Tensor fused = multi_head_attention(mh, q, k, v);
  Tensor ref = matmul(
      scaled_dot_attention(matmul(q, mh.wq), matmul(k, mh.wk), matmul(v, mh.wv)), mh.wo);
  CHECK(testsup::max_abs_diff(fused, ref) <= 1e-12);

  mh.wo.fill_(0.0);
  Tensor zero = multi_head_attention(mh, q, k, v);
  for (int i = 0; i < zero.size(); ++i) CHECK(zero.data()[i] == 0.0);

  CHECK_THROWS_AS(make_multi_head(6, 4, rng), ConfigError);
}

TEST_CASE("ffn is position-wise") {
  Rng rng(31);
  int d = 6, dff = 9;
  Tensor w1 = testsup::random_tensor({d, dff}, rng);
  Tensor b1 = testsup::random_tensor({dff}, rng);
  Tensor w2 = testsup::random_tensor({dff, d}, rng);
  Tensor b2 = testsup::random_tensor({d}, rng);

  Tensor x = testsup::random_tensor({4, d}, rng);
  Tensor y = ffn(x, w1, b1, w2, b2);

  // zero weights: bias broadcast
  Tensor z1(Shape{d, dff}, 0.0), z2(Shape{dff, d}, 0.0);
  Tensor yb = ffn(x, z1, b1, z2, b2);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < d; ++c) CHECK(yb.at({r, c}) == b2.at({c}));

  // all-negative pre-activations die in the ReLU
  Tensor neg_b1(Shape{dff}, -100.0);
  Tensor xsmall = testsup::random_tensor({4, d}, rng, -0.1, 0.1);
  Tensor yk = ffn(xsmall, w1, neg_b1, w2, b2);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < d; ++c) CHECK(yk.at({r, c}) == b2.at({c}));

  // permuting rows permutes outputs identically
  std::vector<double> perm_data;
  for (int r : {2, 0, 3, 1})
    for (int c = 0; c < d; ++c) perm_data.push_back(x.at({r, c}));
  Tensor yp = ffn(Tensor({4, d}, perm_data), w1, b1, w2, b2);
  int rows[] = {2, 0, 3, 1};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < d; ++c) CHECK(yp.at({r, c}) == y.at({rows[r], c}));
}

TEST_CASE("decoder logits have the right shape and reject empty input") {
  Rng rng(41);
  DecoderConfig cfg = tiny_config();
  Decoder dec(cfg, rng);
  FeatureGrid grid = toy_grid(2, 3, cfg.d_model, rng);
  for (int L : {1, 2, 5}) {
    std::vector<int> ids(L);
    for (int i = 0; i < L; ++i) ids[i] = i % cfg.vocab;
    DecoderOut out = dec.forward(grid, ids);
    CHECK(out.logits.shape() == Shape{L, cfg.vocab});
    CHECK(out.features.shape() == Shape{L, cfg.d_model});
  }
  CHECK_THROWS_AS(dec.forward(grid, {}), ContractError);

  FeatureGrid wrong = toy_grid(2, 3, 8, rng);
  CHECK_THROWS_AS(dec.forward(wrong, {0, 1}), DimensionError);
}

TEST_CASE("future-token mutations leave earlier logits bit-identical") {
  Rng rng(43);
  DecoderConfig cfg = tiny_config(9, 16, 2, 4);
  Decoder dec(cfg, rng);
  FeatureGrid grid = toy_grid(2, 4, cfg.d_model, rng);
  Rng pick(97);
  for (int L = 2; L <= 8; ++L) {
    std::vector<int> ids(L);
    for (int& id : ids) id = static_cast<int>(pick.uniform_int(cfg.vocab));
    DecoderOut base = dec.forward(grid, ids);
    for (int t = 0; t + 1 < L; ++t) {
      std::vector<int> mutated = ids;
      for (int j = t + 1; j < L; ++j) mutated[j] = (mutated[j] + 1 + t) % cfg.vocab;
      DecoderOut out = dec.forward(grid, mutated);
      size_t row_bytes = sizeof(double) * cfg.vocab;
      CHECK(std::memcmp(out.logits.data() + static_cast<size_t>(t) * cfg.vocab,
                        base.logits.data() + static_cast<size_t>(t) * cfg.vocab,
                        row_bytes) == 0);
    }
  }
}

TEST_CASE("attention trace rows are normalized and zero at masked cells") {
  Rng rng(47);
  DecoderConfig cfg = tiny_config(7, 16, 2, 2);
  Decoder dec(cfg, rng);
  FeatureGrid grid = toy_grid(2, 3, cfg.d_model, rng);
  std::vector<int> ids{1, 2, 3, 4};
  AttentionTrace trace;
  dec.forward(grid, ids, false, nullptr, &trace);
  REQUIRE(trace.self_heads.size() == 4);   // layers x heads
  REQUIRE(trace.cross_heads.size() == 4);
  int L = 4;
  for (const Tensor& w : trace.self_heads) {
    REQUIRE(w.shape() == Shape{L, L});
    for (int i = 0; i < L; ++i) {
      double s = 0.0;
      for (int j = 0; j < L; ++j) {
        if (j > i) CHECK(w.at({i, j}) == 0.0);
        s += w.at({i, j});
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  for (const Tensor& w : trace.cross_heads) {
    REQUIRE(w.shape() == Shape{L, 6});
    for (int i = 0; i < L; ++i) {
      double s = 0.0;
      for (int j = 0; j < 6; ++j) s += w.at({i, j});
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("prefix decoding reproduces teacher-forced rows") {
  Rng rng(53);
  DecoderConfig cfg = tiny_config(8, 16, 2, 4);
  Decoder dec(cfg, rng);
  FeatureGrid grid = toy_grid(2, 4, cfg.d_model, rng);
  std::vector<int> ids{1, 5, 2, 7, 0, 3};
  DecoderOut full = dec.forward(grid, ids);
  for (size_t l = 1; l <= ids.size(); ++l) {
    std::vector<int> prefix(ids.begin(), ids.begin() + l);
    DecoderOut step = dec.forward(grid, prefix);
    for (int c = 0; c < cfg.vocab; ++c) {
      double a = step.logits.at({static_cast<int>(l) - 1, c});
      double b = full.logits.at({static_cast<int>(l) - 1, c});
      CHECK(std::abs(a - b) <= 1e-10);
    }
  }
}

TEST_CASE("decoder gradients pass finite differences at d_model=16, L=3") {
  Rng rng(59);
  DecoderConfig cfg = tiny_config(6, 16, 2, 2);
  Decoder dec(cfg, rng);
  FeatureGrid grid = toy_grid(1, 4, cfg.d_model, rng, true);
  std::vector<int> ids{1, 4, 2};
  std::vector<int> targets{4, 2, 2};

  std::vector<Tensor> params{grid.features};
  for (auto& [name, t] : dec.named_params()) params.push_back(t);
  auto loss = [&]() { return cross_entropy(dec.forward(grid, ids).logits, targets); };
  testsup::check_gradients(loss, params, rng, 3);
}

TEST_CASE("decoder dropout is deterministic given the rng and off at eval") {
  Rng rng(61);
  DecoderConfig cfg = tiny_config(7, 16, 1, 2);
  cfg.dropout = 0.3;
  Decoder dec(cfg, rng);
  FeatureGrid grid = toy_grid(2, 3, cfg.d_model, rng);
  std::vector<int> ids{1, 2, 3};

  Rng d1(1234), d2(1234);
  Tensor a = dec.forward(grid, ids, true, &d1).logits;
  Tensor b = dec.forward(grid, ids, true, &d2).logits;
  CHECK(testsup::max_abs_diff(a, b) == 0.0);

  Tensor e1 = dec.forward(grid, ids).logits;
  Tensor e2 = dec.forward(grid, ids).logits;
  CHECK(testsup::max_abs_diff(e1, e2) == 0.0);

  CHECK_THROWS_AS(dec.forward(grid, ids, true, nullptr), ContractError);
}

TEST_CASE("decoder state survives a save/load round-trip") {
  Rng rng(67);
  DecoderConfig cfg = tiny_config();
  Decoder dec(cfg, rng);
  FeatureGrid grid = toy_grid(2, 3, cfg.d_model, rng);
  std::vector<int> ids{1, 2, 3};
  Tensor before = dec.forward(grid, ids).logits;

  NamedTensors saved;
  dec.save_state(saved, "dec/");
  Rng rng2(4242);
  Decoder other(cfg, rng2);
  other.load_state(saved, "dec/");
  Tensor after = other.forward(grid, ids).logits;
  CHECK(testsup::max_abs_diff(before, after) == 0.0);
}
