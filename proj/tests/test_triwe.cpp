#include <cmath>
#include <random>

#include <doctest.h>

#include "fscil/rng.hpp"
#include "fscil/triwe.hpp"

using namespace fscil;

namespace {

Tensor random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

// Brute-force per-column reference of the three-range interpolation. Uses the
// same association order as the composed graph, so it must match bitwise.
Tensor compose_reference(const Tensor& base, const Tensor& old, const Tensor& all, double a1,
                         double a2) {
  AlphaBarValues v = normalize_alphas(a1, a2);
  std::size_t d = base.dim(0), nb = base.dim(1), np = old.dim(1), nt = all.dim(1);
  Tensor out({d, nt});
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t n = 0; n < nt; ++n) {
      if (n < nb) {
        out(r, n) = (v.a1 * base(r, n) + v.a2 * old(r, n)) + v.a3 * all(r, n);
      } else if (n < np) {
        out(r, n) = v.a4 * old(r, n) + v.a5 * all(r, n);
      } else {
        out(r, n) = all(r, n);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("alpha normalization tabulated values") {
  AlphaBarValues v = normalize_alphas(1.0, 1.0);
  CHECK(v.a1 == 1.0 / 3.0);
  CHECK(v.a2 == 1.0 / 3.0);
  CHECK(v.a3 == 1.0 / 3.0);
  CHECK(v.a4 == 0.5);
  CHECK(v.a5 == 0.5);

  v = normalize_alphas(0.0, 0.0);
  CHECK(v.a1 == 0.0);
  CHECK(v.a2 == 0.0);
  CHECK(v.a3 == 1.0);
  CHECK(v.a4 == 0.0);
  CHECK(v.a5 == 1.0);

  v = normalize_alphas(2.0, 0.5);
  CHECK(v.a1 == 2.0 / 3.5);
  CHECK(v.a2 == 0.5 / 3.5);
  CHECK(v.a3 == 1.0 / 3.5);
  CHECK(v.a4 == 0.5 / 1.5);
  CHECK(v.a5 == 1.0 / 1.5);

  CHECK_THROWS_AS(normalize_alphas(-0.1, 0.0), ContractViolation);
}

TEST_CASE("alpha normalization sums to one on random inputs") {
  auto rng = make_rng(41);
  std::uniform_real_distribution<double> uni(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    AlphaBarValues v = normalize_alphas(uni(rng), uni(rng));
    CHECK(std::abs(v.a1 + v.a2 + v.a3 - 1.0) <= 1e-12);
    CHECK(std::abs(v.a4 + v.a5 - 1.0) <= 1e-12);
  }
}

TEST_CASE("tape alpha normalization matches the value form bitwise") {
  auto rng = make_rng(42);
  std::uniform_real_distribution<double> uni(0.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    double a1 = uni(rng), a2 = uni(rng);
    AlphaBarValues v = normalize_alphas(a1, a2);
    Tape tape;
    AlphaBars bars = normalize_alphas(tape, tape.constant(Tensor::scalar(a1)),
                                      tape.constant(Tensor::scalar(a2)));
    CHECK(tape.val(bars.a1)[0] == v.a1);
    CHECK(tape.val(bars.a2)[0] == v.a2);
    CHECK(tape.val(bars.a3)[0] == v.a3);
    CHECK(tape.val(bars.a4)[0] == v.a4);
    CHECK(tape.val(bars.a5)[0] == v.a5);
  }
}

TEST_CASE("head construction validates bank shapes") {
  Tensor base({2, 3}), old({2, 4}), all({2, 6});
  AlphaSpec fixed1{false, 1.0};
  CHECK_NOTHROW(TriWeHead(base, old, all, fixed1, fixed1));
  CHECK_THROWS_AS(TriWeHead(Tensor({2, 5}), old, all, fixed1, fixed1), ConfigError);
  CHECK_THROWS_AS(TriWeHead(base, Tensor({3, 4}), all, fixed1, fixed1), ConfigError);
  CHECK_THROWS_AS(TriWeHead(base, old, Tensor({2, 3}), fixed1, fixed1), ConfigError);
  CHECK_THROWS_AS(TriWeHead(base, old, all, AlphaSpec{true, 0.0}, fixed1), ConfigError);
  CHECK_THROWS_AS(TriWeHead(base, old, all, AlphaSpec{false, -1.0}, fixed1), ConfigError);
}

TEST_CASE("bank groups and parameter list") {
  Tensor base({2, 2}), old({2, 3}), all({2, 4});
  TriWeHead fixed(base, old, all, AlphaSpec{false, 0.5}, AlphaSpec{false, 0.5});
  CHECK(fixed.params().size() == 3);
  TriWeHead learn(base, old, all, AlphaSpec{true, 1.0}, AlphaSpec{true, 1.0});
  auto params = learn.params();
  REQUIRE(params.size() == 5);
  CHECK(params[0]->group == ParamGroup::frozen);
  CHECK(params[1]->group == ParamGroup::slow);
  CHECK(params[2]->group == ParamGroup::fast);
  CHECK(params[3]->group == ParamGroup::slow);
  CHECK(params[4]->group == ParamGroup::slow);
  CHECK(learn.alpha1_value() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(learn.alpha2_value() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("compose with unit alphas averages the three banks on the base range") {
  Tensor base({2, 1}, {3.0, -6.0});
  Tensor old({2, 2}, {6.0, 1.0, 9.0, 2.0});
  Tensor all({2, 3}, {0.0, 5.0, 7.0, 3.0, 4.0, 8.0});
  TriWeHead head(base, old, all, AlphaSpec{false, 1.0}, AlphaSpec{false, 1.0});
  Tensor w = head.compose_values();
  REQUIRE(w.shape() == std::vector<std::size_t>{2, 3});
  double third = 1.0 / 3.0;
  CHECK(w(0, 0) == (third * 3.0 + third * 6.0) + third * 0.0);
  CHECK(w(1, 0) == (third * -6.0 + third * 9.0) + third * 3.0);
  CHECK(w(0, 1) == 0.5 * 1.0 + 0.5 * 5.0);  // middle range: old and all
  CHECK(w(1, 1) == 0.5 * 2.0 + 0.5 * 4.0);
  CHECK(w(0, 2) == 7.0);  // new range: all bank verbatim
  CHECK(w(1, 2) == 8.0);
}

TEST_CASE("compose matches the per-column reference on random heads") {
  auto rng = make_rng(1234);
  std::uniform_int_distribution<std::size_t> dims(1, 6);
  std::uniform_real_distribution<double> uni(0.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    std::size_t d = dims(rng) + 1;
    std::size_t nb = dims(rng);
    std::size_t np = nb + dims(rng) % 3;
    std::size_t nt = np + dims(rng) % 3;
    Tensor base = random_matrix(rng, d, nb);
    Tensor old = random_matrix(rng, d, np);
    Tensor all = random_matrix(rng, d, nt);
    double a1 = uni(rng), a2 = uni(rng);
    TriWeHead head(base, old, all, AlphaSpec{false, a1}, AlphaSpec{false, a2});
    CHECK(bit_equal(head.compose_values(), compose_reference(base, old, all, a1, a2)));
  }
}

TEST_CASE("tape compose equals compose_values bitwise for learnable alphas") {
  auto rng = make_rng(7);
  Tensor base = random_matrix(rng, 3, 2);
  Tensor old = random_matrix(rng, 3, 4);
  Tensor all = random_matrix(rng, 3, 5);
  TriWeHead head(base, old, all, AlphaSpec{true, 0.8}, AlphaSpec{true, 1.7});
  Tape tape;
  CHECK(bit_equal(tape.val(head.compose(tape)), head.compose_values()));
  CHECK(bit_equal(head.compose_values(),
                  compose_reference(base, old, all, head.alpha1_value(), head.alpha2_value())));
}

TEST_CASE("deploy exposes the composed weights") {
  auto rng = make_rng(8);
  Tensor base = random_matrix(rng, 2, 2);
  Tensor old = random_matrix(rng, 2, 2);
  Tensor all = random_matrix(rng, 2, 3);
  TriWeHead head(base, old, all, AlphaSpec{true, 1.0}, AlphaSpec{false, 2.0});
  CosineHead deployed = head.deploy(16.0);
  CHECK(deployed.scale == 16.0);
  CHECK(bit_equal(deployed.weight, head.compose_values()));
  CHECK(deployed.num_classes() == 3);
}

TEST_CASE("gradients never reach the frozen base bank") {
  auto rng = make_rng(9);
  Tensor base = random_matrix(rng, 3, 2);
  Tensor old = random_matrix(rng, 3, 3);
  Tensor all = random_matrix(rng, 3, 4);
  TriWeHead head(base, old, all, AlphaSpec{true, 1.0}, AlphaSpec{true, 1.0});
  Tape tape;
  VarId composed = head.compose(tape);
  tape.backward(tape.sum(tape.mul(composed, composed)));
  for (std::size_t i = 0; i < head.base_bank().grad.size(); ++i) {
    CHECK(head.base_bank().grad[i] == 0.0);
  }
  double old_norm = 0.0, all_norm = 0.0;
  for (std::size_t i = 0; i < head.old_bank().grad.size(); ++i) {
    old_norm += std::abs(head.old_bank().grad[i]);
  }
  for (std::size_t i = 0; i < head.all_bank().grad.size(); ++i) {
    all_norm += std::abs(head.all_bank().grad[i]);
  }
  CHECK(old_norm > 0.0);
  CHECK(all_norm > 0.0);
}

TEST_CASE("alpha gradients match finite differences through compose") {
  auto rng = make_rng(10);
  Tensor base = random_matrix(rng, 3, 2);
  Tensor old = random_matrix(rng, 3, 3);
  Tensor all = random_matrix(rng, 3, 4);
  Tensor probe = random_matrix(rng, 3, 4);
  TriWeHead head(base, old, all, AlphaSpec{true, 1.3}, AlphaSpec{true, 0.6});
  auto params = head.params();
  Parameter& a1_raw = *params[3];
  Parameter& a2_raw = *params[4];

  auto loss_value = [&]() {
    Tape t;
    return t.val(t.sum(t.mul(head.compose(t), t.constant(probe))))[0];
  };
  Tape tape;
  tape.backward(tape.sum(tape.mul(head.compose(tape), tape.constant(probe))));
  for (Parameter* p : {&a1_raw, &a2_raw}) {
    Tensor analytic = p->grad;
    Tensor numeric = finite_diff_grad(loss_value, *p);
    double tol = 1e-5 * std::max(std::abs(analytic[0]), std::abs(numeric[0])) + 1e-7;
    CHECK(std::abs(analytic[0] - numeric[0]) <= tol);
  }
}

TEST_CASE("first-session initialization pins the old scalar at zero") {
  auto rng = make_rng(11);
  Tensor base_head = random_matrix(rng, 4, 3);
  Tensor new_cols = random_matrix(rng, 4, 2);
  TriWeHead head =
      init_session(base_head, base_head, new_cols, 1, AlphaSpec{true, 1.0}, AlphaSpec{true, 1.0});
  CHECK(head.n_base() == 3);
  CHECK(head.n_prev() == 3);
  CHECK(head.n_total() == 5);
  CHECK_FALSE(head.alpha2_learnable());
  CHECK(head.alpha2_value() == 0.0);
  CHECK(head.alpha1_learnable());

  // All three banks coincide on the base range here, so the interpolation
  // must reproduce the base head (up to the softplus round trip of alpha1).
  Tensor w = head.compose_values();
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(w(r, c) == doctest::Approx(base_head(r, c)).epsilon(1e-9));
    }
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(w(r, 3 + c) == new_cols(r, c));
    }
  }
}

TEST_CASE("later sessions keep the old scalar learnable") {
  auto rng = make_rng(12);
  Tensor base_head = random_matrix(rng, 4, 3);
  Tensor prev = random_matrix(rng, 4, 5);
  Tensor new_cols = random_matrix(rng, 4, 2);
  TriWeHead head =
      init_session(prev, base_head, new_cols, 2, AlphaSpec{true, 1.0}, AlphaSpec{true, 1.0});
  CHECK(head.alpha2_learnable());
  CHECK(head.n_prev() == 5);
  CHECK(head.n_total() == 7);
  // The all bank starts as [previous | new columns].
  CHECK(head.all_bank().value(0, 0) == prev(0, 0));
  CHECK(head.all_bank().value(0, 5) == new_cols(0, 0));
}

TEST_CASE("session initialization input validation") {
  Tensor base_head({4, 3});
  Tensor prev({4, 5});
  Tensor new_cols({4, 2});
  AlphaSpec a{true, 1.0};
  CHECK_THROWS_AS(init_session(prev, base_head, new_cols, 0, a, a), ContractViolation);
  CHECK_THROWS_AS(init_session(Tensor({4, 2}), base_head, new_cols, 2, a, a), ConfigError);
  CHECK_THROWS_AS(init_session(prev, base_head, Tensor({3, 2}), 2, a, a), ConfigError);
  CHECK_THROWS_AS(init_session(Tensor({5, 5}), base_head, new_cols, 2, a, a), ConfigError);
}
