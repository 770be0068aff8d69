#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "tk/adam.hpp"
#include "tk/checkpoint.hpp"
#include "tk/grad_check.hpp"
#include "tk/ops.hpp"
#include "tk/params.hpp"

using namespace tk;
using M = Mat<double>;
using GD = Graph<double>;
using VD = Var<double>;

namespace {

M random_mat(Index r, Index c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  M m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

// Keeps values away from the relu kink so central differences stay valid.
M away_from_zero(M m) {
  for (Index i = 0; i < m.size(); ++i) {
    if (std::abs(m.data()[i]) < 0.05) m.data()[i] = m.data()[i] < 0 ? -0.1 : 0.1;
  }
  return m;
}

// Scalarizes any op output with fixed random weights so every output
// element contributes a distinct partial derivative.
VD probe_sum(GD& g, VD y, unsigned seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, g.constant(random_mat(y.rows(), y.cols(), rng))));
}

double check_unary(const std::function<VD(GD&, VD)>& op, M x) {
  Tensor<double> t(x);
  return grad_check<double>([&](GD& g, VD v) { return probe_sum(g, op(g, v), 11); }, t, 1e-6);
}

}  // namespace

TEST_CASE("matmul hand arithmetic") {
  GD g;
  M a(2, 2);
  a << 1, 2, 3, 4;
  M b(2, 1);
  b << 1, 1;
  VD y = matmul(g.constant(a), g.constant(b));
  CHECK(y.rows() == 2);
  CHECK(y.value()(0, 0) == 3.0);
  CHECK(y.value()(1, 0) == 7.0);
}

TEST_CASE("log_softmax of equal logits is -ln 3") {
  GD g;
  VD y = log_softmax(g.constant(M::Zero(1, 3)), 1);
  for (Index i = 0; i < 3; ++i) CHECK(y.value()(0, i) == doctest::Approx(-std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("embedding lookup returns the addressed rows in order") {
  std::mt19937_64 rng(3);
  M table = random_mat(5, 2, rng);
  GD g;
  const int ids[] = {4, 0};
  VD y = embedding_lookup(g.constant(table), std::span<const int>(ids));
  CHECK(y.value().row(0) == table.row(4));
  CHECK(y.value().row(1) == table.row(0));
}

TEST_CASE("embedding lookup rejects ids outside the table") {
  GD g;
  const int ids[] = {5};
  CHECK_THROWS_AS(embedding_lookup(g.constant(M::Zero(5, 2)), std::span<const int>(ids)), IndexError);
  const int neg[] = {-1};
  CHECK_THROWS_AS(embedding_lookup(g.constant(M::Zero(5, 2)), std::span<const int>(neg)), IndexError);
}

TEST_CASE("shape mismatch names both shapes") {
  GD g;
  try {
    matmul(g.constant(M::Zero(2, 3)), g.constant(M::Zero(2, 3)));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(g.constant(M::Zero(2, 3)), g.constant(M::Zero(3, 2))), DimensionError);
  CHECK_THROWS_AS(add_bias(g.constant(M::Zero(2, 3)), g.constant(M::Zero(1, 2))), DimensionError);
  CHECK_THROWS_AS(mul(g.constant(M::Zero(2, 3)), g.constant(M::Zero(2, 2))), DimensionError);
  CHECK_THROWS_AS(concat<double>({g.constant(M::Zero(2, 3)), g.constant(M::Zero(3, 3))}, 1), DimensionError);
  CHECK_THROWS_AS(weighted_sum(g.constant(M::Zero(1, 3)), g.constant(M::Zero(2, 4))), DimensionError);
}

TEST_CASE("backward of sum of squares") {
  Tensor<double> x = Tensor<double>::from_values({3}, {1, 2, 3}, true);
  GD g;
  VD v = g.param(x);
  g.backward(sum(mul(v, v)));
  REQUIRE(x.has_grad());
  CHECK(x.grad()(0, 0) == 2.0);
  CHECK(x.grad()(0, 1) == 4.0);
  CHECK(x.grad()(0, 2) == 6.0);
}

TEST_CASE("gradient of one log_softmax entry sums to zero") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> x(random_mat(1, 6, rng, -3, 3), true);
    GD g;
    g.backward(pick(log_softmax(g.param(x), 1), 0, trial % 6));
    CHECK(std::abs(x.grad().sum()) < 1e-12);
  }
}

TEST_CASE("non-scalar loss is a contract error") {
  Tensor<double> x(M::Ones(2, 2), true);
  GD g;
  CHECK_THROWS_AS(g.backward(g.param(x)), ContractError);
}

TEST_CASE("unreached trainable leaves still receive a gradient") {
  Tensor<double> used(M::Ones(1, 2), true), unused(M::Ones(1, 2), true);
  GD g;
  VD a = g.param(used);
  g.param(unused);
  g.backward(sum(a));
  CHECK(unused.has_grad());
  CHECK(unused.grad().isZero());
}

TEST_CASE("three-layer perceptron matches finite differences") {
  std::mt19937_64 rng(17);
  std::vector<Tensor<double>> ps;
  ps.emplace_back(random_mat(4, 6, rng), true);
  ps.emplace_back(random_mat(1, 6, rng), true);
  ps.emplace_back(random_mat(6, 5, rng), true);
  ps.emplace_back(random_mat(1, 5, rng), true);
  ps.emplace_back(random_mat(5, 3, rng), true);
  const M x = random_mat(7, 4, rng);
  ParamLoss<double> f = [&](GD& g) {
    VD h = tanh(add_bias(matmul(g.constant(x), g.param(ps[0])), g.param(ps[1])));
    h = tanh(add_bias(matmul(h, g.param(ps[2])), g.param(ps[3])));
    VD out = log_softmax(matmul(h, g.param(ps[4])), 1);
    return scale(sum(pick(out, 0, 1)), -1.0);
  };
  std::vector<Tensor<double>*> ptrs;
  for (auto& p : ps) ptrs.push_back(&p);
  CHECK(grad_check_params<double>(f, ptrs, 1e-6) < 1e-5);
}

TEST_CASE("every primitive passes a finite-difference check") {
  std::mt19937_64 rng(23);
  const M a = random_mat(3, 4, rng);
  const M b = random_mat(4, 2, rng);
  const M c = random_mat(3, 4, rng);
  const M row = random_mat(1, 4, rng);
  const double tol = 1e-6;

  CHECK(check_unary([&](GD& g, VD x) { return matmul(x, g.constant(b)); }, a) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return matmul(g.constant(c.transpose()), x); }, a) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return add(x, g.constant(c)); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return scale(x, -2.5); }, a) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return add_bias(g.constant(c), x); }, row) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return mul(x, g.constant(c)); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return mul(x, x); }, a) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return concat<double>({x, g.constant(c)}, 0); }, a) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return concat<double>({g.constant(c), x}, 1); }, a) < tol);
  const int ids[] = {2, 0, 2};
  CHECK(check_unary([&](GD&, VD x) { return embedding_lookup(x, std::span<const int>(ids)); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return gather_rows(x, std::span<const int>(ids)); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return transpose(x); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return log_softmax(x, 1); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return log_softmax(x, 0); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return softmax(x, 1); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return softmax(x, 0); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return relu(x); }, away_from_zero(a)) < tol);
  CHECK(check_unary([&](GD&, VD x) { return tanh(x); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return sum(x); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return mean(x); }, a) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return weighted_sum(softmax(x, 1), g.constant(c.transpose())); },
                    random_mat(1, 4, rng)) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return weighted_sum(g.constant(M::Constant(1, 3, 0.3)), x); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return pick(x, 1, 2); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return slice_rows(x, 1, 2); }, a) < tol);
  CHECK(check_unary([&](GD&, VD x) { return stack_frames(x, 2); }, random_mat(5, 3, rng)) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return outer_add(x, g.constant(c)); }, a) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return outer_add(g.constant(c), x); }, a) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return layer_norm(x, g.constant(row), g.constant(row)); }, a) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return layer_norm(g.constant(a), x, g.constant(row)); }, row) < tol);
  CHECK(check_unary([&](GD& g, VD x) { return layer_norm(g.constant(a), g.constant(row), x); }, row) < tol);
}

TEST_CASE("softmax rows are distributions") {
  std::mt19937_64 rng(29);
  GD g;
  VD y = softmax(g.constant(random_mat(6, 9, rng, -20, 20)), 1);
  for (Index r = 0; r < 6; ++r) {
    CHECK(y.value().row(r).minCoeff() >= 0.0);
    CHECK(std::abs(y.value().row(r).sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("backward is bit-reproducible") {
  std::mt19937_64 rng(31);
  const M w0 = random_mat(5, 5, rng);
  const M x = random_mat(4, 5, rng);
  auto run = [&]() {
    Tensor<double> w(w0, true);
    GD g;
    VD h = softmax(matmul(g.constant(x), g.param(w)), 1);
    g.backward(sum(mul(h, tanh(matmul(h, g.param(w))))));
    return w.grad();
  };
  CHECK(run() == run());
}

TEST_CASE("grad_check on a polynomial is exact to rounding") {
  std::mt19937_64 rng(37);
  Tensor<double> x(random_mat(1, 6, rng));
  const double err = grad_check<double>([](GD&, VD v) { return sum(mul(v, v)); }, x, 1e-4);
  CHECK(err < 1e-7);
}

TEST_CASE("grad_check guards") {
  Tensor<double> x(M::Ones(1, 2));
  CHECK_THROWS_AS(grad_check<double>([](GD&, VD v) { return sum(v); }, x, 0.0), NumericError);
  CHECK_THROWS_AS(grad_check<double>(
                      [](GD&, VD v) { return scale(sum(v), std::numeric_limits<double>::infinity()); }, x, 1e-6),
                  NumericError);
}

TEST_CASE("adam step one moves by the learning rate") {
  Tensor<double> p = Tensor<double>::from_values({1}, {0.5}, true);
  p.zero_grad();
  p.grad()(0, 0) = 1.0;
  AdamState<double> st;
  std::vector<Tensor<double>*> ps{&p};
  adam_step(ps, st);
  CHECK(p.values()(0, 0) == doctest::Approx(0.49).epsilon(1e-9));
  CHECK(p.grad()(0, 0) == 0.0);
  CHECK(st.step == 1);
}

TEST_CASE("adam with zero gradient keeps the parameter and decays moments") {
  Tensor<double> p = Tensor<double>::from_values({1}, {0.5}, true);
  AdamState<double> st;
  std::vector<Tensor<double>*> ps{&p};
  p.zero_grad();
  p.grad()(0, 0) = 2.0;
  adam_step(ps, st);
  const double after_first = p.values()(0, 0);
  const double m1 = st.m[0](0, 0), v1 = st.v[0](0, 0);
  adam_step(ps, st);  // grad was zeroed by the first step
  CHECK(st.m[0](0, 0) == doctest::Approx(0.9 * m1));
  CHECK(st.v[0](0, 0) == doctest::Approx(0.98 * v1));
  Tensor<double> q = Tensor<double>::from_values({1}, {0.5}, true);
  q.zero_grad();
  AdamState<double> fresh;
  std::vector<Tensor<double>*> qs{&q};
  adam_step(qs, fresh);
  CHECK(q.values()(0, 0) == 0.5);
  CHECK(after_first < 0.5);
}

TEST_CASE("adam with constant gradient moves monotonically downhill") {
  Tensor<double> p = Tensor<double>::from_values({2}, {0.0, 0.0}, true);
  AdamState<double> st;
  std::vector<Tensor<double>*> ps{&p};
  double prev0 = 0, prev1 = 0;
  for (int i = 0; i < 2; ++i) {
    p.zero_grad();
    p.grad()(0, 0) = 1.0;
    p.grad()(0, 1) = -3.0;
    adam_step(ps, st);
    CHECK(p.values()(0, 0) < prev0);
    CHECK(p.values()(0, 1) > prev1);
    prev0 = p.values()(0, 0);
    prev1 = p.values()(0, 1);
  }
  CHECK(st.step == 2);
}

TEST_CASE("adam without gradients is a contract error") {
  Tensor<double> p(M::Ones(1, 1), true);
  AdamState<double> st;
  std::vector<Tensor<double>*> ps{&p};
  CHECK_THROWS_AS(adam_step(ps, st), ContractError);
}

TEST_CASE("tensor invariants") {
  Tensor<double> t(Shape{2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.values().rows() == 2);
  CHECK_THROWS_AS(Tensor<double>::from_values({2, 2}, {1, 2, 3}), DimensionError);
  t.zero_grad();
  CHECK(t.grad().size() == t.size());
}

TEST_CASE("checkpoint round trip and guards") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "tk_ckpt_test";
  fs::create_directories(dir);
  std::mt19937_64 rng(41);
  ParameterStore<double> a;
  a.add_uniform("enc.w", {3, 4}, 3, rng);
  a.add_uniform("bias", {4}, 1, rng);
  write_checkpoint(dir / "a.ckpt", a);

  ParameterStore<double> b;
  b.add("enc.w", {3, 4});
  b.add("bias", {4});
  load_checkpoint(dir / "a.ckpt", b);
  ParameterStore<double> rounded = a;
  round_to_checkpoint_precision(rounded);
  for (const auto& [name, t] : rounded.entries()) CHECK(b.at(name).values() == t.values());

  std::ifstream is(dir / "a.ckpt", std::ios::binary);
  std::string header;
  std::getline(is, header);
  CHECK(header == kCheckpointVersion);

  ParameterStore<double> wrong;
  wrong.add("enc.w", {4, 3});
  wrong.add("bias", {4});
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt", wrong), SchemaError);
  ParameterStore<double> missing;
  missing.add("enc.w", {3, 4});
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt", missing), SchemaError);

  const auto full = fs::file_size(dir / "a.ckpt");
  fs::resize_file(dir / "a.ckpt", full - 4);
  CHECK_THROWS_AS(read_checkpoint(dir / "a.ckpt"), IntegrityError);
  std::ofstream(dir / "bad.ckpt") << "not-a-checkpoint\n";
  CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), SchemaError);
  fs::remove_all(dir);
}
