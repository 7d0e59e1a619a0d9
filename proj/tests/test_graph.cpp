#include <doctest.h>

#include "gradcheck.hpp"
#include "intentspan/graph.hpp"
#include "intentspan/layers.hpp"
#include "oracles.hpp"

using namespace intentspan;
using Matrix = Mat<double>;

namespace {

Matrix colvec(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("softmax matches the scalar oracle and sums to one") {
  Graph<double> g;
  int x = g.input(colvec({0.3, -1.2, 2.5, 0.0}));
  int p = g.softmax(x);

  auto expect = oracle::softmax({0.3, -1.2, 2.5, 0.0});
  for (int i = 0; i < 4; ++i) CHECK(g.value(p)(i, 0) == doctest::Approx(expect[i]).epsilon(1e-12));
  CHECK(g.value(p).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant") {
  Graph<double> g;
  int a = g.softmax(g.input(colvec({1.0, 2.0, 3.0})));
  int b = g.softmax(g.input(colvec({1001.0, 1002.0, 1003.0})));
  CHECK((g.value(a) - g.value(b)).norm() < 1e-12);
}

TEST_CASE("elementwise and matrix ops produce expected values") {
  Graph<double> g;
  Matrix a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  int na = g.input(a), nb = g.input(b);

  CHECK(g.value(g.add(na, nb))(1, 1) == 12);
  CHECK(g.value(g.sub(na, nb))(0, 0) == -4);
  CHECK(g.value(g.cmul(na, nb))(1, 0) == 21);
  CHECK(g.value(g.matmul(na, nb))(0, 0) == 19);
  CHECK(g.value(g.scale(na, 0.5))(1, 1) == 2);
  CHECK(g.value(g.transpose(na))(0, 1) == 3);
  CHECK(g.value(g.rows(na, 1, 1))(0, 1) == 4);
  CHECK(g.value(g.col(na, 1))(0, 0) == 2);
  CHECK(g.value(g.pick(g.col(na, 0), 1))(0, 0) == 3);

  int v = g.input(colvec({10, 20}));
  CHECK(g.value(g.broadcast_col(v, 3)).cols() == 3);
  CHECK(g.value(g.colwise_add(na, v))(1, 1) == 24);
  CHECK(g.value(g.vconcat({na, nb})).rows() == 4);
  CHECK(g.value(g.hconcat({na, nb})).cols() == 4);
}

TEST_CASE("log_clamped floors tiny probabilities") {
  Graph<double> g;
  int x = g.input(colvec({0.5, 0.0, 1e-30}));
  int y = g.log_clamped(x, 1e-12);
  CHECK(g.value(y)(0, 0) == doctest::Approx(std::log(0.5)));
  CHECK(g.value(y)(1, 0) == doctest::Approx(std::log(1e-12)));
  CHECK(g.value(y)(2, 0) == doctest::Approx(std::log(1e-12)));
}

TEST_CASE("gradients of primitive ops pass finite differences") {
  std::mt19937_64 rng(17);
  ParamStore<double> store;
  auto& A = store.create("A", 3, 3, InitKind::kGlorot, rng);
  auto& x = store.create("x", 3, 1, InitKind::kGlorot, rng);
  auto& b = store.create("b", 3, 1, InitKind::kGlorot, rng);

  auto build = [&](Graph<double>& g) {
    int na = g.param(A), nx = g.param(x), nb = g.param(b);
    int h = g.tanh(g.affine(na, nx, nb));
    int s = g.sigmoid(g.cmul(h, g.sub(nx, nb)));
    int p = g.softmax(g.vconcat({s, g.scale(nx, 0.5)}));
    int lp = g.log_clamped(p, 1e-12);
    int picked = g.add(g.pick(lp, 0), g.pick(lp, 4));
    return g.scale(picked, -1.0);
  };
  auto report = gradcheck::check(store, build);
  CHECK(report.max_rel_error < 1e-6);
  CHECK(report.checked == 9 + 3 + 3);
}

TEST_CASE("gradients flow through concat, slicing and broadcast") {
  std::mt19937_64 rng(3);
  ParamStore<double> store;
  auto& A = store.create("A", 2, 4, InitKind::kGlorot, rng);
  auto& v = store.create("v", 2, 1, InitKind::kGlorot, rng);

  auto build = [&](Graph<double>& g) {
    int na = g.param(A), nv = g.param(v);
    int wide = g.colwise_add(na, nv);            // 2x4
    int bc = g.broadcast_col(nv, 4);             // 2x4
    int joined = g.vconcat({wide, bc});          // 4x4
    int right = g.hconcat({g.col(joined, 0), g.col(joined, 3)});  // 4x2
    int flat = g.vconcat({g.col(right, 0), g.col(right, 1)});     // 8x1
    int top = g.rows(flat, 2, 4);
    int p = g.softmax(top);
    return g.scale(g.pick(g.log_clamped(p, 1e-12), 1), -1.0);
  };
  auto report = gradcheck::check(store, build);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("lstm step matches the scalar gate oracle") {
  std::mt19937_64 rng(11);
  ParamStore<double> store;
  auto cell = LstmCell<double>::create(store, "cell", 2, 2, rng);

  // Hand-set, asymmetric weights.
  Matrix W(8, 4);
  for (Eigen::Index r = 0; r < 8; ++r)
    for (Eigen::Index c = 0; c < 4; ++c) W(r, c) = 0.05 * double(r + 1) - 0.07 * double(c);
  Matrix b(8, 1);
  for (Eigen::Index r = 0; r < 8; ++r) b(r, 0) = 0.01 * double(r) - 0.03;
  cell.weight->value = W;
  cell.bias->value = b;

  Graph<double> g;
  int x = g.input(colvec({0.4, -0.2}));
  auto s0 = cell.initial(g);
  auto s1 = cell.step(g, x, s0);
  auto s2 = cell.step(g, g.input(colvec({-0.1, 0.9})), s1);

  std::vector<std::vector<double>> Wv(8, std::vector<double>(4));
  std::vector<double> bv(8);
  for (int r = 0; r < 8; ++r) {
    bv[r] = b(r, 0);
    for (int c = 0; c < 4; ++c) Wv[r][c] = W(r, c);
  }
  auto o1 = oracle::lstm_step(Wv, bv, {0.4, -0.2}, {0, 0}, {0, 0});
  auto o2 = oracle::lstm_step(Wv, bv, {-0.1, 0.9}, o1.h, o1.c);
  for (int k = 0; k < 2; ++k) {
    CHECK(g.value(s1.h)(k, 0) == doctest::Approx(o1.h[k]).epsilon(1e-12));
    CHECK(g.value(s2.h)(k, 0) == doctest::Approx(o2.h[k]).epsilon(1e-12));
    CHECK(g.value(s2.c)(k, 0) == doctest::Approx(o2.c[k]).epsilon(1e-12));
  }
}

TEST_CASE("zero-weight lstm yields zero hidden state") {
  std::mt19937_64 rng(1);
  ParamStore<double> store;
  auto cell = LstmCell<double>::create(store, "z", 3, 3, rng);
  cell.weight->value.setZero();
  cell.bias->value.setZero();

  Graph<double> g;
  auto s = cell.step(g, g.input(colvec({1, 2, 3})), cell.initial(g));
  CHECK(g.value(s.h).norm() == 0.0);
  CHECK(g.value(s.c).norm() == 0.0);
}

TEST_CASE("lstm and bilstm gradients pass finite differences") {
  std::mt19937_64 rng(5);
  ParamStore<double> store;
  auto bi = BiLstm<double>::create(store, "bi", 2, 2, rng);

  auto build = [&](Graph<double>& g) {
    std::vector<int> xs = {g.input(colvec({0.3, -0.5})), g.input(colvec({0.8, 0.1})),
                           g.input(colvec({-0.4, 0.6}))};
    auto hs = bi.apply(g, xs);
    int p = g.softmax(g.vconcat({hs[0], hs[1], hs[2]}));
    return g.scale(g.pick(g.log_clamped(p, 1e-12), 3), -1.0);
  };
  auto report = gradcheck::check(store, build);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("bilstm output order pairs forward and backward states") {
  std::mt19937_64 rng(9);
  ParamStore<double> store;
  auto bi = BiLstm<double>::create(store, "bi", 1, 1, rng);

  Graph<double> g;
  std::vector<int> xs = {g.input(colvec({1.0})), g.input(colvec({2.0}))};
  auto hs = bi.apply(g, xs);
  REQUIRE(hs.size() == 2);
  CHECK(g.value(hs[0]).rows() == 2);

  // Forward half of position 0 equals a unidirectional first step;
  // backward half of position 1 likewise from the other end.
  Graph<double> g2;
  auto f = bi.forward.step(g2, g2.input(colvec({1.0})), bi.forward.initial(g2));
  auto b = bi.backward.step(g2, g2.input(colvec({2.0})), bi.backward.initial(g2));
  CHECK(g.value(hs[0])(0, 0) == doctest::Approx(g2.value(f.h)(0, 0)).epsilon(1e-12));
  CHECK(g.value(hs[1])(1, 0) == doctest::Approx(g2.value(b.h)(0, 0)).epsilon(1e-12));
}

TEST_CASE("dropout is identity in eval mode and rescales in train mode") {
  std::mt19937_64 rng(23);
  Graph<double> g;
  Matrix ones = Matrix::Ones(50, 20);
  int x = g.input(ones);
  int eval = g.dropout(x, 0.5, rng, false);
  CHECK(eval == x);

  int train = g.dropout(x, 0.5, rng, true);
  const Matrix& y = g.value(train);
  double kept = 0, dropped = 0;
  for (Eigen::Index c = 0; c < y.cols(); ++c)
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      if (y(r, c) == 0.0) ++dropped;
      else {
        CHECK(y(r, c) == doctest::Approx(2.0));
        ++kept;
      }
    }
  CHECK(kept + dropped == 1000);
  CHECK(kept > 350);  // ~500 expected
  CHECK(dropped > 350);
}

TEST_CASE("param store registers in order and zeroes grads") {
  std::mt19937_64 rng(2);
  ParamStore<double> store;
  store.create("first", 2, 2, InitKind::kUniformSmall, rng);
  store.create("second", 1, 4, InitKind::kZero, rng);
  CHECK(store.count() == 2);
  CHECK(store.all()[0].name == "first");
  CHECK(store.all()[1].value.isZero());
  CHECK(store.all()[0].value.cwiseAbs().maxCoeff() <= 0.1);

  store.all()[0].grad.setOnes();
  store.zero_grads();
  CHECK(store.all()[0].grad.isZero());
}

TEST_CASE("initialization is deterministic under the seed") {
  std::mt19937_64 a(7), b(7);
  ParamStore<double> s1, s2;
  auto& p1 = s1.create("p", 3, 5, InitKind::kGlorot, a);
  auto& p2 = s2.create("p", 3, 5, InitKind::kGlorot, b);
  CHECK(p1.value == p2.value);
}

TEST_CASE("backward accumulates into param grads across two uses") {
  std::mt19937_64 rng(4);
  ParamStore<double> store;
  auto& w = store.create("w", 1, 1, InitKind::kGlorot, rng);
  w.value(0, 0) = 3.0;

  store.zero_grads();
  Graph<double> g;
  int nw = g.param(w);
  // loss = w*w -> dL/dw = 2w = 6
  int loss = g.cmul(nw, nw);
  g.backward(loss);
  CHECK(w.grad(0, 0) == doctest::Approx(6.0));

  // A second graph's backward accumulates on top.
  Graph<double> g2;
  int nw2 = g2.param(w);
  g2.backward(g2.scale(nw2, 2.0));
  CHECK(w.grad(0, 0) == doctest::Approx(8.0));
}
