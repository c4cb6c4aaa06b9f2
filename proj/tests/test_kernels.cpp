#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "locklab/kernels.hpp"
#include "locklab/rng.hpp"

using namespace locklab;
using kernels::Csr;

namespace {

std::vector<double> rand_vec(Rng& rng, size_t n, double a = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rand_symmetric(rng, a);
  return v;
}

// Deliberately naive re-implementations the kernels are checked against.
void naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                  std::vector<double>& c, int m, int k, int n) {
  c.assign(size_t(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += a[size_t(i) * k + t] * b[size_t(t) * n + j];
      c[size_t(i) * n + j] = s;
    }
}

Csr random_graph(Rng& rng, int n, int extra_edges,
                 std::vector<std::pair<int, int>>* out_edges = nullptr) {
  std::vector<std::pair<int, int>> edges;
  for (int v = 1; v < n; ++v)
    edges.emplace_back(int(rand_below(rng, v)), v);  // spanning tree
  for (int e = 0; e < extra_edges; ++e) {
    int u = int(rand_below(rng, n)), v = int(rand_below(rng, n));
    if (u == v) continue;
    edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (out_edges) *out_edges = edges;
  return Csr::from_edges(n, edges);
}

bool bytes_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("csr adjacency from an edge list") {
  Csr path = Csr::from_edges(3, {{0, 1}, {1, 2}});
  CHECK(path.num_nodes() == 3);
  CHECK(path.offs == std::vector<int>{0, 1, 3, 4});
  CHECK(path.nbrs == std::vector<int>{1, 0, 2, 1});
  CHECK(path.degree(0) == 1);
  CHECK(path.degree(1) == 2);
  CHECK(path.degree(2) == 1);

  Csr empty = Csr::from_edges(0, {});
  CHECK(empty.num_nodes() == 0);

  Csr lonely = Csr::from_edges(2, {});
  CHECK(lonely.degree(0) == 0);
  CHECK(lonely.degree(1) == 0);

  // Neighbor lists come out sorted regardless of input edge order.
  Csr star = Csr::from_edges(4, {{2, 3}, {0, 3}, {1, 3}});
  CHECK(star.nbrs == std::vector<int>{3, 3, 3, 0, 1, 2});
}

TEST_CASE("matmul matches a hand example and a naive oracle") {
  std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8}, c(4);
  kernels::matmul(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c == std::vector<double>{19, 22, 43, 50});

  Rng rng(7);
  for (auto [m, k, n] : {std::array{3, 5, 4}, std::array{1, 7, 1}, std::array{6, 1, 6}}) {
    auto A = rand_vec(rng, size_t(m) * k), B = rand_vec(rng, size_t(k) * n);
    std::vector<double> got(size_t(m) * n), want;
    kernels::matmul(A.data(), B.data(), got.data(), m, k, n);
    naive_matmul(A, B, want, m, k, n);
    for (size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("transposed products match the naive oracle") {
  Rng rng(11);
  int m = 5, k = 3, n = 4;
  auto A = rand_vec(rng, size_t(m) * k);   // [m x k]
  auto G = rand_vec(rng, size_t(m) * n);   // [m x n]
  auto B = rand_vec(rng, size_t(k) * n);   // [k x n]

  // c = A^T G via naive matmul on an explicitly transposed copy.
  std::vector<double> At(size_t(k) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) At[size_t(j) * m + i] = A[size_t(i) * k + j];
  std::vector<double> got(size_t(k) * n), want;
  kernels::matmul_at(A.data(), G.data(), got.data(), m, k, n);
  naive_matmul(At, G, want, k, m, n);
  for (size_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

  // c = G B^T likewise.
  std::vector<double> Bt(size_t(n) * k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) Bt[size_t(j) * k + i] = B[size_t(i) * n + j];
  got.assign(size_t(m) * k, 0.0);
  kernels::matmul_bt(G.data(), B.data(), got.data(), m, k, n);
  naive_matmul(G, Bt, want, m, n, k);
  for (size_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("bias, column sum and relu") {
  std::vector<double> h{1, 2, 3, 4, 5, 6};
  std::vector<double> bias{10, 20, 30};
  kernels::add_bias(h.data(), bias.data(), 2, 3);
  CHECK(h == std::vector<double>{11, 22, 33, 14, 25, 36});

  std::vector<double> sums(3);
  kernels::colsum(h.data(), sums.data(), 2, 3);
  CHECK(sums == std::vector<double>{25, 47, 69});

  std::vector<double> r{-1.0, 0.0, 2.5, -0.0, 3.0, -7.0};
  kernels::relu(r.data(), 6);
  CHECK(r == std::vector<double>{0, 0, 2.5, 0, 3, 0});

  // Gradient is kept exactly where the post-activation is positive.
  std::vector<double> dh{1, 1, 1, 1, 1, 1};
  std::vector<double> act{0.0, 5.0, 0.0, 1e-30, 2.0, 0.0};
  kernels::relu_backward(dh.data(), act.data(), 6);
  CHECK(dh == std::vector<double>{0, 1, 0, 1, 1, 0});
}

TEST_CASE("softmax rows are stable probability vectors") {
  std::vector<double> p{0.0, 0.0, 0.0, 1.0, 2.0, 3.0};
  kernels::softmax_rows(p.data(), 2, 3);
  for (int j = 0; j < 3; ++j) CHECK(p[j] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(p[3] + p[4] + p[5] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[3] < p[4]);
  CHECK(p[4] < p[5]);

  // Shift invariance: adding a constant per row changes nothing.
  std::vector<double> q{101.0, 102.0, 103.0};
  kernels::softmax_rows(q.data(), 1, 3);
  CHECK(q[0] == doctest::Approx(p[3]).epsilon(1e-14));
  CHECK(q[2] == doctest::Approx(p[5]).epsilon(1e-14));

  // Huge logits must not overflow thanks to the max shift.
  std::vector<double> big{1000.0, 999.0};
  kernels::softmax_rows(big.data(), 1, 2);
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] + big[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("neighbor mean and its adjoint") {
  Csr path = Csr::from_edges(3, {{0, 1}, {1, 2}});
  std::vector<double> x{1, 2, 4}, out(3);
  kernels::neighbor_mean(path, x.data(), out.data(), 1);
  CHECK(out == std::vector<double>{2.0, 2.5, 2.0});

  // Isolated node gets the zero vector.
  Csr lonely = Csr::from_edges(3, {{0, 1}});
  kernels::neighbor_mean(lonely, x.data(), out.data(), 1);
  CHECK(out[2] == 0.0);

  // <A x, y> == <x, A^T y> pins the backward pass to the forward operator.
  Rng rng(23);
  Csr g = random_graph(rng, 17, 20);
  int d = 3;
  auto xs = rand_vec(rng, size_t(17) * d), ys = rand_vec(rng, size_t(17) * d);
  std::vector<double> ax(size_t(17) * d), aty(size_t(17) * d, 0.0);
  kernels::neighbor_mean(g, xs.data(), ax.data(), d);
  kernels::neighbor_mean_backward(g, ys.data(), aty.data(), d);
  double lhs = 0.0, rhs = 0.0;
  for (size_t i = 0; i < ax.size(); ++i) {
    lhs += ax[i] * ys[i];
    rhs += xs[i] * aty[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  // The backward accumulates into dx instead of overwriting it.
  std::vector<double> dx(size_t(17) * d, 1.0);
  kernels::neighbor_mean_backward(g, ys.data(), dx.data(), d);
  for (size_t i = 0; i < dx.size(); ++i)
    CHECK(dx[i] == doctest::Approx(1.0 + aty[i]).epsilon(1e-12));
}

TEST_CASE("dropout scales survivors and replays its mask") {
  std::vector<double> x(1000, 1.0);
  auto y = x;
  kernels::dropout(y.data(), 1000, 0.0, 42);
  CHECK(y == x);  // rate 0 is the identity

  double rate = 0.3;
  kernels::dropout(y.data(), 1000, rate, 42);
  auto z = x;
  kernels::dropout(z.data(), 1000, rate, 42);
  CHECK(y == z);  // same seed, same mask
  for (double v : y) CHECK((v == 0.0 || v == doctest::Approx(1.0 / (1 - rate)).epsilon(1e-15)));

  // Mask is a function of (seed, index) only, so it replays onto any data.
  std::vector<double> w(1000);
  for (int i = 0; i < 1000; ++i) w[i] = i + 1.0;
  kernels::dropout(w.data(), 1000, rate, 42);
  for (int i = 0; i < 1000; ++i) CHECK((w[i] == 0.0) == (y[size_t(i)] == 0.0));

  // Different seeds give different masks.
  auto u = x;
  kernels::dropout(u.data(), 1000, rate, 43);
  CHECK(u != y);

  // Drop fraction concentrates around the rate.
  std::vector<double> big(100000, 1.0);
  kernels::dropout(big.data(), std::int64_t(big.size()), rate, 7);
  double zeros = double(std::count(big.begin(), big.end(), 0.0));
  CHECK(std::abs(zeros / double(big.size()) - rate) < 0.01);
}

TEST_CASE("adam follows the bias-corrected closed form") {
  // First step from zero state moves by lr * g/(|g| + eps) regardless of
  // the gradient's magnitude.
  double p = 0.0, g = 3.0, m = 0.0, v = 0.0, lr = 0.01;
  kernels::adam_step(&p, &g, &m, &v, 1, 1, lr);
  CHECK(p == doctest::Approx(-lr * g / (std::sqrt(g * g) + 1e-8)).epsilon(1e-12));
  CHECK(m == doctest::Approx(0.1 * g).epsilon(1e-12));
  CHECK(v == doctest::Approx(0.001 * g * g).epsilon(1e-12));

  // Zero gradient leaves the parameter untouched.
  double p0 = 1.25, z = 0.0, m0 = 0.0, v0 = 0.0;
  kernels::adam_step(&p0, &z, &m0, &v0, 1, 1, lr);
  CHECK(p0 == 1.25);

  // Under a constant gradient the per-step move converges to lr.
  p = 0.0;
  m = v = 0.0;
  double prev = p;
  double move = 0.0;
  for (int step = 1; step <= 500; ++step) {
    kernels::adam_step(&p, &g, &m, &v, 1, step, lr);
    move = prev - p;
    prev = p;
  }
  CHECK(move == doctest::Approx(lr).epsilon(1e-6));

  // Determinism: identical runs give bit-identical trajectories.
  double pa = 0.5, ma = 0, va = 0, pb = 0.5, mb = 0, vb = 0;
  for (int step = 1; step <= 10; ++step) {
    double grad = 0.1 * step;
    kernels::adam_step(&pa, &grad, &ma, &va, 1, step, lr);
    kernels::adam_step(&pb, &grad, &mb, &vb, 1, step, lr);
  }
  CHECK(pa == pb);
}

TEST_CASE("parallel kernels and serial twins agree bitwise") {
  Rng rng(99);
  int m = 13, k = 9, n = 7;
  auto A = rand_vec(rng, size_t(m) * k), B = rand_vec(rng, size_t(k) * n);
  auto G = rand_vec(rng, size_t(m) * n);

  std::vector<double> c1(size_t(m) * n), c2(size_t(m) * n);
  kernels::matmul(A.data(), B.data(), c1.data(), m, k, n);
  kernels::ref::matmul(A.data(), B.data(), c2.data(), m, k, n);
  CHECK(bytes_equal(c1, c2));

  std::vector<double> t1(size_t(k) * n), t2(size_t(k) * n);
  kernels::matmul_at(A.data(), G.data(), t1.data(), m, k, n);
  kernels::ref::matmul_at(A.data(), G.data(), t2.data(), m, k, n);
  CHECK(bytes_equal(t1, t2));

  std::vector<double> u1(size_t(m) * k), u2(size_t(m) * k);
  kernels::matmul_bt(G.data(), B.data(), u1.data(), m, k, n);
  kernels::ref::matmul_bt(G.data(), B.data(), u2.data(), m, k, n);
  CHECK(bytes_equal(u1, u2));

  auto h1 = rand_vec(rng, size_t(m) * n), h2 = h1;
  auto bias = rand_vec(rng, size_t(n));
  kernels::add_bias(h1.data(), bias.data(), m, n);
  kernels::ref::add_bias(h2.data(), bias.data(), m, n);
  CHECK(bytes_equal(h1, h2));

  std::vector<double> s1(static_cast<size_t>(n)), s2(static_cast<size_t>(n));
  kernels::colsum(h1.data(), s1.data(), m, n);
  kernels::ref::colsum(h2.data(), s2.data(), m, n);
  CHECK(bytes_equal(s1, s2));

  kernels::relu(h1.data(), std::int64_t(h1.size()));
  kernels::ref::relu(h2.data(), std::int64_t(h2.size()));
  CHECK(bytes_equal(h1, h2));

  auto d1 = rand_vec(rng, h1.size()), d2 = d1;
  kernels::relu_backward(d1.data(), h1.data(), std::int64_t(d1.size()));
  kernels::ref::relu_backward(d2.data(), h2.data(), std::int64_t(d2.size()));
  CHECK(bytes_equal(d1, d2));

  auto p1 = rand_vec(rng, size_t(m) * n, 4.0), p2 = p1;
  kernels::softmax_rows(p1.data(), m, n);
  kernels::ref::softmax_rows(p2.data(), m, n);
  CHECK(bytes_equal(p1, p2));

  Csr graph = random_graph(rng, m, 15);
  std::vector<double> nm1(size_t(m) * n), nm2(size_t(m) * n);
  kernels::neighbor_mean(graph, G.data(), nm1.data(), n);
  kernels::ref::neighbor_mean(graph, G.data(), nm2.data(), n);
  CHECK(bytes_equal(nm1, nm2));

  std::vector<double> nb1(size_t(m) * n, 0.0), nb2(size_t(m) * n, 0.0);
  kernels::neighbor_mean_backward(graph, G.data(), nb1.data(), n);
  kernels::ref::neighbor_mean_backward(graph, G.data(), nb2.data(), n);
  CHECK(bytes_equal(nb1, nb2));

  auto x1 = rand_vec(rng, 512), x2 = x1;
  kernels::dropout(x1.data(), std::int64_t(x1.size()), 0.25, 5);
  kernels::ref::dropout(x2.data(), std::int64_t(x2.size()), 0.25, 5);
  CHECK(bytes_equal(x1, x2));

  auto grad = rand_vec(rng, 64);
  std::vector<double> pp1 = rand_vec(rng, 64), pp2 = pp1;
  std::vector<double> mm1(64, 0), vv1(64, 0), mm2(64, 0), vv2(64, 0);
  for (int step = 1; step <= 3; ++step) {
    kernels::adam_step(pp1.data(), grad.data(), mm1.data(), vv1.data(), 64, step, 0.01);
    kernels::ref::adam_step(pp2.data(), grad.data(), mm2.data(), vv2.data(), 64, step, 0.01);
  }
  CHECK(bytes_equal(pp1, pp2));
}

}  // TEST_SUITE
