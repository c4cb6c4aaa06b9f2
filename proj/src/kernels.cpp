#include "locklab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "locklab/rng.hpp"

namespace locklab::kernels {

Csr Csr::from_edges(int num_nodes,
                    const std::vector<std::pair<int, int>>& edges) {
  Csr csr;
  std::vector<int> deg(num_nodes, 0);
  for (auto [u, v] : edges) {
    ++deg[u];
    ++deg[v];
  }
  csr.offs.assign(num_nodes + 1, 0);
  for (int v = 0; v < num_nodes; ++v) csr.offs[v + 1] = csr.offs[v] + deg[v];
  csr.nbrs.resize(csr.offs.back());
  std::vector<int> cursor(csr.offs.begin(), csr.offs.end() - 1);
  for (auto [u, v] : edges) {
    csr.nbrs[cursor[u]++] = v;
    csr.nbrs[cursor[v]++] = u;
  }
  for (int v = 0; v < num_nodes; ++v)
    std::sort(csr.nbrs.begin() + csr.offs[v], csr.nbrs.begin() + csr.offs[v + 1]);
  return csr;
}

// The loop bodies are shared between the parallel entry points and the
// serial reference ones, so the two variants cannot drift apart; only the
// work distribution differs.
namespace {

inline void matmul_row(const double* a, const double* b, double* c, int i,
                       int k, int n) {
  double* crow = c + size_t(i) * n;
  std::memset(crow, 0, sizeof(double) * size_t(n));
  for (int kk = 0; kk < k; ++kk) {
    double aik = a[size_t(i) * k + kk];
    const double* brow = b + size_t(kk) * n;
    for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
  }
}

inline void matmul_at_row(const double* a, const double* g, double* c, int kk,
                          int m, int k, int n) {
  double* crow = c + size_t(kk) * n;
  std::memset(crow, 0, sizeof(double) * size_t(n));
  for (int i = 0; i < m; ++i) {
    double aik = a[size_t(i) * k + kk];
    const double* grow = g + size_t(i) * n;
    for (int j = 0; j < n; ++j) crow[j] += aik * grow[j];
  }
}

inline void matmul_bt_row(const double* g, const double* b, double* c, int i,
                          int k, int n) {
  const double* grow = g + size_t(i) * n;
  double* crow = c + size_t(i) * k;
  for (int kk = 0; kk < k; ++kk) {
    const double* brow = b + size_t(kk) * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
    crow[kk] = acc;
  }
}

inline void softmax_row(double* p, int i, int n) {
  double* row = p + size_t(i) * n;
  double mx = row[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    sum += row[j];
  }
  for (int j = 0; j < n; ++j) row[j] /= sum;
}

inline void neighbor_mean_row(const Csr& adj, const double* x, double* out,
                              int v, int d) {
  double* orow = out + size_t(v) * d;
  std::memset(orow, 0, sizeof(double) * size_t(d));
  int deg = adj.degree(v);
  if (deg == 0) return;
  for (int e = adj.offs[v]; e < adj.offs[v + 1]; ++e) {
    const double* xrow = x + size_t(adj.nbrs[e]) * d;
    for (int j = 0; j < d; ++j) orow[j] += xrow[j];
  }
  double inv = 1.0 / deg;
  for (int j = 0; j < d; ++j) orow[j] *= inv;
}

inline void neighbor_mean_backward_row(const Csr& adj, const double* dout,
                                       double* dx, int u, int d) {
  double* drow = dx + size_t(u) * d;
  for (int e = adj.offs[u]; e < adj.offs[u + 1]; ++e) {
    int v = adj.nbrs[e];
    double inv = 1.0 / adj.degree(v);
    const double* grow = dout + size_t(v) * d;
    for (int j = 0; j < d; ++j) drow[j] += grow[j] * inv;
  }
}

inline void dropout_at(double* h, std::int64_t i, double rate,
                       std::uint64_t seed, double scale) {
  if (unit_at(seed, std::uint64_t(i)) < rate)
    h[i] = 0.0;
  else
    h[i] *= scale;
}

inline void adam_at(double* p, const double* g, double* m, double* v,
                    std::int64_t i, double lr, double beta1, double beta2,
                    double eps, double bc1, double bc2) {
  m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
  v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
  double mhat = m[i] / bc1;
  double vhat = v[i] / bc2;
  p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
}

}  // namespace

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_at(const double* a, const double* g, double* c, int m, int k,
               int n) {
#pragma omp parallel for schedule(static)
  for (int kk = 0; kk < k; ++kk) matmul_at_row(a, g, c, kk, m, k, n);
}

void matmul_bt(const double* g, const double* b, double* c, int m, int k,
               int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) matmul_bt_row(g, b, c, i, k, n);
}

void add_bias(double* h, const double* bias, int m, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) h[size_t(i) * n + j] += bias[j];
}

void colsum(const double* g, double* out, int m, int n) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += g[size_t(i) * n + j];
    out[j] = acc;
  }
}

void relu(double* h, std::int64_t count) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) h[i] = h[i] > 0.0 ? h[i] : 0.0;
}

void relu_backward(double* dh, const double* h, std::int64_t count) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i)
    if (h[i] <= 0.0) dh[i] = 0.0;
}

void softmax_rows(double* p, int m, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) softmax_row(p, i, n);
}

void neighbor_mean(const Csr& adj, const double* x, double* out, int d) {
  int n = adj.num_nodes();
#pragma omp parallel for schedule(static)
  for (int v = 0; v < n; ++v) neighbor_mean_row(adj, x, out, v, d);
}

void neighbor_mean_backward(const Csr& adj, const double* dout, double* dx,
                            int d) {
  int n = adj.num_nodes();
#pragma omp parallel for schedule(static)
  for (int u = 0; u < n; ++u) neighbor_mean_backward_row(adj, dout, dx, u, d);
}

void dropout(double* h, std::int64_t count, double rate, std::uint64_t seed) {
  if (rate <= 0.0) return;
  double scale = 1.0 / (1.0 - rate);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) dropout_at(h, i, rate, seed, scale);
}

void adam_step(double* p, const double* g, double* m, double* v,
               std::int64_t count, int step, double lr, double beta1,
               double beta2, double eps) {
  double bc1 = 1.0 - std::pow(beta1, step);
  double bc2 = 1.0 - std::pow(beta2, step);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i)
    adam_at(p, g, m, v, i, lr, beta1, beta2, eps, bc1, bc2);
}

namespace ref {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_at(const double* a, const double* g, double* c, int m, int k,
               int n) {
  for (int kk = 0; kk < k; ++kk) matmul_at_row(a, g, c, kk, m, k, n);
}

void matmul_bt(const double* g, const double* b, double* c, int m, int k,
               int n) {
  for (int i = 0; i < m; ++i) matmul_bt_row(g, b, c, i, k, n);
}

void add_bias(double* h, const double* bias, int m, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) h[size_t(i) * n + j] += bias[j];
}

void colsum(const double* g, double* out, int m, int n) {
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += g[size_t(i) * n + j];
    out[j] = acc;
  }
}

void relu(double* h, std::int64_t count) {
  for (std::int64_t i = 0; i < count; ++i) h[i] = h[i] > 0.0 ? h[i] : 0.0;
}

void relu_backward(double* dh, const double* h, std::int64_t count) {
  for (std::int64_t i = 0; i < count; ++i)
    if (h[i] <= 0.0) dh[i] = 0.0;
}

void softmax_rows(double* p, int m, int n) {
  for (int i = 0; i < m; ++i) softmax_row(p, i, n);
}

void neighbor_mean(const Csr& adj, const double* x, double* out, int d) {
  for (int v = 0; v < adj.num_nodes(); ++v)
    neighbor_mean_row(adj, x, out, v, d);
}

void neighbor_mean_backward(const Csr& adj, const double* dout, double* dx,
                            int d) {
  for (int u = 0; u < adj.num_nodes(); ++u)
    neighbor_mean_backward_row(adj, dout, dx, u, d);
}

void dropout(double* h, std::int64_t count, double rate, std::uint64_t seed) {
  if (rate <= 0.0) return;
  double scale = 1.0 / (1.0 - rate);
  for (std::int64_t i = 0; i < count; ++i) dropout_at(h, i, rate, seed, scale);
}

void adam_step(double* p, const double* g, double* m, double* v,
               std::int64_t count, int step, double lr, double beta1,
               double beta2, double eps) {
  double bc1 = 1.0 - std::pow(beta1, step);
  double bc2 = 1.0 - std::pow(beta2, step);
  for (std::int64_t i = 0; i < count; ++i)
    adam_at(p, g, m, v, i, lr, beta1, beta2, eps, bc1, bc2);
}

}  // namespace ref

}  // namespace locklab::kernels
