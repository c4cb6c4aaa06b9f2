#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace locklab::kernels {

// Compressed sparse rows over an undirected graph. Neighbors of v live in
// nbrs[offs[v]..offs[v+1]), sorted ascending.
struct Csr {
  std::vector<int> offs{0};
  std::vector<int> nbrs;

  int num_nodes() const { return int(offs.size()) - 1; }
  int degree(int v) const { return offs[v + 1] - offs[v]; }
  // Expects unique undirected pairs; inserts both directions.
  static Csr from_edges(int num_nodes,
                        const std::vector<std::pair<int, int>>& edges);
};

// All matrices are row-major. The parallel versions below and their serial
// twins in ref:: run the same per-element scalar code in the same order, so
// results are bit-identical; tests and the kernel benchmark rely on that.

// c[m x n] = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
// c[k x n] = a[m x k]^T * g[m x n]
void matmul_at(const double* a, const double* g, double* c, int m, int k,
               int n);
// c[m x k] = g[m x n] * b[k x n]^T
void matmul_bt(const double* g, const double* b, double* c, int m, int k,
               int n);
void add_bias(double* h, const double* bias, int m, int n);
void colsum(const double* g, double* out, int m, int n);
void relu(double* h, std::int64_t count);
// dh element is kept where the post-activation h is positive, else zeroed.
void relu_backward(double* dh, const double* h, std::int64_t count);
void softmax_rows(double* p, int m, int n);
// out row v = mean of x over v's neighbors, d columns; zero when isolated.
void neighbor_mean(const Csr& adj, const double* x, double* out, int d);
// dx row u += sum over v in N(u) of dout row v / deg(v). Accumulates.
void neighbor_mean_backward(const Csr& adj, const double* dout, double* dx,
                            int d);
// Inverted dropout with a counter-hashed mask: element i is zeroed when
// unit_at(seed, i) < rate, otherwise scaled by 1/(1-rate). Forward and
// backward replay the same mask from (seed, rate).
void dropout(double* h, std::int64_t count, double rate, std::uint64_t seed);
// Bias-corrected Adam; step counts from 1.
void adam_step(double* p, const double* g, double* m, double* v,
               std::int64_t count, int step, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

namespace ref {
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_at(const double* a, const double* g, double* c, int m, int k,
               int n);
void matmul_bt(const double* g, const double* b, double* c, int m, int k,
               int n);
void add_bias(double* h, const double* bias, int m, int n);
void colsum(const double* g, double* out, int m, int n);
void relu(double* h, std::int64_t count);
void relu_backward(double* dh, const double* h, std::int64_t count);
void softmax_rows(double* p, int m, int n);
void neighbor_mean(const Csr& adj, const double* x, double* out, int d);
void neighbor_mean_backward(const Csr& adj, const double* dout, double* dx,
                            int d);
void dropout(double* h, std::int64_t count, double rate, std::uint64_t seed);
void adam_step(double* p, const double* g, double* m, double* v,
               std::int64_t count, int step, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);
}  // namespace ref

}  // namespace locklab::kernels
