// Times the OpenMP kernels against their serial reference twins and checks
// that both produce identical bits. Sizes are chosen so a run stays under a
// minute on one core; pass a scale factor to grow them.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "locklab/bitsim.hpp"
#include "locklab/circuitgen.hpp"
#include "locklab/kernels.hpp"
#include "locklab/rng.hpp"

using namespace locklab;

namespace {

double time_of(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void report(const char* name, double parallel_s, double serial_s, bool same) {
  std::printf("%-18s parallel %8.4fs  serial %8.4fs  speedup %5.2fx  %s\n",
              name, parallel_s, serial_s,
              parallel_s > 0 ? serial_s / parallel_s : 0.0,
              same ? "bit-identical" : "MISMATCH");
}

std::vector<double> random_matrix(std::size_t count, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xBE9C));
  std::vector<double> m(count);
  for (double& v : m) v = rand_symmetric(rng, 1.0);
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  const int scale = argc > 1 ? std::atoi(argv[1]) : 1;
  if (scale < 1) {
    std::fprintf(stderr, "usage: %s [scale>=1]\n", argv[0]);
    return 1;
  }

  {
    const int m = 256 * scale, k = 256, n = 256;
    const auto a = random_matrix(std::size_t(m) * k, 1);
    const auto b = random_matrix(std::size_t(k) * n, 2);
    std::vector<double> cp(std::size_t(m) * n), cs(cp.size());
    const double tp =
        time_of([&] { kernels::matmul(a.data(), b.data(), cp.data(), m, k, n); });
    const double ts = time_of(
        [&] { kernels::ref::matmul(a.data(), b.data(), cs.data(), m, k, n); });
    report("matmul", tp, ts, cp == cs);
  }

  {
    // A long path graph keeps every row busy without a quadratic edge count.
    const int nodes = 200000 * scale, d = 64;
    std::vector<std::pair<int, int>> edges;
    for (int v = 0; v + 1 < nodes; ++v) edges.emplace_back(v, v + 1);
    const kernels::Csr adj = kernels::Csr::from_edges(nodes, edges);
    const auto x = random_matrix(std::size_t(nodes) * d, 3);
    std::vector<double> op(x.size()), os(x.size());
    const double tp =
        time_of([&] { kernels::neighbor_mean(adj, x.data(), op.data(), d); });
    const double ts = time_of(
        [&] { kernels::ref::neighbor_mean(adj, x.data(), os.data(), d); });
    report("neighbor_mean", tp, ts, op == os);
  }

  {
    CircuitGenConfig gen;
    gen.name = "bench";
    gen.num_pis = 16;
    gen.num_pos = 8;
    gen.num_gates = 2000;
    gen.seed = 77;
    const Netlist n = generate_circuit(gen);
    const PatternSource src = random_patterns(9, int(n.pis().size()));
    const std::uint64_t patterns = 1u << (15 + scale / 4);
    BatchResult rp, rs;
    const double tp = time_of([&] { rp = simulate_batch(n, src, patterns); });
    const double ts =
        time_of([&] { rs = ref::simulate_batch(n, src, patterns); });
    report("simulate_batch", tp, ts, rp.po_words == rs.po_words);
    std::printf("%-18s %.1f Mpatterns/s parallel over %zu gates\n", "",
                double(patterns) / tp / 1e6, n.gates().size());
  }
  return 0;
}
