#include "mesosim/alloc.hpp"

#include <cstddef>
#include <limits>
#include <string>

namespace mesosim::alloc {

namespace {

void check_shape(const Problem& p) {
  const std::size_t n = p.size();
  if (p.weight.size() != n || p.lo.size() != n || p.hi.size() != n) {
    throw std::invalid_argument("allocation problem: ragged field sizes");
  }
  long lo_sum = 0;
  long hi_sum = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (p.lo[j] > p.hi[j]) throw InfeasibleError("empty bound interval");
    if (p.weight[j] < 0.0) throw std::invalid_argument("negative weight");
    lo_sum += p.lo[j];
    hi_sum += p.hi[j];
  }
  if (lo_sum > p.budget || hi_sum < p.budget) {
    throw InfeasibleError("budget outside [sum lo, sum hi]: " +
                          std::to_string(p.budget));
  }
}

}  // namespace

double objective(const Problem& p, const std::vector<int>& g) {
  double obj = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double d = g[j] - p.target[j];
    obj += p.weight[j] * d * d;
  }
  return obj;
}

std::vector<int> solve(const Problem& p) {
  check_shape(p);
  const std::size_t n = p.size();
  std::vector<int> g(p.lo.begin(), p.lo.end());
  long remaining = p.budget;
  for (std::size_t j = 0; j < n; ++j) remaining -= g[j];

  // Marginal cost of raising g_j by one unit: w_j * (2(g_j - t_j) + 1),
  // nondecreasing in g_j, so unit-by-unit greedy is globally optimal.
  while (remaining > 0) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (g[j] >= p.hi[j]) continue;
      const double marginal = p.weight[j] * (2.0 * (g[j] - p.target[j]) + 1.0);
      if (marginal < best) {
        best = marginal;
        best_j = j;
      }
    }
    ++g[best_j];
    --remaining;
  }
  return g;
}

std::vector<int> brute_force_oracle(const Problem& p,
                                    std::uint64_t max_points) {
  check_shape(p);
  const std::size_t n = p.size();
  std::uint64_t points = 1;
  for (std::size_t j = 0; j < n; ++j) {
    points *= static_cast<std::uint64_t>(p.hi[j] - p.lo[j] + 1);
    if (points > max_points) {
      throw std::invalid_argument("oracle search space too large");
    }
  }

  std::vector<int> current(n), best;
  double best_obj = std::numeric_limits<double>::infinity();
  // Depth-first over the box, pruned by the remaining-budget interval.
  auto recurse = [&](auto&& self, std::size_t j, int remaining) -> void {
    if (j == n) {
      if (remaining != 0) return;
      const double obj = objective(p, current);
      if (obj < best_obj) {
        best_obj = obj;
        best = current;
      }
      return;
    }
    long tail_lo = 0;
    long tail_hi = 0;
    for (std::size_t i = j + 1; i < n; ++i) {
      tail_lo += p.lo[i];
      tail_hi += p.hi[i];
    }
    for (int v = p.lo[j]; v <= p.hi[j]; ++v) {
      const long rest = static_cast<long>(remaining) - v;
      if (rest < tail_lo || rest > tail_hi) continue;
      current[j] = v;
      self(self, j + 1, static_cast<int>(rest));
    }
  };
  recurse(recurse, 0, p.budget);
  return best;
}

}  // namespace mesosim::alloc
