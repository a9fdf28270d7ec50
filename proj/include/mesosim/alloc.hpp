#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mesosim::alloc {

// min sum_j w_j * (g_j - t_j)^2  s.t.  sum_j g_j = budget,
//                                      lo_j <= g_j <= hi_j,  g_j integer.
// The projection step behind every signal-plan update: a separable convex
// quadratic over a simplex slice with box bounds.
struct Problem {
  std::vector<double> weight;  // >= 0
  std::vector<double> target;
  std::vector<int> lo;
  std::vector<int> hi;
  int budget = 0;

  std::size_t size() const { return target.size(); }
};

struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact optimum via greedy marginal allocation from the lower bounds
// (optimal for separable convex discrete resource allocation). Ties on
// marginal cost go to the smallest variable index, which rounds the larger
// fractional remainder up first.
std::vector<int> solve(const Problem& p);

// Exhaustive enumeration, test oracle only. Among equal-cost optima returns
// the lexicographically smallest vector, which may differ from solve()'s
// tie-break; compare objectives, not arguments, when the optimum is not
// unique. Throws if the search space exceeds max_points.
std::vector<int> brute_force_oracle(const Problem& p,
                                    std::uint64_t max_points = 1000000);

double objective(const Problem& p, const std::vector<int>& g);

}  // namespace mesosim::alloc
