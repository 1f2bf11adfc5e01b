#pragma once

#include <cstdint>
#include <vector>

namespace coronal {

/// Square integer cost matrix, row-major.
class CostMatrix {
 public:
  explicit CostMatrix(std::size_t n) : n_(n), w_(n * n, 0) {}
  std::size_t size() const noexcept { return n_; }
  std::int64_t& operator()(std::size_t i, std::size_t j) noexcept { return w_[i * n_ + j]; }
  std::int64_t operator()(std::size_t i, std::size_t j) const noexcept { return w_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<std::int64_t> w_;
};

struct Assignment {
  std::vector<int> column_of_row;  // permutation
  std::int64_t total = 0;
};

/// Exact minimum-cost perfect matching (Hungarian method with potentials,
/// O(n^3)). Costs must be finite; negative entries are allowed.
Assignment solve_assignment(const CostMatrix& cost);

/// Exhaustive minimum over all n! permutations.
Assignment brute_force_assignment(const CostMatrix& cost);

}  // namespace coronal
