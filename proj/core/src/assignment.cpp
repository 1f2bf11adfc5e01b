#include "coronal/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "coronal/error.hpp"

namespace coronal {

Assignment solve_assignment(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  Assignment out;
  if (n == 0) return out;
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  // 1-based arrays; p[j] is the row matched to column j, column 0 is virtual.
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<std::int64_t> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      std::int64_t delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  out.column_of_row.assign(n, -1);
  for (std::size_t j = 1; j <= n; ++j) out.column_of_row[p[j] - 1] = static_cast<int>(j - 1);
  for (std::size_t i = 0; i < n; ++i) out.total += cost(i, out.column_of_row[i]);
  return out;
}

Assignment brute_force_assignment(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  CORONAL_EXPECTS(n <= 10, "brute_force_assignment is limited to n <= 10");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best;
  best.total = std::numeric_limits<std::int64_t>::max();
  do {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
    if (total < best.total) {
      best.total = total;
      best.column_of_row = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (n == 0) best.total = 0;
  return best;
}

}  // namespace coronal
