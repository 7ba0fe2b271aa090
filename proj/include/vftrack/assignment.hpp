#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace vftrack {

/// Minimum-cost assignment of every row to a distinct column (rows <= cols)
/// on a dense row-major cost matrix. Shortest augmenting path with
/// potentials, O(rows^2 * cols). Returns the column chosen for each row.
inline std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t rows,
                                                 std::size_t cols) {
  if (rows > cols) throw std::invalid_argument("solve_assignment needs rows <= cols");
  if (cost.size() != rows * cols) throw std::invalid_argument("cost matrix size mismatch");
  if (rows == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based internals; column 0 is the virtual source.
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> owner(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(rows, 0);
  for (std::size_t j = 1; j <= cols; ++j) {
    if (owner[j] != 0) assignment[owner[j] - 1] = j - 1;
  }
  return assignment;
}

}  // namespace vftrack
