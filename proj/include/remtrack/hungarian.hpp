#pragma once

#include <cstddef>
#include <vector>

namespace remtrack::metrics {

/// Minimum-cost assignment on a rows x cols cost matrix (row-major).
/// Returns, for each row, the assigned column or -1 when rows > cols leaves it
/// unassigned. Every column is used at most once.
std::vector<int> solve_assignment(const std::vector<double>& cost, std::size_t rows,
                                  std::size_t cols);

}  // namespace remtrack::metrics
