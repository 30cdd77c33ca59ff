#include "remtrack/hungarian.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace remtrack::metrics {

std::vector<int> solve_assignment(const std::vector<double>& cost, std::size_t rows,
                                  std::size_t cols) {
    if (cost.size() != rows * cols) {
        throw std::invalid_argument("solve_assignment: cost matrix size mismatch");
    }
    if (rows == 0 || cols == 0) {
        return std::vector<int>(rows, -1);
    }
    // Square padding with zero-cost dummies; potentials method, 1-based.
    const std::size_t n = std::max(rows, cols);
    auto c = [&](std::size_t i, std::size_t j) -> double {
        return (i < rows && j < cols) ? cost[i * cols + j] : 0.0;
    };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
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
    std::vector<int> out(rows, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        if (p[j] != 0 && p[j] - 1 < rows && j - 1 < cols) {
            out[p[j] - 1] = static_cast<int>(j - 1);
        }
    }
    return out;
}

}  // namespace remtrack::metrics
