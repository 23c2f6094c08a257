#pragma once

#include <cstddef>
#include <vector>

namespace cldflood {

/// (h, hu, hv) at a fixed list of points for every snapshot, laid out as
/// values[(k * 3 + var) * points + p].
struct FieldStack {
    std::size_t steps = 0;
    std::size_t points = 0;
    std::vector<double> values;

    FieldStack() = default;
    FieldStack(std::size_t k, std::size_t n) : steps(k), points(n), values(k * 3 * n, 0.0) {}

    [[nodiscard]] double at(std::size_t k, int var, std::size_t p) const noexcept {
        return values[(k * 3 + static_cast<std::size_t>(var)) * points + p];
    }
    [[nodiscard]] double& at(std::size_t k, int var, std::size_t p) noexcept {
        return values[(k * 3 + static_cast<std::size_t>(var)) * points + p];
    }
    [[nodiscard]] const double* series(std::size_t k, int var) const noexcept {
        return values.data() + (k * 3 + static_cast<std::size_t>(var)) * points;
    }
};

}  // namespace cldflood
