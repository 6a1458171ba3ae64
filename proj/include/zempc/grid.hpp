#pragma once

#include "zempc/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace zempc {

// Uniform quantization of a box into half-open cells. Each cell owns its
// lower faces; the last cell along an axis also owns the upper face, so every
// point of the base box lies in exactly one cell.
class FiniteCovering {
  public:
    FiniteCovering() = default;
    FiniteCovering(IntervalBox base, std::vector<int> resolution);

    [[nodiscard]] const IntervalBox& base() const { return base_; }
    [[nodiscard]] const std::vector<int>& resolution() const { return res_; }
    [[nodiscard]] int dim() const { return static_cast<int>(res_.size()); }
    [[nodiscard]] std::size_t size() const { return total_; }

    [[nodiscard]] double cell_width(int axis) const { return width_[static_cast<std::size_t>(axis)]; }
    [[nodiscard]] Vec cell_half_widths() const;

    [[nodiscard]] std::vector<int> multi_index(std::size_t idx) const;
    [[nodiscard]] std::size_t flat_index(const std::vector<int>& mi) const;

    [[nodiscard]] IntervalBox cell(std::size_t idx) const;
    [[nodiscard]] Vec cell_center(std::size_t idx) const;

    /// Containing cell of x, or nullopt if x lies outside the base box.
    [[nodiscard]] std::optional<std::size_t> locate(const Vec& x) const;

    /// Index range [lo, hi] (inclusive, per axis) of cells intersecting `box`.
    /// Returns false when the intersection is empty.
    bool cell_range(const IntervalBox& box, std::vector<int>& lo, std::vector<int>& hi) const;

  private:
    IntervalBox base_;
    std::vector<int> res_;
    std::vector<double> width_;
    std::vector<std::size_t> stride_;
    std::size_t total_ = 0;
};

/// Uniform covering of `box`. Throws ConfigError on a non-positive resolution
/// entry or an invalid box.
FiniteCovering build_covering(const IntervalBox& box, const std::vector<int>& resolution);

// Inclusive n-dimensional prefix sums over a cell mask; answers "how many
// marked cells in an index range" in O(2^n).
class MaskSums {
  public:
    MaskSums() = default;
    MaskSums(const FiniteCovering& cov, const std::vector<char>& mask);

    [[nodiscard]] std::int64_t count(const std::vector<int>& lo, const std::vector<int>& hi) const;
    [[nodiscard]] std::int64_t total() const;

  private:
    std::vector<int> res_;
    std::vector<std::size_t> stride_;  // strides of the (res+1)-sized sum lattice
    std::vector<std::int64_t> sums_;
};

}  // namespace zempc
