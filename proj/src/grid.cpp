#include "zempc/grid.hpp"

#include <algorithm>
#include <cmath>

namespace zempc {

FiniteCovering::FiniteCovering(IntervalBox base, std::vector<int> resolution)
    : base_(std::move(base)), res_(std::move(resolution)) {
    width_.resize(res_.size());
    stride_.resize(res_.size());
    total_ = 1;
    for (std::size_t i = 0; i < res_.size(); ++i) {
        width_[i] = base_.width(static_cast<int>(i)) / res_[i];
    }
    // row-major: last axis fastest
    for (std::size_t i = res_.size(); i-- > 0;) {
        stride_[i] = total_;
        total_ *= static_cast<std::size_t>(res_[i]);
    }
}

Vec FiniteCovering::cell_half_widths() const {
    Vec h(dim());
    for (int i = 0; i < dim(); ++i) h[i] = 0.5 * width_[static_cast<std::size_t>(i)];
    return h;
}

std::vector<int> FiniteCovering::multi_index(std::size_t idx) const {
    std::vector<int> mi(res_.size());
    for (std::size_t i = 0; i < res_.size(); ++i) {
        mi[i] = static_cast<int>(idx / stride_[i]);
        idx %= stride_[i];
    }
    return mi;
}

std::size_t FiniteCovering::flat_index(const std::vector<int>& mi) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < res_.size(); ++i) {
        idx += static_cast<std::size_t>(mi[i]) * stride_[i];
    }
    return idx;
}

IntervalBox FiniteCovering::cell(std::size_t idx) const {
    auto mi = multi_index(idx);
    Vec lo(dim()), hi(dim());
    for (int i = 0; i < dim(); ++i) {
        lo[i] = base_.lo[i] + mi[static_cast<std::size_t>(i)] * width_[static_cast<std::size_t>(i)];
        hi[i] = (mi[static_cast<std::size_t>(i)] + 1 == res_[static_cast<std::size_t>(i)])
                    ? base_.hi[i]
                    : base_.lo[i] + (mi[static_cast<std::size_t>(i)] + 1) * width_[static_cast<std::size_t>(i)];
    }
    return {lo, hi};
}

Vec FiniteCovering::cell_center(std::size_t idx) const { return cell(idx).center(); }

std::optional<std::size_t> FiniteCovering::locate(const Vec& x) const {
    std::vector<int> mi(res_.size());
    for (int i = 0; i < dim(); ++i) {
        if (x[i] < base_.lo[i] || x[i] > base_.hi[i]) return std::nullopt;
        auto k = static_cast<int>(std::floor((x[i] - base_.lo[i]) / width_[static_cast<std::size_t>(i)]));
        // upper face of the box belongs to the last cell
        k = std::clamp(k, 0, res_[static_cast<std::size_t>(i)] - 1);
        mi[static_cast<std::size_t>(i)] = k;
    }
    return flat_index(mi);
}

bool FiniteCovering::cell_range(const IntervalBox& box, std::vector<int>& lo, std::vector<int>& hi) const {
    lo.assign(res_.size(), 0);
    hi.assign(res_.size(), 0);
    for (int i = 0; i < dim(); ++i) {
        if (box.hi[i] < base_.lo[i] || box.lo[i] > base_.hi[i]) return false;
        const double w = width_[static_cast<std::size_t>(i)];
        auto a = static_cast<int>(std::floor((box.lo[i] - base_.lo[i]) / w));
        // half-open cells: a boundary point on a shared face belongs to the
        // upper cell, so an image box ending exactly on a face does not
        // intersect the cell above it
        auto b = static_cast<int>(std::ceil((box.hi[i] - base_.lo[i]) / w)) - 1;
        if (box.hi[i] >= base_.hi[i]) b = res_[static_cast<std::size_t>(i)] - 1;
        a = std::clamp(a, 0, res_[static_cast<std::size_t>(i)] - 1);
        b = std::clamp(b, 0, res_[static_cast<std::size_t>(i)] - 1);
        if (b < a) b = a;
        lo[static_cast<std::size_t>(i)] = a;
        hi[static_cast<std::size_t>(i)] = b;
    }
    return true;
}

FiniteCovering build_covering(const IntervalBox& box, const std::vector<int>& resolution) {
    if (!box.valid() || box.volume() == 0.0) {
        throw ConfigError("covering.box", "base box must be nonempty with lo < hi");
    }
    if (resolution.size() != static_cast<std::size_t>(box.dim())) {
        throw ConfigError("covering.resolution", "resolution dimension does not match box");
    }
    for (int r : resolution) {
        if (r < 1) throw ConfigError("covering.resolution", "every resolution entry must be >= 1");
    }
    return {box, resolution};
}

MaskSums::MaskSums(const FiniteCovering& cov, const std::vector<char>& mask) : res_(cov.resolution()) {
    const std::size_t n = res_.size();
    stride_.resize(n);
    std::size_t total = 1;
    for (std::size_t i = n; i-- > 0;) {
        stride_[i] = total;
        total *= static_cast<std::size_t>(res_[i] + 1);
    }
    sums_.assign(total, 0);

    // seed with the mask at offset +1 on every axis
    for (std::size_t idx = 0; idx < cov.size(); ++idx) {
        if (!mask[idx]) continue;
        auto mi = cov.multi_index(idx);
        std::size_t p = 0;
        for (std::size_t i = 0; i < n; ++i) p += static_cast<std::size_t>(mi[i] + 1) * stride_[i];
        sums_[p] = 1;
    }
    // accumulate along each axis in turn
    for (std::size_t axis = 0; axis < n; ++axis) {
        for (std::size_t p = 0; p < total; ++p) {
            std::size_t coord = (p / stride_[axis]) % static_cast<std::size_t>(res_[axis] + 1);
            if (coord > 0) sums_[p] += sums_[p - stride_[axis]];
        }
    }
}

std::int64_t MaskSums::count(const std::vector<int>& lo, const std::vector<int>& hi) const {
    const std::size_t n = res_.size();
    std::int64_t acc = 0;
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
        std::size_t p = 0;
        int sign = 1;
        for (std::size_t i = 0; i < n; ++i) {
            if ((corner >> i) & 1u) {
                p += static_cast<std::size_t>(lo[i]) * stride_[i];  // exclusive low side
                sign = -sign;
            } else {
                p += static_cast<std::size_t>(hi[i] + 1) * stride_[i];
            }
        }
        acc += sign * sums_[p];
    }
    return acc;
}

std::int64_t MaskSums::total() const { return sums_.empty() ? 0 : sums_.back(); }

}  // namespace zempc
