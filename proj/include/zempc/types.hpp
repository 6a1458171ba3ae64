#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace zempc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration. `key` is the offending config path.
struct ConfigError : Error {
    ConfigError(std::string key_path, const std::string& what)
        : Error(key_path + ": " + what), key(std::move(key_path)) {}
    std::string key;
};

/// Non-finite model evaluation; carries the offending point.
struct ModelEvalError : Error {
    ModelEvalError(const std::string& what, Vec x, Vec u, Vec w)
        : Error(what), state(std::move(x)), input(std::move(u)), disturbance(std::move(w)) {}
    Vec state, input, disturbance;
};

/// Zone construction produced an empty invariance kernel (or similar dead end).
struct ZoneConstructionError : Error {
    using Error::Error;
};

/// No feasible point exists for the requested problem.
struct InfeasibleError : Error {
    using Error::Error;
};

/// Numerical solver failed to converge.
struct SolverError : Error {
    using Error::Error;
};

/// Axis-aligned box [lo_i, hi_i] per dimension.
struct IntervalBox {
    Vec lo, hi;

    IntervalBox() = default;
    IntervalBox(Vec lower, Vec upper) : lo(std::move(lower)), hi(std::move(upper)) {}

    static IntervalBox from_flat(const std::vector<double>& flat) {
        if (flat.size() % 2 != 0) throw Error("interval box needs an even number of bounds");
        int d = static_cast<int>(flat.size() / 2);
        Vec lo(d), hi(d);
        for (int i = 0; i < d; ++i) {
            lo[i] = flat[2 * static_cast<std::size_t>(i)];
            hi[i] = flat[2 * static_cast<std::size_t>(i) + 1];
        }
        return {lo, hi};
    }

    [[nodiscard]] int dim() const { return static_cast<int>(lo.size()); }

    [[nodiscard]] bool valid() const {
        if (lo.size() != hi.size() || lo.size() == 0) return false;
        for (int i = 0; i < dim(); ++i) {
            if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || lo[i] > hi[i]) return false;
        }
        return true;
    }

    [[nodiscard]] double width(int i) const { return hi[i] - lo[i]; }
    [[nodiscard]] Vec widths() const { return hi - lo; }
    [[nodiscard]] Vec center() const { return 0.5 * (lo + hi); }

    [[nodiscard]] double volume() const {
        double v = 1.0;
        for (int i = 0; i < dim(); ++i) v *= width(i);
        return v;
    }

    [[nodiscard]] bool contains(const Vec& x, double tol = 0.0) const {
        for (int i = 0; i < dim(); ++i) {
            if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
        }
        return true;
    }

    [[nodiscard]] bool contains_box(const IntervalBox& inner, double tol = 0.0) const {
        for (int i = 0; i < dim(); ++i) {
            if (inner.lo[i] < lo[i] - tol || inner.hi[i] > hi[i] + tol) return false;
        }
        return true;
    }

    [[nodiscard]] Vec clamp(const Vec& x) const {
        Vec y = x;
        for (int i = 0; i < dim(); ++i) y[i] = std::min(std::max(y[i], lo[i]), hi[i]);
        return y;
    }

    /// Vertex selected by bitmask: bit i set -> hi on axis i.
    [[nodiscard]] Vec vertex(unsigned mask) const {
        Vec v(dim());
        for (int i = 0; i < dim(); ++i) v[i] = (mask >> i) & 1u ? hi[i] : lo[i];
        return v;
    }

    [[nodiscard]] unsigned num_vertices() const { return 1u << dim(); }
};

}  // namespace zempc
