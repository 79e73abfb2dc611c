#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace koopcert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using VectorField = std::function<Vec(const Vec&)>;
using ScalarFn = std::function<double(const Vec&)>;
using GradientFn = std::function<Vec(const Vec&)>;

/// A scalar observable with analytic gradient, e.g. a state-constraint function h(x).
struct ScalarObservable {
    std::string label;
    ScalarFn value;
    GradientFn gradient;  // may be empty where only values are needed
};

/// Axis-aligned box with positive volume.
class Box {
public:
    Box() = default;
    Box(Vec lower, Vec upper);

    int dim() const { return static_cast<int>(lower_.size()); }
    const Vec& lower() const { return lower_; }
    const Vec& upper() const { return upper_; }
    Vec center() const { return 0.5 * (lower_ + upper_); }
    Vec width() const { return upper_ - lower_; }
    double volume() const { return width().prod(); }
    bool contains(const Vec& x) const;
    /// Largest per-axis distance by which x lies outside; <= 0 when inside.
    double excess(const Vec& x) const;

private:
    Vec lower_;
    Vec upper_;
};

Box symmetric_box(int dim, double half_width);

}  // namespace koopcert
