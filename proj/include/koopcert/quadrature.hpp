#pragma once

#include "koopcert/types.hpp"

namespace koopcert {

/// Nodes (d x n) and positive weights of a quadrature rule for the Lebesgue measure.
struct QuadratureRule {
    Mat points;
    Vec weights;

    Eigen::Index size() const { return weights.size(); }
};

/// q-point Gauss-Legendre nodes and weights on [-1, 1], ascending nodes.
std::pair<Vec, Vec> gauss_legendre(int q);

/// Tensor Gauss-Legendre rule with q points per axis on each of the
/// cells[0] x cells[1] x ... panels of a uniform partition of `box`.
QuadratureRule tensor_gauss_legendre(const Box& box, int q, const std::vector<int>& cells = {});

/// 2D rule on a uniform grid of nx x ny squares, each split into two triangles along
/// the lower-left to upper-right diagonal; collapsed (Duffy) Gauss-Legendre per triangle.
QuadratureRule triangulated_gauss(const Box& box, int nx, int ny, int q);

}  // namespace koopcert
