#include "koopcert/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "koopcert/errors.hpp"

namespace koopcert {

std::pair<Vec, Vec> gauss_legendre(int q) {
    if (q < 1) throw UsageError("quadrature order must be >= 1");
    Vec nodes(q), weights(q);
    // Newton iteration on P_q from Chebyshev-like initial guesses; symmetric pairs.
    const int half = (q + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= q; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = q * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= q; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = q * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if (q % 2 == 1) nodes[q / 2] = 0.0;
    return {nodes, weights};
}

QuadratureRule tensor_gauss_legendre(const Box& box, int q, const std::vector<int>& cells) {
    const int d = box.dim();
    std::vector<int> n_cells = cells.empty() ? std::vector<int>(static_cast<std::size_t>(d), 1) : cells;
    if (static_cast<int>(n_cells.size()) != d) throw UsageError("panel counts must match box dimension");
    const auto [gx, gw] = gauss_legendre(q);

    // 1D composite rules per axis, then tensorize.
    std::vector<Vec> ax_pts(static_cast<std::size_t>(d)), ax_wts(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
        const int nc = n_cells[static_cast<std::size_t>(a)];
        if (nc < 1) throw UsageError("panel count must be >= 1");
        const double h = box.width()[a] / nc;
        Vec p(nc * q), w(nc * q);
        for (int c = 0; c < nc; ++c) {
            const double lo = box.lower()[a] + c * h;
            for (int i = 0; i < q; ++i) {
                p[c * q + i] = lo + 0.5 * h * (gx[i] + 1.0);
                w[c * q + i] = 0.5 * h * gw[i];
            }
        }
        ax_pts[static_cast<std::size_t>(a)] = p;
        ax_wts[static_cast<std::size_t>(a)] = w;
    }
    Eigen::Index total = 1;
    for (const auto& p : ax_pts) total *= p.size();

    QuadratureRule rule;
    rule.points.resize(d, total);
    rule.weights.resize(total);
    for (Eigen::Index n = 0; n < total; ++n) {
        Eigen::Index rem = n;
        double w = 1.0;
        for (int a = d - 1; a >= 0; --a) {
            const auto& p = ax_pts[static_cast<std::size_t>(a)];
            const Eigen::Index idx = rem % p.size();
            rem /= p.size();
            rule.points(a, n) = p[idx];
            w *= ax_wts[static_cast<std::size_t>(a)][idx];
        }
        rule.weights[n] = w;
    }
    return rule;
}

QuadratureRule triangulated_gauss(const Box& box, int nx, int ny, int q) {
    if (box.dim() != 2) throw UsageError("triangulated quadrature requires a 2D box");
    if (nx < 1 || ny < 1) throw UsageError("cell counts must be >= 1");
    const auto [gx, gw] = gauss_legendre(q);
    const double hx = box.width()[0] / nx;
    const double hy = box.width()[1] / ny;
    const Eigen::Index per_tri = static_cast<Eigen::Index>(q) * q;
    QuadratureRule rule;
    rule.points.resize(2, 2 * per_tri * nx * ny);
    rule.weights.resize(2 * per_tri * nx * ny);
    Eigen::Index n = 0;
    const double tri_area = 0.5 * hx * hy;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Eigen::Vector2d a(box.lower()[0] + i * hx, box.lower()[1] + j * hy);
            const Eigen::Vector2d c(a[0] + hx, a[1] + hy);
            // lower triangle (a, a + hx e1, c), upper triangle (a, c, a + hy e2)
            const Eigen::Vector2d lower_b(a[0] + hx, a[1]);
            const Eigen::Vector2d upper_c(a[0], a[1] + hy);
            for (int tri = 0; tri < 2; ++tri) {
                const Eigen::Vector2d b = tri == 0 ? lower_b : c;
                const Eigen::Vector2d e = tri == 0 ? c : upper_c;
                for (int s = 0; s < q; ++s) {
                    const double xi = 0.5 * (gx[s] + 1.0);
                    for (int r = 0; r < q; ++r) {
                        const double eta = 0.5 * (gx[r] + 1.0);
                        rule.points.col(n) = a + xi * (b - a) + xi * eta * (e - b);
                        rule.weights[n] = 0.25 * gw[s] * gw[r] * 2.0 * tri_area * xi;
                        ++n;
                    }
                }
            }
        }
    }
    return rule;
}

}  // namespace koopcert
