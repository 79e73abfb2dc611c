#include "koopcert/dictionary.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "koopcert/errors.hpp"
#include "koopcert/random.hpp"

namespace koopcert {

// ---------------------------------------------------------------------------
// FemMesh

FemMesh::FemMesh(Box box, double mesh_size) : box_(std::move(box)), mesh_size_(mesh_size) {
    if (box_.dim() < 1 || box_.dim() > 2) throw MeshError("finite elements support d = 1 or 2 only");
    if (!(mesh_size_ > 0.0)) throw MeshError("mesh size must be > 0");
    for (int a = 0; a < box_.dim(); ++a) {
        const double w = box_.width()[a];
        if (mesh_size_ > w * (1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "mesh size " << mesh_size_ << " exceeds box edge " << w << " on axis " << a;
            throw MeshError(msg.str());
        }
        cells_.push_back(std::max(1, static_cast<int>(std::ceil(w / mesh_size_ - 1e-9))));
    }
}

Vec FemMesh::spacing() const {
    Vec h(dim());
    for (int a = 0; a < dim(); ++a) h[a] = box_.width()[a] / cells_[static_cast<std::size_t>(a)];
    return h;
}

int FemMesh::node_count() const {
    int n = 1;
    for (int c : cells_) n *= c + 1;
    return n;
}

Vec FemMesh::node(int index) const {
    const Vec h = spacing();
    Vec x(dim());
    int rem = index;
    for (int a = 0; a < dim(); ++a) {
        const int per = cells_[static_cast<std::size_t>(a)] + 1;
        x[a] = box_.lower()[a] + (rem % per) * h[a];
        rem /= per;
    }
    return x;
}

namespace {

// ---------------------------------------------------------------------------
// Blocks

class MonomialBlock final : public DictionaryBlock {
public:
    MonomialBlock(int dim, int max_degree) : dim_(dim), max_degree_(max_degree) {
        std::vector<int> e(static_cast<std::size_t>(dim), 0);
        for (int deg = 0; deg <= max_degree; ++deg) enumerate(deg, 0, e);
    }

    int size() const override { return static_cast<int>(exponents_.size()); }

    std::vector<std::string> labels() const override {
        std::vector<std::string> out;
        for (const auto& e : exponents_) {
            std::string label;
            for (int a = 0; a < dim_; ++a) {
                const int p = e[static_cast<std::size_t>(a)];
                if (p == 0) continue;
                if (!label.empty()) label += "*";
                label += "x" + std::to_string(a + 1);
                if (p > 1) label += "^" + std::to_string(p);
            }
            out.push_back(label.empty() ? "1" : label);
        }
        return out;
    }

    void eval(const Vec& x, Eigen::Ref<Vec> out) const override {
        const Mat pw = powers(x);
        for (int n = 0; n < size(); ++n) {
            double v = 1.0;
            const auto& e = exponents_[static_cast<std::size_t>(n)];
            for (int a = 0; a < dim_; ++a) v *= pw(a, e[static_cast<std::size_t>(a)]);
            out[n] = v;
        }
    }

    void eval_grad(const Vec& x, Eigen::Ref<Mat> out) const override {
        const Mat pw = powers(x);
        for (int n = 0; n < size(); ++n) {
            const auto& e = exponents_[static_cast<std::size_t>(n)];
            for (int a = 0; a < dim_; ++a) {
                const int ea = e[static_cast<std::size_t>(a)];
                if (ea == 0) {
                    out(n, a) = 0.0;
                    continue;
                }
                double v = ea * pw(a, ea - 1);
                for (int b = 0; b < dim_; ++b)
                    if (b != a) v *= pw(b, e[static_cast<std::size_t>(b)]);
                out(n, a) = v;
            }
        }
    }

    const std::vector<std::vector<int>>& exponents() const { return exponents_; }

private:
    // graded lexicographic: within a degree, larger leading exponents first
    void enumerate(int remaining, int axis, std::vector<int>& e) {
        if (axis == dim_ - 1) {
            e[static_cast<std::size_t>(axis)] = remaining;
            exponents_.push_back(e);
            return;
        }
        for (int p = remaining; p >= 0; --p) {
            e[static_cast<std::size_t>(axis)] = p;
            enumerate(remaining - p, axis + 1, e);
        }
    }

    Mat powers(const Vec& x) const {
        Mat pw(dim_, max_degree_ + 1);
        for (int a = 0; a < dim_; ++a) {
            pw(a, 0) = 1.0;
            for (int k = 1; k <= max_degree_; ++k) pw(a, k) = pw(a, k - 1) * x[a];
        }
        return pw;
    }

    int dim_;
    int max_degree_;
    std::vector<std::vector<int>> exponents_;
};

class HatBlock final : public DictionaryBlock {
public:
    explicit HatBlock(FemMesh mesh) : mesh_(std::move(mesh)), h_(mesh_.spacing()) {}

    int size() const override { return mesh_.node_count(); }

    std::vector<std::string> labels() const override {
        std::vector<std::string> out;
        for (int n = 0; n < size(); ++n) out.push_back("hat" + std::to_string(n));
        return out;
    }

    void eval(const Vec& x, Eigen::Ref<Vec> out) const override {
        out.setZero();
        Local loc;
        if (!locate(x, loc)) return;
        for (int k = 0; k < loc.count; ++k) out[loc.node[k]] = loc.value[k];
    }

    void eval_grad(const Vec& x, Eigen::Ref<Mat> out) const override {
        out.setZero();
        Local loc;
        if (!locate(x, loc)) return;
        for (int k = 0; k < loc.count; ++k)
            for (int a = 0; a < mesh_.dim(); ++a) out(loc.node[k], a) = loc.grad[k][a];
    }

private:
    struct Local {
        int count = 0;
        int node[3] = {0, 0, 0};
        double value[3] = {0, 0, 0};
        double grad[3][2] = {{0, 0}, {0, 0}, {0, 0}};
    };

    // Element containing x; on element boundaries the lower-index element wins.
    static int cell_of(double s, int cells) {
        return std::clamp(static_cast<int>(std::ceil(s)) - 1, 0, cells - 1);
    }

    bool locate(const Vec& x, Local& loc) const {
        const Box& box = mesh_.box();
        for (int a = 0; a < mesh_.dim(); ++a) {
            const double slack = 1e-12 * box.width()[a];
            if (x[a] < box.lower()[a] - slack || x[a] > box.upper()[a] + slack) return false;
        }
        const auto& cells = mesh_.cells();
        if (mesh_.dim() == 1) {
            const double s = (x[0] - box.lower()[0]) / h_[0];
            const int c = cell_of(s, cells[0]);
            const double t = s - c;
            loc.count = 2;
            loc.node[0] = c;
            loc.node[1] = c + 1;
            loc.value[0] = 1.0 - t;
            loc.value[1] = t;
            loc.grad[0][0] = -1.0 / h_[0];
            loc.grad[1][0] = 1.0 / h_[0];
            return true;
        }
        const double s = (x[0] - box.lower()[0]) / h_[0];
        const double r = (x[1] - box.lower()[1]) / h_[1];
        const int ci = cell_of(s, cells[0]);
        const int cj = cell_of(r, cells[1]);
        const double ts = s - ci;
        const double tr = r - cj;
        const int stride = cells[0] + 1;
        const int n00 = cj * stride + ci;
        const int n10 = n00 + 1;
        const int n01 = n00 + stride;
        const int n11 = n01 + 1;
        const double ix = 1.0 / h_[0];
        const double iy = 1.0 / h_[1];
        loc.count = 3;
        if (tr <= ts) {  // lower triangle (00, 10, 11)
            loc.node[0] = n00, loc.value[0] = 1.0 - ts, loc.grad[0][0] = -ix, loc.grad[0][1] = 0.0;
            loc.node[1] = n10, loc.value[1] = ts - tr, loc.grad[1][0] = ix, loc.grad[1][1] = -iy;
            loc.node[2] = n11, loc.value[2] = tr, loc.grad[2][0] = 0.0, loc.grad[2][1] = iy;
        } else {  // upper triangle (00, 11, 01)
            loc.node[0] = n00, loc.value[0] = 1.0 - tr, loc.grad[0][0] = 0.0, loc.grad[0][1] = -iy;
            loc.node[1] = n11, loc.value[1] = ts, loc.grad[1][0] = ix, loc.grad[1][1] = 0.0;
            loc.node[2] = n01, loc.value[2] = tr - ts, loc.grad[2][0] = -ix, loc.grad[2][1] = iy;
        }
        return true;
    }

    FemMesh mesh_;
    Vec h_;
};

class FunctionBlock final : public DictionaryBlock {
public:
    explicit FunctionBlock(std::vector<ScalarObservable> fns) : fns_(std::move(fns)) {
        for (const auto& f : fns_)
            if (!f.value || !f.gradient)
                throw UsageError("observable '" + f.label + "' needs both value and gradient");
    }

    int size() const override { return static_cast<int>(fns_.size()); }

    std::vector<std::string> labels() const override {
        std::vector<std::string> out;
        for (const auto& f : fns_) out.push_back(f.label);
        return out;
    }

    void eval(const Vec& x, Eigen::Ref<Vec> out) const override {
        for (int n = 0; n < size(); ++n) out[n] = fns_[static_cast<std::size_t>(n)].value(x);
    }

    void eval_grad(const Vec& x, Eigen::Ref<Mat> out) const override {
        for (int n = 0; n < size(); ++n) {
            const Vec g = fns_[static_cast<std::size_t>(n)].gradient(x);
            if (g.size() != out.cols())
                throw UsageError("gradient of '" + fns_[static_cast<std::size_t>(n)].label +
                                 "' has wrong dimension");
            out.row(n) = g.transpose();
        }
    }

private:
    std::vector<ScalarObservable> fns_;
};

std::uint64_t binomial_capped(int n, int k, std::uint64_t cap) {
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
        if (r > cap) return cap + 1;
    }
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dictionary

Dictionary::Dictionary(int dim, Kind kind, std::vector<std::shared_ptr<const DictionaryBlock>> blocks,
                       std::optional<FemMesh> mesh, int leading)
    : dim_(dim), kind_(kind), blocks_(std::move(blocks)), mesh_(std::move(mesh)), leading_(leading) {
    if (dim_ < 1) throw UsageError("dictionary dimension must be >= 1");
    for (const auto& b : blocks_) {
        offsets_.push_back(size_);
        size_ += b->size();
        for (auto& l : b->labels()) labels_.push_back(std::move(l));
    }
    if (size_ < 1) throw UsageError("dictionary must contain at least one observable");
    std::set<std::string> seen;
    for (const auto& l : labels_)
        if (!seen.insert(l).second) throw UsageError("duplicate observable label '" + l + "'");
}

std::optional<int> Dictionary::index_of(const std::string& label) const {
    for (int i = 0; i < size_; ++i)
        if (labels_[static_cast<std::size_t>(i)] == label) return i;
    return std::nullopt;
}

void Dictionary::eval_into(const Vec& x, Eigen::Ref<Vec> out) const {
    for (std::size_t b = 0; b < blocks_.size(); ++b)
        blocks_[b]->eval(x, out.segment(offsets_[b], blocks_[b]->size()));
    if (!out.allFinite()) {
        for (int i = 0; i < size_; ++i)
            if (!std::isfinite(out[i]))
                throw NumericalError("observable '" + labels_[static_cast<std::size_t>(i)] +
                                     "' is not finite");
    }
}

Vec Dictionary::eval(const Vec& x) const {
    if (x.size() != dim_) throw UsageError("point dimension does not match dictionary");
    Vec out(size_);
    eval_into(x, out);
    return out;
}

void Dictionary::eval_grad_into(const Vec& x, Eigen::Ref<Mat> out) const {
    for (std::size_t b = 0; b < blocks_.size(); ++b)
        blocks_[b]->eval_grad(x, out.middleRows(offsets_[b], blocks_[b]->size()));
    if (!out.allFinite()) {
        for (int i = 0; i < size_; ++i)
            if (!out.row(i).allFinite())
                throw NumericalError("gradient of observable '" +
                                     labels_[static_cast<std::size_t>(i)] + "' is not finite");
    }
}

Mat Dictionary::eval_grad(const Vec& x) const {
    if (x.size() != dim_) throw UsageError("point dimension does not match dictionary");
    Mat out(size_, dim_);
    eval_grad_into(x, out);
    return out;
}

Mat Dictionary::eval_many(const Mat& points) const {
    Mat out(size_, points.cols());
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
        Vec v(size_);
        eval_into(points.col(k), v);
        out.col(k) = v;
    }
    return out;
}

std::string to_string(Dictionary::Kind kind) {
    switch (kind) {
        case Dictionary::Kind::monomial: return "monomial";
        case Dictionary::Kind::fem: return "fem";
        case Dictionary::Kind::composite: return "composite";
    }
    return "unknown";
}

Dictionary monomial_dictionary(int dim, int max_degree, int cap) {
    if (dim < 1) throw UsageError("monomial dictionary needs d >= 1");
    if (max_degree < 0) throw UsageError("max_degree must be >= 0");
    const auto count = binomial_capped(max_degree + dim, dim, static_cast<std::uint64_t>(cap));
    if (count > static_cast<std::uint64_t>(cap))
        throw SizeError("monomial dictionary would exceed " + std::to_string(cap) + " observables");
    return Dictionary(dim, Dictionary::Kind::monomial,
                      {std::make_shared<MonomialBlock>(dim, max_degree)});
}

Dictionary fem_dictionary(const FemMesh& mesh) {
    return Dictionary(mesh.dim(), Dictionary::Kind::fem, {std::make_shared<HatBlock>(mesh)}, mesh);
}

Dictionary composite_dictionary(const std::vector<ScalarObservable>& constraints,
                                const Dictionary& base) {
    if (constraints.empty()) return base;
    std::vector<std::shared_ptr<const DictionaryBlock>> blocks{
        std::make_shared<FunctionBlock>(constraints)};
    for (const auto& b : base.blocks()) blocks.push_back(b);
    return Dictionary(base.dim(), Dictionary::Kind::composite, std::move(blocks), base.mesh(),
                      static_cast<int>(constraints.size()) + base.leading());
}

void check_gradients(const Dictionary& dict, const Box& box, int points, std::uint64_t seed,
                     double rel_tol) {
    Rng rng(seed);
    const int d = dict.dim();
    for (int p = 0; p < points; ++p) {
        const Vec x = uniform_in(rng, box);
        const Mat g = dict.eval_grad(x);
        const Vec f0 = dict.eval(x);
        for (int a = 0; a < d; ++a) {
            const double step = 1e-6 * std::max(1.0, box.width()[a]);
            Vec xp = x, xm = x;
            xp[a] += step;
            xm[a] -= step;
            const Vec fp = dict.eval(xp);
            const Vec fm = dict.eval(xm);
            for (int i = 0; i < dict.size(); ++i) {
                const double tol = rel_tol * std::max(1.0, std::abs(g(i, a)));
                if (std::abs((fp[i] - fm[i]) / (2 * step) - g(i, a)) <= tol) continue;
                // near a kink of a piecewise-linear observable one side still agrees
                if (std::abs((fp[i] - f0[i]) / step - g(i, a)) <= tol ||
                    std::abs((f0[i] - fm[i]) / step - g(i, a)) <= tol)
                    continue;
                std::ostringstream msg;
                msg << "gradient of observable '" << dict.labels()[static_cast<std::size_t>(i)]
                    << "' disagrees with finite differences along axis " << a;
                throw NumericalError(msg.str());
            }
        }
    }
}

QuadratureRule quadrature_for(const Dictionary& dict, const Box& box, int q) {
    if (q < 1) throw UsageError("quadrature order must be >= 1");
    if (box.dim() != dict.dim()) throw UsageError("box dimension does not match dictionary");
    if (!dict.mesh()) return tensor_gauss_legendre(box, q);
    const FemMesh& mesh = *dict.mesh();
    if (!(mesh.box().lower() - box.lower()).isZero(1e-12) ||
        !(mesh.box().upper() - box.upper()).isZero(1e-12))
        throw UsageError("finite-element mesh box must coincide with the integration box");
    const int per_cell = std::min(q, 10);
    if (mesh.dim() == 1) return tensor_gauss_legendre(box, per_cell, mesh.cells());
    return triangulated_gauss(box, mesh.cells()[0], mesh.cells()[1], per_cell);
}

Mat gram_matrix(const Dictionary& dict, const QuadratureRule& rule) {
    const Mat psi = dict.eval_many(rule.points);
    Mat c = psi * rule.weights.asDiagonal() * psi.transpose();
    return 0.5 * (c + c.transpose());
}

ObservableCoeffs unit_coeffs(const Dictionary& dict, int index) {
    if (index < 0 || index >= dict.size()) throw UsageError("observable index out of range");
    ObservableCoeffs c;
    c.coeffs = Vec::Unit(dict.size(), index);
    c.exact = true;
    return c;
}

Mat regularized_solve(const Mat& G, const Mat& B, double* residual) {
    const Mat g = 0.5 * (G + G.transpose());
    Mat shifted = g;
    shifted.diagonal().array() += 1e-12 * g.trace() / static_cast<double>(g.rows());
    const Eigen::ColPivHouseholderQR<Mat> qr(shifted);
    Mat X = qr.solve(B);
    double res = (g * X - B).norm();
    for (int step = 0; step < 3 && res > 0.0; ++step) {
        const Mat candidate = X + qr.solve(B - g * X);
        const double r = (g * candidate - B).norm();
        if (!(r < res)) break;
        X = candidate;
        res = r;
    }
    if (residual) *residual = res;
    return X;
}

ObservableCoeffs project(const Dictionary& dict, const ScalarFn& h, const Box& box, int q) {
    const QuadratureRule rule = quadrature_for(dict, box, q);
    const Mat psi = dict.eval_many(rule.points);
    Vec hv(rule.size());
    for (Eigen::Index k = 0; k < rule.size(); ++k) hv[k] = h(rule.points.col(k));
    Mat c = psi * rule.weights.asDiagonal() * psi.transpose();
    c = 0.5 * (c + c.transpose());
    const Vec b = psi * rule.weights.cwiseProduct(hv);
    Vec coeffs = regularized_solve(c, b);
    if (!coeffs.allFinite()) throw NumericalError("projection produced non-finite coefficients");
    const Vec r = hv - psi.transpose() * coeffs;
    ObservableCoeffs out;
    out.coeffs = std::move(coeffs);
    out.residual = std::sqrt(std::max(0.0, rule.weights.dot(r.cwiseProduct(r))));
    return out;
}

}  // namespace koopcert
