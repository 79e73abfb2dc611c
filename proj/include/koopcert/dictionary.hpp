#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "koopcert/quadrature.hpp"
#include "koopcert/types.hpp"

namespace koopcert {

/// Uniform mesh of a 1D interval or a 2D box; in 2D each square is split into two
/// triangles along its lower-left to upper-right diagonal.
class FemMesh {
public:
    FemMesh(Box box, double mesh_size);

    int dim() const { return box_.dim(); }
    const Box& box() const { return box_; }
    double mesh_size() const { return mesh_size_; }
    /// Cells per axis; actual spacing is width / cells <= mesh_size.
    const std::vector<int>& cells() const { return cells_; }
    Vec spacing() const;
    int node_count() const;
    /// Node coordinates, x-index fastest.
    Vec node(int index) const;

private:
    Box box_;
    double mesh_size_;
    std::vector<int> cells_;
};

/// Evaluates a contiguous run of observables at once.
class DictionaryBlock {
public:
    virtual ~DictionaryBlock() = default;
    virtual int size() const = 0;
    virtual std::vector<std::string> labels() const = 0;
    virtual void eval(const Vec& x, Eigen::Ref<Vec> out) const = 0;
    /// out is size() x d
    virtual void eval_grad(const Vec& x, Eigen::Ref<Mat> out) const = 0;
};

/// Ordered observables psi_1..psi_N with values and analytic gradients. Immutable;
/// copies share blocks.
class Dictionary {
public:
    enum class Kind { monomial, fem, composite };

    Dictionary(int dim, Kind kind, std::vector<std::shared_ptr<const DictionaryBlock>> blocks,
               std::optional<FemMesh> mesh = std::nullopt, int leading = 0);

    int dim() const { return dim_; }
    int size() const { return size_; }
    Kind kind() const { return kind_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::optional<FemMesh>& mesh() const { return mesh_; }
    /// Number of constraint observables prepended by composite_dictionary.
    int leading() const { return leading_; }
    std::optional<int> index_of(const std::string& label) const;

    Vec eval(const Vec& x) const;
    void eval_into(const Vec& x, Eigen::Ref<Vec> out) const;
    /// N x d
    Mat eval_grad(const Vec& x) const;
    void eval_grad_into(const Vec& x, Eigen::Ref<Mat> out) const;

    /// Stacks dictionary values column-wise: N x (number of points).
    Mat eval_many(const Mat& points) const;

    const std::vector<std::shared_ptr<const DictionaryBlock>>& blocks() const { return blocks_; }

private:
    int dim_;
    int size_ = 0;
    Kind kind_;
    std::vector<std::shared_ptr<const DictionaryBlock>> blocks_;
    std::vector<int> offsets_;
    std::vector<std::string> labels_;
    std::optional<FemMesh> mesh_;
    int leading_ = 0;
};

std::string to_string(Dictionary::Kind kind);

inline constexpr int kMaxDictionarySize = 10000;

/// All monomials of total degree <= max_degree in graded lexicographic order.
Dictionary monomial_dictionary(int dim, int max_degree, int cap = kMaxDictionarySize);

/// Linear hat functions, one per mesh node.
Dictionary fem_dictionary(const FemMesh& mesh);

/// Constraint functions first, then the base observables.
Dictionary composite_dictionary(const std::vector<ScalarObservable>& constraints,
                                const Dictionary& base);

/// Central finite-difference check of the analytic gradients at `points` uniform points
/// of `box`; throws NumericalError naming the first inconsistent observable.
void check_gradients(const Dictionary& dict, const Box& box, int points = 20,
                     std::uint64_t seed = 0, double rel_tol = 1e-5);

/// Quadrature adapted to the dictionary: a single tensor Gauss-Legendre panel for
/// smooth dictionaries; per-element rules on the mesh for finite-element content.
QuadratureRule quadrature_for(const Dictionary& dict, const Box& box, int q);

/// Coordinates of an element of span(V).
struct ObservableCoeffs {
    Vec coeffs;
    double residual = 0.0;  // L2 norm of h - sum_i c_i psi_i over the box
    bool exact = false;     // true when h is a dictionary element (unit vector)
};

ObservableCoeffs unit_coeffs(const Dictionary& dict, int index);

/// Orthogonal L2(box) projection of h onto span(V) via the regularized Gram system.
ObservableCoeffs project(const Dictionary& dict, const ScalarFn& h, const Box& box, int q = 40);

/// Solves the symmetric positive semidefinite system G X = B with a shift of
/// 1e-12 trace(G)/n and up to three refinement steps against the unshifted G.
/// Returns the residual ||G X - B||_F through `residual`.
Mat regularized_solve(const Mat& G, const Mat& B, double* residual = nullptr);

/// Gram matrix sum_k w_k psi(x_k) psi(x_k)^T over a quadrature rule.
Mat gram_matrix(const Dictionary& dict, const QuadratureRule& rule);

}  // namespace koopcert
