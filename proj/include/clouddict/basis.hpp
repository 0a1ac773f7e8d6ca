#ifndef CLOUDDICT_BASIS_HPP
#define CLOUDDICT_BASIS_HPP

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "clouddict/errors.hpp"
#include "clouddict/sparse_code.hpp"

namespace clouddict {

/// Tensor-product cosine family on [-1,1]^2:
///   phi_{k,l}(u, v) = cos(pi k (u+1)/2) * cos(pi l (v+1)/2),
/// 0 <= k <= max_freq_u, 0 <= l <= max_freq_v, flat index k*(max_freq_v+1)+l.
struct BasisSpec {
  int max_freq_u = 5;
  int max_freq_v = 5;

  Eigen::Index size() const { return Eigen::Index(max_freq_u + 1) * (max_freq_v + 1); }
  Eigen::Index flat_index(int k, int l) const { return Eigen::Index(k) * (max_freq_v + 1) + l; }

  void validate() const {
    if (max_freq_u < 0 || max_freq_v < 0) throw InvalidArgument("basis frequencies must be >= 0");
  }

  friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

template <typename Scalar>
void check_domain(Scalar u, Scalar v) {
  using std::abs;
  if (!(abs(u) <= Scalar(1)) || !(abs(v) <= Scalar(1)))
    throw DomainError("sample (" + std::to_string(static_cast<double>(u)) + ", " +
                      std::to_string(static_cast<double>(v)) + ") lies outside [-1,1]^2");
}

template <typename Scalar>
VectorX<Scalar> cosines(int max_freq, Scalar t) {
  VectorX<Scalar> c(max_freq + 1);
  const Scalar remapped = (t + Scalar(1)) / Scalar(2);
  for (int k = 0; k <= max_freq; ++k) c[k] = std::cos(Scalar(std::numbers::pi) * Scalar(k) * remapped);
  return c;
}

}  // namespace detail

/// All N basis functions at (u, v). Throws DomainError outside [-1,1]^2.
template <typename Scalar>
VectorX<Scalar> eval_basis(const BasisSpec& spec, Scalar u, Scalar v) {
  detail::check_domain(u, v);
  const auto cu = detail::cosines(spec.max_freq_u, u);
  const auto cv = detail::cosines(spec.max_freq_v, v);
  VectorX<Scalar> phi(spec.size());
  for (int k = 0; k <= spec.max_freq_u; ++k)
    phi.segment(spec.flat_index(k, 0), spec.max_freq_v + 1) = cu[k] * cv;
  return phi;
}

/// Phi(G): one row of basis values per grid row (grid is |G| x 2).
template <typename Derived>
MatrixX<typename Derived::Scalar> basis_matrix(const BasisSpec& spec, const Eigen::MatrixBase<Derived>& grid) {
  using Scalar = typename Derived::Scalar;
  if (grid.cols() != 2) throw DimensionMismatch("grid must have 2 columns");
  MatrixX<Scalar> phi(grid.rows(), spec.size());
  for (Eigen::Index i = 0; i < grid.rows(); ++i) phi.row(i) = eval_basis<Scalar>(spec, grid(i, 0), grid(i, 1)).transpose();
  return phi;
}

/// Diagonal of the continuous Gram matrix over (u+1)/2, (v+1)/2 in [0,1]:
/// gamma_k * gamma_l with gamma_0 = 1, gamma_k = 1/2 otherwise.
template <typename Scalar = double>
VectorX<Scalar> gram_diagonal(const BasisSpec& spec) {
  VectorX<Scalar> g(spec.size());
  for (int k = 0; k <= spec.max_freq_u; ++k)
    for (int l = 0; l <= spec.max_freq_v; ++l)
      g[spec.flat_index(k, l)] = (k == 0 ? Scalar(1) : Scalar(0.5)) * (l == 0 ? Scalar(1) : Scalar(0.5));
  return g;
}

/// Continuous dictionary: atom m is phi(u)^T coeffs.col(m).
template <typename Scalar>
class Dictionary {
 public:
  using Matrix = MatrixX<Scalar>;

  Dictionary() = default;
  Dictionary(BasisSpec basis, Matrix coeffs) : basis_(basis), coeffs_(std::move(coeffs)) {
    basis_.validate();
    if (coeffs_.rows() != basis_.size())
      throw DimensionMismatch("dictionary has " + std::to_string(coeffs_.rows()) + " coefficient rows, basis has " +
                              std::to_string(basis_.size()) + " functions");
    if (!coeffs_.allFinite()) throw InvalidArgument("dictionary coefficients must be finite");
  }

  const BasisSpec& basis() const { return basis_; }
  const Matrix& coeffs() const { return coeffs_; }
  Eigen::Index atoms() const { return coeffs_.cols(); }

  void set_atom(Eigen::Index m, const Eigen::Ref<const VectorX<Scalar>>& a) {
    if (a.size() != coeffs_.rows()) throw DimensionMismatch("atom has wrong length");
    coeffs_.col(m) = a;
  }

  /// a_m^T Gamma a_m for every atom.
  VectorX<Scalar> norms_squared() const {
    const auto g = gram_diagonal<Scalar>(basis_);
    return (coeffs_.array().square().colwise() * g.array()).colwise().sum().transpose();
  }

  bool is_normalized(Scalar tol = Scalar(1e-8)) const {
    return atoms() == 0 || (norms_squared().array() - Scalar(1)).abs().maxCoeff() <= tol;
  }

 private:
  BasisSpec basis_;
  Matrix coeffs_;
};

using DictionaryD = Dictionary<double>;

/// D(G) = Phi(G) A, |G| x M.
template <typename Scalar, typename Derived>
MatrixX<Scalar> sample_dictionary(const Dictionary<Scalar>& dict, const Eigen::MatrixBase<Derived>& grid) {
  return basis_matrix(dict.basis(), grid) * dict.coeffs();
}

template <typename Scalar>
Scalar eval_atom(const Dictionary<Scalar>& dict, Eigen::Index m, Scalar u, Scalar v) {
  if (m < 0 || m >= dict.atoms()) throw InvalidArgument("atom index out of range");
  return eval_basis<Scalar>(dict.basis(), u, v).dot(dict.coeffs().col(m));
}

/// w(u) = sum over the support of z_m d_m(u), at each row of `points`.
template <typename Scalar, typename Derived>
VectorX<Scalar> reconstruct_signal(const Dictionary<Scalar>& dict, const SparseCode<Scalar>& code,
                                   const Eigen::MatrixBase<Derived>& points) {
  if (code.length() != dict.atoms()) throw DimensionMismatch("code length differs from atom count");
  VectorX<Scalar> a = VectorX<Scalar>::Zero(dict.basis().size());
  for (const auto& [m, z] : code.entries()) a.noalias() += z * dict.coeffs().col(m);
  return basis_matrix(dict.basis(), points) * a;
}

/// Scales each atom to unit continuous L2 norm. Throws ZeroAtom when an atom
/// has a_m^T Gamma a_m <= 1e-14.
template <typename Scalar>
Dictionary<Scalar> normalize_atoms(const Dictionary<Scalar>& dict) {
  const auto norms2 = dict.norms_squared();
  MatrixX<Scalar> coeffs = dict.coeffs();
  for (Eigen::Index m = 0; m < coeffs.cols(); ++m) {
    if (!(norms2[m] > Scalar(1e-14))) throw ZeroAtom("atom " + std::to_string(m) + " is identically zero");
    coeffs.col(m) /= std::sqrt(norms2[m]);
  }
  return Dictionary<Scalar>(dict.basis(), std::move(coeffs));
}

/// Pure cosine atoms: the first `atoms` basis functions, normalized.
template <typename Scalar = double>
Dictionary<Scalar> cosine_dictionary(const BasisSpec& spec, Eigen::Index atoms) {
  spec.validate();
  if (atoms < 1 || atoms > spec.size())
    throw InvalidArgument("cosine dictionary needs 1 <= atoms <= " + std::to_string(spec.size()));
  return normalize_atoms(Dictionary<Scalar>(spec, MatrixX<Scalar>::Identity(spec.size(), atoms)));
}

}  // namespace clouddict

#endif  // CLOUDDICT_BASIS_HPP
