#ifndef CLOUDDICT_SPARSE_CODE_HPP
#define CLOUDDICT_SPARSE_CODE_HPP

#include <cmath>
#include <map>

#include <Eigen/Core>

#include "clouddict/errors.hpp"

namespace clouddict {

/// Sparse coefficient vector of fixed length M. Only nonzero, finite
/// coefficients are stored.
template <typename Scalar>
class SparseCode {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  SparseCode() = default;
  explicit SparseCode(Eigen::Index length) : length_(length) {}

  Eigen::Index length() const { return length_; }
  Eigen::Index nnz() const { return static_cast<Eigen::Index>(entries_.size()); }
  bool empty() const { return entries_.empty(); }

  /// Stores `value` at atom m; zero erases the entry.
  void set(Eigen::Index m, Scalar value) {
    if (m < 0 || m >= length_) throw InvalidArgument("sparse code index out of range");
    if (!std::isfinite(static_cast<double>(value))) throw InvalidArgument("sparse code coefficient is not finite");
    if (value == Scalar(0))
      entries_.erase(m);
    else
      entries_[m] = value;
  }

  void erase(Eigen::Index m) { entries_.erase(m); }

  Scalar coeff(Eigen::Index m) const {
    const auto it = entries_.find(m);
    return it == entries_.end() ? Scalar(0) : it->second;
  }

  bool contains(Eigen::Index m) const { return entries_.count(m) != 0; }

  /// Atom index -> coefficient, ordered by atom index.
  const std::map<Eigen::Index, Scalar>& entries() const { return entries_; }

  Vector dense() const {
    Vector z = Vector::Zero(length_);
    for (const auto& [m, value] : entries_) z[m] = value;
    return z;
  }

  static SparseCode from_dense(const Eigen::Ref<const Vector>& z, Scalar prune = Scalar(0)) {
    SparseCode code(z.size());
    for (Eigen::Index m = 0; m < z.size(); ++m)
      if (std::abs(z[m]) > prune) code.set(m, z[m]);
    return code;
  }

  friend bool operator==(const SparseCode& a, const SparseCode& b) {
    return a.length_ == b.length_ && a.entries_ == b.entries_;
  }

 private:
  Eigen::Index length_ = 0;
  std::map<Eigen::Index, Scalar> entries_;
};

}  // namespace clouddict

#endif  // CLOUDDICT_SPARSE_CODE_HPP
