#include "clouddict/dictlearn.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "clouddict/cloud_io.hpp"
#include "clouddict/errors.hpp"
#include "clouddict/parallel.hpp"
#include "clouddict/pursuit.hpp"
#include "clouddict/random.hpp"

namespace clouddict {

namespace {

// Per-patch basis matrices Phi(G_i) and their Gram matrices, computed on
// first use. Not thread-safe unless fill() was called first.
class BasisCache {
 public:
  BasisCache(const TrainSet& train, const BasisSpec& spec)
      : train_(train), spec_(spec), phi_(train.size()), gram_(train.size()) {}

  void fill(int threads) {
    parallel_for(train_.size(), threads, [&](std::size_t i) {
      phi(i);
      gram(i);
    });
  }

  const Eigen::MatrixXd& phi(std::size_t i) {
    if (phi_[i].size() == 0) phi_[i] = basis_matrix(spec_, train_[i].grid);
    return phi_[i];
  }

  const Eigen::MatrixXd& gram(std::size_t i) {
    if (gram_[i].size() == 0) gram_[i] = phi(i).transpose() * phi(i);
    return gram_[i];
  }

 private:
  const TrainSet& train_;
  BasisSpec spec_;
  std::vector<Eigen::MatrixXd> phi_;
  std::vector<Eigen::MatrixXd> gram_;
};

Eigen::VectorXd combined_coeffs(const DictionaryD& dict, const CodeD& code) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(dict.basis().size());
  for (const auto& [m, z] : code.entries()) a.noalias() += z * dict.coeffs().col(m);
  return a;
}

double patch_residual2(const Patch& patch, const Eigen::MatrixXd& phi, const DictionaryD& dict, const CodeD& code) {
  return (patch.values - phi * combined_coeffs(dict, code)).squaredNorm();
}

// Solves (H + ridge I) a = rhs, or the minimum-norm least-squares system
// when ridge is zero.
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& h, const Eigen::VectorXd& rhs, double relative_ridge) {
  if (relative_ridge > 0.0) {
    const double scale = h.trace() / static_cast<double>(h.rows());
    const double ridge = relative_ridge * (scale > 0.0 ? scale : 1.0);
    Eigen::MatrixXd reg = h;
    reg.diagonal().array() += ridge;
    return reg.ldlt().solve(rhs);
  }
  return h.completeOrthogonalDecomposition().solve(rhs);
}

void validate_train(const TrainSet& train) {
  if (train.empty()) throw InvalidArgument("training set is empty");
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].grid.rows() == 0) throw InvalidArgument("training patch " + std::to_string(i) + " is empty");
    if (train[i].grid.rows() != train[i].values.size())
      throw DimensionMismatch("training patch " + std::to_string(i) + " grid/values size mismatch");
  }
}

std::vector<CodeD> code_all(const TrainSet& train, BasisCache& cache, const DictionaryD& dict, int sparsity,
                            int threads) {
  PursuitParams pursuit;
  pursuit.sparsity_L = sparsity;
  std::vector<CodeD> codes(train.size());
  parallel_for(train.size(), threads, [&](std::size_t i) {
    const Eigen::MatrixXd design = cache.phi(i) * dict.coeffs();
    codes[i] = omp(train[i].values, design, pursuit);
  });
  return codes;
}

double mean_residual_cached(const TrainSet& train, BasisCache& cache, std::span<const CodeD> codes,
                            const DictionaryD& dict) {
  double sum = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i)
    sum += patch_residual2(train[i], cache.phi(i), dict, codes[i]) / static_cast<double>(train[i].size());
  return sum / static_cast<double>(train.size());
}

// Continuous-normalized ridge projection onto the basis of the patch with
// the largest per-sample residual (lowest index on ties).
std::optional<Eigen::VectorXd> worst_patch_atom(const TrainSet& train, BasisCache& cache, std::span<const CodeD> codes,
                                                const DictionaryD& dict, const LearnParams& params) {
  std::ptrdiff_t worst = -1;
  double worst_err = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const double err = patch_residual2(train[i], cache.phi(i), dict, codes[i]) / static_cast<double>(train[i].size());
    if (err > worst_err) {
      worst_err = err;
      worst = static_cast<std::ptrdiff_t>(i);
    }
  }
  if (worst < 0) return std::nullopt;
  const auto& phi = cache.phi(worst);
  const Eigen::VectorXd atom =
      ridge_solve(cache.gram(worst), phi.transpose() * train[worst].values, params.inner_ls_ridge);
  const double norm2 = atom.dot(gram_diagonal(dict.basis()).cwiseProduct(atom));
  if (!(norm2 > 1e-14) || !atom.allFinite()) return std::nullopt;
  return atom / std::sqrt(norm2);
}

// Increase of the total squared residual if atom m were dropped from every code.
double atom_contribution(const TrainSet& train, BasisCache& cache, std::span<const CodeD> codes,
                         const DictionaryD& dict, Eigen::Index m) {
  double sum = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const double z = codes[i].coeff(m);
    if (z == 0.0) continue;
    const Eigen::VectorXd r = train[i].values - cache.phi(i) * combined_coeffs(dict, codes[i]);
    const Eigen::VectorXd d = z * (cache.phi(i) * dict.coeffs().col(m));
    sum += ((r + d).squaredNorm() - r.squaredNorm()) / static_cast<double>(train[i].size());
  }
  return sum;
}

// Atom fitted to what remains of the patch ranked `rank` by per-sample
// residual (0 = worst, ties by index) after coding it with L-1 of the other
// atoms. For an L-sparse patch missing one atom, that remainder is the
// missing atom sampled on the patch grid.
std::optional<Eigen::VectorXd> residual_atom(const TrainSet& train, BasisCache& cache, std::span<const CodeD> codes,
                                             const DictionaryD& dict, Eigen::Index target, const LearnParams& params,
                                             std::size_t rank) {
  std::vector<std::pair<double, std::size_t>> order(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    order[i] = {-patch_residual2(train[i], cache.phi(i), dict, codes[i]) / static_cast<double>(train[i].size()), i};
  std::sort(order.begin(), order.end());
  const std::size_t i = order[rank % order.size()].second;

  Eigen::MatrixXd others(dict.basis().size(), dict.atoms() - 1);
  for (Eigen::Index m = 0, c = 0; m < dict.atoms(); ++m)
    if (m != target) others.col(c++) = dict.coeffs().col(m);
  PursuitParams pursuit;
  pursuit.sparsity_L = std::max(params.sparsity_L - 1, 0);
  const Eigen::MatrixXd design = cache.phi(i) * others;
  const auto partial = omp(train[i].values, design, pursuit);
  const Eigen::VectorXd r = train[i].values - design * partial.dense();

  const Eigen::VectorXd atom = ridge_solve(cache.gram(i), cache.phi(i).transpose() * r, params.inner_ls_ridge);
  const double norm2 = atom.dot(gram_diagonal(dict.basis()).cwiseProduct(atom));
  if (!(norm2 > 1e-14) || !atom.allFinite()) return std::nullopt;
  return atom / std::sqrt(norm2);
}

AtomUpdate update_atom_cached(const TrainSet& train, BasisCache& cache, std::span<const CodeD> codes,
                              const DictionaryD& dict, Eigen::Index m, const LearnParams& params) {
  const auto gamma = gram_diagonal(dict.basis());
  const Eigen::VectorXd old_atom = dict.coeffs().col(m);
  AtomUpdate out;
  out.atom = old_atom;

  const auto support = atom_support(codes, m);
  if (support.empty()) {
    if (auto atom = worst_patch_atom(train, cache, codes, dict, params)) {
      out.atom = std::move(*atom);
      out.replaced = true;
    }
    return out;
  }

  const std::size_t count = support.size();
  std::vector<Eigen::VectorXd> targets(count);
  Eigen::VectorXd z(static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = support[k];
    z[k] = codes[i].coeff(m);
    targets[k] = train[i].values - cache.phi(i) * (combined_coeffs(dict, codes[i]) - z[k] * old_atom);
  }
  auto restricted = [&](const Eigen::VectorXd& atom, const Eigen::VectorXd& coef) {
    double sum = 0.0;
    for (std::size_t k = 0; k < count; ++k)
      sum += (targets[k] - coef[k] * (cache.phi(support[k]) * atom)).squaredNorm();
    return sum;
  };
  out.residual_before = restricted(old_atom, z);

  const auto n_basis = dict.basis().size();
  auto refit_coef = [&](const Eigen::VectorXd& atom, Eigen::VectorXd& coef) {
    for (std::size_t k = 0; k < count; ++k) {
      const Eigen::VectorXd sampled = cache.phi(support[k]) * atom;
      const double den = sampled.squaredNorm();
      coef[k] = den > 0.0 ? sampled.dot(targets[k]) / den : 0.0;
    }
  };
  auto alternate = [&](Eigen::VectorXd& atom, Eigen::VectorXd& coef) {
    for (int round = 0; round < params.atom_update_rounds; ++round) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_basis, n_basis);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_basis);
      for (std::size_t k = 0; k < count; ++k) {
        h.noalias() += coef[k] * coef[k] * cache.gram(support[k]);
        rhs.noalias() += coef[k] * (cache.phi(support[k]).transpose() * targets[k]);
      }
      atom = ridge_solve(h, rhs, params.inner_ls_ridge);
      refit_coef(atom, coef);
    }
    return atom.allFinite() && coef.allFinite() ? restricted(atom, coef) : std::numeric_limits<double>::infinity();
  };

  Eigen::VectorXd atom = old_atom;
  Eigen::VectorXd coef = z;
  double after = alternate(atom, coef);

  if (params.spectral_start) {
    // With a shared grid the restricted optimum is the top generalized
    // eigenvector of (sum s s', sum H), s = Phi' e; on differing grids it is a
    // second starting point that often escapes the old atom's basin.
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(n_basis, n_basis);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_basis, n_basis);
    for (std::size_t k = 0; k < count; ++k) {
      const Eigen::VectorXd sk = cache.phi(support[k]).transpose() * targets[k];
      outer.noalias() += sk * sk.transpose();
      gram += cache.gram(support[k]);
    }
    gram.diagonal().array() += 1e-10 * std::max(gram.trace() / static_cast<double>(n_basis), 1e-300);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(outer, gram);
    if (eig.info() == Eigen::Success) {
      Eigen::VectorXd alt_atom = eig.eigenvectors().col(n_basis - 1);
      Eigen::VectorXd alt_coef(static_cast<Eigen::Index>(count));
      refit_coef(alt_atom, alt_coef);
      const double alt_after = alternate(alt_atom, alt_coef);
      if (alt_after < after) {
        atom = std::move(alt_atom);
        coef = std::move(alt_coef);
        after = alt_after;
      }
    }
  }

  const double norm2 = atom.dot(gamma.cwiseProduct(atom));
  if (!(norm2 > 1e-14) || !(after <= out.residual_before)) {
    out.residual_after = out.residual_before;
    for (std::size_t k = 0; k < count; ++k) out.usages.emplace_back(support[k], z[k]);
    return out;
  }
  const double s = std::sqrt(norm2);
  out.atom = atom / s;
  coef *= s;
  out.residual_after = restricted(out.atom, coef);
  for (std::size_t k = 0; k < count; ++k) out.usages.emplace_back(support[k], coef[k]);
  return out;
}

}  // namespace

void LearnParams::validate() const {
  basis.validate();
  if (n_atoms < 1) throw InvalidArgument("n_atoms must be >= 1");
  if (sparsity_L < 0) throw InvalidArgument("sparsity_L must be >= 0");
  if (outer_iters < 1) throw InvalidArgument("outer_iters must be >= 1");
  if (!(error_threshold >= 0.0)) throw InvalidArgument("error_threshold must be >= 0");
  if (!(stall_tolerance >= 0.0 && stall_tolerance < 1.0)) throw InvalidArgument("stall_tolerance must lie in [0, 1)");
  if (!(inner_ls_ridge >= 0.0)) throw InvalidArgument("inner_ls_ridge must be >= 0");
  if (atom_update_rounds < 1) throw InvalidArgument("atom_update_rounds must be >= 1");
  if (init == InitKind::cosine && n_atoms > basis.size())
    throw InvalidArgument("cosine initialization needs n_atoms <= basis size " + std::to_string(basis.size()));
}

Patch make_signal(Eigen::MatrixX2d grid, Eigen::VectorXd values) {
  if (grid.rows() != values.size()) throw DimensionMismatch("grid and values differ in length");
  Patch p;
  p.indices.resize(static_cast<std::size_t>(values.size()));
  for (std::size_t i = 0; i < p.indices.size(); ++i) p.indices[i] = static_cast<Index>(i);
  p.grid = std::move(grid);
  p.values = std::move(values);
  return p;
}

DictionaryD init_dictionary(const LearnParams& params) {
  params.validate();
  if (params.init == InitKind::cosine) return cosine_dictionary(params.basis, params.n_atoms);
  Rng rng(params.seed);
  Eigen::MatrixXd a(params.basis.size(), params.n_atoms);
  for (Eigen::Index m = 0; m < a.cols(); ++m)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, m) = rng.normal();
  return normalize_atoms(DictionaryD(params.basis, std::move(a)));
}

std::vector<CodeD> sparse_code_all(const TrainSet& train, const DictionaryD& dict, const LearnParams& params) {
  BasisCache cache(train, dict.basis());
  cache.fill(params.threads);
  return code_all(train, cache, dict, params.sparsity_L, params.threads);
}

std::vector<std::size_t> atom_support(std::span<const CodeD> codes, Eigen::Index m) {
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < codes.size(); ++i)
    if (codes[i].contains(m)) support.push_back(i);
  return support;
}

AtomUpdate update_atom(const TrainSet& train, std::span<const CodeD> codes, const DictionaryD& dict, Eigen::Index m,
                       const LearnParams& params) {
  if (codes.size() != train.size()) throw DimensionMismatch("one code per training patch required");
  if (m < 0 || m >= dict.atoms()) throw InvalidArgument("atom index out of range");
  BasisCache cache(train, dict.basis());
  return update_atom_cached(train, cache, codes, dict, m, params);
}

double mean_residual(const TrainSet& train, std::span<const CodeD> codes, const DictionaryD& dict) {
  if (codes.size() != train.size()) throw DimensionMismatch("one code per training patch required");
  BasisCache cache(train, dict.basis());
  return mean_residual_cached(train, cache, codes, dict);
}

double mean_energy(const TrainSet& train) {
  double sum = 0.0;
  for (const auto& p : train) sum += p.values.squaredNorm() / static_cast<double>(p.size());
  return train.empty() ? 0.0 : sum / static_cast<double>(train.size());
}

LearnResult learn(const TrainSet& train, const LearnParams& params) {
  params.validate();
  validate_train(train);

  BasisCache cache(train, params.basis);
  cache.fill(params.threads);

  LearnResult result{init_dictionary(params), {}, {}};
  DictionaryD& dict = result.dictionary;
  std::vector<CodeD>& codes = result.codes;
  std::size_t restarts = 0;
  double best_err = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd best_coeffs;
  std::vector<CodeD> best_codes;

  for (int it = 0; it < params.outer_iters; ++it) {
    auto fresh = code_all(train, cache, dict, params.sparsity_L, params.threads);
    if (!codes.empty()) {
      // OMP is not optimal; keep the previous code when it still fits better.
      parallel_for(train.size(), params.threads, [&](std::size_t i) {
        const double old_err = patch_residual2(train[i], cache.phi(i), dict, codes[i]);
        const double new_err = patch_residual2(train[i], cache.phi(i), dict, fresh[i]);
        if (new_err <= old_err) codes[i] = std::move(fresh[i]);
      });
    } else {
      codes = std::move(fresh);
    }

    int replaced = 0;
    for (Eigen::Index m = 0; m < dict.atoms(); ++m) {
      const AtomUpdate update = update_atom_cached(train, cache, codes, dict, m, params);
      dict.set_atom(m, update.atom);
      for (const auto& [i, z] : update.usages) codes[i].set(m, z);
      if (update.replaced) ++replaced;
    }

    double err = mean_residual_cached(train, cache, codes, dict);
    if (err <= params.error_threshold) {
      result.trace.per_iteration_error.push_back(err);
      result.trace.replacements.push_back(replaced);
      break;
    }

    const bool stalled = !result.trace.per_iteration_error.empty() && params.stall_tolerance > 0.0 &&
                         result.trace.per_iteration_error.back() - err <=
                             params.stall_tolerance * result.trace.per_iteration_error.back();
    if (err < best_err) {
      best_err = err;
      best_coeffs = dict.coeffs();
      best_codes = codes;
    }
    if (stalled && it + 1 < params.outer_iters) {
      // A restart that settled worse than the best state is abandoned.
      if (err > best_err) {
        dict = DictionaryD(params.basis, best_coeffs);
        codes = best_codes;
      }
      // Restarts cycle through atoms (weakest first) and then through patches
      // (worst first) so a repeated stall tries a different pair.
      const auto n_atoms = static_cast<std::size_t>(dict.atoms());
      std::vector<std::pair<double, Eigen::Index>> order(n_atoms);
      for (Eigen::Index m = 0; m < dict.atoms(); ++m)
        order[m] = {atom_contribution(train, cache, codes, dict, m), m};
      std::sort(order.begin(), order.end());
      const Eigen::Index target = order[restarts % n_atoms].second;
      const std::size_t patch_rank = restarts / n_atoms;
      ++restarts;
      for (auto& code : codes) code.erase(target);
      if (auto atom = residual_atom(train, cache, codes, dict, target, params, patch_rank)) dict.set_atom(target, *atom);
      ++replaced;
      err = mean_residual_cached(train, cache, codes, dict);
    }
    result.trace.per_iteration_error.push_back(err);
    result.trace.replacements.push_back(replaced);
  }
  // Restarts may leave the last iterate worse than an earlier one; return the
  // best and let the final trace entry report it.
  if (best_err < mean_residual_cached(train, cache, codes, dict)) {
    dict = DictionaryD(params.basis, std::move(best_coeffs));
    codes = std::move(best_codes);
    result.trace.per_iteration_error.back() = best_err;
  }
  return result;
}

void write_trace_csv(const LearnTrace& trace, std::ostream& out) {
  out << "iteration,error\n";
  for (std::size_t i = 0; i < trace.per_iteration_error.size(); ++i)
    out << i << ',' << format_double(trace.per_iteration_error[i]) << '\n';
}

void write_trace_csv(const LearnTrace& trace, const std::filesystem::path& path) {
  std::ostringstream buffer;
  write_trace_csv(trace, buffer);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << buffer.str();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace clouddict
