#ifndef CLOUDDICT_DICTLEARN_HPP
#define CLOUDDICT_DICTLEARN_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "clouddict/basis.hpp"
#include "clouddict/geometry.hpp"
#include "clouddict/sparse_code.hpp"

namespace clouddict {

using TrainSet = std::vector<Patch>;
using CodeD = SparseCode<double>;

enum class InitKind { random, cosine };

struct LearnParams {
  Eigen::Index n_atoms = 36;
  BasisSpec basis;
  int sparsity_L = 4;
  int outer_iters = 20;
  double error_threshold = 0.0;  // early stop on the mean per-sample squared residual
  std::uint64_t seed = 0;
  double inner_ls_ridge = 1e-8;  // relative to the mean diagonal of the atom normal equations
  int atom_update_rounds = 2;
  bool spectral_start = true;  // also run the alternation from a spectral start, keep the better
  InitKind init = InitKind::random;
  // When an iteration lowers the error by less than this fraction, one atom is
  // re-seeded from a badly represented patch's residual. Zero disables this.
  double stall_tolerance = 1e-3;
  int threads = 0;

  void validate() const;
};

struct LearnTrace {
  std::vector<double> per_iteration_error;
  std::vector<int> replacements;  // atoms replaced in each iteration (exempt from monotonicity)
};

/// Patch with an identity frame, unit scale and indices 0..n-1; for training
/// sets that do not come from a cloud.
Patch make_signal(Eigen::MatrixX2d grid, Eigen::VectorXd values);

/// Random Gaussian (or pure cosine) coefficients, continuous-normalized.
DictionaryD init_dictionary(const LearnParams& params);

/// OMP with sparsity_L on each patch's own D(G_i).
std::vector<CodeD> sparse_code_all(const TrainSet& train, const DictionaryD& dict, const LearnParams& params);

/// Indices of the codes with a nonzero coefficient on atom m.
std::vector<std::size_t> atom_support(std::span<const CodeD> codes, Eigen::Index m);

struct AtomUpdate {
  Eigen::VectorXd atom;                                  // new a_m, continuous-normalized
  std::vector<std::pair<std::size_t, double>> usages;    // new z_im for i in the support
  bool replaced = false;                                 // support was empty; atom re-seeded
  double residual_before = 0.0;                          // restricted residual before the update
  double residual_after = 0.0;
};

/// Updates atom m restricted to the examples that use it.
///
/// With e_i = y_i - D(G_i) z_i + d_m(G_i) z_im, alternates a ridge least
/// squares solve for a_m and scalar refits of z_im, then normalizes a_m and
/// rescales z_im so reconstructions are unchanged. The update is rejected
/// (old atom kept) if it would increase sum_i ||e_i - z_im d_m(G_i)||^2.
/// With spectral_start, a second alternation starts from the top generalized
/// eigenvector of (sum_i s_i s_i', sum_i Phi_i' Phi_i), s_i = Phi_i' e_i, and
/// the lower restricted residual wins.
/// An unused atom is replaced by the basis projection of the patch with the
/// largest per-sample residual.
AtomUpdate update_atom(const TrainSet& train, std::span<const CodeD> codes, const DictionaryD& dict, Eigen::Index m,
                       const LearnParams& params);

/// Mean over patches of ||y_i - D(G_i) z_i||^2 / |G_i|.
double mean_residual(const TrainSet& train, std::span<const CodeD> codes, const DictionaryD& dict);

/// Mean over patches of ||y_i||^2 / |G_i|.
double mean_energy(const TrainSet& train);

struct LearnResult {
  DictionaryD dictionary;
  LearnTrace trace;
  std::vector<CodeD> codes;
};

/// Continuous k-SVD. Each outer iteration codes every patch (keeping the
/// previous code when the new one is worse), sweeps the atom updates, and
/// records mean_residual.
///
/// On a stall, the atoms are ranked by how much the error would grow without
/// them and the patches by residual; successive restarts walk through atoms
/// first, then patches, re-seeding the chosen atom from the chosen patch's
/// residual. Restart iterations count as replacements. The best iterate is
/// returned and the last trace entry reports its error.
LearnResult learn(const TrainSet& train, const LearnParams& params);

/// `iteration,error` with 0-based iterations.
void write_trace_csv(const LearnTrace& trace, std::ostream& out);
void write_trace_csv(const LearnTrace& trace, const std::filesystem::path& path);

}  // namespace clouddict

#endif  // CLOUDDICT_DICTLEARN_HPP
