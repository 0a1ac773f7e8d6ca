#include "clouddict/pursuit.hpp"

namespace clouddict {

CodedPatch code_patch(const Patch& patch, const DictionaryD& dict, const PursuitParams& params, Solver solver) {
  if (patch.grid.rows() == 0) throw InvalidArgument("cannot code an empty patch");
  const Eigen::MatrixXd design = sample_dictionary(dict, patch.grid);
  CodedPatch out{run_solver<double>(solver, patch.values, design, params), {}};
  out.residual = patch.values - design * out.code.dense();
  return out;
}

}  // namespace clouddict
