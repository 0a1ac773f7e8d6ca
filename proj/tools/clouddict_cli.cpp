// clouddict: synthesize, corrupt, learn, denoise and evaluate point clouds
// with continuous sparse dictionaries.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "clouddict/basis.hpp"
#include "clouddict/cloud_io.hpp"
#include "clouddict/dictionary_io.hpp"
#include "clouddict/dictlearn.hpp"
#include "clouddict/errors.hpp"
#include "clouddict/pipeline.hpp"

namespace fs = std::filesystem;
using namespace clouddict;

namespace {

const std::map<std::string, Shape> kShapes{{"plane", Shape::plane}, {"sphere", Shape::sphere}, {"saddle", Shape::saddle}};
const std::map<std::string, CenterStrategy> kStrategies{{"all", CenterStrategy::all},
                                                        {"poisson_stride", CenterStrategy::poisson_stride}};
const std::map<std::string, Solver> kSolvers{{"omp", Solver::omp}, {"relaxed", Solver::relaxed}};
const std::map<std::string, InitKind> kInits{{"random", InitKind::random}, {"cosine", InitKind::cosine}};
const std::map<std::string, CloudFormat> kFormats{{"xyz", CloudFormat::xyz}, {"ply", CloudFormat::ply_ascii}};

CloudFormat pick_format(const std::optional<CloudFormat>& forced, const fs::path& path) {
  return forced ? *forced : format_from_path(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

struct SynthArgs {
  Shape shape = Shape::plane;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  fs::path out;
  std::optional<CloudFormat> format;
};

struct NoiseArgs {
  fs::path in, out;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::optional<CloudFormat> format;
};

struct LearnArgs {
  fs::path in, out, trace = "trace.csv";
  double radius = 0.1;
  CenterStrategy strategy = CenterStrategy::poisson_stride;
  double spacing = 0.5;
  int min_patch_points = 3;
  LearnParams params;
};

struct DenoiseArgs {
  fs::path in, out, report;
  std::optional<fs::path> dict;
  BasisSpec basis;
  Eigen::Index n_atoms = 0;
  DenoiseParams params;
  std::optional<CloudFormat> format;
};

struct EvalArgs {
  fs::path a;
  std::optional<fs::path> b;
  std::optional<Shape> shape;
  int threads = 0;
};

int run_synth(const SynthArgs& args) {
  const PointCloud cloud = synth_cloud(args.shape, args.n, args.seed);
  write_cloud(cloud, args.out, pick_format(args.format, args.out));
  std::cout << "points " << cloud.size() << '\n';
  return 0;
}

int run_noise(const NoiseArgs& args) {
  const PointCloud cloud = read_cloud(args.in);
  const PointCloud noisy = add_noise(cloud, NoiseSpec{args.sigma, args.seed});
  write_cloud(noisy, args.out, pick_format(args.format, args.out));
  std::cout << "points " << noisy.size() << '\n';
  return 0;
}

int run_learn(const LearnArgs& args) {
  const PointCloud cloud = read_cloud(args.in);
  const int min_points = std::max(args.min_patch_points, args.params.sparsity_L + 1);
  const TrainSet train =
      extract_patches(cloud, args.radius, args.strategy, args.spacing, min_points, args.params.threads);
  if (train.empty())
    throw InvalidArgument("no usable training patches: cloud has " + std::to_string(cloud.size()) +
                          " points and no neighborhood of radius " + format_double(args.radius) + " with >= " +
                          std::to_string(min_points) + " non-collinear points");
  const LearnResult result = learn(train, args.params);

  std::ostringstream dict_text, trace_text;
  write_dictionary(result.dictionary, dict_text);
  write_trace_csv(result.trace, trace_text);
  write_text(args.out, dict_text.str());
  write_text(args.trace, trace_text.str());
  std::cout << "patches " << train.size() << '\n'
            << "iterations " << result.trace.per_iteration_error.size() << '\n'
            << "final_error " << format_double(result.trace.per_iteration_error.back()) << '\n';
  return 0;
}

int run_denoise(const DenoiseArgs& args) {
  const DictionaryD dict = args.dict ? read_dictionary(*args.dict)
                                     : cosine_dictionary(args.basis, args.n_atoms > 0 ? args.n_atoms : args.basis.size());
  const PointCloud cloud = read_cloud(args.in);
  const DenoiseResult result = denoise(cloud, dict, args.params);
  const std::string report = to_key_value(result.report);
  write_cloud(result.cloud, args.out, pick_format(args.format, args.out));
  if (!args.report.empty()) write_text(args.report, report);
  std::cout << report;
  return 0;
}

int run_eval(const EvalArgs& args) {
  const PointCloud a = read_cloud(args.a);
  if (a.empty()) throw InvalidArgument("cloud '" + args.a.string() + "' is empty");
  if (args.b) {
    const PointCloud b = read_cloud(*args.b);
    if (b.empty()) throw InvalidArgument("cloud '" + args.b->string() + "' is empty");
    std::cout << "chamfer " << format_double(chamfer_distance(a, b, args.threads)) << '\n';
  }
  if (args.shape) std::cout << "rmse " << format_double(rmse_to_surface(a, *args.shape)) << '\n';
  return 0;
}

void add_format_option(CLI::App* cmd, std::optional<CloudFormat>& format) {
  cmd->add_option("--format", format, "Output format (default: from extension)")
      ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous sparse dictionaries for point clouds"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Sample points from an analytic surface");
  synth_cmd->add_option("--shape", synth.shape, "plane, sphere or saddle")
      ->required()
      ->transform(CLI::CheckedTransformer(kShapes, CLI::ignore_case));
  synth_cmd->add_option("--n", synth.n, "Number of points")->required()->check(CLI::Range(std::size_t{1}, std::size_t{1} << 31));
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--out", synth.out, "Output cloud (.xyz or .ply)")->required();
  add_format_option(synth_cmd, synth.format);

  NoiseArgs noise;
  auto* noise_cmd = app.add_subcommand("noise", "Add isotropic Gaussian noise");
  noise_cmd->add_option("--in", noise.in, "Input cloud")->required()->check(CLI::ExistingFile);
  noise_cmd->add_option("--out", noise.out, "Output cloud")->required();
  noise_cmd->add_option("--sigma", noise.sigma, "Noise standard deviation (world units)")
      ->required()
      ->check(CLI::NonNegativeNumber);
  noise_cmd->add_option("--seed", noise.seed, "Random seed");
  add_format_option(noise_cmd, noise.format);

  LearnArgs lrn;
  auto* learn_cmd = app.add_subcommand("learn", "Learn a continuous dictionary from cloud patches");
  learn_cmd->add_option("--in", lrn.in, "Training cloud")->required()->check(CLI::ExistingFile);
  learn_cmd->add_option("--out", lrn.out, "Output dictionary (CDICT v1)")->required();
  learn_cmd->add_option("--trace", lrn.trace, "Output error trace CSV")->capture_default_str();
  learn_cmd->add_option("--radius", lrn.radius, "Patch radius (world units)")->required()->check(CLI::PositiveNumber);
  learn_cmd->add_option("--strategy", lrn.strategy, "Patch centers: all or poisson_stride")
      ->transform(CLI::CheckedTransformer(kStrategies, CLI::ignore_case));
  learn_cmd->add_option("--spacing", lrn.spacing, "poisson_stride covering radius as a fraction of --radius")
      ->check(CLI::Range(1e-6, 1.0))
      ->capture_default_str();
  learn_cmd->add_option("--min-patch-points", lrn.min_patch_points)->check(CLI::Range(3, 1 << 30))->capture_default_str();
  learn_cmd->add_option("--n-atoms", lrn.params.n_atoms, "Dictionary size M")->check(CLI::PositiveNumber)->capture_default_str();
  learn_cmd->add_option("--max-freq-u", lrn.params.basis.max_freq_u)->check(CLI::NonNegativeNumber)->capture_default_str();
  learn_cmd->add_option("--max-freq-v", lrn.params.basis.max_freq_v)->check(CLI::NonNegativeNumber)->capture_default_str();
  learn_cmd->add_option("--sparsity-L", lrn.params.sparsity_L)->check(CLI::NonNegativeNumber)->capture_default_str();
  learn_cmd->add_option("--outer-iters", lrn.params.outer_iters)->check(CLI::PositiveNumber)->capture_default_str();
  learn_cmd->add_option("--error-threshold", lrn.params.error_threshold)->check(CLI::NonNegativeNumber)->capture_default_str();
  learn_cmd->add_option("--ridge", lrn.params.inner_ls_ridge, "Relative ridge for atom updates")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  learn_cmd->add_option("--atom-update-rounds", lrn.params.atom_update_rounds)->check(CLI::PositiveNumber)->capture_default_str();
  learn_cmd->add_option("--stall-tolerance", lrn.params.stall_tolerance, "Relative decrease below which an atom is restarted (0 disables)")
      ->check(CLI::Range(0.0, 0.999999))
      ->capture_default_str();
  learn_cmd->add_option("--init", lrn.params.init, "random or cosine")
      ->transform(CLI::CheckedTransformer(kInits, CLI::ignore_case));
  learn_cmd->add_option("--seed", lrn.params.seed, "Random seed");
  learn_cmd->add_option("--threads", lrn.params.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  DenoiseArgs den;
  den.params.threads = 0;
  auto* denoise_cmd = app.add_subcommand("denoise", "Denoise a cloud by sparse coding overlapping patches");
  denoise_cmd->add_option("--in", den.in, "Noisy cloud")->required()->check(CLI::ExistingFile);
  denoise_cmd->add_option("--out", den.out, "Denoised cloud")->required();
  denoise_cmd->add_option("--report", den.report, "Write the report to this file");
  auto* dict_opt = denoise_cmd->add_option("--dict", den.dict, "CDICT v1 dictionary file")->check(CLI::ExistingFile);
  denoise_cmd->add_option("--max-freq-u", den.basis.max_freq_u, "Cosine dictionary when --dict is absent")
      ->check(CLI::NonNegativeNumber)
      ->excludes(dict_opt);
  denoise_cmd->add_option("--max-freq-v", den.basis.max_freq_v)->check(CLI::NonNegativeNumber)->excludes(dict_opt);
  denoise_cmd->add_option("--n-atoms", den.n_atoms, "Cosine atoms (default: full basis)")
      ->check(CLI::PositiveNumber)
      ->excludes(dict_opt);
  denoise_cmd->add_option("--radius", den.params.radius)->required()->check(CLI::PositiveNumber);
  denoise_cmd->add_option("--strategy", den.params.center_strategy)
      ->transform(CLI::CheckedTransformer(kStrategies, CLI::ignore_case));
  denoise_cmd->add_option("--spacing", den.params.center_spacing)->check(CLI::Range(1e-6, 1.0))->capture_default_str();
  denoise_cmd->add_option("--solver", den.params.solver)->transform(CLI::CheckedTransformer(kSolvers, CLI::ignore_case));
  denoise_cmd->add_option("--sparsity-L", den.params.pursuit.sparsity_L)->check(CLI::NonNegativeNumber)->capture_default_str();
  denoise_cmd->add_option("--residual-tol", den.params.pursuit.residual_tol)->check(CLI::NonNegativeNumber);
  denoise_cmd->add_option("--lambda", den.params.pursuit.lambda)->check(CLI::NonNegativeNumber)->capture_default_str();
  denoise_cmd->add_option("--noise-sigma", den.params.noise_sigma, "Noise estimate; sets a per-patch lambda")
      ->check(CLI::NonNegativeNumber);
  denoise_cmd->add_option("--lambda-scale", den.params.lambda_scale)->check(CLI::PositiveNumber)->capture_default_str();
  denoise_cmd->add_option("--max-iters", den.params.pursuit.max_iters)->check(CLI::PositiveNumber)->capture_default_str();
  denoise_cmd->add_option("--min-patch-points", den.params.min_patch_points)->check(CLI::Range(3, 1 << 30));
  denoise_cmd->add_option("--threads", den.params.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  add_format_option(denoise_cmd, den.format);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Chamfer distance and/or RMSE to an analytic surface");
  eval_cmd->add_option("--a", ev.a, "Cloud to evaluate")->required()->check(CLI::ExistingFile);
  auto* b_opt = eval_cmd->add_option("--b", ev.b, "Reference cloud (Chamfer)")->check(CLI::ExistingFile);
  auto* shape_opt = eval_cmd->add_option("--shape", ev.shape, "Analytic surface (RMSE)")
                        ->transform(CLI::CheckedTransformer(kShapes, CLI::ignore_case));
  eval_cmd->add_option("--threads", ev.threads)->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
    if (eval_cmd->parsed() && b_opt->count() == 0 && shape_opt->count() == 0)
      throw CLI::ValidationError("eval", "needs --b and/or --shape");
    if (denoise_cmd->parsed()) den.params.validate();
    if (learn_cmd->parsed()) lrn.params.validate();
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const clouddict::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth);
    if (noise_cmd->parsed()) return run_noise(noise);
    if (learn_cmd->parsed()) return run_learn(lrn);
    if (denoise_cmd->parsed()) return run_denoise(den);
    if (eval_cmd->parsed()) return run_eval(ev);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
