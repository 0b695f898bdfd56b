#include "mfai_cli/cli.hpp"

#include <cmath>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfai/mfai.hpp"

namespace mfai::cli {

namespace {

namespace fs = std::filesystem;

// Bad combinations of otherwise well-formed flags.
struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::size_t threads = 1;
  bool progress = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--threads", c.threads, "Worker threads for data-parallel steps")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--progress", c.progress, "Print per-iteration ELBO to stderr");
}

struct FitFlags {
  std::size_t max_iter = 500;
  double tol = 1e-6;
  double shrinkage = 0.1;
  std::string noise = "shared";
  std::uint64_t seed = 1;
  std::size_t max_depth = 3;
  std::size_t min_node = 10;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--noise", f.noise, "Noise model")
      ->check(CLI::IsMember({"shared", "per-feature"}));
  cmd->add_option("--shrinkage", f.shrinkage, "Learning rate per tree")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--max-iter", f.max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--tol", f.tol, "Relative ELBO change for convergence")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Seed for initialization");
  cmd->add_option("--max-depth", f.max_depth, "Tree depth")->check(CLI::PositiveNumber);
  cmd->add_option("--min-node", f.min_node, "Minimum rows per tree node")
      ->check(CLI::PositiveNumber);
}

FitOptions make_options(const FitFlags& f, const Common& c, std::ostream& err) {
  FitOptions o;
  o.max_iter = f.max_iter;
  o.tol_elbo_rel = f.tol;
  o.shrinkage = f.shrinkage;
  if (!(f.shrinkage > 0.0 && f.shrinkage < 1.0)) {
    throw ArgumentError("--shrinkage must lie strictly between 0 and 1");
  }
  o.noise_mode = noise_mode_from_string(f.noise);
  o.seed = f.seed;
  o.threads = c.threads;
  o.tree_params.max_depth = f.max_depth;
  o.tree_params.min_node = f.min_node;
  if (c.progress) {
    o.on_iteration = [&err](std::size_t it, double value) {
      err << "iter " << it << " elbo " << format_number(value) << '\n';
    };
  }
  return o;
}

void require_file(const std::string& path, const char* flag) {
  if (!fs::exists(path)) throw ArgumentError(std::string(flag) + ": no such file '" + path + "'");
}

nlohmann::ordered_json matrix_rows(const Eigen::MatrixXd& a) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  SimConfig cfg;
  double train_ratio = 0.5;
  std::string out;
};

void do_simulate(const SimulateArgs& a, std::ostream& out) {
  const SimTruth t = simulate_dataset(a.cfg);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_matrix(dir / "Y.coo", t.y, MatrixFormat::coo);
  save_dense(dir / "Y_true.csv", t.y_true);
  save_aux(dir / "X.csv", dir / "X.schema.json", t.x);

  const auto [train, test] = split_observed(t.y.indices(), a.train_ratio,
                                            derive_seed(a.cfg.seed, 0x7e57));
  save_matrix(dir / "Y_train.coo", t.y.restrict_to(train), MatrixFormat::coo);
  save_matrix(dir / "Y_test.coo", t.y.restrict_to(test), MatrixFormat::coo);

  nlohmann::ordered_json truth;
  truth["tau"] = t.tau_true;
  truth["beta"] = std::vector<double>(t.beta_true.data(), t.beta_true.data() + t.beta_true.size());
  truth["z"] = matrix_rows(t.z);
  truth["w"] = matrix_rows(t.w);
  write_text_file(dir / "truth.json", truth.dump(1) + "\n");

  for (const char* name : {"Y.coo", "Y_train.coo", "Y_test.coo", "Y_true.csv", "X.csv",
                           "X.schema.json", "truth.json"}) {
    out << (dir / name).string() << '\n';
  }
}

// --- fit --------------------------------------------------------------------

struct FitArgs {
  std::string y;
  std::string aux;
  std::string schema;
  std::size_t k = 0;
  std::size_t k_max = 0;
  double sc = 0.01;
  bool backfit = false;
  std::string out;
  FitFlags flags;
};

MfaiModel fit_model(const MaskedMatrix& y, const AuxTable& x, std::size_t k, std::size_t k_max,
                    double sc, bool do_backfit, const FitOptions& opts) {
  MfaiModel model = k_max > 0 ? fit_greedy_auto(y, x, k_max, sc, opts)
                              : fit_greedy(y, x, k, opts);
  if (do_backfit) model = backfit(std::move(model), y, x, opts);
  return model;
}

void do_fit(const FitArgs& a, bool k_given, bool k_max_given, const Common& c, std::ostream& out,
            std::ostream& err) {
  if (k_given == k_max_given) throw ArgumentError("give exactly one of --k or --k-max");
  require_file(a.y, "--y");
  require_file(a.aux, "--aux");
  require_file(a.schema, "--schema");
  const FitOptions opts = make_options(a.flags, c, err);
  const MaskedMatrix y = load_matrix(a.y);
  const AuxTable x = load_aux(a.aux, a.schema);
  const MfaiModel model =
      fit_model(y, x, k_given ? a.k : 0, k_max_given ? a.k_max : 0, a.sc, a.backfit, opts);
  save_model(a.out, model);
  out << "k," << model.k() << '\n';
}

// --- impute / evaluate / importance ----------------------------------------

void do_impute(const std::string& model_path, const std::string& out_path,
               const std::string& format, std::ostream& out) {
  require_file(model_path, "--model");
  const MfaiModel model = load_model(model_path);
  save_dense(out_path, impute(model), matrix_format_from_string(format));
  out << out_path << '\n';
}

void do_evaluate(const std::string& pred, const std::string& truth, const std::string& eval_set,
                 std::ostream& out) {
  require_file(pred, "--pred");
  require_file(truth, "--truth");
  require_file(eval_set, "--eval-set");
  const MaskedMatrix p = load_matrix(pred);
  const MaskedMatrix t = load_matrix(truth);
  if (p.n_rows() != t.n_rows() || p.n_cols() != t.n_cols()) {
    throw std::runtime_error("prediction and truth have different shapes");
  }
  out << format_number(rmse(p, t, load_index_set(eval_set))) << '\n';
}

void do_importance(const std::string& model_path, bool normalize, std::ostream& out) {
  require_file(model_path, "--model");
  const MfaiModel model = load_model(model_path);
  out << "factor";
  for (const auto& spec : model.schema) out << ',' << spec.name;
  out << '\n';
  const auto imp = model_importance(model, normalize);
  for (std::size_t k = 0; k < imp.size(); ++k) {
    out << (k + 1);
    for (const double v : imp[k]) out << ',' << format_number(v);
    out << '\n';
  }
}

// --- benchmark --------------------------------------------------------------

struct BenchArgs {
  std::string y;
  std::string aux;
  std::string schema;
  double train_ratio = 0.5;
  std::size_t seeds = 10;
  std::size_t k = 3;
  FitFlags flags;
};

void do_benchmark(const BenchArgs& a, const Common& c, std::ostream& out, std::ostream& err) {
  require_file(a.y, "--y");
  require_file(a.aux, "--aux");
  require_file(a.schema, "--schema");
  const MaskedMatrix y = load_matrix(a.y);
  const AuxTable x = load_aux(a.aux, a.schema);
  out << "seed,mfai_greedy,mfai_backfit,hard_impute\n";
  double sum[3] = {0.0, 0.0, 0.0};
  for (std::size_t s = 0; s < a.seeds; ++s) {
    const std::uint64_t seed = a.flags.seed + s;
    const auto [train, test] = split_observed(y.indices(), a.train_ratio, seed);
    const MaskedMatrix y_train = y.restrict_to(train);
    FitFlags flags = a.flags;
    flags.seed = seed;
    const FitOptions opts = make_options(flags, c, err);
    const MfaiModel greedy = fit_greedy(y_train, x, a.k, opts);
    const double r_greedy = rmse(impute(greedy), y, test);
    const MfaiModel back = backfit(greedy, y_train, x, opts);
    const double r_back = rmse(impute(back), y, test);
    const double r_hard = rmse(hard_impute(y_train, a.k), y, test);
    out << seed << ',' << format_number(r_greedy) << ',' << format_number(r_back) << ','
        << format_number(r_hard) << '\n';
    sum[0] += r_greedy;
    sum[1] += r_back;
    sum[2] += r_hard;
  }
  const double n = static_cast<double>(a.seeds);
  out << "mean," << format_number(sum[0] / n) << ',' << format_number(sum[1] / n) << ','
      << format_number(sum[2] / n) << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Matrix factorization with auxiliary information", "mfai"};
  app.require_subcommand(1);
  Common common;

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("--n", sim.cfg.n, "Rows")->check(CLI::PositiveNumber);
  simulate->add_option("--m", sim.cfg.m, "Columns")->check(CLI::PositiveNumber);
  simulate->add_option("--c", sim.cfg.c, "Covariates")->check(CLI::PositiveNumber);
  simulate->add_option("--k", sim.cfg.k, "True rank")->check(CLI::PositiveNumber);
  simulate->add_option("--pve", sim.cfg.pve_total, "Total PVE")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--pve-factor", sim.cfg.pve_factor, "Per-factor PVE")
      ->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--missing", sim.cfg.missing_ratio, "Missing ratio")
      ->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--seed", sim.cfg.seed, "Seed");
  simulate->add_option("--train-ratio", sim.train_ratio, "Share of observed cells for training")
      ->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--out", sim.out, "Output directory")->required();
  add_common(simulate, common);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model");
  fit_cmd->add_option("--y", fit.y, "Matrix file (.coo or dense CSV)")->required();
  fit_cmd->add_option("--aux", fit.aux, "Covariate CSV")->required();
  fit_cmd->add_option("--schema", fit.schema, "Covariate schema JSON")->required();
  auto* k_opt = fit_cmd->add_option("--k", fit.k, "Number of factors")->check(CLI::PositiveNumber);
  auto* k_max_opt = fit_cmd->add_option("--k-max", fit.k_max, "Rank cap for automatic selection")
                        ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--sc", fit.sc, "Null-check threshold")->check(CLI::NonNegativeNumber);
  fit_cmd->add_flag("--backfit", fit.backfit, "Refine the greedy fit by backfitting");
  fit_cmd->add_option("--out", fit.out, "Model JSON path")->required();
  add_fit_flags(fit_cmd, fit.flags);
  add_common(fit_cmd, common);

  std::string model_path;
  std::string impute_out;
  std::string impute_format = "dense-csv";
  auto* impute_cmd = app.add_subcommand("impute", "Write the imputed matrix");
  impute_cmd->add_option("--model", model_path, "Model JSON")->required();
  impute_cmd->add_option("--out", impute_out, "Output path")->required();
  impute_cmd->add_option("--format", impute_format, "Output format")
      ->check(CLI::IsMember({"dense-csv", "coo"}));
  add_common(impute_cmd, common);

  std::string pred;
  std::string truth;
  std::string eval_set;
  auto* evaluate = app.add_subcommand("evaluate", "Print RMSE over an evaluation set");
  evaluate->add_option("--pred", pred, "Predicted matrix")->required();
  evaluate->add_option("--truth", truth, "Reference matrix")->required();
  evaluate->add_option("--eval-set", eval_set, "Cells to score (.coo)")->required();
  add_common(evaluate, common);

  bool normalize = false;
  auto* importance = app.add_subcommand("importance", "Per-factor covariate importance CSV");
  importance->add_option("--model", model_path, "Model JSON")->required();
  importance->add_flag("--normalize", normalize, "Rescale each factor to sum to one");
  add_common(importance, common);

  BenchArgs bench;
  auto* benchmark = app.add_subcommand("benchmark", "Compare MFAI with hardImpute over seeds");
  benchmark->add_option("--y", bench.y, "Matrix file")->required();
  benchmark->add_option("--aux", bench.aux, "Covariate CSV")->required();
  benchmark->add_option("--schema", bench.schema, "Covariate schema JSON")->required();
  benchmark->add_option("--train-ratio", bench.train_ratio, "Training share of observed cells")
      ->check(CLI::Range(0.0, 1.0));
  benchmark->add_option("--seeds", bench.seeds, "Number of random splits")
      ->check(CLI::PositiveNumber);
  benchmark->add_option("--k", bench.k, "Number of factors")->check(CLI::PositiveNumber);
  add_fit_flags(benchmark, bench.flags);
  add_common(benchmark, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kArgumentError;
  }

  try {
    if (*simulate) {
      do_simulate(sim, out);
    } else if (*fit_cmd) {
      do_fit(fit, k_opt->count() > 0, k_max_opt->count() > 0, common, out, err);
    } else if (*impute_cmd) {
      do_impute(model_path, impute_out, impute_format, out);
    } else if (*evaluate) {
      do_evaluate(pred, truth, eval_set, out);
    } else if (*importance) {
      do_importance(model_path, normalize, out);
    } else if (*benchmark) {
      do_benchmark(bench, common, out, err);
    }
  } catch (const ArgumentError& e) {
    err << "mfai: " << e.what() << '\n';
    return kArgumentError;
  } catch (const std::exception& e) {
    err << "mfai: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}

}  // namespace mfai::cli
