#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mest/cli.hpp"
#include "mest/error.hpp"
#include "mest/rootfind.hpp"
#include "mest/simulate.hpp"

namespace mest::cli {

namespace {

std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e); err && !err->stage().empty()) {
    return "[" + err->stage() + "] " + e.what();
  }
  return e.what();
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

// Report for a solve that stopped early: the best iterate, plus the sandwich
// there when it can be formed.
RunReport unconverged_report(const EstimatorSpec& spec, const UnitPartition& partition,
                             const RootResult& best, const DerivControl& deriv,
                             const std::vector<CorrectionSpec>& corrections,
                             std::vector<std::string>& messages) {
  RunReport r;
  r.estimates.assign(best.theta_hat.data(), best.theta_hat.data() + best.theta_hat.size());
  r.diagnostics = {false, best.iterations, best.residual_norm, partition.m(),
                   static_cast<std::size_t>(spec.p)};
  try {
    MEstimationResult at_best = m_estimate(spec, partition, FixedRoots{best.theta_hat}, deriv,
                                           corrections);
    RunReport full = make_report(at_best);
    r.vcov = std::move(full.vcov);
    r.corrections = std::move(full.corrections);
  } catch (const std::exception& e) {
    messages.push_back("no covariance at the last iterate: " + describe(e));
  }
  return r;
}

}  // namespace

EstimateOutcome cmd_estimate(const RunRequest& req) {
  EstimateOutcome out;
  auto fail = [&](const std::string& message) {
    out.exit_code = 1;
    out.messages.push_back(message);
    return out;
  };

  EstimatorSpec spec;
  std::vector<CorrectionSpec> corrections;
  UnitPartition partition;
  RootSpec roots;
  try {
    if (req.start && req.roots) throw UsageError("give either a start vector or fixed roots, not both");
    spec = make_estimator(req.estimator, req.estimator_args);
    for (const auto& text : req.corrections) corrections.push_back(parse_correction(text));
    const Dataset ds = read_csv(req.data_path);
    partition = partition_units(ds, req.unit_col);

    const auto p = static_cast<std::size_t>(spec.p);
    if (req.roots) {
      if (req.roots->size() != p) {
        throw UsageError("--roots has " + std::to_string(req.roots->size()) +
                         " values, estimator '" + req.estimator + "' has " +
                         std::to_string(p) + " parameters");
      }
      roots = FixedRoots{to_vector(*req.roots)};
    } else {
      RootControl ctrl;
      ctrl.start = req.start ? to_vector(*req.start) : Vector::Zero(spec.p);
      if (static_cast<std::size_t>(ctrl.start.size()) != p) {
        throw UsageError("--start has " + std::to_string(ctrl.start.size()) +
                         " values, estimator '" + req.estimator + "' has " +
                         std::to_string(p) + " parameters");
      }
      ctrl.abs_tol = req.abs_tol;
      ctrl.max_iter = req.max_iter;
      roots = ctrl;
    }
  } catch (const std::exception& e) {
    return fail(describe(e));
  }

  try {
    const MEstimationResult result = m_estimate(spec, partition, roots, req.deriv, corrections);
    out.report = make_report(result);
    for (const auto& w : result.diagnostics.warnings) out.messages.push_back("warning: " + w);
    for (const auto& o : result.corrections.outcomes()) {
      if (!o.value) out.messages.push_back("correction '" + o.name + "' failed: " + o.error);
    }
    out.exit_code = 0;
  } catch (const NonConvergenceError& e) {
    out.messages.push_back(describe(e));
    out.report = unconverged_report(spec, partition, e.best(), req.deriv, corrections, out.messages);
    out.exit_code = 2;
  } catch (const SingularJacobianError& e) {
    out.messages.push_back(describe(e));
    out.report = unconverged_report(spec, partition, e.best(), req.deriv, corrections, out.messages);
    out.exit_code = 2;
  } catch (const std::exception& e) {
    return fail(describe(e));
  }
  return out;
}

Dataset cmd_simulate(const SimulateRequest& req) {
  if (req.kind == "geexex") return gen_geexex(req.size, req.seed);
  if (req.kind == "lunceford") {
    GenConfig cfg;
    cfg.n = req.size;
    cfg.seed = req.seed;
    cfg.beta = req.beta;
    cfg.nu = req.nu;
    cfg.xi = req.xi;
    return gen_lunceford(cfg);
  }
  throw UsageError("unknown simulation '" + req.kind + "' (geexex, lunceford)");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"M-estimation with empirical sandwich covariance"};
  app.require_subcommand(1);

  RunRequest req;
  std::optional<std::string> output_path;
  std::vector<double> start, roots;
  bool no_solve = false;
  std::string deriv_method = "richardson";
  std::optional<double> deriv_step;
  int richardson_levels = 4;
  std::map<std::string, std::string> est_flags;
  bool no_intercept = false;

  auto* est = app.add_subcommand("estimate", "Solve the estimating equations and report JSON");
  est->add_option("--estimator", req.estimator, "Registered estimator")
      ->required()
      ->check(CLI::IsMember(estimator_names()));
  est->add_option("--data", req.data_path, "CSV file with a header row")->required();
  est->add_option("--units", req.unit_col, "Column defining independent clusters");
  auto* start_opt = est->add_option("--start", start, "Newton start, comma separated")
                        ->delimiter(',')
                        ->allow_extra_args(false);
  auto* roots_opt = est->add_option("--roots", roots, "Fixed roots, comma separated")
                        ->delimiter(',')
                        ->allow_extra_args(false);
  auto* no_solve_flag = est->add_flag("--no-solve", no_solve, "Use --roots instead of solving");
  roots_opt->needs(no_solve_flag);
  no_solve_flag->needs(roots_opt);
  start_opt->excludes(roots_opt);
  est->add_option("--correction", req.corrections, "name:key=value[,key=value]")
      ->allow_extra_args(false);
  est->add_option("--abs-tol", req.abs_tol, "Root tolerance on the summed equations")
      ->check(CLI::PositiveNumber);
  est->add_option("--max-iter", req.max_iter, "Newton iteration budget")
      ->check(CLI::PositiveNumber);
  est->add_option("--deriv-method", deriv_method, "central or richardson")
      ->check(CLI::IsMember({"central", "richardson"}));
  est->add_option("--deriv-step", deriv_step, "Relative finite-difference step")
      ->check(CLI::PositiveNumber);
  est->add_option("--richardson-levels", richardson_levels)->check(CLI::Range(2, 10));
  est->add_option("--output", output_path, "Write JSON here instead of stdout");
  for (const char* key : {"y", "y1", "y2", "response", "covariates", "family", "alpha", "phi",
                          "treatment", "outcome", "ps-covariates", "outcome-covariates"}) {
    std::string flag = std::string("--") + key;
    est->add_option_function<std::string>(
        flag,
        [&est_flags, key](const std::string& v) {
          std::string name = key;
          std::replace(name.begin(), name.end(), '-', '_');
          est_flags[name] = v;
        },
        "Estimator argument");
  }
  est->add_flag("--no-intercept", no_intercept, "Drop the intercept column");

  SimulateRequest sim;
  std::optional<std::string> sim_out;
  auto* simulate = app.add_subcommand("simulate", "Write a seeded synthetic dataset as CSV");
  auto* geexex = simulate->add_subcommand("geexex", "Y1, Y2, X1, X2, Y4 columns");
  geexex->add_option("--m", sim.size, "Rows")->required();
  geexex->add_option("--seed", sim.seed)->required();
  geexex->add_option("--out", sim_out);
  auto* lunceford = simulate->add_subcommand("lunceford", "Confounded treatment study");
  lunceford->add_option("--n", sim.size, "Rows")->required();
  lunceford->add_option("--seed", sim.seed)->required();
  lunceford->add_option("--beta", sim.beta)->delimiter(',')->expected(4);
  lunceford->add_option("--nu", sim.nu)->delimiter(',')->expected(5);
  lunceford->add_option("--xi", sim.xi)->delimiter(',')->expected(3);
  lunceford->add_option("--out", sim_out);
  simulate->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  if (est->parsed()) {
    req.estimator_args = EstimatorArgs(est_flags.begin(), est_flags.end());
    if (no_intercept) req.estimator_args["intercept"] = "false";
    if (!start.empty()) req.start = start;
    if (no_solve) req.roots = roots;
    req.deriv = deriv_method == "central"
                    ? DerivControl::central(deriv_step.value_or(1e-6))
                    : DerivControl::richardson(deriv_step.value_or(1e-4), richardson_levels);

    EstimateOutcome result = cmd_estimate(req);
    for (const auto& msg : result.messages) err << msg << "\n";
    if (result.report) {
      const std::string text = to_json(*result.report).dump(2) + "\n";
      if (output_path) {
        std::ofstream file(*output_path, std::ios::trunc);
        if (!(file << text)) {
          err << "error: cannot write '" << *output_path << "'\n";
          return 1;
        }
      } else {
        out << text;
      }
    }
    return result.exit_code;
  }

  try {
    sim.kind = geexex->parsed() ? "geexex" : "lunceford";
    const Dataset ds = cmd_simulate(sim);
    if (sim_out) {
      write_csv(std::filesystem::path(*sim_out), ds);
    } else {
      write_csv(out, ds);
    }
  } catch (const std::exception& e) {
    err << "error: " << describe(e) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mest::cli
