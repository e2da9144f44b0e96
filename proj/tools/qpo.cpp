// Command-line front end: ingest, exact, vqe, report, sweep, circuit, synth.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qpo/ansatz.hpp"
#include "qpo/error.hpp"
#include "qpo/experiment.hpp"
#include "qpo/market_data.hpp"
#include "qpo/portfolio_qubo.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) qpo::raise(qpo::ErrorCode::InvalidConfig, "config: cannot open " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) qpo::raise(qpo::ErrorCode::InvalidConfig, "config: " + path + " is not valid JSON");
  return doc;
}

// Turns leftover "--a.b value" / "--a.b=value" arguments into overrides.
void apply_extras(json& doc, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() < 3) {
      qpo::raise(qpo::ErrorCode::InvalidConfig, "unexpected argument '" + arg + "'");
    }
    auto key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) {
        qpo::raise(qpo::ErrorCode::InvalidConfig, key + ": missing value");
      }
      value = extras[++i];
    }
    qpo::apply_override(doc, key, value);
  }
}

qpo::ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& extras) {
  json doc = path.empty() ? json::object() : read_json_file(path);
  apply_extras(doc, extras);
  auto cfg = qpo::ExperimentConfig::from_json(doc);
  cfg.validate();
  return cfg;
}

int cmd_ingest(const std::string& path) {
  const auto prices = qpo::load_prices(path);
  const auto stats = qpo::compute_stats(qpo::compute_returns(prices));
  std::cout << std::setprecision(6);
  std::cout << "assets: " << prices.n_assets() << "\n"
            << "price rows: " << prices.n_times() << "\n"
            << "return rows: " << prices.n_times() - 1 << "\n"
            << "period: " << prices.time_labels.front() << " .. " << prices.time_labels.back() << "\n";
  std::cout << "asset,mean_return,volatility\n";
  for (Eigen::Index i = 0; i < prices.n_assets(); ++i) {
    std::cout << prices.asset_names[static_cast<std::size_t>(i)] << ',' << stats.mu(i) << ','
              << std::sqrt(stats.sigma(i, i)) << '\n';
  }
  return kExitOk;
}

struct ExactOptions {
  std::string data;
  std::string qubo_path;
  double lambda = 0.5;
  std::string penalty = "auto";
  int budget = 0;
  std::string variance_form = "full";
  std::string dump_qubo;
  std::string dump_ising;
  int show = 0;
};

int cmd_exact(const ExactOptions& opts) {
  qpo::QuboProblem qubo;
  std::vector<std::string> names;
  if (!opts.qubo_path.empty()) {
    const auto doc = read_json_file(opts.qubo_path);
    qubo = qpo::qubo_from_json(doc);
  } else {
    if (opts.data.empty()) {
      qpo::raise(qpo::ErrorCode::InvalidConfig, "exact: give --data or --qubo");
    }
    qpo::PortfolioConfig pc;
    pc.lambda = opts.lambda;
    if (opts.penalty != "auto") pc.penalty = std::stod(opts.penalty);
    if (opts.budget > 0) pc.budget = opts.budget;
    if (opts.variance_form == "upper_triangle") {
      pc.variance_form = qpo::VarianceForm::UpperTriangle;
    } else if (opts.variance_form != "full") {
      qpo::raise(qpo::ErrorCode::InvalidConfig, "variance_form: expected full or upper_triangle");
    }
    const auto prices = qpo::load_prices(opts.data);
    const auto problem = qpo::build_problem(prices, pc);
    qubo = problem.qubo;
    names = problem.asset_names;
    std::cout << "budget: " << problem.spec.budget << "\npenalty: " << std::setprecision(10)
              << problem.spec.penalty << "\n";
  }
  if (!opts.dump_qubo.empty()) std::ofstream(opts.dump_qubo) << qpo::to_json(qubo).dump(2) << '\n';
  if (!opts.dump_ising.empty()) {
    std::ofstream(opts.dump_ising) << qpo::to_json(qpo::to_ising(qubo)).dump(2) << '\n';
  }

  const auto sol = qpo::solve_exact(qubo, opts.show > 0);
  std::cout << "ground: ";
  for (std::size_t i = 0; i < sol.ground_states.size() && i < 16; ++i) {
    std::cout << (i ? " or " : "") << qpo::bitstring_label(sol.ground_states[i], qubo.n);
  }
  if (sol.ground_states.size() > 16) std::cout << " ...";
  std::cout << ", energy " << std::setprecision(12) << sol.ground_energy << " (degeneracy "
            << sol.degeneracy << ")\n";
  if (!names.empty()) {
    std::cout << "selected:";
    for (int i = 0; i < qubo.n; ++i) {
      if (sol.ground_bitstring[static_cast<std::size_t>(i)]) std::cout << ' ' << names[static_cast<std::size_t>(i)];
    }
    std::cout << '\n';
  }
  if (sol.spectrum) {
    std::cout << "rank,bitstring,energy\n";
    for (int k = 0; k < opts.show && k < static_cast<int>(sol.spectrum->size()); ++k) {
      const auto& [x, e] = (*sol.spectrum)[static_cast<std::size_t>(k)];
      std::cout << k + 1 << ',' << qpo::bitstring_label(x, qubo.n) << ',' << e << '\n';
    }
  }
  return kExitOk;
}

int cmd_vqe(const std::string& config_path, const std::vector<std::string>& extras) {
  const auto cfg = load_config(config_path, extras);
  const fs::path out = cfg.output_dir;
  const auto result = qpo::run_experiment(cfg, [&](const qpo::Problem&, const qpo::RunRecord& r) {
    std::ostringstream name;
    name << "run_" << std::setw(3) << std::setfill('0') << r.repeat;
    qpo::write_run(out / name.str(), r);
    std::cerr << "repeat " << r.repeat << ": " << r.rows.size() << " iterations, "
              << r.cumulative_success << " successful\n";
  });
  qpo::report(result, out);
  const int n = result.problem.qubo.n;
  std::cout << "ground: " << qpo::bitstring_label(result.problem.exact.ground_index, n)
            << ", energy " << std::setprecision(12) << result.problem.exact.ground_energy << "\n";
  double mean_success = 0.0;
  for (const auto& r : result.records) mean_success += r.cumulative_success;
  mean_success /= static_cast<double>(result.records.size());
  std::cout << "repeats: " << result.records.size() << ", mean successful iterations: "
            << mean_success << "\n"
            << "output: " << out.string() << "\n";
  return kExitOk;
}

int cmd_report(const std::string& dir) {
  const auto rows = qpo::reaggregate(dir);
  std::cout << "aggregated " << (rows.empty() ? 0 : rows.front().n_runs) << " runs over "
            << rows.size() << " iterations into " << (fs::path(dir) / "aggregate.csv").string()
            << "\n";
  return kExitOk;
}

struct SweepOptions {
  std::vector<std::string> ansatzes{"two_local", "block"};
  std::vector<std::string> optimizers{"cmaes", "cobyla"};
  std::vector<std::string> costs{"cvar", "wcvar"};
  std::vector<double> alphas{1.0, 0.5, 0.25, 0.1};
  int cmaes_iterations = 100;
  int cobyla_iterations = 150;
  int jobs = 0;
};

int cmd_sweep(const std::string& config_path, const SweepOptions& opts,
              const std::vector<std::string>& extras) {
  const auto cfg = load_config(config_path, extras);
  qpo::SweepSpec spec;
  spec.ansatzes.clear();
  for (const auto& a : opts.ansatzes) spec.ansatzes.push_back(qpo::ansatz_family_from_string(a));
  spec.optimizers.clear();
  for (const auto& o : opts.optimizers) spec.optimizers.push_back(qpo::optimizer_kind_from_string(o));
  spec.costs.clear();
  for (const auto& c : opts.costs) spec.costs.push_back(qpo::cost_kind_from_string(c));
  spec.alphas = opts.alphas;
  spec.cmaes_iterations = opts.cmaes_iterations;
  spec.cobyla_iterations = opts.cobyla_iterations;
  spec.jobs = opts.jobs;
  const auto results = qpo::run_sweep(cfg, spec);
  std::cout << "cell,final_mean_cum_success_rate,final_mean_ground_prob\n" << std::setprecision(6);
  for (const auto& r : results) {
    std::cout << r.cell.name << ',' << r.final_mean_cum_success_rate << ','
              << r.final_mean_ground_prob << '\n';
  }
  std::cout << results.size() << " cells written under " << cfg.output_dir << "\n";
  return kExitOk;
}

int cmd_circuit(const std::string& family, int qubits, int layers, bool as_json) {
  const auto fam = qpo::ansatz_family_from_string(family);
  qpo::AnsatzConfig ac{fam, layers};
  const auto circuit = qpo::make_ansatz(fam, qubits, ac.resolved_layers());
  if (as_json) {
    std::cout << qpo::to_json(circuit).dump(2) << '\n';
  } else {
    std::cout << qpo::to_text(circuit);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Portfolio selection by VQE with CVaR and weighted CVaR cost functions"};
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "Validate a price CSV and print return statistics");
  std::string ingest_path;
  ingest->add_option("csv", ingest_path, "Price CSV")->required();

  auto* exact = app.add_subcommand("exact", "Build the QUBO and solve it by enumeration");
  ExactOptions exact_opts;
  exact->add_option("--data", exact_opts.data, "Price CSV");
  exact->add_option("--qubo", exact_opts.qubo_path, "QUBO JSON document instead of prices");
  exact->add_option("--lambda", exact_opts.lambda, "Return/risk trade-off in [0, 1]");
  exact->add_option("--penalty", exact_opts.penalty, "Budget penalty, or 'auto'");
  exact->add_option("--budget", exact_opts.budget, "Assets to select (default N/2)");
  exact->add_option("--variance-form", exact_opts.variance_form, "full | upper_triangle");
  exact->add_option("--dump-qubo", exact_opts.dump_qubo, "Write the QUBO as JSON");
  exact->add_option("--dump-ising", exact_opts.dump_ising, "Write the Ising Hamiltonian as JSON");
  exact->add_option("--show", exact_opts.show, "Print the lowest N spectrum entries");

  auto* vqe = app.add_subcommand("vqe", "Run VQE repeats from a JSON config (+ --dotted.field overrides)");
  std::string vqe_config;
  vqe->add_option("--config", vqe_config, "Experiment config JSON");
  vqe->allow_extras();

  auto* rep = app.add_subcommand("report", "Re-aggregate run_*/trace.csv files in a directory");
  std::string report_dir;
  rep->add_option("dir", report_dir, "Experiment output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Grid over ansatz x optimizer x cost x alpha");
  std::string sweep_config;
  SweepOptions sweep_opts;
  sweep->add_option("--config", sweep_config, "Base experiment config JSON");
  sweep->add_option("--ansatzes", sweep_opts.ansatzes, "two_local / block")->delimiter(',');
  sweep->add_option("--optimizers", sweep_opts.optimizers, "cmaes / cobyla")->delimiter(',');
  sweep->add_option("--costs", sweep_opts.costs, "cvar / wcvar / mean")->delimiter(',');
  sweep->add_option("--alphas", sweep_opts.alphas, "Tail fractions")->delimiter(',');
  sweep->add_option("--cmaes-iterations", sweep_opts.cmaes_iterations, "Generations per CMA-ES run");
  sweep->add_option("--cobyla-iterations", sweep_opts.cobyla_iterations, "Evaluations per COBYLA run");
  sweep->add_option("--jobs", sweep_opts.jobs, "Worker threads (0 = all cores)");
  sweep->allow_extras();

  auto* circuit = app.add_subcommand("circuit", "Print an ansatz gate list");
  std::string family = "two_local";
  int qubits = 4;
  int layers = 0;
  bool as_json = false;
  circuit->add_option("--family", family, "two_local | block");
  circuit->add_option("--qubits", qubits, "Qubit count");
  circuit->add_option("--layers", layers, "Layers (0 = family default)");
  circuit->add_flag("--json", as_json, "Emit JSON instead of text");

  auto* synth = app.add_subcommand("synth", "Write a synthetic random-walk price CSV");
  int synth_assets = 8;
  int synth_rows = 253;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  synth->add_option("--assets", synth_assets, "Asset count");
  synth->add_option("--rows", synth_rows, "Price rows");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_path);
    if (*exact) return cmd_exact(exact_opts);
    if (*vqe) return cmd_vqe(vqe_config, vqe->remaining());
    if (*rep) return cmd_report(report_dir);
    if (*sweep) return cmd_sweep(sweep_config, sweep_opts, sweep->remaining());
    if (*circuit) return cmd_circuit(family, qubits, layers, as_json);
    if (*synth) {
      qpo::save_prices(qpo::synthetic_prices(synth_assets, synth_rows, synth_seed), synth_out);
      std::cout << "wrote " << synth_out << "\n";
      return kExitOk;
    }
  } catch (const qpo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool usage = e.code() == qpo::ErrorCode::InvalidConfig ||
                       e.code() == qpo::ErrorCode::InvalidSpec;
    return usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
