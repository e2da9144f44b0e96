#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpo/ansatz.hpp"
#include "qpo/cost_functions.hpp"
#include "qpo/market_data.hpp"
#include "qpo/optimizers.hpp"
#include "qpo/portfolio_qubo.hpp"

namespace qpo {

struct PortfolioConfig {
  double lambda = 0.5;
  std::optional<double> penalty;  // empty: default_penalty
  std::optional<int> budget;      // empty: N / 2 (N must be even)
  VarianceForm variance_form = VarianceForm::Full;
};

struct AnsatzConfig {
  AnsatzFamily family = AnsatzFamily::TwoLocal;
  int layers = 0;  // 0: 3 for two_local, 2 for block

  int resolved_layers() const;
};

/// Everything one `vqe` invocation needs. Serialized as a single JSON
/// document whose fields are listed in README.md; unknown fields are rejected.
struct ExperimentConfig {
  std::string data;
  PortfolioConfig portfolio;
  AnsatzConfig ansatz;
  CostSpec cost;
  OptimizerConfig optimizer;
  int shots = 1000;  // 0: exact-distribution cost
  int top_k = 10;
  int n_repeats = 10;
  std::uint64_t seed = 1;
  std::string output_dir = "runs/vqe";

  /// Defaults for every section; the cost defaults to piecewise WCVaR, alpha 1.
  static ExperimentConfig defaults();
  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  /// Checks ranges and cross-field rules; `check_files` also requires `data` to name an existing file.
  void validate(bool check_files = true) const;
};

/// Applies `--a.b value` style overrides to a config document. Values that
/// parse as JSON are used as such, anything else as a string.
void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

/// The classical side of one instance, with its exact ground truth.
struct Problem {
  std::vector<std::string> asset_names;
  AssetStats stats;
  PortfolioSpec spec;
  QuboProblem qubo;
  IsingHamiltonian ising;
  std::vector<double> diagonal;  // Ising energy (no offset) of every basis state
  ExactSolution exact;
};

Problem build_problem(const AssetStats& stats, std::vector<std::string> asset_names,
                      const PortfolioConfig& portfolio);
Problem build_problem(const PriceMatrix& prices, const PortfolioConfig& portfolio);

/// VQE cost as a function of circuit parameters: simulate, then either draw
/// `shots` samples from `rng` or (shots == 0) use the exact distribution,
/// and reduce the per-state Ising energies with `cost`.
Objective vqe_objective(const IsingHamiltonian& h, const Circuit& circuit, const CostSpec& cost,
                        int shots, std::shared_ptr<Rng> rng);

struct IterationMetric {
  bool success = false;
  double ground_probability = 0.0;
};

/// Success iff some ground state ranks among the `top_k` most probable
/// states (probability descending, index ascending). Ground probability is
/// the mass over all ground states.
IterationMetric evaluate_iteration(std::span<const double> probabilities, const ExactSolution& exact,
                                   int top_k);

struct IterationRow {
  int iteration = 0;
  double cost = 0.0;  // best cost so far
  double ground_prob = 0.0;
  bool success = false;
};

struct RunRecord {
  int repeat = 0;
  std::uint64_t seed = 0;
  std::vector<IterationRow> rows;
  std::vector<TraceRow> optimizer_trace;
  int cumulative_success = 0;
  BasisIndex most_probable = 0;  // of the final incumbent state
  double best_cost = 0.0;
  long evaluations = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  Problem problem;
  std::vector<RunRecord> records;
  double wall_seconds = 0.0;
};

using RecordCallback = std::function<void(const Problem&, const RunRecord&)>;

/// One RunRecord per repeat. Repeat r uses seed derive_seed(config.seed, r).
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RecordCallback& on_record = {});
ExperimentResult run_experiment(const ExperimentConfig& config, const Problem& problem,
                                const RecordCallback& on_record = {});

// --- reporting -------------------------------------------------------------

struct AggregateRow {
  int iteration = 0;
  double mean_cum_success_rate = 0.0;
  double mean_ground_prob = 0.0;
  int n_runs = 0;
};

/// Per-iteration means across runs; runs shorter than t do not count at t.
std::vector<AggregateRow> aggregate(const std::vector<std::vector<IterationRow>>& traces);

void write_trace_csv(const std::filesystem::path& path, const std::vector<IterationRow>& rows);
std::vector<IterationRow> read_trace_csv(const std::filesystem::path& path);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

/// Writes a single run's files under `dir` (trace.csv, optimizer.csv).
void write_run(const std::filesystem::path& dir, const RunRecord& record);

/// Writes run_<r>/ for every record plus aggregate.csv and summary.json.
void report(const ExperimentResult& result, const std::filesystem::path& out_dir);

/// Rebuilds aggregate.csv from the run_*/trace.csv files under `dir`.
std::vector<AggregateRow> reaggregate(const std::filesystem::path& dir);

// --- sweeps ----------------------------------------------------------------

struct SweepSpec {
  std::vector<AnsatzFamily> ansatzes{AnsatzFamily::TwoLocal, AnsatzFamily::Block};
  std::vector<OptimizerKind> optimizers{OptimizerKind::Cmaes, OptimizerKind::Cobyla};
  std::vector<CostKind> costs{CostKind::Cvar, CostKind::Wcvar};
  std::vector<double> alphas{1.0, 0.5, 0.25, 0.1};
  int cmaes_iterations = 100;
  int cobyla_iterations = 150;
  int jobs = 0;  // 0: hardware concurrency
};

struct SweepCell {
  std::string name;
  ExperimentConfig config;
};

/// Cartesian product of `sweep` applied on top of `base`; each cell gets its
/// own output directory and a seed derived from the base seed and cell name.
std::vector<SweepCell> sweep_cells(const ExperimentConfig& base, const SweepSpec& sweep);

struct SweepCellResult {
  SweepCell cell;
  double final_mean_cum_success_rate = 0.0;
  double final_mean_ground_prob = 0.0;
  int iterations = 0;
};

/// Runs every cell (in parallel across `jobs` threads), writing each cell's
/// report plus `sweep_summary.csv` under base.output_dir.
std::vector<SweepCellResult> run_sweep(const ExperimentConfig& base, const SweepSpec& sweep);

}  // namespace qpo
