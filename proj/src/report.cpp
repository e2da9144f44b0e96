#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "qpo/error.hpp"
#include "qpo/experiment.hpp"

namespace qpo {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::string run_dir_name(int repeat) {
  std::ostringstream name;
  name << "run_" << std::setw(3) << std::setfill('0') << repeat;
  return name.str();
}

std::vector<std::string> selected_assets(const Problem& problem, BasisIndex x) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < problem.asset_names.size(); ++i) {
    if ((x >> i) & 1U) names.push_back(problem.asset_names[i]);
  }
  return names;
}

std::string format_alpha(double alpha) {
  std::ostringstream out;
  out << alpha;
  return out.str();
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<std::vector<IterationRow>>& traces) {
  std::size_t longest = 0;
  for (const auto& t : traces) longest = std::max(longest, t.size());
  std::vector<AggregateRow> rows(longest);
  for (std::size_t i = 0; i < longest; ++i) rows[i].iteration = static_cast<int>(i + 1);

  for (const auto& trace : traces) {
    int successes = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
      if (trace[i].success) ++successes;
      rows[i].mean_cum_success_rate += static_cast<double>(successes) / static_cast<double>(i + 1);
      rows[i].mean_ground_prob += trace[i].ground_prob;
      rows[i].n_runs += 1;
    }
  }
  for (auto& row : rows) {
    if (row.n_runs > 0) {
      row.mean_cum_success_rate /= row.n_runs;
      row.mean_ground_prob /= row.n_runs;
    }
  }
  return rows;
}

void write_trace_csv(const fs::path& path, const std::vector<IterationRow>& rows) {
  auto out = open_out(path);
  out << "iteration,cost,ground_prob,success\n";
  for (const auto& row : rows) {
    out << row.iteration << ',' << row.cost << ',' << row.ground_prob << ','
        << (row.success ? 1 : 0) << '\n';
  }
}

std::vector<IterationRow> read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::MissingFile, path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "iteration,cost,ground_prob,success") {
    raise(ErrorCode::MalformedRow, path.string() + ": unexpected trace header");
  }
  std::vector<IterationRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream cells(line);
    IterationRow row;
    char c1 = 0, c2 = 0, c3 = 0;
    int success = 0;
    if (!(cells >> row.iteration >> c1 >> row.cost >> c2 >> row.ground_prob >> c3 >> success) ||
        c1 != ',' || c2 != ',' || c3 != ',') {
      raise(ErrorCode::MalformedRow, path.string() + ": line " + std::to_string(line_no));
    }
    row.success = success != 0;
    rows.push_back(row);
  }
  return rows;
}

void write_aggregate_csv(const fs::path& path, const std::vector<AggregateRow>& rows) {
  auto out = open_out(path);
  out << "iteration,mean_cum_success_rate,mean_ground_prob,n_runs\n";
  for (const auto& row : rows) {
    out << row.iteration << ',' << row.mean_cum_success_rate << ',' << row.mean_ground_prob << ','
        << row.n_runs << '\n';
  }
}

void write_run(const fs::path& dir, const RunRecord& record) {
  write_trace_csv(dir / "trace.csv", record.rows);
  auto out = open_out(dir / "optimizer.csv");
  write_trace_csv(out, record.optimizer_trace);
}

void report(const ExperimentResult& result, const fs::path& out_dir) {
  if (result.records.empty()) raise(ErrorCode::IoError, "no run records to report");
  std::vector<std::vector<IterationRow>> traces;
  for (const auto& record : result.records) {
    write_run(out_dir / run_dir_name(record.repeat), record);
    traces.push_back(record.rows);
  }
  const auto agg = aggregate(traces);
  write_aggregate_csv(out_dir / "aggregate.csv", agg);

  const auto& problem = result.problem;
  const int n = problem.qubo.n;
  auto ground = nlohmann::json::array();
  for (const auto g : problem.exact.ground_states) ground.push_back(bitstring_label(g, n));

  auto runs = nlohmann::json::array();
  for (const auto& record : result.records) {
    runs.push_back({{"repeat", record.repeat},
                    {"seed", record.seed},
                    {"iterations", record.rows.size()},
                    {"evaluations", record.evaluations},
                    {"cumulative_success", record.cumulative_success},
                    {"best_cost", record.best_cost},
                    {"most_probable_bitstring", bitstring_label(record.most_probable, n)},
                    {"most_probable_energy", qubo_energy(problem.qubo, record.most_probable)}});
  }
  nlohmann::json summary{
      {"config", result.config.to_json()},
      {"n_assets", n},
      {"budget", problem.spec.budget},
      {"penalty", problem.spec.penalty},
      {"ground_bitstring", bitstring_label(problem.exact.ground_index, n)},
      {"ground_bitstrings", ground},
      {"ground_energy", problem.exact.ground_energy},
      {"degeneracy", problem.exact.degeneracy},
      {"selected_assets", selected_assets(problem, problem.exact.ground_index)},
      {"final_mean_cum_success_rate", agg.empty() ? 0.0 : agg.back().mean_cum_success_rate},
      {"final_mean_ground_prob", agg.empty() ? 0.0 : agg.back().mean_ground_prob},
      {"runs", runs},
      {"wall_seconds", result.wall_seconds}};
  auto out = open_out(out_dir / "summary.json");
  out << summary.dump(2) << '\n';
}

std::vector<AggregateRow> reaggregate(const fs::path& dir) {
  if (!fs::is_directory(dir)) raise(ErrorCode::MissingFile, dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto trace = entry.path() / "trace.csv";
    if (entry.is_directory() && entry.path().filename().string().rfind("run_", 0) == 0 &&
        fs::exists(trace)) {
      files.push_back(trace);
    }
  }
  if (files.empty()) raise(ErrorCode::MissingFile, "no run_*/trace.csv under " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<std::vector<IterationRow>> traces;
  for (const auto& f : files) traces.push_back(read_trace_csv(f));
  auto rows = aggregate(traces);
  write_aggregate_csv(dir / "aggregate.csv", rows);
  return rows;
}

// ---------------------------------------------------------------------------

std::vector<SweepCell> sweep_cells(const ExperimentConfig& base, const SweepSpec& sweep) {
  std::vector<SweepCell> cells;
  for (const auto family : sweep.ansatzes) {
    for (const auto optimizer : sweep.optimizers) {
      for (const auto cost : sweep.costs) {
        for (const double alpha : sweep.alphas) {
          SweepCell cell;
          cell.name = std::string(family == AnsatzFamily::TwoLocal ? "A1" : "A2") + "_" +
                      to_string(optimizer) + "_" + to_string(cost) + "_a" + format_alpha(alpha);
          cell.config = base;
          cell.config.ansatz.family = family;
          cell.config.ansatz.layers = base.ansatz.family == family ? base.ansatz.layers : 0;
          cell.config.optimizer.kind = optimizer;
          cell.config.optimizer.max_iterations = optimizer == OptimizerKind::Cmaes
                                                     ? sweep.cmaes_iterations
                                                     : sweep.cobyla_iterations;
          cell.config.cost.kind = cost;
          cell.config.cost.scheme.alpha = alpha;
          cell.config.seed = derive_seed(base.seed, fnv1a(cell.name));
          cell.config.output_dir = (fs::path(base.output_dir) / cell.name).string();
          cells.push_back(std::move(cell));
        }
      }
    }
  }
  return cells;
}

std::vector<SweepCellResult> run_sweep(const ExperimentConfig& base, const SweepSpec& sweep) {
  base.validate();
  const auto prices = load_prices(base.data);
  const auto problem = build_problem(prices, base.portfolio);
  const auto cells = sweep_cells(base, sweep);
  for (const auto& cell : cells) cell.config.validate(false);

  std::vector<SweepCellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto worker = [&] {
    while (true) {
      const auto i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        const auto& cell = cells[i];
        const auto result = run_experiment(cell.config, problem);
        report(result, cell.config.output_dir);
        std::vector<std::vector<IterationRow>> traces;
        for (const auto& r : result.records) traces.push_back(r.rows);
        const auto agg = aggregate(traces);
        results[i].cell = cell;
        results[i].iterations = static_cast<int>(agg.size());
        if (!agg.empty()) {
          results[i].final_mean_cum_success_rate = agg.back().mean_cum_success_rate;
          results[i].final_mean_ground_prob = agg.back().mean_ground_prob;
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cells.size();
      }
    }
  };

  const unsigned hw = std::max(1U, std::thread::hardware_concurrency());
  const auto jobs = std::min<std::size_t>(sweep.jobs > 0 ? static_cast<std::size_t>(sweep.jobs) : hw,
                                          cells.size());
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  auto out = open_out(fs::path(base.output_dir) / "sweep_summary.csv");
  out << "cell,ansatz,optimizer,cost,alpha,iterations,final_mean_cum_success_rate,final_mean_ground_prob\n";
  for (const auto& r : results) {
    const auto& c = r.cell.config;
    out << r.cell.name << ',' << to_string(c.ansatz.family) << ',' << to_string(c.optimizer.kind)
        << ',' << to_string(c.cost.kind) << ',' << c.cost.scheme.alpha << ',' << r.iterations << ','
        << r.final_mean_cum_success_rate << ',' << r.final_mean_ground_prob << '\n';
  }
  return results;
}

}  // namespace qpo
