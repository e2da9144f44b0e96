// Acceptance suite: one PASS/FAIL line per criterion. Criterion numbers may
// be passed as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "qpo/cost_functions.hpp"
#include "qpo/experiment.hpp"
#include "qpo/statevector.hpp"

using namespace qpo;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qpo_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig fixture8_config() {
  auto cfg = ExperimentConfig::defaults();
  cfg.data = std::string(QPO_FIXTURE_DIR) + "/synthetic8.csv";
  cfg.ansatz.family = AnsatzFamily::TwoLocal;
  cfg.cost = {CostKind::Wcvar, WeightScheme::piecewise(1.0, 5, 20, 0.7, 0.2, 0.05)};
  cfg.optimizer.kind = OptimizerKind::Cmaes;
  cfg.optimizer.max_iterations = 100;
  cfg.shots = 1000;
  cfg.top_k = 10;
  cfg.n_repeats = 10;
  cfg.seed = 1;
  return cfg;
}

double final_mean_rate(const ExperimentResult& r) {
  std::vector<std::vector<IterationRow>> traces;
  for (const auto& rec : r.records) traces.push_back(rec.rows);
  return aggregate(traces).back().mean_cum_success_rate;
}

// 1. QUBO <-> Ising exactness.
Outcome qubo_ising() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const int n = 2 + inst % 11;
    const auto q = oracle::random_qubo(rng, n);
    const auto h = to_ising(q);
    for (BasisIndex x = 0; x < (BasisIndex{1} << n); ++x) {
      worst = std::max(worst, std::abs(ising_energy(h, x) + h.offset - qubo_energy(q, x)));
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 5.0, fmt("max error %.3g (<= 1e-9), %.2f s (< 5 s)", worst, t)};
}

// 2. Penalty validity at N = 12.
Outcome penalty_validity() {
  const auto t0 = Clock::now();
  Rng rng(202);
  int ok = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto stats = oracle::random_stats(rng, 12);
    PortfolioSpec spec;
    spec.n_assets = 12;
    spec.budget = 6;
    spec.lambda = rng.uniform01();
    spec.penalty = default_penalty(stats, spec.lambda);
    const auto exact = solve_exact(build_qubo(stats, spec, VarianceForm::Full), false);
    if (oracle::popcount(exact.ground_index) == 6) ++ok;
  }
  const double t = seconds_since(t0);
  return {ok == 50 && t < 10.0, fmt("%d/50 ground states with popcount 6, %.2f s (< 10 s)", ok, t)};
}

// 3. Simulator vs dense Kronecker oracle.
Outcome simulator() {
  Rng rng(303);
  double worst = 0.0;
  double worst_norm = 0.0;
  for (int c = 0; c < 50; ++c) {
    const int n = 1 + c % 4;
    const auto circuit = oracle::random_circuit(rng, n, 25);
    const auto theta = oracle::random_angles(rng, circuit.n_params);
    const auto state = run_circuit(circuit, theta);
    const auto dense = oracle::run_dense(circuit, theta);
    for (Eigen::Index i = 0; i < dense.size(); ++i) {
      worst = std::max(worst, std::abs(state.amplitudes()[static_cast<std::size_t>(i)] - dense(i)));
    }
    worst_norm = std::max(worst_norm, std::abs(state.norm_squared() - 1.0));
  }
  return {worst <= 1e-10 && worst_norm <= 1e-9,
          fmt("max amplitude error %.3g (<= 1e-10), max norm drift %.3g (<= 1e-9)", worst, worst_norm)};
}

// 4. Cost-function identities.
Outcome cost_identities() {
  Rng rng(404);
  int mean_ok = 0, min_ok = 0, uniform_ok = 0, pw_ok = 0;
  double worst_sum = 0.0;
  const int samples = 1000;
  for (int s = 0; s < samples; ++s) {
    const std::size_t k = 1 + rng.next_u64() % 500;
    std::vector<double> e(k);
    for (auto& v : e) v = rng.normal() * 3.0;
    const double alpha = rng.uniform(1e-3, 1.0);
    if (cvar(e, 1.0) == sample_mean(e)) ++mean_ok;
    if (cvar(e, 0.5 / static_cast<double>(k)) == *std::min_element(e.begin(), e.end())) ++min_ok;
    if (wcvar(e, WeightScheme::uniform(alpha)) == cvar(e, alpha)) ++uniform_ok;

    auto sorted = e;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = tail_size(alpha, k);
    const double beta = rng.uniform(0.01, 2.0);
    for (const auto& scheme :
         {WeightScheme::uniform(alpha), WeightScheme::energy_exp(alpha, beta),
          WeightScheme::rank_exp(alpha, beta), WeightScheme::piecewise(alpha, 5, 20, 0.7, 0.2, 0.05)}) {
      const auto w = compute_weights(scheme, sorted, m);
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
    }
    const int n1 = 1 + static_cast<int>(rng.next_u64() % 10);
    const int n2 = n1 + 1 + static_cast<int>(rng.next_u64() % 30);
    const auto pw = compute_weights(WeightScheme::piecewise(alpha, n1, n2, beta, beta, beta), sorted, m);
    const auto re = compute_weights(WeightScheme::rank_exp(alpha, beta), sorted, m);
    double d = 0.0;
    for (std::size_t i = 0; i < m; ++i) d = std::max(d, std::abs(pw[i] - re[i]));
    if (d <= 1e-12) ++pw_ok;
  }
  const bool pass = mean_ok == samples && min_ok == samples && uniform_ok == samples &&
                    pw_ok == samples && worst_sum <= 1e-12;
  return {pass, fmt("cvar(1)=mean %d/%d, cvar(m=1)=min %d/%d, wcvar(uniform)=cvar %d/%d, "
                    "max |sum w - 1| %.3g, piecewise=rank_exp %d/%d",
                    mean_ok, samples, min_ok, samples, uniform_ok, samples, worst_sum, pw_ok, samples)};
}

// 5. Exact-mode consistency.
Outcome exact_mode() {
  Rng rng(505);
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    const int n = 1 + s % 4;
    const auto h = to_ising(oracle::random_qubo(rng, n));
    const auto c = oracle::random_circuit(rng, n, 20);
    const auto state = run_circuit(c, oracle::random_angles(rng, c.n_params));
    const double exact =
        exact_mode_cost(probabilities(state), ising_diagonal(h), {CostKind::Cvar, WeightScheme::uniform(1.0)});
    worst = std::max(worst, std::abs(exact - diagonal_expectation(state, h)));
  }
  return {worst <= 1e-10, fmt("max |exact_mode_cost - <H>| %.3g (<= 1e-10) on 50 states", worst)};
}

// 6. Sampling consistency at K = 100000.
Outcome sampling() {
  Rng rng(606);
  Rng sampler(6060);
  const std::size_t shots = 100000;
  int within = 0;
  double worst_z = 0.0;
  for (int s = 0; s < 20; ++s) {
    const int n = 2 + s % 3;
    const auto h = to_ising(oracle::random_qubo(rng, n));
    const auto c = oracle::random_circuit(rng, n, 20);
    const auto probs = probabilities(run_circuit(c, oracle::random_angles(rng, c.n_params)));
    const auto diag = ising_diagonal(h);
    const double mean = diagonal_expectation(probs, diag);
    double var = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) var += probs[i] * (diag[i] - mean) * (diag[i] - mean);
    const auto draws = sample_bitstrings(probs, shots, sampler);
    std::vector<double> energies(draws.size());
    for (std::size_t k = 0; k < draws.size(); ++k) energies[k] = diag[draws[k]];
    const double sigma = std::sqrt(var / static_cast<double>(shots));
    const double z = sigma > 0.0 ? std::abs(sample_mean(energies) - mean) / sigma : 0.0;
    worst_z = std::max(worst_z, z);
    if (z <= 3.0) ++within;
  }
  return {within == 20, fmt("%d/20 sampled means within 3 sigma (max |z| %.2f)", within, worst_z)};
}

// 7. Optimizer sanity.
Outcome optimizers() {
  const auto sphere = [](std::span<const double> x) {
    double s = 0.0;
    for (const double v : x) s += v * v;
    return s;
  };
  OptimizerConfig es;
  es.kind = OptimizerKind::Cmaes;
  es.cmaes.sigma0 = 0.5;
  es.seed = 1;
  es.max_iterations = 400 / Cmaes::default_population(4);
  const auto a1 = run(sphere, es, ParamVector(4, 1.0));
  const auto a2 = run(sphere, es, ParamVector(4, 1.0));
  es.max_iterations = 1000;
  const auto long_run = run(sphere, es, ParamVector(4, 1.0));
  long needed = -1;
  for (const auto& row : long_run.trace) {
    if (row.best_cost < 1e-8) {
      needed = static_cast<long>(row.iteration) * Cmaes::default_population(4);
      break;
    }
  }

  OptimizerConfig cb;
  cb.kind = OptimizerKind::Cobyla;
  cb.max_iterations = 200;
  cb.cobyla.rho_end = 1e-6;
  const auto b1 = run(sphere, cb, ParamVector{1.0, 1.0});
  const auto b2 = run(sphere, cb, ParamVector{1.0, 1.0});

  auto same = [](const RunResult& x, const RunResult& y) {
    if (x.trace.size() != y.trace.size() || x.best_params != y.best_params) return false;
    for (std::size_t i = 0; i < x.trace.size(); ++i) {
      if (x.trace[i].best_cost != y.trace[i].best_cost ||
          x.trace[i].incumbent_cost != y.trace[i].incumbent_cost) {
        return false;
      }
    }
    return true;
  };
  const bool es_ok = a1.best_cost < 1e-8 && a1.evaluations <= 400;
  const bool cb_ok = b1.best_cost < 1e-6 && b1.evaluations <= 200;
  const bool det = same(a1, a2) && same(b1, b2);
  return {es_ok && cb_ok && det,
          fmt("CMA-ES 4-d sphere best %.3g after %ld evals (< 1e-8 within 400; reached 1e-8 at %ld); "
              "COBYLA 2-d sphere best %.3g after %ld evals (< 1e-6 within 200); deterministic %s",
              a1.best_cost, a1.evaluations, needed, b1.best_cost, b1.evaluations, det ? "yes" : "no")};
}

// 8. End-to-end VQE success on the 8-asset fixture.
Outcome end_to_end() {
  const auto t0 = Clock::now();
  const auto result = run_experiment(fixture8_config());
  int hit = 0;
  for (const auto& rec : result.records) {
    const bool any = std::any_of(rec.rows.begin(), rec.rows.end(),
                                 [](const IterationRow& r) { return r.iteration <= 100 && r.success; });
    if (any) ++hit;
  }
  const double t = seconds_since(t0);
  return {hit >= 8 && t < 120.0,
          fmt("%d/10 repeats reach the top-10 within 100 iterations (>= 8), %.1f s (< 120 s)", hit, t)};
}

// 9. Ordering of optimizer and cost combinations.
Outcome trend() {
  auto wcvar_cfg = fixture8_config();
  auto cvar_cfg = wcvar_cfg;
  cvar_cfg.cost = {CostKind::Cvar, WeightScheme::uniform(1.0)};
  auto cobyla_cfg = cvar_cfg;
  cobyla_cfg.optimizer.kind = OptimizerKind::Cobyla;
  cobyla_cfg.optimizer.max_iterations = 100;
  const double w = final_mean_rate(run_experiment(wcvar_cfg));
  const double c = final_mean_rate(run_experiment(cvar_cfg));
  const double b = final_mean_rate(run_experiment(cobyla_cfg));
  return {w >= c && w >= b,
          fmt("mean cumulative success rate at iteration 100: CMA-ES+WCVaR %.3f, CMA-ES+CVaR(1) %.3f, "
              "COBYLA+CVaR(1) %.3f",
              w, c, b)};
}

// 10. Determinism of the vqe command.
Outcome determinism() {
  const auto dir = scratch("determinism");
  const std::string config = (fs::path(QPO_SOURCE_DIR) / "configs" / "synthetic8.json").string();
  std::string diff;
  int compared = 0;
  for (const auto& variant : {std::string(), std::string(" --optimizer.kind cobyla --cost.kind cvar --cost.weighting uniform")}) {
    for (const char* run : {"a", "b"}) {
      const std::string cmd = std::string("\"") + QPO_CLI + "\" vqe --config \"" + config +
                              "\" --data \"" + QPO_FIXTURE_DIR + "/synthetic8.csv\" --seed 7 --n_repeats 3" +
                              variant + " --output_dir \"" + (dir / run).string() + "\" > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) return {false, "vqe command failed: " + cmd};
    }
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
      if (!entry.is_directory()) continue;
      const auto name = entry.path().filename();
      for (const char* file : {"trace.csv", "optimizer.csv"}) {
        ++compared;
        if (slurp(dir / "a" / name / file) != slurp(dir / "b" / name / file)) diff += (name / file).string() + " ";
      }
    }
    if (slurp(dir / "a" / "aggregate.csv") != slurp(dir / "b" / "aggregate.csv")) diff += "aggregate.csv ";
    fs::remove_all(dir / "a");
    fs::remove_all(dir / "b");
  }
  return {diff.empty() && compared == 12,
          diff.empty() ? fmt("%d trace files byte-identical across repeated invocations", compared)
                       : "differing files: " + diff};
}

// 11. Full sweep at N = 12.
Outcome full_sweep() {
  const auto dir = scratch("sweep");
  auto base = fixture8_config();
  base.data = std::string(QPO_FIXTURE_DIR) + "/synthetic12.csv";
  base.output_dir = dir.string();
  SweepSpec spec;
  const auto t0 = Clock::now();
  const auto results = run_sweep(base, spec);
  const double t = seconds_since(t0);
  int complete = 0;
  for (const auto& r : results) {
    const auto agg = slurp(fs::path(r.cell.config.output_dir) / "aggregate.csv");
    const bool header = agg.rfind("iteration,mean_cum_success_rate,mean_ground_prob,n_runs\n", 0) == 0;
    const auto rows = std::count(agg.begin(), agg.end(), '\n') - 1;
    if (header && rows == r.cell.config.optimizer.max_iterations && r.iterations == rows) ++complete;
  }
  const bool summary = fs::exists(dir / "sweep_summary.csv");
  return {complete == 32 && summary && t < 1800.0,
          fmt("%d/32 cells with full aggregate CSVs, sweep summary %s, %.0f s (< 1800 s)", complete,
              summary ? "written" : "missing", t)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"QUBO/Ising exactness", qubo_ising}},
      {2, {"penalty validity", penalty_validity}},
      {3, {"simulator correctness", simulator}},
      {4, {"cost-function identities", cost_identities}},
      {5, {"exact-mode consistency", exact_mode}},
      {6, {"sampling consistency", sampling}},
      {7, {"optimizer sanity", optimizers}},
      {8, {"end-to-end VQE success", end_to_end}},
      {9, {"qualitative trend", trend}},
      {10, {"determinism", determinism}},
      {11, {"full N=12 sweep", full_sweep}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& [id, entry] : criteria) {
    if (!selected.empty() && !selected.contains(id)) continue;
    Outcome out;
    try {
      out = entry.second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass) ++failed;
    std::printf("%s [%d] %s: %s\n", out.pass ? "PASS" : "FAIL", id, entry.first, out.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
