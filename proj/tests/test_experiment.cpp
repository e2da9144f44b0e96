#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "qpo/error.hpp"
#include "qpo/experiment.hpp"

using namespace qpo;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qpo_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExactSolution ground_at(std::vector<BasisIndex> states) {
  ExactSolution e;
  e.ground_index = states.front();
  e.ground_states = std::move(states);
  e.degeneracy = static_cast<int>(e.ground_states.size());
  return e;
}

IsingHamiltonian random_ising(Rng& rng, int n) { return to_ising(oracle::random_qubo(rng, n)); }

Problem small_problem(int n, std::uint64_t seed) {
  Rng rng(seed);
  const auto stats = oracle::random_stats(rng, n);
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("A" + std::to_string(i));
  return build_problem(stats, names, {});
}

}  // namespace

TEST_CASE("vqe_objective exact mean equals the diagonal expectation") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 3;
    const auto h = random_ising(rng, n);
    const auto c = make_ansatz(AnsatzFamily::TwoLocal, n, 2);
    const auto theta = oracle::random_angles(rng, c.n_params);
    const auto f = vqe_objective(h, c, {CostKind::Mean, {}}, 0, nullptr);
    CHECK(f(theta) == doctest::Approx(diagonal_expectation(run_circuit(c, theta), h)).epsilon(1e-12));
  }
}

TEST_CASE("vqe_objective on a basis state returns that state's energy") {
  // RY(pi) on qubit 0 of a two-local circuit with all other angles zero prepares |01>.
  Rng rng(8);
  const auto h = random_ising(rng, 2);
  const auto c = make_ansatz(AnsatzFamily::TwoLocal, 2, 1);
  std::vector<double> theta(static_cast<std::size_t>(c.n_params), 0.0);
  theta[0] = std::numbers::pi;
  const auto probs = probabilities(run_circuit(c, theta));
  const auto state = static_cast<BasisIndex>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  REQUIRE(probs[state] == doctest::Approx(1.0).epsilon(1e-12));
  const auto f = vqe_objective(h, c, {CostKind::Cvar, WeightScheme::uniform(1e-3)}, 500,
                               std::make_shared<Rng>(1));
  CHECK(f(theta) == ising_energy(h, state));
}

TEST_CASE("vqe_objective sampled mean is statistically consistent") {
  Rng rng(21);
  const auto h = random_ising(rng, 3);
  const auto c = make_ansatz(AnsatzFamily::TwoLocal, 3, 2);
  const auto theta = oracle::random_angles(rng, c.n_params);
  const auto probs = probabilities(run_circuit(c, theta));
  const auto diag = ising_diagonal(h);
  const double mean = diagonal_expectation(probs, diag);
  double var = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) var += probs[i] * std::pow(diag[i] - mean, 2);
  const int shots = 100000;
  const auto f = vqe_objective(h, c, {CostKind::Mean, {}}, shots, std::make_shared<Rng>(99));
  CHECK(std::abs(f(theta) - mean) <= 3.0 * std::sqrt(var / shots));
}

TEST_CASE("vqe_objective errors") {
  Rng rng(1);
  const auto h = random_ising(rng, 3);
  CHECK(code_of([&] { vqe_objective(h, make_ansatz(AnsatzFamily::TwoLocal, 2, 1), {}, 0, nullptr); }) ==
        ErrorCode::DimensionMismatch);
  CostSpec ranked{CostKind::Wcvar, WeightScheme::rank_exp(1.0, 0.5)};
  CHECK(code_of([&] { vqe_objective(h, make_ansatz(AnsatzFamily::TwoLocal, 3, 1), ranked, 0, nullptr); }) ==
        ErrorCode::UnsupportedInExactMode);
}

TEST_CASE("evaluate_iteration hand examples") {
  std::vector<double> point(8, 0.0);
  point[5] = 1.0;
  auto m = evaluate_iteration(point, ground_at({5}), 10);
  CHECK(m.success);
  CHECK(m.ground_probability == 1.0);

  const std::vector<double> uniform(4096, 1.0 / 4096.0);
  CHECK(evaluate_iteration(uniform, ground_at({9}), 10).success);
  CHECK_FALSE(evaluate_iteration(uniform, ground_at({10}), 10).success);
  CHECK(evaluate_iteration(uniform, ground_at({10}), 10).ground_probability == 1.0 / 4096.0);

  // Degenerate: any ground state in the top-k counts, mass is summed.
  const std::vector<double> p{0.1, 0.5, 0.3, 0.1};
  m = evaluate_iteration(p, ground_at({0, 2}), 1);
  CHECK_FALSE(m.success);
  CHECK(m.ground_probability == doctest::Approx(0.4));
  m = evaluate_iteration(p, ground_at({0, 2}), 2);
  CHECK(m.success);
  // Tie between index 0 and 3 breaks toward index 0.
  CHECK(evaluate_iteration(p, ground_at({0}), 3).success);
  CHECK_FALSE(evaluate_iteration(p, ground_at({3}), 3).success);
}

TEST_CASE("property: evaluate_iteration agrees with a full sort") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 6;
    const std::size_t dim = std::size_t{1} << n;
    std::vector<double> p(dim);
    for (auto& v : p) v = std::floor(rng.uniform01() * 6.0);  // many ties
    const double total = std::accumulate(p.begin(), p.end(), 0.0) + 1.0;
    p[0] += 1.0;
    for (auto& v : p) v /= total;
    std::vector<std::size_t> order(dim);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] > p[b]; });
    const int k = 1 + static_cast<int>(rng.next_u64() % dim);
    std::vector<BasisIndex> ground{rng.next_u64() % dim};
    if (trial % 3 == 0) ground.push_back((ground[0] + 1) % dim);
    const bool expected = std::any_of(order.begin(), order.begin() + k, [&](std::size_t i) {
      return std::find(ground.begin(), ground.end(), i) != ground.end();
    });
    CHECK(evaluate_iteration(p, ground_at(ground), k).success == expected);
  }
}

TEST_CASE("run_experiment with a zero Hamiltonian") {
  Problem problem;
  problem.spec.n_assets = 3;
  problem.qubo.n = 3;
  problem.qubo.linear.assign(3, 0.0);
  problem.ising = to_ising(problem.qubo);
  problem.diagonal = ising_diagonal(problem.ising);
  problem.exact = solve_exact(problem.qubo, false);
  REQUIRE(problem.exact.degeneracy == 8);
  auto cfg = ExperimentConfig::defaults();
  cfg.optimizer.max_iterations = 1;
  cfg.n_repeats = 2;
  const auto result = run_experiment(cfg, problem);
  REQUIRE(result.records.size() == 2);
  for (const auto& r : result.records) {
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].success);
    CHECK(r.rows[0].ground_prob == doctest::Approx(1.0));
    CHECK(r.cumulative_success == 1);
  }
}

TEST_CASE("run_experiment records are deterministic and consistent") {
  const auto problem = small_problem(4, 12);
  auto cfg = ExperimentConfig::defaults();
  cfg.optimizer.max_iterations = 15;
  cfg.n_repeats = 2;
  cfg.shots = 200;
  for (const auto kind : {OptimizerKind::Cmaes, OptimizerKind::Cobyla}) {
    cfg.optimizer.kind = kind;
    const auto a = run_experiment(cfg, problem);
    const auto b = run_experiment(cfg, problem);
    for (std::size_t r = 0; r < a.records.size(); ++r) {
      const auto& x = a.records[r];
      const auto& y = b.records[r];
      REQUIRE(x.rows.size() == y.rows.size());
      int count = 0;
      for (std::size_t i = 0; i < x.rows.size(); ++i) {
        CHECK(x.rows[i].cost == y.rows[i].cost);
        CHECK(x.rows[i].ground_prob == y.rows[i].ground_prob);
        CHECK(x.rows[i].success == y.rows[i].success);
        CHECK(x.rows[i].ground_prob >= 0.0);
        CHECK(x.rows[i].ground_prob <= 1.0);
        CHECK(x.rows[i].iteration == static_cast<int>(i + 1));
        if (x.rows[i].success) ++count;
      }
      CHECK(count == x.cumulative_success);
      CHECK(x.most_probable == y.most_probable);
      // The most probable final state is never below the ground energy.
      const double e = qubo_energy(problem.qubo, x.most_probable);
      CHECK(e >= problem.exact.ground_energy - 1e-12);
      const bool is_ground = std::find(problem.exact.ground_states.begin(), problem.exact.ground_states.end(),
                                       x.most_probable) != problem.exact.ground_states.end();
      CHECK(is_ground == (std::abs(e - problem.exact.ground_energy) <= 1e-12));
    }
    CHECK(a.records[0].rows.front().cost != a.records[1].rows.front().cost);
  }
}

TEST_CASE("property: success flags ignore the cost-side shot count") {
  const auto problem = small_problem(4, 5);
  const auto c = make_ansatz(AnsatzFamily::TwoLocal, 4, 2);
  Rng rng(4);
  std::vector<std::vector<double>> candidates;
  for (int i = 0; i < 20; ++i) candidates.push_back(oracle::random_angles(rng, c.n_params));
  for (const int shots : {0, 10, 1000}) {
    // A fixed candidate sequence; only the cost evaluation changes with shots.
    const auto f = vqe_objective(problem.ising, c, {CostKind::Cvar, WeightScheme::uniform(0.5)}, shots,
                                 std::make_shared<Rng>(7));
    std::vector<bool> flags;
    for (const auto& theta : candidates) {
      (void)f(theta);
      flags.push_back(evaluate_iteration(probabilities(run_circuit(c, theta)), problem.exact, 3).success);
    }
    static std::vector<bool> reference;
    if (reference.empty()) reference = flags;
    CHECK(flags == reference);
  }
}

TEST_CASE("aggregate matches hand averages") {
  std::vector<std::vector<IterationRow>> traces(5);
  Rng rng(2);
  for (auto& t : traces) {
    for (int i = 1; i <= 6; ++i) t.push_back({i, 0.0, rng.uniform01(), rng.uniform01() < 0.5});
  }
  traces[4].resize(4);
  const auto agg = aggregate(traces);
  REQUIRE(agg.size() == 6);
  for (std::size_t t = 0; t < 6; ++t) {
    double rate = 0.0, prob = 0.0;
    int runs = 0;
    for (const auto& tr : traces) {
      if (tr.size() <= t) continue;
      int cum = 0;
      for (std::size_t i = 0; i <= t; ++i) cum += tr[i].success ? 1 : 0;
      rate += static_cast<double>(cum) / static_cast<double>(t + 1);
      prob += tr[t].ground_prob;
      ++runs;
    }
    CHECK(agg[t].iteration == static_cast<int>(t + 1));
    CHECK(agg[t].n_runs == runs);
    CHECK(agg[t].mean_cum_success_rate == doctest::Approx(rate / runs).epsilon(1e-14));
    CHECK(agg[t].mean_ground_prob == doctest::Approx(prob / runs).epsilon(1e-14));
    if (t > 0) CHECK(agg[t].n_runs <= agg[t - 1].n_runs);
  }
}

TEST_CASE("trace csv format and round trip") {
  const auto dir = scratch("trace");
  const std::vector<IterationRow> rows{{1, -0.5, 0.25, false}, {2, -0.75, 0.5, true}, {3, -0.75, 0.125, true}};
  write_trace_csv(dir / "trace.csv", rows);
  const auto text = slurp(dir / "trace.csv");
  CHECK(text == "iteration,cost,ground_prob,success\n1,-0.5,0.25,0\n2,-0.75,0.5,1\n3,-0.75,0.125,1\n");
  const auto back = read_trace_csv(dir / "trace.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[1].cost == -0.75);
  CHECK(back[1].success);
  CHECK(code_of([&] { read_trace_csv(dir / "missing.csv"); }) == ErrorCode::MissingFile);
}

TEST_CASE("report writes runs, aggregate and summary") {
  const auto dir = scratch("report");
  ExperimentResult result;
  result.config = ExperimentConfig::defaults();
  result.problem = small_problem(4, 3);
  for (int r = 0; r < 5; ++r) {
    RunRecord rec;
    rec.repeat = r;
    for (int i = 1; i <= 3 + r % 2; ++i) rec.rows.push_back({i, -1.0, 0.1 * r, (i + r) % 2 == 0});
    rec.optimizer_trace.push_back({1, -1.0, -1.0});
    result.records.push_back(rec);
  }
  report(result, dir);
  for (int r = 0; r < 5; ++r) {
    CHECK(fs::exists(dir / ("run_00" + std::to_string(r)) / "trace.csv"));
    CHECK(fs::exists(dir / ("run_00" + std::to_string(r)) / "optimizer.csv"));
  }
  const auto agg_text = slurp(dir / "aggregate.csv");
  CHECK(agg_text.rfind("iteration,mean_cum_success_rate,mean_ground_prob,n_runs\n", 0) == 0);
  CHECK(std::count(agg_text.begin(), agg_text.end(), '\n') == 1 + 4);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary.at("ground_bitstring").get<std::string>().size() == 4);
  CHECK(summary.at("selected_assets").size() == 2);
  CHECK(summary.contains("wall_seconds"));
  CHECK(summary.at("config").at("top_k") == 10);

  const auto before = slurp(dir / "aggregate.csv");
  fs::remove(dir / "aggregate.csv");
  reaggregate(dir);
  CHECK(slurp(dir / "aggregate.csv") == before);

  ExperimentResult empty;
  CHECK(code_of([&] { report(empty, dir); }) == ErrorCode::IoError);
}

TEST_CASE("config json round trip and validation") {
  const auto cfg = ExperimentConfig::defaults();
  const auto doc = cfg.to_json();
  const auto back = ExperimentConfig::from_json(doc);
  CHECK(back.to_json() == doc);
  CHECK(back.cost.kind == CostKind::Wcvar);
  CHECK(back.cost.scheme.kind == WeightKind::Piecewise);
  CHECK(back.optimizer.max_iterations == 100);
  CHECK(back.ansatz.resolved_layers() == 3);

  auto bad = doc;
  bad["optimizer"]["sigma"] = 0.1;
  try {
    ExperimentConfig::from_json(bad);
    FAIL("unknown field accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
    CHECK(std::string(e.what()).find("optimizer.sigma") != std::string::npos);
  }
  bad = doc;
  bad["top_k"] = "ten";
  try {
    ExperimentConfig::from_json(bad);
    FAIL("bad type accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("top_k") != std::string::npos);
  }

  auto c2 = cfg;
  c2.top_k = 0;
  CHECK(code_of([&] { c2.validate(false); }) == ErrorCode::InvalidConfig);
  c2 = cfg;
  c2.n_repeats = 0;
  CHECK(code_of([&] { c2.validate(false); }) == ErrorCode::InvalidConfig);
  c2 = cfg;
  c2.data = "/nonexistent/prices.csv";
  CHECK(code_of([&] { c2.validate(true); }) == ErrorCode::InvalidConfig);
  c2 = cfg;
  c2.shots = 0;
  CHECK(code_of([&] { c2.validate(false); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("dotted overrides") {
  auto doc = ExperimentConfig::defaults().to_json();
  apply_override(doc, "seed", "7");
  apply_override(doc, "optimizer.kind", "cobyla");
  apply_override(doc, "cost.alpha", "0.25");
  apply_override(doc, "portfolio.penalty", "auto");
  apply_override(doc, "output_dir", "out/x");
  const auto cfg = ExperimentConfig::from_json(doc);
  CHECK(cfg.seed == 7);
  CHECK(cfg.optimizer.kind == OptimizerKind::Cobyla);
  CHECK(cfg.cost.scheme.alpha == 0.25);
  CHECK_FALSE(cfg.portfolio.penalty.has_value());
  CHECK(cfg.output_dir == "out/x");
  apply_override(doc, "portfolio.bogus", "1");
  CHECK(code_of([&] { ExperimentConfig::from_json(doc); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("sweep cells") {
  auto base = ExperimentConfig::defaults();
  base.output_dir = "sweep";
  SweepSpec spec;
  spec.optimizers = {OptimizerKind::Cmaes};
  const auto cells = sweep_cells(base, spec);
  CHECK(cells.size() == 16);
  std::vector<std::string> names, dirs;
  std::vector<std::uint64_t> seeds;
  for (const auto& c : cells) {
    names.push_back(c.name);
    dirs.push_back(c.config.output_dir);
    seeds.push_back(c.config.seed);
  }
  std::sort(dirs.begin(), dirs.end());
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(dirs.begin(), dirs.end()) == dirs.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
  CHECK(std::find(names.begin(), names.end(), "A2_cmaes_cvar_a0.25") != names.end());
  CHECK(sweep_cells(base, SweepSpec{}).size() == 32);
  for (const auto& c : sweep_cells(base, SweepSpec{})) {
    CHECK(c.config.optimizer.max_iterations ==
          (c.config.optimizer.kind == OptimizerKind::Cmaes ? 100 : 150));
  }
}

TEST_CASE("exact selection respects the budget with the default penalty") {
  Rng rng(44);
  for (int n = 2; n <= 12; n += 2) {
    std::vector<std::string> names(static_cast<std::size_t>(n), "x");
    PortfolioConfig pc;
    pc.lambda = rng.uniform(0.0, 1.0);
    const auto p = build_problem(oracle::random_stats(rng, n), names, pc);
    CHECK(oracle::popcount(p.exact.ground_index) == n / 2);
  }
  std::vector<std::string> names(3, "x");
  CHECK(code_of([&] { build_problem(oracle::random_stats(rng, 3), names, {}); }) == ErrorCode::InvalidConfig);
}
