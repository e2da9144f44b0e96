#include "qpo/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <set>

#include "qpo/error.hpp"
#include "qpo/statevector.hpp"

namespace qpo {

namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown fields.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  ~Section() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_.contains(key) && !doc_.at(key).is_null();
  }

  const json& at(const std::string& key) { return doc_.at(key); }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number()) fail(field(key), "expected a number");
    return v.get<double>();
  }

  long long integer(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) fail(field(key), "expected an integer");
    return v.get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    fail(field(key), "expected a non-negative integer");
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_string()) fail(field(key), "expected a string");
    return v.get<std::string>();
  }

  void reject_unknown() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) fail(field(key), "unknown field");
    }
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& message) {
    raise(ErrorCode::InvalidConfig, field + ": " + message);
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

// Rethrows library errors raised while parsing enum strings with the field name.
template <typename F>
auto named(const std::string& field, F&& parse) {
  try {
    return parse();
  } catch (const Error& e) {
    Section::fail(field, e.what());
  }
}

}  // namespace

int AnsatzConfig::resolved_layers() const {
  if (layers > 0) return layers;
  return family == AnsatzFamily::TwoLocal ? 3 : 2;
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig cfg;
  cfg.cost.kind = CostKind::Wcvar;
  cfg.cost.scheme = WeightScheme::piecewise(1.0, 5, 20, 0.7, 0.2, 0.05);
  cfg.cost.scheme.beta = 0.5;
  cfg.optimizer.kind = OptimizerKind::Cmaes;
  cfg.optimizer.max_iterations = 100;
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  ExperimentConfig cfg = defaults();
  Section top(doc, "");
  cfg.data = top.text("data", cfg.data);
  cfg.shots = static_cast<int>(top.integer("shots", cfg.shots));
  cfg.top_k = static_cast<int>(top.integer("top_k", cfg.top_k));
  cfg.n_repeats = static_cast<int>(top.integer("n_repeats", cfg.n_repeats));
  cfg.seed = top.unsigned_integer("seed", cfg.seed);
  cfg.output_dir = top.text("output_dir", cfg.output_dir);

  if (top.has("portfolio")) {
    Section s(top.at("portfolio"), "portfolio");
    cfg.portfolio.lambda = s.number("lambda", cfg.portfolio.lambda);
    if (s.has("penalty")) {
      const auto& v = s.at("penalty");
      if (v.is_string() && v.get<std::string>() == "auto") {
        cfg.portfolio.penalty.reset();
      } else if (v.is_number()) {
        cfg.portfolio.penalty = v.get<double>();
      } else {
        Section::fail("portfolio.penalty", "expected a number or \"auto\"");
      }
    }
    if (s.has("budget")) {
      const auto& v = s.at("budget");
      if (v.is_string() && v.get<std::string>() == "auto") {
        cfg.portfolio.budget.reset();
      } else if (v.is_number_integer()) {
        cfg.portfolio.budget = v.get<int>();
      } else {
        Section::fail("portfolio.budget", "expected an integer or \"auto\"");
      }
    }
    const auto form = s.text("variance_form", "full");
    if (form == "full") {
      cfg.portfolio.variance_form = VarianceForm::Full;
    } else if (form == "upper_triangle") {
      cfg.portfolio.variance_form = VarianceForm::UpperTriangle;
    } else {
      Section::fail("portfolio.variance_form", "expected \"full\" or \"upper_triangle\"");
    }
    s.reject_unknown();
  }

  if (top.has("ansatz")) {
    Section s(top.at("ansatz"), "ansatz");
    const auto family = s.text("family", to_string(cfg.ansatz.family));
    cfg.ansatz.family = named("ansatz.family", [&] { return ansatz_family_from_string(family); });
    cfg.ansatz.layers = static_cast<int>(s.integer("layers", cfg.ansatz.layers));
    s.reject_unknown();
  }

  if (top.has("cost")) {
    Section s(top.at("cost"), "cost");
    auto& scheme = cfg.cost.scheme;
    const auto kind = s.text("kind", to_string(cfg.cost.kind));
    cfg.cost.kind = named("cost.kind", [&] { return cost_kind_from_string(kind); });
    const auto weighting = s.text("weighting", to_string(scheme.kind));
    scheme.kind = named("cost.weighting", [&] { return weight_kind_from_string(weighting); });
    scheme.alpha = s.number("alpha", scheme.alpha);
    scheme.beta = s.number("beta", scheme.beta);
    scheme.n1 = static_cast<int>(s.integer("n1", scheme.n1));
    scheme.n2 = static_cast<int>(s.integer("n2", scheme.n2));
    scheme.beta1 = s.number("beta1", scheme.beta1);
    scheme.beta2 = s.number("beta2", scheme.beta2);
    scheme.beta3 = s.number("beta3", scheme.beta3);
    s.reject_unknown();
  }

  if (top.has("optimizer")) {
    Section s(top.at("optimizer"), "optimizer");
    auto& opt = cfg.optimizer;
    const auto kind = s.text("kind", to_string(opt.kind));
    opt.kind = named("optimizer.kind", [&] { return optimizer_kind_from_string(kind); });
    opt.max_iterations = static_cast<int>(s.integer("max_iterations", opt.max_iterations));
    opt.cmaes.population = static_cast<int>(s.integer("population", opt.cmaes.population));
    opt.cmaes.sigma0 = s.number("sigma0", opt.cmaes.sigma0);
    opt.cobyla.rho_begin = s.number("rho_begin", opt.cobyla.rho_begin);
    opt.cobyla.rho_end = s.number("rho_end", opt.cobyla.rho_end);
    s.reject_unknown();
  }
  top.reject_unknown();
  return cfg;
}

json ExperimentConfig::to_json() const {
  const auto& scheme = cost.scheme;
  json portfolio_doc{
      {"lambda", portfolio.lambda},
      {"penalty", portfolio.penalty ? json(*portfolio.penalty) : json("auto")},
      {"budget", portfolio.budget ? json(*portfolio.budget) : json("auto")},
      {"variance_form",
       portfolio.variance_form == VarianceForm::Full ? "full" : "upper_triangle"}};
  return {{"data", data},
          {"portfolio", portfolio_doc},
          {"ansatz", {{"family", to_string(ansatz.family)}, {"layers", ansatz.resolved_layers()}}},
          {"cost",
           {{"kind", to_string(cost.kind)},
            {"weighting", to_string(scheme.kind)},
            {"alpha", scheme.alpha},
            {"beta", scheme.beta},
            {"n1", scheme.n1},
            {"n2", scheme.n2},
            {"beta1", scheme.beta1},
            {"beta2", scheme.beta2},
            {"beta3", scheme.beta3}}},
          {"optimizer",
           {{"kind", to_string(optimizer.kind)},
            {"max_iterations", optimizer.max_iterations},
            {"population", optimizer.cmaes.population},
            {"sigma0", optimizer.cmaes.sigma0},
            {"rho_begin", optimizer.cobyla.rho_begin},
            {"rho_end", optimizer.cobyla.rho_end}}},
          {"shots", shots},
          {"top_k", top_k},
          {"n_repeats", n_repeats},
          {"seed", seed},
          {"output_dir", output_dir}};
}

void ExperimentConfig::validate(bool check_files) const {
  const auto fail = [](const std::string& field, const std::string& msg) {
    Section::fail(field, msg);
  };
  if (check_files) {
    if (data.empty()) fail("data", "a price CSV path is required");
    if (!std::filesystem::exists(data)) fail("data", "file not found: " + data);
  }
  if (!(portfolio.lambda >= 0.0 && portfolio.lambda <= 1.0)) fail("portfolio.lambda", "must lie in [0, 1]");
  if (portfolio.penalty && !(*portfolio.penalty >= 0.0)) fail("portfolio.penalty", "must be >= 0");
  if (portfolio.budget && *portfolio.budget < 1) fail("portfolio.budget", "must be >= 1");
  if (ansatz.layers < 0) fail("ansatz.layers", "must be >= 1 (or 0 for the default)");
  if (shots < 0) fail("shots", "must be >= 0");
  if (top_k < 1) fail("top_k", "must be >= 1");
  if (n_repeats < 1) fail("n_repeats", "must be >= 1");
  try {
    cost.validate();
  } catch (const Error& e) {
    fail("cost", e.what());
  }
  if (shots == 0 && !cost.supports_exact_mode()) {
    fail("cost.weighting", to_string(cost.scheme.kind) + " needs shots > 0");
  }
  try {
    optimizer.validate();
  } catch (const Error& e) {
    fail("optimizer", e.what());
  }
}

void apply_override(json& doc, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) raise(ErrorCode::InvalidConfig, "empty override key");
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_key.find('.', start);
    const auto part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) raise(ErrorCode::InvalidConfig, dotted_key + ": malformed key");
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

// ---------------------------------------------------------------------------

Problem build_problem(const AssetStats& stats, std::vector<std::string> asset_names,
                      const PortfolioConfig& portfolio) {
  Problem p;
  const int n = static_cast<int>(stats.size());
  p.asset_names = std::move(asset_names);
  p.stats = stats;
  p.spec.n_assets = n;
  p.spec.lambda = portfolio.lambda;
  if (portfolio.budget) {
    p.spec.budget = *portfolio.budget;
  } else {
    if (n % 2 != 0) {
      raise(ErrorCode::InvalidConfig,
            "portfolio.budget: odd asset count " + std::to_string(n) + " needs an explicit budget");
    }
    p.spec.budget = n / 2;
  }
  p.spec.penalty = portfolio.penalty ? *portfolio.penalty : default_penalty(stats, portfolio.lambda);
  p.qubo = build_qubo(stats, p.spec, portfolio.variance_form);
  p.ising = to_ising(p.qubo);
  p.diagonal = ising_diagonal(p.ising);
  p.exact = solve_exact(p.qubo, false);
  return p;
}

Problem build_problem(const PriceMatrix& prices, const PortfolioConfig& portfolio) {
  return build_problem(compute_stats(compute_returns(prices)), prices.asset_names, portfolio);
}

namespace {

class VqeObjective {
 public:
  VqeObjective(const IsingHamiltonian& h, Circuit circuit, CostSpec cost, int shots,
               std::shared_ptr<Rng> rng)
      : diagonal_(ising_diagonal(h)),
        circuit_(std::move(circuit)),
        cost_(cost),
        shots_(shots),
        rng_(std::move(rng)) {
    if (circuit_.n_qubits != h.n) {
      raise(ErrorCode::DimensionMismatch, "circuit has " + std::to_string(circuit_.n_qubits) +
                                              " qubits, Hamiltonian " + std::to_string(h.n));
    }
    if (shots_ < 0) raise(ErrorCode::InvalidConfig, "shots must be >= 0");
    if (shots_ > 0 && !rng_) raise(ErrorCode::InvalidConfig, "sampling needs a random source");
    if (shots_ == 0 && !cost_.supports_exact_mode()) {
      raise(ErrorCode::UnsupportedInExactMode, to_string(cost_.scheme.kind) + " needs shots > 0");
    }
    cost_.validate();
    energies_.resize(static_cast<std::size_t>(shots_));
  }

  double operator()(std::span<const double> params) {
    const auto probs = probabilities(run_circuit(circuit_, params));
    if (shots_ == 0) return exact_mode_cost(probs, diagonal_, cost_);
    const auto draws = sample_bitstrings(probs, static_cast<std::size_t>(shots_), *rng_);
    for (std::size_t k = 0; k < draws.size(); ++k) energies_[k] = diagonal_[draws[k]];
    return sampled_cost(cost_, energies_);
  }

 private:
  std::vector<double> diagonal_;
  Circuit circuit_;
  CostSpec cost_;
  int shots_;
  std::shared_ptr<Rng> rng_;
  std::vector<double> energies_;
};

}  // namespace

Objective vqe_objective(const IsingHamiltonian& h, const Circuit& circuit, const CostSpec& cost,
                        int shots, std::shared_ptr<Rng> rng) {
  auto impl = std::make_shared<VqeObjective>(h, circuit, cost, shots, std::move(rng));
  return [impl](std::span<const double> params) { return (*impl)(params); };
}

IterationMetric evaluate_iteration(std::span<const double> probabilities, const ExactSolution& exact,
                                   int top_k) {
  IterationMetric metric;
  for (const auto g : exact.ground_states) {
    if (g >= probabilities.size()) {
      raise(ErrorCode::DimensionMismatch, "ground state index outside the distribution");
    }
    const double pg = probabilities[g];
    metric.ground_probability += pg;
    if (metric.success) continue;
    // Rank of g under (probability desc, index asc).
    std::size_t ahead = 0;
    for (std::size_t i = 0; i < probabilities.size() && ahead < static_cast<std::size_t>(top_k); ++i) {
      if (probabilities[i] > pg || (probabilities[i] == pg && i < g)) ++ahead;
    }
    if (ahead < static_cast<std::size_t>(top_k)) metric.success = true;
  }
  metric.ground_probability = std::clamp(metric.ground_probability, 0.0, 1.0);
  return metric;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RecordCallback& on_record) {
  config.validate();
  const auto prices = load_prices(config.data);
  const auto problem = build_problem(prices, config.portfolio);
  return run_experiment(config, problem, on_record);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Problem& problem,
                                const RecordCallback& on_record) {
  config.validate(false);
  const auto started = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.config = config;
  result.problem = problem;

  const int n = problem.ising.n;
  const auto circuit = make_ansatz(config.ansatz.family, n, config.ansatz.resolved_layers());

  for (int r = 0; r < config.n_repeats; ++r) {
    RunRecord record;
    record.repeat = r;
    record.seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));

    Rng init_rng(derive_seed(record.seed, 1));
    ParamVector initial(static_cast<std::size_t>(circuit.n_params));
    for (auto& theta : initial) theta = init_rng.uniform(-std::numbers::pi, std::numbers::pi);

    OptimizerConfig opt = config.optimizer;
    opt.seed = derive_seed(record.seed, 2);
    auto sampler = std::make_shared<Rng>(derive_seed(record.seed, 3));
    const auto objective = vqe_objective(problem.ising, circuit, config.cost, config.shots, sampler);

    std::vector<double> last_probs;
    const auto on_iteration = [&](int iteration, const Optimizer& o) {
      last_probs = probabilities(run_circuit(circuit, o.best_params()));
      const auto metric = evaluate_iteration(last_probs, problem.exact, config.top_k);
      if (metric.success) ++record.cumulative_success;
      record.rows.push_back({iteration, o.best_value(), metric.ground_probability, metric.success});
    };
    const auto run_result = run(objective, opt, initial, on_iteration);

    record.optimizer_trace = run_result.trace;
    record.best_cost = run_result.best_cost;
    record.evaluations = run_result.evaluations;
    if (!last_probs.empty()) {
      record.most_probable = static_cast<BasisIndex>(
          std::max_element(last_probs.begin(), last_probs.end()) - last_probs.begin());
    }
    if (on_record) on_record(problem, record);
    result.records.push_back(std::move(record));
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace qpo
