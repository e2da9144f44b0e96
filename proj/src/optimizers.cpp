#include "qpo/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "qpo/error.hpp"

namespace qpo {

namespace {

Eigen::VectorXd to_eigen(const ParamVector& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ParamVector to_params(const Eigen::VectorXd& v) { return ParamVector(v.data(), v.data() + v.size()); }

}  // namespace

void OptimizerConfig::validate() const {
  if (max_iterations < 1) raise(ErrorCode::InvalidConfig, "max_iterations must be >= 1");
  if (kind == OptimizerKind::Cmaes) {
    if (cmaes.population != 0 && cmaes.population < 2) {
      raise(ErrorCode::InvalidConfig, "CMA-ES population must be >= 2");
    }
    if (!(cmaes.sigma0 > 0.0)) raise(ErrorCode::InvalidConfig, "CMA-ES sigma0 must be positive");
  } else {
    if (!(cobyla.rho_end > 0.0 && cobyla.rho_begin > cobyla.rho_end)) {
      raise(ErrorCode::InvalidConfig, "COBYLA needs rho_begin > rho_end > 0");
    }
  }
}

// ---------------------------------------------------------------------------
// Optimizer

std::vector<ParamVector> Optimizer::ask() {
  if (finished()) raise(ErrorCode::OptimizerFinished, name() + " has converged");
  if (pending_.empty()) pending_ = do_ask();
  return pending_;
}

void Optimizer::tell(const std::vector<Evaluation>& batch) {
  if (pending_.empty() || batch.size() != pending_.size()) {
    raise(ErrorCode::BatchMismatch, "tell() batch does not answer the last ask()");
  }
  // Match results to candidates by value so completion order is irrelevant.
  std::vector<double> costs(pending_.size());
  std::vector<bool> seen(pending_.size(), false);
  for (const auto& eval : batch) {
    bool matched = false;
    for (std::size_t k = 0; k < pending_.size(); ++k) {
      if (!seen[k] && pending_[k] == eval.params) {
        costs[k] = eval.cost;
        seen[k] = true;
        matched = true;
        break;
      }
    }
    if (!matched) raise(ErrorCode::BatchMismatch, "evaluated candidate was never asked for");
  }
  for (std::size_t k = 0; k < pending_.size(); ++k) {
    if (costs[k] < best_value_) {
      best_value_ = costs[k];
      best_params_ = pending_[k];
    }
  }
  evaluations_ += static_cast<long>(pending_.size());
  ++iteration_;
  pending_.clear();
  do_tell(costs);
}

// ---------------------------------------------------------------------------
// CMA-ES

int Cmaes::default_population(int dim) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dim))));
}

Cmaes::Cmaes(ParamVector initial, const CmaesSettings& settings, std::uint64_t seed)
    : Optimizer(initial), dim_(static_cast<int>(initial.size())), rng_(seed) {
  if (dim_ < 1) raise(ErrorCode::InvalidConfig, "CMA-ES needs at least one parameter");
  if (!(settings.sigma0 > 0.0)) raise(ErrorCode::InvalidConfig, "sigma0 must be positive");
  const double n = dim_;
  lambda_ = settings.population > 0 ? settings.population : default_population(dim_);
  if (lambda_ < 2) raise(ErrorCode::InvalidConfig, "population must be >= 2");
  mu_ = lambda_ / 2;

  weights_.resize(mu_);
  for (int i = 0; i < mu_; ++i) weights_(i) = std::log(lambda_ / 2.0 + 0.5) - std::log(i + 1.0);
  weights_ /= weights_.sum();
  mueff_ = 1.0 / weights_.squaredNorm();

  cc_ = (4.0 + mueff_ / n) / (n + 4.0 + 2.0 * mueff_ / n);
  cs_ = (mueff_ + 2.0) / (n + mueff_ + 5.0);
  c1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mueff_);
  cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((n + 2.0) * (n + 2.0) + mueff_));
  damps_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (n + 1.0)) - 1.0) + cs_;
  chi_n_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  mean_ = to_eigen(initial);
  pc_ = Eigen::VectorXd::Zero(dim_);
  ps_ = Eigen::VectorXd::Zero(dim_);
  cov_ = Eigen::MatrixXd::Identity(dim_, dim_);
  basis_ = Eigen::MatrixXd::Identity(dim_, dim_);
  scales_ = Eigen::VectorXd::Ones(dim_);
  inv_sqrt_cov_ = Eigen::MatrixXd::Identity(dim_, dim_);
  sigma_ = settings.sigma0;
}

std::vector<ParamVector> Cmaes::do_ask() {
  steps_.assign(static_cast<std::size_t>(lambda_), Eigen::VectorXd());
  std::vector<ParamVector> batch;
  batch.reserve(static_cast<std::size_t>(lambda_));
  Eigen::VectorXd z(dim_);
  for (auto& y : steps_) {
    for (int i = 0; i < dim_; ++i) z(i) = rng_.normal();
    y = basis_ * scales_.cwiseProduct(z);
    batch.push_back(to_params(mean_ + sigma_ * y));
  }
  return batch;
}

void Cmaes::do_tell(std::span<const double> costs) {
  std::vector<int> order(static_cast<std::size_t>(lambda_));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return costs[static_cast<std::size_t>(a)] < costs[static_cast<std::size_t>(b)]; });

  Eigen::VectorXd y_w = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < mu_; ++i) y_w += weights_(i) * steps_[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  mean_ += sigma_ * y_w;

  ++generation_;
  ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * (inv_sqrt_cov_ * y_w);
  const double ps_norm = ps_.norm();
  const double decay = 1.0 - std::pow(1.0 - cs_, 2.0 * generation_);
  const bool hsig = ps_norm / std::sqrt(decay) / chi_n_ < 1.4 + 2.0 / (dim_ + 1.0);
  pc_ = (1.0 - cc_) * pc_;
  if (hsig) pc_ += std::sqrt(cc_ * (2.0 - cc_) * mueff_) * y_w;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(dim_, dim_);
  for (int i = 0; i < mu_; ++i) {
    const auto& y = steps_[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    rank_mu.noalias() += weights_(i) * y * y.transpose();
  }
  const double stall = hsig ? 0.0 : c1_ * cc_ * (2.0 - cc_);
  cov_ = (1.0 - c1_ - cmu_ + stall) * cov_ + c1_ * pc_ * pc_.transpose() + cmu_ * rank_mu;

  sigma_ *= std::exp((cs_ / damps_) * (ps_norm / chi_n_ - 1.0));
  update_eigensystem();
}

void Cmaes::update_eigensystem() {
  cov_ = 0.5 * (cov_ + cov_.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
  Eigen::VectorXd values = eig.eigenvalues();
  // Floor keeps C positive definite when round-off pushes eigenvalues down.
  const double floor = std::max(values.maxCoeff(), 1e-300) * 1e-14;
  bool clipped = false;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < floor) {
      values(i) = floor;
      clipped = true;
    }
  }
  basis_ = eig.eigenvectors();
  if (clipped) cov_ = basis_ * values.asDiagonal() * basis_.transpose();
  scales_ = values.cwiseSqrt();
  inv_sqrt_cov_ = basis_ * scales_.cwiseInverse().asDiagonal() * basis_.transpose();
}

// ---------------------------------------------------------------------------
// COBYLA

namespace {
constexpr double kSigmaFactor = 0.25;  // Powell's alpha: min distance to opposite face
constexpr double kEtaFactor = 2.1;     // Powell's beta: max edge length
constexpr double kEdgeMaxFactor = 1.1; // Powell's delta
constexpr double kGeometryStep = 0.5;  // Powell's gamma
constexpr double kGoodRatio = 0.1;
}  // namespace

Cobyla::Cobyla(ParamVector initial, const CobylaSettings& settings)
    : Optimizer(initial),
      dim_(static_cast<int>(initial.size())),
      rho_(settings.rho_begin),
      rho_end_(settings.rho_end) {
  if (dim_ < 1) raise(ErrorCode::InvalidConfig, "COBYLA needs at least one parameter");
  if (!(rho_end_ > 0.0 && rho_ > rho_end_)) {
    raise(ErrorCode::InvalidConfig, "COBYLA needs rho_begin > rho_end > 0");
  }
  const Eigen::VectorXd x0 = to_eigen(initial);
  vertices_.assign(static_cast<std::size_t>(dim_ + 1), x0);
  for (int j = 0; j < dim_; ++j) vertices_[static_cast<std::size_t>(j + 1)](j) += rho_;
  values_.assign(static_cast<std::size_t>(dim_ + 1), 0.0);
  step_ = Step::Initial;
  pending_point_ = x0;
  replace_slot_ = 0;
}

std::vector<ParamVector> Cobyla::do_ask() { return {to_params(pending_point_)}; }

Cobyla::Model Cobyla::build_model() const {
  Model m;
  const auto count = static_cast<int>(values_.size());
  m.best = 0;
  for (int v = 1; v < count; ++v) {
    if (values_[static_cast<std::size_t>(v)] < values_[static_cast<std::size_t>(m.best)]) m.best = v;
  }
  const auto& base = vertices_[static_cast<std::size_t>(m.best)];
  m.edges.resize(dim_, dim_);
  Eigen::VectorXd df(dim_);
  for (int v = 0, col = 0; v < count; ++v) {
    if (v == m.best) continue;
    m.vertex_of.push_back(v);
    m.edges.col(col) = vertices_[static_cast<std::size_t>(v)] - base;
    df(col) = values_[static_cast<std::size_t>(v)] - values_[static_cast<std::size_t>(m.best)];
    ++col;
  }
  m.inverse = m.edges.partialPivLu().inverse();
  m.gradient = m.inverse.transpose() * df;

  m.max_edge = -1.0;
  m.min_sigma = std::numeric_limits<double>::infinity();
  for (int col = 0; col < dim_; ++col) {
    const double eta = m.edges.col(col).norm();
    const double row_norm = m.inverse.row(col).norm();
    const double sig = row_norm > 0.0 && std::isfinite(row_norm) ? 1.0 / row_norm : 0.0;
    if (eta > m.max_edge) {
      m.max_edge = eta;
      m.longest = col;
    }
    if (sig < m.min_sigma) {
      m.min_sigma = sig;
      m.thinnest = col;
    }
  }
  m.acceptable = m.max_edge <= kEtaFactor * rho_ && m.min_sigma >= kSigmaFactor * rho_ &&
                 m.inverse.allFinite();
  return m;
}

void Cobyla::plan_next() {
  while (true) {
    if (reduce_rho_) {
      reduce_rho_ = false;
      if (rho_ <= rho_end_) {
        finished_ = true;
        return;
      }
      rho_ *= 0.5;
      if (rho_ <= 1.5 * rho_end_) rho_ = rho_end_;
      check_geometry_ = true;
    }

    const Model m = build_model();
    const auto& base = vertices_[static_cast<std::size_t>(m.best)];

    if (check_geometry_ && !m.acceptable) {
      // Replace the worst-shaped vertex by a point at distance gamma*rho
      // from the best vertex, normal to the opposite face.
      const int col = m.max_edge > kEtaFactor * rho_ ? m.longest : m.thinnest;
      Eigen::VectorXd dir = m.inverse.row(col).transpose();
      const double len = dir.norm();
      if (!(len > 0.0) || !std::isfinite(len)) {
        dir = Eigen::VectorXd::Unit(dim_, col % dim_);
      } else {
        dir /= len;
      }
      Eigen::VectorXd dx = kGeometryStep * rho_ * dir;
      if (m.gradient.allFinite() && m.gradient.dot(dx) > 0.0) dx = -dx;
      step_ = Step::Geometry;
      replace_slot_ = m.vertex_of[static_cast<std::size_t>(col)];
      pending_point_ = base + dx;
      return;
    }

    const double gnorm = m.gradient.norm();
    if (!(gnorm > 0.0) || !std::isfinite(gnorm)) {
      reduce_rho_ = true;
      continue;
    }
    trust_step_ = -(rho_ / gnorm) * m.gradient;
    predicted_ = rho_ * gnorm;
    trust_inverse_ = m.inverse;
    trust_vertex_of_ = m.vertex_of;
    acceptable_before_ = m.acceptable;
    step_ = Step::Trust;
    replace_slot_ = m.best;
    pending_point_ = base + trust_step_;
    return;
  }
}

void Cobyla::do_tell(std::span<const double> costs) {
  const double f = costs[0];
  switch (step_) {
    case Step::Initial: {
      values_[static_cast<std::size_t>(replace_slot_)] = f;
      ++evaluated_;
      if (evaluated_ <= dim_) {
        replace_slot_ = evaluated_;
        pending_point_ = vertices_[static_cast<std::size_t>(replace_slot_)];
        return;
      }
      check_geometry_ = true;
      break;
    }
    case Step::Geometry: {
      vertices_[static_cast<std::size_t>(replace_slot_)] = pending_point_;
      values_[static_cast<std::size_t>(replace_slot_)] = f;
      check_geometry_ = true;
      break;
    }
    case Step::Trust: {
      const int best = replace_slot_;
      const double f_best = values_[static_cast<std::size_t>(best)];
      const double actual = f_best - f;
      // Pick the vertex to drop: largest barycentric weight of the step,
      // penalized by distance from the new point.
      const double threshold = actual > 0.0 ? 0.0 : 1.0;
      const double edge_max = kEdgeMaxFactor * rho_;
      int drop = -1;
      double top = threshold;
      for (int col = 0; col < dim_; ++col) {
        double weight = std::abs(trust_inverse_.row(col).dot(trust_step_));
        const int v = trust_vertex_of_[static_cast<std::size_t>(col)];
        const double dist = (vertices_[static_cast<std::size_t>(v)] - pending_point_).norm();
        if (dist > edge_max) weight *= std::pow(dist / edge_max, 3);
        if (weight > top) {
          top = weight;
          drop = v;
        }
      }
      if (drop >= 0) {
        vertices_[static_cast<std::size_t>(drop)] = pending_point_;
        values_[static_cast<std::size_t>(drop)] = f;
      }
      if (actual > kGoodRatio * predicted_) {
        check_geometry_ = false;
      } else if (!acceptable_before_) {
        check_geometry_ = true;
      } else {
        reduce_rho_ = true;
      }
      break;
    }
  }
  plan_next();
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config, ParamVector initial) {
  config.validate();
  if (config.kind == OptimizerKind::Cmaes) {
    return std::make_unique<Cmaes>(std::move(initial), config.cmaes, config.seed);
  }
  return std::make_unique<Cobyla>(std::move(initial), config.cobyla);
}

// ---------------------------------------------------------------------------

RunResult run(const Objective& objective, const OptimizerConfig& config, ParamVector initial,
              const IterationCallback& callback) {
  auto opt = make_optimizer(config, std::move(initial));
  RunResult result;
  for (int it = 1; it <= config.max_iterations && !opt->finished(); ++it) {
    const auto batch = opt->ask();
    std::vector<Evaluation> evals;
    evals.reserve(batch.size());
    double incumbent = std::numeric_limits<double>::infinity();
    for (const auto& params : batch) {
      const double cost = objective(params);
      incumbent = std::min(incumbent, cost);
      evals.push_back({params, cost});
    }
    opt->tell(evals);
    result.trace.push_back({it, opt->best_value(), incumbent});
    if (callback) callback(it, *opt);
  }
  result.best_params = opt->best_params();
  result.best_cost = opt->best_value();
  result.evaluations = opt->evaluations();
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iteration,best_cost,incumbent_cost\n" << std::setprecision(17);
  for (const auto& row : trace) {
    out << row.iteration << ',' << row.best_cost << ',' << row.incumbent_cost << '\n';
  }
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Cmaes ? "cmaes" : "cobyla";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "cmaes") return OptimizerKind::Cmaes;
  if (name == "cobyla") return OptimizerKind::Cobyla;
  raise(ErrorCode::InvalidConfig, "unknown optimizer '" + name + "'");
}

}  // namespace qpo
