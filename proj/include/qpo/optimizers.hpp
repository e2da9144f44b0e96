#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpo/rng.hpp"

namespace qpo {

using ParamVector = std::vector<double>;

enum class OptimizerKind { Cmaes, Cobyla };

struct CmaesSettings {
  int population = 0;  // 0 selects 4 + floor(3 ln n)
  double sigma0 = 0.3;
};

struct CobylaSettings {
  double rho_begin = 0.5;
  double rho_end = 1e-4;
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Cmaes;
  CmaesSettings cmaes;
  CobylaSettings cobyla;
  int max_iterations = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

/// A candidate and the objective value measured for it.
struct Evaluation {
  ParamVector params;
  double cost = 0.0;
};

/// Ask/tell driver shared by the optimizers. Every ask() must be answered by
/// one tell() carrying the same candidates, in any order.
class Optimizer {
 public:
  virtual ~Optimizer() = default;

  std::vector<ParamVector> ask();
  void tell(const std::vector<Evaluation>& batch);

  virtual bool finished() const = 0;
  virtual std::string name() const = 0;

  const ParamVector& best_params() const { return best_params_; }
  double best_value() const { return best_value_; }
  /// Completed ask/tell cycles.
  int iteration() const { return iteration_; }
  long evaluations() const { return evaluations_; }

 protected:
  explicit Optimizer(ParamVector initial) : best_params_(std::move(initial)) {}

  virtual std::vector<ParamVector> do_ask() = 0;
  /// `costs` follows the order of the preceding do_ask() result.
  virtual void do_tell(std::span<const double> costs) = 0;

 private:
  std::vector<ParamVector> pending_;
  ParamVector best_params_;
  double best_value_ = std::numeric_limits<double>::infinity();
  int iteration_ = 0;
  long evaluations_ = 0;
};

/// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
/// cumulative step-size adaptation, default constants from Hansen's tutorial.
class Cmaes final : public Optimizer {
 public:
  Cmaes(ParamVector initial, const CmaesSettings& settings, std::uint64_t seed);

  bool finished() const override { return false; }
  std::string name() const override { return "cmaes"; }

  int population() const { return lambda_; }
  double sigma() const { return sigma_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::VectorXd& mean() const { return mean_; }

  static int default_population(int dim);

 protected:
  std::vector<ParamVector> do_ask() override;
  void do_tell(std::span<const double> costs) override;

 private:
  void update_eigensystem();

  int dim_;
  int lambda_;
  int mu_;
  Eigen::VectorXd weights_;
  double mueff_;
  double cc_, cs_, c1_, cmu_, damps_, chi_n_;

  Eigen::VectorXd mean_;
  Eigen::VectorXd pc_;
  Eigen::VectorXd ps_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd basis_;  // eigenvectors of cov_
  Eigen::VectorXd scales_;  // sqrt of eigenvalues
  Eigen::MatrixXd inv_sqrt_cov_;
  double sigma_;
  int generation_ = 0;
  Rng rng_;
  std::vector<Eigen::VectorXd> steps_;  // y_k = B D z_k of the current batch
};

/// Powell's COBYLA for unconstrained problems: a simplex of n+1 points
/// defines a linear model, steps minimize it inside a trust radius rho, and
/// rho shrinks from rho_begin to rho_end. One evaluation per ask().
class Cobyla final : public Optimizer {
 public:
  Cobyla(ParamVector initial, const CobylaSettings& settings);

  bool finished() const override { return finished_; }
  std::string name() const override { return "cobyla"; }

  double rho() const { return rho_; }

 protected:
  std::vector<ParamVector> do_ask() override;
  void do_tell(std::span<const double> costs) override;

 private:
  enum class Step { Initial, Geometry, Trust };

  struct Model {
    int best = 0;
    std::vector<int> vertex_of;  // simplex column -> vertex index
    Eigen::MatrixXd edges;       // columns: vertex - best
    Eigen::MatrixXd inverse;     // edges^-1
    Eigen::VectorXd gradient;
    bool acceptable = true;
    double max_edge = 0.0;
    int longest = 0;
    double min_sigma = 0.0;
    int thinnest = 0;
  };

  Model build_model() const;
  void plan_next();

  int dim_;
  double rho_;
  double rho_end_;
  std::vector<Eigen::VectorXd> vertices_;
  std::vector<double> values_;
  int evaluated_ = 0;

  Step step_ = Step::Initial;
  Eigen::VectorXd pending_point_;
  int replace_slot_ = 0;
  Eigen::VectorXd trust_step_;
  Eigen::MatrixXd trust_inverse_;
  std::vector<int> trust_vertex_of_;
  double predicted_ = 0.0;
  bool acceptable_before_ = true;
  bool check_geometry_ = true;
  bool reduce_rho_ = false;
  bool finished_ = false;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config, ParamVector initial);

using Objective = std::function<double(std::span<const double>)>;
using IterationCallback = std::function<void(int iteration, const Optimizer&)>;

struct TraceRow {
  int iteration = 0;
  double best_cost = 0.0;       // best value seen so far
  double incumbent_cost = 0.0;  // best value within this iteration's batch
};

struct RunResult {
  ParamVector best_params;
  double best_cost = 0.0;
  std::vector<TraceRow> trace;
  long evaluations = 0;
};

/// Ask/tell loop for at most config.max_iterations cycles (fewer if the
/// optimizer converges). `callback` runs after every cycle.
RunResult run(const Objective& objective, const OptimizerConfig& config, ParamVector initial,
              const IterationCallback& callback = {});

/// CSV with header `iteration,best_cost,incumbent_cost`.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

}  // namespace qpo
