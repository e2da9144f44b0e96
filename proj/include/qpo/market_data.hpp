#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qpo {

/// Historical closing prices: one row per time point, one column per asset.
struct PriceMatrix {
  Eigen::MatrixXd prices;  // M x N, strictly positive
  std::vector<std::string> asset_names;
  std::vector<std::string> time_labels;

  Eigen::Index n_times() const { return prices.rows(); }
  Eigen::Index n_assets() const { return prices.cols(); }
};

/// Per-period expected returns and their sample covariance.
struct AssetStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;

  Eigen::Index size() const { return mu.size(); }
};

/// Checks the PriceMatrix invariants (M >= 3, N >= 2, labels sized, prices > 0).
void validate(const PriceMatrix& p);

/// Reads `date,<name1>,...,<nameN>` CSV. Blank lines are skipped, CRLF is
/// accepted, empty cells are an error.
PriceMatrix load_prices(const std::filesystem::path& path);
PriceMatrix parse_prices(const std::string& text);

/// Writes prices in the format read by load_prices (round-trip exact).
void save_prices(const PriceMatrix& p, const std::filesystem::path& path);

/// Simple per-period returns, (M-1) x N.
Eigen::MatrixXd compute_returns(const PriceMatrix& p);

/// Column means and (rows - 1)-normalized sample covariance of a return grid.
AssetStats compute_stats(const Eigen::MatrixXd& returns);

/// Geometric random-walk prices for fixtures and demos.
PriceMatrix synthetic_prices(int n_assets, int n_times, std::uint64_t seed);

}  // namespace qpo
