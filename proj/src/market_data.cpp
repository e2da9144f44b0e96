#include "qpo/market_data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qpo/error.hpp"
#include "qpo/rng.hpp"

namespace qpo {

namespace {

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

void validate(const PriceMatrix& p) {
  if (p.n_times() < 3) {
    raise(ErrorCode::TooFewRows,
          "need at least 3 price rows, got " + std::to_string(p.n_times()));
  }
  if (p.n_assets() < 2) {
    raise(ErrorCode::DimensionMismatch,
          "need at least 2 assets, got " + std::to_string(p.n_assets()));
  }
  if (static_cast<Eigen::Index>(p.asset_names.size()) != p.n_assets() ||
      static_cast<Eigen::Index>(p.time_labels.size()) != p.n_times()) {
    raise(ErrorCode::DimensionMismatch, "label counts do not match price grid");
  }
  for (Eigen::Index r = 0; r < p.n_times(); ++r) {
    for (Eigen::Index c = 0; c < p.n_assets(); ++c) {
      const double v = p.prices(r, c);
      if (!(v > 0.0) || !std::isfinite(v)) {
        raise(ErrorCode::NonPositivePrice,
              "row " + std::to_string(r) + ", col " + std::to_string(c));
      }
    }
  }
}

PriceMatrix parse_prices(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::vector<std::string> names;
  std::vector<std::string> labels;
  std::vector<double> values;

  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto cells = split_row(line);
    if (names.empty()) {
      if (cells.size() < 2) {
        raise(ErrorCode::MalformedRow,
              "line " + std::to_string(line_no) + ": header needs asset columns");
      }
      for (std::size_t c = 1; c < cells.size(); ++c) names.emplace_back(trim(cells[c]));
      continue;
    }
    if (cells.size() != names.size() + 1) {
      raise(ErrorCode::MalformedRow,
            "line " + std::to_string(line_no) + ": expected " +
                std::to_string(names.size() + 1) + " cells, got " +
                std::to_string(cells.size()));
    }
    labels.emplace_back(trim(cells[0]));
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto cell = trim(cells[c]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        raise(ErrorCode::MalformedRow, "line " + std::to_string(line_no) +
                                           ": non-numeric cell '" + std::string(cell) + "'");
      }
      if (!(v > 0.0) || !std::isfinite(v)) {
        raise(ErrorCode::NonPositivePrice,
              "row " + std::to_string(labels.size() - 1) + ", col " + std::to_string(c - 1) +
                  " (line " + std::to_string(line_no) + ")");
      }
      values.push_back(v);
    }
  }
  if (names.empty()) raise(ErrorCode::MalformedRow, "line 1: missing header");

  PriceMatrix p;
  const auto rows = static_cast<Eigen::Index>(labels.size());
  const auto cols = static_cast<Eigen::Index>(names.size());
  if (rows < 3) {
    raise(ErrorCode::TooFewRows, "need at least 3 price rows, got " + std::to_string(rows));
  }
  p.prices = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
  p.asset_names = std::move(names);
  p.time_labels = std::move(labels);
  validate(p);
  return p;
}

PriceMatrix load_prices(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::MissingFile, path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_prices(buffer.str());
}

void save_prices(const PriceMatrix& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  out << "date";
  for (const auto& name : p.asset_names) out << ',' << name;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < p.n_times(); ++r) {
    out << p.time_labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < p.n_assets(); ++c) out << ',' << p.prices(r, c);
    out << '\n';
  }
}

Eigen::MatrixXd compute_returns(const PriceMatrix& p) {
  validate(p);
  const auto m = p.n_times();
  return (p.prices.bottomRows(m - 1).array() - p.prices.topRows(m - 1).array()) /
         p.prices.topRows(m - 1).array();
}

AssetStats compute_stats(const Eigen::MatrixXd& returns) {
  const auto rows = returns.rows();
  if (rows < 2) {
    raise(ErrorCode::TooFewReturnRows,
          "need at least 2 return rows, got " + std::to_string(rows));
  }
  AssetStats stats;
  stats.mu = returns.colwise().mean().transpose();
  const Eigen::MatrixXd centered = returns.rowwise() - stats.mu.transpose();
  const auto n = returns.cols();
  stats.sigma.resize(n, n);
  // Fill the upper triangle and mirror it so symmetry holds bit for bit.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double cov = centered.col(i).dot(centered.col(j)) / static_cast<double>(rows - 1);
      stats.sigma(i, j) = cov;
      stats.sigma(j, i) = cov;
    }
  }
  return stats;
}

PriceMatrix synthetic_prices(int n_assets, int n_times, std::uint64_t seed) {
  Rng rng(seed);
  PriceMatrix p;
  p.prices.resize(n_times, n_assets);
  // One market factor plus idiosyncratic noise, per-asset drift and volatility.
  std::vector<double> drift(static_cast<std::size_t>(n_assets));
  std::vector<double> vol(static_cast<std::size_t>(n_assets));
  std::vector<double> beta(static_cast<std::size_t>(n_assets));
  for (int a = 0; a < n_assets; ++a) {
    drift[a] = rng.uniform(-0.0005, 0.0015);
    vol[a] = rng.uniform(0.008, 0.025);
    beta[a] = rng.uniform(0.2, 1.2);
    p.prices(0, a) = std::round(rng.uniform(20.0, 400.0) * 100.0) / 100.0;
    p.asset_names.push_back("S" + std::to_string(a + 1));
  }
  p.time_labels.push_back("t0000");
  for (int t = 1; t < n_times; ++t) {
    const double market = 0.01 * rng.normal();
    for (int a = 0; a < n_assets; ++a) {
      const double r = drift[a] + beta[a] * market + vol[a] * rng.normal();
      p.prices(t, a) = p.prices(t - 1, a) * std::exp(r);
    }
    std::ostringstream label;
    label << 't' << std::setw(4) << std::setfill('0') << t;
    p.time_labels.push_back(label.str());
  }
  return p;
}

}  // namespace qpo
