#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "narrative/corpus.hpp"
#include "narrative/detail/csv.hpp"
#include "narrative/error.hpp"

namespace narrative {

enum class Side { row, col };

// Axes are 0-based here; user-facing output numbers them from 1.
struct CAModel {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Eigen::VectorXd row_masses;
  Eigen::VectorXd col_masses;
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd row_coords;   // n x K principal coordinates
  Eigen::MatrixXd col_coords;   // m x K
  Eigen::MatrixXd row_contrib;  // each column sums to 1
  Eigen::MatrixXd col_contrib;
  double total_inertia = 0.0;

  Eigen::Index axes() const { return singular_values.size(); }
  double eigenvalue(Eigen::Index k) const { return singular_values(k) * singular_values(k); }

  const Eigen::MatrixXd& coords(Side s) const { return s == Side::row ? row_coords : col_coords; }
  const Eigen::MatrixXd& contrib(Side s) const { return s == Side::row ? row_contrib : col_contrib; }
  const std::vector<std::string>& labels(Side s) const {
    return s == Side::row ? row_labels : col_labels;
  }
};

// Singular values below either bound are treated as zero.
inline constexpr double kRelativeSigmaTol = 1e-12;
inline constexpr double kAbsoluteSigmaTol = 1e-12;

inline double chi2_row_distance(const ContingencyTable& table, Eigen::Index i, Eigen::Index i2) {
  if (i < 0 || i2 < 0 || i >= table.rows() || i2 >= table.rows()) {
    throw ValidationError("row index out of range");
  }
  const Eigen::MatrixXd p = table.counts().cast<double>() / static_cast<double>(table.total());
  const double ri = p.row(i).sum();
  const double ri2 = p.row(i2).sum();
  if (ri <= 0 || ri2 <= 0) throw DomainError("chi-squared distance of a zero-sum row");
  const Eigen::VectorXd c = p.colwise().sum();
  double d2 = 0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    if (c(j) <= 0) continue;
    const double diff = p(i, j) / ri - p(i2, j) / ri2;
    d2 += diff * diff / c(j);
  }
  return std::sqrt(d2);
}

inline CAModel fit_ca(const ContingencyTable& table) {
  const Eigen::Index n = table.rows();
  const Eigen::Index m = table.cols();
  if (n < 2 || m < 2) throw ValidationError("correspondence analysis needs at least a 2x2 table");
  const auto& counts = table.counts();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (counts.row(i).sum() == 0) {
      throw ValidationError("zero row '" + table.row_labels()[static_cast<std::size_t>(i)] + "'");
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    if (counts.col(j).sum() == 0) {
      throw ValidationError("zero column '" + table.col_labels()[static_cast<std::size_t>(j)] + "'");
    }
  }

  CAModel model;
  model.row_labels = table.row_labels();
  model.col_labels = table.col_labels();
  const Eigen::MatrixXd p = counts.cast<double>() / static_cast<double>(table.total());
  model.row_masses = p.rowwise().sum();
  model.col_masses = p.colwise().sum().transpose();
  const Eigen::ArrayXd sr = model.row_masses.array().sqrt();
  const Eigen::ArrayXd sc = model.col_masses.array().sqrt();

  Eigen::MatrixXd s = p - model.row_masses * model.col_masses.transpose();
  s.array().colwise() /= sr;
  s.array().rowwise() /= sc.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD did not converge");
  const Eigen::VectorXd& sigma = svd.singularValues();

  Eigen::Index k_keep = 0;
  const Eigen::Index k_max = std::min(n - 1, m - 1);
  const double tol = std::max(kRelativeSigmaTol * (sigma.size() ? sigma(0) : 0.0), kAbsoluteSigmaTol);
  while (k_keep < std::min<Eigen::Index>(k_max, sigma.size()) && sigma(k_keep) > tol) ++k_keep;

  Eigen::MatrixXd u = svd.matrixU().leftCols(k_keep);
  Eigen::MatrixXd v = svd.matrixV().leftCols(k_keep);
  model.singular_values = sigma.head(k_keep);

  model.col_coords = (v.array().colwise() / sc).matrix() * model.singular_values.asDiagonal();
  // Largest |G| on each axis is made positive; near-equal magnitudes go to the earliest column.
  for (Eigen::Index k = 0; k < k_keep; ++k) {
    const double mx = model.col_coords.col(k).cwiseAbs().maxCoeff();
    Eigen::Index pick = 0;
    while (std::abs(model.col_coords(pick, k)) < mx * (1 - 1e-9)) ++pick;
    if (model.col_coords(pick, k) < 0) {
      u.col(k) *= -1;
      v.col(k) *= -1;
      model.col_coords.col(k) *= -1;
    }
  }
  model.row_coords = (u.array().colwise() / sr).matrix() * model.singular_values.asDiagonal();

  model.row_contrib.resize(n, k_keep);
  model.col_contrib.resize(m, k_keep);
  for (Eigen::Index k = 0; k < k_keep; ++k) {
    const double ev = model.eigenvalue(k);
    model.row_contrib.col(k) =
        (model.row_masses.array() * model.row_coords.col(k).array().square()) / ev;
    model.col_contrib.col(k) =
        (model.col_masses.array() * model.col_coords.col(k).array().square()) / ev;
  }
  model.total_inertia = model.singular_values.squaredNorm();
  return model;
}

inline std::vector<double> percent_inertia(const CAModel& model) {
  std::vector<double> out;
  for (Eigen::Index k = 0; k < model.axes(); ++k) {
    out.push_back(100.0 * model.eigenvalue(k) / model.total_inertia);
  }
  return out;
}

inline std::vector<double> cumulative_inertia(const CAModel& model) {
  std::vector<double> out;
  double acc = 0;
  for (Eigen::Index k = 0; k < model.axes(); ++k) {
    acc += model.eigenvalue(k);
    out.push_back(100.0 * acc / model.total_inertia);
  }
  if (!out.empty()) out.back() = 100.0;
  return out;
}

struct Contributor {
  std::string label;
  double contribution = 0.0;

  bool operator==(const Contributor&) const = default;
};

inline void check_axes(const CAModel& model, const std::vector<int>& axes) {
  if (axes.empty()) throw ValidationError("no axes selected");
  for (int a : axes) {
    if (a < 0 || a >= model.axes()) {
      throw ValidationError("axis " + std::to_string(a + 1) + " does not exist (model has " +
                            std::to_string(model.axes()) + ")");
    }
  }
}

// Labels ranked by contribution summed over `axes`, descending; ties by label.
inline std::vector<Contributor> top_contributors(const CAModel& model, const std::vector<int>& axes,
                                                 std::size_t k, Side side) {
  check_axes(model, axes);
  const auto& labels = model.labels(side);
  if (k > labels.size()) {
    throw ValidationError("asked for " + std::to_string(k) + " contributors but only " +
                          std::to_string(labels.size()) + " labels exist");
  }
  const auto& ctr = model.contrib(side);
  std::vector<Contributor> all;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double s = 0;
    for (int a : axes) s += ctr(static_cast<Eigen::Index>(i), a);
    all.push_back({labels[i], s});
  }
  // compare at 1e-12 resolution so rounding noise does not override the label tie-break
  auto key = [](double c) { return std::llround(c * 1e12); };
  std::sort(all.begin(), all.end(), [&](const Contributor& a, const Contributor& b) {
    if (key(a.contribution) != key(b.contribution)) return key(a.contribution) > key(b.contribution);
    return a.label < b.label;
  });
  all.resize(k);
  return all;
}

// Transition formula. For Side::row the profile is a row of counts over the
// model's columns.
inline Eigen::VectorXd project_supplementary(const CAModel& model, const Eigen::VectorXd& profile,
                                             Side side) {
  const Eigen::MatrixXd& other = side == Side::row ? model.col_coords : model.row_coords;
  if (profile.size() != other.rows()) {
    throw ValidationError("supplementary profile has length " + std::to_string(profile.size()) +
                          ", expected " + std::to_string(other.rows()));
  }
  if ((profile.array() < 0).any()) throw ValidationError("supplementary profile has negative entries");
  const double sum = profile.sum();
  if (!(sum > 0)) throw DomainError("supplementary profile sums to zero");
  Eigen::VectorXd f = other.transpose() * (profile / sum);
  return f.cwiseQuotient(model.singular_values);
}

namespace detail {
inline std::string num(double x) { return fmt::format("{:.17g}", x); }
}  // namespace detail

inline std::string export_inertia_csv(const CAModel& model) {
  std::string out = "axis,sigma,sigma2,percent,cumulative_percent\n";
  const auto pct = percent_inertia(model);
  const auto cum = cumulative_inertia(model);
  for (Eigen::Index k = 0; k < model.axes(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    out += fmt::format("{},{},{},{},{}\n", k + 1, detail::num(model.singular_values(k)),
                       detail::num(model.eigenvalue(k)), detail::num(pct[kk]), detail::num(cum[kk]));
  }
  return out;
}

// `label,mass,F1..FK` for coordinates, `label,ctr1..ctrK` for contributions.
inline std::string export_coords_csv(const CAModel& model, Side side) {
  const auto& labels = model.labels(side);
  const auto& masses = side == Side::row ? model.row_masses : model.col_masses;
  const auto& x = model.coords(side);
  detail::CsvRow header{"label", "mass"};
  for (Eigen::Index k = 0; k < model.axes(); ++k) header.push_back(fmt::format("F{}", k + 1));
  std::string out;
  detail::append_csv_row(out, header);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    detail::CsvRow row{labels[i], detail::num(masses(ii))};
    for (Eigen::Index k = 0; k < model.axes(); ++k) row.push_back(detail::num(x(ii, k)));
    detail::append_csv_row(out, row);
  }
  return out;
}

inline std::string export_contrib_csv(const CAModel& model, Side side) {
  const auto& labels = model.labels(side);
  const auto& c = model.contrib(side);
  detail::CsvRow header{"label"};
  for (Eigen::Index k = 0; k < model.axes(); ++k) header.push_back(fmt::format("ctr{}", k + 1));
  std::string out;
  detail::append_csv_row(out, header);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    detail::CsvRow row{labels[i]};
    for (Eigen::Index k = 0; k < model.axes(); ++k) {
      row.push_back(detail::num(c(static_cast<Eigen::Index>(i), k)));
    }
    detail::append_csv_row(out, row);
  }
  return out;
}

}  // namespace narrative
