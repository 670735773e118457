#pragma once

// Random inputs and brute-force reference implementations shared by the unit
// tests and the acceptance runner.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "narrative/ca.hpp"
#include "narrative/clustering.hpp"
#include "narrative/corpus.hpp"

namespace narrative::testing_support {

// Sparse-ish random counts with no empty row or column.
inline ContingencyTable random_table(std::mt19937& rng, int n, int m) {
  std::poisson_distribution<int> pois(1.5);
  CountMatrix c(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) c(i, j) = rng() % 2 ? pois(rng) : 0;
  }
  for (int i = 0; i < n; ++i) {
    if (c.row(i).sum() == 0) c(i, static_cast<int>(rng() % static_cast<unsigned>(m))) = 1;
  }
  for (int j = 0; j < m; ++j) {
    if (c.col(j).sum() == 0) c(static_cast<int>(rng() % static_cast<unsigned>(n)), j) = 1;
  }
  std::vector<std::string> rl, cl;
  for (int i = 0; i < n; ++i) rl.push_back("r" + std::to_string(i));
  for (int j = 0; j < m; ++j) cl.push_back("c" + std::to_string(j));
  return {rl, cl, c};
}

// Pearson chi-squared from observed and expected counts.
inline double chi2_statistic(const ContingencyTable& t) {
  const Eigen::MatrixXd o = t.counts().cast<double>();
  const Eigen::VectorXd rs = o.rowwise().sum();
  const Eigen::RowVectorXd cs = o.colwise().sum();
  const double n = o.sum();
  double x2 = 0;
  for (Eigen::Index i = 0; i < o.rows(); ++i) {
    for (Eigen::Index j = 0; j < o.cols(); ++j) {
      const double e = rs(i) * cs(j) / n;
      x2 += (o(i, j) - e) * (o(i, j) - e) / e;
    }
  }
  return x2;
}

inline PointCloud cloud_of(const Eigen::MatrixXd& x) {
  PointCloud c;
  for (Eigen::Index i = 0; i < x.rows(); ++i) c.labels.push_back("p" + std::to_string(i));
  c.coords = x;
  return c;
}

inline PointCloud random_cloud(std::mt19937& rng, int n, int d, bool with_masses = false) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = g(rng);
  }
  auto c = cloud_of(x);
  if (with_masses) {
    std::uniform_real_distribution<double> u(0.2, 3.0);
    c.masses.resize(n);
    for (int i = 0; i < n; ++i) c.masses(i) = u(rng);
  }
  return c;
}

inline double inertia_of(const PointCloud& c, const std::vector<int>& members) {
  Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(c.coords.cols());
  double m = 0;
  for (int i : members) {
    g += c.mass(i) * c.coords.row(i);
    m += c.mass(i);
  }
  g /= m;
  double s = 0;
  for (int i : members) s += c.mass(i) * (c.coords.row(i) - g).squaredNorm();
  return s;
}

struct BruteCluster {
  std::vector<int> members;
  int node;
};

// Ward by definition: every candidate cost is I(A+B) - I(A) - I(B) from the raw points.
inline Dendrogram brute_ward(const PointCloud& c) {
  const int n = static_cast<int>(c.size());
  std::vector<BruteCluster> cl;
  for (int i = 0; i < n; ++i) cl.push_back({{i}, i});
  Dendrogram d{Criterion::ward, c.labels, {}, {}};
  for (int i = 0; i < n; ++i) d.order.push_back(i);
  for (int t = 0; t < n - 1; ++t) {
    std::sort(cl.begin(), cl.end(), [](const BruteCluster& a, const BruteCluster& b) {
      return *std::min_element(a.members.begin(), a.members.end()) <
             *std::min_element(b.members.begin(), b.members.end());
    });
    std::size_t ba = 0, bb = 0;
    double best = 0;
    bool have = false;
    for (std::size_t a = 0; a < cl.size(); ++a) {
      for (std::size_t b = a + 1; b < cl.size(); ++b) {
        auto u = cl[a].members;
        u.insert(u.end(), cl[b].members.begin(), cl[b].members.end());
        const double cost = inertia_of(c, u) - inertia_of(c, cl[a].members) - inertia_of(c, cl[b].members);
        if (!have || detail::clearly_less(cost, best)) {
          best = cost;
          ba = a;
          bb = b;
          have = true;
        }
      }
    }
    d.merges.push_back({cl[ba].node, cl[bb].node, best,
                        static_cast<int>(cl[ba].members.size() + cl[bb].members.size())});
    cl[ba].members.insert(cl[ba].members.end(), cl[bb].members.begin(), cl[bb].members.end());
    cl[ba].node = n + t;
    cl.erase(cl.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  return d;
}

// Complete link between sequence neighbours, costs recomputed from raw distances.
inline Dendrogram brute_constrained(const PointCloud& c, const std::vector<int>& order) {
  const int n = static_cast<int>(c.size());
  std::vector<BruteCluster> cl;
  for (int p = 0; p < n; ++p) cl.push_back({{order[static_cast<std::size_t>(p)]}, order[static_cast<std::size_t>(p)]});
  Dendrogram d{Criterion::constrained_complete, c.labels, order, {}};
  for (int t = 0; t < n - 1; ++t) {
    std::size_t ba = 0;
    double best = 0;
    for (std::size_t a = 0; a + 1 < cl.size(); ++a) {
      double cost = 0;
      for (int i : cl[a].members) {
        for (int j : cl[a + 1].members) cost = std::max(cost, (c.coords.row(i) - c.coords.row(j)).norm());
      }
      if (a == 0 || detail::clearly_less(cost, best)) {
        best = cost;
        ba = a;
      }
    }
    d.merges.push_back({cl[ba].node, cl[ba + 1].node, best,
                        static_cast<int>(cl[ba].members.size() + cl[ba + 1].members.size())});
    cl[ba].members.insert(cl[ba].members.end(), cl[ba + 1].members.begin(), cl[ba + 1].members.end());
    cl[ba].node = n + t;
    cl.erase(cl.begin() + static_cast<std::ptrdiff_t>(ba) + 1);
  }
  return d;
}

inline bool same_merges(const Dendrogram& a, const Dendrogram& b, double rel_tol = 1e-9) {
  if (a.merges.size() != b.merges.size()) return false;
  for (std::size_t t = 0; t < a.merges.size(); ++t) {
    const auto& x = a.merges[t];
    const auto& y = b.merges[t];
    if (x.left != y.left || x.right != y.right || x.size != y.size) return false;
    if (std::abs(x.height - y.height) > rel_tol * std::max(1.0, std::abs(y.height))) return false;
  }
  return true;
}

}  // namespace narrative::testing_support
