#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "narrative/detail/csv.hpp"
#include "narrative/error.hpp"
#include "narrative/textprep.hpp"

namespace narrative {

struct PointCloud {
  std::vector<std::string> labels;
  Eigen::MatrixXd coords;  // n x d
  Eigen::VectorXd masses;  // empty means all ones

  Eigen::Index size() const { return coords.rows(); }

  double mass(Eigen::Index i) const { return masses.size() ? masses(i) : 1.0; }

  void validate() const {
    if (coords.rows() != static_cast<Eigen::Index>(labels.size())) {
      throw ValidationError("point cloud: label count does not match coordinate rows");
    }
    if (coords.cols() < 1) throw ValidationError("point cloud needs at least one dimension");
    if (masses.size() && masses.size() != coords.rows()) {
      throw ValidationError("point cloud: mass count does not match coordinate rows");
    }
    if (masses.size() && (masses.array() <= 0).any()) {
      throw ValidationError("point cloud masses must be positive");
    }
    if (!coords.allFinite()) throw ValidationError("point cloud has non-finite coordinates");
  }
};

enum class Criterion { ward, constrained_complete };

inline std::string_view criterion_name(Criterion c) {
  return c == Criterion::ward ? "ward" : "constrained_complete";
}

// Node ids: leaves are 0..n-1, the node created by merge t is n+t.
struct Merge {
  int left = 0;
  int right = 0;
  double height = 0.0;
  int size = 0;

  bool operator==(const Merge&) const = default;
};

struct Dendrogram {
  Criterion criterion = Criterion::ward;
  std::vector<std::string> labels;
  std::vector<int> order;  // chronological leaf sequence
  std::vector<Merge> merges;

  int leaf_count() const { return static_cast<int>(labels.size()); }

  bool operator==(const Dendrogram&) const = default;
};

struct Partition {
  int k = 0;
  std::vector<std::string> labels;
  std::vector<int> cluster;  // aligned with labels, values 1..k

  int cluster_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return cluster[i];
    }
    throw ValidationError("label '" + std::string(label) + "' not in partition");
  }

  std::vector<int> sizes() const {
    std::vector<int> s(static_cast<std::size_t>(k), 0);
    for (int c : cluster) ++s[static_cast<std::size_t>(c - 1)];
    return s;
  }

  bool operator==(const Partition&) const = default;
};

namespace detail {

// Near-equal costs are resolved by position so that rounding noise in the
// update formulas does not decide merge order.
inline bool clearly_less(double a, double b) { return a < b - 1e-12 * std::max(std::abs(b), 1e-300); }

inline std::vector<int> identity_order(int n) {
  std::vector<int> o(static_cast<std::size_t>(n));
  std::iota(o.begin(), o.end(), 0);
  return o;
}

}  // namespace detail

// Minimum-variance agglomeration. Height of a merge is the inertia increase
// m_A m_B / (m_A + m_B) * |g_A - g_B|^2.
inline Dendrogram ward_cluster(const PointCloud& cloud) {
  cloud.validate();
  const Eigen::Index n = cloud.size();
  if (n < 2) throw ValidationError("Ward clustering needs at least 2 points");
  const auto un = static_cast<std::size_t>(n);

  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double mi = cloud.mass(i), mj = cloud.mass(j);
      d(i, j) = d(j, i) = mi * mj / (mi + mj) * (cloud.coords.row(i) - cloud.coords.row(j)).squaredNorm();
    }
  }
  // Slot a holds the cluster whose smallest leaf is a; slot order is position order.
  std::vector<double> mass(un);
  std::vector<int> node(un), size(un, 1);
  std::vector<bool> active(un, true);
  for (std::size_t i = 0; i < un; ++i) {
    mass[i] = cloud.mass(static_cast<Eigen::Index>(i));
    node[i] = static_cast<int>(i);
  }

  Dendrogram out{Criterion::ward, cloud.labels, detail::identity_order(static_cast<int>(n)), {}};
  for (Eigen::Index step = 0; step + 1 < n; ++step) {
    Eigen::Index ba = -1, bb = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < n; ++a) {
      if (!active[static_cast<std::size_t>(a)]) continue;
      for (Eigen::Index b = a + 1; b < n; ++b) {
        if (!active[static_cast<std::size_t>(b)]) continue;
        if (ba < 0 || detail::clearly_less(d(a, b), best)) {
          best = d(a, b);
          ba = a;
          bb = b;
        }
      }
    }
    const auto sa = static_cast<std::size_t>(ba), sb = static_cast<std::size_t>(bb);
    const double ma = mass[sa], mb = mass[sb];
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto sk = static_cast<std::size_t>(k);
      if (!active[sk] || k == ba || k == bb) continue;
      const double mk = mass[sk];
      const double v = ((ma + mk) * d(k, ba) + (mb + mk) * d(k, bb) - mk * best) / (ma + mb + mk);
      d(k, ba) = d(ba, k) = v;
    }
    out.merges.push_back({node[sa], node[sb], best, size[sa] + size[sb]});
    mass[sa] = ma + mb;
    size[sa] += size[sb];
    node[sa] = static_cast<int>(n + step);
    active[sb] = false;
  }
  return out;
}

// Complete link restricted to clusters that are neighbours in `order`.
// `order[p]` is the leaf at chronological position p.
inline Dendrogram constrained_complete_link(const PointCloud& cloud, std::vector<int> order) {
  cloud.validate();
  const Eigen::Index n = cloud.size();
  if (n < 2) throw ValidationError("clustering needs at least 2 points");
  if (static_cast<Eigen::Index>(order.size()) != n) {
    throw ValidationError("order is not a permutation of the points");
  }
  {
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int x : order) {
      if (x < 0 || x >= n || seen[static_cast<std::size_t>(x)]) {
        throw ValidationError("order is not a permutation of the points");
      }
      seen[static_cast<std::size_t>(x)] = true;
    }
  }
  const auto un = static_cast<std::size_t>(n);
  // Work in position space: slot p holds the cluster starting at position p.
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    d(p, p) = 0;
    for (Eigen::Index q = p + 1; q < n; ++q) {
      d(p, q) = d(q, p) = (cloud.coords.row(order[static_cast<std::size_t>(p)]) -
                           cloud.coords.row(order[static_cast<std::size_t>(q)])).norm();
    }
  }
  std::vector<int> next(un), node(un), size(un, 1);
  for (std::size_t p = 0; p < un; ++p) {
    next[p] = static_cast<int>(p) + 1;
    node[p] = order[p];
  }
  std::vector<bool> active(un, true);

  Dendrogram out{Criterion::constrained_complete, cloud.labels, order, {}};
  for (Eigen::Index step = 0; step + 1 < n; ++step) {
    int ba = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; a = next[static_cast<std::size_t>(a)]) {
      const int b = next[static_cast<std::size_t>(a)];
      if (b >= n) break;
      if (ba < 0 || detail::clearly_less(d(a, b), best)) {
        best = d(a, b);
        ba = a;
      }
    }
    const auto sa = static_cast<std::size_t>(ba);
    const int bb = next[sa];
    const auto sb = static_cast<std::size_t>(bb);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == ba || k == bb) continue;
      d(k, ba) = d(ba, k) = std::max(d(k, ba), d(k, bb));
    }
    out.merges.push_back({node[sa], node[sb], best, size[sa] + size[sb]});
    size[sa] += size[sb];
    node[sa] = static_cast<int>(n + step);
    next[sa] = next[sb];
    active[sb] = false;
  }
  return out;
}

// Replays the first n-k merges. Clusters are numbered by the chronological
// position of their earliest member.
inline Partition cut_k(const Dendrogram& dendrogram, int k) {
  const int n = dendrogram.leaf_count();
  if (k < 1 || k > n) {
    throw ValidationError("cut k=" + std::to_string(k) + " outside 1.." + std::to_string(n));
  }
  std::vector<int> parent(static_cast<std::size_t>(2 * n - 1));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (int t = 0; t < n - k; ++t) {
    const auto& m = dendrogram.merges[static_cast<std::size_t>(t)];
    parent[static_cast<std::size_t>(find(m.left))] = n + t;
    parent[static_cast<std::size_t>(find(m.right))] = n + t;
  }
  Partition p{k, dendrogram.labels, std::vector<int>(static_cast<std::size_t>(n), 0)};
  std::vector<int> id_of_root(static_cast<std::size_t>(2 * n - 1), 0);
  int next_id = 0;
  for (int leaf : dendrogram.order) {
    int& id = id_of_root[static_cast<std::size_t>(find(leaf))];
    if (id == 0) id = ++next_id;
    p.cluster[static_cast<std::size_t>(leaf)] = id;
  }
  return p;
}

struct GapCut {
  Partition partition;
  bool degenerate = false;
};

// Picks k in 2..n-1 at the largest jump between successive merge heights;
// ties go to the smaller k.
inline GapCut cut_max_gap(const Dendrogram& dendrogram) {
  const int n = dendrogram.leaf_count();
  if (n < 3) throw ValidationError("max-gap cut needs at least 3 leaves");
  const auto& m = dendrogram.merges;
  int best_k = 2;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (int k = 2; k <= n - 1; ++k) {
    // heights are 1-based in the usual statement: h_{n-k+1} - h_{n-k}
    const double gap = m[static_cast<std::size_t>(n - k)].height - m[static_cast<std::size_t>(n - k - 1)].height;
    if (gap > best_gap) {
      best_gap = gap;
      best_k = k;
    }
  }
  if (!(best_gap > 0)) return {cut_k(dendrogram, 2), true};
  return {cut_k(dendrogram, best_k), false};
}

// Left-to-right leaf sequence of the tree drawing (left child first).
inline std::vector<int> seriation_order(const Dendrogram& dendrogram) {
  const int n = dendrogram.leaf_count();
  if (n == 1) return {0};
  std::vector<int> out;
  std::vector<int> stack{2 * n - 2};
  while (!stack.empty()) {
    const int x = stack.back();
    stack.pop_back();
    if (x < n) {
      out.push_back(x);
      continue;
    }
    const auto& m = dendrogram.merges[static_cast<std::size_t>(x - n)];
    stack.push_back(m.right);
    stack.push_back(m.left);
  }
  return out;
}

inline std::vector<int> display_order(const Dendrogram& dendrogram) {
  return dendrogram.criterion == Criterion::constrained_complete ? dendrogram.order
                                                                 : seriation_order(dendrogram);
}

inline std::string export_dendrogram(const Dendrogram& d) {
  std::string out;
  out += fmt::format("criterion {}\n", criterion_name(d.criterion));
  out += fmt::format("leaves {}\n", d.leaf_count());
  for (int i = 0; i < d.leaf_count(); ++i) {
    out += fmt::format("leaf {} {}\n", i, d.labels[static_cast<std::size_t>(i)]);
  }
  out += "order";
  for (int x : d.order) out += fmt::format(" {}", x);
  out += "\n";
  for (const auto& m : d.merges) {
    out += fmt::format("merge {} {} {:.17g} {}\n", m.left, m.right, m.height, m.size);
  }
  return out;
}

inline Dendrogram import_dendrogram(std::string_view text) {
  Dendrogram d;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = -1;
  bool have_criterion = false, have_order = false;
  auto bad = [](const std::string& why) -> ValidationError {
    return ValidationError("dendrogram: " + why);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "criterion") {
      if (rest == "ward") d.criterion = Criterion::ward;
      else if (rest == "constrained_complete") d.criterion = Criterion::constrained_complete;
      else throw bad("unknown criterion '" + rest + "'");
      have_criterion = true;
    } else if (key == "leaves") {
      n = detail::parse_int_field(rest, "leaves");
      if (n < 1) throw bad("leaf count must be positive");
    } else if (key == "leaf") {
      const auto sp2 = rest.find(' ');
      const int i = detail::parse_int_field(rest.substr(0, sp2), "leaf index");
      if (i != static_cast<int>(d.labels.size())) throw bad("leaves out of order");
      d.labels.push_back(sp2 == std::string::npos ? "" : rest.substr(sp2 + 1));
    } else if (key == "order") {
      std::istringstream ss(rest);
      int x;
      while (ss >> x) d.order.push_back(x);
      have_order = true;
    } else if (key == "merge") {
      std::istringstream ss(rest);
      Merge m;
      if (!(ss >> m.left >> m.right >> m.height >> m.size)) throw bad("malformed merge line");
      d.merges.push_back(m);
    } else {
      throw bad("unknown line '" + key + "'");
    }
  }
  if (!have_criterion || n < 0 || !have_order) throw bad("missing header lines");
  if (static_cast<int>(d.labels.size()) != n) throw bad("leaf count mismatch");
  if (static_cast<int>(d.merges.size()) != n - 1) throw bad("expected n-1 merges");
  {
    auto sorted = d.order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != detail::identity_order(n)) throw bad("order is not a permutation");
  }
  std::vector<int> size(static_cast<std::size_t>(2 * n - 1), 1);
  std::vector<bool> used(static_cast<std::size_t>(2 * n - 1), false);
  for (int t = 0; t < n - 1; ++t) {
    const auto& m = d.merges[static_cast<std::size_t>(t)];
    for (int c : {m.left, m.right}) {
      if (c < 0 || c >= n + t || used[static_cast<std::size_t>(c)]) throw bad("invalid child node");
      used[static_cast<std::size_t>(c)] = true;
    }
    if (m.left == m.right) throw bad("node merged with itself");
    size[static_cast<std::size_t>(n + t)] = size[static_cast<std::size_t>(m.left)] + size[static_cast<std::size_t>(m.right)];
    if (m.size != size[static_cast<std::size_t>(n + t)]) throw bad("merge size mismatch");
  }
  return d;
}

inline std::string export_partition_csv(const Partition& p) {
  std::string out = "label,cluster\n";
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    detail::append_csv_row(out, {p.labels[i], std::to_string(p.cluster[i])});
  }
  return out;
}

}  // namespace narrative
