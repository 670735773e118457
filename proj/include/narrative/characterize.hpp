#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "narrative/clustering.hpp"
#include "narrative/corpus.hpp"
#include "narrative/detail/csv.hpp"
#include "narrative/error.hpp"

namespace narrative {

struct VTest {
  double v = 0.0;
  double p = 1.0;
};

// Two-sided standard normal tail, erfc keeps full relative precision far out.
inline double normal_two_sided_p(double v) { return std::erfc(std::abs(v) / std::sqrt(2.0)); }

// `cluster_of[i]` gives the cluster of document i; population variance.
inline VTest v_test(const Eigen::VectorXd& values, const std::vector<int>& cluster_of, int cluster_id) {
  const auto n_total = values.size();
  if (static_cast<std::size_t>(n_total) != cluster_of.size()) {
    throw ValidationError("v-test: value vector and partition differ in length");
  }
  double sum_q = 0;
  Eigen::Index n_q = 0;
  for (Eigen::Index i = 0; i < n_total; ++i) {
    if (cluster_of[static_cast<std::size_t>(i)] == cluster_id) {
      sum_q += values(i);
      ++n_q;
    }
  }
  if (n_q == 0) throw ValidationError("v-test: cluster " + std::to_string(cluster_id) + " is empty");
  const double mean = values.mean();
  const double s2 = (values.array() - mean).square().mean();
  if (n_q == n_total || s2 == 0.0) return {0.0, 1.0};
  const double nq = static_cast<double>(n_q), nt = static_cast<double>(n_total);
  const double v = (sum_q / nq - mean) / std::sqrt((nt - nq) / (nt - 1.0) * s2 / nq);
  return {v, normal_two_sided_p(v)};
}

inline VTest v_test(const Eigen::VectorXd& values, const Partition& partition, int cluster_id) {
  if (static_cast<std::size_t>(values.size()) != partition.labels.size()) {
    throw ValidationError("v-test: value vector and partition differ in length");
  }
  return v_test(values, partition.cluster, cluster_id);
}

struct VTestEntry {
  int cluster = 0;
  std::string word;
  double v = 0.0;
  double p = 1.0;
  double cluster_mean = 0.0;
  double global_mean = 0.0;
};

struct VTestReport {
  std::vector<VTestEntry> entries;
  double alpha = 0.05;
  bool normalized = false;

  const VTestEntry* find(int cluster, std::string_view word) const {
    for (const auto& e : entries) {
      if (e.cluster == cluster && e.word == word) return &e;
    }
    return nullptr;
  }
};

struct CharacterizeOptions {
  bool full_report = false;  // keep entries with p >= alpha too
  bool normalize = false;    // per-document relative frequencies instead of raw counts
};

// Every (cluster, word) pair is tested. No multiple-testing correction.
inline VTestReport characterize_clusters(const ContingencyTable& table, const Partition& partition,
                                         double alpha, CharacterizeOptions opts = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError(fmt::format("alpha must lie in (0, 1), got {}", alpha));
  }
  std::unordered_map<std::string_view, int> cluster_by_label;
  for (std::size_t i = 0; i < partition.labels.size(); ++i) {
    cluster_by_label.emplace(partition.labels[i], partition.cluster[i]);
  }
  std::vector<int> cluster_of;
  for (const auto& id : table.row_labels()) {
    auto it = cluster_by_label.find(id);
    if (it == cluster_by_label.end()) {
      throw ValidationError("document '" + id + "' has no cluster in the partition");
    }
    cluster_of.push_back(it->second);
  }
  Eigen::MatrixXd x = table.counts().cast<double>();
  if (opts.normalize) {
    const Eigen::VectorXd rs = x.rowwise().sum();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (rs(i) > 0) x.row(i) /= rs(i);
    }
  }
  VTestReport report{{}, alpha, opts.normalize};
  for (int q = 1; q <= partition.k; ++q) {
    const bool present = std::find(cluster_of.begin(), cluster_of.end(), q) != cluster_of.end();
    if (!present) continue;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Eigen::VectorXd col = x.col(j);
      const VTest t = v_test(col, cluster_of, q);
      if (!opts.full_report && !(t.p < alpha)) continue;
      double sq = 0;
      int nq = 0;
      for (Eigen::Index i = 0; i < col.size(); ++i) {
        if (cluster_of[static_cast<std::size_t>(i)] == q) {
          sq += col(i);
          ++nq;
        }
      }
      report.entries.push_back({q, table.col_labels()[static_cast<std::size_t>(j)], t.v, t.p,
                                sq / nq, col.mean()});
    }
  }
  std::sort(report.entries.begin(), report.entries.end(), [](const VTestEntry& a, const VTestEntry& b) {
    if (a.cluster != b.cluster) return a.cluster < b.cluster;
    if (a.p != b.p) return a.p < b.p;
    return a.word < b.word;
  });
  return report;
}

inline std::string export_vtest_csv(const VTestReport& report) {
  std::string out = "cluster,word,v,p,cluster_mean,global_mean\n";
  for (const auto& e : report.entries) {
    detail::append_csv_row(out, {std::to_string(e.cluster), e.word, fmt::format("{:.6f}", e.v),
                                 fmt::format("{:.6e}", e.p), fmt::format("{:.6g}", e.cluster_mean),
                                 fmt::format("{:.6g}", e.global_mean)});
  }
  return out;
}

}  // namespace narrative
