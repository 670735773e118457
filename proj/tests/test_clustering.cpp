#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "narrative/clustering.hpp"
#include "support.hpp"

using namespace narrative;
using namespace narrative::testing_support;

namespace {

void expect_same_tree(const Dendrogram& got, const Dendrogram& want) {
  ASSERT_EQ(got.merges.size(), want.merges.size());
  for (std::size_t t = 0; t < got.merges.size(); ++t) {
    EXPECT_EQ(got.merges[t].left, want.merges[t].left) << "merge " << t;
    EXPECT_EQ(got.merges[t].right, want.merges[t].right) << "merge " << t;
    EXPECT_EQ(got.merges[t].size, want.merges[t].size) << "merge " << t;
    EXPECT_NEAR(got.merges[t].height, want.merges[t].height, 1e-9 * std::max(1.0, want.merges[t].height));
  }
}

Dendrogram manual(const std::vector<double>& heights) {
  // caterpillar tree over n = heights.size() + 1 leaves
  const int n = static_cast<int>(heights.size()) + 1;
  Dendrogram d{Criterion::ward, {}, {}, {}};
  for (int i = 0; i < n; ++i) {
    d.labels.push_back("x" + std::to_string(i));
    d.order.push_back(i);
  }
  int prev = 0;
  for (int t = 0; t < n - 1; ++t) {
    d.merges.push_back({prev, t + 1, heights[static_cast<std::size_t>(t)], t + 2});
    prev = n + t;
  }
  return d;
}

}  // namespace

TEST(Ward, TwoPoints) {
  Eigen::MatrixXd x(2, 2);
  x << 0, 0, 2, 0;
  auto d = ward_cluster(cloud_of(x));
  ASSERT_EQ(d.merges.size(), 1u);
  EXPECT_DOUBLE_EQ(d.merges[0].height, 2.0);
  EXPECT_EQ(d.merges[0].size, 2);
}

TEST(Ward, TightPairsMergeFirst) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 100, 0.1, 100.2;
  auto d = ward_cluster(cloud_of(x));
  EXPECT_EQ(d.merges[0].left, 0);
  EXPECT_EQ(d.merges[0].right, 2);
  EXPECT_EQ(d.merges[1].left, 1);
  EXPECT_EQ(d.merges[1].right, 3);
  EXPECT_EQ(d.merges[2].size, 4);
}

TEST(Ward, Errors) {
  EXPECT_THROW(ward_cluster(cloud_of(Eigen::MatrixXd::Zero(1, 2))), ValidationError);
  auto c = cloud_of(Eigen::MatrixXd::Zero(3, 2));
  c.masses = Eigen::Vector3d(1, 0, 1);
  EXPECT_THROW(ward_cluster(c), ValidationError);
  c.masses.resize(0);
  c.labels.pop_back();
  EXPECT_THROW(ward_cluster(c), ValidationError);
}

TEST(WardProperty, TotalHeightEqualsCloudInertia) {
  std::mt19937 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const bool weighted = rep % 2;
    auto c = random_cloud(rng, 2 + static_cast<int>(rng() % 80), 1 + static_cast<int>(rng() % 6), weighted);
    auto d = ward_cluster(c);
    double sum = 0;
    for (const auto& m : d.merges) sum += m.height;
    std::vector<int> all(static_cast<std::size_t>(c.size()));
    std::iota(all.begin(), all.end(), 0);
    const double want = inertia_of(c, all);
    EXPECT_NEAR(sum, want, 1e-9 * want);
  }
}

TEST(WardProperty, MatchesBruteForce) {
  std::mt19937 rng(6);
  for (int rep = 0; rep < 200; ++rep) {
    auto c = random_cloud(rng, 2 + static_cast<int>(rng() % 11), 1 + static_cast<int>(rng() % 4), rep % 3 == 0);
    SCOPED_TRACE(rep);
    expect_same_tree(ward_cluster(c), brute_ward(c));
  }
}

TEST(WardProperty, TiesResolvedByPosition) {
  // equally spaced points: every adjacent pair ties at the first step
  Eigen::MatrixXd x(5, 1);
  x << 0, 1, 2, 3, 4;
  auto c = cloud_of(x);
  expect_same_tree(ward_cluster(c), brute_ward(c));
  EXPECT_EQ(ward_cluster(c).merges[0].left, 0);
  EXPECT_EQ(ward_cluster(c).merges[0].right, 1);
}

TEST(Constrained, CollinearEquallySpaced) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  auto d = constrained_complete_link(cloud_of(x), {0, 1, 2, 3});
  EXPECT_EQ(d.merges[0], (Merge{0, 1, 1.0, 2}));
  EXPECT_EQ(d.merges[1], (Merge{2, 3, 1.0, 2}));
  EXPECT_EQ(d.merges[2], (Merge{4, 5, 3.0, 4}));
}

TEST(Constrained, OnlyNeighboursMerge) {
  // 0 and 2 coincide but 1 sits between them in time
  Eigen::MatrixXd x(3, 1);
  x << 0, 10, 0;
  auto d = constrained_complete_link(cloud_of(x), {0, 1, 2});
  EXPECT_EQ(d.merges[0].left, 0);
  EXPECT_EQ(d.merges[0].right, 1);
}

TEST(Constrained, OrderMustBePermutation) {
  auto c = cloud_of(Eigen::MatrixXd::Zero(3, 1));
  EXPECT_THROW(constrained_complete_link(c, {0, 1}), ValidationError);
  EXPECT_THROW(constrained_complete_link(c, {0, 1, 1}), ValidationError);
  EXPECT_THROW(constrained_complete_link(c, {0, 1, 3}), ValidationError);
}

TEST(ConstrainedProperty, MatchesBruteForce) {
  std::mt19937 rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    auto c = random_cloud(rng, 2 + static_cast<int>(rng() % 11), 1 + static_cast<int>(rng() % 4));
    std::vector<int> order(static_cast<std::size_t>(c.size()));
    std::iota(order.begin(), order.end(), 0);
    if (rep % 2) std::shuffle(order.begin(), order.end(), rng);
    SCOPED_TRACE(rep);
    expect_same_tree(constrained_complete_link(c, order), brute_constrained(c, order));
  }
}

TEST(ConstrainedProperty, CutsAreIntervals) {
  std::mt19937 rng(9);
  for (int rep = 0; rep < 40; ++rep) {
    auto c = random_cloud(rng, 3 + static_cast<int>(rng() % 40), 3);
    std::vector<int> order(static_cast<std::size_t>(c.size()));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    auto d = constrained_complete_link(c, order);
    for (int k = 1; k <= d.leaf_count(); ++k) {
      auto p = cut_k(d, k);
      // along the sequence the cluster id can only step up by one
      int prev = 0;
      for (int leaf : order) {
        const int id = p.cluster[static_cast<std::size_t>(leaf)];
        EXPECT_TRUE(id == prev || id == prev + 1) << "k=" << k;
        prev = id;
      }
      EXPECT_EQ(prev, k);
    }
  }
}

TEST(Monotone, NoInversions) {
  std::mt19937 rng(10);
  for (int rep = 0; rep < 60; ++rep) {
    auto c = random_cloud(rng, 2 + static_cast<int>(rng() % 70), 1 + static_cast<int>(rng() % 5), rep % 2);
    for (const auto& d : {ward_cluster(c), constrained_complete_link(c, detail::identity_order(static_cast<int>(c.size())))}) {
      for (std::size_t t = 1; t < d.merges.size(); ++t) {
        EXPECT_GE(d.merges[t].height, d.merges[t - 1].height * (1 - 1e-12));
      }
    }
  }
}

TEST(Cut, Extremes) {
  std::mt19937 rng(12);
  auto d = ward_cluster(random_cloud(rng, 7, 2));
  auto all = cut_k(d, 7);
  EXPECT_EQ(all.cluster, (std::vector<int>{1, 2, 3, 4, 5, 6, 7}));
  auto one = cut_k(d, 1);
  EXPECT_EQ(one.cluster, std::vector<int>(7, 1));
  EXPECT_THROW(cut_k(d, 0), ValidationError);
  EXPECT_THROW(cut_k(d, 8), ValidationError);
}

TEST(Cut, NumberedByEarliestMember) {
  Eigen::MatrixXd x(4, 1);
  x << 10, 0, 10.1, 0.1;
  auto p = cut_k(ward_cluster(cloud_of(x)), 2);
  EXPECT_EQ(p.cluster, (std::vector<int>{1, 2, 1, 2}));
  EXPECT_EQ(p.sizes(), (std::vector<int>{2, 2}));
  EXPECT_EQ(p.cluster_of("p3"), 2);
}

TEST(MaxGap, LargestJump) {
  auto g = cut_max_gap(manual({1.0, 1.1, 9.0}));
  EXPECT_EQ(g.partition.k, 2);
  EXPECT_FALSE(g.degenerate);
  EXPECT_EQ(cut_max_gap(manual({1.0, 5.0, 5.5, 6.0})).partition.k, 4);
}

TEST(MaxGap, TiesTakeSmallerK) {
  EXPECT_EQ(cut_max_gap(manual({1.0, 2.0, 3.0, 4.0})).partition.k, 2);
}

TEST(MaxGap, Degenerate) {
  auto g = cut_max_gap(manual({2.0, 2.0, 2.0}));
  EXPECT_TRUE(g.degenerate);
  EXPECT_EQ(g.partition.k, 2);
  EXPECT_THROW(cut_max_gap(manual({1.0})), ValidationError);
}

TEST(DendrogramText, RoundTrip) {
  std::mt19937 rng(13);
  auto c = random_cloud(rng, 9, 3);
  c.labels[2] = "two words";
  for (const auto& d : {ward_cluster(c), constrained_complete_link(c, {8, 7, 6, 5, 4, 3, 2, 1, 0})}) {
    const auto text = export_dendrogram(d);
    EXPECT_EQ(import_dendrogram(text), d);
    EXPECT_EQ(export_dendrogram(import_dendrogram(text)), text);
  }
}

TEST(DendrogramText, RejectsMalformed) {
  const std::string head = "criterion ward\nleaves 3\nleaf 0 a\nleaf 1 b\nleaf 2 c\norder 0 1 2\n";
  EXPECT_NO_THROW(import_dendrogram(head + "merge 0 1 1 2\nmerge 3 2 2 3\n"));
  EXPECT_THROW(import_dendrogram(head + "merge 0 1 1 2\n"), ValidationError);
  EXPECT_THROW(import_dendrogram(head + "merge 0 1 1 2\nmerge 0 2 2 2\n"), ValidationError);
  EXPECT_THROW(import_dendrogram(head + "merge 0 1 1 2\nmerge 4 2 2 3\n"), ValidationError);
  EXPECT_THROW(import_dendrogram(head + "merge 0 1 1 2\nmerge 3 2 2 4\n"), ValidationError);
  EXPECT_THROW(import_dendrogram("criterion median\n"), ValidationError);
}

TEST(Seriation, LeftChildFirst) {
  Eigen::MatrixXd x(4, 1);
  x << 10, 0, 10.1, 0.1;
  auto d = ward_cluster(cloud_of(x));
  EXPECT_EQ(seriation_order(d), (std::vector<int>{0, 2, 1, 3}));
  EXPECT_EQ(display_order(constrained_complete_link(cloud_of(x), {3, 2, 1, 0})), (std::vector<int>{3, 2, 1, 0}));
}

TEST(PartitionCsv, Format) {
  Partition p{2, {"a", "b,c"}, {1, 2}};
  EXPECT_EQ(export_partition_csv(p), "label,cluster\na,1\n\"b,c\",2\n");
}
