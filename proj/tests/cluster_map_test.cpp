#include <gtest/gtest.h>

#include <vector>

#include "fibra/evaluate.hpp"

using namespace fibra;

namespace {

ClusterMap line_map(const std::vector<int>& labels) {
  ClusterMap m;
  m.grid = {labels.size(), 1, 1};
  for (std::size_t i = 0; i < labels.size(); ++i) m.windows.push_back({static_cast<int>(i), 0, 0});
  m.labels = labels;
  return m;
}

std::vector<bool> mask(const ClusterMap& m) {
  std::vector<bool> out;
  for (std::size_t i = 0; i < m.size(); ++i) out.push_back(m.is_anomaly(i));
  return out;
}

ClusterMap truth_with(std::size_t n, std::size_t anomalies) {
  std::vector<int> l(n, 0);
  for (std::size_t i = 0; i < anomalies; ++i) l[i] = 1;
  ClusterMap m = line_map(l);
  m.roles = {{0, ClusterRole::normal}, {1, ClusterRole::anomaly}};
  return m;
}

}  // namespace

TEST(SelectAnomaly, MinorityIsAnomaly) {
  const auto m = select_anomaly(line_map({0, 0, 0, 1, 1, 2}));
  EXPECT_EQ(m.role_of(0), ClusterRole::normal);
  EXPECT_EQ(m.role_of(1), ClusterRole::anomaly);
  EXPECT_EQ(m.role_of(2), ClusterRole::artefact);
  EXPECT_EQ(m.display_classes(), (std::vector<int>{0, 0, 0, 1, 1, 2}));
}

TEST(SelectAnomaly, SingleClusterHasNoAnomaly) {
  const auto m = select_anomaly(line_map({4, 4, 4}));
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_FALSE(m.is_anomaly(i));
}

TEST(SelectAnomaly, RelabelingKeepsMask) {
  const std::vector<int> base = {0, 1, 1, 0, 2, 1, 0, 0, 0, 2, 2, 0};
  const auto ref = mask(select_anomaly(line_map(base)));
  for (const std::vector<int>& perm : {std::vector<int>{2, 0, 1}, {1, 2, 0}, {7, 3, 5}}) {
    std::vector<int> relabeled;
    for (int l : base) relabeled.push_back(perm[l]);
    EXPECT_EQ(mask(select_anomaly(line_map(relabeled))), ref);
  }
}

TEST(SelectAnomaly, TieBrokenByEntropy) {
  const std::vector<double> h = {1.0, 1.0, 2.0, 2.0};
  const auto m = select_anomaly(line_map({0, 0, 1, 1}), h);
  EXPECT_EQ(m.role_of(1), ClusterRole::anomaly);
  const std::vector<double> h2 = {3.0, 3.0, 2.0, 2.0};
  EXPECT_EQ(select_anomaly(line_map({0, 0, 1, 1}), h2).role_of(0), ClusterRole::anomaly);
}

TEST(SelectAnomaly, TieBrokenByCentre) {
  // Grid centre is x = 2.5; label 1 owns the windows next to it.
  const auto m = select_anomaly(line_map({0, 0, 1, 1, 0, 1}));
  EXPECT_EQ(m.role_of(1), ClusterRole::anomaly);
}

TEST(UnionFindTest, ComponentsOrderedBySize) {
  UnionFind uf(6);
  uf.unite(4, 5);
  uf.unite(3, 4);
  uf.unite(0, 1);
  EXPECT_EQ(component_labels(uf, 6), (std::vector<int>{1, 1, 2, 0, 0, 0}));
}

TEST(Evaluate, IdentityAndComplement) {
  const auto truth = truth_with(10, 3);
  const auto same = evaluate(truth, truth);
  EXPECT_EQ(same.misclassification, 0.0);
  EXPECT_EQ(same.true_positive, 3u);
  EXPECT_DOUBLE_EQ(same.rand_index, 1.0);

  ClusterMap flipped = truth;
  flipped.roles = {{0, ClusterRole::anomaly}, {1, ClusterRole::normal}};
  const auto r = evaluate(flipped, truth);
  EXPECT_TRUE(r.swapped);
  EXPECT_EQ(r.misclassification, 0.0);
}

TEST(Evaluate, OneWrongInHundred) {
  const auto truth = truth_with(100, 20);
  ClusterMap pred = truth;
  pred.labels[50] = 1;
  const auto r = evaluate(pred, truth);
  EXPECT_DOUBLE_EQ(r.misclassification, 0.01);
  EXPECT_EQ(r.false_positive, 1u);
  EXPECT_DOUBLE_EQ(r.anomaly_precision, 20.0 / 21.0);
  EXPECT_DOUBLE_EQ(r.anomaly_recall, 1.0);
}

TEST(Evaluate, GridMismatch) {
  const auto truth = truth_with(10, 3);
  auto pred = truth_with(11, 3);
  try {
    evaluate(pred, truth);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridMismatch);
  }
  pred = truth;
  pred.windows[0] = {0, 0, 0};
  auto sparse_truth = truth;
  sparse_truth.windows.erase(sparse_truth.windows.begin());
  sparse_truth.labels.erase(sparse_truth.labels.begin());
  EXPECT_THROW(evaluate(pred, sparse_truth), Error);
}

TEST(RandIndex, HandExample) {
  // Pairs: (0,1) same/same, (0,2) diff/same, (1,2) diff/same -> 1 agreement of 3.
  EXPECT_NEAR(rand_index({0, 0, 1}, {5, 5, 5}), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(rand_index({0, 1, 2, 3}, {3, 2, 1, 0}), 1.0);
}
