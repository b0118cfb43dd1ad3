#ifndef DUALMP_TEST_HELPERS_HPP
#define DUALMP_TEST_HELPERS_HPP

#include <random>

#include "dualmp/baselines.hpp"
#include "dualmp/graph_matching.hpp"
#include "dualmp/mrf.hpp"
#include "dualmp/multicut.hpp"

namespace testutil {

using namespace dualmp;

// Two-node chain: unaries (0,1) and (2,0), pairwise ((0,3),(3,0)).
// Independent minima give a dual bound of 0 while the best labeling (1,1)
// costs 1.
inline mrf::PairwiseModel chain_model()
{
  mrf::PairwiseModel model;
  model.unaries = {{0, 1}, {2, 0}};
  model.edges.push_back({0, 1, {0, 3, 3, 0}});
  mrf::validate_model(model);
  return model;
}

inline void randomize_duals(const FactorGraph& fg, DualVariables& phi, std::mt19937& rng,
                            double scale = 2.0)
{
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (index e = 0; e < static_cast<index>(fg.edge_count()); ++e)
    for (auto& v : phi.edge(e))
      v = dist(rng);
}

inline mrf::PairwiseModel random_crf(std::mt19937& rng, int max_nodes = 8, int max_labels = 4,
                                     double edge_prob = 0.5, bool chain = false)
{
  std::uniform_int_distribution<int> node_dist(2, max_nodes);
  std::uniform_int_distribution<int> label_dist(2, max_labels);
  std::uniform_real_distribution<double> cost_dist(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  mrf::PairwiseModel model;
  const int n = node_dist(rng);
  for (int u = 0; u < n; ++u) {
    std::vector<cost> unary(static_cast<std::size_t>(label_dist(rng)));
    for (auto& v : unary)
      v = cost_dist(rng);
    model.unaries.push_back(std::move(unary));
  }
  const auto add_edge = [&](int u, int v) {
    mrf::PairwiseEdge edge;
    edge.u = u;
    edge.v = v;
    edge.table.resize(model.unaries[static_cast<std::size_t>(u)].size() *
                      model.unaries[static_cast<std::size_t>(v)].size());
    for (auto& t : edge.table)
      t = cost_dist(rng);
    model.edges.push_back(std::move(edge));
  };
  for (int u = 0; u + 1 < n; ++u)
    if (chain)
      add_edge(u, u + 1);
  if (!chain)
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (coin(rng) < edge_prob)
          add_edge(u, v);
  mrf::validate_model(model);
  return model;
}

// Integer costs in {-1,0,1} make ties, fat minimizer sets and marginally
// consistent fixed points common.
inline mrf::PairwiseModel random_int_crf(std::mt19937& rng, int max_nodes = 6, int max_labels = 3,
                                         bool chain = false)
{
  auto model = random_crf(rng, max_nodes, max_labels, 0.5, chain);
  std::uniform_int_distribution<int> cost_dist(-1, 1);
  for (auto& unary : model.unaries)
    for (auto& v : unary)
      v = cost_dist(rng);
  for (auto& edge : model.edges)
    for (auto& v : edge.table)
      v = cost_dist(rng);
  return model;
}

inline gm::MatchingModel random_gm(std::mt19937& rng, int max_nodes = 5, int max_labels = 5,
                                   double edge_prob = 0.5)
{
  std::uniform_int_distribution<int> node_dist(2, max_nodes);
  std::uniform_real_distribution<double> cost_dist(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  gm::MatchingModel model;
  const int n = node_dist(rng);
  model.universe_size = std::max(n, max_labels);
  model.candidates.resize(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    // label u keeps the instance feasible; extras at random
    std::set<index> cands = {static_cast<index>(u)};
    for (index s = 0; s < model.universe_size; ++s)
      if (coin(rng) < 0.4)
        cands.insert(s);
    model.candidates[static_cast<std::size_t>(u)].assign(cands.begin(), cands.end());
    std::vector<cost> unary(cands.size());
    for (auto& v : unary)
      v = cost_dist(rng);
    model.backbone.unaries.push_back(std::move(unary));
  }
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (coin(rng) < edge_prob) {
        mrf::PairwiseEdge edge;
        edge.u = u;
        edge.v = v;
        edge.table.resize(model.candidates[static_cast<std::size_t>(u)].size() *
                          model.candidates[static_cast<std::size_t>(v)].size());
        for (auto& t : edge.table)
          t = cost_dist(rng);
        model.backbone.edges.push_back(std::move(edge));
      }
  gm::validate_model(model);
  return model;
}

inline mc::MulticutInstance random_multicut(std::mt19937& rng, int max_vertices = 8,
                                            double edge_prob = 0.6)
{
  std::uniform_int_distribution<int> vertex_dist(3, max_vertices);
  std::uniform_real_distribution<double> cost_dist(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  mc::MulticutInstance instance;
  instance.num_vertices = vertex_dist(rng);
  for (index u = 0; u < instance.num_vertices; ++u)
    for (index v = u + 1; v < instance.num_vertices; ++v)
      if (coin(rng) < edge_prob)
        instance.edges.push_back({u, v, cost_dist(rng), false});
  mc::validate_instance(instance);
  return instance;
}

// Vertices 0,1,2 with weights w01, w02, w12; matches the cycle-factor
// coordinate order.
inline mc::MulticutInstance triangle_instance(cost w01, cost w02, cost w12)
{
  mc::MulticutInstance instance;
  instance.num_vertices = 3;
  instance.edges = {{0, 1, w01, false}, {0, 2, w02, false}, {1, 2, w12, false}};
  return instance;
}

} // namespace testutil

#endif
