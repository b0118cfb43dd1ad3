#include <doctest.h>

#include "dualmp/baselines.hpp"
#include "dualmp/graph_matching.hpp"
#include "helpers.hpp"

using namespace dualmp;

namespace {

// Two nodes, universe {0,1}, both labels candidates of both nodes, unaries
// u=(0,5), v=(0,1), no pairwise terms. The optimal injective assignment is
// (0,1) with cost 1.
gm::MatchingModel two_node_model()
{
  gm::MatchingModel model;
  model.universe_size = 2;
  model.candidates = {{0, 1}, {0, 1}};
  model.backbone.unaries = {{0, 5}, {0, 1}};
  gm::validate_model(model);
  return model;
}

// the maximal admissible scalar update, enumerated over the simplex configs
cost scalar_message_oracle(std::span<const cost> costs, index coord)
{
  cost with = infinite_cost, without = infinite_cost;
  for (std::size_t s = 0; s < costs.size(); ++s) {
    if (static_cast<index>(s) == coord)
      with = std::min(with, costs[s]);
    else
      without = std::min(without, costs[s]);
  }
  if (without == infinite_cost)
    return 0.0;
  return without - with;
}

} // namespace

TEST_CASE("label factors carry every candidate node plus the dummy")
{
  const auto model = two_node_model();
  const auto fg = gm::build_gm_factor_graph(model);
  CHECK(fg.factor_count() == 4); // 2 nodes + 2 label factors
  CHECK(fg.edge_count() == 4);   // one scalar coupling per (node, candidate)
  CHECK(fg.factor(gm::label_factor(model, 0)).domain.dim == 3);
  CHECK(fg.factor(gm::label_factor(model, 1)).domain.dim == 3);
}

TEST_CASE("node-label couplings select single coordinates on both sides")
{
  const auto model = two_node_model();
  const auto fg = gm::build_gm_factor_graph(model);
  for (index e = 0; e < static_cast<index>(fg.edge_count()); ++e) {
    const auto& edge = fg.edge(e);
    CHECK(edge.message_dim == 1);
    CHECK(edge.shape_i == ProjectionShape::single_coord);
    CHECK(edge.shape_j == ProjectionShape::single_coord);
    CHECK(edge.select_one_i);
    CHECK(edge.select_one_j);
  }
}

TEST_CASE("empty candidate sets are rejected")
{
  gm::MatchingModel model;
  model.universe_size = 2;
  model.candidates = {{0}, {}};
  model.backbone.unaries = {{0}, {}};
  CHECK_THROWS_WITH_AS(gm::validate_model(model), doctest::Contains("empty candidate set"),
                       invalid_instance);
}

TEST_CASE("label factor message worked values")
{
  // costs indexed (u, v, #)
  const std::vector<cost> costs = {2, 0, 1};
  CHECK(gm::label_factor_message(costs, 0) == doctest::Approx(-2.0));
  const std::vector<cost> uniform = {1, 1, 1};
  CHECK(gm::label_factor_message(uniform, 0) == doctest::Approx(0.0));
}

TEST_CASE("label factor message addressed by node")
{
  const auto model = two_node_model();
  const std::vector<cost> costs = {2, 0, 1};
  CHECK(gm::label_factor_message(model, 0, 0, costs) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(gm::label_factor_message(model, 0, 7, costs), solver_error);
}

TEST_CASE("label factor message equals the enumeration oracle on random vectors")
{
  std::mt19937 rng(501);
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  std::uniform_int_distribution<int> size_dist(2, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<cost> costs(static_cast<std::size_t>(size_dist(rng)));
    for (auto& v : costs)
      v = dist(rng);
    const index coord = static_cast<index>(trial) % static_cast<index>(costs.size());
    CHECK(gm::label_factor_message(costs, coord) ==
          doctest::Approx(scalar_message_oracle(costs, coord)).epsilon(1e-9));
  }
}

TEST_CASE("amp schedule weights and label block")
{
  // node 2 has two incoming (0, 1) and two outgoing (3, 4) edges and three
  // candidate labels
  gm::MatchingModel model;
  model.universe_size = 3;
  model.candidates = {{0}, {1}, {0, 1, 2}, {1}, {2}};
  model.backbone.unaries = {{0}, {0}, {0, 0, 0}, {0}, {0}};
  for (index other : {0, 1, 3, 4}) {
    mrf::PairwiseEdge edge;
    edge.u = 2;
    edge.v = other;
    edge.table.assign(3, 0.0);
    model.backbone.edges.push_back(std::move(edge));
  }
  gm::validate_model(model);
  const auto order = mrf::make_node_order(model.backbone, {0, 1, 2, 3, 4});
  const auto schedule = gm::schedule_amp(model, order);

  const auto& center = schedule.forward[2];
  CHECK(center.factor == 2);
  CHECK(center.receive.size() == 2 + 3); // incoming edges plus all label couplings
  REQUIRE(center.blocks.size() == 3);    // two outgoing singletons plus the label block
  CHECK(center.blocks.back().size() == 3);
  for (cost w : center.weights)
    CHECK(w == doctest::Approx(1.0 / 3.0)); // 1 / (1 + max(2, 2))
  cost total = 0;
  for (cost w : center.weights)
    total += w;
  CHECK(total <= 1.0 + 1e-12);
}

TEST_CASE("label factors send one block over all coupled nodes")
{
  gm::MatchingModel model;
  model.universe_size = 1;
  model.candidates = {{0}, {0}, {0}};
  model.backbone.unaries = {{0}, {0}, {0}};
  gm::validate_model(model);
  const auto order = mrf::identity_order(model.backbone);
  const auto schedule = gm::schedule_amp(model, order);
  const auto& label_visit = schedule.forward.back();
  CHECK(label_visit.factor == gm::label_factor(model, 0));
  CHECK(label_visit.receive.size() == 3);
  REQUIRE(label_visit.blocks.size() == 1);
  CHECK(label_visit.blocks[0].size() == 3);
  CHECK(label_visit.weights[0] == doctest::Approx(1.0));
}

TEST_CASE("rounding assigns greedily without reusing labels")
{
  const auto model = two_node_model();
  const auto fg = gm::build_gm_factor_graph(model);
  const auto order = mrf::identity_order(model.backbone);
  const auto assignment = gm::round_gm(model, fg, DualVariables(fg), order);
  CHECK(assignment == std::vector<index>{0, 1});
  CHECK(gm::assignment_cost(model, assignment) == doctest::Approx(1.0));
}

TEST_CASE("a node without remaining candidates stays unassigned")
{
  gm::MatchingModel model;
  model.universe_size = 1;
  model.candidates = {{0}, {0}};
  model.backbone.unaries = {{0}, {0}};
  gm::validate_model(model);
  const auto fg = gm::build_gm_factor_graph(model);
  const auto order = mrf::identity_order(model.backbone);
  const auto assignment = gm::round_gm(model, fg, DualVariables(fg), order);
  CHECK(assignment[0] == 0);
  CHECK(assignment[1] == gm::unassigned);
  CHECK(gm::assignment_cost(model, assignment) == infinite_cost);
}

TEST_CASE("verify matching checks pairwise distinctness")
{
  CHECK(gm::verify_matching(std::vector<index>{0, 1}));
  CHECK_FALSE(gm::verify_matching(std::vector<index>{0, 0}));
  CHECK(gm::verify_matching(std::vector<index>{0, gm::unassigned, gm::unassigned}));
}

TEST_CASE("rounded assignments always verify and never undercut the bound")
{
  std::mt19937 rng(502);
  for (int trial = 0; trial < 30; ++trial) {
    const auto model = testutil::random_gm(rng, 5, 5);
    const auto order = mrf::identity_order(model.backbone);
    SolveOptions options;
    options.max_iterations = 60;
    const auto result = gm::solve_gm(model, order, options);
    if (!result.best_assignment.empty())
      CHECK(gm::verify_matching(result.best_assignment));
    CHECK(result.best_primal >= result.dual_bound - monotone_slack(result.dual_bound));
  }
}

TEST_CASE("dual bound stays below the optimal injective assignment")
{
  std::mt19937 rng(503);
  for (int trial = 0; trial < 30; ++trial) {
    const auto model = testutil::random_gm(rng, 5, 5);
    const auto optimum = brute_force_matching(model);
    REQUIRE(optimum.feasible);
    const auto order = mrf::identity_order(model.backbone);
    SolveOptions options;
    options.max_iterations = 80;
    const auto result = gm::solve_gm(model, order, options);
    CHECK(result.dual_bound <= optimum.value + 1e-9);
    CHECK(result.best_primal >= optimum.value - 1e-9);
  }
}

TEST_CASE("label factor base costs stay zero during optimization")
{
  std::mt19937 rng(504);
  const auto model = testutil::random_gm(rng, 4, 4);
  const auto fg = gm::build_gm_factor_graph(model);
  DualVariables phi(fg);
  auto schedule = gm::schedule_amp(model, mrf::identity_order(model.backbone));
  for (int iter = 0; iter < 10; ++iter)
    run_iteration(fg, phi, schedule);
  for (index s = 0; s < model.universe_size; ++s)
    for (cost v : fg.factor(gm::label_factor(model, s)).costs)
      CHECK(v == 0.0);
}

TEST_CASE("consistent minimizer images across node-label couplings at fixed points")
{
  std::mt19937 rng(505);
  std::uniform_int_distribution<int> cost_dist(-1, 1);
  int consistent_states = 0;
  for (int trial = 0; trial < 60; ++trial) {
    // trial 0: zero costs and full candidate sets, consistent by construction
    auto model = trial == 0 ? two_node_model() : testutil::random_gm(rng, 4, 4);
    for (auto& unary : model.backbone.unaries)
      for (auto& v : unary)
        v = trial == 0 ? 0 : cost_dist(rng);
    for (auto& edge : model.backbone.edges)
      for (auto& v : edge.table)
        v = trial == 0 ? 0 : cost_dist(rng);
    const auto fg = gm::build_gm_factor_graph(model);
    DualVariables phi(fg);
    auto schedule = gm::schedule_amp(model, mrf::identity_order(model.backbone));
    cost bound = dual_lower_bound(fg, phi);
    for (int iter = 0; iter < 200; ++iter) {
      const cost next = run_iteration(fg, phi, schedule);
      if (std::abs(next - bound) <= 1e-13 * std::max(1.0, std::abs(next)) && iter > 2)
        break;
      bound = next;
    }
    const auto report = marginal_consistency(fg, phi);
    if (!report.consistent)
      continue;
    ++consistent_states;
    const cost after = run_iteration(fg, phi, schedule);
    CHECK(std::abs(after - bound) <= monotone_slack(bound));
  }
  CHECK(consistent_states > 0);
}
