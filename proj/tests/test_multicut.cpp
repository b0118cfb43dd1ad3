#include <doctest.h>

#include "dualmp/baselines.hpp"
#include "dualmp/multicut.hpp"
#include "helpers.hpp"

using namespace dualmp;

namespace {

mc::MulticutInstance k4_instance(const std::vector<cost>& weights)
{
  mc::MulticutInstance instance;
  instance.num_vertices = 4;
  std::size_t w = 0;
  for (index u = 0; u < 4; ++u)
    for (index v = u + 1; v < 4; ++v)
      instance.edges.push_back({u, v, weights[w++], false});
  return instance;
}

} // namespace

TEST_CASE("factor and coupling counts")
{
  {
    const auto instance = testutil::triangle_instance(1, 1, 1);
    const auto fg = mc::build_multicut_factor_graph(instance, {{0, 1, 2}});
    CHECK(fg.factor_count() == 4);
    CHECK(fg.edge_count() == 3);
  }
  {
    const auto instance = k4_instance({1, 1, 1, 1, 1, 1});
    const auto fg = mc::build_multicut_factor_graph(instance, mc::enumerate_triangles(instance));
    CHECK(fg.factor_count() == 10);
    CHECK(fg.edge_count() == 12);
  }
}

TEST_CASE("an empty cycle set leaves the independent edge relaxation")
{
  const auto instance = testutil::triangle_instance(-1, 2, -0.5);
  const auto fg = mc::build_multicut_factor_graph(instance, {});
  CHECK(dual_lower_bound(fg, DualVariables(fg)) == doctest::Approx(-1.5));
}

TEST_CASE("unknown or non-triangle cycles are rejected")
{
  const auto instance = testutil::triangle_instance(1, 1, 1);
  CHECK_THROWS_AS(mc::build_multicut_factor_graph(instance, {{0, 1, 3}}), invalid_instance);
}

TEST_CASE("cycle factor domain excludes single-cut configurations")
{
  const auto domain = FactorDomain::cycle_triangle();
  REQUIRE(domain.config_count() == 5);
  for (std::size_t c = 0; c < domain.config_count(); ++c)
    CHECK(domain.config_support(c).size() != 1);
}

TEST_CASE("cycle minimum over the five configurations")
{
  {
    const auto result = mc::cycle_min_oracle({-1, -1, 2});
    CHECK(result.pattern == std::array<std::uint8_t, 3>{1, 1, 0});
    CHECK(result.value == doctest::Approx(-2.0));
  }
  {
    const auto result = mc::cycle_min_oracle({-1, 2, 2});
    CHECK(result.pattern == std::array<std::uint8_t, 3>{0, 0, 0});
    CHECK(result.value == doctest::Approx(0.0));
  }
  {
    const auto result = mc::cycle_min_oracle({0, 0, 0});
    CHECK(result.config == 0); // tie-break: first in the listed order
    CHECK(result.value == 0.0);
  }
}

TEST_CASE("separation keeps triangles with a positive guaranteed gain")
{
  const auto gain_case = testutil::triangle_instance(-1, 2, 2);
  const std::vector<cost> gain_costs = {-1, 2, 2};
  CHECK(mc::triangle_bound_gain(gain_case, gain_costs, {0, 1, 2}) == doctest::Approx(1.0));
  CHECK(mc::separate_triangles(gain_case, gain_costs, {}, 10).size() == 1);

  const auto flat_case = testutil::triangle_instance(-1, -1, 2);
  const std::vector<cost> flat_costs = {-1, -1, 2};
  CHECK(mc::triangle_bound_gain(flat_case, flat_costs, {0, 1, 2}) == doctest::Approx(0.0));
  CHECK(mc::separate_triangles(flat_case, flat_costs, {}, 10).empty());

  const auto positive_case = testutil::triangle_instance(1, 2, 3);
  const std::vector<cost> positive_costs = {1, 2, 3};
  CHECK(mc::separate_triangles(positive_case, positive_costs, {}, 10).empty());
}

TEST_CASE("separation respects the budget and skips active triangles")
{
  const auto instance = k4_instance({-1, 2, 2, 2, 2, -1});
  std::vector<cost> costs;
  for (const auto& edge : instance.edges)
    costs.push_back(edge.weight);
  const auto all = mc::separate_triangles(instance, costs, {}, 100);
  CHECK(all.size() > 1);
  CHECK(mc::separate_triangles(instance, costs, {}, 1).size() == 1);
  std::set<mc::Triangle> active(all.begin(), all.end());
  CHECK(mc::separate_triangles(instance, costs, active, 100).empty());
}

TEST_CASE("schedule weights are uniform over the containing cycles")
{
  {
    const auto instance = testutil::triangle_instance(1, 1, 1);
    const auto fg = mc::build_multicut_factor_graph(instance, {{0, 1, 2}});
    const auto schedule = mc::schedule_multicut(instance, fg);
    REQUIRE(schedule.forward.size() == 3);
    CHECK(schedule.forward[0].weights == std::vector<cost>{1.0});
  }
  {
    // edge (0,1) lies in four triangles of this 6-vertex instance
    mc::MulticutInstance instance;
    instance.num_vertices = 6;
    instance.edges.push_back({0, 1, 1.0, false});
    for (index x = 2; x < 6; ++x) {
      instance.edges.push_back({0, x, 1.0, false});
      instance.edges.push_back({1, x, 1.0, false});
    }
    std::vector<mc::Triangle> cycles;
    for (index x = 2; x < 6; ++x)
      cycles.push_back({0, 1, x});
    const auto fg = mc::build_multicut_factor_graph(instance, cycles);
    const auto schedule = mc::schedule_multicut(instance, fg);
    REQUIRE(schedule.forward[0].weights.size() == 4);
    for (cost w : schedule.forward[0].weights)
      CHECK(w == doctest::Approx(0.25));
  }
}

TEST_CASE("the multicut schedule is monotone")
{
  std::mt19937 rng(601);
  for (int trial = 0; trial < 25; ++trial) {
    const auto instance = testutil::random_multicut(rng, 7, 0.7);
    const auto cycles = mc::enumerate_triangles(instance);
    const auto fg = mc::build_multicut_factor_graph(instance, cycles);
    DualVariables phi(fg);
    auto schedule = mc::schedule_multicut(instance, fg);
    cost bound = dual_lower_bound(fg, phi);
    for (int iter = 0; iter < 10; ++iter) {
      const cost next = run_iteration(fg, phi, schedule);
      CHECK(next >= bound - monotone_slack(bound));
      bound = next;
    }
  }
}

TEST_CASE("local search rounding on worked triangles")
{
  {
    const auto instance = testutil::triangle_instance(-1, -1, 2);
    const std::vector<cost> costs = {-1, -1, 2};
    const auto partition = mc::round_multicut_kl(instance, costs);
    CHECK(partition[1] == partition[2]);
    CHECK(partition[0] != partition[1]);
    CHECK(mc::multicut_cost(instance, partition) == doctest::Approx(-2.0));
  }
  {
    const auto instance = testutil::triangle_instance(1, 2, 3);
    const std::vector<cost> costs = {1, 2, 3};
    const auto partition = mc::round_multicut_kl(instance, costs);
    CHECK(partition == mc::GraphPartition{0, 0, 0});
    CHECK(mc::multicut_cost(instance, partition) == 0.0);
  }
  {
    const auto instance = testutil::triangle_instance(-1, -2, -3);
    const std::vector<cost> costs = {-1, -2, -3};
    const auto partition = mc::round_multicut_kl(instance, costs);
    CHECK(std::set<index>(partition.begin(), partition.end()).size() == 3);
    CHECK(mc::multicut_cost(instance, partition) == doctest::Approx(-6.0));
  }
}

TEST_CASE("local search never worsens its starting partition")
{
  std::mt19937 rng(602);
  for (int trial = 0; trial < 40; ++trial) {
    const auto instance = testutil::random_multicut(rng, 8, 0.6);
    std::vector<cost> costs;
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (std::size_t e = 0; e < instance.edges.size(); ++e)
      costs.push_back(dist(rng));

    // starting point: components of the positive-cost subgraph
    std::vector<index> comp(static_cast<std::size_t>(instance.num_vertices));
    std::iota(comp.begin(), comp.end(), 0);
    bool merged = true;
    while (merged) {
      merged = false;
      for (std::size_t e = 0; e < instance.edges.size(); ++e)
        if (costs[e] > 0) {
          const auto& edge = instance.edges[e];
          const index a = comp[static_cast<std::size_t>(edge.u)];
          const index b = comp[static_cast<std::size_t>(edge.v)];
          if (a != b) {
            for (auto& c : comp)
              if (c == b)
                c = a;
            merged = true;
          }
        }
    }
    const cost start_cost = mc::partition_cut_cost(instance, costs, comp);
    const auto partition = mc::round_multicut_kl(instance, costs);
    CHECK(mc::partition_cut_cost(instance, costs, partition) <= start_cost + 1e-12);
  }
}

TEST_CASE("every partition induces a feasible cut vector")
{
  const auto instance = k4_instance({1, -1, 1, -1, 1, -1});
  const auto triangles = mc::enumerate_triangles(instance);
  // enumerate all 15 partitions of four vertices via the oracle helpers
  std::vector<mc::GraphPartition> partitions;
  for (index a = 0; a < 1; ++a)
    for (index b = 0; b < 2; ++b)
      for (index c = 0; c < 3; ++c)
        for (index d = 0; d < 4; ++d)
          partitions.push_back({0, b, c, d});
  for (const auto& partition : partitions) {
    const auto cut = mc::partition_cut_vector(instance, partition);
    for (const auto& t : triangles) {
      const auto ids = mc::triangle_edge_ids(instance, t);
      const int cut_count = cut[static_cast<std::size_t>(ids[0])] +
                            cut[static_cast<std::size_t>(ids[1])] +
                            cut[static_cast<std::size_t>(ids[2])];
      CHECK(cut_count != 1);
    }
  }
}

TEST_CASE("multicut cost sums the cut edges")
{
  const auto instance = testutil::triangle_instance(-1, -1, 2);
  CHECK(mc::multicut_cost(instance, {0, 0, 0}) == 0.0);
  CHECK(mc::multicut_cost(instance, {0, 1, 1}) == doctest::Approx(-2.0));
}

TEST_CASE("adding a cycle factor at zero duals keeps the bound")
{
  std::mt19937 rng(603);
  for (int trial = 0; trial < 20; ++trial) {
    const auto instance = testutil::random_multicut(rng, 6, 0.8);
    const auto triangles = mc::enumerate_triangles(instance);
    if (triangles.empty())
      continue;
    const auto bare = mc::build_multicut_factor_graph(instance, {});
    DualVariables phi(bare);
    const cost before = dual_lower_bound(bare, phi);

    const auto tightened = mc::build_multicut_factor_graph(instance, {triangles.front()});
    const cost after = dual_lower_bound(tightened, DualVariables(tightened));
    CHECK(after == doctest::Approx(before));
  }
}

TEST_CASE("chordal completion adds zero-weight chords along mixed-sign cycles")
{
  mc::MulticutInstance instance;
  instance.num_vertices = 4;
  instance.edges = {{0, 1, 1, false}, {1, 2, 1, false}, {2, 3, 1, false}, {0, 3, -1, false}};
  const std::vector<cost> costs = {1, 1, 1, -1};
  CHECK(mc::enumerate_triangles(instance).empty());
  const int added = mc::chordal_completion(instance, costs);
  CHECK(added == 1);
  CHECK(instance.edges.back().auxiliary);
  CHECK(instance.edges.back().weight == 0.0);
  CHECK(mc::enumerate_triangles(instance).size() == 2);
}

TEST_CASE("the cutting-plane solver reaches the partition optimum of a triangle")
{
  const auto instance = testutil::triangle_instance(-1, 2, 2);
  SolveOptions options;
  options.max_iterations = 60;
  options.tighten_interval = 5;
  const auto result = mc::solve_multicut(instance, options);
  CHECK(result.cycles_added == 1);
  CHECK(result.dual_bound == doctest::Approx(0.0));
  CHECK(result.best_primal == doctest::Approx(0.0));

  // the bound before tightening is the independent relaxation
  CHECK(result.records.front().dual_bound == doctest::Approx(-1.0));
  for (std::size_t r = 1; r < result.records.size(); ++r)
    CHECK(result.records[r].dual_bound >=
          result.records[r - 1].dual_bound - monotone_slack(result.records[r].dual_bound));
}

TEST_CASE("all-positive instances converge immediately")
{
  const auto instance = testutil::triangle_instance(1, 2, 3);
  SolveOptions options;
  options.max_iterations = 30;
  const auto result = mc::solve_multicut(instance, options);
  CHECK(result.cycles_added == 0);
  CHECK(result.dual_bound == doctest::Approx(0.0));
  CHECK(result.best_primal == doctest::Approx(0.0));
}

TEST_CASE("triangles with an active cycle factor are solved exactly")
{
  std::mt19937 rng(604);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto instance = testutil::triangle_instance(dist(rng), dist(rng), dist(rng));
    const auto fg = mc::build_multicut_factor_graph(instance, {{0, 1, 2}});
    DualVariables phi(fg);
    auto schedule = mc::schedule_multicut(instance, fg);
    cost bound = dual_lower_bound(fg, phi);
    for (int iter = 0; iter < 20; ++iter)
      bound = run_iteration(fg, phi, schedule);
    const auto optimum = brute_force_multicut(instance);
    CHECK(bound == doctest::Approx(optimum.value).epsilon(1e-9));
  }
}

TEST_CASE("chords without new cycles still rebuild the factor graph")
{
  // the completion adds chord (0,2); neither resulting triangle has a
  // positive guaranteed gain, so the solver must cope with grown instances
  mc::MulticutInstance instance;
  instance.num_vertices = 4;
  instance.edges = {{0, 1, 1, false}, {1, 2, 1, false}, {2, 3, 1, false}, {0, 3, -1, false}};
  SolveOptions options;
  options.max_iterations = 30;
  options.tighten_interval = 3;
  const auto result = mc::solve_multicut(instance, options);
  const auto optimum = brute_force_multicut(instance);
  CHECK(result.dual_bound <= optimum.value + 1e-9);
  CHECK(result.best_primal >= optimum.value - 1e-9);
  CHECK(result.best_primal == doctest::Approx(optimum.value)); // KL finds the optimum here
}

TEST_CASE("dual trace, optimum and primal are sandwiched on random instances")
{
  std::mt19937 rng(605);
  for (int trial = 0; trial < 20; ++trial) {
    const auto instance = testutil::random_multicut(rng, 6, 0.7);
    SolveOptions options;
    options.max_iterations = 80;
    options.tighten_interval = 10;
    const auto result = mc::solve_multicut(instance, options);
    const auto optimum = brute_force_multicut(instance);
    CHECK(result.dual_bound <= optimum.value + 1e-9);
    CHECK(result.best_primal >= optimum.value - 1e-9);
  }
}
