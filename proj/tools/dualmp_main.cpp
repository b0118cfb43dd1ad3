#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "dualmp/baselines.hpp"
#include "dualmp/io.hpp"

namespace {

using dualmp::cost;
using dualmp::ConvergenceRecord;
using dualmp::RecordEvent;
using dualmp::SolveOptions;
using dualmp::StepRule;
using dualmp::subgradient_solve;
namespace io = dualmp::io;
namespace mrf = dualmp::mrf;
namespace gm = dualmp::gm;
namespace mc = dualmp::mc;

constexpr int exit_ok = 0;
constexpr int exit_parse_error = 2;
constexpr int exit_flag_error = 3;

std::string format_value(cost v)
{
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  const double r = std::round(v);
  if (std::abs(v - r) < 1e-9) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.0f", r == 0 ? 0.0 : r);
    return buffer;
  }
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", v);
  return buffer;
}

void print_summary(cost dual, cost primal)
{
  std::cout << "dual=" << format_value(dual) << " primal=" << format_value(primal)
            << " gap=" << format_value(primal - dual) << "\n";
}

std::string slurp(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw io::parse_error("cannot open input file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void maybe_write_log(const std::string& path, const std::vector<ConvergenceRecord>& records)
{
  if (path.empty())
    return;
  std::ofstream out(path);
  if (!out)
    throw io::parse_error("cannot open log file " + path);
  io::write_csv(out, records);
}

std::vector<dualmp::index> permuted_order(dualmp::index n, bool seeded, std::uint64_t seed)
{
  std::vector<dualmp::index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (seeded) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

std::vector<ConvergenceRecord> subgradient_records(const std::vector<cost>& best_trace)
{
  std::vector<ConvergenceRecord> records;
  for (std::size_t t = 0; t < best_trace.size(); ++t)
    records.push_back({static_cast<int>(t + 1), 0, best_trace[t], {}, RecordEvent::iterate});
  return records;
}

struct CommonFlags {
  std::string input;
  std::string log_path;
  std::string solver = "mp";
  int max_iters = 1000;
  double tol = 1e-8;
  int round_interval = 10;
  std::uint64_t seed = 0;
  bool seeded = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags)
{
  cmd->add_option("--input", flags.input, "instance file")->required();
  cmd->add_option("--max-iters", flags.max_iters, "iteration limit");
  cmd->add_option("--tol", flags.tol, "relative dual improvement stop threshold");
  cmd->add_option("--round-interval", flags.round_interval, "iterations between rounding passes");
  cmd->add_option("--seed", flags.seed, "seed for the node order permutation")
      ->each([&flags](const std::string&) { flags.seeded = true; });
  cmd->add_option("--log", flags.log_path, "write a convergence CSV to this path");
  cmd->add_option("--solver", flags.solver, "mp or subgradient")
      ->check(CLI::IsMember({"mp", "subgradient"}));
}

SolveOptions to_options(const CommonFlags& flags)
{
  SolveOptions options;
  options.max_iterations = flags.max_iters;
  options.tolerance = flags.tol;
  options.round_interval = flags.round_interval;
  return options;
}

int run_mrf(const CommonFlags& flags, const std::string& schedule_name, bool uai_neglog)
{
  const auto model = io::parse_uai(slurp(flags.input), uai_neglog);
  const auto order =
      mrf::make_node_order(model, permuted_order(model.node_count(), flags.seeded, flags.seed));

  if (flags.solver == "subgradient") {
    const auto fg = mrf::build_crf_factor_graph(model);
    const auto result = subgradient_solve(fg, flags.max_iters, StepRule{});
    const auto labels = mrf::round_crf(model, fg, result.phi, order);
    const cost primal = mrf::crf_labeling_cost(model, labels);
    maybe_write_log(flags.log_path, subgradient_records(result.best_trace));
    print_summary(result.best_dual, primal);
    return exit_ok;
  }

  mrf::CrfScheduleKind kind = mrf::CrfScheduleKind::srmp;
  if (schedule_name == "msd")
    kind = mrf::CrfScheduleKind::msd;
  else if (schedule_name == "mplp")
    kind = mrf::CrfScheduleKind::mplp;

  const auto result = mrf::solve_crf(model, kind, order, to_options(flags));
  maybe_write_log(flags.log_path, result.records);
  print_summary(result.dual_bound, result.best_primal);
  return exit_ok;
}

int run_gm(const CommonFlags& flags)
{
  auto model = io::parse_dd(slurp(flags.input));
  const auto order = mrf::make_node_order(
      model.backbone, permuted_order(model.backbone.node_count(), flags.seeded, flags.seed));

  if (flags.solver == "subgradient") {
    const auto fg = gm::build_gm_factor_graph(model);
    const auto result = subgradient_solve(fg, flags.max_iters, StepRule{});
    const auto assignment = gm::round_gm(model, fg, result.phi, order);
    maybe_write_log(flags.log_path, subgradient_records(result.best_trace));
    print_summary(result.best_dual, gm::assignment_cost(model, assignment));
    return exit_ok;
  }

  const auto result = gm::solve_gm(model, order, to_options(flags));
  maybe_write_log(flags.log_path, result.records);
  print_summary(result.dual_bound, result.best_primal);
  return exit_ok;
}

int run_multicut(const CommonFlags& flags, int tighten_interval, int separation_budget)
{
  const auto file = io::parse_multicut(slurp(flags.input));

  if (flags.solver == "subgradient") {
    // Activate every triangle upfront; the cutting-plane loop is specific to
    // the message-passing solver.
    const auto cycles = mc::enumerate_triangles(file.instance);
    const auto fg = mc::build_multicut_factor_graph(file.instance, cycles);
    const auto result = subgradient_solve(fg, flags.max_iters, StepRule{});
    const auto costs = mc::reparametrized_edge_costs(file.instance, fg, result.phi);
    const auto partition = mc::round_multicut_kl(file.instance, costs);
    maybe_write_log(flags.log_path, subgradient_records(result.best_trace));
    print_summary(result.best_dual, mc::multicut_cost(file.instance, partition));
    return exit_ok;
  }

  SolveOptions options = to_options(flags);
  options.tighten_interval = tighten_interval;
  options.separation_budget = separation_budget;
  const auto result = mc::solve_multicut(file.instance, options);
  maybe_write_log(flags.log_path, result.records);
  print_summary(result.dual_bound, result.best_primal);
  return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"dual ascent solvers for decomposed combinatorial problems"};
  app.require_subcommand(1);

  CommonFlags mrf_flags, gm_flags, mc_flags;
  std::string schedule_name = "srmp";
  bool uai_neglog = false;
  int tighten_interval = 20;
  int separation_budget = -1;

  auto* mrf_cmd = app.add_subcommand("mrf", "pairwise model from a MARKOV file");
  add_common_flags(mrf_cmd, mrf_flags);
  mrf_cmd->add_option("--schedule", schedule_name, "srmp, msd or mplp")
      ->check(CLI::IsMember({"srmp", "msd", "mplp"}));
  mrf_cmd->add_flag("--uai-neglog", uai_neglog, "table entries are probabilities");

  auto* gm_cmd = app.add_subcommand("gm", "matching instance from an assignment list");
  add_common_flags(gm_cmd, gm_flags);

  auto* mc_cmd = app.add_subcommand("multicut", "multicut instance from an edge list");
  add_common_flags(mc_cmd, mc_flags);
  mc_cmd->add_option("--tighten-interval", tighten_interval,
                     "iterations between cutting-plane rounds");
  mc_cmd->add_option("--separation-budget", separation_budget,
                     "cycles activated per round (default: edge count)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0)
      return app.exit(e); // --help
    app.exit(e);
    return exit_flag_error;
  }

  try {
    if (mrf_cmd->parsed())
      return run_mrf(mrf_flags, schedule_name, uai_neglog);
    if (gm_cmd->parsed())
      return run_gm(gm_flags);
    if (mc_cmd->parsed())
      return run_multicut(mc_flags, tighten_interval, separation_budget);
  } catch (const dualmp::io::parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return exit_parse_error;
  } catch (const dualmp::invalid_instance& e) {
    std::cerr << "invalid instance: " << e.what() << "\n";
    return exit_parse_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_flag_error;
}
