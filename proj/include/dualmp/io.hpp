#ifndef DUALMP_IO_HPP
#define DUALMP_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "dualmp/graph_matching.hpp"
#include "dualmp/mrf.hpp"
#include "dualmp/multicut.hpp"
#include "dualmp/trace.hpp"

namespace dualmp::io {

struct parse_error : std::runtime_error {
  explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

// MARKOV instance text with size-1 and size-2 cliques only; table entries are
// read as additive costs to minimize. With `neglog` the entries are treated
// as probabilities and mapped through the negative logarithm.
mrf::PairwiseModel parse_uai(const std::string& text, bool neglog = false);
std::string write_uai(const mrf::PairwiseModel& model);

// Assignment-list format: "p <n0> <n1> <A> <E>", then "a <id> <left> <right>
// <cost>" per candidate assignment and "e <id1> <id2> <cost>" per pairwise
// term between two assignments.
gm::MatchingModel parse_dd(const std::string& text);
std::string write_dd(const gm::MatchingModel& model);

struct MulticutFile {
  mc::MulticutInstance instance;
  std::vector<std::string> vertex_names; // internal id -> input token
};

// Edge list "e <u> <v> <cost>" with arbitrary vertex tokens.
MulticutFile parse_multicut(const std::string& text);
std::string write_multicut(const MulticutFile& file);

void write_csv(std::ostream& out, const std::vector<ConvergenceRecord>& records);
std::string event_name(RecordEvent event);

} // namespace dualmp::io

#endif
