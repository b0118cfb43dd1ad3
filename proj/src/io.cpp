#include "dualmp/io.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace dualmp::io {

namespace {

struct TokenReader {
  std::istringstream in;

  explicit TokenReader(const std::string& text) : in(text) {}

  std::string word(const char* what)
  {
    std::string token;
    if (!(in >> token))
      throw parse_error(std::string("unexpected end of input, expected ") + what);
    return token;
  }

  long integer(const char* what)
  {
    const std::string token = word(what);
    std::size_t used = 0;
    long value = 0;
    try {
      value = std::stol(token, &used);
    } catch (const std::exception&) {
      throw parse_error(std::string("malformed number '") + token + "' for " + what);
    }
    if (used != token.size())
      throw parse_error(std::string("malformed number '") + token + "' for " + what);
    return value;
  }

  double real(const char* what)
  {
    const std::string token = word(what);
    std::size_t used = 0;
    double value = 0;
    try {
      value = std::stod(token, &used);
    } catch (const std::exception&) {
      throw parse_error(std::string("malformed number '") + token + "' for " + what);
    }
    if (used != token.size())
      throw parse_error(std::string("malformed number '") + token + "' for " + what);
    return value;
  }

  bool done()
  {
    in >> std::ws;
    return !in.good() || in.peek() == std::istringstream::traits_type::eof();
  }
};

cost maybe_neglog(double value, bool neglog)
{
  if (!neglog)
    return value;
  if (value <= 0)
    throw parse_error("non-positive entry cannot be mapped through the negative logarithm");
  return -std::log(value);
}

} // namespace

mrf::PairwiseModel parse_uai(const std::string& text, bool neglog)
{
  TokenReader reader(text);
  const std::string header = reader.word("MARKOV header");
  if (header != "MARKOV")
    throw parse_error("expected MARKOV header, got '" + header + "'");

  const long nvars = reader.integer("variable count");
  if (nvars < 0)
    throw parse_error("negative variable count");
  std::vector<index> cards(static_cast<std::size_t>(nvars));
  for (auto& c : cards) {
    const long v = reader.integer("cardinality");
    if (v <= 0)
      throw parse_error("cardinalities must be positive");
    c = static_cast<index>(v);
  }

  const long ncliques = reader.integer("clique count");
  if (ncliques < 0)
    throw parse_error("negative clique count");

  struct Clique {
    bool pairwise = false;
    index u = -1, v = -1;
  };
  std::vector<Clique> cliques;
  std::set<index> unary_seen;
  std::set<std::pair<index, index>> pair_seen;
  for (long c = 0; c < ncliques; ++c) {
    const long size = reader.integer("clique size");
    if (size != 1 && size != 2)
      throw parse_error("non-pairwise clique of size " + std::to_string(size));
    Clique clique;
    clique.pairwise = size == 2;
    clique.u = static_cast<index>(reader.integer("clique variable"));
    if (clique.u < 0 || clique.u >= nvars)
      throw parse_error("clique references unknown variable");
    if (clique.pairwise) {
      clique.v = static_cast<index>(reader.integer("clique variable"));
      if (clique.v < 0 || clique.v >= nvars)
        throw parse_error("clique references unknown variable");
      if (clique.v == clique.u)
        throw parse_error("self-loop clique");
      const auto key = std::minmax(clique.u, clique.v);
      if (!pair_seen.insert({key.first, key.second}).second)
        throw parse_error("duplicate clique");
    } else if (!unary_seen.insert(clique.u).second) {
      throw parse_error("duplicate clique");
    }
    cliques.push_back(clique);
  }

  mrf::PairwiseModel model;
  model.unaries.resize(static_cast<std::size_t>(nvars));
  for (long u = 0; u < nvars; ++u)
    model.unaries[static_cast<std::size_t>(u)]
        .assign(static_cast<std::size_t>(cards[static_cast<std::size_t>(u)]), 0.0);

  for (const auto& clique : cliques) {
    const long expected =
        clique.pairwise
            ? static_cast<long>(cards[static_cast<std::size_t>(clique.u)]) *
                  static_cast<long>(cards[static_cast<std::size_t>(clique.v)])
            : static_cast<long>(cards[static_cast<std::size_t>(clique.u)]);
    const long count = reader.integer("table size");
    if (count != expected)
      throw parse_error("table size " + std::to_string(count) + " does not match clique, expected " +
                        std::to_string(expected));
    std::vector<cost> values(static_cast<std::size_t>(count));
    for (auto& v : values)
      v = maybe_neglog(reader.real("table entry"), neglog);
    if (clique.pairwise) {
      mrf::PairwiseEdge edge;
      edge.u = clique.u;
      edge.v = clique.v;
      edge.table = std::move(values);
      model.edges.push_back(std::move(edge));
    } else {
      model.unaries[static_cast<std::size_t>(clique.u)] = std::move(values);
    }
  }
  if (!reader.done())
    throw parse_error("unexpected trailing content");
  mrf::validate_model(model);
  return model;
}

std::string write_uai(const mrf::PairwiseModel& model)
{
  std::ostringstream out;
  out << std::setprecision(17);
  out << "MARKOV\n" << model.node_count() << "\n";
  for (index u = 0; u < model.node_count(); ++u)
    out << (u ? " " : "") << model.label_count(u);
  out << "\n" << model.node_count() + static_cast<index>(model.edges.size()) << "\n";
  for (index u = 0; u < model.node_count(); ++u)
    out << "1 " << u << "\n";
  for (const auto& edge : model.edges)
    out << "2 " << edge.u << " " << edge.v << "\n";
  for (index u = 0; u < model.node_count(); ++u) {
    out << "\n" << model.label_count(u) << "\n";
    for (index s = 0; s < model.label_count(u); ++s)
      out << (s ? " " : "") << model.unaries[static_cast<std::size_t>(u)][static_cast<std::size_t>(s)];
    out << "\n";
  }
  for (const auto& edge : model.edges) {
    out << "\n" << edge.table.size() << "\n";
    for (std::size_t t = 0; t < edge.table.size(); ++t)
      out << (t ? " " : "") << edge.table[t];
    out << "\n";
  }
  return out.str();
}

gm::MatchingModel parse_dd(const std::string& text)
{
  struct Assignment {
    index left = -1, right = -1;
    cost value = 0;
  };
  std::map<long, Assignment> assignments;
  std::vector<std::array<long, 2>> pair_ids;
  std::vector<cost> pair_costs;
  long n0 = -1, n1 = -1, na = -1, ne = -1;

  std::istringstream lines(text);
  std::string line;
  long line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.resize(hash);
    TokenReader reader(line);
    if (reader.done())
      continue;
    const std::string tag = reader.word("line tag");
    const std::string where = " on line " + std::to_string(line_no);
    if (tag == "p") {
      if (n0 >= 0)
        throw parse_error("repeated p line" + where);
      n0 = reader.integer("left point count");
      n1 = reader.integer("right point count");
      na = reader.integer("assignment count");
      ne = reader.integer("pairwise count");
      if (n0 < 0 || n1 < 0 || na < 0 || ne < 0)
        throw parse_error("negative count in p line" + where);
    } else if (tag == "a") {
      if (n0 < 0)
        throw parse_error("a line before p line" + where);
      const long id = reader.integer("assignment id");
      Assignment a;
      a.left = static_cast<index>(reader.integer("left point"));
      a.right = static_cast<index>(reader.integer("right point"));
      a.value = reader.real("assignment cost");
      if (a.left < 0 || a.left >= n0 || a.right < 0 || a.right >= n1)
        throw parse_error("assignment references unknown point" + where);
      if (!assignments.emplace(id, a).second)
        throw parse_error("duplicate assignment id" + where);
    } else if (tag == "e") {
      if (n0 < 0)
        throw parse_error("e line before p line" + where);
      pair_ids.push_back({reader.integer("assignment id"), reader.integer("assignment id")});
      pair_costs.push_back(reader.real("pairwise cost"));
    } else {
      throw parse_error("unknown line tag '" + tag + "'" + where);
    }
    if (!reader.done())
      throw parse_error("unexpected trailing content" + where);
  }
  if (n0 < 0)
    throw parse_error("missing p line");
  if (static_cast<long>(assignments.size()) != na)
    throw parse_error("assignment count does not match p line");
  if (static_cast<long>(pair_ids.size()) != ne)
    throw parse_error("pairwise count does not match p line");

  gm::MatchingModel model;
  model.universe_size = static_cast<index>(n1);
  model.candidates.assign(static_cast<std::size_t>(n0), {});
  std::set<std::pair<index, index>> assignment_pairs;
  for (const auto& [id, a] : assignments) {
    if (!assignment_pairs.insert({a.left, a.right}).second)
      throw parse_error("duplicate assignment pair");
    model.candidates[static_cast<std::size_t>(a.left)].push_back(a.right);
  }
  for (auto& cands : model.candidates)
    std::sort(cands.begin(), cands.end());

  model.backbone.unaries.assign(static_cast<std::size_t>(n0), {});
  for (long u = 0; u < n0; ++u)
    model.backbone.unaries[static_cast<std::size_t>(u)]
        .assign(model.candidates[static_cast<std::size_t>(u)].size(), 0.0);
  const auto position = [&](index u, index label) {
    const auto& cands = model.candidates[static_cast<std::size_t>(u)];
    return static_cast<index>(std::lower_bound(cands.begin(), cands.end(), label) - cands.begin());
  };
  for (const auto& [id, a] : assignments)
    model.backbone.unaries[static_cast<std::size_t>(a.left)]
                          [static_cast<std::size_t>(position(a.left, a.right))] = a.value;

  std::map<std::pair<index, index>, std::size_t> edge_of;
  std::set<std::pair<long, long>> e_seen;
  for (std::size_t t = 0; t < pair_ids.size(); ++t) {
    const auto [id1, id2] = std::pair(pair_ids[t][0], pair_ids[t][1]);
    const auto it1 = assignments.find(id1);
    const auto it2 = assignments.find(id2);
    if (it1 == assignments.end() || it2 == assignments.end())
      throw parse_error("pairwise term references unknown assignment " +
                        std::to_string(it1 == assignments.end() ? id1 : id2));
    if (id1 == id2)
      throw parse_error("pairwise term joins an assignment with itself");
    if (!e_seen.insert({std::min(id1, id2), std::max(id1, id2)}).second)
      throw parse_error("duplicate pairwise term");
    const auto& a1 = it1->second;
    const auto& a2 = it2->second;
    if (a1.left == a2.left)
      throw parse_error("pairwise term joins two assignments of the same node");

    const auto& low = a1.left < a2.left ? a1 : a2;
    const auto& high = a1.left < a2.left ? a2 : a1;
    const auto key = std::pair(low.left, high.left);
    auto it = edge_of.find(key);
    if (it == edge_of.end()) {
      mrf::PairwiseEdge edge;
      edge.u = low.left;
      edge.v = high.left;
      edge.table.assign(model.candidates[static_cast<std::size_t>(low.left)].size() *
                            model.candidates[static_cast<std::size_t>(high.left)].size(),
                        0.0);
      it = edge_of.emplace(key, model.backbone.edges.size()).first;
      model.backbone.edges.push_back(std::move(edge));
    }
    auto& edge = model.backbone.edges[it->second];
    const index cols = static_cast<index>(model.candidates[static_cast<std::size_t>(high.left)].size());
    const index row = position(low.left, low.right);
    const index col = position(high.left, high.right);
    edge.table[static_cast<std::size_t>(row * cols + col)] += pair_costs[t];
  }

  gm::validate_model(model);
  return model;
}

std::string write_dd(const gm::MatchingModel& model)
{
  std::ostringstream out;
  out << std::setprecision(17);
  long na = 0;
  for (const auto& cands : model.candidates)
    na += static_cast<long>(cands.size());
  long ne = 0;
  for (const auto& edge : model.backbone.edges)
    for (cost v : edge.table)
      if (v != 0)
        ++ne;
  out << "p " << model.candidates.size() << " " << model.universe_size << " " << na << " " << ne
      << "\n";

  std::map<std::pair<index, index>, long> id_of;
  long next_id = 0;
  for (index u = 0; u < static_cast<index>(model.candidates.size()); ++u) {
    const auto& cands = model.candidates[static_cast<std::size_t>(u)];
    for (index p = 0; p < static_cast<index>(cands.size()); ++p) {
      const index s = cands[static_cast<std::size_t>(p)];
      id_of[{u, s}] = next_id;
      out << "a " << next_id++ << " " << u << " " << s << " "
          << model.backbone.unaries[static_cast<std::size_t>(u)][static_cast<std::size_t>(p)] << "\n";
    }
  }
  for (const auto& edge : model.backbone.edges) {
    const auto& cu = model.candidates[static_cast<std::size_t>(edge.u)];
    const auto& cv = model.candidates[static_cast<std::size_t>(edge.v)];
    for (index a = 0; a < static_cast<index>(cu.size()); ++a)
      for (index b = 0; b < static_cast<index>(cv.size()); ++b) {
        const cost v = edge.table[static_cast<std::size_t>(a * static_cast<index>(cv.size()) + b)];
        if (v != 0)
          out << "e " << id_of[{edge.u, cu[static_cast<std::size_t>(a)]}] << " "
              << id_of[{edge.v, cv[static_cast<std::size_t>(b)]}] << " " << v << "\n";
      }
  }
  return out.str();
}

MulticutFile parse_multicut(const std::string& text)
{
  MulticutFile file;
  std::map<std::string, index> id_of;
  const auto vertex = [&](const std::string& token) {
    const auto [it, inserted] = id_of.try_emplace(token, static_cast<index>(id_of.size()));
    if (inserted)
      file.vertex_names.push_back(token);
    return it->second;
  };

  std::set<std::pair<index, index>> seen;
  std::istringstream lines(text);
  std::string line;
  long line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.resize(hash);
    TokenReader reader(line);
    if (reader.done())
      continue;
    const std::string tag = reader.word("line tag");
    const std::string where = " on line " + std::to_string(line_no);
    if (tag != "e")
      throw parse_error("unknown line tag '" + tag + "'" + where);
    const std::string tu = reader.word("vertex");
    const std::string tv = reader.word("vertex");
    const cost weight = reader.real("edge cost");
    if (!reader.done())
      throw parse_error("unexpected trailing content" + where);
    if (tu == tv)
      throw parse_error("self-loop edge" + where);
    const index u = vertex(tu), v = vertex(tv);
    const auto key = std::minmax(u, v);
    if (!seen.insert({key.first, key.second}).second)
      throw parse_error("duplicate edge" + where);
    file.instance.edges.push_back({key.first, key.second, weight, false});
  }
  file.instance.num_vertices = static_cast<index>(id_of.size());
  mc::validate_instance(file.instance);
  return file;
}

std::string write_multicut(const MulticutFile& file)
{
  std::ostringstream out;
  out << std::setprecision(17);
  for (const auto& edge : file.instance.edges) {
    if (edge.auxiliary)
      continue;
    out << "e " << file.vertex_names[static_cast<std::size_t>(edge.u)] << " "
        << file.vertex_names[static_cast<std::size_t>(edge.v)] << " " << edge.weight << "\n";
  }
  return out.str();
}

std::string event_name(RecordEvent event)
{
  switch (event) {
    case RecordEvent::iterate: return "iterate";
    case RecordEvent::tighten: return "tighten";
    case RecordEvent::round: return "round";
  }
  return "?";
}

void write_csv(std::ostream& out, const std::vector<ConvergenceRecord>& records)
{
  out << "iteration,elapsed_ms,dual_bound,best_primal,event\n";
  out << std::setprecision(17);
  for (const auto& rec : records) {
    out << rec.iteration << "," << rec.elapsed_ms << "," << rec.dual_bound << ",";
    if (rec.best_primal)
      out << *rec.best_primal;
    out << "," << event_name(rec.event) << "\n";
  }
}

} // namespace dualmp::io
