#pragma once

// Truss description files.
//
//   [truss]
//   dim = 2
//   [nodes]
//   hub = 0 0
//   left = -1 1.2
//   [bars]
//   b1 = left hub area=unit modulus=1    # area=unit means 1 / length
//   [supports]
//   left = x y
//   [loads]
//   hub = 0.5 -2
//   [strains]
//   b1 = 0
//
// Nodes and bars are numbered in file order.

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "ddinfer/config.hpp"
#include "ddinfer/errors.hpp"
#include "ddinfer/truss.hpp"

namespace ddinfer {

namespace detail {

inline std::vector<std::pair<std::string, std::string>> section_entries(const Config& c, const std::string& section) {
  std::vector<std::pair<std::string, std::string>> out;
  const std::string prefix = section + ".";
  for (const auto& [k, v] : c.entries())
    if (k.rfind(prefix, 0) == 0) out.emplace_back(k.substr(prefix.size()), v);
  return out;
}

inline double number_or_throw(const std::string& tok, const std::string& where) {
  const auto v = parse_double(tok);
  if (!v) throw DomainError(where + ": '" + tok + "' is not a number");
  return *v;
}

}  // namespace detail

inline TrussModel truss_from_config(const Config& c) {
  TrussModel t;
  t.dim = static_cast<int>(c.get_int_or("truss.dim", 2));
  if (t.dim != 2 && t.dim != 3) throw DomainError("truss.dim must be 2 or 3");

  std::map<std::string, int> node_id;
  for (const auto& [name, value] : detail::section_entries(c, "nodes")) {
    const auto toks = detail::split_ws(value);
    if (static_cast<int>(toks.size()) != t.dim)
      throw DomainError("node '" + name + "' needs " + std::to_string(t.dim) + " coordinates");
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    for (int i = 0; i < t.dim; ++i) x[i] = detail::number_or_throw(toks[static_cast<std::size_t>(i)], "node '" + name + "'");
    node_id[name] = static_cast<int>(t.nodes.size());
    t.nodes.push_back(x);
  }
  auto node = [&](const std::string& name, const std::string& where) {
    auto it = node_id.find(name);
    if (it == node_id.end()) throw DomainError(where + " references unknown node '" + name + "'");
    return it->second;
  };

  std::map<std::string, int> bar_id;
  for (const auto& [name, value] : detail::section_entries(c, "bars")) {
    const auto toks = detail::split_ws(value);
    const std::string where = "bar '" + name + "'";
    if (toks.size() < 2) throw DomainError(where + " needs two node names");
    Bar b;
    b.a = node(toks[0], where);
    b.b = node(toks[1], where);
    bool unit_area = false;
    for (std::size_t i = 2; i < toks.size(); ++i) {
      const auto eq = toks[i].find('=');
      if (eq == std::string::npos) throw DomainError(where + ": expected key=value, got '" + toks[i] + "'");
      const std::string key = toks[i].substr(0, eq);
      const std::string val = toks[i].substr(eq + 1);
      if (key == "area") {
        if (val == "unit") unit_area = true;
        else b.area = detail::number_or_throw(val, where);
      } else if (key == "modulus") {
        b.modulus = detail::number_or_throw(val, where);
      } else {
        throw DomainError(where + ": unknown attribute '" + key + "'");
      }
    }
    if (unit_area) {
      const double len = (t.nodes[static_cast<std::size_t>(b.b)] - t.nodes[static_cast<std::size_t>(b.a)]).norm();
      if (!(len > 0.0)) throw DomainError(where + " has zero length");
      b.area = 1.0 / len;
    }
    bar_id[name] = static_cast<int>(t.bars.size());
    t.bars.push_back(b);
  }

  for (const auto& [name, value] : detail::section_entries(c, "supports")) {
    const int n = node(name, "support");
    for (const auto& tok : detail::split_ws(value)) {
      int comp = -1;
      if (tok == "x" || tok == "0") comp = 0;
      if (tok == "y" || tok == "1") comp = 1;
      if (tok == "z" || tok == "2") comp = 2;
      if (comp < 0 || comp >= t.dim) throw DomainError("support on '" + name + "': bad component '" + tok + "'");
      t.supports.push_back({n, comp});
    }
  }

  for (const auto& [name, value] : detail::section_entries(c, "loads")) {
    const auto toks = detail::split_ws(value);
    if (static_cast<int>(toks.size()) != t.dim)
      throw DomainError("load on '" + name + "' needs " + std::to_string(t.dim) + " components");
    NodalLoad l;
    l.node = node(name, "load");
    for (int i = 0; i < t.dim; ++i) l.force[i] = detail::number_or_throw(toks[static_cast<std::size_t>(i)], "load");
    t.loads.push_back(l);
  }

  const auto strains = detail::section_entries(c, "strains");
  if (!strains.empty()) {
    t.prescribed_strain.assign(t.bars.size(), 0.0);
    for (const auto& [name, value] : strains) {
      auto it = bar_id.find(name);
      if (it == bar_id.end()) throw DomainError("strain references unknown bar '" + name + "'");
      t.prescribed_strain[static_cast<std::size_t>(it->second)] = detail::number_or_throw(value, "strain");
    }
  }
  if (t.nodes.empty()) throw DomainError("truss has no nodes");
  return t;
}

inline TrussModel load_truss(const std::string& path) { return truss_from_config(Config::load(path)); }

}  // namespace ddinfer
