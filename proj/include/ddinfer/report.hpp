#pragma once

// Report emission: report.json (resolved config, seed, results) and a
// plot-ready levels.csv. No timestamps or timings go into either file, so a
// rerun with the same config reproduces them byte for byte.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ddinfer/config.hpp"
#include "ddinfer/errors.hpp"
#include "ddinfer/harness.hpp"

namespace ddinfer {

using Json = nlohmann::ordered_json;

inline Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json to_json(const Config& c) {
  Json o = Json::object();
  for (const auto& [k, v] : c.entries()) o[k] = v;
  return o;
}

inline Config config_from_json(const Json& o) {
  if (!o.is_object()) throw ParseError("embedded config must be an object");
  Config c;
  for (const auto& [k, v] : o.items()) {
    if (!v.is_string()) throw ParseError("embedded config value for '" + k + "' must be a string");
    c.set(k, v.get<std::string>());
  }
  return c;
}

inline Json to_json(const ScheduleValidation& v) {
  Json o;
  o["valid"] = v.valid;
  o["slope"] = v.slope;
  o["limit_estimate"] = v.limit_estimate;
  Json ld = Json::array();
  for (double x : v.lambda_delta) ld.push_back(x);
  o["lambda_delta"] = ld;
  o["reason"] = v.reason;
  return o;
}

inline Json to_json(const ExperimentReport& r) {
  Json o;
  o["kind"] = r.kind;
  o["components"] = r.components;
  o["converging"] = r.converging;
  o["verdict"] = r.converging ? "converging" : "not converging";
  o["verdict_reason"] = r.verdict_reason;
  Json s = Json::object();
  for (const auto& [k, v] : r.scalars) s[k] = v;
  o["scalars"] = s;
  Json levels = Json::array();
  for (const auto& l : r.levels) {
    Json j;
    j["h"] = l.h;
    j["beta"] = l.beta;
    j["delta"] = l.delta;
    j["lambda_delta"] = l.lambda_delta;
    j["expectation"] = to_json(l.expectation);
    j["reference"] = to_json(l.reference);
    j["abs_err"] = l.abs_err;
    j["rel_err"] = l.rel_err;
    j["ess"] = l.ess;
    j["tv"] = l.tv;
    j["points"] = l.points;
    j["degenerate"] = l.degenerate;
    levels.push_back(j);
  }
  o["levels"] = levels;
  return o;
}

/// Header: h,beta,delta,lambda_delta,expectation,reference,abs_err,rel_err,ess,tv
/// then one expectation/reference pair per component. `expectation` and
/// `reference` hold the first component.
inline std::string levels_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "h,beta,delta,lambda_delta,expectation,reference,abs_err,rel_err,ess,tv";
  for (const auto& name : r.components) out << ",E_" << name << ",ref_" << name;
  out << "\n";
  for (const auto& l : r.levels) {
    const bool has = l.expectation.size() > 0;
    out << l.h << "," << format_double(l.beta) << "," << format_double(l.delta) << ","
        << format_double(l.lambda_delta) << "," << (has ? format_double(l.expectation[0]) : "nan") << ","
        << (l.reference.size() > 0 ? format_double(l.reference[0]) : "nan") << "," << format_double(l.abs_err)
        << "," << format_double(l.rel_err) << "," << format_double(l.ess) << "," << format_double(l.tv);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(r.components.size()); ++k) {
      out << "," << (k < l.expectation.size() ? format_double(l.expectation[k]) : "nan") << ","
          << (k < l.reference.size() ? format_double(l.reference[k]) : "nan");
    }
    out << "\n";
  }
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace ddinfer
