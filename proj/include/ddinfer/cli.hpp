#pragma once

// Command-line front end. run() is the whole program; main() only forwards.
//
//   ddinfer dd-solve --truss T --data D [--method exact|fixed-point]
//   ddinfer infer --mode random|deterministic --data D [--truss T] --beta B [--qoi Q]
//   ddinfer oracle truss --file T
//   ddinfer study converge|fail|sliding|shift [--config C] [--from-report R]
//   ddinfer kl --nu A --mu B
//   ddinfer validate-schedule [--beta0 ..] [--delta1 ..] [--ratio ..] [--horizon ..] [--exponent ..]
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddinfer/config.hpp"
#include "ddinfer/dataset.hpp"
#include "ddinfer/dd_solver.hpp"
#include "ddinfer/errors.hpp"
#include "ddinfer/harness.hpp"
#include "ddinfer/inference.hpp"
#include "ddinfer/measures.hpp"
#include "ddinfer/report.hpp"
#include "ddinfer/truss.hpp"
#include "ddinfer/truss_io.hpp"

namespace ddinfer::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Three bars meeting at one free node; two free dofs, one redundant bar.
/// Irrational support positions keep lattice points off the constraint set.
inline constexpr const char* kThreeBarTruss = R"([truss]
dim = 2

[nodes]
hub = 0 0
left = -1 1.2
mid = 0.35 1
right = 1.5 0.8

[bars]
b1 = left hub area=unit modulus=1
b2 = mid hub area=unit modulus=2
b3 = right hub area=unit modulus=1.5

[supports]
left = x y
mid = x y
right = x y

[loads]
hub = 0.5 -2
)";

// ---- study configuration -------------------------------------------------------

inline bool is_truss_study(const std::string& kind) { return kind == "converge" || kind == "fail"; }

inline void require_kind(const std::string& kind) {
  if (kind != "converge" && kind != "fail" && kind != "sliding" && kind != "shift")
    throw DomainError("unknown study kind '" + kind + "'");
}

/// Built-in settings for each study kind; a user config is layered on top.
inline Config default_study_config(const std::string& kind) {
  require_kind(kind);
  Config c;
  c.set("seed", "0");
  c.set("study.kind", kind);
  if (is_truss_study(kind)) {
    c.set("study.qoi", "u");
    c.set("schedule.beta0", "64");
    c.set("schedule.delta1", "1.4");
    c.set("schedule.ratio", "0.65");
    c.set("schedule.horizon", "6");
    c.set("schedule.exponent", kind == "fail" ? "4" : "1");
  } else {
    c.set("study.qoi", "moments");
    c.set("sliding.a1", "1");
    c.set("sliding.a2", "0");
    c.set("sliding.theta_over_pi", "0.5");
    c.set("schedule.beta0", "0.5");
    c.set("schedule.horizon", "4");
    c.set("schedule.exponent", "1");
    if (kind == "shift") {
      // lambda_h = 4 * 2^{h/2} against |u_h - v_h| = 2^{-h}
      c.set("schedule.beta1", "8");
      c.set("schedule.delta1", "0.4");
      c.set("schedule.ratio", "0.5");
      c.set("shift.scale", "1");
      c.set("shift.equal", "false");
    } else {
      c.set("schedule.beta1", "16");
      c.set("schedule.delta1", "0.25");
      c.set("schedule.ratio", "0.65");
    }
  }
  c.set("study.cut", "36");
  c.set("study.lattice_offset", "0.5");
  return c;
}

/// Copies every "model.*" entry, prefix removed.
inline Config model_subconfig(const Config& c) {
  Config m;
  for (const auto& [k, v] : c.entries())
    if (k.rfind("model.", 0) == 0) m.set(k.substr(6), v);
  return m;
}

inline bool has_model(const Config& c) {
  for (const auto& [k, v] : c.entries())
    if (k.rfind("model.", 0) == 0) return true;
  return false;
}

/// Reads DDINFER_SEED, if set.
inline std::optional<std::string> seed_from_env() {
  const char* s = std::getenv("DDINFER_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  std::uint64_t v = 0;
  const std::string str(s);
  const auto [p, ec] = std::from_chars(str.data(), str.data() + str.size(), v);
  if (ec != std::errc() || p != str.data() + str.size()) throw DomainError("DDINFER_SEED must be an unsigned integer");
  return str;
}

/// Self-contained config: defaults, then `user`, truss file inlined under
/// "model.", seed override applied.
inline Config resolve_study_config(const std::string& kind, const Config& user,
                                   const std::filesystem::path& base_dir = {},
                                   const std::optional<std::string>& seed_override = std::nullopt) {
  require_kind(kind);
  Config c = default_study_config(kind);
  std::optional<std::string> truss_file;
  for (const auto& [k, v] : user.entries()) {
    if (k == "truss.file") {
      truss_file = v;
      continue;
    }
    if (k == "study.kind" && v != kind)
      throw DomainError("config is for study kind '" + v + "', not '" + kind + "'");
    c.set(k, v);
  }
  if (is_truss_study(kind) && !has_model(c)) {
    const Config t = truss_file ? Config::load((base_dir / *truss_file).string()) : Config::parse(kThreeBarTruss);
    for (const auto& [k, v] : t.entries()) c.set("model." + k, v);
  }
  if (seed_override) c.set("seed", *seed_override);
  (void)c.get_u64("seed");  // validate
  return c;
}

inline QuenchSchedule schedule_from_config(const Config& c) {
  std::optional<double> beta1;
  if (c.has("schedule.beta1")) beta1 = c.get_double("schedule.beta1");
  return QuenchSchedule::geometric(c.get_double("schedule.beta0"), c.get_double("schedule.delta1"),
                                   c.get_double("schedule.ratio"), static_cast<int>(c.get_int("schedule.horizon")),
                                   c.get_double_or("schedule.exponent", 1.0), beta1);
}

inline SlidingGaussian sliding_from_config(const Config& c) {
  return SlidingGaussian::rotated(c.get_double("sliding.a1"), c.get_double("sliding.a2"),
                                  c.get_double("sliding.theta_over_pi") * std::numbers::pi);
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw DomainError("config key '" + key + "' must be true or false");
}

/// Shift pairs for level h = 1..H: u_h = scale 2^{-h} (1, 1) / sqrt 2, v_h = u_h or 0.
inline std::vector<std::pair<Vec, Vec>> shifts_from_config(const Config& c, int horizon) {
  const double scale = c.get_double("shift.scale");
  const bool equal = parse_bool(c.get_or("shift.equal", "false"), "shift.equal");
  std::vector<std::pair<Vec, Vec>> out;
  for (int h = 1; h <= horizon; ++h) {
    const double m = scale * std::pow(2.0, -h) / std::numbers::sqrt2;
    Vec u(2);
    u << m, m;
    out.emplace_back(u, equal ? u : Vec(Vec::Zero(2)));
  }
  return out;
}

inline ExperimentReport run_study(const Config& c) {
  const std::string kind = c.get("study.kind");
  require_kind(kind);
  const QuenchSchedule schedule = schedule_from_config(c);
  if (is_truss_study(kind)) {
    DetTrussStudy st;
    st.truss = truss_from_config(model_subconfig(c));
    st.schedule = schedule;
    st.qoi = c.get("study.qoi");
    st.cut = c.get_double("study.cut");
    st.lattice_offset = c.get_double("study.lattice_offset");
    ExperimentReport r = run_convergence_study(st);
    r.kind = kind;
    return r;
  }
  const SlidingGaussian model = sliding_from_config(c);
  if (kind == "shift") {
    ExperimentReport r = shifting_error_experiment(model, shifts_from_config(c, schedule.horizon()), schedule,
                                                   c.get("study.qoi"));
    return r;
  }
  SlidingStudy st;
  st.model = model;
  st.schedule = schedule;
  st.qoi = c.get("study.qoi");
  st.cut = c.get_double("study.cut");
  st.lattice_offset = c.get_double("study.lattice_offset");
  return run_convergence_study(st);
}

inline Json study_document(const Config& c, const ExperimentReport& r);

/// Full report document for a resolved study config.
inline Json study_document(const Config& c) { return study_document(c, run_study(c)); }

inline Json study_document(const Config& c, const ExperimentReport& r) {
  Json doc;
  doc["command"] = "study";
  doc["seed"] = c.get_u64("seed");
  doc["config"] = to_json(c);
  const QuenchSchedule s = schedule_from_config(c);
  if (s.horizon() >= 3) doc["schedule_validation"] = to_json(schedule_validate(s));
  doc["result"] = to_json(r);
  return doc;
}

// ---- quantities of interest ----------------------------------------------------

/// "const", "const:c", "z:k" (k-th coordinate of z, 1-based), "z2:k" (its square),
/// "y:k" (paired data only).
inline QuantityOfInterest parse_qoi(const std::string& spec, Eigen::Index dim) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "const") {
    double v = 1.0;
    if (!arg.empty()) {
      const auto p = parse_double(arg);
      if (!p) throw DomainError("bad constant in quantity of interest '" + spec + "'");
      v = *p;
    }
    return QuantityOfInterest::constant(v);
  }
  std::int64_t k = 0;
  const auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), k);
  if (arg.empty() || ec != std::errc() || p != arg.data() + arg.size() || k < 1 || k > dim)
    throw DomainError("quantity of interest '" + spec + "' needs an index in 1.." + std::to_string(dim));
  const Eigen::Index i = k - 1;
  if (head == "z") {
    Vec grad = Vec::Zero(dim);
    grad[i] = 1.0;
    return QuantityOfInterest::linear(spec, grad);
  }
  if (head == "z2") return QuantityOfInterest::of_z(spec, [i](const Vec& z) { return z[i] * z[i]; });
  if (head == "y") return QuantityOfInterest::of_pair(spec, [i](const Vec& y, const Vec&) { return y[i]; });
  throw DomainError("unknown quantity of interest '" + spec + "'");
}

// ---- dispatch --------------------------------------------------------------------

namespace detail {

inline void emit(const Json& doc, const std::string& out_dir, std::ostream& out) {
  const std::string text = dump(doc);
  if (!out_dir.empty()) write_text(std::filesystem::path(out_dir) / "report.json", text);
  out << text;
}

inline Json solution_json(const DDSolution& s) {
  Json o;
  o["y_star"] = to_json(s.y_star.vec());
  o["z_star"] = to_json(s.z_star.vec());
  o["distance"] = s.distance;
  o["iterations"] = s.iterations;
  o["converged"] = s.converged;
  o["index"] = s.index;
  return o;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Data-driven inference for linear-elastic trusses and likelihood measures", "ddinfer"};
  app.require_subcommand(1);

  std::string truss_path, data_path, method = "exact", out_dir;
  int max_iter = 100;
  auto* dd = app.add_subcommand("dd-solve", "closest data point to the constraint set");
  dd->add_option("--truss", truss_path, "truss description file")->required()->check(CLI::ExistingFile);
  dd->add_option("--data", data_path, "material data CSV")->required()->check(CLI::ExistingFile);
  dd->add_option("--method", method, "exact or fixed-point")->check(CLI::IsMember({"exact", "fixed-point"}));
  dd->add_option("--max-iter", max_iter, "fixed-point iteration cap")->check(CLI::PositiveNumber);
  dd->add_option("--out", out_dir, "output directory");

  std::string mode, qoi_spec = "const", quad_kind = "auto";
  double beta = 1.0;
  int order = 8;
  std::int64_t samples = 10000;
  std::uint64_t seed = 0;
  auto* inf = app.add_subcommand("infer", "thermalized expectation from a dataset");
  inf->add_option("--mode", mode, "random or deterministic")
      ->required()
      ->check(CLI::IsMember({"random", "deterministic"}));
  inf->add_option("--data", data_path, "dataset CSV")->required()->check(CLI::ExistingFile);
  inf->add_option("--truss", truss_path, "truss description file (metric and constraint set)")
      ->check(CLI::ExistingFile);
  inf->add_option("--beta", beta, "thermalization parameter")->required();
  inf->add_option("--qoi", qoi_spec, "const[:c], z:k, z2:k or y:k");
  inf->add_option("--quadrature", quad_kind, "auto, gh or mc")->check(CLI::IsMember({"auto", "gh", "mc"}));
  inf->add_option("--order", order, "Gauss-Hermite points per direction");
  inf->add_option("--samples", samples, "Monte Carlo samples");
  inf->add_option("--seed", seed, "Monte Carlo seed");
  inf->add_option("--out", out_dir, "output directory");

  std::string oracle_what, oracle_file;
  auto* orc = app.add_subcommand("oracle", "closed-form reference values");
  orc->add_option("what", oracle_what, "truss")->required()->check(CLI::IsMember({"truss"}));
  orc->add_option("--file", oracle_file, "truss description file")->required()->check(CLI::ExistingFile);
  orc->add_option("--out", out_dir, "output directory");

  std::string study_kind, config_path, from_report;
  auto* st = app.add_subcommand("study", "convergence studies");
  st->add_option("kind", study_kind, "converge, fail, sliding or shift")
      ->check(CLI::IsMember({"converge", "fail", "sliding", "shift"}));
  st->add_option("--config", config_path, "study config")->check(CLI::ExistingFile);
  st->add_option("--from-report", from_report, "rerun the config embedded in a report.json")
      ->check(CLI::ExistingFile)
      ->excludes("--config");
  st->add_option("--out", out_dir, "output directory");

  std::string nu_path, mu_path;
  auto* kl = app.add_subcommand("kl", "relative entropy of two discrete measures");
  kl->add_option("--nu", nu_path, "dataset CSV of nu")->required()->check(CLI::ExistingFile);
  kl->add_option("--mu", mu_path, "dataset CSV of mu")->required()->check(CLI::ExistingFile);

  double vs_beta0 = 64, vs_delta1 = 1.4, vs_ratio = 0.65, vs_exponent = 1;
  int vs_horizon = 6;
  std::optional<double> vs_beta1;
  auto* vs = app.add_subcommand("validate-schedule", "check that lambda_h delta_h decays");
  vs->add_option("--beta0", vs_beta0, "reference inverse temperature");
  vs->add_option("--beta1", vs_beta1, "first-level inverse temperature (default beta0)");
  vs->add_option("--delta1", vs_delta1, "first-level resolution");
  vs->add_option("--ratio", vs_ratio, "resolution ratio between levels");
  vs->add_option("--horizon", vs_horizon, "number of levels");
  vs->add_option("--exponent", vs_exponent, "beta_h grows as delta_h^-exponent");
  vs->add_option("--config", config_path, "take the schedule from a study config")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*dd) {
      const TrussModel t = load_truss(truss_path);
      const AffineSubspace e = build_constraint_set(t);
      const Dataset data = read_dataset(data_path, e.metric().dim());
      if (data.paired()) throw DomainError("dd-solve needs material-only data");
      if (data.size() == 0) throw DomainError("empty data set");
      const MaterialPointSet pts = MaterialPointSet::from_global(data.y);
      const DDSolution s = method == "exact" ? dd_solve_exact(pts, e) : dd_solve_fixed_point(pts, e, std::nullopt, max_iter);
      Json doc;
      doc["command"] = "dd-solve";
      doc["config"] = {{"truss", truss_path}, {"data", data_path}, {"method", method}};
      doc["result"] = detail::solution_json(s);
      detail::emit(doc, out_dir, out);
      return kExitOk;
    }

    if (*inf) {
      if (const auto env = seed_from_env()) seed = std::stoull(*env);
      QuadratureMethod quad;
      quad.kind = quad_kind == "gh"   ? QuadratureMethod::Kind::gauss_hermite
                  : quad_kind == "mc" ? QuadratureMethod::Kind::monte_carlo
                                      : QuadratureMethod::Kind::automatic;
      quad.order = order;
      quad.samples = samples;
      quad.seed = seed;
      const ThermalizationParams p(beta);
      const Dataset data = read_dataset(data_path);
      InferenceResult res;
      if (mode == "deterministic") {
        if (truss_path.empty()) throw DomainError("deterministic loading needs --truss");
        const AffineSubspace e = build_constraint_set(load_truss(truss_path));
        if (data.size() == 0) throw DomainError("empty data set");
        if (data.paired()) throw DomainError("deterministic loading needs material-only data");
        res = expect_det_loading(data.measure(), e, parse_qoi(qoi_spec, e.metric().dim()), p, quad);
      } else {
        if (data.size() == 0) throw DomainError("empty data set");
        const Metric g = truss_path.empty() ? Metric::euclidean(static_cast<int>(data.y.rows() / 2))
                                            : truss_metric(load_truss(truss_path));
        res = expect_random_loading(data.measure(), parse_qoi(qoi_spec, g.dim()), p, g);
      }
      Json doc;
      doc["command"] = "infer";
      doc["seed"] = seed;
      doc["config"] = {{"mode", mode},  {"data", data_path},        {"truss", truss_path},
                       {"beta", beta},  {"qoi", qoi_spec},          {"quadrature", quad_kind},
                       {"order", order}, {"samples", samples}};
      Json r;
      r["expectation"] = res.expectation;
      r["total_variation"] = res.total_variation;
      r["log_total_variation"] = res.log_total_variation;
      r["effective_sample_size"] = res.effective_sample_size;
      r["degenerate"] = res.degenerate;
      doc["result"] = r;
      if (!out_dir.empty()) write_dataset((std::filesystem::path(out_dir) / "dataset.csv").string(), data);
      detail::emit(doc, out_dir, out);
      return kExitOk;
    }

    if (*orc) {
      const GaussianTrussOracle o = truss_oracle(load_truss(oracle_file));
      Json doc;
      doc["command"] = "oracle";
      doc["config"] = {{"what", oracle_what}, {"file", oracle_file}};
      Json r;
      r["u_bar"] = to_json(o.mean_u);
      r["v_bar"] = to_json(o.mean_v);
      r["normalization"] = o.normalization;
      r["hausdorff_normalization"] = o.hausdorff_normalization();
      r["jacobian"] = o.jacobian;
      doc["result"] = r;
      detail::emit(doc, out_dir, out);
      return kExitOk;
    }

    if (*st) {
      Config resolved;
      if (!from_report.empty()) {
        Json prev;
        try {
          prev = Json::parse(read_text(from_report));
        } catch (const Json::exception& e) {
          throw ParseError(std::string("report is not valid JSON: ") + e.what());
        }
        if (!prev.contains("config")) throw ParseError("report has no embedded config");
        const Config embedded = config_from_json(prev["config"]);
        const std::string kind = embedded.get("study.kind");
        if (!study_kind.empty() && study_kind != kind)
          throw DomainError("report is for study kind '" + kind + "', not '" + study_kind + "'");
        resolved = resolve_study_config(kind, embedded, {}, seed_from_env());
      } else {
        const Config user = config_path.empty() ? Config() : Config::load(config_path);
        std::string kind = study_kind;
        if (kind.empty()) kind = user.get_or("study.kind", "");
        if (kind.empty()) {
          err << "error: study kind required (positional or study.kind in --config)\n\n" << st->help();
          return kExitUsage;
        }
        const auto base = config_path.empty() ? std::filesystem::path() : std::filesystem::path(config_path).parent_path();
        resolved = resolve_study_config(kind, user, base, seed_from_env());
      }
      const ExperimentReport r = run_study(resolved);
      const Json doc = study_document(resolved, r);
      if (!out_dir.empty()) {
        write_text(std::filesystem::path(out_dir) / "levels.csv", levels_csv(r));
        write_text(std::filesystem::path(out_dir) / "config.ini", resolved.to_text());
      }
      detail::emit(doc, out_dir, out);
      const Json& res = doc["result"];
      err << "verdict: " << res["verdict"].get<std::string>();
      if (!res["converging"].get<bool>()) err << " (" << res["verdict_reason"].get<std::string>() << ")";
      err << "\n";
      return kExitOk;
    }

    if (*kl) {
      const EmpiricalMeasure nu = parse_dataset(nu_path);
      const EmpiricalMeasure mu = parse_dataset(mu_path);
      Json doc;
      doc["command"] = "kl";
      doc["config"] = {{"nu", nu_path}, {"mu", mu_path}};
      doc["result"] = {{"kl", kl_divergence(nu, mu)}};
      out << dump(doc);
      return kExitOk;
    }

    if (*vs) {
      QuenchSchedule s;
      if (!config_path.empty()) {
        const Config user = Config::load(config_path);
        const std::string kind = user.get_or("study.kind", "converge");
        s = schedule_from_config(resolve_study_config(kind, user, std::filesystem::path(config_path).parent_path()));
      } else {
        s = QuenchSchedule::geometric(vs_beta0, vs_delta1, vs_ratio, vs_horizon, vs_exponent, vs_beta1);
      }
      const ScheduleValidation v = schedule_validate(s);
      Json doc;
      doc["command"] = "validate-schedule";
      doc["result"] = to_json(v);
      out << dump(doc);
      if (!v.valid) {
        err << v.reason << "\n";
        return kExitDomain;
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace ddinfer::cli
