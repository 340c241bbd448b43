#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>

#include <sys/wait.h>

#include "ddinfer/cli.hpp"

using namespace ddinfer;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("ddinfer_cli_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "ddinfer");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string config_file(const std::string& name) { return (fs::path(DDINFER_SOURCE_DIR) / "configs" / name).string(); }

/// Restores DDINFER_SEED on scope exit.
struct SeedEnv {
  explicit SeedEnv(const char* value) {
    if (const char* old = std::getenv("DDINFER_SEED")) saved = old;
    if (value) setenv("DDINFER_SEED", value, 1);
    else unsetenv("DDINFER_SEED");
  }
  ~SeedEnv() {
    if (saved) setenv("DDINFER_SEED", saved->c_str(), 1);
    else unsetenv("DDINFER_SEED");
  }
  std::optional<std::string> saved;
};

}  // namespace

TEST(ReadDataset, SingleMaterialRow) {
  std::istringstream in("c,y_1,y_2\n1,0,0\n");
  const Dataset d = read_dataset(in, 2);
  EXPECT_FALSE(d.paired());
  ASSERT_EQ(d.size(), 1);
  EXPECT_EQ(d.c[0], 1.0);
  EXPECT_EQ(d.y.col(0), Vec(Vec::Zero(2)));
  const auto mu = d.measure();
  EXPECT_FALSE(mu.is_paired());
  EXPECT_EQ(mu.weights()[0], 1.0);
}

TEST(ReadDataset, PairedRowsKeepOrderAndWeights) {
  std::istringstream in("c,y_1,y_2,z_1,z_2\n0.5,1,2,3,4\n2,-1,-2,-3,-4\n");
  const Dataset d = read_dataset(in, 2);
  ASSERT_TRUE(d.paired());
  ASSERT_EQ(d.size(), 2);
  EXPECT_EQ(d.c[0], 0.5);
  EXPECT_EQ(d.c[1], 2.0);
  EXPECT_EQ(d.y(1, 0), 2.0);
  EXPECT_EQ(d.z(0, 1), -3.0);
  // header-only inference of the layout
  std::istringstream again("c,y_1,y_2,z_1,z_2\n0.5,1,2,3,4\n");
  EXPECT_TRUE(read_dataset(again).paired());
}

TEST(ReadDataset, ErrorsNameTheLine) {
  const auto expect_line = [](const std::string& text, long line, Eigen::Index dim = 2) {
    std::istringstream in(text);
    try {
      (void)read_dataset(in, dim);
      ADD_FAILURE() << "no error for: " << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
      EXPECT_NE(std::string(e.what()).find("line " + std::to_string(line)), std::string::npos);
    }
  };
  expect_line("c,y_1,y_2\n1,0,0\n1,nan,0\n", 3);
  expect_line("c,y_1,y_2\n1,0,0\n1,0\n", 3);
  expect_line("c,y_1,y_2\n-1,0,0\n", 2);
  expect_line("c,y_1,y_2\n1,abc,0\n", 2);
  expect_line("c,y_1,y_2,y_3\n1,0,0,0\n", 1);
  expect_line("x,y_1,y_2\n", 1);
  expect_line("c,y_1,y_2\n1,inf,0\n", 2);
}

TEST(WriteDataset, RoundTripIsBitExact) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g(0.0, 1e3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (bool paired : {false, true}) {
    Dataset d;
    d.y.resize(4, 100);
    d.c.resize(100);
    if (paired) d.z.resize(4, 100);
    for (int j = 0; j < 100; ++j) {
      d.c[j] = j == 0 ? 0.0 : u(rng) * std::pow(10.0, j % 40 - 20);
      for (int i = 0; i < 4; ++i) {
        d.y(i, j) = g(rng) * std::pow(10.0, (i * j) % 30 - 15);
        if (paired) d.z(i, j) = std::nextafter(d.y(i, j), 1e300);
      }
    }
    d.y(0, 1) = 5e-324;
    d.y(1, 1) = -0.0;
    std::stringstream buf;
    write_dataset(buf, d);
    const Dataset back = read_dataset(buf, 4);
    EXPECT_EQ(back.paired(), paired);
    EXPECT_EQ(back.c, d.c);
    EXPECT_EQ(back.y, d.y);
    if (paired) {
      EXPECT_EQ(back.z, d.z);
    }
    EXPECT_TRUE(std::signbit(back.y(1, 1)));
  }
}

TEST(Config, SectionsCommentsAndTypes) {
  const Config c = Config::parse("top = 1\n# comment\n[schedule]\nbeta0 = 64 ; trailing\nlist = 1 2 3.5\n\n[study]\nkind=converge\n");
  EXPECT_EQ(c.get("top"), "1");
  EXPECT_EQ(c.get_double("schedule.beta0"), 64.0);
  EXPECT_EQ(c.get_doubles("schedule.list"), (std::vector<double>{1, 2, 3.5}));
  EXPECT_EQ(c.get("study.kind"), "converge");
  EXPECT_EQ(c.get_int_or("missing", 7), 7);
  EXPECT_THROW((void)c.get("missing"), Error);
  EXPECT_THROW((void)c.get_double("study.kind"), Error);
  EXPECT_EQ(Config::parse(c.to_text()), c);
}

TEST(Config, MalformedLines) {
  try {
    (void)Config::parse("[a]\nx = 1\nx = 2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(Config::parse("[a\n"), ParseError);
  EXPECT_THROW(Config::parse("novalue\n"), ParseError);
}

TEST(TrussFile, ThreeBarMatchesBuiltIn) {
  const TrussModel file = load_truss(config_file("three_bar.truss"));
  const TrussModel built = truss_from_config(Config::parse(cli::kThreeBarTruss));
  ASSERT_EQ(file.members(), 3);
  EXPECT_EQ(assemble_B(file).entries, assemble_B(built).entries);
  EXPECT_EQ(assemble_load(file), assemble_load(built));
  // area=unit gives unit weights
  for (double w : truss_geometry(file).weights) EXPECT_NEAR(w, 1.0, 1e-15);
}

TEST(TrussFile, Errors) {
  EXPECT_THROW(truss_from_config(Config::parse("[nodes]\na = 0 0\n[bars]\nb = a missing modulus=1\n")), Error);
  EXPECT_THROW(truss_from_config(Config::parse("[nodes]\na = 0 zero\n")), Error);
}

TEST(Cli, ValidateScheduleFastQuench) {
  const CliResult r = cli_run({"validate-schedule", "--beta0", "1", "--beta1", "16", "--delta1", "0.5", "--ratio", "0.5",
                         "--horizon", "6", "--exponent", "4"});
  EXPECT_EQ(r.code, cli::kExitDomain);
  EXPECT_NE(r.err.find("quench too fast"), std::string::npos);
  const CliResult ok = cli_run({"validate-schedule", "--beta0", "1", "--beta1", "2", "--delta1", "0.5", "--ratio", "0.5",
                          "--horizon", "6", "--exponent", "1"});
  EXPECT_EQ(ok.code, cli::kExitOk);
  EXPECT_TRUE(Json::parse(ok.out)["result"]["valid"].get<bool>());
  EXPECT_EQ(cli_run({"validate-schedule", "--config", config_file("fail.ini")}).code, cli::kExitDomain);
  EXPECT_EQ(cli_run({"validate-schedule", "--config", config_file("converge.ini")}).code, cli::kExitOk);
}

TEST(Cli, OracleTrussReport) {
  const CliResult r = cli_run({"oracle", "truss", "--file", config_file("three_bar.truss")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const Json doc = Json::parse(r.out);
  const auto o = truss_oracle(load_truss(config_file("three_bar.truss")));
  ASSERT_EQ(doc["result"]["u_bar"].size(), 2u);
  EXPECT_EQ(doc["result"]["u_bar"][0].get<double>(), o.mean_u[0]);
  EXPECT_EQ(doc["result"]["u_bar"][1].get<double>(), o.mean_u[1]);
  EXPECT_EQ(doc["result"]["v_bar"][0].get<double>(), o.mean_v[0]);
  EXPECT_EQ(doc["result"]["normalization"].get<double>(), o.normalization);
}

TEST(Cli, InferEmptyDataset) {
  const fs::path dir = scratch("empty");
  write_text(dir / "empty.csv", "c,y_1,y_2,y_3,y_4,y_5,y_6\n");
  const CliResult r = cli_run({"infer", "--mode", "deterministic", "--data", (dir / "empty.csv").string(), "--truss",
                         config_file("three_bar.truss"), "--beta", "2"});
  EXPECT_EQ(r.code, cli::kExitDomain);
  EXPECT_NE(r.err.find("empty data set"), std::string::npos);
}

TEST(Cli, InferRandomTwoPairs) {
  const fs::path dir = scratch("two_pairs");
  write_text(dir / "d.csv", "c,y_1,y_2,z_1,z_2\n1,0,0,0,0\n1,0,0,1,0\n");
  // f = z_1 takes 0 and 1; weights 1 and 1/2 at beta = ln 2
  const CliResult r = cli_run({"infer", "--mode", "random", "--data", (dir / "d.csv").string(), "--beta",
                         format_double(std::log(2.0)), "--qoi", "z:1", "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NEAR(Json::parse(r.out)["result"]["expectation"].get<double>(), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(read_text(dir / "out" / "dataset.csv"), read_text(dir / "d.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
}

TEST(Cli, DdSolveExact) {
  const fs::path dir = scratch("dd");
  const TrussModel t = load_truss(config_file("three_bar.truss"));
  const AffineSubspace e = build_constraint_set(t);
  Dataset d;
  d.y = Mat::Random(6, 30);
  d.c = Vec::Ones(30);
  write_dataset((dir / "d.csv").string(), d);
  const CliResult r = cli_run({"dd-solve", "--truss", config_file("three_bar.truss"), "--data", (dir / "d.csv").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto sol = dd_solve_exact(MaterialPointSet::from_global(read_dataset((dir / "d.csv").string(), 6).y), e);
  const Json doc = Json::parse(r.out);
  EXPECT_EQ(doc["result"]["index"].get<Eigen::Index>(), sol.index);
  EXPECT_EQ(doc["result"]["distance"].get<double>(), sol.distance);
}

TEST(Cli, KlExamples) {
  const fs::path dir = scratch("kl");
  write_text(dir / "mu.csv", "c,y_1,y_2\n0.5,0,0\n0.5,1,0\n");
  write_text(dir / "nu.csv", "c,y_1,y_2\n1,0,0\n1,1,0\n");
  write_text(dir / "off.csv", "c,y_1,y_2\n1,0,0\n1,2,0\n");
  const CliResult same = cli_run({"kl", "--nu", (dir / "mu.csv").string(), "--mu", (dir / "mu.csv").string()});
  EXPECT_EQ(Json::parse(same.out)["result"]["kl"].get<double>(), 0.0);
  const CliResult twice = cli_run({"kl", "--nu", (dir / "nu.csv").string(), "--mu", (dir / "mu.csv").string()});
  EXPECT_NEAR(Json::parse(twice.out)["result"]["kl"].get<double>(), 2 * std::log(2.0) - 1, 1e-15);
  const CliResult off = cli_run({"kl", "--nu", (dir / "off.csv").string(), "--mu", (dir / "mu.csv").string()});
  EXPECT_EQ(off.code, cli::kExitOk);
  EXPECT_TRUE(Json::parse(off.out)["result"]["kl"].is_null());  // +inf has no JSON number
}

TEST(Cli, UsageErrors) {
  const CliResult unknown = cli_run({"frobnicate"});
  EXPECT_EQ(unknown.code, cli::kExitUsage);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos);
  const CliResult flag = cli_run({"validate-schedule", "--no-such-flag"});
  EXPECT_EQ(flag.code, cli::kExitUsage);
  EXPECT_EQ(cli_run({"infer", "--mode", "sideways", "--data", config_file("three_bar.truss"), "--beta", "1"}).code,
            cli::kExitUsage);
  EXPECT_EQ(cli_run({"study"}).code, cli::kExitUsage);
  EXPECT_EQ(cli_run({"study", "nonsense"}).code, cli::kExitUsage);
}

TEST(Cli, ParseErrorIsDomainExit) {
  const fs::path dir = scratch("nan");
  write_text(dir / "bad.csv", "c,y_1,y_2,z_1,z_2\n1,0,0,0,0\n1,nan,0,0,0\n");
  const CliResult r = cli_run({"infer", "--mode", "random", "--data", (dir / "bad.csv").string(), "--beta", "1"});
  EXPECT_EQ(r.code, cli::kExitDomain);
  EXPECT_NE(r.err.find("line 3"), std::string::npos);
}

TEST(Cli, SeedFromEnvironment) {
  {
    SeedEnv env("42");
    const Config c = cli::resolve_study_config("sliding", Config(), {}, cli::seed_from_env());
    EXPECT_EQ(c.get_u64("seed"), 42u);
  }
  {
    SeedEnv env("not-a-number");
    EXPECT_THROW(cli::seed_from_env(), DomainError);
  }
  {
    SeedEnv env(nullptr);
    EXPECT_FALSE(cli::seed_from_env().has_value());
    EXPECT_EQ(cli::resolve_study_config("sliding", Config()).get_u64("seed"), 0u);
  }
}

TEST(Cli, StudyKindMismatchRejected) {
  EXPECT_THROW(cli::resolve_study_config("fail", Config::load(config_file("converge.ini")), fs::path(DDINFER_SOURCE_DIR) / "configs"),
               DomainError);
}

TEST(Cli, StudyRerunFromReportIsBitIdentical) {
  const fs::path dir = scratch("rerun");
  const CliResult first = cli_run({"study", "sliding", "--config", config_file("sliding.ini"), "--out", (dir / "a").string()});
  ASSERT_EQ(first.code, cli::kExitOk) << first.err;
  EXPECT_NE(first.err.find("verdict: converging"), std::string::npos);
  const CliResult second =
      cli_run({"study", "--from-report", (dir / "a" / "report.json").string(), "--out", (dir / "b").string()});
  ASSERT_EQ(second.code, cli::kExitOk) << second.err;
  for (const char* f : {"report.json", "levels.csv", "config.ini"})
    EXPECT_EQ(read_text(dir / "a" / f), read_text(dir / "b" / f)) << f;
  const Json doc = Json::parse(read_text(dir / "a" / "report.json"));
  EXPECT_EQ(doc["seed"].get<std::uint64_t>(), 0u);
  EXPECT_EQ(doc["config"]["study.kind"].get<std::string>(), "sliding");
  // levels.csv: header plus one row per level
  const std::string csv = read_text(dir / "a" / "levels.csv");
  EXPECT_EQ(csv.rfind("h,beta,delta,lambda_delta,expectation,reference,abs_err,rel_err,ess,tv", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + doc["result"]["levels"].size());
}

TEST(Cli, BinaryExitCodes) {
  const std::string exe = DDINFER_CLI;
  const auto status = [&](const std::string& args) {
    const int s = std::system((exe + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status("validate-schedule"), 0);
  EXPECT_EQ(status("validate-schedule --exponent 4 --ratio 0.5"), 1);
  EXPECT_EQ(status("--bogus"), 2);
  EXPECT_EQ(status("oracle truss --file " + config_file("three_bar.truss")), 0);
}
