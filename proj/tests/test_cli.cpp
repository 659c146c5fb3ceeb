#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <vector>

#include "cli.hpp"

using namespace cpdemod;
using namespace cpdemod::cli;

namespace {

struct Argv {
  explicit Argv(std::vector<std::string> a) : args(std::move(a)) {
    args.insert(args.begin(), "cpdemod");
    for (auto& s : args) ptrs.push_back(s.c_str());
  }
  int argc() const { return static_cast<int>(ptrs.size()); }
  const char* const* argv() const { return ptrs.data(); }
  std::vector<std::string> args;
  std::vector<const char*> ptrs;
};

CliArgs parse(std::vector<std::string> a) {
  Argv v(std::move(a));
  return parse_args(v.argc(), v.argv());
}

int run(std::vector<std::string> a, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  Argv v(std::move(a));
  std::ostringstream out, err;
  const int code = run_cli(v.argc(), v.argv(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

// Every "set={...}" printed by the frame command.
std::vector<std::string> printed_sets(const std::string& text) {
  std::vector<std::string> sets;
  const std::regex re(R"(set=(\{[0-9,]*\}))");
  for (std::sregex_iterator it(text.begin(), text.end(), re), end; it != end; ++it) sets.push_back((*it)[1]);
  return sets;
}

}  // namespace

TEST_CASE("defaults reproduce the reference experiment") {
  unsetenv("CONFORMAL_DEMOD_SEED");
  const CliArgs a = parse({});
  CHECK(a.command == Command::run);
  CHECK(a.config.snr_db == 5.0);
  CHECK(a.config.alpha == 0.1);
  CHECK(a.config.n_test == 100);
  CHECK(a.config.n_frames == 50);
  CHECK(a.config.n_pilots_grid == std::vector<std::size_t>{10, 20, 40, 60});
  CHECK(a.config.methods.size() == 4);
  CHECK(a.config.learners.size() == 2);
  CHECK_FALSE(a.config.k_folds.has_value());
  CHECK(a.config.master_seed == 0);
  CHECK_FALSE(a.config.alpha_halving);
}

TEST_CASE("run flags") {
  unsetenv("CONFORMAL_DEMOD_SEED");
  const CliArgs a = parse({"run", "--n-pilots", "20", "--alpha", "0.1"});
  CHECK(a.command == Command::run);
  CHECK(a.config.n_pilots_grid == std::vector<std::size_t>{20});

  const CliArgs b = parse({"run", "--n-pilots", "10,30", "--methods", "vb,cv", "--learners", "bayesian", "--k", "5",
                           "--seed", "9", "--alpha-halving", "--threads", "2", "--out", "x.csv", "--dat", "x.dat"});
  CHECK(b.config.n_pilots_grid == std::vector<std::size_t>{10, 30});
  CHECK(b.config.methods == std::vector<Method>{Method::vb, Method::cv});
  CHECK(b.config.learners == std::vector<LearnerKind>{LearnerKind::bayesian});
  CHECK(b.config.k_folds == std::optional<std::size_t>{5});
  CHECK(b.config.master_seed == 9);
  CHECK(b.config.alpha_halving);
  CHECK(b.config.threads == 2);
  CHECK(b.out == "x.csv");
  CHECK(b.dat == std::optional<std::string>{"x.dat"});
}

TEST_CASE("invalid arguments exit nonzero with usage") {
  unsetenv("CONFORMAL_DEMOD_SEED");
  for (const auto& bad : std::vector<std::vector<std::string>>{{"run", "--alpha", "1.5"},
                                                               {"run", "--bogus"},
                                                               {"run", "--methods", "vb,jackknife"},
                                                               {"run", "--n-pilots", "10", "--k", "3"},
                                                               {"run", "--n-frames", "0"},
                                                               {"explode"}}) {
    std::string err;
    CAPTURE(bad.back());
    CHECK(run(bad, nullptr, &err) != 0);
    CHECK(err.find("Usage") != std::string::npos);
  }
  std::string out;
  CHECK(run({"--help"}, &out) == 0);
  CHECK(out.find("selftest") != std::string::npos);
}

TEST_CASE("seed environment variable overrides --seed") {
  setenv("CONFORMAL_DEMOD_SEED", "1234", 1);
  CHECK(parse({"run", "--seed", "5"}).config.master_seed == 1234);
  setenv("CONFORMAL_DEMOD_SEED", "12x", 1);
  CHECK_THROWS_AS(parse({"run"}), CliExit);
  unsetenv("CONFORMAL_DEMOD_SEED");
  CHECK(parse({"run", "--seed", "5"}).config.master_seed == 5);
}

TEST_CASE("frame command") {
  unsetenv("CONFORMAL_DEMOD_SEED");
  SUBCASE("cv on five pilots prints full sets") {
    std::string out;
    REQUIRE(run({"frame", "--n-pilots", "5", "--method", "cv", "--alpha", "0.1"}, &out) == 0);
    const auto sets = printed_sets(out);
    CHECK(sets.size() == 100);
    for (const auto& s : sets) CHECK(s == "{0,1,2,3}");
    CHECK(out.find("coverage 100/100") != std::string::npos);
  }
  SUBCASE("fixed seed gives identical text") {
    std::string a, b;
    run({"frame", "--n-pilots", "12", "--method", "kcv", "--k", "4", "--learner", "bayesian", "--seed", "3"}, &a);
    run({"frame", "--n-pilots", "12", "--method", "kcv", "--k", "4", "--learner", "bayesian", "--seed", "3"}, &b);
    CHECK(a == b);
    CHECK(printed_sets(a).size() == 100);
  }
  SUBCASE("naive sets at alpha 0.5 are never larger than at 0.1") {
    std::string lo, hi;
    run({"frame", "--n-pilots", "20", "--method", "naive", "--alpha", "0.1"}, &lo);
    run({"frame", "--n-pilots", "20", "--method", "naive", "--alpha", "0.5"}, &hi);
    const auto a = printed_sets(lo), b = printed_sets(hi);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i].size() <= a[i].size());
  }
}

TEST_CASE("selftest command") {
  unsetenv("CONFORMAL_DEMOD_SEED");
  std::string out;
  CHECK(run({"selftest"}, &out) == 0);
  for (const char* name : {"gradient_finite_difference", "quantile_sort_oracle", "exchangeable_coverage"})
    CHECK(out.find(std::string("PASS ") + name) != std::string::npos);

  for (const char* offset : {"1", "-1"}) {
    CAPTURE(offset);
    CHECK(run({"selftest", "--mutate-quantile-rank", offset}, &out) != 0);
    CHECK(out.find("FAIL quantile_sort_oracle") != std::string::npos);
  }
}

TEST_CASE("run command writes csv and dat") {
  unsetenv("CONFORMAL_DEMOD_SEED");
  const auto dir = std::filesystem::temp_directory_path();
  const auto csv = (dir / "cpdemod_cli.csv").string();
  const auto dat = (dir / "cpdemod_cli.dat").string();
  std::string out;
  REQUIRE(run({"run", "--n-pilots", "10", "--n-frames", "2", "--n-test", "10", "--methods", "naive,vb", "--out", csv,
               "--dat", dat},
              &out) == 0);
  std::ifstream is(csv);
  std::stringstream ss;
  ss << is.rdbuf();
  CHECK(ss.str() == out);
  CHECK(std::count(out.begin(), out.end(), '\n') == 5);
  CHECK(std::filesystem::exists(dat));
  std::filesystem::remove(csv);
  std::filesystem::remove(dat);

  std::string err;
  CHECK(run({"run", "--n-pilots", "10", "--n-frames", "1", "--methods", "naive", "--out", "/nonexistent-dir/r.csv"},
            nullptr, &err) != 0);
  CHECK(err.find("/nonexistent-dir/r.csv") != std::string::npos);
}
