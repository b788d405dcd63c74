#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <doctest.h>

#include "json.hpp"

#include "gridcase/fleet.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using gridcase::testing::fixture;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("gridcase_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run run(const std::string& args) {
  fs::path out = fs::temp_directory_path() / "gridcase_cli_stdout.txt";
  std::string cmd = std::string("\"") + GRIDCASE_CLI + "\" " + args + " > \"" + out.string() + "\" 2>/dev/null";
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("version and usage errors") {
  CHECK(run("--version").code == 0);
  CHECK(run("--help").code == 0);
  CHECK(run("").code == 1);
  CHECK(run("no-such-command").code == 1);
  CHECK(run("gap-table " + q(fixture("case9.m")) + " --models ac").code == 1);
  CHECK(run("gap-table " + q(fixture("case9.m")) + " --format xml").code == 1);
}

TEST_CASE("augment is byte-identical for a fixed seed") {
  fs::path dir = scratch("augment");
  std::string base = "augment " + q(fixture("case14.m")) + " --plan " + q(fs::path(GRIDCASE_CONFIGS) / "nesta.json");
  REQUIRE(run(base + " --seed 42 -o " + q(dir / "a.m")).code == 0);
  REQUIRE(run(base + " --seed 42 -o " + q(dir / "b.m")).code == 0);
  CHECK(slurp(dir / "a.m") == slurp(dir / "b.m"));
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(nlohmann::json::parse(slurp(dir / "a.json"))["seed"] == 42);
  REQUIRE(run(base + " --seed 43 -o " + q(dir / "c.m")).code == 0);
  CHECK(slurp(dir / "a.m") != slurp(dir / "c.m"));
  CHECK(run(base + " -o " + q(dir / "d.m")).code == 1);

  nlohmann::json plan = nlohmann::json::parse(slurp(fs::path(GRIDCASE_CONFIGS) / "nesta.json"));
  plan["seed"] = 42;
  std::ofstream(dir / "seeded.json") << plan.dump();
  std::string seeded = "augment " + q(fixture("case14.m")) + " --plan " + q(dir / "seeded.json");
  REQUIRE(run(seeded + " -o " + q(dir / "e.m")).code == 0);
  CHECK(slurp(dir / "e.m") == slurp(dir / "a.m"));
  REQUIRE(run(seeded + " --seed 43 -o " + q(dir / "f.m")).code == 0);
  CHECK(slurp(dir / "f.m") == slurp(dir / "c.m"));
}

TEST_CASE("inputs are never overwritten without --force") {
  fs::path dir = scratch("overwrite");
  fs::copy_file(fixture("case9.m"), dir / "case9.m");
  std::string original = slurp(dir / "case9.m");
  CHECK(run("convert " + q(dir / "case9.m") + " -o " + q(dir / "case9.m")).code == 1);
  CHECK(slurp(dir / "case9.m") == original);
  CHECK(run("convert " + q(dir / "case9.m") + " -o " + q(dir / "case9.m") + " --force").code == 0);
}

TEST_CASE("convert output parses back to the same network") {
  fs::path dir = scratch("convert");
  REQUIRE(run("convert " + q(fixture("case5.m")) + " -o " + q(dir / "out.m")).code == 0);
  auto a = gridcase::testing::load_fixture("case5.m");
  auto b = gridcase::matpower::lower(gridcase::matpower::read_file((dir / "out.m").string()));
  CHECK(gridcase::matpower::write(a) == gridcase::matpower::write(b));
}

TEST_CASE("validate reports violations through the exit code") {
  CHECK(run("validate " + q(fixture("case9.m"))).code == 0);
  Run clean = run("validate --format json --operational " + q(fixture("case9.m")));
  CHECK(clean.code == 0);
  CHECK(nlohmann::json::parse(clean.out)["cases"][0]["violations"].empty());
  Run bad = run("validate --format json --operational " + q(fixture("case5.m")));
  CHECK(bad.code == 2);
  CHECK_FALSE(nlohmann::json::parse(bad.out)["cases"][0]["violations"].empty());
  CHECK(run("validate /nonexistent.m").code == 1);
}

TEST_CASE("data errors exit with code 2") {
  fs::path dir = scratch("dataerr");
  std::ofstream(dir / "broken.m") << "function mpc = broken\nmpc.bus = [1 3 0;\n";
  CHECK(run("convert " + q(dir / "broken.m")).code == 2);
  CHECK(run("gen-api " + q(fixture("case3_base.m")) + " --seed 1 --out-dir " + q(dir)).code == 2);
}

TEST_CASE("gap-table markdown and json") {
  std::string cases = q(fixture("case9.m")) + " " + q(fixture("case5.m"));
  Run md = run("gap-table --jobs 2 " + cases);
  REQUIRE(md.code == 0);
  CHECK(md.out ==
        "| Case | AC ($/h) | CP (%) | NF+LL (%) | SOC (%) |\n"
        "|---|---:|---:|---:|---:|\n"
        "| case9 | 5296.69 | 1.52 | 0.04 | 0.00 |\n"
        "| case5 | 17551.89 | 15.62 | 14.55 | 14.54 |\n");
  Run js = run("gap-table --format json --models soc " + q(fixture("case9.m")));
  REQUIRE(js.code == 0);
  auto doc = nlohmann::json::parse(js.out);
  CHECK(doc["models"] == nlohmann::json({"soc"}));
  CHECK(doc["cases"][0]["case"] == "case9");
}

TEST_CASE("fit recovers the parameters of synthetic fleet and price data") {
  const double ng_rate = 1.0 / 150.0, nuc_mean = 1000.0, nuc_sd = 150.0, ng_summer = 0.08;
  const double gas_mean = 4.0, gas_sd = 0.5;
  std::mt19937_64 rng(20240601);
  std::exponential_distribution<double> ng(ng_rate);
  std::normal_distribution<double> nuc(nuc_mean, nuc_sd), gas(gas_mean, gas_sd);

  fs::path dir = scratch("fit");
  std::ofstream fleet(dir / "fleet.csv");
  fleet.precision(10);
  fleet << "plant,status,energy_source,nameplate_mw,summer_mw\n";
  for (int i = 0; i < 20000; ++i) {
    double mw = ng(rng);
    fleet << "g" << i << ",OP,NG," << mw << "," << mw * (1.0 - ng_summer) << "\n";
  }
  for (int i = 0; i < 20000; ++i) {
    double mw = nuc(rng);
    fleet << "n" << i << ",OP,NUC," << mw << "," << mw << "\n";
  }
  fleet.close();
  std::ofstream prices(dir / "prices.csv");
  prices.precision(10);
  prices << "state,seds_label,price_per_mmbtu\n";
  for (int i = 0; i < 20000; ++i) prices << "S" << i << ",Natural Gas," << gas(rng) << "\n";
  prices.close();
  std::ofstream(dir / "lines.csv") << "x_over_r,capacity_ratio\n2,1.5\n4,2.1\n8,3.0\n16,4.2\n";

  std::string args = "fit --min-capacity 0 --fleet " + q(dir / "fleet.csv") + " --prices " + q(dir / "prices.csv") +
                     " --lines " + q(dir / "lines.csv") + " -o " + q(dir / "models.json");
  REQUIRE(run(args).code == 0);
  auto doc = nlohmann::json::parse(slurp(dir / "models.json"));
  auto near = [](double got, double want) { return std::abs(got - want) <= 0.02 * std::abs(want); };
  CHECK(doc["schema_version"] == 1);
  CHECK(near(doc["capacity_exponential"]["NG"]["rate"].get<double>(), ng_rate));
  CHECK(near(doc["capacity_normal"]["NUC"]["mean"].get<double>(), nuc_mean));
  CHECK(near(doc["capacity_normal"]["NUC"]["stddev"].get<double>(), nuc_sd));
  CHECK(near(doc["summer_reduction"]["NG"]["fraction"].get<double>(), ng_summer));
  CHECK(near(doc["cost_normal"]["NG"]["mean"].get<double>(), gas_mean / gridcase::fleet::kMwhPerMmbtu));
  CHECK(near(doc["cost_normal"]["NG"]["stddev"].get<double>(), gas_sd / gridcase::fleet::kMwhPerMmbtu));

  std::string first = slurp(dir / "models.json");
  REQUIRE(run(args).code == 0);
  CHECK(slurp(dir / "models.json") == first);
  CHECK(run(args + " --lines " + q(dir / "lines.csv") + " --lines " + q(dir / "lines.csv")).code == 1);

  std::ofstream(dir / "small.csv") << "plant,status,energy_source,nameplate_mw,summer_mw\np,OP,NG,10,9\n";
  CHECK(run("fit --fleet " + q(dir / "small.csv") + " --prices " + q(dir / "prices.csv") + " -o " +
            q(dir / "small.json"))
            .code == 2);

  fs::path api = scratch("fit_api");
  CHECK(run("gen-api " + q(fixture("case3_capacity.m")) + " --seed 42 --models " + q(dir / "models.json") +
            " --out-dir " + q(api))
            .code == 0);
  CHECK(fs::exists(api / "case3_capacity__api.m"));
}

TEST_CASE("gen-api and gen-sad write case and report") {
  fs::path dir = scratch("gen");
  REQUIRE(run("gen-api " + q(fixture("case3_capacity.m")) + " --seed 42 --out-dir " + q(dir)).code == 0);
  auto api = nlohmann::json::parse(slurp(dir / "case3_capacity__api.json"));
  CHECK(api["generator"] == "api");
  CHECK(api["alpha"].get<double>() > 1.0);
  REQUIRE(run("gen-sad " + q(fixture("case9.m")) + " --out-dir " + q(dir)).code == 0);
  auto sad = nlohmann::json::parse(slurp(dir / "case9__sad.json"));
  CHECK(sad["theta_deg"].get<double>() > 0.0);
  CHECK(fs::exists(dir / "case9__sad.m"));
}
