#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gridcase/augment.hpp"
#include "gridcase/fleet.hpp"
#include "gridcase/matpower.hpp"
#include "gridcase/network.hpp"
#include "gridcase/opf.hpp"
#include "gridcase/powerflow.hpp"
#include "gridcase/scenario.hpp"

namespace fs = std::filesystem;
using namespace gridcase;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kSolver = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

bool same_file(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  return fs::exists(a, ec) && fs::exists(b, ec) && fs::equivalent(a, b, ec);
}

// Refuses to replace any of `inputs` unless forced.
void write_output(const fs::path& path, const std::string& text, const std::vector<std::string>& inputs,
                  bool force) {
  for (const std::string& in : inputs) {
    if (same_file(path, in) && !force) {
      throw UsageError("refusing to overwrite input " + in + " (use --force)");
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::string json_text(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

Network load_case(const std::string& path) { return matpower::lower(matpower::read_file(path)); }

fleet::AugmentModels load_models(const std::string& path) {
  if (path.empty()) return fleet::default_models();
  return fleet::models_from_json(read_json(path));
}

std::vector<opf::Formulation> parse_models(const std::string& list) {
  std::vector<opf::Formulation> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    auto f = opf::parse_formulation(item);
    if (!f || *f == opf::Formulation::ac) throw UsageError("unknown relaxation '" + item + "' (cp, nfll, soc)");
    out.push_back(*f);
  }
  if (out.empty()) throw UsageError("--models needs at least one relaxation");
  return out;
}

// Runs `job(i)` for every index on up to `jobs` threads; the first failure is rethrown.
template <class F>
void parallel_for(std::size_t count, unsigned jobs, F job) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Options {
  std::vector<std::string> cases;
  std::string output;
  std::string out_dir = ".";
  std::string log;
  std::string plan;
  std::string models_file;
  std::optional<std::uint64_t> seed;
  bool force = false;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  double tolerance = 1e-8;

  // fit
  std::string fleet_csv, prices_csv;
  std::vector<std::string> line_csvs;
  double min_capacity = 5.0;

  // validate / gap-table
  std::string format;
  bool operational = false;
  std::string relaxations = "cp,nfll,soc";
  int starts = 1;

  // gen-api
  bool active_only = false;
};

std::uint64_t require_seed(const Options& o, const char* command) {
  if (!o.seed) throw UsageError(std::string(command) + " needs --seed");
  return *o.seed;
}

opt::IpmOptions ipm_options(const Options& o) {
  opt::IpmOptions ipm;
  ipm.tolerance = o.tolerance;
  return ipm;
}

int run_fit(const Options& o) {
  auto fleet_records = fleet::read_fleet_csv(o.fleet_csv);
  auto prices = fleet::read_price_csv(o.prices_csv);
  fleet::AugmentModels models = fleet::fit_models(fleet_records, prices, o.min_capacity);
  std::vector<std::string> inputs{o.fleet_csv, o.prices_csv};
  if (o.line_csvs.size() == 1) {
    models.thermal = fleet::fit_loglog(fleet::read_line_csv(o.line_csvs[0]));
  } else if (o.line_csvs.size() == 2) {
    auto a = fleet::read_line_csv(o.line_csvs[0]);
    auto b = fleet::read_line_csv(o.line_csvs[1]);
    models.thermal = fleet::fit_loglog(fleet::balance_equal(a, b, require_seed(o, "fit with two line sets")));
  } else if (o.line_csvs.size() > 2) {
    throw UsageError("--lines takes one or two files");
  }
  inputs.insert(inputs.end(), o.line_csvs.begin(), o.line_csvs.end());
  write_output(o.output, json_text(fleet::to_json(models)), inputs, o.force);
  std::cerr << "fitted models written to " << o.output << "\n";
  return kOk;
}

int run_augment(const Options& o) {
  const std::string& input = o.cases.front();
  nlohmann::json config = read_json(o.plan);
  augment::AugmentPlan plan = augment::plan_from_json(config);
  if (!o.models_file.empty()) plan.models = load_models(o.models_file);
  if (o.seed) {
    plan.seed = *o.seed;
  } else if (config.contains("seed")) {
    plan.seed = config.at("seed").get<std::uint64_t>();
  } else {
    throw UsageError("augment needs --seed or a \"seed\" in the plan");
  }
  plan.check();

  auto [net, log] = augment::apply_plan(load_case(input), plan);
  fs::path out = o.output.empty() ? fs::path(o.out_dir) / (fs::path(input).stem().string() + "__aug.m")
                                  : fs::path(o.output);
  fs::path log_path = o.log.empty() ? fs::path(out).replace_extension(".json") : fs::path(o.log);
  std::vector<std::string> inputs{input, o.plan};
  if (!o.models_file.empty()) inputs.push_back(o.models_file);
  write_output(out, matpower::write(net, augment::provenance(plan, fs::path(input).filename().string())), inputs,
               o.force);
  write_output(log_path, json_text(augment::to_json(log, plan)), inputs, o.force);
  for (const std::string& w : log.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "wrote " << out.string() << " and " << log_path.string() << "\n";
  return kOk;
}

int run_validate(const Options& o) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["cases"] = nlohmann::json::array();
  std::ostringstream table;
  bool clean = true;
  for (const std::string& path : o.cases) {
    Network net = load_case(path);
    std::vector<Violation> found = validate(net);
    if (found.empty() && o.operational) {
      auto sol = powerflow::solve_pf(net);
      found = powerflow::check_operational(net, sol);
    }
    clean = clean && found.empty();
    nlohmann::json c;
    c["case"] = path;
    c["violations"] = nlohmann::json::array();
    for (const Violation& v : found) {
      c["violations"].push_back({{"element", std::string(to_string(v.element))},
                                 {"index", v.index},
                                 {"kind", v.kind},
                                 {"magnitude", v.magnitude},
                                 {"message", v.message}});
      table << path << "\t" << v.kind << "\t" << v.message << "\n";
    }
    if (found.empty()) table << path << "\tok\n";
    doc["cases"].push_back(std::move(c));
  }
  std::cout << (o.format == "json" ? json_text(doc) : table.str());
  return clean ? kOk : kData;
}

int run_gap_table(const Options& o) {
  std::vector<opf::Formulation> models = parse_models(o.relaxations);
  opf::SolveOptions solve;
  solve.ipm = ipm_options(o);
  solve.starts = o.starts;
  if (o.starts > 1) solve.seed = require_seed(o, "gap-table with --starts");
  auto reports = opf::gap_table(o.cases, models, solve, o.jobs);
  for (const auto& r : reports) {
    if (!r.error.empty()) std::cerr << r.case_name << ": " << r.error << "\n";
  }
  std::string text = o.format == "json" ? json_text(opf::to_json(reports, models)) : opf::to_markdown(reports, models);
  if (o.output.empty()) {
    std::cout << text;
  } else {
    write_output(o.output, text, o.cases, o.force);
  }
  return kOk;
}

int run_gen_api(const Options& o) {
  fleet::AugmentModels models = load_models(o.models_file);
  std::uint64_t seed = require_seed(o, "gen-api");
  scenario::ApiOptions api;
  api.active_only = o.active_only;
  api.ipm = ipm_options(o);
  parallel_for(o.cases.size(), o.jobs, [&](std::size_t i) {
    const std::string& input = o.cases[i];
    std::string stem = fs::path(input).stem().string();
    auto result = scenario::gen_api(load_case(input), models, seed, api);
    auto lines = augment::provenance(result.plan, fs::path(input).filename().string());
    lines.push_back(" API demand scale: " + matpower::format_number(result.alpha));
    fs::path out = fs::path(o.out_dir) / (stem + "__api.m");
    write_output(out, matpower::write(result.network, lines), o.cases, o.force);
    write_output(fs::path(o.out_dir) / (stem + "__api.json"), json_text(scenario::to_json(result, stem)), o.cases,
                 o.force);
  });
  return kOk;
}

int run_gen_sad(const Options& o) {
  scenario::SadOptions sad;
  sad.ipm = ipm_options(o);
  parallel_for(o.cases.size(), o.jobs, [&](std::size_t i) {
    const std::string& input = o.cases[i];
    std::string stem = fs::path(input).stem().string();
    auto result = scenario::gen_sad(load_case(input), sad);
    std::vector<std::string> lines{std::string(" generated by ") + augment::kToolVersion,
                                   " source: " + fs::path(input).filename().string(),
                                   " SAD angle bound: " + matpower::format_number(result.theta_deg) + " deg"};
    fs::path out = fs::path(o.out_dir) / (stem + "__sad.m");
    write_output(out, matpower::write(result.network, lines), o.cases, o.force);
    write_output(fs::path(o.out_dir) / (stem + "__sad.json"), json_text(scenario::to_json(result, stem)), o.cases,
                 o.force);
  });
  return kOk;
}

int run_convert(const Options& o) {
  const std::string& input = o.cases.front();
  matpower::CaseFile file = matpower::read_file(input);
  Network net = matpower::lower(file);
  std::string text = matpower::write_case(matpower::build(net, file.comments));
  if (o.output.empty()) {
    std::cout << text;
  } else {
    write_output(o.output, text, o.cases, o.force);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build, augment and benchmark AC optimal power flow test cases."};
  app.set_version_flag("--version", augment::kToolVersion);
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_seed = [&](CLI::App* cmd, const char* help) {
    cmd->add_option("--seed", seed, help);
  };
  auto add_force = [&](CLI::App* cmd) {
    cmd->add_flag("--force", o.force, "Allow an output path to replace an input file");
  };
  auto add_jobs = [&](CLI::App* cmd) {
    cmd->add_option("--jobs", o.jobs, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);
  };
  auto add_tolerance = [&](CLI::App* cmd) {
    cmd->add_option("--tolerance", o.tolerance, "Interior point KKT tolerance")->check(CLI::PositiveNumber);
  };

  auto* fit = app.add_subcommand("fit", "Fit augmentation models from fleet and price CSV files");
  fit->add_option("--fleet", o.fleet_csv, "Fleet CSV (status, energy_source, nameplate_mw, summer_mw)")
      ->required()->check(CLI::ExistingFile);
  fit->add_option("--prices", o.prices_csv, "Price CSV (state, seds_label, price_per_mmbtu)")
      ->required()->check(CLI::ExistingFile);
  fit->add_option("--lines", o.line_csvs, "Line CSV (x_over_r, capacity_ratio); a second file is balanced against the first")
      ->check(CLI::ExistingFile);
  fit->add_option("--min-capacity", o.min_capacity, "Smallest nameplate kept, MW");
  fit->add_option("-o,--output", o.output, "Models JSON to write")->required();
  add_seed(fit, "Seed for balancing two line sets");
  add_force(fit);

  auto* aug = app.add_subcommand("augment", "Apply an augmentation plan to a case");
  aug->add_option("case", o.cases, "MATPOWER case file")->required()->expected(1)->check(CLI::ExistingFile);
  aug->add_option("--plan", o.plan, "Plan JSON (see configs/)")->required()->check(CLI::ExistingFile);
  aug->add_option("--models", o.models_file, "Models JSON from `fit` (default: built-in)")->check(CLI::ExistingFile);
  add_seed(aug, "Random seed (overrides the plan's \"seed\")");
  aug->add_option("-o,--output", o.output, "Output case (default: <out-dir>/<name>__aug.m)");
  aug->add_option("--log", o.log, "Augmentation log JSON (default: output with .json)");
  aug->add_option("--out-dir", o.out_dir, "Output directory");
  add_force(aug);

  auto* val = app.add_subcommand("validate", "Report structural (and optionally operational) violations");
  val->add_option("cases", o.cases, "MATPOWER case files")->required()->check(CLI::ExistingFile);
  val->add_option("--format", o.format, "table or json")->check(CLI::IsMember({"table", "json"}));
  val->add_flag("--operational", o.operational, "Also solve the power flow and check operating limits");

  auto* gap = app.add_subcommand("gap-table", "AC objective and relaxation optimality gaps per case");
  gap->add_option("cases", o.cases, "MATPOWER case files")->required();
  gap->add_option("--models", o.relaxations, "Comma separated relaxations: cp, nfll, soc");
  gap->add_option("--format", o.format, "md or json")->check(CLI::IsMember({"md", "json"}));
  gap->add_option("--starts", o.starts, "AC starts per case (extra starts are randomized)")->check(CLI::PositiveNumber);
  gap->add_option("-o,--output", o.output, "Write the table to a file instead of standard output");
  add_seed(gap, "Seed for randomized AC starts");
  add_jobs(gap);
  add_tolerance(gap);
  add_force(gap);

  auto* api = app.add_subcommand("gen-api", "Congested variant: <name>__api.m and <name>__api.json");
  api->add_option("cases", o.cases, "MATPOWER case files")->required()->check(CLI::ExistingFile);
  api->add_option("--models", o.models_file, "Models JSON from `fit` (default: built-in)")->check(CLI::ExistingFile);
  api->add_flag("--active-only", o.active_only, "Scale active demand only");
  api->add_option("--out-dir", o.out_dir, "Output directory");
  add_seed(api, "Random seed for re-augmentation (required)");
  add_jobs(api);
  add_tolerance(api);
  add_force(api);

  auto* sad = app.add_subcommand("gen-sad", "Small angle-difference variant: <name>__sad.m and <name>__sad.json");
  sad->add_option("cases", o.cases, "MATPOWER case files")->required()->check(CLI::ExistingFile);
  sad->add_option("--out-dir", o.out_dir, "Output directory");
  add_jobs(sad);
  add_tolerance(sad);
  add_force(sad);

  auto* conv = app.add_subcommand("convert", "Parse and rewrite a case in normalized form");
  conv->add_option("case", o.cases, "MATPOWER case file")->required()->expected(1)->check(CLI::ExistingFile);
  conv->add_option("-o,--output", o.output, "Output file (default: standard output)");
  add_force(conv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  for (CLI::App* cmd : {fit, aug, gap, api}) {
    if (cmd->parsed() && cmd->count("--seed") > 0) o.seed = seed;
  }
  if (o.format.empty()) o.format = gap->parsed() ? "md" : "table";

  try {
    if (fit->parsed()) return run_fit(o);
    if (aug->parsed()) return run_augment(o);
    if (val->parsed()) return run_validate(o);
    if (gap->parsed()) return run_gap_table(o);
    if (api->parsed()) return run_gen_api(o);
    if (sad->parsed()) return run_gen_sad(o);
    if (conv->parsed()) return run_convert(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
