#include <CLI11.hpp>

#include <iostream>

#include "magstep/cli.hpp"

// One PASS/FAIL line per criterion; exit 0 only if every evaluated criterion passes.
int main(int argc, char** argv) {
  using namespace magstep;
  CLI::App app{"magstep acceptance suite"};
  std::string config_path;
  RunOptions opt;
  std::vector<int> only;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_flag("--skip-2d", opt.skip_2d, "leave out criterion 9");
  app.add_option("--jobs", opt.jobs, "parallel sweep points")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "criterion ids to run")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
    const AcceptanceReport rep = run_acceptance(cfg, opt, only, [](const CriterionResult& r) {
      std::cout << format_criterion(r) << std::endl;
    });
    int pass = 0, fail = 0, skip = 0;
    for (const auto& r : rep.criteria) (r.skipped ? skip : r.pass ? pass : fail)++;
    std::cout << "summary: " << pass << " passed, " << fail << " failed, " << skip << " skipped\n";
    return rep.all_pass() ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
