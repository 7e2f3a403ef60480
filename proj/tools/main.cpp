#include <map>
#include <CLI11.hpp>

#include <iostream>

#include "magstep/cli.hpp"

int main(int argc, char** argv) {
  using namespace magstep;
  CLI::App app{"magstep: edge spectra and tunneling for magnetic step fields"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  RunOptions opt;
  bool no_cache = false;
  bool print_default = false;
  app.add_option("--config", config_path, "JSON run configuration (defaults when omitted)");
  app.add_option("--out", opt.out_dir, "output directory")->capture_default_str();
  app.add_flag("--skip-2d", opt.skip_2d, "validate: leave out the double-well 2D criterion");
  app.add_option("--jobs", opt.jobs, "parallel sweep points")->check(CLI::PositiveNumber);
  app.add_flag("--no-cache", no_cache, "always recompute");
  app.add_flag("--print-default-config", print_default, "write the default configuration to stdout");

  const std::map<std::string, std::string> blurb = {
      {"constants", "fiber band constants and moment identities per a"},
      {"curve", "arclength, curvature and coordinates of the boundary"},
      {"predict", "tunneling gap prediction over h_list"},
      {"effective-gap", "1D effective operator gaps and exponent fit"},
      {"wkb-residual", "quasimode residuals and their slopes in hbar"},
      {"solve2d", "lowest eigenvalues of the strip operator"},
      {"validate", "run the acceptance criteria"}};
  for (const auto& name : command_names()) app.add_subcommand(name, blurb.count(name) ? blurb.at(name) : "");
  app.set_help_flag("-h,--help");

  // allow --print-default-config without a subcommand
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--print-default-config") {
      std::cout << config_to_json(default_config()).dump(2) << "\n";
      return 0;
    }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  opt.use_cache = !no_cache;

  try {
    const RunConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
    const std::string name = app.get_subcommands().front()->get_name();
    bool cached = false;
    const ResultRecord r = run_command(name, cfg, opt, &cached);
    if (name == "validate") std::cout << r.files.at("acceptance.txt");
    std::cerr << name << ": config " << r.config_hash.substr(0, 12) << (cached ? " (cached)" : "")
              << ", " << r.files.size() << " files in " << opt.out_dir << "\n";
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
