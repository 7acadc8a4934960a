#include "experiments.hpp"

#include "homlab/types.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

using namespace homlab;
using namespace homlab::cli;

struct RunArgs {
  std::string config;
  std::string output_dir;
  int threads = -1;
  std::vector<std::string> sets;
};

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

int run(const std::string& experiment, const RunArgs& args) {
  auto config = Config::load(args.config);
  if (config.experiment() != experiment)
    throw ConfigError("config describes '" + config.experiment() + "', not '" + experiment + "'");
  for (const auto& s : args.sets) config.set(s);

  // Flags beat the environment, which beats the config.
  if (!args.output_dir.empty()) config.set("run", "output_dir", args.output_dir);
  else if (auto v = env("HOMLAB_OUTPUT_DIR")) config.set("run", "output_dir", *v);
  if (args.threads >= 0) config.set("run", "threads", std::to_string(args.threads));
  else if (auto v = env("HOMLAB_THREADS")) config.set("run", "threads", *v);

  RunContext ctx;
  ctx.output_dir = config.text("run", "output_dir");
  ctx.threads = static_cast<int>(config.integer("run", "threads"));
  if (ctx.threads < 0) throw ConfigError("run.threads must be >= 0");
  const int code = run_experiment(config, ctx);
  std::cout << experiment << ": " << ctx.output_dir.string() << " exit " << code << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homlab: numerical experiments in stochastic homogenization"};
  app.require_subcommand(1);

  std::string selected;
  RunArgs args;
  for (const auto& name : kExperiments) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("config", args.config, "experiment config (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--output-dir", args.output_dir, "bundle directory");
    sub->add_option("--threads", args.threads, "worker threads (0 = hardware)");
    sub->add_option("--set", args.sets, "override, section.key=value")->take_all();
    sub->callback([&selected, name] { selected = name; });
  }

  std::vector<std::string> dirs;
  std::string json_path;
  auto* rep = app.add_subcommand("report", "compare result bundles");
  rep->add_option("dirs", dirs, "bundle directories")->required()->check(CLI::ExistingDirectory);
  rep->add_option("--json", json_path, "write the comparison as JSON");
  rep->callback([&selected] { selected = "report"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    if (selected == "report") {
      nlohmann::json result;
      std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
      const int code = report(paths, std::cout, result);
      if (!json_path.empty()) {
        std::ofstream out(json_path);
        if (!out) throw ConfigError("cannot write " + json_path);
        out << result.dump(2) << '\n';
      }
      return code;
    }
    return run(selected, args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidParameter& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kConfigError;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvariantFailure;
  }
}
