#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pdsf/config.hpp"
#include "pdsf/report.hpp"
#include "pdsf/stats.hpp"

namespace {

constexpr const char* kExperiments[] = {"forest",   "coalesce", "renewals", "increments",
                                        "donsker",  "treeness", "foster",   "coupling",
                                        "dual",     "eta",      "dump-paths"};

int run_one(const std::string& experiment, const std::string& config_path,
            std::int64_t seed, bool seed_set, const std::string& out_dir, int workers,
            const std::vector<std::string>& sets) {
  pdsf::RunConfig cfg;
  if (!config_path.empty()) cfg = pdsf::RunConfig::from_file(config_path);
  if (!experiment.empty()) cfg.set("experiment", experiment);
  if (seed_set) cfg.set("field.seed", std::to_string(seed));
  if (workers > 0) cfg.set("workers", std::to_string(workers));
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--set expects key=value, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }

  pdsf::ExperimentReport report = pdsf::run_experiment(cfg, out_dir);
  std::cout << pdsf::render_text(report);
  if (!out_dir.empty()) {
    for (const std::string& path : pdsf::write_report_files(report, out_dir))
      std::cout << "wrote: " << path << "\n";
  }
  return report.all_pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"perturbed-lattice DSF simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::int64_t seed = 0;
  int workers = 0;
  std::vector<std::string> sets;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->add_option("--seed", seed, "field seed override");
    sub->add_option("--out", out_dir, "output directory for artifacts");
    sub->add_option("--workers", workers, "trial worker count");
    sub->add_option("--set", sets, "config override key=value (repeatable)");
  };

  std::vector<std::pair<CLI::App*, std::string>> subs;
  for (const char* name : kExperiments) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    add_common(sub);
    subs.emplace_back(sub, name);
  }
  CLI::App* runsub = app.add_subcommand("run", "run the experiment named in the config file");
  add_common(runsub);
  subs.emplace_back(runsub, "");

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [sub, name] : subs)
      if (sub->parsed()) {
        bool seed_set = sub->count("--seed") > 0;
        return run_one(name, config_path, seed, seed_set, out_dir, workers, sets);
      }
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
