#include "config.hpp"
#include "experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

// Exit codes: 0 success, 1 configuration error, 2 runtime error.
constexpr int kConfigExit = 1;
constexpr int kRuntimeExit = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized dictionary learning: federated matching and averaging"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seeds;
  std::string renormalize;
  long long rounds = -1;
  long long threads = -1;
  bool timings = false;

  app.add_option("--config", config_path, "Configuration file (key = value with [sections])");
  app.add_option("--seed", seeds, "Seed or comma-separated seed list");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--rounds", rounds, "Communication rounds T");
  app.add_option("--renormalize", renormalize, "on|off: renormalize averaged atoms")
      ->check(CLI::IsMember({"on", "off"}));
  app.add_option("--threads", threads, "Worker threads for per-client steps");
  app.add_flag("--timings", timings,
               "Record wall times in traces (off keeps outputs reproducible)");

  auto* synth = app.add_subcommand(
      "synth", "Synthetic benchmark: independent vs collaborative runs");
  synth->fallthrough();
  auto* reconstruct = app.add_subcommand(
      "reconstruct", "Top-k reconstruction with global/local split");
  reconstruct->fallthrough();
  std::string scenario, mode, kflag, atoms;
  reconstruct->add_option("--scenario", scenario, "synthetic|imbalanced|frames|custom");
  reconstruct->add_option("--mode", mode, "perma|single");
  reconstruct->add_option("--k", kflag, "Top-k coefficients per sample");
  reconstruct->add_option("--atoms", atoms, "Atoms per client dictionary");
  auto* validate = app.add_subcommand(
      "validate", "Incoherence / identifiability diagnostics");
  validate->fallthrough();
  std::string eps;
  std::vector<std::string> validate_dicts;
  validate->add_option("--eps", eps, "Assumed per-client initialization error");
  validate->add_option("--dict", validate_dicts, "Client dictionary files");
  auto* match = app.add_subcommand(
      "match", "Run global matching on dictionary files");
  match->fallthrough();
  std::vector<std::string> match_dicts;
  std::string r_global, dump_dag;
  match->add_option("--dict", match_dicts, "Dictionary files, one per client");
  match->add_option("--dump-dag", dump_dag, "Write the layered DAG listing here");
  app.add_option("--r-global", r_global, "Number of shared (global) atoms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }

  try {
    perdl_cli::Config cfg;
    perdl_cli::declare_schema(cfg);
    if (!config_path.empty()) cfg.load_file(config_path);

    // Flags override file settings.
    if (!seeds.empty()) cfg.set("experiment.seeds", seeds);
    if (!out_dir.empty()) cfg.set("experiment.out", out_dir);
    if (rounds >= 0) cfg.set("experiment.rounds", std::to_string(rounds));
    if (!renormalize.empty()) cfg.set("experiment.renormalize", renormalize);
    if (threads >= 0) cfg.set("experiment.threads", std::to_string(threads));
    if (timings) cfg.set("experiment.timings", "on");
    if (!r_global.empty()) cfg.set("experiment.r_global", r_global);
    if (!scenario.empty()) cfg.set("experiment.scenario", scenario);
    if (!mode.empty()) cfg.set("experiment.mode", mode);
    if (!kflag.empty()) cfg.set("data.k", kflag);
    if (!atoms.empty()) cfg.set("data.atoms", atoms);
    if (!eps.empty()) cfg.set("experiment.eps", eps);
    if (!validate_dicts.empty()) {
      std::string joined;
      for (const auto& p : validate_dicts) {
        if (!joined.empty()) joined += ",";
        joined += p;
      }
      cfg.set("validate.dicts", joined);
    }
    if (!dump_dag.empty()) cfg.set("match.dump_dag", dump_dag);
    if (!match_dicts.empty()) {
      std::string joined;
      for (const auto& p : match_dicts) {
        if (!joined.empty()) joined += ",";
        joined += p;
      }
      cfg.set("match.dicts", joined);
    }
    cfg.check_known();

    if (synth->parsed()) return perdl_cli::cmd_synth(cfg);
    if (reconstruct->parsed()) return perdl_cli::cmd_reconstruct(cfg);
    if (validate->parsed()) return perdl_cli::cmd_validate(cfg);
    if (match->parsed()) return perdl_cli::cmd_match(cfg);
    std::cerr << "no subcommand selected\n";
    return kConfigExit;
  } catch (const perdl_cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeExit;
  }
}
