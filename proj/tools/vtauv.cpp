// vtauv: plan, stabilize and simulate maneuvers of the vectored-thruster
// vehicle. Exit status 0 on success, otherwise the numeric ErrorCode of the
// failure (see include/vtauv/errors.hpp); 1 for unexpected exceptions.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "vtauv/errors.hpp"
#include "vtauv/pipeline.hpp"
#include "vtauv/scenario.hpp"

namespace {

struct Args {
  std::string scenario;
  std::string config;
  std::string out;
  std::string dest;
  std::uint64_t seed = 0;
  bool verbose = false;
};

vtauv::RunConfig LoadConfig(const Args& a) {
  if (a.config.empty()) {
    vtauv::RunConfig rc;
    rc.registry.self_check(rc.vehicle);
    return rc;
  }
  return vtauv::load_run_config(a.config);
}

int RunStages(const Args& a, const CLI::App& sub, const std::string& first,
              const std::string& last) {
  const vtauv::RunConfig rc = LoadConfig(a);
  vtauv::PipelineOptions o;
  o.first_stage = first;
  o.last_stage = last;
  if (sub.count("--seed")) o.seed = a.seed;
  if (a.verbose) o.log = &std::cerr;
  const std::string out = a.out.empty() ? "runs/" + a.scenario : a.out;
  const vtauv::RunManifest m = vtauv::run_pipeline(rc, a.scenario, out, o);
  for (const vtauv::StageRecord& s : m.stages) {
    std::cout << s.name << ": " << s.status << (s.detail.empty() ? "" : " (" + s.detail + ")")
              << '\n';
  }
  std::cout << "manifest: " << out << "/" << vtauv::kManifestFile << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory optimization and time-varying LQR for a vectored-thruster AUV"};
  app.require_subcommand(1);
  Args a;

  auto common = [&](CLI::App* sub, bool needs_scenario) {
    if (needs_scenario) sub->add_option("--scenario", a.scenario, "scenario name")->required();
    sub->add_option("--config", a.config, "JSON run configuration");
    sub->add_flag("--verbose", a.verbose, "progress and solver iterations on stderr");
  };
  auto staged = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    common(sub, true);
    sub->add_option("--out", a.out, "run directory (default runs/<scenario>)");
    sub->add_option("--seed", a.seed, "seed of the perturbed rollouts");
    return sub;
  };

  CLI::App* list = app.add_subcommand("list-scenarios", "registered scenarios");
  common(list, false);
  CLI::App* optimize = staged("optimize", "solve and validate the trajectory");
  CLI::App* gains = staged("gains", "synthesize the TVLQR gain schedule");
  CLI::App* simulate = staged("simulate", "open-loop and closed-loop rollouts");
  CLI::App* run = staged("run", "full pipeline");
  CLI::App* exp = app.add_subcommand("export", "plot-ready series of a finished run");
  exp->add_option("--out", a.out, "run directory")->required();
  exp->add_option("--dest", a.dest, "destination (default <out>/export)");
  exp->add_flag("--verbose", a.verbose);
  CLI::App* verify = app.add_subcommand("verify", "check output files against the manifest");
  verify->add_option("--out", a.out, "run directory")->required();
  verify->add_flag("--verbose", a.verbose);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*list) {
      const vtauv::RunConfig rc = LoadConfig(a);
      for (const vtauv::ScenarioSpec& s : rc.registry.scenarios()) {
        std::cout << s.name << '\t' << s.description << '\n';
      }
      return 0;
    }
    if (*optimize) return RunStages(a, *optimize, "optimize", "validate");
    if (*gains) return RunStages(a, *gains, "gains", "gains");
    if (*simulate) return RunStages(a, *simulate, "open_loop", "closed_loop");
    if (*run) return RunStages(a, *run, "optimize", "closed_loop");
    if (*exp) {
      const std::string dest = a.dest.empty() ? a.out + "/export" : a.dest;
      for (const std::string& path : vtauv::export_plots(a.out, dest)) std::cout << path << '\n';
      return 0;
    }
    if (*verify) {
      const vtauv::VerifyResult r = vtauv::verify_run(a.out);
      for (const std::string& f : r.mismatched) std::cout << "MODIFIED " << f << '\n';
      for (const std::string& f : r.missing) std::cout << "MISSING " << f << '\n';
      if (!r.ok()) return static_cast<int>(vtauv::ErrorCode::kDigestMismatch);
      std::cout << "ok\n";
      return 0;
    }
  } catch (const vtauv::Error& e) {
    std::cerr << "error [" << vtauv::to_string(e.code()) << "]: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
