#include "sdlab/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"analytic score-distillation laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key=value config file (defaults otherwise)");
  app.add_option("--out", out_dir, "artifact output directory")->capture_default_str();
  app.add_option("--set", overrides, "config override, key=value (repeatable)");

  static const std::map<std::string, std::string> descriptions = {
      {"oracle-check", "self-check the analytic machinery (combiners, scores, projector)"},
      {"denoise-bench", "reconstruction quality per unconditional-branch variant"},
      {"gap-curve", "noise prediction gap across noise levels"},
      {"lambda-sweep", "distillation across the lambda residual family"},
      {"alpha-sweep", "distillation over a two-scale guidance weight grid"},
      {"engine-compare", "distillation engines side by side"},
      {"sampler-compare", "collapsed vs rectified guided sampling"},
      {"distill", "one distillation run (or the reference-view comparison)"},
      {"sample", "draw one guided sample"},
      {"report", "merge artifacts in --out into summary.json"},
  };

  // sample shortcuts; everything else is reachable through --set
  std::string opt_combiner;
  double opt_omega = 0.0, opt_eta = 0.0;
  std::int64_t opt_steps = 0, opt_seed = 0, opt_level = 0;
  CLI::App* sample_cmd = nullptr;

  for (const auto& name : sdlab::subcommand_names()) {
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    if (name == "sample") {
      sample_cmd = sub;
      sub->add_option("--combiner", opt_combiner, "collapsed | rectified | general");
      sub->add_option("--omega", opt_omega, "guidance scale");
      sub->add_option("--steps", opt_steps, "sampler steps");
      sub->add_option("--eta", opt_eta, "sampler stochasticity in [0, 1]");
      sub->add_option("--seed", opt_seed, "sampler seed");
      sub->add_option("--from-noise-level", opt_level,
                      "start from the input view noised to this level (0 = pure noise)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(sdlab::ExitCode::BadConfig);
  }

  try {
    sdlab::ExperimentConfig cfg = config_path.empty()
                                      ? sdlab::ExperimentConfig::defaults()
                                      : sdlab::ExperimentConfig::from_file(config_path);
    for (const auto& pair : overrides) cfg.set_pair(pair);

    if (sample_cmd != nullptr && sample_cmd->parsed()) {
      if (sample_cmd->count("--combiner")) cfg.set("sample.combiner", opt_combiner);
      if (sample_cmd->count("--omega")) cfg.set("guidance.omega", fmt_double(opt_omega));
      if (sample_cmd->count("--steps")) cfg.set("sample.steps", std::to_string(opt_steps));
      if (sample_cmd->count("--eta")) cfg.set("sample.eta", fmt_double(opt_eta));
      if (sample_cmd->count("--seed")) cfg.set("sample.seed", std::to_string(opt_seed));
      if (sample_cmd->count("--from-noise-level"))
        cfg.set("sample.from_noise_level", std::to_string(opt_level));
    }

    sdlab::run_subcommand(app.get_subcommands().front()->get_name(), cfg, out_dir);
    return static_cast<int>(sdlab::ExitCode::Ok);
  } catch (const sdlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(sdlab::ExitCode::BadConfig);
  } catch (const sdlab::NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return static_cast<int>(sdlab::ExitCode::Numerical);
  } catch (const sdlab::MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return static_cast<int>(sdlab::ExitCode::MissingArtifact);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
