#pragma once

#include "sdlab/config.hpp"
#include "sdlab/experiments.hpp"

#include <string>
#include <vector>

namespace sdlab {

// Exit contract of the CLI.
enum class ExitCode : int {
  Ok = 0,
  BadConfig = 2,
  Numerical = 3,
  MissingArtifact = 4,
};

struct MissingArtifact : std::runtime_error {
  explicit MissingArtifact(const std::string& what) : std::runtime_error(what) {}
};

const std::vector<std::string>& subcommand_names();

// Runs one subcommand, writing its artifacts (csv + json + svg) into out_dir.
// Throws ConfigError / NumericalAbort / MissingArtifact; returns normally on
// success.
void run_subcommand(const std::string& name, const ExperimentConfig& cfg,
                    const std::string& out_dir);

// CSV serialization of a sweep (schema: experiment,cell,seed,metric,value).
std::string sweep_csv(const SweepResult& r);

std::string format_value(double v);  // canonical %.12g

}  // namespace sdlab
