#pragma once

#include "sdlab/distill.hpp"

#include <map>
#include <string>
#include <vector>

namespace sdlab {

// Flat key=value experiment configuration. Files are line-based with '#'
// comments; every key must be known (typos fail loudly). The canonical
// serialization (sorted keys) feeds the config hash, so --set overrides
// change the hash exactly like file edits do.
class ExperimentConfig {
 public:
  static ExperimentConfig defaults();
  static ExperimentConfig from_file(const std::string& path);
  static const std::map<std::string, std::string>& default_map();

  void set(const std::string& key, const std::string& value);  // validates key
  // "key=value" form used by --set
  void set_pair(const std::string& pair);

  const std::string& str(const std::string& key) const;
  std::int64_t i64(const std::string& key) const;
  double f64(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> f64_list(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;

  std::string canonical() const;
  std::string hash() const;  // fnv1a of canonical(), 16 hex chars

  // typed builders
  NoiseSchedule schedule() const;
  WorldConfig world_config() const;
  std::uint64_t world_seed() const;
  BiasConfig bias_config(int dim) const;  // respects bias.enabled
  BiasMode bias_mode() const;
  DistillConfig distill_config() const;

 private:
  std::map<std::string, std::string> kv_;
};

std::uint64_t fnv1a(const std::string& bytes);
std::string fnv1a_hex(const std::string& bytes);

}  // namespace sdlab
