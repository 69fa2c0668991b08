#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "apgx/trainer.hpp"

namespace apgx {

// Config files are flat `key = value` text grouped in [run] / [apg] / [ppo]
// sections; '#' or ';' starts a comment. Unknown sections or keys are hard
// errors carrying "<source>:<line>". run.env is required; everything else
// falls back to the per-environment defaults.
TrainConfig parse_config(std::istream& in, const std::string& source_name);
TrainConfig parse_config_file(const std::string& path);

// Canonical form: every key, shortest exact decimal values. Feeding the
// output back through parse_config reproduces the same config.
std::string serialize_config(const TrainConfig& cfg);

// key is "section.key" as in the file, e.g. "ppo.lanes".
void apply_override(TrainConfig& cfg, const std::string& key,
                    const std::string& value);

// Shortest decimal string that parses back to exactly x.
std::string format_double(double x);

struct RunManifest {
  std::string command;        // train / compare / sweep
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::string mode;
  std::string config_snapshot;         // serialize_config output
  std::vector<std::string> csv_files;  // every CSV this run emits
};

std::string version_string();
void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace apgx
