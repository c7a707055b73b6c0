#pragma once

#include <string>

#include "geovae/harness/train.hpp"

namespace geovae::harness {

/// Full run configuration file: schema-versioned nested key-value document.
/// Unknown keys are rejected with the offending key in the message.
struct RunConfig {
    static constexpr int schema_version = 1;

    TrainConfig train;
    std::string manifest_path;
    std::string corpus_root;

    std::string to_json() const;
    static RunConfig from_json(const std::string &text);
    static RunConfig load(const std::string &path);
};

/// Short collision-safe hash of the resolved config + seed.
std::string config_hash(const RunConfig &cfg);

/// <run_root>/<tag>-m<dim>-<hash>-s<seed>; run_root falls back to the
/// GEOVAE_RUN_ROOT environment variable, then "runs".
std::string run_directory(const RunConfig &cfg, const std::string &run_root_flag = "");

} // namespace geovae::harness
