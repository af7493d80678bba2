#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gossipcd/experiments.hpp"

namespace gossipcd::config {

/// Parses and validates a config file. Throws ParseError on malformed JSON
/// and ValidationError naming the violated invariant otherwise.
experiments::ExperimentConfig load_config(const std::string& path);

/// Same, from an already-parsed document (used when re-running from a
/// manifest, whose "config" object is a complete resolved config).
experiments::ExperimentConfig config_from_json(const nlohmann::json& doc);

/// The document with all defaults materialized; this is what the manifest
/// embeds so a run can be reproduced byte-for-byte.
nlohmann::json resolved_config_json(const nlohmann::json& doc);

struct ManifestInfo {
    std::string subcommand;
    nlohmann::json resolved_config;
    bool has_seed = false;
    std::uint64_t master_seed = 0;
    nlohmann::json flags;  // subcommand-specific knobs
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
};

void write_manifest(const std::string& path, const ManifestInfo& info);

} // namespace gossipcd::config
