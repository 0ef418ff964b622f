#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdeinfer/inference.hpp"
#include "sdeinfer/prior.hpp"
#include "sdeinfer/simulate.hpp"
#include "sdeinfer/validation.hpp"

namespace sdeinfer::cli {

enum class ExitCode : int { Ok = 0, Failure = 1, Config = 2, Io = 3 };

struct IoConfig {
    std::string output_dir = "out";
    /// Observation file for sample/map; defaults to <output_dir>/observations.json.
    /// The literal "none" runs without data.
    std::string observations;
    /// Sample file for map; defaults to <output_dir>/samples.jsonl.
    std::string samples;
};

struct ValidateConfig {
    std::size_t pcn_steps = 100000;
    double pcn_step = 0.5;
    std::size_t prior_draws = 10000;
    std::size_t hellinger_samples = 200;
};

struct RunConfig {
    std::string mode;
    std::uint64_t seed = 1;
    PriorConfig prior{};
    ChainConfig chain{};
    MapSearch map{};
    SimConfig sim{};
    IoConfig io{};
    ValidateConfig validate{};
    std::optional<std::size_t> truncate_k;
    bool quick = false;

    /// Builds from a JSON document; unknown keys and invalid values raise
    /// ConfigError naming the key path.
    static RunConfig from_json(const nlohmann::json& j);
    /// Every effective setting, mode excluded.
    nlohmann::json to_json() const;
    /// FNV-1a 64 of the canonical to_json() dump, in hex.
    std::string hash() const;
    void check() const;
};

/// Loads and validates a config file; IoError when unreadable.
RunConfig load_config(const std::string& path);

/// Entry point behind the executable; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sdeinfer::cli
