#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "zest/objectives.hpp"
#include "zest/optimizer.hpp"

namespace zest::cli
{
    enum ExitCode : int
    {
        exit_ok = 0,
        exit_usage = 1,
        exit_io = 2,
        exit_schema = 3,
        exit_numeric = 4
    };

    /// Malformed or semantically invalid config file.
    class SchemaError : public ConfigError
    {
    public:
        using ConfigError::ConfigError;
    };

    using Json = nlohmann::ordered_json;

    inline constexpr int schema_version = 1;

    /// Builds an objective from {"name": ..., parameters}.
    std::unique_ptr<Objective> make_objective(const Json &spec);

    struct RunConfig
    {
        Json objective;
        OptimizerConfig optimizer;
        StoppingRule stopping;
        ParamVector x0;
        std::uint64_t seed = 0;
    };

    /// Validates a run config. `seed_override` replaces the config's seed.
    RunConfig parse_run_config(const Json &doc, std::optional<std::uint64_t> seed_override = std::nullopt);

    /// Trajectory CSV: iter,loss,x0..x{d-1} for d <= 8, otherwise iter,loss,x_norm,update_norm.
    std::string trajectory_csv(const RunResult &result);

    /// Last iterate of a trajectory CSV with coordinate columns.
    ParamVector read_final_iterate(const std::filesystem::path &csv_path);

    /// Entry point. Never throws; returns one of ExitCode.
    int main(int argc, const char *const *argv, std::ostream &out, std::ostream &err);
}
