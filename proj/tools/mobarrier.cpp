#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "mob/io.hpp"
#include "mob/pipeline.hpp"

// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
int main(int argc, char** argv) {
    CLI::App app{"Mobility-barrier pipeline: zone embeddings, gravity fits, barrier "
                 "detection, and behavioral summaries over synthetic or prepared inputs"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<int> threads;
    bool deterministic = false;
    app.add_option("--config", config_path, "pipeline config JSON")->required();
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--threads", threads, "worker cap for parallel stages");
    app.add_flag("--deterministic", deterministic,
                 "single-threaded seeded execution for reproducible artifacts");

    for (const auto& name : mob::stage_names()) app.add_subcommand(name);
    auto* all = app.add_subcommand("all", "run every stage in order");

    CLI11_PARSE(app, argc, argv);

    try {
        mob::PipelineConfig cfg = mob::pipeline_config_from_file(config_path);
        mob::apply_overrides(cfg, seed, threads, deterministic);
        if (all->parsed()) {
            mob::run_all(cfg);
        } else {
            for (const auto& name : mob::stage_names())
                if (app.get_subcommand(name)->parsed()) mob::run_stage(name, cfg);
        }
        return 0;
    } catch (const mob::ConfigError& e) {
        fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const mob::DataError& e) {
        fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const mob::NumericError& e) {
        fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
