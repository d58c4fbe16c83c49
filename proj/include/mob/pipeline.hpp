#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mob/barriers.hpp"
#include "mob/embed.hpp"
#include "mob/ingest.hpp"
#include "mob/synth.hpp"

namespace mob {

struct PipelineConfig {
    std::filesystem::path workdir = "out";
    uint64_t seed = 12345;
    int threads = 1;
    bool deterministic = false;
    SynthConfig synth;
    IngestConfig ingest;
    TrainConfig train;
    double barrier_q_main = 0.05;
    double barrier_q_soft = 0.25;
    bool disaggregate_poi = true;

    // Stage directories under workdir.
    std::filesystem::path dir(const char* stage) const { return workdir / stage; }
};

PipelineConfig pipeline_config_from_file(const std::filesystem::path& path);
std::string pipeline_config_to_json(const PipelineConfig& cfg);

// Applies --seed / --threads / --deterministic overrides uniformly.
void apply_overrides(PipelineConfig& cfg, std::optional<uint64_t> seed,
                     std::optional<int> threads, bool deterministic);

void stage_synth(const PipelineConfig& cfg);
void stage_ingest(const PipelineConfig& cfg);
void stage_embed(const PipelineConfig& cfg);
void stage_gravity(const PipelineConfig& cfg);
void stage_detect(const PipelineConfig& cfg);
void stage_features(const PipelineConfig& cfg);
void stage_regress(const PipelineConfig& cfg);
void stage_lrt(const PipelineConfig& cfg);
void stage_cbr(const PipelineConfig& cfg);
void stage_report(const PipelineConfig& cfg);

// All stages in order; equivalent to running the subcommands sequentially.
void run_all(const PipelineConfig& cfg);

const std::vector<std::string>& stage_names();
void run_stage(const std::string& name, const PipelineConfig& cfg);

// Digest of every artifact under the workdir (sorted), for determinism audits.
std::string workdir_digest(const std::filesystem::path& workdir);

// The zone pairs eligible for barrier ranking: both zones in vocabulary and
// 0 < d_phys <= 20 km, with in-vector cosine distances attached.
std::vector<PairDistance> eligible_pair_distances(const EmbeddingModel& model,
                                                  const ZoneMap& zones);

}  // namespace mob
