#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mob/ingest.hpp"

namespace mob {

struct TrainConfig {
    int dim = 300;
    int window = 1;
    int min_count = 50;
    int negatives = 5;
    double noise_exponent = 0.75;
    int epochs = 5;
    double lr_start = 0.025;
    double lr_end = 0.0001;
    uint64_t seed = 1;

    void validate() const;
};

struct Vocab {
    std::vector<std::string> ids;     // dense index -> zone id
    std::vector<int64_t> counts;      // corpus frequency per index
    std::vector<double> noise_probs;  // normalized count^noise_exponent
    std::unordered_map<std::string, int32_t> index;

    int32_t size() const { return static_cast<int32_t>(ids.size()); }
    int32_t lookup(const std::string& zone) const {
        auto it = index.find(zone);
        return it == index.end() ? -1 : it->second;
    }
};

// In-vectors are the v's used for all downstream distances; out-vectors are
// the u's of the sampling objective.
struct EmbeddingModel {
    TrainConfig cfg;
    Vocab vocab;
    std::vector<float> in_vectors;   // row-major |V| x dim
    std::vector<float> out_vectors;  // row-major |V| x dim
    std::vector<double> epoch_mean_loss;

    const float* in_row(int32_t i) const { return in_vectors.data() + static_cast<size_t>(i) * cfg.dim; }
    float* in_row(int32_t i) { return in_vectors.data() + static_cast<size_t>(i) * cfg.dim; }
    const float* out_row(int32_t i) const { return out_vectors.data() + static_cast<size_t>(i) * cfg.dim; }
    float* out_row(int32_t i) { return out_vectors.data() + static_cast<size_t>(i) * cfg.dim; }
};

// Vocabulary over the pruned corpus: zones seen >= min_count times, ordered
// by frequency (ties by id). Empty vocabulary is a configuration error.
Vocab build_vocab(const std::vector<Trajectory>& trajs, const TrainConfig& cfg);

struct SgnsExample {
    int32_t center;
    int32_t context;
    std::vector<int32_t> negatives;
};

// Negative log-likelihood of one example at the current parameters:
//   -log sigma(u_ctx . v_c) - sum_n log sigma(-u_n . v_c)
double sgns_loss(const EmbeddingModel& model, const SgnsExample& ex);

// Dense analytic gradient of sgns_loss, accumulated into |V| x dim buffers.
// Intended for small models (gradient checks, diagnostics).
void sgns_grad(const EmbeddingModel& model, const SgnsExample& ex,
               std::vector<double>& grad_in, std::vector<double>& grad_out);

// Applies one SGNS gradient step at rate lr and returns the example loss
// evaluated before the update. Duplicate indices within an example are
// accumulated, so the applied step equals the joint-loss gradient.
double sgns_step(EmbeddingModel& model, const SgnsExample& ex, double lr);

// Trains on day segments as sentences; pairs never cross segment boundaries.
// threads == 1 is the deterministic (bit-reproducible) mode; more threads run
// unsynchronized shared-row updates.
EmbeddingModel train(const std::vector<Trajectory>& trajs, const TrainConfig& cfg,
                     int threads = 1);

// Full-softmax row p(. | i) = exp(u_j . v_i) / Z_i, computed stably.
std::vector<double> full_softmax_row(const EmbeddingModel& model, int32_t i);

// 1 - a.b / (|a||b|), in [0, 2]. Zero-norm input is a domain error.
double cosine_distance(const float* a, const float* b, int dim);
double cosine_distance(const std::vector<float>& a, const std::vector<float>& b);

// In-vector cosine distances for zone-id pairs; out-of-vocab pairs yield
// nullopt rather than failing the whole table.
std::vector<std::optional<double>> distance_table(
    const EmbeddingModel& model, const std::vector<std::pair<std::string, std::string>>& pairs);

// JSON header + raw little-endian float32 matrices ({stem}.in.f32/.out.f32).
void save_model(const EmbeddingModel& model, const std::filesystem::path& stem);
EmbeddingModel load_model(const std::filesystem::path& stem);

}  // namespace mob
