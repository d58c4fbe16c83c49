#include "mob/embed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mob/rng.hpp"

using nlohmann::json;

namespace mob {

void TrainConfig::validate() const {
    if (dim < 1) throw ConfigError("embedding dim must be >= 1");
    if (window < 1) throw ConfigError("window must be >= 1");
    if (negatives < 1) throw ConfigError("negatives must be >= 1");
    if (!(lr_end > 0.0 && lr_end <= lr_start)) throw ConfigError("need 0 < lr_end <= lr_start");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
}

Vocab build_vocab(const std::vector<Trajectory>& trajs, const TrainConfig& cfg) {
    cfg.validate();
    std::unordered_map<std::string, int64_t> counts;
    for (const auto& traj : trajs)
        for (const auto& t : traj.tokens) ++counts[t.zone_id];

    std::vector<std::pair<std::string, int64_t>> kept;
    for (auto& [id, c] : counts)
        if (c >= cfg.min_count) kept.emplace_back(id, c);
    if (kept.empty())
        throw ConfigError("empty vocabulary: no zone reaches min_count=" +
                          std::to_string(cfg.min_count));
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return a.second > b.second || (a.second == b.second && a.first < b.first);
    });

    Vocab v;
    double z = 0.0;
    for (auto& [id, c] : kept) {
        v.index.emplace(id, static_cast<int32_t>(v.ids.size()));
        v.ids.push_back(id);
        v.counts.push_back(c);
        z += std::pow(static_cast<double>(c), cfg.noise_exponent);
    }
    v.noise_probs.reserve(kept.size());
    for (int64_t c : v.counts)
        v.noise_probs.push_back(std::pow(static_cast<double>(c), cfg.noise_exponent) / z);
    return v;
}

namespace {

constexpr double kSigmoidClamp = 30.0;

inline double sigmoid_clamped(double x) {
    if (x > kSigmoidClamp) x = kSigmoidClamp;
    if (x < -kSigmoidClamp) x = -kSigmoidClamp;
    return 1.0 / (1.0 + std::exp(-x));
}

inline double dot_f(const float* a, const float* b, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

}  // namespace

double sgns_loss(const EmbeddingModel& model, const SgnsExample& ex) {
    const int dim = model.cfg.dim;
    const float* vc = model.in_row(ex.center);
    double loss = -std::log(sigmoid_clamped(dot_f(model.out_row(ex.context), vc, dim)));
    for (int32_t n : ex.negatives)
        loss += -std::log(sigmoid_clamped(-dot_f(model.out_row(n), vc, dim)));
    return loss;
}

void sgns_grad(const EmbeddingModel& model, const SgnsExample& ex,
               std::vector<double>& grad_in, std::vector<double>& grad_out) {
    const int dim = model.cfg.dim;
    const size_t total = model.in_vectors.size();
    grad_in.assign(total, 0.0);
    grad_out.assign(total, 0.0);
    const float* vc = model.in_row(ex.center);
    double* gv = grad_in.data() + static_cast<size_t>(ex.center) * dim;

    auto term = [&](int32_t row, double label) {
        const float* u = model.out_row(row);
        double* gu = grad_out.data() + static_cast<size_t>(row) * dim;
        const double g = sigmoid_clamped(dot_f(u, vc, dim)) - label;
        for (int i = 0; i < dim; ++i) {
            gu[i] += g * vc[i];
            gv[i] += g * u[i];
        }
    };
    term(ex.context, 1.0);
    for (int32_t n : ex.negatives) term(n, 0.0);
}

double sgns_step(EmbeddingModel& model, const SgnsExample& ex, double lr) {
    const int dim = model.cfg.dim;
    float* vc = model.in_row(ex.center);

    // Pass 1: dots and loss at pristine parameters.
    const size_t k = ex.negatives.size();
    static thread_local std::vector<double> g_buf;
    g_buf.resize(k + 1);
    double* g = g_buf.data();
    const int32_t* rows_neg = ex.negatives.data();
    double loss;
    {
        const double d = dot_f(model.out_row(ex.context), vc, dim);
        const double s = sigmoid_clamped(d);
        g[0] = s - 1.0;
        loss = -std::log(s);
    }
    for (size_t t = 0; t < k; ++t) {
        const double d = dot_f(model.out_row(rows_neg[t]), vc, dim);
        g[t + 1] = sigmoid_clamped(d);
        loss += -std::log(sigmoid_clamped(-d));
    }

    // Pass 2: accumulate the center update from pristine u rows.
    static thread_local std::vector<float> neu;
    neu.assign(dim, 0.0f);
    {
        const float* u = model.out_row(ex.context);
        const float gf = static_cast<float>(g[0]);
        for (int i = 0; i < dim; ++i) neu[i] += gf * u[i];
    }
    for (size_t t = 0; t < k; ++t) {
        const float* u = model.out_row(rows_neg[t]);
        const float gf = static_cast<float>(g[t + 1]);
        for (int i = 0; i < dim; ++i) neu[i] += gf * u[i];
    }

    // Pass 3: apply. Out rows first (they use the pristine center), center last.
    const float lrf = static_cast<float>(lr);
    {
        float* u = model.out_row(ex.context);
        const float gf = static_cast<float>(g[0]) * lrf;
        for (int i = 0; i < dim; ++i) u[i] -= gf * vc[i];
    }
    for (size_t t = 0; t < k; ++t) {
        float* u = model.out_row(rows_neg[t]);
        const float gf = static_cast<float>(g[t + 1]) * lrf;
        for (int i = 0; i < dim; ++i) u[i] -= gf * vc[i];
    }
    for (int i = 0; i < dim; ++i) vc[i] -= lrf * neu[i];
    return loss;
}

namespace {

struct Corpus {
    std::vector<int32_t> data;
    std::vector<std::pair<uint32_t, uint32_t>> sentences;
    int64_t total_tokens = 0;
};

Corpus build_corpus(const std::vector<Trajectory>& trajs, const Vocab& vocab) {
    Corpus c;
    for (const auto& traj : trajs)
        for (const auto& [b, e] : traj.segments) {
            const uint32_t begin = static_cast<uint32_t>(c.data.size());
            for (uint32_t i = b; i < e; ++i) {
                const int32_t idx = vocab.lookup(traj.tokens[i].zone_id);
                if (idx >= 0) c.data.push_back(idx);
            }
            const uint32_t end = static_cast<uint32_t>(c.data.size());
            if (end - begin >= 2) {
                c.sentences.emplace_back(begin, end);
                c.total_tokens += end - begin;
            } else {
                c.data.resize(begin);
            }
        }
    return c;
}

// word2vec-style unigram table for O(1) noise draws.
std::vector<int32_t> build_noise_table(const Vocab& vocab, size_t table_size = 1u << 21) {
    std::vector<int32_t> table(table_size);
    size_t pos = 0;
    double cum = 0.0;
    for (int32_t w = 0; w < vocab.size(); ++w) {
        cum += vocab.noise_probs[w];
        const size_t until = std::min(table_size, static_cast<size_t>(cum * table_size + 0.5));
        while (pos < until) table[pos++] = w;
    }
    while (pos < table_size) table[pos++] = vocab.size() - 1;
    return table;
}

void check_finite(const EmbeddingModel& model) {
    for (float x : model.in_vectors)
        if (!std::isfinite(x)) throw NumericError("NaN/Inf detected in in-vectors");
    for (float x : model.out_vectors)
        if (!std::isfinite(x)) throw NumericError("NaN/Inf detected in out-vectors");
}

}  // namespace

EmbeddingModel train(const std::vector<Trajectory>& trajs, const TrainConfig& cfg, int threads) {
    cfg.validate();
    EmbeddingModel model;
    model.cfg = cfg;
    model.vocab = build_vocab(trajs, cfg);
    const int32_t vsize = model.vocab.size();
    const int dim = cfg.dim;

    Corpus corpus = build_corpus(trajs, model.vocab);
    if (corpus.sentences.empty()) throw ConfigError("empty corpus after vocabulary filtering");

    model.in_vectors.resize(static_cast<size_t>(vsize) * dim);
    model.out_vectors.assign(static_cast<size_t>(vsize) * dim, 0.0f);
    {
        Rng init_rng(cfg.seed);
        const double half = 0.5 / dim;
        for (auto& x : model.in_vectors)
            x = static_cast<float>(init_rng.uniform(-half, half));
    }

    const std::vector<int32_t> noise_table = build_noise_table(model.vocab);
    const double total_work =
        static_cast<double>(cfg.epochs) * static_cast<double>(corpus.total_tokens);

    if (threads < 1) threads = 1;
    if (threads > static_cast<int>(corpus.sentences.size()))
        threads = static_cast<int>(corpus.sentences.size());

    model.epoch_mean_loss.assign(cfg.epochs, 0.0);
    std::atomic<int64_t> processed{0};

    auto worker = [&](int tid, int epoch, double* loss_sum, int64_t* loss_terms) {
        Rng rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)), tid);
        SgnsExample ex;
        ex.negatives.resize(cfg.negatives);
        const size_t n_sent = corpus.sentences.size();
        const size_t lo = n_sent * tid / threads;
        const size_t hi = n_sent * (tid + 1) / threads;
        int64_t local_tokens = 0;
        double lr = cfg.lr_start;
        for (size_t si = lo; si < hi; ++si) {
            const auto [b, e] = corpus.sentences[si];
            for (uint32_t pos = b; pos < e; ++pos) {
                // Refresh the learning rate every few tokens, word2vec style.
                if ((local_tokens & 0xff) == 0) {
                    const int64_t done = processed.fetch_add(256, std::memory_order_relaxed);
                    const double frac = std::min(1.0, static_cast<double>(done) / total_work);
                    lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac;
                    if (lr < cfg.lr_end) lr = cfg.lr_end;
                }
                ++local_tokens;
                ex.center = corpus.data[pos];
                const uint32_t w_lo = pos >= b + cfg.window ? pos - cfg.window : b;
                const uint32_t w_hi = std::min<uint32_t>(e - 1, pos + cfg.window);
                for (uint32_t q = w_lo; q <= w_hi; ++q) {
                    if (q == pos) continue;
                    ex.context = corpus.data[q];
                    ex.negatives.clear();
                    for (int t = 0; t < cfg.negatives; ++t) {
                        const int32_t n = noise_table[rng.next_below(noise_table.size())];
                        if (n == ex.context) continue;  // skip the positive
                        ex.negatives.push_back(n);
                    }
                    *loss_sum += sgns_step(model, ex, lr);
                    ++*loss_terms;
                }
            }
        }
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<double> loss_sums(threads, 0.0);
        std::vector<int64_t> loss_terms(threads, 0);
        if (threads == 1) {
            worker(0, epoch, &loss_sums[0], &loss_terms[0]);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(threads);
            for (int t = 0; t < threads; ++t)
                pool.emplace_back(worker, t, epoch, &loss_sums[t], &loss_terms[t]);
            for (auto& th : pool) th.join();
        }
        double sum = 0.0;
        int64_t terms = 0;
        for (int t = 0; t < threads; ++t) {
            sum += loss_sums[t];
            terms += loss_terms[t];
        }
        model.epoch_mean_loss[epoch] = terms > 0 ? sum / static_cast<double>(terms) : 0.0;
        if (!std::isfinite(model.epoch_mean_loss[epoch]))
            throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
        check_finite(model);
    }
    return model;
}

std::vector<double> full_softmax_row(const EmbeddingModel& model, int32_t i) {
    const int dim = model.cfg.dim;
    const int32_t vsize = model.vocab.size();
    std::vector<double> logits(vsize);
    double mx = -1e300;
    for (int32_t j = 0; j < vsize; ++j) {
        logits[j] = dot_f(model.out_row(j), model.in_row(i), dim);
        mx = std::max(mx, logits[j]);
    }
    double z = 0.0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        z += l;
    }
    for (double& l : logits) l /= z;
    return logits;
}

double cosine_distance(const float* a, const float* b, int dim) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (int i = 0; i < dim; ++i) {
        ab += static_cast<double>(a[i]) * b[i];
        aa += static_cast<double>(a[i]) * a[i];
        bb += static_cast<double>(b[i]) * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw NumericError("cosine distance of zero-norm vector");
    return 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
}

double cosine_distance(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) throw NumericError("cosine distance dimension mismatch");
    return cosine_distance(a.data(), b.data(), static_cast<int>(a.size()));
}

std::vector<std::optional<double>> distance_table(
    const EmbeddingModel& model,
    const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::vector<std::optional<double>> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        const int32_t ia = model.vocab.lookup(a);
        const int32_t ib = model.vocab.lookup(b);
        if (ia < 0 || ib < 0) {
            out.emplace_back(std::nullopt);
            continue;
        }
        out.emplace_back(cosine_distance(model.in_row(ia), model.in_row(ib), model.cfg.dim));
    }
    return out;
}

namespace {

void write_matrix(const std::filesystem::path& path, const std::vector<float>& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    // float32 little-endian; this build targets little-endian hosts.
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(float)));
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<float> read_matrix(const std::filesystem::path& path, size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<size_t>(in.tellg());
    if (bytes != expected * sizeof(float))
        throw DataError("matrix size mismatch in " + path.string() + ": expected " +
                        std::to_string(expected * sizeof(float)) + " bytes, found " +
                        std::to_string(bytes));
    in.seekg(0);
    std::vector<float> m(expected);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw DataError("read failed: " + path.string());
    return m;
}

}  // namespace

void save_model(const EmbeddingModel& model, const std::filesystem::path& stem) {
    json vocab = json::array();
    for (int32_t i = 0; i < model.vocab.size(); ++i)
        vocab.push_back({model.vocab.ids[i], model.vocab.counts[i]});
    json j = {{"format", "mobarrier-embedding-v1"},
              {"dim", model.cfg.dim},
              {"window", model.cfg.window},
              {"min_count", model.cfg.min_count},
              {"negatives", model.cfg.negatives},
              {"noise_exponent", model.cfg.noise_exponent},
              {"epochs", model.cfg.epochs},
              {"lr_start", model.cfg.lr_start},
              {"lr_end", model.cfg.lr_end},
              {"seed", model.cfg.seed},
              {"vocab", vocab},
              {"epoch_mean_loss", model.epoch_mean_loss},
              {"in_matrix", stem.filename().string() + ".in.f32"},
              {"out_matrix", stem.filename().string() + ".out.f32"}};
    write_text_file(stem.string() + ".json", j.dump(2));
    write_matrix(stem.string() + ".in.f32", model.in_vectors);
    write_matrix(stem.string() + ".out.f32", model.out_vectors);
}

EmbeddingModel load_model(const std::filesystem::path& stem) {
    json j = json::parse(read_text_file(stem.string() + ".json"));
    if (j.value("format", "") != "mobarrier-embedding-v1")
        throw DataError("unrecognized model header: " + stem.string() + ".json");
    EmbeddingModel model;
    model.cfg.dim = j.at("dim").get<int>();
    model.cfg.window = j.at("window").get<int>();
    model.cfg.min_count = j.at("min_count").get<int>();
    model.cfg.negatives = j.at("negatives").get<int>();
    model.cfg.noise_exponent = j.at("noise_exponent").get<double>();
    model.cfg.epochs = j.at("epochs").get<int>();
    model.cfg.lr_start = j.at("lr_start").get<double>();
    model.cfg.lr_end = j.at("lr_end").get<double>();
    model.cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("epoch_mean_loss"))
        model.epoch_mean_loss = j.at("epoch_mean_loss").get<std::vector<double>>();
    for (const auto& entry : j.at("vocab")) {
        const auto id = entry[0].get<std::string>();
        model.vocab.index.emplace(id, model.vocab.size());
        model.vocab.ids.push_back(id);
        model.vocab.counts.push_back(entry[1].get<int64_t>());
    }
    double z = 0.0;
    for (int64_t c : model.vocab.counts)
        z += std::pow(static_cast<double>(c), model.cfg.noise_exponent);
    for (int64_t c : model.vocab.counts)
        model.vocab.noise_probs.push_back(
            std::pow(static_cast<double>(c), model.cfg.noise_exponent) / z);

    const size_t expected = static_cast<size_t>(model.vocab.size()) * model.cfg.dim;
    const auto dir = stem.parent_path();
    model.in_vectors = read_matrix(dir / j.at("in_matrix").get<std::string>(), expected);
    model.out_vectors = read_matrix(dir / j.at("out_matrix").get<std::string>(), expected);
    return model;
}

}  // namespace mob
