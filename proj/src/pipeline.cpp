#include "mob/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "mob/behavior.hpp"
#include "mob/features.hpp"
#include "mob/gravity.hpp"
#include "mob/stats.hpp"

using nlohmann::json;

namespace fs = std::filesystem;

namespace mob {

namespace {

constexpr const char* kVersion = "mobarrier 1.0.0";

void require_input(const fs::path& p) {
    if (!fs::exists(p)) throw DataError("missing input: " + p.string());
}

json load_json(const fs::path& p) {
    require_input(p);
    return json::parse(read_text_file(p));
}

// Provenance record per stage: input/output digests plus the config digest.
void append_manifest(const PipelineConfig& cfg, const std::string& stage,
                     const std::vector<fs::path>& inputs,
                     const std::vector<fs::path>& outputs) {
    json rec = {{"stage", stage}, {"version", kVersion}};
    const std::string cfg_json = pipeline_config_to_json(cfg);
    rec["config_digest"] = sha256_bytes(cfg_json.data(), cfg_json.size());
    json in = json::object(), out = json::object();
    for (const auto& p : inputs)
        if (fs::exists(p)) in[fs::relative(p, cfg.workdir).string()] = sha256_file(p);
    for (const auto& p : outputs)
        if (fs::exists(p)) out[fs::relative(p, cfg.workdir).string()] = sha256_file(p);
    rec["inputs"] = in;
    rec["outputs"] = out;
    std::ofstream f(cfg.workdir / "run_manifest.jsonl", std::ios::app);
    f << rec.dump() << "\n";
}

int effective_threads(const PipelineConfig& cfg) {
    return cfg.deterministic ? 1 : std::max(1, cfg.threads);
}

}  // namespace

PipelineConfig pipeline_config_from_file(const fs::path& path) {
    json j = load_json(path);
    PipelineConfig cfg;
    cfg.workdir = j.value("workdir", std::string("out"));
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.deterministic = j.value("deterministic", cfg.deterministic);
    if (j.contains("synth")) cfg.synth = synth_config_from_json(j["synth"].dump());
    if (j.contains("ingest")) {
        const auto& i = j["ingest"];
        cfg.ingest.min_stays_total = i.value("min_stays_total", cfg.ingest.min_stays_total);
        cfg.ingest.min_stays_per_day = i.value("min_stays_per_day", cfg.ingest.min_stays_per_day);
        cfg.ingest.max_gap_s = i.value("max_gap_s", cfg.ingest.max_gap_s);
        cfg.ingest.merge_radius_m = i.value("merge_radius_m", cfg.ingest.merge_radius_m);
        cfg.ingest.flow_quantile_lo = i.value("flow_quantile_lo", cfg.ingest.flow_quantile_lo);
        cfg.ingest.flow_quantile_hi = i.value("flow_quantile_hi", cfg.ingest.flow_quantile_hi);
        cfg.ingest.poi_attach_max_m = i.value("poi_attach_max_m", cfg.ingest.poi_attach_max_m);
        cfg.ingest.day_offset_s = i.value("day_offset_s", cfg.ingest.day_offset_s);
    }
    if (j.contains("embed")) {
        const auto& e = j["embed"];
        cfg.train.dim = e.value("dim", cfg.train.dim);
        cfg.train.window = e.value("window", cfg.train.window);
        cfg.train.min_count = e.value("min_count", cfg.train.min_count);
        cfg.train.negatives = e.value("negatives", cfg.train.negatives);
        cfg.train.noise_exponent = e.value("noise_exponent", cfg.train.noise_exponent);
        cfg.train.epochs = e.value("epochs", cfg.train.epochs);
        cfg.train.lr_start = e.value("lr_start", cfg.train.lr_start);
        cfg.train.lr_end = e.value("lr_end", cfg.train.lr_end);
    }
    if (j.contains("barriers")) {
        cfg.barrier_q_main = j["barriers"].value("q_main", cfg.barrier_q_main);
        cfg.barrier_q_soft = j["barriers"].value("q_soft", cfg.barrier_q_soft);
    }
    if (j.contains("regress"))
        cfg.disaggregate_poi = j["regress"].value("disaggregate", cfg.disaggregate_poi);
    cfg.synth.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    return cfg;
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
    json j = {{"workdir", cfg.workdir.string()},
              {"seed", cfg.seed},
              {"threads", cfg.threads},
              {"deterministic", cfg.deterministic},
              {"synth", json::parse(synth_config_to_json(cfg.synth))},
              {"ingest",
               {{"min_stays_total", cfg.ingest.min_stays_total},
                {"min_stays_per_day", cfg.ingest.min_stays_per_day},
                {"max_gap_s", cfg.ingest.max_gap_s},
                {"merge_radius_m", cfg.ingest.merge_radius_m},
                {"flow_quantile_lo", cfg.ingest.flow_quantile_lo},
                {"flow_quantile_hi", cfg.ingest.flow_quantile_hi},
                {"poi_attach_max_m", cfg.ingest.poi_attach_max_m},
                {"day_offset_s", cfg.ingest.day_offset_s}}},
              {"embed",
               {{"dim", cfg.train.dim},
                {"window", cfg.train.window},
                {"min_count", cfg.train.min_count},
                {"negatives", cfg.train.negatives},
                {"noise_exponent", cfg.train.noise_exponent},
                {"epochs", cfg.train.epochs},
                {"lr_start", cfg.train.lr_start},
                {"lr_end", cfg.train.lr_end}}},
              {"barriers", {{"q_main", cfg.barrier_q_main}, {"q_soft", cfg.barrier_q_soft}}},
              {"regress", {{"disaggregate", cfg.disaggregate_poi}}}};
    return j.dump(2);
}

void apply_overrides(PipelineConfig& cfg, std::optional<uint64_t> seed,
                     std::optional<int> threads, bool deterministic) {
    if (seed) {
        cfg.seed = *seed;
        cfg.synth.seed = *seed;
        cfg.train.seed = *seed;
    }
    if (threads) cfg.threads = *threads;
    if (deterministic) cfg.deterministic = true;
}

void stage_synth(const PipelineConfig& cfg) {
    const fs::path dir = cfg.dir("synth");
    SynthCity city = generate_city(cfg.synth);
    std::vector<Stay> stays = generate_trajectories(cfg.synth, city);
    write_city(dir, cfg.synth, city, stays);
    append_manifest(cfg, "synth", {},
                    {dir / "zones.geojson", dir / "pois.csv", dir / "demographics.csv",
                     dir / "barrier_layers.geojson", dir / "truth.json", dir / "stays.csv"});
}

void stage_ingest(const PipelineConfig& cfg) {
    const fs::path in_dir = cfg.dir("synth");
    const fs::path dir = cfg.dir("ingest");
    fs::create_directories(dir);
    require_input(in_dir / "stays.csv");

    StayParseResult parsed = read_stays_csv(in_dir / "stays.csv");
    IngestReport report;
    report.input_records += parsed.bad_time + parsed.bad_coord;
    report.rejected_bad_time += parsed.bad_time;
    report.rejected_bad_coord += parsed.bad_coord;

    bool needs_zoning = false;
    for (const auto& s : parsed.stays)
        if (s.zone_id.empty()) {
            needs_zoning = true;
            break;
        }
    if (needs_zoning) {
        require_input(in_dir / "zones.geojson");
        ZoneMap zones = read_zones_geojson(in_dir / "zones.geojson");
        assign_zones(parsed.stays, zones);
    }

    std::vector<Trajectory> trajs = build_trajectories(parsed.stays, cfg.ingest, report);
    PruneResult pruned = prune_flows(std::move(trajs), cfg.ingest, report);

    write_trajectories(dir / "trajectories.csv", pruned.trajectories);
    write_excluded_pairs(dir / "excluded_pairs.csv", pruned.excluded_pairs);
    write_text_file(dir / "ingest_report.json", report.to_json());
    append_manifest(cfg, "ingest", {in_dir / "stays.csv"},
                    {dir / "trajectories.csv", dir / "excluded_pairs.csv",
                     dir / "ingest_report.json"});
}

void stage_embed(const PipelineConfig& cfg) {
    const fs::path in = cfg.dir("ingest") / "trajectories.csv";
    const fs::path dir = cfg.dir("embed");
    fs::create_directories(dir);
    require_input(in);
    std::vector<Trajectory> trajs = read_trajectories(in);
    EmbeddingModel model = train(trajs, cfg.train, effective_threads(cfg));
    save_model(model, dir / "model");
    append_manifest(cfg, "embed", {in},
                    {dir / "model.json", dir / "model.in.f32", dir / "model.out.f32"});
}

std::vector<PairDistance> eligible_pair_distances(const EmbeddingModel& model,
                                                  const ZoneMap& zones) {
    std::vector<std::string> ids;
    for (const auto& id : model.vocab.ids)
        if (zones.contains(id)) ids.push_back(id);
    std::sort(ids.begin(), ids.end());

    std::vector<PairDistance> out;
    for (size_t i = 0; i < ids.size(); ++i) {
        const ZoneShape& zi = zones.at(ids[i]);
        const int32_t vi = model.vocab.lookup(ids[i]);
        for (size_t j = i + 1; j < ids.size(); ++j) {
            const ZoneShape& zj = zones.at(ids[j]);
            const double d = great_circle_km(zi.centroid, zj.centroid);
            if (d <= 0.0 || d > kMaxPairKm) continue;
            PairDistance p;
            p.zone_i = ids[i];
            p.zone_j = ids[j];
            p.d_phys_km = d;
            p.d_embed = cosine_distance(model.in_row(vi),
                                        model.in_row(model.vocab.lookup(ids[j])), model.cfg.dim);
            out.push_back(std::move(p));
        }
    }
    return out;
}

void stage_gravity(const PipelineConfig& cfg) {
    const fs::path traj_path = cfg.dir("ingest") / "trajectories.csv";
    const fs::path dir = cfg.dir("gravity");
    fs::create_directories(dir);
    require_input(traj_path);
    require_input(cfg.dir("synth") / "zones.geojson");

    std::vector<Trajectory> trajs = read_trajectories(traj_path);
    FlowMatrix flows = aggregate_flows(trajs);
    write_flow_matrix(dir / "flows.csv", dir / "masses.csv", flows);

    EmbeddingModel model = load_model(cfg.dir("embed") / "model");
    ZoneMap zones = read_zones_geojson(cfg.dir("synth") / "zones.geojson");

    // Same nonzero-flow in-vocabulary pair set for both predictors.
    std::vector<GravitySample> geo_samples, emb_samples;
    std::map<ZonePairKey, int64_t> sym;
    for (const auto& [key, c] : flows.counts) sym[ZonePairKey(key.first, key.second)] += c;
    for (const auto& [pair, flow] : sym) {
        if (flow <= 0) continue;
        const int32_t vi = model.vocab.lookup(pair.a);
        const int32_t vj = model.vocab.lookup(pair.b);
        if (vi < 0 || vj < 0 || !zones.contains(pair.a) || !zones.contains(pair.b)) continue;
        const double d = great_circle_km(zones.at(pair.a).centroid, zones.at(pair.b).centroid);
        if (d <= 0.0) continue;
        GravitySample g;
        g.zone_i = pair.a;
        g.zone_j = pair.b;
        g.flow_sym = flow;
        g.mass_product = static_cast<double>(flows.mass(pair.a)) * flows.mass(pair.b);
        g.predictor = std::log10(d);
        geo_samples.push_back(g);
        g.predictor = cosine_distance(model.in_row(vi), model.in_row(vj), model.cfg.dim);
        emb_samples.push_back(std::move(g));
    }
    GravityFit fit_geo = fit_normalized_flux(geo_samples, GravityPredictor::log_geo);
    GravityFit fit_emb = fit_normalized_flux(emb_samples, GravityPredictor::embed_cosine);
    write_text_file(dir / "fit_geo.json", gravity_fit_to_json(fit_geo));
    write_text_file(dir / "fit_embed.json", gravity_fit_to_json(fit_emb));
    json rep = {{"r2_gap_embed_minus_geo", r2_gap(fit_emb, fit_geo)},
                {"n_pairs", fit_geo.n}};
    write_text_file(dir / "gravity_report.json", rep.dump(2));
    append_manifest(cfg, "gravity", {traj_path},
                    {dir / "flows.csv", dir / "masses.csv", dir / "fit_geo.json",
                     dir / "fit_embed.json", dir / "gravity_report.json"});
}

void stage_detect(const PipelineConfig& cfg) {
    const fs::path dir = cfg.dir("detect");
    fs::create_directories(dir);
    require_input(cfg.dir("embed") / "model.json");
    require_input(cfg.dir("synth") / "zones.geojson");
    require_input(cfg.dir("ingest") / "excluded_pairs.csv");
    require_input(cfg.dir("gravity") / "flows.csv");

    EmbeddingModel model = load_model(cfg.dir("embed") / "model");
    ZoneMap zones = read_zones_geojson(cfg.dir("synth") / "zones.geojson");
    ExcludedPairSet excluded = read_excluded_pairs(cfg.dir("ingest") / "excluded_pairs.csv");
    FlowMatrix flows =
        read_flow_matrix(cfg.dir("gravity") / "flows.csv", cfg.dir("gravity") / "masses.csv");

    std::vector<PairDistance> pairs = eligible_pair_distances(model, zones);

    const ResidualModel residual = fit_residual_model([&] {
        std::vector<PairDistance> fit_pairs = pairs;
        std::erase_if(fit_pairs, [&](const PairDistance& p) {
            return excluded.count(ZonePairKey(p.zone_i, p.zone_j)) > 0;
        });
        return fit_pairs;
    }());
    json rm = {{"beta", residual.beta}, {"intercept", residual.intercept}};
    write_text_file(dir / "residual_model.json", rm.dump(2));

    BarrierSet main_set = detect_barriers(pairs, excluded, cfg.barrier_q_main, BarrierMode::main);
    write_barriers_csv(dir / "barriers_main.csv", main_set);

    std::vector<PairDistance> nonzero = pairs;
    std::erase_if(nonzero, [&](const PairDistance& p) {
        return flows.symmetric(p.zone_i, p.zone_j) <= 0;
    });
    BarrierSet soft_set = detect_barriers(nonzero, excluded, cfg.barrier_q_soft, BarrierMode::soft);
    write_barriers_csv(dir / "barriers_soft.csv", soft_set);

    std::vector<fs::path> outputs = {dir / "residual_model.json", dir / "barriers_main.csv",
                                     dir / "barriers_soft.csv"};
    const fs::path truth_path = cfg.dir("synth") / "truth.json";
    if (fs::exists(truth_path)) {
        PlantedTruth truth = read_truth_json(truth_path);
        ExcludedPairSet eligible;
        for (const auto& p : pairs) {
            ZonePairKey key(p.zone_i, p.zone_j);
            if (!excluded.count(key)) eligible.insert(std::move(key));
        }
        RecoveryMetrics m = evaluate_recovery(main_set, truth, eligible);
        json rec = {{"precision", m.precision}, {"recall", m.recall},
                    {"flagged", m.flagged},    {"truth_eligible", m.truth_eligible},
                    {"hits", m.hits}};
        write_text_file(dir / "recovery.json", rec.dump(2));
        outputs.push_back(dir / "recovery.json");
    }
    append_manifest(cfg, "detect",
                    {cfg.dir("embed") / "model.json", cfg.dir("ingest") / "excluded_pairs.csv"},
                    outputs);
}

void stage_features(const PipelineConfig& cfg) {
    const fs::path dir = cfg.dir("features");
    fs::create_directories(dir);
    const fs::path synth = cfg.dir("synth");
    for (const char* f : {"zones.geojson", "pois.csv", "demographics.csv",
                          "barrier_layers.geojson"})
        require_input(synth / f);
    require_input(cfg.dir("embed") / "model.json");

    ZoneMap zones = read_zones_geojson(synth / "zones.geojson");
    std::vector<Poi> pois = read_pois_csv(synth / "pois.csv");
    std::vector<DemographicProfile> demo = read_demographics_csv(synth / "demographics.csv");
    std::vector<BarrierLayer> layers = read_barrier_layers_geojson(synth / "barrier_layers.geojson");
    EmbeddingModel model = load_model(cfg.dir("embed") / "model");

    std::vector<PairDistance> pairs = eligible_pair_distances(model, zones);
    AssembleResult res = assemble_pair_features(zones, pois, layers, demo, pairs);
    write_features_csv(dir / "pair_features.csv", res.rows);
    json rep = {{"rows", res.rows.size()}, {"dropped_missing_demo", res.dropped_missing_demo}};
    write_text_file(dir / "features_report.json", rep.dump(2));
    append_manifest(cfg, "features", {synth / "pois.csv", synth / "demographics.csv"},
                    {dir / "pair_features.csv", dir / "features_report.json"});
}

namespace {

std::map<int, std::vector<PairFeatureRow>> balanced_design_rows(const PipelineConfig& cfg) {
    require_input(cfg.dir("features") / "pair_features.csv");
    require_input(cfg.dir("detect") / "barriers_main.csv");
    std::vector<PairFeatureRow> rows = read_features_csv(cfg.dir("features") / "pair_features.csv");
    BarrierSet barriers = read_barriers_csv(cfg.dir("detect") / "barriers_main.csv");
    return balanced_sample(rows, barriers, cfg.seed);
}

void write_fit_rows(std::vector<std::vector<std::string>>& out, int bin,
                    const DesignMatrix& design, const LogisticFit& fit) {
    for (int c = 0; c < design.n_features(); ++c) {
        const auto& col = design.columns[c];
        out.push_back({std::to_string(bin), col.name, to_string(col.group),
                       format_double(fit.beta(c + 1)), format_double(fit.se(c + 1)),
                       format_double(fit.p_values[static_cast<size_t>(c) + 1]),
                       format_double(odds_ratio(fit.beta(c + 1))),
                       fit.converged ? "1" : "0", fit.penalized ? "1" : "0"});
    }
    out.push_back({std::to_string(bin), "const", "", format_double(fit.beta(0)),
                   format_double(fit.se(0)), format_double(fit.p_values[0]),
                   format_double(odds_ratio(fit.beta(0))), fit.converged ? "1" : "0",
                   fit.penalized ? "1" : "0"});
}

}  // namespace

void stage_regress(const PipelineConfig& cfg) {
    const fs::path dir = cfg.dir("regress");
    fs::create_directories(dir);
    auto by_bin = balanced_design_rows(cfg);

    const std::vector<std::string> header = {"bin",  "variable",   "group",
                                             "estimate", "se",     "p",
                                             "odds_ratio", "converged", "penalized"};
    std::vector<std::vector<std::string>> main_rows, disagg_rows;
    for (const auto& [bin, rows] : by_bin) {
        if (rows.empty()) continue;
        DesignMatrix d = standardize(rows, bin, false);
        LogisticFit fit = fit_logistic(d);
        write_fit_rows(main_rows, bin, d, fit);
        if (cfg.disaggregate_poi) {
            DesignMatrix dd = standardize(rows, bin, true);
            LogisticFit dfit = fit_logistic(dd);
            write_fit_rows(disagg_rows, bin, dd, dfit);
        }
    }
    write_csv(dir / "coefficients.csv", header, main_rows);
    std::vector<fs::path> outputs = {dir / "coefficients.csv"};
    if (cfg.disaggregate_poi) {
        write_csv(dir / "coefficients_disagg.csv", header, disagg_rows);
        outputs.push_back(dir / "coefficients_disagg.csv");
    }
    append_manifest(cfg, "regress",
                    {cfg.dir("features") / "pair_features.csv",
                     cfg.dir("detect") / "barriers_main.csv"},
                    outputs);
}

void stage_lrt(const PipelineConfig& cfg) {
    const fs::path dir = cfg.dir("lrt");
    fs::create_directories(dir);
    auto by_bin = balanced_design_rows(cfg);

    std::vector<std::vector<std::string>> rows;
    for (const auto& [bin, bin_rows] : by_bin) {
        if (bin_rows.empty()) continue;
        DesignMatrix d = standardize(bin_rows, bin, false);
        for (const LRTResult& r : lrt_group_ablation(d))
            rows.push_back({std::to_string(bin), to_string(r.dropped_group),
                            format_double(r.lambda), std::to_string(r.dof),
                            format_double(r.normalized_share)});
    }
    write_csv(dir / "lrt_shares.csv", {"bin", "group", "lambda", "dof", "normalized_share"},
              rows);
    append_manifest(cfg, "lrt",
                    {cfg.dir("features") / "pair_features.csv",
                     cfg.dir("detect") / "barriers_main.csv"},
                    {dir / "lrt_shares.csv"});
}

void stage_cbr(const PipelineConfig& cfg) {
    const fs::path dir = cfg.dir("cbr");
    fs::create_directories(dir);
    require_input(cfg.dir("ingest") / "trajectories.csv");
    require_input(cfg.dir("detect") / "barriers_soft.csv");
    require_input(cfg.dir("synth") / "pois.csv");
    require_input(cfg.dir("synth") / "demographics.csv");

    std::vector<Trajectory> trajs = read_trajectories(cfg.dir("ingest") / "trajectories.csv");
    BarrierSet soft = read_barriers_csv(cfg.dir("detect") / "barriers_soft.csv");
    std::vector<Poi> pois = read_pois_csv(cfg.dir("synth") / "pois.csv");

    TokenAttribution attribution =
        attribute_trajectories(trajs, pois, cfg.ingest.poi_attach_max_m);
    std::vector<Movement> movements = classify_movements(trajs, soft, attribution);
    write_movements_csv(dir / "movements.csv", movements);

    std::map<std::string, std::string> homes;
    for (const auto& t : trajs)
        if (!t.home_zone.empty()) homes[t.user_id] = t.home_zone;
    std::vector<UserCbr> ratios = cbr(movements, homes);
    write_cbr_csv(dir / "cbr.csv", ratios);

    ActivitySummaries summaries = activity_summaries(movements);
    write_summaries(dir / "hourly.csv", dir / "categories.csv", dir / "exploration.csv",
                    summaries);

    // Fixed-effects regression of the ratio on the five home-zone variables;
    // the county plays the metro-area role in the synthetic setting.
    std::vector<DemographicProfile> demo =
        read_demographics_csv(cfg.dir("synth") / "demographics.csv");
    std::map<std::string, const DemographicProfile*> demo_by_zone;
    for (const auto& d : demo) demo_by_zone[d.zone_id] = &d;

    std::vector<const UserCbr*> usable;
    for (const auto& u : ratios)
        if (!u.home_zone.empty() && demo_by_zone.count(u.home_zone)) usable.push_back(&u);
    json fe_report;
    if (usable.size() >= 10) {
        FePanel panel;
        panel.names = {"Employed Ratio", "Trans. Public", "Racial Diversity", "Poverty Ratio",
                       "Population"};
        panel.X.resize(static_cast<Eigen::Index>(usable.size()), 5);
        panel.y.resize(static_cast<Eigen::Index>(usable.size()));
        std::map<std::string, int32_t> group_ids;
        for (size_t i = 0; i < usable.size(); ++i) {
            const auto* d = demo_by_zone[usable[i]->home_zone];
            panel.X(static_cast<Eigen::Index>(i), 0) = d->employed_ratio;
            panel.X(static_cast<Eigen::Index>(i), 1) = d->transit_share;
            panel.X(static_cast<Eigen::Index>(i), 2) = d->racial_diversity;
            panel.X(static_cast<Eigen::Index>(i), 3) = d->poverty_ratio;
            panel.X(static_cast<Eigen::Index>(i), 4) = d->population;
            panel.y(static_cast<Eigen::Index>(i)) = usable[i]->ratio;
            auto [it, _] = group_ids.emplace(d->county_id, static_cast<int32_t>(group_ids.size()));
            panel.group.push_back(it->second);
        }
        standardize_columns_global(panel.X);
        FeFit fit = fit_linear_fe(panel);
        json coeffs = json::array();
        for (Eigen::Index c = 0; c < fit.beta.size(); ++c)
            coeffs.push_back({{"variable", panel.names[static_cast<size_t>(c)]},
                              {"estimate", fit.beta(c)},
                              {"se_clustered", fit.se(c)}});
        fe_report = {{"coefficients", coeffs},
                     {"r2", fit.r2},
                     {"within_r2", fit.within_r2},
                     {"n", fit.n},
                     {"groups", fit.n_groups},
                     {"single_group", fit.single_group}};
    } else {
        fe_report = {{"skipped", "fewer than 10 users with usable home zones"}};
    }
    write_text_file(dir / "cbr_regression.json", fe_report.dump(2));

    append_manifest(cfg, "cbr",
                    {cfg.dir("ingest") / "trajectories.csv",
                     cfg.dir("detect") / "barriers_soft.csv"},
                    {dir / "movements.csv", dir / "cbr.csv", dir / "hourly.csv",
                     dir / "categories.csv", dir / "exploration.csv",
                     dir / "cbr_regression.json"});
}

void stage_report(const PipelineConfig& cfg) {
    const fs::path dir = cfg.dir("report");
    fs::create_directories(dir);

    json computed = json::object();
    auto maybe = [&](const char* key, const fs::path& p) {
        if (fs::exists(p)) computed[key] = load_json(p);
    };
    maybe("ingest", cfg.dir("ingest") / "ingest_report.json");
    maybe("gravity", cfg.dir("gravity") / "gravity_report.json");
    maybe("gravity_fit_geo", cfg.dir("gravity") / "fit_geo.json");
    maybe("gravity_fit_embed", cfg.dir("gravity") / "fit_embed.json");
    maybe("recovery", cfg.dir("detect") / "recovery.json");
    maybe("cbr_regression", cfg.dir("cbr") / "cbr_regression.json");
    if (fs::exists(cfg.dir("cbr") / "cbr.csv")) {
        const auto rows = read_cbr_csv(cfg.dir("cbr") / "cbr.csv");
        int64_t zero = 0;
        for (const auto& u : rows)
            if (u.n_cross == 0) ++zero;
        computed["share_zero_cbr"] =
            rows.empty() ? 0.0 : static_cast<double>(zero) / static_cast<double>(rows.size());
    }

    // Published reference values from the original large-scale mobility
    // analyses. Kept apart from computed values: desk-scale synthetic runs
    // are not expected to reproduce them.
    json reference = {
        {"note",
         "External reference values from published metropolitan mobility analyses; "
         "provided for orientation only, never asserted against this run."},
        {"boston_r2_embedding", 0.61},
        {"boston_r2_geographic", 0.33},
        {"mean_r2_gap_11_metros", 0.185},
        {"share_users_zero_cbr_2019", 0.565},
        {"median_stay_to_venue_attribution_m", 20.6}};

    json report = {{"version", kVersion},
                   {"computed", computed},
                   {"reference_values", reference}};
    write_text_file(dir / "report.json", report.dump(2));
    append_manifest(cfg, "report", {}, {dir / "report.json"});
}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"synth",  "ingest",   "embed",  "gravity",
                                                   "detect", "features", "regress", "lrt",
                                                   "cbr",    "report"};
    return names;
}

void run_stage(const std::string& name, const PipelineConfig& cfg) {
    fs::create_directories(cfg.workdir);
    if (name == "synth") stage_synth(cfg);
    else if (name == "ingest") stage_ingest(cfg);
    else if (name == "embed") stage_embed(cfg);
    else if (name == "gravity") stage_gravity(cfg);
    else if (name == "detect") stage_detect(cfg);
    else if (name == "features") stage_features(cfg);
    else if (name == "regress") stage_regress(cfg);
    else if (name == "lrt") stage_lrt(cfg);
    else if (name == "cbr") stage_cbr(cfg);
    else if (name == "report") stage_report(cfg);
    else throw ConfigError("unknown stage: " + name);
}

void run_all(const PipelineConfig& cfg) {
    for (const auto& name : stage_names()) run_stage(name, cfg);
}

std::string workdir_digest(const fs::path& workdir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(workdir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), workdir).string();
        if (rel == "run_manifest.jsonl") continue;  // append-only log, not an artifact
        files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    std::string combined;
    for (const auto& f : files) combined += f + ":" + sha256_file(workdir / f) + "\n";
    return sha256_bytes(combined.data(), combined.size());
}

}  // namespace mob
