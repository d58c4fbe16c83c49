#include "mob/synth.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mob/rng.hpp"

using nlohmann::json;

namespace mob {

void SynthConfig::validate() const {
    if (grid_side < 2) throw ConfigError("grid_side must be >= 2");
    if (spacing_km <= 0.0) throw ConfigError("spacing_km must be positive");
    if (!(suppression > 0.0 && suppression < 1.0) && suppression != 0.0)
        throw ConfigError("suppression must lie in [0, 1)");
    if (barrier_fraction < 0.0 || barrier_fraction > 1.0)
        throw ConfigError("barrier_fraction must lie in [0, 1]");
    if (users < 1 || tokens_per_user < 1 || tokens_per_day < 2)
        throw ConfigError("users/tokens settings must be positive (>= 2 tokens per day)");
    if (counties_x < 1 || counties_y < 1) throw ConfigError("county tiling must be >= 1x1");
    if (race_categories < 2) throw ConfigError("race_categories must be >= 2");
    if (plant_max_km <= 0.0 || plant_max_km > 20.0)
        throw ConfigError("plant_max_km must lie in (0, 20]");
}

bool PlantedTruth::planted(const std::string& a, const std::string& b) const {
    const ZonePairKey key(a, b);
    return std::binary_search(barrier_pairs.begin(), barrier_pairs.end(), key);
}

double PlantedTruth::true_flow(size_t i, size_t j) const {
    if (i == j) return 0.0;
    const double d = great_circle_km(centroids[i], centroids[j]);
    double t = masses[i] * masses[j] * std::pow(d, -gravity_exponent);
    if (planted(zone_ids[i], zone_ids[j])) t *= suppression;
    return t;
}

namespace {

std::string zone_name(int idx) {
    char buf[16];
    snprintf(buf, sizeof(buf), "Z%04d", idx);
    return buf;
}

}  // namespace

SynthCity generate_city(const SynthConfig& cfg) {
    cfg.validate();
    SynthCity city;
    const int side = cfg.grid_side;
    const double dlat = cfg.spacing_km / (kEarthRadiusKm * kPi / 180.0);
    const double dlon =
        cfg.spacing_km / (kEarthRadiusKm * kPi / 180.0 * std::cos(cfg.base_lat * kPi / 180.0));

    city.truth.gravity_exponent = cfg.gravity_exponent;
    city.truth.suppression = cfg.suppression;

    // Polycentric activity field: a few Gaussian centers on top of iid noise,
    // so zone masses vary smoothly in space the way urban density does.
    Rng mass_rng(cfg.seed, 1);
    struct MassCenter {
        double r, c, amp, sigma_cells;
    };
    std::vector<MassCenter> centers;
    for (int k = 0; k < cfg.mass_centers; ++k)
        centers.push_back({mass_rng.uniform(0.15, 0.85) * side,
                           mass_rng.uniform(0.15, 0.85) * side,
                           cfg.mass_center_amp * mass_rng.uniform(0.6, 1.0),
                           mass_rng.uniform(0.15, 0.30) * side});

    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const int idx = r * side + c;
            const std::string id = zone_name(idx);
            const double lat0 = cfg.base_lat + r * dlat;
            const double lon0 = cfg.base_lon + c * dlon;
            ZoneShape z;
            z.parts.push_back(Ring{{lat0, lon0},
                                   {lat0, lon0 + dlon},
                                   {lat0 + dlat, lon0 + dlon},
                                   {lat0 + dlat, lon0}});
            z.centroid = polygon_centroid(z.parts);
            const int cx = std::min(cfg.counties_x - 1, c * cfg.counties_x / side);
            const int cy = std::min(cfg.counties_y - 1, r * cfg.counties_y / side);
            z.county_id = "C" + std::to_string(cx) + "_" + std::to_string(cy);
            city.truth.centroids.push_back(z.centroid);
            city.truth.zone_ids.push_back(id);
            double log_mass = cfg.mass_sigma * mass_rng.next_gaussian();
            for (const auto& mc : centers) {
                const double dr = r + 0.5 - mc.r, dc = c + 0.5 - mc.c;
                log_mass += mc.amp * std::exp(-(dr * dr + dc * dc) /
                                              (2.0 * mc.sigma_cells * mc.sigma_cells));
            }
            city.truth.masses.push_back(std::exp(log_mass));
            city.zone_order.push_back(id);
            city.zones.zones.emplace(id, std::move(z));
        }
    }

    // POIs: Poisson-distributed per zone and category, scattered with a
    // margin so stays attach cleanly inside cells.
    Rng poi_rng(cfg.seed, 2);
    auto poisson = [&](double mean) {
        const double L = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= poi_rng.next_double();
        } while (p > L);
        return k - 1;
    };
    int poi_counter = 0;
    for (int idx = 0; idx < side * side; ++idx) {
        const int r = idx / side, c = idx % side;
        const double lat0 = cfg.base_lat + r * dlat;
        const double lon0 = cfg.base_lon + c * dlon;
        for (auto cat : kPoiCategories) {
            const int n = poisson(cfg.poi_mean_per_zone_cat);
            for (int k = 0; k < n; ++k) {
                Poi p;
                char buf[16];
                snprintf(buf, sizeof(buf), "P%06d", poi_counter++);
                p.poi_id = buf;
                p.pos.lat = lat0 + dlat * poi_rng.uniform(0.06, 0.94);
                p.pos.lon = lon0 + dlon * poi_rng.uniform(0.06, 0.94);
                p.category = std::string(cat);
                city.pois.push_back(std::move(p));
            }
        }
    }

    // Demographics: county-level base race profiles blended with zone noise.
    Rng demo_rng(cfg.seed, 3);
    std::vector<std::vector<double>> county_base;
    for (int i = 0; i < cfg.counties_x * cfg.counties_y; ++i) {
        std::vector<double> base(cfg.race_categories);
        double sum = 0.0;
        for (double& b : base) {
            b = -std::log(std::max(1e-12, demo_rng.next_double()));
            sum += b;
        }
        for (double& b : base) b /= sum;
        county_base.push_back(std::move(base));
    }
    for (int idx = 0; idx < side * side; ++idx) {
        const std::string& id = city.zone_order[idx];
        const ZoneShape& z = city.zones.at(id);
        const int cx = std::stoi(z.county_id.substr(1, z.county_id.find('_') - 1));
        const int cy = std::stoi(z.county_id.substr(z.county_id.find('_') + 1));
        const auto& base = county_base[cy * cfg.counties_x + cx];

        DemographicProfile d;
        d.zone_id = id;
        d.race_dist.resize(cfg.race_categories);
        double sum = 0.0;
        for (int k = 0; k < cfg.race_categories; ++k) {
            d.race_dist[k] = 0.6 * base[k] + 0.4 * (-std::log(std::max(1e-12, demo_rng.next_double())));
            sum += d.race_dist[k];
        }
        for (double& v : d.race_dist) v /= sum;
        d.median_housing_value = 250000.0 * std::exp(0.4 * demo_rng.next_gaussian());
        d.transit_share = demo_rng.uniform(0.0, 0.5);
        d.employed_ratio = demo_rng.uniform(0.4, 0.95);
        d.poverty_ratio = demo_rng.uniform(0.02, 0.4);
        double simpson = 0.0;
        for (double v : d.race_dist) simpson += v * v;
        d.racial_diversity = 1.0 - simpson;
        d.population = 600.0 + 2400.0 * demo_rng.next_double();
        d.county_id = z.county_id;
        city.demographics.push_back(std::move(d));
    }

    // Planted barrier pairs: wall segments are drawn until the pairs whose
    // centroid segments cross one reach the target fraction. Coherent
    // suppression along walls mirrors how real urban barriers cut whole
    // corridors rather than isolated dyads.
    std::vector<std::pair<int, int>> eligible;
    for (int i = 0; i < side * side; ++i)
        for (int j = i + 1; j < side * side; ++j) {
            const double d = great_circle_km(city.truth.centroids[i], city.truth.centroids[j]);
            if (d <= cfg.plant_max_km) eligible.emplace_back(i, j);
        }
    const size_t target = static_cast<size_t>(cfg.barrier_fraction * eligible.size());

    const LatLon grid_center{cfg.base_lat + side * dlat / 2.0, cfg.base_lon + side * dlon / 2.0};
    LocalProjection proj(grid_center);
    std::vector<XY> cxy;
    cxy.reserve(city.truth.centroids.size());
    for (const auto& c : city.truth.centroids) cxy.push_back(proj.to_xy(c));

    // Every pair crossing a wall is suppressed: barrier signal in embedding
    // space comes from coherent context shifts, so partial suppression along
    // a wall would dilute exactly what the detector measures. The last wall
    // shrinks until the planted count lands near the target.
    Rng plant_rng(cfg.seed, 4);
    std::vector<std::pair<int, int>> planted;
    std::unordered_set<int64_t> planted_keys;
    const double half_extent = side * cfg.spacing_km / 2.0;
    int guard = 0;
    while (planted.size() < target && guard++ < 500) {
        const XY wc{plant_rng.uniform(-0.85, 0.85) * half_extent,
                    plant_rng.uniform(-0.85, 0.85) * half_extent};
        const double ang = plant_rng.uniform(0.0, kPi);
        double half_len = cfg.wall_length_km / 2.0;
        std::vector<std::pair<int, int>> newly;
        XY w0, w1;
        for (;;) {
            w0 = {wc.x - std::cos(ang) * half_len, wc.y - std::sin(ang) * half_len};
            w1 = {wc.x + std::cos(ang) * half_len, wc.y + std::sin(ang) * half_len};
            newly.clear();
            for (const auto& [i, j] : eligible) {
                const int64_t key = static_cast<int64_t>(i) * side * side + j;
                if (planted_keys.count(key)) continue;
                if (segments_intersect(cxy[i], cxy[j], w0, w1)) newly.emplace_back(i, j);
            }
            if (newly.size() <= target - planted.size() || half_len <= 0.3) break;
            half_len *= 0.7;
        }
        if (newly.empty()) continue;
        // Reject walls that would overshoot the target noticeably; a smaller
        // wall elsewhere can fill the remainder.
        if (planted.size() + newly.size() > target + target / 8) continue;
        city.truth.walls.push_back({proj.to_latlon(w0), proj.to_latlon(w1)});
        for (const auto& [i, j] : newly) {
            planted.emplace_back(i, j);
            planted_keys.insert(static_cast<int64_t>(i) * side * side + j);
        }
    }
    for (const auto& [i, j] : planted)
        city.truth.barrier_pairs.emplace_back(zone_name(i), zone_name(j));
    std::sort(city.truth.barrier_pairs.begin(), city.truth.barrier_pairs.end());

    // A share of walls materializes as physical geometry; kinds rotate so
    // every layer type is exercised.
    Rng layer_rng(cfg.seed, 5);
    std::array<BarrierLayer, 4> layers{
        BarrierLayer{BarrierKind::highway, {}}, BarrierLayer{BarrierKind::railway, {}},
        BarrierLayer{BarrierKind::park, {}}, BarrierLayer{BarrierKind::waterway, {}}};
    int layer_round = 0;
    for (const auto& wall : city.truth.walls) {
        if (layer_rng.next_double() > cfg.physical_alignment) continue;
        BarrierLayer& layer = layers[layer_round % 4];
        ++layer_round;
        const XY a = proj.to_xy(wall[0]);
        const XY b = proj.to_xy(wall[1]);
        Geometry g;
        if (layer.kind == BarrierKind::highway || layer.kind == BarrierKind::railway) {
            g.kind = Geometry::Kind::polyline;
            g.parts.push_back(Ring{wall[0], wall[1]});
        } else {
            g.kind = Geometry::Kind::polygon;
            const double len = std::hypot(b.x - a.x, b.y - a.y);
            const double nx = -(b.y - a.y) / len, ny = (b.x - a.x) / len;
            const double w = 0.05;  // 100 m wide strip
            g.parts.push_back(Ring{proj.to_latlon({a.x - nx * w, a.y - ny * w}),
                                   proj.to_latlon({b.x - nx * w, b.y - ny * w}),
                                   proj.to_latlon({b.x + nx * w, b.y + ny * w}),
                                   proj.to_latlon({a.x + nx * w, a.y + ny * w})});
        }
        layer.geometries.push_back(std::move(g));
    }
    for (auto& l : layers)
        if (!l.geometries.empty()) city.layers.push_back(std::move(l));

    return city;
}

std::vector<Stay> generate_trajectories(const SynthConfig& cfg, const SynthCity& city) {
    cfg.validate();
    const int n_zones = static_cast<int>(city.truth.zone_ids.size());
    const int side = cfg.grid_side;
    const double dlat = cfg.spacing_km / (kEarthRadiusKm * kPi / 180.0);
    const double dlon =
        cfg.spacing_km / (kEarthRadiusKm * kPi / 180.0 * std::cos(cfg.base_lat * kPi / 180.0));

    // Cumulative transition rows of the planted flow matrix.
    std::vector<double> cum(static_cast<size_t>(n_zones) * n_zones);
    std::vector<double> mass_cum(n_zones);
    {
        double mc = 0.0;
        for (int i = 0; i < n_zones; ++i) {
            double acc = 0.0;
            for (int j = 0; j < n_zones; ++j) {
                acc += city.truth.true_flow(i, j);
                cum[static_cast<size_t>(i) * n_zones + j] = acc;
            }
            if (acc <= 0.0) throw NumericError("zone with no outgoing flow in generator");
            mc += city.truth.masses[i];
            mass_cum[i] = mc;
        }
    }
    auto draw_from_cum = [](const double* row, int n, double u) {
        const double target = u * row[n - 1];
        int lo = 0, hi = n - 1;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (row[mid] < target) lo = mid + 1;
            else hi = mid;
        }
        return lo;
    };

    std::vector<Stay> stays;
    stays.reserve(static_cast<size_t>(cfg.users) * cfg.tokens_per_user);
    const int local_start_s = 8 * 3600;  // first stay of a day at 08:00 local

    for (int u = 0; u < cfg.users; ++u) {
        Rng rng(cfg.seed, 1000 + static_cast<uint64_t>(u));
        char uid[16];
        snprintf(uid, sizeof(uid), "U%05d", u);

        const int home_zone = draw_from_cum(mass_cum.data(), n_zones, rng.next_double());
        const std::string home = city.truth.zone_ids[home_zone];

        int emitted = 0, day = 0;
        while (emitted < cfg.tokens_per_user) {
            int64_t t = cfg.start_epoch + static_cast<int64_t>(day) * 86400 + local_start_s -
                        cfg.utc_offset_s;
            const int today = std::min(cfg.tokens_per_day, cfg.tokens_per_user - emitted);
            // Every day starts at home; within the day the walk follows the
            // planted flow rows.
            int zone = home_zone;
            for (int k = 0; k < today; ++k) {
                if (k > 0) {
                    // Repeat visits within a zone are common in stay data;
                    // moves follow the planted flow row exactly.
                    if (rng.next_double() >= cfg.stay_prob)
                        zone = draw_from_cum(cum.data() + static_cast<size_t>(zone) * n_zones,
                                             n_zones, rng.next_double());
                    t += static_cast<int64_t>(rng.uniform(60.0, 900.0));  // travel gap <= 15 min
                }
                const int r = zone / side, c = zone % side;
                Stay s;
                s.user_id = uid;
                s.t_start = t;
                s.t_end = t + static_cast<int64_t>(rng.uniform(600.0, 1800.0));
                t = s.t_end;
                s.lat = cfg.base_lat + (r + rng.uniform(0.06, 0.94)) * dlat;
                s.lon = cfg.base_lon + (c + rng.uniform(0.06, 0.94)) * dlon;
                s.zone_id = city.truth.zone_ids[zone];
                s.home_zone = home;
                s.utc_offset_s = cfg.utc_offset_s;
                stays.push_back(std::move(s));
            }
            emitted += today;
            ++day;
        }
    }
    return stays;
}

RecoveryMetrics evaluate_recovery(const BarrierSet& flagged, const PlantedTruth& truth,
                                  const ExcludedPairSet& eligible_pairs) {
    if (truth.barrier_pairs.empty()) throw NumericError("evaluate_recovery: empty planted truth");
    RecoveryMetrics m;
    std::unordered_set<std::string> truth_eligible;
    for (const auto& p : truth.barrier_pairs)
        if (eligible_pairs.count(p)) truth_eligible.insert(p.a + "|" + p.b);
    m.truth_eligible = static_cast<int64_t>(truth_eligible.size());
    m.flagged = static_cast<int64_t>(flagged.flags.size());
    for (const auto& f : flagged.flags)
        if (truth_eligible.count(f.zone_i + "|" + f.zone_j)) ++m.hits;
    m.precision = m.flagged > 0 ? static_cast<double>(m.hits) / m.flagged : 0.0;
    m.recall = m.truth_eligible > 0 ? static_cast<double>(m.hits) / m.truth_eligible : 0.0;
    return m;
}

void write_truth_json(const std::filesystem::path& path, const PlantedTruth& truth) {
    json pairs = json::array();
    for (const auto& p : truth.barrier_pairs) pairs.push_back({p.a, p.b});
    json centroids = json::array();
    for (const auto& c : truth.centroids) centroids.push_back({c.lat, c.lon});
    json walls = json::array();
    for (const auto& w : truth.walls)
        walls.push_back({w[0].lat, w[0].lon, w[1].lat, w[1].lon});
    json j = {{"zone_ids", truth.zone_ids},
              {"centroids", centroids},
              {"masses", truth.masses},
              {"barrier_pairs", pairs},
              {"walls", walls},
              {"gravity_exponent", truth.gravity_exponent},
              {"suppression", truth.suppression}};
    write_text_file(path, j.dump(2));
}

PlantedTruth read_truth_json(const std::filesystem::path& path) {
    json j = json::parse(read_text_file(path));
    PlantedTruth t;
    t.zone_ids = j.at("zone_ids").get<std::vector<std::string>>();
    for (const auto& c : j.at("centroids"))
        t.centroids.push_back({c[0].get<double>(), c[1].get<double>()});
    t.masses = j.at("masses").get<std::vector<double>>();
    for (const auto& p : j.at("barrier_pairs"))
        t.barrier_pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    std::sort(t.barrier_pairs.begin(), t.barrier_pairs.end());
    if (j.contains("walls"))
        for (const auto& w : j.at("walls"))
            t.walls.push_back({LatLon{w[0].get<double>(), w[1].get<double>()},
                               LatLon{w[2].get<double>(), w[3].get<double>()}});
    t.gravity_exponent = j.at("gravity_exponent").get<double>();
    t.suppression = j.at("suppression").get<double>();
    return t;
}

void write_city(const std::filesystem::path& dir, const SynthConfig& cfg,
                const SynthCity& city, const std::vector<Stay>& stays) {
    std::filesystem::create_directories(dir);
    write_zones_geojson(dir / "zones.geojson", city.zones, city.zone_order);
    write_pois_csv(dir / "pois.csv", city.pois);
    write_demographics_csv(dir / "demographics.csv", city.demographics);
    write_barrier_layers_geojson(dir / "barrier_layers.geojson", city.layers);
    write_truth_json(dir / "truth.json", city.truth);
    write_stays_csv(dir / "stays.csv", stays);

    json files = json::object();
    for (const char* name : {"zones.geojson", "pois.csv", "demographics.csv",
                             "barrier_layers.geojson", "truth.json", "stays.csv"})
        files[name] = sha256_file(dir / name);
    json manifest = {{"generator", "synthetic-city"},
                     {"config", json::parse(synth_config_to_json(cfg))},
                     {"files", files}};
    write_text_file(dir / "manifest.json", manifest.dump(2));
}

std::string synth_config_to_json(const SynthConfig& cfg) {
    json j = {{"grid_side", cfg.grid_side},
              {"spacing_km", cfg.spacing_km},
              {"gravity_exponent", cfg.gravity_exponent},
              {"barrier_fraction", cfg.barrier_fraction},
              {"suppression", cfg.suppression},
              {"users", cfg.users},
              {"tokens_per_user", cfg.tokens_per_user},
              {"tokens_per_day", cfg.tokens_per_day},
              {"stay_prob", cfg.stay_prob},
              {"mass_sigma", cfg.mass_sigma},
              {"mass_centers", cfg.mass_centers},
              {"mass_center_amp", cfg.mass_center_amp},
              {"poi_mean_per_zone_cat", cfg.poi_mean_per_zone_cat},
              {"counties_x", cfg.counties_x},
              {"counties_y", cfg.counties_y},
              {"race_categories", cfg.race_categories},
              {"physical_alignment", cfg.physical_alignment},
              {"wall_length_km", cfg.wall_length_km},
              {"plant_max_km", cfg.plant_max_km},
              {"seed", cfg.seed},
              {"base_lat", cfg.base_lat},
              {"base_lon", cfg.base_lon},
              {"utc_offset_s", cfg.utc_offset_s},
              {"start_epoch", cfg.start_epoch}};
    return j.dump(2);
}

SynthConfig synth_config_from_json(const std::string& text) {
    json j = json::parse(text);
    SynthConfig cfg;
    cfg.grid_side = j.value("grid_side", cfg.grid_side);
    cfg.spacing_km = j.value("spacing_km", cfg.spacing_km);
    cfg.gravity_exponent = j.value("gravity_exponent", cfg.gravity_exponent);
    cfg.barrier_fraction = j.value("barrier_fraction", cfg.barrier_fraction);
    cfg.suppression = j.value("suppression", cfg.suppression);
    cfg.users = j.value("users", cfg.users);
    cfg.tokens_per_user = j.value("tokens_per_user", cfg.tokens_per_user);
    cfg.tokens_per_day = j.value("tokens_per_day", cfg.tokens_per_day);
    cfg.stay_prob = j.value("stay_prob", cfg.stay_prob);
    cfg.mass_sigma = j.value("mass_sigma", cfg.mass_sigma);
    cfg.mass_centers = j.value("mass_centers", cfg.mass_centers);
    cfg.mass_center_amp = j.value("mass_center_amp", cfg.mass_center_amp);
    cfg.poi_mean_per_zone_cat = j.value("poi_mean_per_zone_cat", cfg.poi_mean_per_zone_cat);
    cfg.counties_x = j.value("counties_x", cfg.counties_x);
    cfg.counties_y = j.value("counties_y", cfg.counties_y);
    cfg.race_categories = j.value("race_categories", cfg.race_categories);
    cfg.physical_alignment = j.value("physical_alignment", cfg.physical_alignment);
    cfg.wall_length_km = j.value("wall_length_km", cfg.wall_length_km);
    cfg.plant_max_km = j.value("plant_max_km", cfg.plant_max_km);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.base_lat = j.value("base_lat", cfg.base_lat);
    cfg.base_lon = j.value("base_lon", cfg.base_lon);
    cfg.utc_offset_s = j.value("utc_offset_s", cfg.utc_offset_s);
    cfg.start_epoch = j.value("start_epoch", cfg.start_epoch);
    return cfg;
}

}  // namespace mob
