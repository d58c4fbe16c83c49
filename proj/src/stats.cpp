#include "mob/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mob/rng.hpp"

namespace mob {

const char* to_string(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::poi: return "POI";
        case FeatureGroup::phy: return "Phy";
        case FeatureGroup::demo: return "Demo";
        case FeatureGroup::county: return "County";
    }
    return "?";
}

DesignMatrix DesignMatrix::drop_group(FeatureGroup g) const {
    DesignMatrix out;
    out.bin_index = bin_index;
    out.y = y;
    std::vector<int> keep;
    for (int c = 0; c < n_features(); ++c)
        if (columns[c].group != g) keep.push_back(c);
    out.X.resize(X.rows(), static_cast<Eigen::Index>(keep.size()) + 1);
    out.X.col(0) = X.col(0);
    for (size_t i = 0; i < keep.size(); ++i) {
        out.X.col(static_cast<Eigen::Index>(i) + 1) = X.col(keep[i] + 1);
        out.columns.push_back(columns[keep[i]]);
    }
    return out;
}

std::map<int, std::vector<PairFeatureRow>> balanced_sample(
    const std::vector<PairFeatureRow>& rows, const BarrierSet& barriers, uint64_t seed) {
    const ExcludedPairSet flagged = barriers.pair_set();

    std::map<int, std::vector<const PairFeatureRow*>> positives, candidates;
    for (const auto& r : rows) {
        if (flagged.count(ZonePairKey(r.zone_i, r.zone_j)))
            positives[r.bin_index].push_back(&r);
        else
            candidates[r.bin_index].push_back(&r);
    }

    std::map<int, std::vector<PairFeatureRow>> out;
    for (auto& [bin, pos] : positives) {
        auto& neg_pool = candidates[bin];
        // Canonical order before the seeded draw keeps sampling reproducible
        // regardless of the input row order.
        auto by_pair = [](const PairFeatureRow* a, const PairFeatureRow* b) {
            return a->zone_i < b->zone_i || (a->zone_i == b->zone_i && a->zone_j < b->zone_j);
        };
        std::sort(neg_pool.begin(), neg_pool.end(), by_pair);
        std::sort(pos.begin(), pos.end(), by_pair);

        Rng rng(seed, static_cast<uint64_t>(bin));
        const size_t want = pos.size();
        rng.partial_shuffle(neg_pool, want);
        const size_t got = std::min(want, neg_pool.size());

        auto& dst = out[bin];
        dst.reserve(pos.size() + got);
        for (const auto* p : pos) {
            dst.push_back(*p);
            dst.back().label = 1;
        }
        for (size_t i = 0; i < got; ++i) {
            dst.push_back(*neg_pool[i]);
            dst.back().label = 0;
        }
    }
    return out;
}

DesignMatrix standardize(const std::vector<PairFeatureRow>& bin_rows, int bin_index,
                         bool disaggregate_poi) {
    if (bin_rows.empty()) throw ConfigError("standardize: empty bin");
    const auto& cats = feature_categories();

    std::vector<DesignColumn> cols;
    std::vector<std::vector<double>> raw;
    auto add = [&](const std::string& name, FeatureGroup g, bool log1p, auto&& getter) {
        cols.push_back({name, g, log1p, false});
        std::vector<double> v;
        v.reserve(bin_rows.size());
        for (const auto& r : bin_rows) {
            double x = getter(r);
            if (log1p) x = std::log1p(x);
            v.push_back(x);
        }
        raw.push_back(std::move(v));
    };

    if (disaggregate_poi) {
        for (size_t k = 0; k < cats.size(); ++k)
            add(cats[k], FeatureGroup::poi, true,
                [k](const PairFeatureRow& r) { return static_cast<double>(r.poi_interv_by_cat[k]); });
    } else {
        add("POI Intervening Opp.", FeatureGroup::poi, true,
            [](const PairFeatureRow& r) { return static_cast<double>(r.poi_interv); });
    }
    add("POI JS Distance", FeatureGroup::poi, false,
        [](const PairFeatureRow& r) { return r.poi_js; });
    add("# Highways Crossed", FeatureGroup::phy, true,
        [](const PairFeatureRow& r) { return static_cast<double>(r.crossings[0]); });
    add("# Railways Crossed", FeatureGroup::phy, true,
        [](const PairFeatureRow& r) { return static_cast<double>(r.crossings[1]); });
    add("# Parks Crossed", FeatureGroup::phy, true,
        [](const PairFeatureRow& r) { return static_cast<double>(r.crossings[2]); });
    add("# Waterways Crossed", FeatureGroup::phy, true,
        [](const PairFeatureRow& r) { return static_cast<double>(r.crossings[3]); });
    add("Race Distance", FeatureGroup::demo, false,
        [](const PairFeatureRow& r) { return r.race_dist_js; });
    add("Income Distance", FeatureGroup::demo, false,
        [](const PairFeatureRow& r) { return r.income_diff; });
    add("Trans. Public Distance", FeatureGroup::demo, false,
        [](const PairFeatureRow& r) { return r.transit_diff; });
    add("Cross County", FeatureGroup::county, false,
        [](const PairFeatureRow& r) { return static_cast<double>(r.cross_county); });

    DesignMatrix d;
    d.bin_index = bin_index;
    d.columns = std::move(cols);
    const auto n = static_cast<Eigen::Index>(bin_rows.size());
    d.X.resize(n, static_cast<Eigen::Index>(raw.size()) + 1);
    d.X.col(0).setOnes();
    for (size_t c = 0; c < raw.size(); ++c) {
        double mean = 0.0;
        for (double v : raw[c]) mean += v;
        mean /= static_cast<double>(raw[c].size());
        double var = 0.0;
        for (double v : raw[c]) var += (v - mean) * (v - mean);
        var /= static_cast<double>(raw[c].size());  // population variance
        if (var <= 0.0) {
            d.columns[c].degenerate = true;
            d.X.col(static_cast<Eigen::Index>(c) + 1).setZero();
        } else {
            const double sd = std::sqrt(var);
            for (Eigen::Index i = 0; i < n; ++i)
                d.X(i, static_cast<Eigen::Index>(c) + 1) = (raw[c][i] - mean) / sd;
        }
    }
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!bin_rows[i].label)
            throw ConfigError("standardize: row without label in bin " + std::to_string(bin_index));
        d.y(i) = static_cast<double>(*bin_rows[i].label);
    }
    return d;
}

double logistic_loglik(const DesignMatrix& design, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = design.X * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double e = eta(i);
        // log(1 + exp(e)) evaluated stably.
        const double log1pe = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += design.y(i) * e - log1pe;
    }
    return ll;
}

namespace {

constexpr double kScoreTol = 1e-8;
constexpr int kMaxIter = 100;
constexpr double kRidge = 1e-6;
// Standardized balanced designs keep honest coefficients far below this;
// larger norms indicate separation-driven divergence.
constexpr double kDivergenceNorm = 15.0;

struct IrlsState {
    Eigen::VectorXd beta;
    double loglik;
    bool converged;
    int iterations;
    std::vector<double> trace;
    bool diverged;
};

IrlsState run_irls(const DesignMatrix& design, const std::vector<bool>& active,
                   double ridge) {
    const Eigen::Index n = design.X.rows();
    const Eigen::Index p = design.X.cols();
    IrlsState st;
    st.beta = Eigen::VectorXd::Zero(p);
    st.loglik = logistic_loglik(design, st.beta) - 0.5 * ridge * st.beta.squaredNorm();
    st.converged = false;
    st.iterations = 0;
    st.diverged = false;
    st.trace.push_back(st.loglik);

    std::vector<Eigen::Index> act;
    for (Eigen::Index c = 0; c < p; ++c)
        if (active[static_cast<size_t>(c)]) act.push_back(c);
    const auto pa = static_cast<Eigen::Index>(act.size());

    Eigen::MatrixXd Xa(n, pa);
    for (Eigen::Index c = 0; c < pa; ++c) Xa.col(c) = design.X.col(act[c]);

    for (int iter = 0; iter < kMaxIter; ++iter) {
        st.iterations = iter + 1;
        Eigen::VectorXd beta_a(pa);
        for (Eigen::Index c = 0; c < pa; ++c) beta_a(c) = st.beta(act[c]);

        const Eigen::VectorXd eta = Xa * beta_a;
        Eigen::VectorXd mu(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = 1.0 / (1.0 + std::exp(-eta(i)));
            mu(i) = m;
            w(i) = std::max(m * (1.0 - m), 1e-12);
        }
        Eigen::VectorXd score = Xa.transpose() * (design.y - mu) - ridge * beta_a;
        if (score.lpNorm<Eigen::Infinity>() < kScoreTol) {
            st.converged = true;
            break;
        }
        Eigen::MatrixXd info = Xa.transpose() * w.asDiagonal() * Xa;
        info.diagonal().array() += ridge;
        Eigen::LLT<Eigen::MatrixXd> llt(info);
        if (llt.info() != Eigen::Success) {
            st.diverged = true;
            break;
        }
        Eigen::VectorXd step = llt.solve(score);

        // Step-halving keeps the penalized log-likelihood monotone.
        double scale = 1.0;
        double new_ll = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd cand = st.beta;
        for (int half = 0; half < 40; ++half) {
            cand = st.beta;
            for (Eigen::Index c = 0; c < pa; ++c) cand(act[c]) = beta_a(c) + scale * step(c);
            new_ll = logistic_loglik(design, cand) -
                     0.5 * ridge *
                         [&] {
                             double s = 0.0;
                             for (Eigen::Index c = 0; c < pa; ++c)
                                 s += cand(act[c]) * cand(act[c]);
                             return s;
                         }();
            if (new_ll >= st.loglik - 1e-12) break;
            scale *= 0.5;
        }
        if (new_ll < st.loglik - 1e-12) break;  // no ascent direction left
        st.beta = cand;
        st.loglik = new_ll;
        st.trace.push_back(st.loglik);

        double norm = 0.0;
        for (Eigen::Index c = 0; c < pa; ++c) norm = std::max(norm, std::abs(st.beta(act[c])));
        if (!std::isfinite(new_ll) || norm > kDivergenceNorm) {
            st.diverged = true;
            break;
        }
    }
    return st;
}

}  // namespace

LogisticFit fit_logistic(const DesignMatrix& design) {
    const Eigen::Index n = design.X.rows();
    const Eigen::Index p = design.X.cols();
    double pos = design.y.sum();
    if (pos < 1.0 || pos > static_cast<double>(n) - 1.0)
        throw NumericError("logistic fit needs at least one positive and one negative");

    std::vector<bool> active(static_cast<size_t>(p), true);
    for (int c = 0; c < design.n_features(); ++c)
        if (design.columns[c].degenerate) active[static_cast<size_t>(c) + 1] = false;

    IrlsState st = run_irls(design, active, 0.0);
    bool penalized = false;
    if (st.diverged || !st.converged) {
        IrlsState ridge_st = run_irls(design, active, kRidge);
        if (st.diverged || (!st.converged && ridge_st.converged)) {
            st = std::move(ridge_st);
            penalized = true;
        }
    }

    LogisticFit fit;
    fit.names.push_back("const");
    for (const auto& c : design.columns) fit.names.push_back(c.name);
    fit.beta = st.beta;
    fit.loglik = logistic_loglik(design, st.beta);
    fit.converged = st.converged;
    fit.penalized = penalized;
    fit.iterations = st.iterations;
    fit.n = n;
    fit.iter_loglik = st.trace;

    // Standard errors from the observed information at the optimum,
    // restricted to active columns.
    std::vector<Eigen::Index> act;
    for (Eigen::Index c = 0; c < p; ++c)
        if (active[static_cast<size_t>(c)]) act.push_back(c);
    const auto pa = static_cast<Eigen::Index>(act.size());
    Eigen::MatrixXd Xa(n, pa);
    for (Eigen::Index c = 0; c < pa; ++c) Xa.col(c) = design.X.col(act[c]);
    Eigen::VectorXd beta_a(pa);
    for (Eigen::Index c = 0; c < pa; ++c) beta_a(c) = st.beta(act[c]);
    const Eigen::VectorXd eta = Xa * beta_a;
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = 1.0 / (1.0 + std::exp(-eta(i)));
        w(i) = std::max(m * (1.0 - m), 1e-12);
    }
    Eigen::MatrixXd info = Xa.transpose() * w.asDiagonal() * Xa;
    if (penalized) info.diagonal().array() += kRidge;
    Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(pa, pa));

    const double nan = std::numeric_limits<double>::quiet_NaN();
    fit.se = Eigen::VectorXd::Constant(p, nan);
    fit.p_values.assign(static_cast<size_t>(p), nan);
    for (Eigen::Index c = 0; c < pa; ++c) {
        const double se = std::sqrt(std::max(0.0, cov(c, c)));
        fit.se(act[c]) = se;
        if (se > 0.0) {
            const double z = std::abs(st.beta(act[c])) / se;
            fit.p_values[static_cast<size_t>(act[c])] = std::erfc(z / std::sqrt(2.0));
        }
    }
    return fit;
}

LRTResult lrt(const LogisticFit& full, const DesignMatrix& full_design,
              const DesignMatrix& reduced_design) {
    if (full_design.n() != reduced_design.n())
        throw NumericError("lrt: designs have mismatched row counts");
    if ((full_design.y - reduced_design.y).lpNorm<Eigen::Infinity>() != 0.0)
        throw NumericError("lrt: designs have different labels");

    LRTResult res;
    res.dof = full_design.n_features() - reduced_design.n_features();
    if (res.dof == 0) {
        res.lambda = 0.0;
        return res;
    }
    if (res.dof < 0) throw NumericError("lrt: reduced design is larger than the full one");
    const LogisticFit reduced = fit_logistic(reduced_design);
    // The standard nonnegative convention: twice the log-likelihood gain of
    // the full model over the nested one.
    res.lambda = std::max(0.0, 2.0 * (full.loglik - reduced.loglik));
    return res;
}

std::vector<LRTResult> lrt_group_ablation(const DesignMatrix& design) {
    const LogisticFit full = fit_logistic(design);
    std::vector<LRTResult> out;
    double total = 0.0;
    for (FeatureGroup g : {FeatureGroup::poi, FeatureGroup::phy, FeatureGroup::demo,
                           FeatureGroup::county}) {
        DesignMatrix reduced = design.drop_group(g);
        if (reduced.n_features() == design.n_features()) continue;  // group absent
        LRTResult r = lrt(full, design, reduced);
        r.dropped_group = g;
        total += r.lambda;
        out.push_back(r);
    }
    for (auto& r : out) r.normalized_share = total > 0.0 ? r.lambda / total : 0.0;
    return out;
}

Eigen::MatrixXd within_transform(const Eigen::MatrixXd& X, const std::vector<int32_t>& group) {
    if (static_cast<size_t>(X.rows()) != group.size())
        throw NumericError("within_transform: group vector length mismatch");
    int32_t g_max = -1;
    for (int32_t g : group) g_max = std::max(g_max, g);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(g_max + 1, X.cols());
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(g_max + 1);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        sums.row(group[static_cast<size_t>(i)]) += X.row(i);
        cnt(group[static_cast<size_t>(i)]) += 1.0;
    }
    Eigen::MatrixXd out = X;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out.row(i) -= sums.row(group[static_cast<size_t>(i)]) / cnt(group[static_cast<size_t>(i)]);
    return out;
}

Eigen::VectorXd within_transform(const Eigen::VectorXd& y, const std::vector<int32_t>& group) {
    Eigen::MatrixXd m = y;
    return within_transform(m, group).col(0);
}

FeFit fit_linear_fe(const FePanel& panel) {
    const Eigen::Index n = panel.X.rows();
    const Eigen::Index k = panel.X.cols();
    if (static_cast<size_t>(n) != panel.group.size())
        throw NumericError("fit_linear_fe: group vector length mismatch");
    int32_t g_max = -1;
    for (int32_t g : panel.group) g_max = std::max(g_max, g);
    const int32_t n_groups = g_max + 1;
    if (n_groups < 1) throw NumericError("fit_linear_fe: no groups");

    FeFit fit;
    fit.n = n;
    fit.n_groups = n_groups;
    fit.single_group = n_groups < 2;

    const Eigen::MatrixXd Xw = within_transform(panel.X, panel.group);
    const Eigen::VectorXd yw = within_transform(panel.y, panel.group);

    Eigen::MatrixXd xtx = Xw.transpose() * Xw;
    Eigen::LLT<Eigen::MatrixXd> llt(xtx);
    if (llt.info() != Eigen::Success)
        throw NumericError("fit_linear_fe: singular within-transformed design");
    fit.beta = llt.solve(Xw.transpose() * yw);

    const Eigen::VectorXd resid = yw - Xw * fit.beta;
    const double ssr = resid.squaredNorm();
    const double sst_within = yw.squaredNorm();
    const double y_mean = panel.y.mean();
    const double sst_total = (panel.y.array() - y_mean).square().sum();
    fit.within_r2 = sst_within > 0.0 ? 1.0 - ssr / sst_within : 1.0;
    fit.r2 = sst_total > 0.0 ? 1.0 - ssr / sst_total : 1.0;

    const Eigen::MatrixXd xtx_inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    if (fit.single_group) {
        // Classical OLS covariance as the fallback.
        const double dof = std::max<double>(1.0, static_cast<double>(n - k - 1));
        const double sigma2 = ssr / dof;
        fit.se = (sigma2 * xtx_inv.diagonal()).cwiseMax(0.0).cwiseSqrt();
        return fit;
    }

    // CR1 cluster-robust sandwich with group-level score sums.
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    std::vector<Eigen::VectorXd> scores(static_cast<size_t>(n_groups),
                                        Eigen::VectorXd::Zero(k));
    for (Eigen::Index i = 0; i < n; ++i)
        scores[static_cast<size_t>(panel.group[static_cast<size_t>(i)])] +=
            Xw.row(i).transpose() * resid(i);
    for (const auto& s : scores) meat += s * s.transpose();
    const double g = n_groups;
    const double params = static_cast<double>(k + n_groups);
    const double c = (g / (g - 1.0)) * ((static_cast<double>(n) - 1.0) /
                                        std::max(1.0, static_cast<double>(n) - params));
    const Eigen::MatrixXd cov = c * xtx_inv * meat * xtx_inv;
    fit.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return fit;
}

void standardize_columns_global(Eigen::MatrixXd& X) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double mean = X.col(c).mean();
        X.col(c).array() -= mean;
        const double var = X.col(c).squaredNorm() / static_cast<double>(X.rows());
        if (var > 0.0) X.col(c) /= std::sqrt(var);
    }
}

}  // namespace mob
