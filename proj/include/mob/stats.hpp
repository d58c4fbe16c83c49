#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mob/barriers.hpp"
#include "mob/features.hpp"

namespace mob {

enum class FeatureGroup { poi, phy, demo, county };

const char* to_string(FeatureGroup g);

struct DesignColumn {
    std::string name;
    FeatureGroup group = FeatureGroup::poi;
    bool log1p = false;       // heavy-tailed column, log(1+x) before z-scoring
    bool degenerate = false;  // zero variance within the bin -> column of zeros
};

// Standardized per-bin design: column 0 is the constant; the rest are
// z-scored (population sd) within the bin.
struct DesignMatrix {
    int bin_index = 0;
    std::vector<DesignColumn> columns;  // metadata for X columns 1..k
    Eigen::MatrixXd X;                  // n x (k+1), first column all ones
    Eigen::VectorXd y;                  // 0/1 labels (logistic) or outcomes

    int64_t n() const { return X.rows(); }
    int n_features() const { return static_cast<int>(columns.size()); }

    // Copy with one group's columns removed (constant kept).
    DesignMatrix drop_group(FeatureGroup g) const;
};

// Per bin: all flagged pairs labeled 1 plus an equal-count seeded uniform
// sample (without replacement) of the remaining pairs labeled 0. Bins whose
// positives exceed the available negatives keep all negatives.
std::map<int, std::vector<PairFeatureRow>> balanced_sample(
    const std::vector<PairFeatureRow>& rows, const BarrierSet& barriers, uint64_t seed);

// Builds the standardized design for one bin. With disaggregate_poi the total
// intervening-opportunity column is replaced by per-category columns.
DesignMatrix standardize(const std::vector<PairFeatureRow>& bin_rows, int bin_index,
                         bool disaggregate_poi = false);

struct LogisticFit {
    std::vector<std::string> names;  // "const" first, then feature columns
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    std::vector<double> p_values;  // two-sided Wald
    double loglik = 0.0;
    bool converged = false;
    bool penalized = false;  // ridge fallback under separation
    int iterations = 0;
    int64_t n = 0;
    std::vector<double> iter_loglik;  // per-iteration log-likelihood trace
};

// Bernoulli MLE with intercept via iteratively reweighted least squares with
// step-halving (log-likelihood never decreases). Convergence at
// max |score| < 1e-8 or 100 iterations. Diverging fits fall back to a ridge
// penalty of 1e-6 and are marked penalized.
LogisticFit fit_logistic(const DesignMatrix& design);

// Log-likelihood of a coefficient vector under the design (audits the
// reported optimum).
double logistic_loglik(const DesignMatrix& design, const Eigen::VectorXd& beta);

// Odds multiplier per 1-sd increase of a standardized predictor.
inline double odds_ratio(double coefficient) { return std::exp(coefficient); }

struct LRTResult {
    double lambda = 0.0;  // 2 (loglik_full - loglik_reduced), nonnegative
    int dof = 0;          // dropped column count
    FeatureGroup dropped_group = FeatureGroup::poi;
    double normalized_share = 0.0;  // lambda / sum of group lambdas in the bin
};

// Likelihood-ratio statistic of full vs. the nested design missing one group.
LRTResult lrt(const LogisticFit& full, const DesignMatrix& full_design,
              const DesignMatrix& reduced_design);

// Ablates each predictor group in turn and fills normalized shares.
std::vector<LRTResult> lrt_group_ablation(const DesignMatrix& design);

struct FePanel {
    Eigen::MatrixXd X;  // n x k regressors (standardized globally upstream)
    Eigen::VectorXd y;
    std::vector<int32_t> group;  // dense ids 0..G-1
    std::vector<std::string> names;
};

struct FeFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;  // clustered by group (plain OLS se if one group)
    double r2 = 0.0;
    double within_r2 = 0.0;
    int64_t n = 0;
    int32_t n_groups = 0;
    bool single_group = false;
};

// Demeans columns within groups; applying it twice equals applying it once.
Eigen::MatrixXd within_transform(const Eigen::MatrixXd& X, const std::vector<int32_t>& group);
Eigen::VectorXd within_transform(const Eigen::VectorXd& y, const std::vector<int32_t>& group);

// OLS with absorbed group fixed effects and cluster-robust (CR1) standard
// errors clustered on the group.
FeFit fit_linear_fe(const FePanel& panel);

// Column-wise global z-scoring (population sd); zero-variance columns are
// left centered at zero.
void standardize_columns_global(Eigen::MatrixXd& X);

}  // namespace mob
