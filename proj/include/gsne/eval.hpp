#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsne/config.hpp"
#include "gsne/dataprep.hpp"
#include "gsne/regressors.hpp"
#include "gsne/trainer.hpp"

namespace gsne {

// House-price evaluation: fit regressors on raw features versus raw plus
// Gaussian embedding moments, and report errors overall, per price quartile,
// on outliers, per POI type, and as bootstrap confidence intervals.

double mae(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);
double rmse(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);

// Embedding export rows tagged with the house partition, keyed by house id.
struct embedding_table {
    int width = 0; // mu column count; var columns mirror it
    std::vector<std::int64_t> ids;
    Eigen::MatrixXd mu;  // rows = houses
    Eigen::MatrixXd var;
    std::unordered_map<std::int64_t, int> row_of;
};

embedding_table load_embeddings(const std::string& path);

// Gaussian moments aligned with the dataset's train and test house rows.
// mu/var have width L for single-proximity training and 2L when both
// objectives were trained (first-order block then second-order block).
struct house_embeddings {
    int embed_dim = 0;
    Eigen::MatrixXd train_mu, train_var;
    Eigen::MatrixXd test_mu, test_var;

    bool has_second() const { return train_mu.cols() == 2 * embed_dim; }
};

house_embeddings join_embeddings(const embedding_table& table, const dataset_bundle& ds,
                                 int embed_dim);
house_embeddings encode_embeddings(const train_state& state, const dataset_bundle& ds);

// Design matrices (rows = houses) for every feature set.
struct feature_bundle {
    Eigen::MatrixXd train_raw, test_raw;
    Eigen::VectorXd train_y, test_y;
    house_embeddings emb;
    bool use_variance = false;
};

// Assembles design matrices and standardizes every embedding column to the
// train rows' mean/sd (near-constant columns become zeros), matching the
// standardization the raw attributes received upstream.
feature_bundle make_feature_bundle(const dataset_bundle& ds, const house_embeddings& emb,
                                   bool use_variance);

extern const std::array<const char*, 5> feature_set_names; // raw, raw+gsne_1st, ...
Eigen::MatrixXd feature_matrix(const feature_bundle& fb, const std::string& set_name,
                               bool train);

struct eval_config {
    double ridge_lambda = 1.0;
    double krr_bandwidth = 0.0; // 0 = median pairwise distance heuristic
    double krr_lambda = 0.1;
    gbt_config gbt;
    std::uint64_t seed = 0;
};

eval_config make_eval_config(const run_config& cfg);

struct metric_row {
    std::string feature_set;
    std::string regressor;
    double mae = 0.0;
    double rmse = 0.0;
    std::array<double, 4> quartile_mae{};
    std::array<int, 4> quartile_count{};
    double outlier_mae = 0.0;
    int outlier_count = 0;
};

// Fits on the train rows, predicts the test rows, and fills one report row.
// Quartiles partition the test set by rank of true log price; outliers are
// test rows beyond three training standard deviations from the training mean.
metric_row evaluate_cell(const feature_bundle& fb, const std::string& set_name,
                         const std::string& regressor, const eval_config& cfg);
std::vector<metric_row> evaluate(const feature_bundle& fb,
                                 const std::vector<std::string>& set_names,
                                 const std::vector<std::string>& regressors,
                                 const eval_config& cfg);

struct ci_row {
    std::string feature_set;
    std::string regressor;
    double level = 0.95;
    double lower = 0.0;
    double upper = 0.0;
    int replicates = 0;
};

// Percentile interval of test MAE over seeded random re-splits (80/20 by
// default fraction) of the pooled train+test rows.
ci_row bootstrap_ci(const feature_bundle& fb, const std::string& set_name,
                    const std::string& regressor, const eval_config& cfg, int replicates,
                    double level, double train_fraction, std::uint64_t seed);

struct ablation_row {
    std::string edge_set; // house-region, house-school, house-station, or all
    metric_row metrics;   // raw+gsne_both features under the gbt regressor
};

// Retrains the embedding restricted to each single house-POI edge set, then
// once with every edge set, evaluating each against the shared raw baseline.
struct ablation_report {
    metric_row baseline; // raw features, gbt
    std::vector<ablation_row> rows;
};

ablation_report poi_ablation(const dataset_bundle& ds, const run_config& cfg);

struct eval_report {
    std::vector<metric_row> rows;
    std::vector<ci_row> cis;
    std::optional<ablation_report> ablation;
};

std::string render_report_text(const eval_report& rep);
std::string render_report_csv(const eval_report& rep);
std::string render_report_json(const eval_report& rep);
void write_report(const eval_report& rep, const std::string& dir);

} // namespace gsne
