#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace gsne {

// Regression models for the downstream price evaluation. All fitters take
// features with rows = samples and cols = feature dimensions, plus a target
// vector aligned with the rows.

// Linear model with an unpenalized intercept. Fitting centers the columns
// and the target, solves (Xc^T Xc + lambda I) beta = Xc^T yc with an LDLT
// factorization, and recovers the intercept from the means.
struct ridge_model {
    Eigen::VectorXd coef;
    double intercept = 0.0;
};

ridge_model fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda);
Eigen::VectorXd predict(const ridge_model& m, const Eigen::MatrixXd& x);

// Kernel ridge regression with an RBF kernel k(a, b) = exp(-|a-b|^2 / (2 s^2)).
// Dual coefficients solve (K + lambda I) alpha = y; no centering, so a single
// training point predicts y / (1 + lambda) at itself. A bandwidth of zero
// requests the median pairwise distance heuristic at fit time.
struct kernel_ridge_model {
    Eigen::MatrixXd train_x;
    Eigen::VectorXd alpha;
    double bandwidth = 1.0;
};

double median_pairwise_distance(const Eigen::MatrixXd& x);
kernel_ridge_model fit_kernel_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    double bandwidth, double lambda);
Eigen::VectorXd predict(const kernel_ridge_model& m, const Eigen::MatrixXd& x);

// Least-squares gradient boosting with depth-limited regression trees.
// Splits minimize squared error via an exact scan over presorted feature
// values; each stage fits the residuals of a seeded row subsample and is
// scaled by the shrinkage. depth 0 is allowed and degenerates to the base
// prediction alone.
struct gbt_config {
    int trees = 300;
    int depth = 3;
    double shrinkage = 0.1;
    double subsample = 0.8;
    std::uint64_t seed = 0;
};

struct gbt_node {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
};

struct gbt_tree {
    std::vector<gbt_node> nodes; // node 0 is the root
};

struct gbt_model {
    double base = 0.0;
    double shrinkage = 0.1;
    std::vector<gbt_tree> trees;
    std::vector<double> stage_loss; // full-training-set MSE after each stage
};

gbt_model fit_gbt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const gbt_config& cfg);
Eigen::VectorXd predict(const gbt_model& m, const Eigen::MatrixXd& x);

} // namespace gsne
