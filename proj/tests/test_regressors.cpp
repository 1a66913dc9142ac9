#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "gsne/errors.hpp"
#include "gsne/regressors.hpp"
#include "gsne/rng.hpp"

using namespace gsne;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, rng& r, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = scale * r.normal();
    }
    return m;
}

// Dense linear solve by Gauss-Jordan elimination with partial pivoting,
// independent of the library solver used by the fitters.
std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const size_t n = a.size();
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t row = col + 1; row < n; ++row) {
            if (std::abs(a[row][col]) > std::abs(a[piv][col])) piv = row;
        }
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        const double d = a[col][col];
        REQUIRE(d != 0.0);
        for (size_t c = col; c < n; ++c) a[col][c] /= d;
        b[col] /= d;
        for (size_t row = 0; row < n; ++row) {
            if (row == col || a[row][col] == 0.0) continue;
            const double f = a[row][col];
            for (size_t c = col; c < n; ++c) a[row][c] -= f * a[col][c];
            b[row] -= f * b[col];
        }
    }
    return b;
}

double mean_abs_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).cwiseAbs().mean();
}

} // namespace

TEST_CASE("ridge recovers an exact linear relationship as lambda vanishes") {
    rng r(1);
    const Eigen::MatrixXd x = random_matrix(60, 4, r);
    Eigen::VectorXd beta(4);
    beta << 1.5, -2.0, 0.25, 3.0;
    const Eigen::VectorXd y = (x * beta).array() + 3.0;

    const ridge_model m = fit_ridge(x, y, 1e-10);
    CHECK((m.coef - beta).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(m.intercept == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(mean_abs_error(predict(m, x), y) < 1e-6);
}

TEST_CASE("ridge collapses to the target mean as lambda grows") {
    rng r(2);
    const Eigen::MatrixXd x = random_matrix(50, 3, r);
    const Eigen::VectorXd y = random_matrix(50, 1, r, 2.0);

    const ridge_model m = fit_ridge(x, y, 1e14);
    CHECK(m.coef.cwiseAbs().maxCoeff() < 1e-6);
    const Eigen::VectorXd p = predict(m, x);
    for (int i = 0; i < 50; ++i) CHECK(p[i] == doctest::Approx(y.mean()).epsilon(1e-4));
}

TEST_CASE("ridge tolerates duplicated columns") {
    rng r(3);
    Eigen::MatrixXd x = random_matrix(40, 4, r);
    x.col(2) = x.col(0);
    const Eigen::VectorXd y = x.col(0) + random_matrix(40, 1, r, 0.1);
    const ridge_model m = fit_ridge(x, y, 1.0);
    CHECK(m.coef.allFinite());
    CHECK(predict(m, x).allFinite());
}

TEST_CASE("ridge matches an independent dense solve of the augmented system") {
    rng r(4);
    const int n = 200, p = 12;
    const Eigen::MatrixXd x = random_matrix(n, p, r);
    const Eigen::VectorXd y =
        (x.leftCols(3) * Eigen::Vector3d(1.0, -0.5, 2.0)).array() + 0.7 +
        random_matrix(n, 1, r, 0.3).array();
    const double lambda = 1.0;
    const ridge_model m = fit_ridge(x, y, lambda);

    // Oracle: append an intercept column, penalize every coefficient except
    // the intercept, and solve the normal equations directly.
    Eigen::MatrixXd a(n, p + 1);
    a.leftCols(p) = x;
    a.col(p).setOnes();
    const Eigen::MatrixXd ata = a.transpose() * a;
    const Eigen::VectorXd aty = a.transpose() * y;
    std::vector<std::vector<double>> sys(p + 1, std::vector<double>(p + 1));
    std::vector<double> rhs(p + 1);
    for (int i = 0; i <= p; ++i) {
        rhs[static_cast<size_t>(i)] = aty[i];
        for (int j = 0; j <= p; ++j) sys[static_cast<size_t>(i)][static_cast<size_t>(j)] = ata(i, j);
        if (i < p) sys[static_cast<size_t>(i)][static_cast<size_t>(i)] += lambda;
    }
    const std::vector<double> gamma = gauss_solve(sys, rhs);
    for (int j = 0; j < p; ++j) {
        CHECK(m.coef[j] == doctest::Approx(gamma[static_cast<size_t>(j)]).epsilon(1e-8));
    }
    CHECK(m.intercept == doctest::Approx(gamma[static_cast<size_t>(p)]).epsilon(1e-8));
}

TEST_CASE("ridge validates its inputs") {
    rng r(5);
    const Eigen::MatrixXd x = random_matrix(10, 2, r);
    const Eigen::VectorXd y = random_matrix(10, 1, r);
    CHECK_THROWS_AS(fit_ridge(x, y.head(9), 1.0), input_error);
    CHECK_THROWS_AS(fit_ridge(x, y, 0.0), config_error);
    CHECK_THROWS_AS(fit_ridge(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), 1.0), input_error);
    const ridge_model m = fit_ridge(x, y, 1.0);
    CHECK_THROWS_AS(predict(m, random_matrix(5, 3, r)), input_error);
}

TEST_CASE("kernel ridge shrinks a single training point by 1/(1+lambda)") {
    Eigen::MatrixXd x(1, 2);
    x << 1.2, 3.0;
    Eigen::VectorXd y(1);
    y << 2.0;
    const kernel_ridge_model m = fit_kernel_ridge(x, y, 1.0, 0.25);
    CHECK(predict(m, x)[0] == doctest::Approx(2.0 / 1.25).epsilon(1e-12));
}

TEST_CASE("kernel ridge interpolates distinct points as lambda vanishes") {
    // Unit-spaced grid points with a half-unit bandwidth keep the Gram matrix
    // well conditioned, so the interpolation limit is actually observable.
    rng r(6);
    Eigen::MatrixXd x(30, 2);
    for (int i = 0; i < 30; ++i) {
        x(i, 0) = static_cast<double>(i % 6);
        x(i, 1) = static_cast<double>(i / 6);
    }
    const Eigen::VectorXd y = random_matrix(30, 1, r);
    const kernel_ridge_model m = fit_kernel_ridge(x, y, 0.5, 1e-10);
    CHECK((predict(m, x) - y).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("median pairwise distance handles odd, even, and degenerate inputs") {
    Eigen::MatrixXd odd(3, 1);
    odd << 0.0, 3.0, 4.0; // pair distances 3, 4, 1
    CHECK(median_pairwise_distance(odd) == 3.0);

    Eigen::MatrixXd even(4, 1);
    even << 0.0, 1.0, 3.0, 7.0; // pair distances 1, 3, 7, 2, 6, 4
    CHECK(median_pairwise_distance(even) == 3.5);

    CHECK(median_pairwise_distance(Eigen::MatrixXd::Zero(5, 2)) == 1.0);
    CHECK(median_pairwise_distance(Eigen::MatrixXd::Zero(1, 2)) == 1.0);

    const kernel_ridge_model m =
        fit_kernel_ridge(odd, Eigen::Vector3d(1.0, 2.0, 3.0), 0.0, 0.1);
    CHECK(m.bandwidth == 3.0);
}

TEST_CASE("kernel ridge matches an independent dense solve") {
    rng r(7);
    const int n = 50;
    const double bandwidth = 1.7, lambda = 0.1;
    const Eigen::MatrixXd x = random_matrix(n, 3, r);
    const Eigen::VectorXd y = random_matrix(n, 1, r);
    const kernel_ridge_model m = fit_kernel_ridge(x, y, bandwidth, lambda);

    auto kernel = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
        return std::exp(-(a - b).squaredNorm() / (2.0 * bandwidth * bandwidth));
    };
    std::vector<std::vector<double>> gram(n, std::vector<double>(n));
    std::vector<double> rhs(n);
    for (int i = 0; i < n; ++i) {
        rhs[static_cast<size_t>(i)] = y[i];
        for (int j = 0; j < n; ++j) {
            gram[static_cast<size_t>(i)][static_cast<size_t>(j)] = kernel(x.row(i), x.row(j));
        }
        gram[static_cast<size_t>(i)][static_cast<size_t>(i)] += lambda;
    }
    const std::vector<double> alpha = gauss_solve(gram, rhs);

    const Eigen::MatrixXd fresh = random_matrix(20, 3, r);
    const Eigen::VectorXd p = predict(m, fresh);
    for (int i = 0; i < 20; ++i) {
        double oracle = 0.0;
        for (int j = 0; j < n; ++j) {
            oracle += alpha[static_cast<size_t>(j)] * kernel(fresh.row(i), x.row(j));
        }
        CHECK(p[i] == doctest::Approx(oracle).epsilon(1e-8));
    }
}

TEST_CASE("kernel ridge validates its inputs") {
    rng r(8);
    const Eigen::MatrixXd x = random_matrix(10, 2, r);
    const Eigen::VectorXd y = random_matrix(10, 1, r);
    CHECK_THROWS_AS(fit_kernel_ridge(x, y, 1.0, 0.0), config_error);
    CHECK_THROWS_AS(fit_kernel_ridge(x, y, -1.0, 0.1), config_error);
    CHECK_THROWS_AS(fit_kernel_ridge(x, y.head(4), 1.0, 0.1), input_error);
    const kernel_ridge_model m = fit_kernel_ridge(x, y, 1.0, 0.1);
    CHECK_THROWS_AS(predict(m, random_matrix(5, 4, r)), input_error);
}

TEST_CASE("boosting with a single depth-zero tree predicts the target mean") {
    rng r(9);
    const Eigen::MatrixXd x = random_matrix(25, 3, r);
    const Eigen::VectorXd y = random_matrix(25, 1, r, 4.0);
    gbt_config cfg;
    cfg.trees = 1;
    cfg.depth = 0;
    cfg.subsample = 1.0;
    const gbt_model m = fit_gbt(x, y, cfg);
    const Eigen::VectorXd p = predict(m, x);
    for (int i = 0; i < 25; ++i) CHECK(p[i] == doctest::Approx(y.mean()).epsilon(1e-12));
}

TEST_CASE("boosted stumps recover an axis-aligned step function") {
    rng r(10);
    const int n = 120;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = r.uniform(0.0, 1.0);
        y[i] = x(i, 0) > 0.5 ? 2.0 : -1.0;
    }
    gbt_config cfg;
    cfg.trees = 400;
    cfg.depth = 1;
    cfg.shrinkage = 0.3;
    cfg.subsample = 1.0;
    const gbt_model m = fit_gbt(x, y, cfg);
    CHECK(mean_abs_error(predict(m, x), y) < 1e-3);
}

TEST_CASE("boosting training loss is non-increasing stage by stage") {
    rng r(11);
    const Eigen::MatrixXd x = random_matrix(200, 3, r);
    const Eigen::VectorXd y = random_matrix(200, 1, r);
    gbt_config cfg;
    cfg.trees = 100;
    cfg.depth = 2;
    cfg.subsample = 1.0;
    const gbt_model m = fit_gbt(x, y, cfg);
    REQUIRE(m.stage_loss.size() == 100);
    for (size_t t = 1; t < m.stage_loss.size(); ++t) {
        CHECK(m.stage_loss[t] <= m.stage_loss[t - 1] + 1e-12);
    }
    CHECK(m.stage_loss.back() < m.stage_loss.front());
}

TEST_CASE("a single depth-one tree finds the brute-force optimal split") {
    rng r(12);
    const int n = 40;
    const Eigen::MatrixXd x = random_matrix(n, 3, r);
    const Eigen::VectorXd y = random_matrix(n, 1, r);
    gbt_config cfg;
    cfg.trees = 1;
    cfg.depth = 1;
    cfg.shrinkage = 1.0;
    cfg.subsample = 1.0;
    const gbt_model m = fit_gbt(x, y, cfg);
    const double model_sse = (y - predict(m, x)).squaredNorm();

    // Oracle: try every candidate threshold on every feature and measure the
    // squared error of the induced two-leaf piecewise-mean predictor.
    double best_sse = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 3; ++j) {
        std::vector<double> vals(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) vals[static_cast<size_t>(i)] = x(i, j);
        std::sort(vals.begin(), vals.end());
        for (int k = 0; k + 1 < n; ++k) {
            if (vals[static_cast<size_t>(k)] == vals[static_cast<size_t>(k + 1)]) continue;
            const double thr =
                0.5 * (vals[static_cast<size_t>(k)] + vals[static_cast<size_t>(k + 1)]);
            double ls = 0.0, rs = 0.0;
            int lc = 0, rc = 0;
            for (int i = 0; i < n; ++i) {
                if (x(i, j) <= thr) {
                    ls += y[i];
                    lc += 1;
                } else {
                    rs += y[i];
                    rc += 1;
                }
            }
            double sse = 0.0;
            for (int i = 0; i < n; ++i) {
                const double mean = x(i, j) <= thr ? ls / lc : rs / rc;
                sse += (y[i] - mean) * (y[i] - mean);
            }
            best_sse = std::min(best_sse, sse);
        }
    }
    CHECK(model_sse == doctest::Approx(best_sse).epsilon(1e-9));
}

TEST_CASE("subsampled boosting is deterministic per seed") {
    rng r(13);
    const Eigen::MatrixXd x = random_matrix(150, 4, r);
    const Eigen::VectorXd y = random_matrix(150, 1, r);
    gbt_config cfg;
    cfg.trees = 40;
    cfg.depth = 3;
    cfg.subsample = 0.8;
    cfg.seed = 5;
    const Eigen::VectorXd a = predict(fit_gbt(x, y, cfg), x);
    const Eigen::VectorXd b = predict(fit_gbt(x, y, cfg), x);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    cfg.seed = 6;
    const Eigen::VectorXd c = predict(fit_gbt(x, y, cfg), x);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("boosted trees outperform a linear fit on a curved surface") {
    rng r(14);
    const int n = 300;
    Eigen::MatrixXd x = random_matrix(n, 2, r);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        y[i] = std::sin(3.0 * x(i, 0)) + x(i, 1) * x(i, 1) + 0.01 * r.normal();
    }
    Eigen::MatrixXd fresh = random_matrix(100, 2, r);
    Eigen::VectorXd fresh_y(100);
    for (int i = 0; i < 100; ++i) {
        fresh_y[i] = std::sin(3.0 * fresh(i, 0)) + fresh(i, 1) * fresh(i, 1);
    }
    gbt_config cfg;
    cfg.trees = 150;
    cfg.depth = 3;
    cfg.subsample = 1.0;
    const double gbt_mae = mean_abs_error(predict(fit_gbt(x, y, cfg), fresh), fresh_y);
    const double ridge_mae =
        mean_abs_error(predict(fit_ridge(x, y, 1.0), fresh), fresh_y);
    CHECK(gbt_mae < 0.8 * ridge_mae);
}

TEST_CASE("boosting validates its configuration") {
    rng r(15);
    const Eigen::MatrixXd x = random_matrix(10, 2, r);
    const Eigen::VectorXd y = random_matrix(10, 1, r);
    gbt_config cfg;
    cfg.trees = 0;
    CHECK_THROWS_AS(fit_gbt(x, y, cfg), config_error);
    cfg = {};
    cfg.depth = -1;
    CHECK_THROWS_AS(fit_gbt(x, y, cfg), config_error);
    cfg = {};
    cfg.shrinkage = 0.0;
    CHECK_THROWS_AS(fit_gbt(x, y, cfg), config_error);
    cfg = {};
    cfg.shrinkage = 1.5;
    CHECK_THROWS_AS(fit_gbt(x, y, cfg), config_error);
    cfg = {};
    cfg.subsample = 0.0;
    CHECK_THROWS_AS(fit_gbt(x, y, cfg), config_error);
    cfg = {};
    CHECK_THROWS_AS(fit_gbt(x, y.head(4), cfg), input_error);

    // Prediction requires at least the feature width the splits reference.
    Eigen::MatrixXd wide = random_matrix(60, 3, r);
    Eigen::VectorXd target(60);
    for (int i = 0; i < 60; ++i) target[i] = wide(i, 2) > 0.0 ? 1.0 : 0.0;
    cfg = {};
    cfg.trees = 5;
    cfg.subsample = 1.0;
    const gbt_model m = fit_gbt(wide, target, cfg);
    CHECK_THROWS_AS(predict(m, random_matrix(4, 2, r)), input_error);
}
