#include "gsne/regressors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gsne/errors.hpp"
#include "gsne/rng.hpp"

namespace gsne {

namespace {

void check_xy(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const char* what) {
    if (x.rows() < 1) {
        throw input_error(std::string(what) + ": need at least one training row");
    }
    if (x.rows() != y.size()) {
        throw input_error(std::string(what) + ": feature rows (" + std::to_string(x.rows()) +
                          ") do not match target length (" + std::to_string(y.size()) + ")");
    }
}

} // namespace

ridge_model fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
    check_xy(x, y, "ridge");
    if (!(lambda > 0.0)) {
        throw config_error("ridge: lambda must be positive");
    }
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += lambda;
    ridge_model m;
    m.coef = gram.ldlt().solve(xc.transpose() * yc);
    m.intercept = y_mean - x_mean.dot(m.coef);
    if (!m.coef.allFinite() || !std::isfinite(m.intercept)) {
        throw numeric_error("ridge: non-finite solution");
    }
    return m;
}

Eigen::VectorXd predict(const ridge_model& m, const Eigen::MatrixXd& x) {
    if (x.cols() != m.coef.size()) {
        throw input_error("ridge predict: feature width " + std::to_string(x.cols()) +
                          " does not match model width " + std::to_string(m.coef.size()));
    }
    return (x * m.coef).array() + m.intercept;
}

double median_pairwise_distance(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    std::vector<double> dist;
    dist.reserve(static_cast<size_t>(n) * static_cast<size_t>(n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            dist.push_back((x.row(i) - x.row(j)).norm());
        }
    }
    if (dist.empty()) return 1.0;
    std::sort(dist.begin(), dist.end());
    const size_t h = dist.size() / 2;
    const double med = dist.size() % 2 == 1 ? dist[h] : 0.5 * (dist[h - 1] + dist[h]);
    return med > 0.0 ? med : 1.0;
}

namespace {

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           double bandwidth) {
    const Eigen::VectorXd a2 = a.rowwise().squaredNorm();
    const Eigen::VectorXd b2 = b.rowwise().squaredNorm();
    Eigen::MatrixXd sq = (-2.0 * a * b.transpose());
    sq.colwise() += a2;
    sq.rowwise() += b2.transpose();
    return (sq.cwiseMax(0.0) / (-2.0 * bandwidth * bandwidth)).array().exp();
}

} // namespace

kernel_ridge_model fit_kernel_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    double bandwidth, double lambda) {
    check_xy(x, y, "kernel ridge");
    if (!(lambda > 0.0)) {
        throw config_error("kernel ridge: lambda must be positive");
    }
    if (bandwidth < 0.0) {
        throw config_error("kernel ridge: bandwidth must be non-negative (0 = median heuristic)");
    }
    kernel_ridge_model m;
    m.train_x = x;
    m.bandwidth = bandwidth > 0.0 ? bandwidth : median_pairwise_distance(x);

    Eigen::MatrixXd gram = rbf_kernel(x, x, m.bandwidth);
    gram.diagonal().array() += lambda;
    const auto solver = gram.ldlt();
    if (solver.info() != Eigen::Success) {
        throw numeric_error("kernel ridge: Gram factorization failed");
    }
    m.alpha = solver.solve(y);
    if (!m.alpha.allFinite()) {
        throw numeric_error("kernel ridge: non-finite dual coefficients");
    }
    return m;
}

Eigen::VectorXd predict(const kernel_ridge_model& m, const Eigen::MatrixXd& x) {
    if (x.cols() != m.train_x.cols()) {
        throw input_error("kernel ridge predict: feature width " + std::to_string(x.cols()) +
                          " does not match model width " + std::to_string(m.train_x.cols()));
    }
    return rbf_kernel(x, m.train_x, m.bandwidth) * m.alpha;
}

namespace {

double tree_output(const gbt_tree& tree, const Eigen::MatrixXd& x, Eigen::Index row) {
    int node = 0;
    while (tree.nodes[static_cast<size_t>(node)].feature >= 0) {
        const gbt_node& nd = tree.nodes[static_cast<size_t>(node)];
        node = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return tree.nodes[static_cast<size_t>(node)].value;
}

// Per-active-node running statistics for one sorted-feature sweep.
struct split_scan {
    std::vector<double> left_sum, prev_value, best_gain, best_threshold;
    std::vector<int> left_count, best_feature;

    void reset_best(size_t slots) {
        best_gain.assign(slots, 0.0);
        best_threshold.assign(slots, 0.0);
        best_feature.assign(slots, -1);
    }
    void reset_feature(size_t slots) {
        left_sum.assign(slots, 0.0);
        left_count.assign(slots, 0);
        prev_value.assign(slots, std::numeric_limits<double>::quiet_NaN());
    }
};

} // namespace

gbt_model fit_gbt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const gbt_config& cfg) {
    check_xy(x, y, "gbt");
    if (cfg.trees < 1) throw config_error("gbt: trees must be at least 1");
    if (cfg.depth < 0) throw config_error("gbt: depth must be non-negative");
    if (!(cfg.shrinkage > 0.0 && cfg.shrinkage <= 1.0)) {
        throw config_error("gbt: shrinkage must be in (0, 1]");
    }
    if (!(cfg.subsample > 0.0 && cfg.subsample <= 1.0)) {
        throw config_error("gbt: subsample must be in (0, 1]");
    }

    const int n = static_cast<int>(x.rows());
    const int width = static_cast<int>(x.cols());

    gbt_model model;
    model.base = y.mean();
    model.shrinkage = cfg.shrinkage;
    model.trees.reserve(static_cast<size_t>(cfg.trees));
    model.stage_loss.reserve(static_cast<size_t>(cfg.trees));

    // Presort every feature once; sweeps then touch two contiguous arrays
    // (row index and value in sorted order) plus two row-indexed arrays.
    std::vector<std::vector<int>> order(static_cast<size_t>(width));
    std::vector<std::vector<double>> sorted_value(static_cast<size_t>(width));
    for (int j = 0; j < width; ++j) {
        auto& ord = order[static_cast<size_t>(j)];
        ord.resize(static_cast<size_t>(n));
        std::iota(ord.begin(), ord.end(), 0);
        std::sort(ord.begin(), ord.end(), [&](int a, int b) {
            const double va = x(a, j), vb = x(b, j);
            return va < vb || (va == vb && a < b);
        });
        auto& vals = sorted_value[static_cast<size_t>(j)];
        vals.resize(static_cast<size_t>(n));
        for (int k = 0; k < n; ++k) vals[static_cast<size_t>(k)] = x(ord[static_cast<size_t>(k)], j);
    }

    Eigen::VectorXd pred = Eigen::VectorXd::Constant(n, model.base);
    std::vector<double> residual(static_cast<size_t>(n));
    std::vector<int> node_of(static_cast<size_t>(n));
    std::vector<int> sample_pool(static_cast<size_t>(n));
    const int sample_size =
        std::clamp<int>(static_cast<int>(std::llround(cfg.subsample * n)), 1, n);
    rng r(cfg.seed, 7);
    split_scan scan;

    for (int t = 0; t < cfg.trees; ++t) {
        std::fill(node_of.begin(), node_of.end(), -1);
        std::iota(sample_pool.begin(), sample_pool.end(), 0);
        for (int i = 0; i < sample_size; ++i) {
            const auto pick = i + static_cast<int>(r.uniform_index(
                                      static_cast<std::uint64_t>(n - i)));
            std::swap(sample_pool[static_cast<size_t>(i)], sample_pool[static_cast<size_t>(pick)]);
            const int row = sample_pool[static_cast<size_t>(i)];
            node_of[static_cast<size_t>(row)] = 0;
            residual[static_cast<size_t>(row)] = y[row] - pred[row];
        }

        gbt_tree tree;
        tree.nodes.push_back({});
        std::vector<int> active{0};
        std::vector<double> node_sum{0.0};
        std::vector<int> node_count{0};
        for (int i = 0; i < sample_size; ++i) {
            const int row = sample_pool[static_cast<size_t>(i)];
            node_sum[0] += residual[static_cast<size_t>(row)];
            node_count[0] += 1;
        }
        std::vector<int> slot_of;

        for (int level = 0; level < cfg.depth && !active.empty(); ++level) {
            const size_t slots = active.size();
            slot_of.assign(tree.nodes.size(), -1);
            for (size_t s = 0; s < slots; ++s) {
                slot_of[static_cast<size_t>(active[s])] = static_cast<int>(s);
            }
            scan.reset_best(slots);

            for (int j = 0; j < width; ++j) {
                scan.reset_feature(slots);
                const auto& ord = order[static_cast<size_t>(j)];
                const auto& vals = sorted_value[static_cast<size_t>(j)];
                for (int k = 0; k < n; ++k) {
                    const int row = ord[static_cast<size_t>(k)];
                    const int nd = node_of[static_cast<size_t>(row)];
                    if (nd < 0) continue;
                    const int s = slot_of[static_cast<size_t>(nd)];
                    if (s < 0) continue;
                    const size_t su = static_cast<size_t>(s);
                    const double v = vals[static_cast<size_t>(k)];
                    if (scan.left_count[su] > 0 && v > scan.prev_value[su]) {
                        const double total_sum = node_sum[su];
                        const int total_count = node_count[su];
                        const double ls = scan.left_sum[su];
                        const int lc = scan.left_count[su];
                        const double rs = total_sum - ls;
                        const int rc = total_count - lc;
                        const double gain = ls * ls / lc + rs * rs / rc -
                                            total_sum * total_sum / total_count;
                        if (gain > scan.best_gain[su] + 1e-12) {
                            double thr = 0.5 * (scan.prev_value[su] + v);
                            if (!(thr < v)) thr = scan.prev_value[su];
                            scan.best_gain[su] = gain;
                            scan.best_feature[su] = j;
                            scan.best_threshold[su] = thr;
                        }
                    }
                    scan.left_sum[su] += residual[static_cast<size_t>(row)];
                    scan.left_count[su] += 1;
                    scan.prev_value[su] = v;
                }
            }

            std::vector<int> next_active;
            for (size_t s = 0; s < slots; ++s) {
                if (scan.best_feature[s] < 0) continue;
                gbt_node& nd = tree.nodes[static_cast<size_t>(active[s])];
                nd.feature = scan.best_feature[s];
                nd.threshold = scan.best_threshold[s];
                nd.left = static_cast<int>(tree.nodes.size());
                nd.right = nd.left + 1;
                tree.nodes.push_back({});
                tree.nodes.push_back({});
                next_active.push_back(nd.left);
                next_active.push_back(nd.right);
            }
            if (next_active.empty()) break;

            node_sum.assign(tree.nodes.size(), 0.0);
            node_count.assign(tree.nodes.size(), 0);
            for (int i = 0; i < sample_size; ++i) {
                const int row = sample_pool[static_cast<size_t>(i)];
                int nd = node_of[static_cast<size_t>(row)];
                const gbt_node& node = tree.nodes[static_cast<size_t>(nd)];
                if (node.feature >= 0) {
                    nd = x(row, node.feature) <= node.threshold ? node.left : node.right;
                    node_of[static_cast<size_t>(row)] = nd;
                }
                node_sum[static_cast<size_t>(nd)] += residual[static_cast<size_t>(row)];
                node_count[static_cast<size_t>(nd)] += 1;
            }
            // Compact per-slot stats for the next level.
            std::vector<double> sums;
            std::vector<int> counts;
            for (int nd : next_active) {
                sums.push_back(node_sum[static_cast<size_t>(nd)]);
                counts.push_back(node_count[static_cast<size_t>(nd)]);
            }
            active = std::move(next_active);
            node_sum = std::move(sums);
            node_count = std::move(counts);
        }

        // Leaf values are mean residuals of the subsampled rows they hold.
        std::vector<double> leaf_sum(tree.nodes.size(), 0.0);
        std::vector<int> leaf_count(tree.nodes.size(), 0);
        for (int i = 0; i < sample_size; ++i) {
            const int row = sample_pool[static_cast<size_t>(i)];
            const int nd = node_of[static_cast<size_t>(row)];
            leaf_sum[static_cast<size_t>(nd)] += residual[static_cast<size_t>(row)];
            leaf_count[static_cast<size_t>(nd)] += 1;
        }
        for (size_t nd = 0; nd < tree.nodes.size(); ++nd) {
            if (tree.nodes[nd].feature < 0 && leaf_count[nd] > 0) {
                tree.nodes[nd].value = leaf_sum[nd] / leaf_count[nd];
            }
        }

        for (int i = 0; i < n; ++i) {
            pred[i] += cfg.shrinkage * tree_output(tree, x, i);
        }
        model.stage_loss.push_back((y - pred).squaredNorm() / n);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

Eigen::VectorXd predict(const gbt_model& m, const Eigen::MatrixXd& x) {
    int needed = 0;
    for (const gbt_tree& tree : m.trees) {
        for (const gbt_node& nd : tree.nodes) {
            needed = std::max(needed, nd.feature + 1);
        }
    }
    if (x.cols() < needed) {
        throw input_error("gbt predict: feature width " + std::to_string(x.cols()) +
                          " narrower than the fitted model (needs " + std::to_string(needed) +
                          ")");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), m.base);
    for (const gbt_tree& tree : m.trees) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            out[i] += m.shrinkage * tree_output(tree, x, i);
        }
    }
    return out;
}

} // namespace gsne
