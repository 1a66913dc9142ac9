#include "gsne/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "gsne/csv.hpp"
#include "gsne/encoder.hpp"
#include "gsne/errors.hpp"
#include "gsne/rng.hpp"

namespace gsne {

namespace {

void check_pair(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred, const char* what) {
    if (truth.size() < 1) {
        throw input_error(std::string(what) + ": need at least one value");
    }
    if (truth.size() != pred.size()) {
        throw input_error(std::string(what) + ": truth length " + std::to_string(truth.size()) +
                          " does not match prediction length " + std::to_string(pred.size()));
    }
}

double parse_double_cell(const std::string& cell, const std::string& origin) {
    try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw input_error(origin + ": cannot parse number '" + cell + "'");
    }
}

std::int64_t parse_id_cell(const std::string& cell, const std::string& origin) {
    try {
        size_t used = 0;
        const long long v = std::stoll(cell, &used);
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw input_error(origin + ": cannot parse id '" + cell + "'");
    }
}

} // namespace

double mae(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
    check_pair(truth, pred, "mae");
    return (truth - pred).cwiseAbs().mean();
}

double rmse(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
    check_pair(truth, pred, "rmse");
    return std::sqrt((truth - pred).squaredNorm() / truth.size());
}

embedding_table load_embeddings(const std::string& path) {
    const csv_table csv = read_csv(path);
    const size_t cols = csv.header.size();
    if (cols < 4 || (cols - 2) % 2 != 0) {
        throw input_error(path + ": malformed embedding header");
    }
    const int width = static_cast<int>((cols - 2) / 2);
    if (csv.header[0] != "id" || csv.header[1] != "partition") {
        throw input_error(path + ": embedding table must start with id,partition columns");
    }
    for (int i = 0; i < width; ++i) {
        if (csv.header[static_cast<size_t>(2 + i)] != "mu_" + std::to_string(i) ||
            csv.header[static_cast<size_t>(2 + width + i)] != "var_" + std::to_string(i)) {
            throw input_error(path + ": embedding columns must be mu_0..mu_" +
                              std::to_string(width - 1) + ",var_0..var_" +
                              std::to_string(width - 1));
        }
    }

    embedding_table table;
    table.width = width;
    const std::string house_name = partition_names[part_house];
    std::vector<std::vector<double>> values;
    for (size_t row = 0; row < csv.rows.size(); ++row) {
        const auto& cells = csv.rows[row];
        if (cells[1] != house_name) continue;
        const std::string origin = path + " row " + std::to_string(row + 1);
        const std::int64_t id = parse_id_cell(cells[0], origin);
        if (table.row_of.count(id) > 0) {
            throw input_error(origin + ": duplicate house id " + std::to_string(id));
        }
        table.row_of.emplace(id, static_cast<int>(table.ids.size()));
        table.ids.push_back(id);
        values.emplace_back();
        values.back().reserve(cols - 2);
        for (size_t c = 2; c < cols; ++c) {
            values.back().push_back(parse_double_cell(cells[c], origin));
        }
    }
    table.mu.resize(static_cast<Eigen::Index>(values.size()), width);
    table.var.resize(static_cast<Eigen::Index>(values.size()), width);
    for (size_t r = 0; r < values.size(); ++r) {
        for (int c = 0; c < width; ++c) {
            table.mu(static_cast<Eigen::Index>(r), c) = values[r][static_cast<size_t>(c)];
            table.var(static_cast<Eigen::Index>(r), c) =
                values[r][static_cast<size_t>(width + c)];
        }
    }
    return table;
}

namespace {

void gather_rows(const embedding_table& table, const std::vector<std::int64_t>& ids,
                 Eigen::MatrixXd& mu, Eigen::MatrixXd& var) {
    mu.resize(static_cast<Eigen::Index>(ids.size()), table.width);
    var.resize(static_cast<Eigen::Index>(ids.size()), table.width);
    std::vector<std::int64_t> missing;
    for (size_t i = 0; i < ids.size(); ++i) {
        const auto it = table.row_of.find(ids[i]);
        if (it == table.row_of.end()) {
            missing.push_back(ids[i]);
            continue;
        }
        mu.row(static_cast<Eigen::Index>(i)) = table.mu.row(it->second);
        var.row(static_cast<Eigen::Index>(i)) = table.var.row(it->second);
    }
    if (!missing.empty()) {
        std::string list;
        for (size_t i = 0; i < missing.size() && i < 8; ++i) {
            list += (i ? ", " : "") + std::to_string(missing[i]);
        }
        if (missing.size() > 8) list += ", ...";
        throw input_error("evaluation: missing embeddings for " +
                          std::to_string(missing.size()) + " house id(s): " + list);
    }
}

} // namespace

house_embeddings join_embeddings(const embedding_table& table, const dataset_bundle& ds,
                                 int embed_dim) {
    if (embed_dim < 1) throw config_error("join_embeddings: embed_dim must be positive");
    if (table.width != embed_dim && table.width != 2 * embed_dim) {
        throw config_error("embedding width " + std::to_string(table.width) +
                           " matches neither one nor two blocks of dimension " +
                           std::to_string(embed_dim));
    }
    house_embeddings emb;
    emb.embed_dim = embed_dim;
    gather_rows(table, ds.graph.partitions[part_house].ids, emb.train_mu, emb.train_var);
    gather_rows(table, ds.test_ids, emb.test_mu, emb.test_var);
    return emb;
}

house_embeddings encode_embeddings(const train_state& state, const dataset_bundle& ds) {
    if (!state.first && !state.second) throw config_error("no trained model to encode with");
    std::vector<const model_state*> models;
    if (state.first) models.push_back(&*state.first);
    if (state.second) models.push_back(&*state.second);

    const int dim = state.cfg.hyper.embed_dim;
    const int width = state.export_width();
    const auto& houses = ds.graph.partitions[part_house];
    const int n_train = houses.size();
    const int n_test = static_cast<int>(ds.test_ids.size());

    house_embeddings emb;
    emb.embed_dim = dim;
    emb.train_mu.resize(n_train, width);
    emb.train_var.resize(n_train, width);
    emb.test_mu.resize(n_test, width);
    emb.test_var.resize(n_test, width);

    for (int i = 0; i < n_train; ++i) {
        for (size_t m = 0; m < models.size(); ++m) {
            const gaussian_embedding e =
                encode_node(models[m]->params, ds.graph, {part_house, i},
                            encoder_role::attribute);
            emb.train_mu.row(i).segment(static_cast<int>(m) * dim, dim) = e.mu.transpose();
            emb.train_var.row(i).segment(static_cast<int>(m) * dim, dim) = e.var.transpose();
        }
    }
    for (int i = 0; i < n_test; ++i) {
        for (size_t m = 0; m < models.size(); ++m) {
            const auto& params = models[m]->params;
            const Eigen::VectorXd u =
                encode_attributes(params.attr, part_house, ds.test_attrs.col(i));
            const gaussian_embedding e = encode_gaussian(params.attr, u, params.hyper);
            emb.test_mu.row(i).segment(static_cast<int>(m) * dim, dim) = e.mu.transpose();
            emb.test_var.row(i).segment(static_cast<int>(m) * dim, dim) = e.var.transpose();
        }
    }
    return emb;
}

namespace {

// Standardizes each train column to zero mean / unit (population) sd and
// applies the train statistics to the matching test column, mirroring how
// the raw attributes were standardized upstream. Near-constant columns
// (e.g. dead encoder units) become zeros so they carry no signal.
void standardize_columns(Eigen::MatrixXd& train, Eigen::MatrixXd& test) {
    const double n = static_cast<double>(train.rows());
    if (n == 0.0) return;
    for (Eigen::Index c = 0; c < train.cols(); ++c) {
        const double mean = train.col(c).mean();
        const double var =
            std::max(0.0, train.col(c).squaredNorm() / n - mean * mean);
        const double sd = std::sqrt(var);
        if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
            train.col(c).setZero();
            test.col(c).setZero();
            continue;
        }
        train.col(c) = (train.col(c).array() - mean) / sd;
        test.col(c) = (test.col(c).array() - mean) / sd;
    }
}

} // namespace

feature_bundle make_feature_bundle(const dataset_bundle& ds, const house_embeddings& emb,
                                   bool use_variance) {
    const auto& houses = ds.graph.partitions[part_house];
    feature_bundle fb;
    fb.train_raw = houses.attrs.transpose();
    fb.test_raw = ds.test_attrs.transpose();
    fb.train_y = Eigen::Map<const Eigen::VectorXd>(ds.train_log_price.data(),
                                                   static_cast<Eigen::Index>(
                                                       ds.train_log_price.size()));
    fb.test_y = Eigen::Map<const Eigen::VectorXd>(ds.test_log_price.data(),
                                                  static_cast<Eigen::Index>(
                                                      ds.test_log_price.size()));
    fb.emb = emb;
    fb.use_variance = use_variance;
    if (fb.emb.train_mu.rows() != fb.train_raw.rows() ||
        fb.emb.test_mu.rows() != fb.test_raw.rows()) {
        throw input_error("evaluation: embedding rows do not match dataset house rows");
    }
    // Embedding columns come out of the encoders at arbitrary, uneven scales
    // (and raw attributes are already standardized), so put every feature on
    // the same footing. Scale-invariant models are unaffected; kernel and
    // penalized models need it to see the embedding signal at all.
    standardize_columns(fb.emb.train_mu, fb.emb.test_mu);
    standardize_columns(fb.emb.train_var, fb.emb.test_var);
    return fb;
}

const std::array<const char*, 5> feature_set_names = {
    "raw", "raw+gsne_1st", "raw+gsne_2nd", "raw+gsne_both", "gsne_only"};

namespace {

Eigen::MatrixXd hstack(const std::vector<Eigen::MatrixXd>& blocks) {
    Eigen::Index rows = blocks.front().rows(), cols = 0;
    for (const auto& b : blocks) cols += b.cols();
    Eigen::MatrixXd out(rows, cols);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        out.middleCols(at, b.cols()) = b;
        at += b.cols();
    }
    return out;
}

} // namespace

Eigen::MatrixXd feature_matrix(const feature_bundle& fb, const std::string& set_name,
                               bool train) {
    const Eigen::MatrixXd& raw = train ? fb.train_raw : fb.test_raw;
    const Eigen::MatrixXd& mu = train ? fb.emb.train_mu : fb.emb.test_mu;
    const Eigen::MatrixXd& var = train ? fb.emb.train_var : fb.emb.test_var;
    const int dim = fb.emb.embed_dim;
    const bool second_available = fb.emb.has_second();

    auto block = [&](const Eigen::MatrixXd& m, int which) -> Eigen::MatrixXd {
        // which: 0 = first block, 1 = second block, 2 = everything
        if (which == 2) return m;
        return m.middleCols(which * dim, dim);
    };
    auto with_variance = [&](std::vector<Eigen::MatrixXd> blocks, int which) {
        if (fb.use_variance) blocks.push_back(block(var, which));
        return hstack(blocks);
    };

    if (set_name == "raw") return raw;
    if (set_name == "raw+gsne_1st") return with_variance({raw, block(mu, 0)}, 0);
    if (set_name == "raw+gsne_2nd") {
        if (!second_available) {
            throw config_error("feature set 'raw+gsne_2nd' needs embeddings trained with "
                               "both proximity orders");
        }
        return with_variance({raw, block(mu, 1)}, 1);
    }
    if (set_name == "raw+gsne_both") {
        if (!second_available) {
            throw config_error("feature set 'raw+gsne_both' needs embeddings trained with "
                               "both proximity orders");
        }
        return with_variance({raw, block(mu, 2)}, 2);
    }
    if (set_name == "gsne_only") return with_variance({block(mu, 2)}, 2);
    throw config_error("unknown feature set '" + set_name +
                       "' (expected raw, raw+gsne_1st, raw+gsne_2nd, raw+gsne_both, "
                       "gsne_only)");
}

eval_config make_eval_config(const run_config& cfg) {
    eval_config ec;
    ec.ridge_lambda = cfg.ridge_lambda;
    ec.krr_bandwidth = cfg.krr_bandwidth;
    ec.krr_lambda = cfg.krr_lambda;
    ec.gbt.trees = cfg.gbt_trees;
    ec.gbt.depth = cfg.gbt_depth;
    ec.gbt.shrinkage = cfg.gbt_shrinkage;
    ec.gbt.subsample = cfg.gbt_subsample;
    ec.gbt.seed = cfg.seed;
    ec.seed = cfg.seed;
    return ec;
}

namespace {

Eigen::VectorXd fit_predict(const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y,
                            const Eigen::MatrixXd& test_x, const std::string& regressor,
                            const eval_config& cfg) {
    if (regressor == "ridge") {
        return predict(fit_ridge(train_x, train_y, cfg.ridge_lambda), test_x);
    }
    if (regressor == "krr" || regressor == "kernel_ridge") {
        return predict(fit_kernel_ridge(train_x, train_y, cfg.krr_bandwidth, cfg.krr_lambda),
                       test_x);
    }
    if (regressor == "gbt") {
        return predict(fit_gbt(train_x, train_y, cfg.gbt), test_x);
    }
    throw config_error("unknown regressor '" + regressor + "' (expected ridge, krr, gbt)");
}

} // namespace

metric_row evaluate_cell(const feature_bundle& fb, const std::string& set_name,
                         const std::string& regressor, const eval_config& cfg) {
    const Eigen::MatrixXd train_x = feature_matrix(fb, set_name, true);
    const Eigen::MatrixXd test_x = feature_matrix(fb, set_name, false);
    const Eigen::VectorXd pred = fit_predict(train_x, fb.train_y, test_x, regressor, cfg);

    metric_row row;
    row.feature_set = set_name;
    row.regressor = regressor;
    row.mae = mae(fb.test_y, pred);
    row.rmse = rmse(fb.test_y, pred);

    // Quartiles partition the test rows by rank of the true log price.
    const Eigen::Index n = fb.test_y.size();
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return fb.test_y[a] < fb.test_y[b] || (fb.test_y[a] == fb.test_y[b] && a < b);
    });
    std::array<double, 4> abs_sum{};
    for (size_t rank = 0; rank < order.size(); ++rank) {
        const int i = order[rank];
        const size_t q = rank * 4 / order.size();
        abs_sum[q] += std::abs(fb.test_y[i] - pred[i]);
        row.quartile_count[q] += 1;
    }
    for (size_t q = 0; q < 4; ++q) {
        row.quartile_mae[q] = row.quartile_count[q] > 0 ? abs_sum[q] / row.quartile_count[q]
                                                        : 0.0;
    }

    // Outliers sit more than three training standard deviations from the
    // training mean of the log price.
    const double train_mean = fb.train_y.mean();
    const double train_sd =
        std::sqrt((fb.train_y.array() - train_mean).square().sum() / fb.train_y.size());
    double out_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(fb.test_y[i] - train_mean) > 3.0 * train_sd) {
            out_sum += std::abs(fb.test_y[i] - pred[i]);
            row.outlier_count += 1;
        }
    }
    row.outlier_mae = row.outlier_count > 0 ? out_sum / row.outlier_count : 0.0;
    return row;
}

std::vector<metric_row> evaluate(const feature_bundle& fb,
                                 const std::vector<std::string>& set_names,
                                 const std::vector<std::string>& regressors,
                                 const eval_config& cfg) {
    std::vector<metric_row> rows;
    rows.reserve(set_names.size() * regressors.size());
    for (const auto& set : set_names) {
        for (const auto& reg : regressors) {
            rows.push_back(evaluate_cell(fb, set, reg, cfg));
        }
    }
    return rows;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

} // namespace

ci_row bootstrap_ci(const feature_bundle& fb, const std::string& set_name,
                    const std::string& regressor, const eval_config& cfg, int replicates,
                    double level, double train_fraction, std::uint64_t seed) {
    if (replicates < 100) {
        throw config_error("bootstrap: need at least 100 replicates");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw config_error("bootstrap: confidence level must be in (0, 1)");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw config_error("bootstrap: train fraction must be in (0, 1)");
    }

    const Eigen::MatrixXd train_x = feature_matrix(fb, set_name, true);
    const Eigen::MatrixXd test_x = feature_matrix(fb, set_name, false);
    const Eigen::Index n = train_x.rows() + test_x.rows();
    Eigen::MatrixXd x(n, train_x.cols());
    x.topRows(train_x.rows()) = train_x;
    x.bottomRows(test_x.rows()) = test_x;
    Eigen::VectorXd y(n);
    y.head(fb.train_y.size()) = fb.train_y;
    y.tail(fb.test_y.size()) = fb.test_y;

    const int take = std::clamp<int>(
        static_cast<int>(std::llround(train_fraction * static_cast<double>(n))), 1,
        static_cast<int>(n) - 1);
    rng r(seed, 17);
    std::vector<int> idx(static_cast<size_t>(n));
    std::vector<double> maes;
    maes.reserve(static_cast<size_t>(replicates));
    eval_config rep_cfg = cfg;
    for (int rep = 0; rep < replicates; ++rep) {
        std::iota(idx.begin(), idx.end(), 0);
        for (Eigen::Index i = 0; i < n - 1; ++i) {
            const auto j =
                i + static_cast<Eigen::Index>(r.uniform_index(static_cast<std::uint64_t>(n - i)));
            std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        }
        Eigen::MatrixXd bx(take, x.cols());
        Eigen::VectorXd by(take);
        Eigen::MatrixXd hx(n - take, x.cols());
        Eigen::VectorXd hy(n - take);
        for (int i = 0; i < take; ++i) {
            bx.row(i) = x.row(idx[static_cast<size_t>(i)]);
            by[i] = y[idx[static_cast<size_t>(i)]];
        }
        for (Eigen::Index i = take; i < n; ++i) {
            hx.row(i - take) = x.row(idx[static_cast<size_t>(i)]);
            hy[i - take] = y[idx[static_cast<size_t>(i)]];
        }
        rep_cfg.gbt.seed = cfg.gbt.seed + static_cast<std::uint64_t>(rep);
        const Eigen::VectorXd pred = fit_predict(bx, by, hx, regressor, rep_cfg);
        maes.push_back(mae(hy, pred));
    }
    std::sort(maes.begin(), maes.end());

    ci_row row;
    row.feature_set = set_name;
    row.regressor = regressor;
    row.level = level;
    row.replicates = replicates;
    const double tail = (1.0 - level) / 2.0;
    row.lower = quantile_sorted(maes, tail);
    row.upper = quantile_sorted(maes, 1.0 - tail);
    return row;
}

ablation_report poi_ablation(const dataset_bundle& ds, const run_config& cfg) {
    const eval_config ec = make_eval_config(cfg);

    std::vector<std::string> targets;
    for (const auto& set : ds.graph.edge_sets) {
        if (set.part_a == part_house && !set.edges.empty()) targets.push_back(set.name);
    }
    targets.push_back("all");

    ablation_report report;
    bool have_baseline = false;
    for (const auto& name : targets) {
        train_config tc = make_train_config(cfg);
        if (name != "all") tc.edge_set_filter = {name};
        train_state state = init_training(ds.graph, tc);
        train(state, ds.graph, tc.iterations);
        const house_embeddings emb = encode_embeddings(state, ds);
        const feature_bundle fb = make_feature_bundle(ds, emb, cfg.embed_use_variance);
        if (!have_baseline) {
            report.baseline = evaluate_cell(fb, "raw", "gbt", ec);
            have_baseline = true;
        }
        report.rows.push_back({name, evaluate_cell(fb, "raw+gsne_both", "gbt", ec)});
    }
    return report;
}

namespace {

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void append_metric_cells(std::ostringstream& out, const metric_row& row) {
    out << format_double(row.mae) << ',' << format_double(row.rmse);
    for (size_t q = 0; q < 4; ++q) out << ',' << format_double(row.quartile_mae[q]);
    for (size_t q = 0; q < 4; ++q) out << ',' << row.quartile_count[q];
    out << ',' << format_double(row.outlier_mae) << ',' << row.outlier_count;
}

nlohmann::json metric_json(const metric_row& row) {
    return {{"feature_set", row.feature_set},
            {"regressor", row.regressor},
            {"mae", row.mae},
            {"rmse", row.rmse},
            {"quartile_mae", row.quartile_mae},
            {"quartile_count", row.quartile_count},
            {"outlier_mae", row.outlier_mae},
            {"outlier_count", row.outlier_count}};
}

constexpr const char* report_note =
    "note: regressors cover ridge, kernel ridge, and gbt; model averaging and "
    "stacking variants are intentionally out of scope.";

} // namespace

std::string render_report_text(const eval_report& rep) {
    std::ostringstream out;
    char line[256];
    out << "house price prediction report (log-price errors)\n\n";
    std::snprintf(line, sizeof line, "%-15s %-7s %9s %9s %9s %9s %9s %9s %12s\n",
                  "feature set", "model", "MAE", "RMSE", "Q1", "Q2", "Q3", "Q4",
                  "outliers(n)");
    out << line;
    for (const auto& row : rep.rows) {
        std::string outliers = format_metric(row.outlier_mae) + "(" +
                               std::to_string(row.outlier_count) + ")";
        std::snprintf(line, sizeof line, "%-15s %-7s %9s %9s %9s %9s %9s %9s %12s\n",
                      row.feature_set.c_str(), row.regressor.c_str(),
                      format_metric(row.mae).c_str(), format_metric(row.rmse).c_str(),
                      format_metric(row.quartile_mae[0]).c_str(),
                      format_metric(row.quartile_mae[1]).c_str(),
                      format_metric(row.quartile_mae[2]).c_str(),
                      format_metric(row.quartile_mae[3]).c_str(), outliers.c_str());
        out << line;
    }
    if (!rep.cis.empty()) {
        out << "\nbootstrap confidence intervals (test MAE)\n";
        std::snprintf(line, sizeof line, "%-15s %-7s %7s %5s %9s %9s\n", "feature set",
                      "model", "level", "reps", "lower", "upper");
        out << line;
        for (const auto& ci : rep.cis) {
            std::snprintf(line, sizeof line, "%-15s %-7s %7.3f %5d %9s %9s\n",
                          ci.feature_set.c_str(), ci.regressor.c_str(), ci.level,
                          ci.replicates, format_metric(ci.lower).c_str(),
                          format_metric(ci.upper).c_str());
            out << line;
        }
    }
    if (rep.ablation) {
        out << "\nPOI ablation (gbt, raw+gsne_both vs raw baseline)\n";
        std::snprintf(line, sizeof line, "%-15s %9s %9s %9s\n", "edge set", "MAE", "RMSE",
                      "vs raw");
        out << line;
        const double base = rep.ablation->baseline.mae;
        std::snprintf(line, sizeof line, "%-15s %9s %9s %9s\n", "(raw baseline)",
                      format_metric(base).c_str(),
                      format_metric(rep.ablation->baseline.rmse).c_str(), "-");
        out << line;
        for (const auto& row : rep.ablation->rows) {
            const double rel = base > 0.0 ? (base - row.metrics.mae) / base : 0.0;
            char pct[32];
            std::snprintf(pct, sizeof pct, "%+.2f%%", 100.0 * rel);
            std::snprintf(line, sizeof line, "%-15s %9s %9s %9s\n", row.edge_set.c_str(),
                          format_metric(row.metrics.mae).c_str(),
                          format_metric(row.metrics.rmse).c_str(), pct);
            out << line;
        }
    }
    out << '\n' << report_note << '\n';
    return out.str();
}

std::string render_report_csv(const eval_report& rep) {
    std::ostringstream out;
    out << "section,feature_set,regressor,edge_set,mae,rmse,q1_mae,q2_mae,q3_mae,q4_mae,"
           "q1_n,q2_n,q3_n,q4_n,outlier_mae,outlier_n,ci_level,ci_lower,ci_upper,"
           "ci_replicates\n";
    for (const auto& row : rep.rows) {
        out << "metrics," << row.feature_set << ',' << row.regressor << ",,";
        append_metric_cells(out, row);
        out << ",,,,\n";
    }
    for (const auto& ci : rep.cis) {
        out << "bootstrap," << ci.feature_set << ',' << ci.regressor
            << ",,,,,,,,,,,,,," << format_double(ci.level) << ',' << format_double(ci.lower)
            << ',' << format_double(ci.upper) << ',' << ci.replicates << '\n';
    }
    if (rep.ablation) {
        out << "ablation,raw,gbt,baseline,";
        append_metric_cells(out, rep.ablation->baseline);
        out << ",,,,\n";
        for (const auto& row : rep.ablation->rows) {
            out << "ablation,raw+gsne_both,gbt," << row.edge_set << ',';
            append_metric_cells(out, row.metrics);
            out << ",,,,\n";
        }
    }
    return out.str();
}

std::string render_report_json(const eval_report& rep) {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : rep.rows) j["rows"].push_back(metric_json(row));
    j["bootstrap"] = nlohmann::json::array();
    for (const auto& ci : rep.cis) {
        j["bootstrap"].push_back({{"feature_set", ci.feature_set},
                                  {"regressor", ci.regressor},
                                  {"level", ci.level},
                                  {"lower", ci.lower},
                                  {"upper", ci.upper},
                                  {"replicates", ci.replicates}});
    }
    if (rep.ablation) {
        nlohmann::json ab;
        ab["baseline"] = metric_json(rep.ablation->baseline);
        ab["rows"] = nlohmann::json::array();
        for (const auto& row : rep.ablation->rows) {
            nlohmann::json item = metric_json(row.metrics);
            item["edge_set"] = row.edge_set;
            ab["rows"].push_back(item);
        }
        j["ablation"] = ab;
    }
    j["note"] = report_note;
    return j.dump(2) + "\n";
}

void write_report(const eval_report& rep, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    write_text_file(dir + "/report.txt", render_report_text(rep));
    write_text_file(dir + "/report.csv", render_report_csv(rep));
    write_text_file(dir + "/report.json", render_report_json(rep));
}

} // namespace gsne
