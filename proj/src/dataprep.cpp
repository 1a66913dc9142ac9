#include "gsne/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "gsne/csv.hpp"
#include "gsne/errors.hpp"
#include "gsne/rng.hpp"
#include "gsne/serialize.hpp"

namespace gsne {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Schema

column_kind parse_column_kind(const std::string& text) {
    if (text == "id") return column_kind::id;
    if (text == "coordinate") return column_kind::coordinate;
    if (text == "numeric") return column_kind::numeric;
    if (text == "categorical") return column_kind::categorical;
    if (text == "target") return column_kind::target;
    if (text == "region_link") return column_kind::region_link;
    throw config_error("unknown column kind '" + text + "'");
}

const char* column_kind_name(column_kind kind) {
    switch (kind) {
    case column_kind::id: return "id";
    case column_kind::coordinate: return "coordinate";
    case column_kind::numeric: return "numeric";
    case column_kind::categorical: return "categorical";
    case column_kind::target: return "target";
    case column_kind::region_link: return "region_link";
    }
    return "unknown";
}

const schema_column* table_schema::find(const std::string& column_name) const {
    for (const auto& c : columns) {
        if (c.name == column_name) return &c;
    }
    return nullptr;
}

namespace {

table_schema table_from_json(const json& j, const std::string& table_name,
                             const std::string& origin) {
    if (!j.is_object() || !j.contains("columns") || !j["columns"].is_array()) {
        throw config_error(origin + ": table '" + table_name + "' needs a columns array");
    }
    table_schema ts;
    ts.name = table_name;
    for (const auto& cj : j["columns"]) {
        schema_column col;
        if (!cj.contains("name") || !cj.contains("kind")) {
            throw config_error(origin + ": every column needs name and kind (table '" +
                               table_name + "')");
        }
        col.name = cj["name"].get<std::string>();
        col.kind = parse_column_kind(cj["kind"].get<std::string>());
        if (cj.contains("vocab")) col.vocab = cj["vocab"].get<std::vector<std::string>>();
        ts.columns.push_back(std::move(col));
    }
    return ts;
}

json table_to_json(const table_schema& ts) {
    json cols = json::array();
    for (const auto& c : ts.columns) {
        json cj{{"name", c.name}, {"kind", column_kind_name(c.kind)}};
        if (!c.vocab.empty()) cj["vocab"] = c.vocab;
        cols.push_back(cj);
    }
    return json{{"columns", cols}};
}

} // namespace

feature_schema feature_schema::from_json(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(origin + ": invalid JSON: " + e.what());
    }
    feature_schema s;
    const std::string system = j.value("coordinate_system", "planar");
    if (system == "lonlat") {
        s.lonlat = true;
    } else if (system == "planar") {
        s.lonlat = false;
    } else {
        throw config_error(origin + ": coordinate_system must be planar or lonlat");
    }
    if (!j.contains("tables")) throw config_error(origin + ": missing tables object");
    const json& tables = j["tables"];
    for (const char* name : {"houses", "regions", "schools", "stations"}) {
        if (!tables.contains(name)) {
            throw config_error(origin + ": missing table '" + std::string(name) + "'");
        }
    }
    s.houses = table_from_json(tables["houses"], "houses", origin);
    s.regions = table_from_json(tables["regions"], "regions", origin);
    s.schools = table_from_json(tables["schools"], "schools", origin);
    s.stations = table_from_json(tables["stations"], "stations", origin);
    validate_schema(s);
    return s;
}

std::string feature_schema::to_json() const {
    json j;
    j["coordinate_system"] = lonlat ? "lonlat" : "planar";
    j["tables"] = json{{"houses", table_to_json(houses)},
                       {"regions", table_to_json(regions)},
                       {"schools", table_to_json(schools)},
                       {"stations", table_to_json(stations)}};
    return j.dump(2) + "\n";
}

void validate_schema(const feature_schema& schema) {
    auto check_table = [](const table_schema& ts, bool is_houses) {
        int ids = 0, coords = 0, targets = 0, links = 0;
        std::unordered_set<std::string> seen;
        for (const auto& c : ts.columns) {
            if (!seen.insert(c.name).second) {
                throw config_error("table '" + ts.name + "' repeats column '" + c.name + "'");
            }
            switch (c.kind) {
            case column_kind::id: ids += 1; break;
            case column_kind::coordinate: coords += 1; break;
            case column_kind::target: targets += 1; break;
            case column_kind::region_link: links += 1; break;
            default: break;
            }
        }
        if (ids != 1 || ts.find("id") == nullptr) {
            throw config_error("table '" + ts.name + "' needs exactly one id column named 'id'");
        }
        if (coords != 2 || ts.find("x") == nullptr || ts.find("y") == nullptr) {
            throw config_error("table '" + ts.name +
                               "' needs exactly two coordinate columns named 'x' and 'y'");
        }
        if (is_houses) {
            if (targets != 1) {
                throw config_error("house table needs exactly one target column");
            }
            if (links != 1) {
                throw config_error("house table needs exactly one region_link column");
            }
        } else if (targets != 0 || links != 0) {
            throw config_error("table '" + ts.name +
                               "' may not carry target or region_link columns");
        }
    };
    check_table(schema.houses, true);
    check_table(schema.regions, false);
    check_table(schema.schools, false);
    check_table(schema.stations, false);
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

double parse_cell_double(const std::string& cell, const std::string& origin,
                         const std::string& column, int row) {
    try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw input_error(origin + ": column '" + column + "' row " + std::to_string(row) +
                          ": cannot parse '" + cell + "' as a number");
    }
}

std::int64_t parse_cell_int(const std::string& cell, const std::string& origin,
                            const std::string& column, int row) {
    try {
        size_t used = 0;
        const long long v = std::stoll(cell, &used);
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw input_error(origin + ": column '" + column + "' row " + std::to_string(row) +
                          ": cannot parse '" + cell + "' as an integer");
    }
}

} // namespace

raw_table ingest_table(const std::string& csv_text, const table_schema& ts, bool is_house_table,
                       const std::string& origin) {
    const csv_table csv = parse_csv(csv_text, origin);
    std::unordered_map<std::string, int> header_index;
    for (size_t i = 0; i < csv.header.size(); ++i) {
        if (!header_index.emplace(csv.header[i], static_cast<int>(i)).second) {
            throw input_error(origin + ": duplicate header column '" + csv.header[i] + "'");
        }
    }
    for (const auto& name : csv.header) {
        if (ts.find(name) == nullptr) {
            throw input_error(origin + ": column '" + name + "' is not in the schema for table '" +
                              ts.name + "'");
        }
    }
    std::vector<std::pair<const schema_column*, int>> bound;
    for (const auto& col : ts.columns) {
        auto it = header_index.find(col.name);
        if (it == header_index.end()) {
            throw input_error(origin + ": missing column '" + col.name + "' required by table '" +
                              ts.name + "'");
        }
        bound.push_back({&col, it->second});
    }

    raw_table t;
    t.name = ts.name;
    const int n = static_cast<int>(csv.rows.size());
    t.ids.reserve(n);
    t.coords.resize(n);
    for (const auto& [col, idx] : bound) {
        if (col->kind == column_kind::numeric || col->kind == column_kind::categorical) {
            raw_column rc;
            rc.name = col->name;
            rc.categorical = col->kind == column_kind::categorical;
            if (rc.categorical) {
                rc.labels.resize(n);
            } else {
                rc.values.resize(n);
                rc.missing.resize(n, false);
            }
            t.features.push_back(std::move(rc));
        }
    }

    std::unordered_set<std::int64_t> seen_ids;
    for (int row = 0; row < n; ++row) {
        const auto& cells = csv.rows[row];
        const int printable = row + 1;
        int feature_slot = 0;
        for (const auto& [col, idx] : bound) {
            const std::string& cell = cells[static_cast<size_t>(idx)];
            switch (col->kind) {
            case column_kind::id: {
                const std::int64_t id = parse_cell_int(cell, origin, col->name, printable);
                if (!seen_ids.insert(id).second) {
                    throw input_error(origin + ": duplicate id " + std::to_string(id) + " at row " +
                                      std::to_string(printable));
                }
                t.ids.push_back(id);
                break;
            }
            case column_kind::coordinate: {
                const double v = parse_cell_double(cell, origin, col->name, printable);
                if (!std::isfinite(v)) {
                    throw input_error(origin + ": non-finite coordinate at row " +
                                      std::to_string(printable));
                }
                if (col->name == "x") {
                    t.coords[row].x = v;
                } else {
                    t.coords[row].y = v;
                }
                break;
            }
            case column_kind::target:
                t.price.push_back(parse_cell_double(cell, origin, col->name, printable));
                break;
            case column_kind::region_link:
                t.region_link.push_back(parse_cell_int(cell, origin, col->name, printable));
                break;
            case column_kind::numeric: {
                raw_column& rc = t.features[feature_slot++];
                if (cell.empty()) {
                    rc.missing[row] = true;
                    rc.values[row] = 0.0;
                } else {
                    rc.values[row] = parse_cell_double(cell, origin, col->name, printable);
                }
                break;
            }
            case column_kind::categorical: {
                raw_column& rc = t.features[feature_slot++];
                rc.labels[row] = cell;
                break;
            }
            }
        }
    }
    if (is_house_table) {
        if (t.price.size() != t.ids.size() || t.region_link.size() != t.ids.size()) {
            throw input_error(origin + ": house rows missing price or region link values");
        }
    }
    return t;
}

raw_tables ingest(const std::string& data_dir) {
    const std::string schema_path = data_dir + "/schema.json";
    raw_tables out;
    out.schema = feature_schema::from_json(read_text_file(schema_path), schema_path);

    auto load = [&](const table_schema& ts, bool is_houses) {
        const std::string path = data_dir + "/" + ts.name + ".csv";
        return ingest_table(read_text_file(path), ts, is_houses, path);
    };
    out.houses = load(out.schema.houses, true);
    out.regions = load(out.schema.regions, false);
    out.schools = load(out.schema.schools, false);
    out.stations = load(out.schema.stations, false);

    std::unordered_set<std::int64_t> region_ids(out.regions.ids.begin(), out.regions.ids.end());
    for (size_t i = 0; i < out.houses.region_link.size(); ++i) {
        if (region_ids.count(out.houses.region_link[i]) == 0) {
            throw input_error(data_dir + "/houses.csv: row " + std::to_string(i + 1) +
                              " references unknown region " +
                              std::to_string(out.houses.region_link[i]));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Price transform and split

std::vector<double> log_normalize_price(const std::vector<double>& prices) {
    std::vector<double> out(prices.size());
    for (size_t i = 0; i < prices.size(); ++i) {
        if (!(prices[i] > 0.0) || !std::isfinite(prices[i])) {
            throw input_error("price at row " + std::to_string(i + 1) +
                              " must be positive and finite, got " + format_double(prices[i]));
        }
        out[i] = std::log(prices[i]);
    }
    return out;
}

split_indices stratified_split(const std::vector<double>& stratify_values, double train_fraction,
                               std::uint64_t seed, int strata) {
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
        throw input_error("train_fraction must lie strictly between 0 and 1");
    }
    if (strata < 1) throw input_error("strata must be >= 1");
    const int n = static_cast<int>(stratify_values.size());
    if (n < 2) throw input_error("need at least 2 rows to split");

    rng r(seed, 11);
    std::vector<std::vector<int>> bins;
    if (n < strata) {
        std::fprintf(stderr,
                     "warning: %d rows is fewer than %d strata; using a plain random split\n", n,
                     strata);
        bins.resize(1);
        bins[0].resize(n);
        std::iota(bins[0].begin(), bins[0].end(), 0);
    } else {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (stratify_values[a] != stratify_values[b]) {
                return stratify_values[a] < stratify_values[b];
            }
            return a < b;
        });
        bins.resize(strata);
        for (int rank = 0; rank < n; ++rank) {
            const int bin = static_cast<int>(static_cast<std::int64_t>(rank) * strata / n);
            bins[bin].push_back(order[rank]);
        }
    }

    split_indices out;
    for (auto& bin : bins) {
        for (size_t i = bin.size(); i > 1; --i) {
            const size_t j = r.uniform_index(i);
            std::swap(bin[i - 1], bin[j]);
        }
        const auto take = static_cast<size_t>(std::llround(train_fraction * bin.size()));
        for (size_t i = 0; i < bin.size(); ++i) {
            (i < take ? out.train : out.test).push_back(bin[i]);
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    if (out.train.empty() || out.test.empty()) {
        throw input_error("split produced an empty train or test side; adjust train_fraction");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Preprocessing

namespace {

// Near-constant columns keep divisor 1 so they standardize to all zeros.
double stddev_or_one(double mean, double sq_mean) {
    const double var = std::max(0.0, sq_mean - mean * mean);
    const double sd = std::sqrt(var);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) return 1.0;
    return sd;
}

column_transform fit_numeric(const std::string& name, const std::vector<double>& values,
                             const std::vector<bool>& missing, const std::vector<int>& fit_rows,
                             const std::string& table) {
    column_transform ct;
    ct.name = name;
    double sum = 0.0, sq = 0.0;
    std::int64_t observed = 0;
    for (int row : fit_rows) {
        if (!missing.empty() && missing[static_cast<size_t>(row)]) {
            ct.imputed += 1;
            continue;
        }
        const double v = values[static_cast<size_t>(row)];
        sum += v;
        sq += v * v;
        observed += 1;
    }
    if (observed == 0) {
        throw input_error("column '" + name + "' in table '" + table +
                          "' has no observed values in the fitting rows");
    }
    ct.mean = sum / static_cast<double>(observed);
    ct.stddev = stddev_or_one(ct.mean, sq / static_cast<double>(observed));
    return ct;
}

} // namespace

table_transform fit_table_transform(const raw_table& t, const std::vector<int>& fit_rows) {
    if (fit_rows.empty() && t.rows() > 0) {
        throw input_error("table '" + t.name + "': no rows selected to fit the transform");
    }
    table_transform tt;
    tt.table = t.name;
    std::vector<double> xs(t.rows()), ys(t.rows());
    for (int i = 0; i < t.rows(); ++i) {
        xs[static_cast<size_t>(i)] = t.coords[static_cast<size_t>(i)].x;
        ys[static_cast<size_t>(i)] = t.coords[static_cast<size_t>(i)].y;
    }
    if (t.rows() > 0) {
        tt.x = fit_numeric("x", xs, {}, fit_rows, t.name);
        tt.y = fit_numeric("y", ys, {}, fit_rows, t.name);
    } else {
        tt.x.name = "x";
        tt.y.name = "y";
    }
    for (const auto& col : t.features) {
        if (col.categorical) {
            column_transform ct;
            ct.name = col.name;
            ct.categorical = true;
            std::vector<std::string> vocab;
            for (int row : fit_rows) vocab.push_back(col.labels[static_cast<size_t>(row)]);
            std::sort(vocab.begin(), vocab.end());
            vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
            if (vocab.empty() && t.rows() > 0) {
                throw input_error("categorical column '" + col.name + "' in table '" + t.name +
                                  "' has no observed levels in the fitting rows");
            }
            ct.vocab = std::move(vocab);
            tt.columns.push_back(std::move(ct));
        } else {
            tt.columns.push_back(fit_numeric(col.name, col.values, col.missing, fit_rows, t.name));
        }
    }
    return tt;
}

int table_transform::output_dim() const {
    int dim = 2;
    for (const auto& ct : columns) {
        dim += ct.categorical ? static_cast<int>(ct.vocab.size()) : 1;
    }
    return dim;
}

Eigen::MatrixXd apply_table_transform(const table_transform& tt, const raw_table& t,
                                      const std::vector<int>& rows) {
    if (tt.columns.size() != t.features.size()) {
        throw input_error("transform for table '" + tt.table + "' does not match table '" +
                          t.name + "' (" + std::to_string(tt.columns.size()) + " vs " +
                          std::to_string(t.features.size()) + " columns)");
    }
    for (size_t c = 0; c < tt.columns.size(); ++c) {
        if (tt.columns[c].name != t.features[c].name ||
            tt.columns[c].categorical != t.features[c].categorical) {
            throw input_error("transform column '" + tt.columns[c].name +
                              "' does not match table column '" + t.features[c].name + "'");
        }
    }

    Eigen::MatrixXd out(tt.output_dim(), static_cast<Eigen::Index>(rows.size()));
    std::vector<std::unordered_map<std::string, int>> vocab_index(tt.columns.size());
    for (size_t c = 0; c < tt.columns.size(); ++c) {
        for (size_t v = 0; v < tt.columns[c].vocab.size(); ++v) {
            vocab_index[c][tt.columns[c].vocab[v]] = static_cast<int>(v);
        }
    }
    std::vector<std::int64_t> unknown_count(tt.columns.size(), 0);

    for (size_t j = 0; j < rows.size(); ++j) {
        const auto row = static_cast<size_t>(rows[j]);
        Eigen::Index d = 0;
        out(d++, static_cast<Eigen::Index>(j)) = (t.coords[row].x - tt.x.mean) / tt.x.stddev;
        out(d++, static_cast<Eigen::Index>(j)) = (t.coords[row].y - tt.y.mean) / tt.y.stddev;
        for (size_t c = 0; c < tt.columns.size(); ++c) {
            const column_transform& ct = tt.columns[c];
            const raw_column& rc = t.features[c];
            if (ct.categorical) {
                const auto width = static_cast<Eigen::Index>(ct.vocab.size());
                out.block(d, static_cast<Eigen::Index>(j), width, 1).setZero();
                auto it = vocab_index[c].find(rc.labels[row]);
                if (it != vocab_index[c].end()) {
                    out(d + it->second, static_cast<Eigen::Index>(j)) = 1.0;
                } else {
                    unknown_count[c] += 1;
                }
                d += width;
            } else {
                const double v = rc.missing[row] ? ct.mean : rc.values[row];
                out(d++, static_cast<Eigen::Index>(j)) = (v - ct.mean) / ct.stddev;
            }
        }
    }
    for (size_t c = 0; c < tt.columns.size(); ++c) {
        if (unknown_count[c] > 0) {
            std::fprintf(stderr,
                         "warning: column '%s' in table '%s': %lld unknown level(s) mapped to "
                         "zero vectors\n",
                         tt.columns[c].name.c_str(), tt.table.c_str(),
                         static_cast<long long>(unknown_count[c]));
        }
    }
    return out;
}

namespace {

json column_to_json(const column_transform& ct) {
    if (ct.categorical) {
        return json{{"name", ct.name}, {"kind", "categorical"}, {"vocab", ct.vocab}};
    }
    return json{{"name", ct.name},
                {"kind", "numeric"},
                {"mean", ct.mean},
                {"stddev", ct.stddev},
                {"imputed", ct.imputed}};
}

column_transform column_from_json(const json& j, const std::string& origin) {
    column_transform ct;
    ct.name = j.at("name").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "categorical") {
        ct.categorical = true;
        ct.vocab = j.at("vocab").get<std::vector<std::string>>();
    } else if (kind == "numeric") {
        ct.mean = j.at("mean").get<double>();
        ct.stddev = j.at("stddev").get<double>();
        ct.imputed = j.at("imputed").get<std::int64_t>();
    } else {
        throw config_error(origin + ": unknown transform column kind '" + kind + "'");
    }
    return ct;
}

json table_transform_to_json(const table_transform& tt) {
    json cols = json::array();
    for (const auto& ct : tt.columns) cols.push_back(column_to_json(ct));
    return json{{"table", tt.table},
                {"x", column_to_json(tt.x)},
                {"y", column_to_json(tt.y)},
                {"columns", cols}};
}

table_transform table_transform_from_json(const json& j, const std::string& origin) {
    table_transform tt;
    tt.table = j.at("table").get<std::string>();
    tt.x = column_from_json(j.at("x"), origin);
    tt.y = column_from_json(j.at("y"), origin);
    for (const auto& cj : j.at("columns")) tt.columns.push_back(column_from_json(cj, origin));
    return tt;
}

} // namespace

std::string preprocess_report::to_json() const {
    json j{{"houses", table_transform_to_json(houses)},
           {"regions", table_transform_to_json(regions)},
           {"schools", table_transform_to_json(schools)},
           {"stations", table_transform_to_json(stations)}};
    return j.dump(2) + "\n";
}

preprocess_report preprocess_report::from_json(const std::string& text,
                                               const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(origin + ": invalid JSON: " + e.what());
    }
    try {
        preprocess_report r;
        r.houses = table_transform_from_json(j.at("houses"), origin);
        r.regions = table_transform_from_json(j.at("regions"), origin);
        r.schools = table_transform_from_json(j.at("schools"), origin);
        r.stations = table_transform_from_json(j.at("stations"), origin);
        return r;
    } catch (const json::exception& e) {
        throw config_error(origin + ": malformed preprocess report: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Synthetic city

synth_config make_synth_config(const run_config& rc) {
    rc.validate();
    synth_config sc;
    sc.houses = rc.synth_houses;
    sc.regions = rc.synth_regions;
    sc.schools = rc.synth_schools;
    sc.stations = rc.synth_stations;
    sc.noise_sd = rc.synth_noise_sd;
    sc.raw_weight = rc.synth_raw_weight;
    sc.region_weight = rc.synth_region_weight;
    sc.school_weight = rc.synth_school_weight;
    sc.station_weight = rc.synth_station_weight;
    sc.decay_scale = rc.synth_decay_scale;
    sc.seed = rc.seed;
    return sc;
}

namespace {

double planar_dist(const geo_point& a, const geo_point& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Population-standardizes in place; an (almost) constant vector becomes all
// zeros so a zero weight genuinely removes the term.
void standardize_term(std::vector<double>& v) {
    if (v.empty()) return;
    double sum = 0.0, sq = 0.0;
    for (double x : v) {
        sum += x;
        sq += x * x;
    }
    const double mean = sum / static_cast<double>(v.size());
    const double var = std::max(0.0, sq / static_cast<double>(v.size()) - mean * mean);
    const double sd = std::sqrt(var);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
        for (double& x : v) x = 0.0;
        return;
    }
    for (double& x : v) x = (x - mean) / sd;
}

std::string synth_schema_json() {
    feature_schema s;
    s.lonlat = false;
    auto poi = [](const std::string& name, const std::string& extra) {
        table_schema ts;
        ts.name = name;
        ts.columns = {{"id", column_kind::id, {}},
                      {"x", column_kind::coordinate, {}},
                      {"y", column_kind::coordinate, {}},
                      {"quality", column_kind::numeric, {}},
                      {extra, column_kind::numeric, {}}};
        return ts;
    };
    s.houses.name = "houses";
    s.houses.columns = {{"id", column_kind::id, {}},
                        {"x", column_kind::coordinate, {}},
                        {"y", column_kind::coordinate, {}},
                        {"price", column_kind::target, {}},
                        {"region_id", column_kind::region_link, {}},
                        {"beds", column_kind::numeric, {}},
                        {"baths", column_kind::numeric, {}},
                        {"area", column_kind::numeric, {}},
                        {"age", column_kind::numeric, {}},
                        {"ptype", column_kind::categorical, {}}};
    s.regions = poi("regions", "parks");
    s.schools = poi("schools", "capacity");
    s.stations = poi("stations", "lines");
    return s.to_json();
}

} // namespace

void gen_synthetic_city(const synth_config& cfg, const std::string& out_dir) {
    if (cfg.houses < 1 || cfg.regions < 1) {
        throw config_error("synthetic city needs at least one house and one region");
    }
    if (cfg.houses < cfg.regions) {
        throw config_error("synthetic city needs houses >= regions so every region is populated");
    }
    if (cfg.schools < 0 || cfg.stations < 0 || !(cfg.noise_sd >= 0.0) ||
        !(cfg.decay_scale > 0.0)) {
        throw config_error("synthetic city config out of range");
    }
    std::filesystem::create_directories(out_dir);
    rng r(cfg.seed, 21);

    // Regions on a jittered grid.
    const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.regions))));
    constexpr double spacing = 2500.0;
    std::vector<geo_point> region_pos(static_cast<size_t>(cfg.regions));
    std::vector<double> region_quality(static_cast<size_t>(cfg.regions));
    std::vector<double> region_parks(static_cast<size_t>(cfg.regions));
    for (int g = 0; g < cfg.regions; ++g) {
        const double cx = static_cast<double>(g % grid) * spacing;
        const double cy = static_cast<double>(g / grid) * spacing;
        region_pos[g] = {cx + r.uniform(-300.0, 300.0), cy + r.uniform(-300.0, 300.0)};
        region_quality[g] = r.uniform(0.0, 1.0);
        region_parks[g] = r.uniform(0.0, 1.0);
    }

    // Schools and stations anchored near region centroids so the whole city
    // is covered and the graph stays connected.
    std::vector<geo_point> school_pos(static_cast<size_t>(cfg.schools));
    std::vector<double> school_quality(static_cast<size_t>(cfg.schools));
    std::vector<double> school_capacity(static_cast<size_t>(cfg.schools));
    for (int s = 0; s < cfg.schools; ++s) {
        const geo_point anchor = region_pos[static_cast<size_t>(s % cfg.regions)];
        school_pos[s] = {anchor.x + 400.0 * r.normal(), anchor.y + 400.0 * r.normal()};
        school_quality[s] = r.uniform(0.0, 1.0);
        school_capacity[s] = r.uniform(0.2, 1.0);
    }
    std::vector<geo_point> station_pos(static_cast<size_t>(cfg.stations));
    std::vector<double> station_quality(static_cast<size_t>(cfg.stations));
    std::vector<double> station_lines(static_cast<size_t>(cfg.stations));
    for (int s = 0; s < cfg.stations; ++s) {
        const auto anchor_region =
            static_cast<size_t>((static_cast<std::int64_t>(s) * cfg.regions) / cfg.stations);
        const geo_point anchor = region_pos[anchor_region];
        station_pos[s] = {anchor.x + 500.0 * r.normal(), anchor.y + 500.0 * r.normal()};
        station_quality[s] = r.uniform(0.0, 1.0);
        station_lines[s] = static_cast<double>(1 + r.uniform_index(4));
    }

    // Houses clustered around their region centroid.
    const int n = cfg.houses;
    std::vector<geo_point> house_pos(static_cast<size_t>(n));
    std::vector<int> house_region(static_cast<size_t>(n));
    std::vector<double> beds(n), baths(n), area(n), age(n);
    std::vector<int> ptype(n);
    static const char* ptype_names[3] = {"detached", "semi", "unit"};
    static const double ptype_effect[3] = {0.9, 0.0, -0.8};
    for (int h = 0; h < n; ++h) {
        const int g = h % cfg.regions;
        house_region[h] = g;
        house_pos[h] = {region_pos[g].x + 600.0 * r.normal(), region_pos[g].y + 600.0 * r.normal()};
        beds[h] = static_cast<double>(1 + r.uniform_index(5));
        baths[h] = static_cast<double>(1 + r.uniform_index(3));
        area[h] = std::exp(5.0 + 0.35 * r.normal());
        age[h] = r.uniform(0.0, 60.0);
        ptype[h] = static_cast<int>(r.uniform_index(3));
    }

    // Price terms: a raw linear part plus one proximity-decayed quality sum
    // per POI type; each term standardized so weights set its contribution.
    std::vector<double> raw_term(n), nb_region(n), nb_school(n), nb_station(n);
    auto quality_sum = [&](const geo_point& at, const std::vector<geo_point>& pos,
                           const std::vector<double>& quality) {
        double acc = 0.0;
        for (size_t i = 0; i < pos.size(); ++i) {
            acc += quality[i] * std::exp(-planar_dist(at, pos[i]) / cfg.decay_scale);
        }
        return acc;
    };
    for (int h = 0; h < n; ++h) {
        raw_term[h] = 0.30 * beds[h] + 0.45 * baths[h] + 0.011 * area[h] - 0.009 * age[h] +
                      ptype_effect[ptype[h]];
        nb_region[h] = quality_sum(house_pos[h], region_pos, region_quality);
        nb_school[h] = quality_sum(house_pos[h], school_pos, school_quality);
        nb_station[h] = quality_sum(house_pos[h], station_pos, station_quality);
    }
    standardize_term(raw_term);
    standardize_term(nb_region);
    standardize_term(nb_school);
    standardize_term(nb_station);

    std::vector<double> contribution(n), price(n);
    for (int h = 0; h < n; ++h) {
        contribution[h] = cfg.region_weight * nb_region[h] + cfg.school_weight * nb_school[h] +
                          cfg.station_weight * nb_station[h];
        const double z = 13.0 + cfg.raw_weight * raw_term[h] + contribution[h] +
                         cfg.noise_sd * r.normal();
        price[h] = std::exp(z);
    }

    // CSV outputs.
    std::ostringstream houses_csv;
    houses_csv << "id,x,y,price,region_id,beds,baths,area,age,ptype\n";
    for (int h = 0; h < n; ++h) {
        houses_csv << (10000 + h) << ',' << format_double(house_pos[h].x) << ','
                   << format_double(house_pos[h].y) << ',' << format_double(price[h]) << ','
                   << (20000 + house_region[h]) << ',' << format_double(beds[h]) << ','
                   << format_double(baths[h]) << ',' << format_double(area[h]) << ','
                   << format_double(age[h]) << ',' << ptype_names[ptype[h]] << '\n';
    }
    write_text_file(out_dir + "/houses.csv", houses_csv.str());

    auto write_poi = [&](const std::string& file, const std::string& extra_name, int count,
                         std::int64_t id_base, const std::vector<geo_point>& pos,
                         const std::vector<double>& quality, const std::vector<double>& extra) {
        std::ostringstream csv;
        csv << "id,x,y,quality," << extra_name << "\n";
        for (int i = 0; i < count; ++i) {
            csv << (id_base + i) << ',' << format_double(pos[i].x) << ','
                << format_double(pos[i].y) << ',' << format_double(quality[i]) << ','
                << format_double(extra[i]) << '\n';
        }
        write_text_file(out_dir + "/" + file, csv.str());
    };
    write_poi("regions.csv", "parks", cfg.regions, 20000, region_pos, region_quality,
              region_parks);
    write_poi("schools.csv", "capacity", cfg.schools, 30000, school_pos, school_quality,
              school_capacity);
    write_poi("stations.csv", "lines", cfg.stations, 40000, station_pos, station_quality,
              station_lines);

    write_text_file(out_dir + "/schema.json", synth_schema_json());

    std::ostringstream truth;
    truth << "id,contribution\n";
    for (int h = 0; h < n; ++h) {
        truth << (10000 + h) << ',' << format_double(contribution[h]) << '\n';
    }
    write_text_file(out_dir + "/truth.csv", truth.str());
}

// ---------------------------------------------------------------------------
// Dataset assembly

dataset_bundle build_dataset(const raw_tables& tables, const run_config& cfg) {
    cfg.validate();
    const raw_table& houses = tables.houses;
    if (houses.rows() < 2) throw input_error("need at least two houses to build a dataset");

    const std::vector<double> log_price = log_normalize_price(houses.price);
    const split_indices split = stratified_split(log_price, cfg.train_fraction, cfg.seed);

    dataset_bundle ds;
    ds.train_fraction = cfg.train_fraction;
    ds.split_seed = cfg.seed;

    std::vector<int> all_regions(tables.regions.rows());
    std::iota(all_regions.begin(), all_regions.end(), 0);
    std::vector<int> all_schools(tables.schools.rows());
    std::iota(all_schools.begin(), all_schools.end(), 0);
    std::vector<int> all_stations(tables.stations.rows());
    std::iota(all_stations.begin(), all_stations.end(), 0);

    ds.report.houses = fit_table_transform(houses, split.train);
    ds.report.regions = fit_table_transform(tables.regions, all_regions);
    ds.report.schools = fit_table_transform(tables.schools, all_schools);
    ds.report.stations = fit_table_transform(tables.stations, all_stations);

    auto make_partition = [](const raw_table& t, const table_transform& tt,
                             const std::vector<int>& rows) {
        partition p;
        p.name = t.name;
        for (int row : rows) {
            p.ids.push_back(t.ids[static_cast<size_t>(row)]);
            p.coords.push_back(t.coords[static_cast<size_t>(row)]);
        }
        p.attrs = apply_table_transform(tt, t, rows);
        return p;
    };
    partition house_part = make_partition(houses, ds.report.houses, split.train);
    house_part.name = "house";
    partition region_part = make_partition(tables.regions, ds.report.regions, all_regions);
    region_part.name = "region";
    partition school_part = make_partition(tables.schools, ds.report.schools, all_schools);
    school_part.name = "school";
    partition station_part = make_partition(tables.stations, ds.report.stations, all_stations);
    station_part.name = "station";

    std::unordered_map<std::int64_t, int> region_index;
    for (size_t i = 0; i < tables.regions.ids.size(); ++i) {
        region_index[tables.regions.ids[i]] = static_cast<int>(i);
    }
    std::vector<int> assignment;
    assignment.reserve(split.train.size());
    for (int row : split.train) {
        assignment.push_back(region_index.at(houses.region_link[static_cast<size_t>(row)]));
    }

    graph_options opts;
    opts.radius_house_school = cfg.radius_house_school;
    opts.radius_house_station = cfg.radius_house_station;
    opts.radius_school_station = cfg.radius_school_station;
    opts.k_nearest_stations = cfg.k_nearest_stations;
    opts.delta_min = cfg.delta_min;
    if (cfg.distance == "auto") {
        opts.mode = tables.schema.lonlat ? distance_mode::haversine : distance_mode::planar;
    } else {
        opts.mode =
            cfg.distance == "haversine" ? distance_mode::haversine : distance_mode::planar;
    }
    ds.graph = build_graph(std::move(house_part), std::move(region_part), std::move(school_part),
                           std::move(station_part), assignment, opts);

    for (int row : split.train) ds.train_log_price.push_back(log_price[static_cast<size_t>(row)]);
    for (int row : split.test) {
        ds.test_ids.push_back(houses.ids[static_cast<size_t>(row)]);
        ds.test_coords.push_back(houses.coords[static_cast<size_t>(row)]);
        ds.test_log_price.push_back(log_price[static_cast<size_t>(row)]);
    }
    ds.test_attrs = apply_table_transform(ds.report.houses, houses, split.test);
    return ds;
}

namespace {
constexpr char dataset_magic[9] = "GSNEDS\x01\x00";
constexpr std::uint32_t dataset_version = 1;
} // namespace

void save_dataset(const dataset_bundle& ds, const std::string& path) {
    bin_writer w(path);
    w.magic(dataset_magic);
    w.u32(dataset_version);
    write_graph_body(w, ds.graph);
    w.str(ds.report.to_json());
    w.vec_f64(ds.train_log_price);
    w.vec_i64(ds.test_ids);
    std::vector<double> flat;
    flat.reserve(ds.test_coords.size() * 2);
    for (const auto& c : ds.test_coords) {
        flat.push_back(c.x);
        flat.push_back(c.y);
    }
    w.vec_f64(flat);
    w.matrix(ds.test_attrs);
    w.vec_f64(ds.test_log_price);
    w.f64(ds.train_fraction);
    w.u64(ds.split_seed);
    w.close();
}

dataset_bundle load_dataset(const std::string& path) {
    bin_reader r(path);
    r.expect_magic(dataset_magic);
    const auto version = r.u32();
    if (version != dataset_version) {
        throw load_error(path + ": unsupported dataset version " + std::to_string(version));
    }
    dataset_bundle ds;
    ds.graph = read_graph_body(r, path);
    ds.report = preprocess_report::from_json(r.str(), path);
    ds.train_log_price = r.vec_f64();
    ds.test_ids = r.vec_i64();
    const auto flat = r.vec_f64();
    if (flat.size() != ds.test_ids.size() * 2) {
        throw load_error(path + ": test coordinate block size");
    }
    ds.test_coords.resize(ds.test_ids.size());
    for (size_t i = 0; i < ds.test_coords.size(); ++i) {
        ds.test_coords[i] = {flat[2 * i], flat[2 * i + 1]};
    }
    ds.test_attrs = r.matrix();
    ds.test_log_price = r.vec_f64();
    ds.train_fraction = r.f64();
    ds.split_seed = r.u64();
    r.expect_eof();
    if (ds.train_log_price.size() != static_cast<size_t>(ds.graph.partitions[part_house].size())) {
        throw load_error(path + ": train price count does not match the house partition");
    }
    if (static_cast<size_t>(ds.test_attrs.cols()) != ds.test_ids.size() ||
        ds.test_log_price.size() != ds.test_ids.size()) {
        throw load_error(path + ": test block sizes disagree");
    }
    return ds;
}

} // namespace gsne
