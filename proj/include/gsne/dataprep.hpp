#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsne/config.hpp"
#include "gsne/graph.hpp"

namespace gsne {

// ---------------------------------------------------------------------------
// Schema: a JSON side file describing every CSV column.

enum class column_kind { id, coordinate, numeric, categorical, target, region_link };

column_kind parse_column_kind(const std::string& text);
const char* column_kind_name(column_kind kind);

struct schema_column {
    std::string name;
    column_kind kind = column_kind::numeric;
    std::vector<std::string> vocab; // optional for categorical; built from data if empty
};

struct table_schema {
    std::string name;
    std::vector<schema_column> columns;

    const schema_column* find(const std::string& column_name) const;
};

struct feature_schema {
    bool lonlat = false; // coordinates tagged lon/lat -> haversine distances
    table_schema houses, regions, schools, stations;

    static feature_schema from_json(const std::string& text, const std::string& origin);
    std::string to_json() const;
};

// Validates structural rules: mandatory id/x/y columns, exactly one target
// and one region link in the house table, none elsewhere.
void validate_schema(const feature_schema& schema);

// ---------------------------------------------------------------------------
// Ingestion: typed tables with missing-value tracking.

struct raw_column {
    std::string name;
    bool categorical = false;
    std::vector<double> values;      // numeric kind
    std::vector<bool> missing;       // numeric kind
    std::vector<std::string> labels; // categorical kind
};

struct raw_table {
    std::string name;
    std::vector<std::int64_t> ids;
    std::vector<geo_point> coords;
    std::vector<double> price;             // house table only
    std::vector<std::int64_t> region_link; // house table only
    std::vector<raw_column> features;

    int rows() const { return static_cast<int>(ids.size()); }
};

struct raw_tables {
    feature_schema schema;
    raw_table houses, regions, schools, stations;
};

// Parses one CSV against its schema. Reports the offending 1-based data row
// for unparseable numerics, duplicate ids, and bad coordinates.
raw_table ingest_table(const std::string& csv_text, const table_schema& ts, bool is_house_table,
                       const std::string& origin);

// Reads <dir>/schema.json plus houses/regions/schools/stations CSV files.
raw_tables ingest(const std::string& data_dir);

// ---------------------------------------------------------------------------
// Price transform and split.

// z = ln(price); throws input_error on non-positive entries.
std::vector<double> log_normalize_price(const std::vector<double>& prices);

struct split_indices {
    std::vector<int> train, test; // disjoint, union = all rows, each sorted
};

// Stratified by equal-count quantile bins of the stratify values (price
// deciles by default). Falls back to a plain random split with a warning
// when there are fewer rows than strata.
split_indices stratified_split(const std::vector<double>& stratify_values, double train_fraction,
                               std::uint64_t seed, int strata = 10);

// ---------------------------------------------------------------------------
// Preprocessing: impute, one-hot, standardize; parameters frozen for reuse.

struct column_transform {
    std::string name;
    bool categorical = false;
    double mean = 0.0;
    double stddev = 1.0; // divisor; 1 for near-constant columns
    std::int64_t imputed = 0;
    std::vector<std::string> vocab; // categorical levels, sorted
};

struct table_transform {
    std::string table;
    column_transform x, y; // coordinates are standardized features too
    std::vector<column_transform> columns;

    int output_dim() const;
};

struct preprocess_report {
    table_transform houses, regions, schools, stations;

    std::string to_json() const;
    static preprocess_report from_json(const std::string& text, const std::string& origin);
};

// Statistics from fit_rows only (the training split for houses; every row
// for POI tables, which are fully visible at training time).
table_transform fit_table_transform(const raw_table& t, const std::vector<int>& fit_rows);

// Applies a frozen transform; column j of the result is row rows[j].
// Unknown categorical labels map to an all-zero block with a warning.
Eigen::MatrixXd apply_table_transform(const table_transform& tt, const raw_table& t,
                                      const std::vector<int>& rows);

// ---------------------------------------------------------------------------
// Synthetic city generator.

struct synth_config {
    int houses = 2000;
    int regions = 20;
    int schools = 30;
    int stations = 8;
    double noise_sd = 0.04;
    double raw_weight = 0.30;
    double region_weight = 0.26;
    double school_weight = 0.22;
    double station_weight = 0.18;
    double decay_scale = 450.0;
    std::uint64_t seed = 0;
};

synth_config make_synth_config(const run_config& rc);

// Writes houses/regions/schools/stations CSVs, schema.json, and truth.csv
// (house id, planted neighborhood contribution to log price) into out_dir.
void gen_synthetic_city(const synth_config& cfg, const std::string& out_dir);

// ---------------------------------------------------------------------------
// Dataset assembly: split, preprocess, graph over train houses + all POIs,
// with everything needed to encode and score held-out test houses.

struct dataset_bundle {
    multipartite_graph graph; // house partition holds the training split
    preprocess_report report;
    std::vector<double> train_log_price; // aligned with graph house columns
    std::vector<std::int64_t> test_ids;
    std::vector<geo_point> test_coords;
    Eigen::MatrixXd test_attrs; // same encoder/raw features as graph houses
    std::vector<double> test_log_price;
    double train_fraction = 0.8;
    std::uint64_t split_seed = 0;
};

dataset_bundle build_dataset(const raw_tables& tables, const run_config& cfg);

void save_dataset(const dataset_bundle& ds, const std::string& path);
dataset_bundle load_dataset(const std::string& path);

} // namespace gsne
