#pragma once

#include <cstdint>
#include <string>

namespace gsne {

enum class optimizer_kind { adam, sgd };
enum class alternation_policy { iterative, random, block100 };
enum class proximity_mode { first, second, both };

// Every knob honored by the pipeline, with its default. A config file is
// plain "key = value" lines ('#' comments); CLI flags override file values.
struct run_config {
    std::uint64_t seed = 0;

    // graph construction
    double radius_house_school = 1000.0;
    double radius_house_station = 1000.0;
    double radius_school_station = 1000.0;
    int k_nearest_stations = 3;
    double delta_min = 1.0;
    std::string distance = "auto"; // auto | planar | haversine

    // embedding model
    int embed_dim = 32;      // L: gaussian dimension
    int hidden_dim = 64;     // l: encoder output
    int first_hidden = 128;  // l': first layer width
    double var_floor = 1e-6;
    bool mu_relu = true;

    // training
    std::string proximity = "both"; // first | second | both
    std::int64_t iterations = 30000;
    int batch_size = 128;
    int negatives = 5;
    std::string optimizer = "adam"; // adam | sgd
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 5.0;
    std::string alternation = "iterative"; // iterative | random | block100
    std::int64_t checkpoint_every = 0;     // 0 = only at the end
    std::int64_t loss_log_every = 0;       // 0 = no progress lines

    // split + evaluation
    double train_fraction = 0.8;
    double ridge_lambda = 1.0;
    double krr_lambda = 0.1;
    double krr_bandwidth = 0.0; // 0 = median pairwise distance heuristic
    int gbt_trees = 800;
    int gbt_depth = 3;
    double gbt_shrinkage = 0.1;
    double gbt_subsample = 0.8;
    int bootstrap_replicates = 500;
    double bootstrap_level = 0.95;
    bool embed_use_variance = false;

    // synthetic city generator
    int synth_houses = 2000;
    int synth_regions = 20;
    int synth_schools = 30;
    int synth_stations = 8;
    double synth_noise_sd = 0.04;
    // log-price model: each planted term is standardized across the city,
    // then scaled by its weight, so weights are in log-price stddev units.
    double synth_raw_weight = 0.30;
    double synth_region_weight = 0.26;
    double synth_school_weight = 0.22;
    double synth_station_weight = 0.18;
    double synth_decay_scale = 450.0; // meters, exp(-dist/scale) proximity decay

    optimizer_kind optimizer_enum() const;
    alternation_policy alternation_enum() const;
    proximity_mode proximity_enum() const;

    // Throws config_error on out-of-range values or unknown enum strings.
    void validate() const;
};

// Parse a config file into cfg (missing file -> input_error; unknown key,
// bad value -> config_error).
void load_config_file(const std::string& path, run_config& cfg);

// Parse a single "key=value" assignment (used by the CLI --set flag).
void apply_config_entry(const std::string& key, const std::string& value, run_config& cfg);

} // namespace gsne
