#include "gsne/config.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "gsne/csv.hpp"
#include "gsne/errors.hpp"

namespace gsne {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error("config key '" + key + "': expected a boolean, got '" + v + "'");
}

using setter = std::function<void(run_config&, const std::string&, const std::string&)>;

const std::map<std::string, setter>& setters() {
    static const std::map<std::string, setter> table = {
        {"seed", [](run_config& c, const std::string& k, const std::string& v) {
             c.seed = static_cast<std::uint64_t>(parse_int(k, v));
         }},
        {"radius_house_school", [](run_config& c, const std::string& k, const std::string& v) { c.radius_house_school = parse_double(k, v); }},
        {"radius_house_station", [](run_config& c, const std::string& k, const std::string& v) { c.radius_house_station = parse_double(k, v); }},
        {"radius_school_station", [](run_config& c, const std::string& k, const std::string& v) { c.radius_school_station = parse_double(k, v); }},
        {"k_nearest_stations", [](run_config& c, const std::string& k, const std::string& v) { c.k_nearest_stations = static_cast<int>(parse_int(k, v)); }},
        {"delta_min", [](run_config& c, const std::string& k, const std::string& v) { c.delta_min = parse_double(k, v); }},
        {"distance", [](run_config& c, const std::string&, const std::string& v) { c.distance = v; }},
        {"embed_dim", [](run_config& c, const std::string& k, const std::string& v) { c.embed_dim = static_cast<int>(parse_int(k, v)); }},
        {"hidden_dim", [](run_config& c, const std::string& k, const std::string& v) { c.hidden_dim = static_cast<int>(parse_int(k, v)); }},
        {"first_hidden", [](run_config& c, const std::string& k, const std::string& v) { c.first_hidden = static_cast<int>(parse_int(k, v)); }},
        {"var_floor", [](run_config& c, const std::string& k, const std::string& v) { c.var_floor = parse_double(k, v); }},
        {"mu_relu", [](run_config& c, const std::string& k, const std::string& v) { c.mu_relu = parse_bool(k, v); }},
        {"proximity", [](run_config& c, const std::string&, const std::string& v) { c.proximity = v; }},
        {"iterations", [](run_config& c, const std::string& k, const std::string& v) { c.iterations = parse_int(k, v); }},
        {"batch_size", [](run_config& c, const std::string& k, const std::string& v) { c.batch_size = static_cast<int>(parse_int(k, v)); }},
        {"negatives", [](run_config& c, const std::string& k, const std::string& v) { c.negatives = static_cast<int>(parse_int(k, v)); }},
        {"optimizer", [](run_config& c, const std::string&, const std::string& v) { c.optimizer = v; }},
        {"learning_rate", [](run_config& c, const std::string& k, const std::string& v) { c.learning_rate = parse_double(k, v); }},
        {"adam_beta1", [](run_config& c, const std::string& k, const std::string& v) { c.adam_beta1 = parse_double(k, v); }},
        {"adam_beta2", [](run_config& c, const std::string& k, const std::string& v) { c.adam_beta2 = parse_double(k, v); }},
        {"adam_eps", [](run_config& c, const std::string& k, const std::string& v) { c.adam_eps = parse_double(k, v); }},
        {"grad_clip", [](run_config& c, const std::string& k, const std::string& v) { c.grad_clip = parse_double(k, v); }},
        {"alternation", [](run_config& c, const std::string&, const std::string& v) { c.alternation = v; }},
        {"checkpoint_every", [](run_config& c, const std::string& k, const std::string& v) { c.checkpoint_every = parse_int(k, v); }},
        {"loss_log_every", [](run_config& c, const std::string& k, const std::string& v) { c.loss_log_every = parse_int(k, v); }},
        {"train_fraction", [](run_config& c, const std::string& k, const std::string& v) { c.train_fraction = parse_double(k, v); }},
        {"ridge_lambda", [](run_config& c, const std::string& k, const std::string& v) { c.ridge_lambda = parse_double(k, v); }},
        {"krr_lambda", [](run_config& c, const std::string& k, const std::string& v) { c.krr_lambda = parse_double(k, v); }},
        {"krr_bandwidth", [](run_config& c, const std::string& k, const std::string& v) { c.krr_bandwidth = parse_double(k, v); }},
        {"gbt_trees", [](run_config& c, const std::string& k, const std::string& v) { c.gbt_trees = static_cast<int>(parse_int(k, v)); }},
        {"gbt_depth", [](run_config& c, const std::string& k, const std::string& v) { c.gbt_depth = static_cast<int>(parse_int(k, v)); }},
        {"gbt_shrinkage", [](run_config& c, const std::string& k, const std::string& v) { c.gbt_shrinkage = parse_double(k, v); }},
        {"gbt_subsample", [](run_config& c, const std::string& k, const std::string& v) { c.gbt_subsample = parse_double(k, v); }},
        {"bootstrap_replicates", [](run_config& c, const std::string& k, const std::string& v) { c.bootstrap_replicates = static_cast<int>(parse_int(k, v)); }},
        {"bootstrap_level", [](run_config& c, const std::string& k, const std::string& v) { c.bootstrap_level = parse_double(k, v); }},
        {"embed_use_variance", [](run_config& c, const std::string& k, const std::string& v) { c.embed_use_variance = parse_bool(k, v); }},
        {"synth_houses", [](run_config& c, const std::string& k, const std::string& v) { c.synth_houses = static_cast<int>(parse_int(k, v)); }},
        {"synth_regions", [](run_config& c, const std::string& k, const std::string& v) { c.synth_regions = static_cast<int>(parse_int(k, v)); }},
        {"synth_schools", [](run_config& c, const std::string& k, const std::string& v) { c.synth_schools = static_cast<int>(parse_int(k, v)); }},
        {"synth_stations", [](run_config& c, const std::string& k, const std::string& v) { c.synth_stations = static_cast<int>(parse_int(k, v)); }},
        {"synth_noise_sd", [](run_config& c, const std::string& k, const std::string& v) { c.synth_noise_sd = parse_double(k, v); }},
        {"synth_raw_weight", [](run_config& c, const std::string& k, const std::string& v) { c.synth_raw_weight = parse_double(k, v); }},
        {"synth_region_weight", [](run_config& c, const std::string& k, const std::string& v) { c.synth_region_weight = parse_double(k, v); }},
        {"synth_school_weight", [](run_config& c, const std::string& k, const std::string& v) { c.synth_school_weight = parse_double(k, v); }},
        {"synth_station_weight", [](run_config& c, const std::string& k, const std::string& v) { c.synth_station_weight = parse_double(k, v); }},
        {"synth_decay_scale", [](run_config& c, const std::string& k, const std::string& v) { c.synth_decay_scale = parse_double(k, v); }},
    };
    return table;
}

} // namespace

void apply_config_entry(const std::string& key, const std::string& value, run_config& cfg) {
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) throw config_error("unknown config key '" + key + "'");
    it->second(cfg, key, value);
}

void load_config_file(const std::string& path, run_config& cfg) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        apply_config_entry(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), cfg);
    }
}

optimizer_kind run_config::optimizer_enum() const {
    if (optimizer == "adam") return optimizer_kind::adam;
    if (optimizer == "sgd") return optimizer_kind::sgd;
    throw config_error("optimizer must be adam or sgd, got '" + optimizer + "'");
}

alternation_policy run_config::alternation_enum() const {
    if (alternation == "iterative") return alternation_policy::iterative;
    if (alternation == "random") return alternation_policy::random;
    if (alternation == "block100") return alternation_policy::block100;
    throw config_error("alternation must be iterative, random or block100, got '" + alternation + "'");
}

proximity_mode run_config::proximity_enum() const {
    if (proximity == "first") return proximity_mode::first;
    if (proximity == "second") return proximity_mode::second;
    if (proximity == "both") return proximity_mode::both;
    throw config_error("proximity must be first, second or both, got '" + proximity + "'");
}

void run_config::validate() const {
    optimizer_enum();
    alternation_enum();
    proximity_enum();
    if (distance != "auto" && distance != "planar" && distance != "haversine") {
        throw config_error("distance must be auto, planar or haversine");
    }
    auto positive = [](double v, const char* name) {
        if (!(v > 0)) throw config_error(std::string(name) + " must be positive");
    };
    positive(radius_house_school, "radius_house_school");
    positive(radius_house_station, "radius_house_station");
    positive(radius_school_station, "radius_school_station");
    positive(delta_min, "delta_min");
    positive(var_floor, "var_floor");
    positive(learning_rate, "learning_rate");
    if (k_nearest_stations < 1) throw config_error("k_nearest_stations must be >= 1");
    if (embed_dim < 1 || hidden_dim < 1 || first_hidden < 1) {
        throw config_error("embed_dim, hidden_dim and first_hidden must be >= 1");
    }
    if (iterations < 0) throw config_error("iterations must be >= 0");
    if (batch_size < 1) throw config_error("batch_size must be >= 1");
    if (negatives < 0) throw config_error("negatives must be >= 0");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw config_error("train_fraction must lie strictly between 0 and 1");
    }
    if (!(grad_clip > 0)) throw config_error("grad_clip must be positive");
    if (gbt_trees < 1 || gbt_depth < 1) throw config_error("gbt_trees and gbt_depth must be >= 1");
    if (!(gbt_subsample > 0.0 && gbt_subsample <= 1.0)) {
        throw config_error("gbt_subsample must lie in (0, 1]");
    }
    if (!(bootstrap_level > 0.0 && bootstrap_level < 1.0)) {
        throw config_error("bootstrap_level must lie strictly between 0 and 1");
    }
    if (bootstrap_replicates < 1) throw config_error("bootstrap_replicates must be >= 1");
    if (synth_houses < 1 || synth_regions < 1 || synth_schools < 0 || synth_stations < 0) {
        throw config_error("synthetic city sizes out of range");
    }
    if (!(synth_noise_sd >= 0)) throw config_error("synth_noise_sd must be >= 0");
    if (!(synth_decay_scale > 0)) throw config_error("synth_decay_scale must be > 0");
}

} // namespace gsne
