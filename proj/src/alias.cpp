#include "gsne/alias.hpp"

#include <cmath>
#include <string>

#include "gsne/errors.hpp"

namespace gsne {

alias_table alias_table::build(const std::vector<double>& weights) {
    const int m = static_cast<int>(weights.size());
    if (m == 0) throw input_error("alias table needs at least one item");
    double total = 0.0;
    for (const double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw input_error("alias weights must be finite and non-negative");
        }
        total += w;
    }
    if (!(total > 0.0)) throw input_error("alias weights must not all be zero");

    alias_table t;
    t.prob_.assign(m, 0.0);
    t.alias_.assign(m, 0);

    std::vector<double> scaled(m);
    for (int i = 0; i < m; ++i) scaled[i] = weights[i] * m / total;

    std::vector<int> small, large;
    small.reserve(m);
    large.reserve(m);
    for (int i = 0; i < m; ++i) {
        (scaled[i] < 1.0 ? small : large).push_back(i);
    }

    while (!small.empty() && !large.empty()) {
        const int s = small.back();
        small.pop_back();
        const int l = large.back();
        large.pop_back();
        t.prob_[s] = scaled[s];
        t.alias_[s] = l;
        scaled[l] -= 1.0 - scaled[s];
        (scaled[l] < 1.0 ? small : large).push_back(l);
    }
    for (const int i : large) {
        t.prob_[i] = 1.0;
        t.alias_[i] = i;
    }
    for (const int i : small) { // leftovers from rounding
        t.prob_[i] = 1.0;
        t.alias_[i] = i;
    }
    return t;
}

int alias_table::draw(rng& r) const {
    const int k = static_cast<int>(r.uniform_index(prob_.size()));
    return r.uniform() < prob_[k] ? k : alias_[k];
}

std::vector<double> alias_table::implied_distribution() const {
    const int m = size();
    std::vector<double> p(m, 0.0);
    for (int i = 0; i < m; ++i) {
        p[i] += prob_[i];
        if (prob_[i] < 1.0) p[alias_[i]] += 1.0 - prob_[i];
    }
    for (double& v : p) v /= m;
    return p;
}

noise_dist noise_dist::build(const std::vector<int>& degrees, double power) {
    noise_dist n;
    std::vector<double> mass;
    for (size_t i = 0; i < degrees.size(); ++i) {
        if (degrees[i] < 0) throw input_error("negative degree for node " + std::to_string(i));
        if (degrees[i] > 0) {
            n.items_.push_back(static_cast<int>(i));
            mass.push_back(std::pow(static_cast<double>(degrees[i]), power));
        }
    }
    if (n.items_.empty()) throw input_error("noise distribution over all-zero degrees");
    n.table_ = alias_table::build(mass);
    return n;
}

alias_table build_edge_sampler(const edge_set& set) {
    std::vector<double> w;
    w.reserve(set.edges.size());
    for (const auto& e : set.edges) w.push_back(e.weight);
    return alias_table::build(w);
}

} // namespace gsne
