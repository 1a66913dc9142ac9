#pragma once

#include <vector>

#include "gsne/graph.hpp"
#include "gsne/rng.hpp"

namespace gsne {

// Walker alias table: O(M) construction, O(1) draws. Weights must be
// non-negative with a positive sum; zero-weight items are never drawn.
class alias_table {
public:
    static alias_table build(const std::vector<double>& weights);

    int draw(rng& r) const;
    int size() const { return static_cast<int>(prob_.size()); }

    // The exact distribution the table samples from, for verification:
    // implied[i] = (prob[i] + sum of (1 - prob[j]) over j aliased to i) / M.
    std::vector<double> implied_distribution() const;

private:
    std::vector<double> prob_;
    std::vector<int> alias_;
};

// Negative-sampling noise over one side of an edge set: mass proportional
// to degree^power (default 3/4) over nodes that appear in the set.
class noise_dist {
public:
    static noise_dist build(const std::vector<int>& degrees, double power = 0.75);

    // Draws a local node index (into the partition the degrees describe).
    int draw(rng& r) const { return items_[table_.draw(r)]; }

    const std::vector<int>& items() const { return items_; }
    const alias_table& table() const { return table_; }

private:
    std::vector<int> items_;
    alias_table table_;
};

// Edge sampler for one edge set: draws edge indices proportionally to edge
// weight, which is how spatial closeness enters the objective.
alias_table build_edge_sampler(const edge_set& set);

} // namespace gsne
