#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gsne/geo.hpp"

namespace gsne {

// Fixed partition layout: 0 houses, 1 regions, 2 schools, 3 stations.
enum : int { part_house = 0, part_region = 1, part_school = 2, part_station = 3 };
inline constexpr int partition_count = 4;
inline const char* const partition_names[partition_count] = {"house", "region", "school",
                                                             "station"};

struct node_ref {
    int partition = 0;
    int index = 0;
    bool operator==(const node_ref&) const = default;
};

struct weighted_edge {
    int a = 0; // local index in the edge set's first partition
    int b = 0; // local index in the second partition
    double weight = 0.0;
    double dist = 0.0;
};

// One node family: external ids, geometry, and a feature matrix with one
// column per node (rows are standardized feature dimensions).
struct partition {
    std::string name;
    std::vector<std::int64_t> ids;
    std::vector<geo_point> coords;
    Eigen::MatrixXd attrs; // D_k x n_k

    int size() const { return static_cast<int>(ids.size()); }
    int feature_dim() const { return static_cast<int>(attrs.rows()); }
};

struct edge_set {
    std::string name;
    int part_a = 0;
    int part_b = 0;
    std::vector<weighted_edge> edges;
};

struct multipartite_graph {
    std::vector<partition> partitions; // always partition_count entries
    std::vector<edge_set> edge_sets;
    distance_mode mode = distance_mode::planar;
    double delta_min = 1.0;

    int total_nodes() const;
    std::int64_t total_edges() const;
    int edge_set_index(const std::string& name) const; // -1 when absent
};

struct graph_options {
    double radius_house_school = 1000.0;
    double radius_house_station = 1000.0;
    double radius_school_station = 1000.0;
    int k_nearest_stations = 3;
    double delta_min = 1.0;
    distance_mode mode = distance_mode::planar;
};

// Membership edges: house i -> regions[assignment[i]], weighted by inverse
// distance to the region centroid. assignment values outside the region
// partition raise input_error.
std::vector<weighted_edge> connect_membership(const partition& houses, const partition& regions,
                                              const std::vector<int>& assignment,
                                              distance_mode mode, double delta_min);

// For every source node: edges to all targets within radius; when none lie
// inside the radius, a single edge to the nearest target (ties broken by
// lowest target index). Throws construction_error when targets are empty.
std::vector<weighted_edge> connect_radius_or_nearest(const partition& sources,
                                                     const partition& targets, double radius,
                                                     distance_mode mode, double delta_min);

// Undirected k-nearest edges among stations (deduplicated), then minimal
// extra edges joining remaining components, closest component pair first.
std::vector<weighted_edge> connect_station_graph(const partition& stations, int k,
                                                 distance_mode mode, double delta_min);

// Assembles the full graph (5 edge sets where both sides are non-empty),
// validates shapes, and asserts global connectivity, naming an unreachable
// node otherwise. `assignment` maps each house to a region index.
multipartite_graph build_graph(partition houses, partition regions, partition schools,
                               partition stations, const std::vector<int>& assignment,
                               const graph_options& opts);

// Unweighted per-node edge counts within one edge set, for both sides.
// When the set links a partition to itself the two vectors are identical.
std::pair<std::vector<int>, std::vector<int>> edge_set_degrees(const edge_set& set, int n_a,
                                                               int n_b);

// Binary artifact round trip (versioned, magic-checked).
void save_graph(const multipartite_graph& g, const std::string& path);
multipartite_graph load_graph(const std::string& path);

// Payload-level graph serialization so other artifacts can embed a graph.
class bin_writer;
class bin_reader;
void write_graph_body(bin_writer& w, const multipartite_graph& g);
multipartite_graph read_graph_body(bin_reader& r, const std::string& origin);

} // namespace gsne
