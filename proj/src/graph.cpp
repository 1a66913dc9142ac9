#include "gsne/graph.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>

#include "gsne/errors.hpp"
#include "gsne/serialize.hpp"

namespace gsne {

namespace {

struct union_find {
    std::vector<int> parent;

    explicit union_find(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[a] = b;
        return true;
    }
};

} // namespace

int multipartite_graph::total_nodes() const {
    int n = 0;
    for (const auto& p : partitions) n += p.size();
    return n;
}

std::int64_t multipartite_graph::total_edges() const {
    std::int64_t n = 0;
    for (const auto& s : edge_sets) n += static_cast<std::int64_t>(s.edges.size());
    return n;
}

int multipartite_graph::edge_set_index(const std::string& name) const {
    for (size_t i = 0; i < edge_sets.size(); ++i) {
        if (edge_sets[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

std::vector<weighted_edge> connect_membership(const partition& houses, const partition& regions,
                                              const std::vector<int>& assignment,
                                              distance_mode mode, double delta_min) {
    if (assignment.size() != houses.ids.size()) {
        throw input_error("membership assignment covers " + std::to_string(assignment.size()) +
                          " houses, expected " + std::to_string(houses.ids.size()));
    }
    std::vector<weighted_edge> edges;
    edges.reserve(assignment.size());
    for (size_t h = 0; h < assignment.size(); ++h) {
        const int r = assignment[h];
        if (r < 0 || r >= regions.size()) {
            throw input_error("house " + std::to_string(houses.ids[h]) +
                              " references region index " + std::to_string(r) +
                              " outside the region table");
        }
        const double d = distance(houses.coords[h], regions.coords[r], mode);
        edges.push_back({static_cast<int>(h), r, edge_weight(d, delta_min), d});
    }
    return edges;
}

std::vector<weighted_edge> connect_radius_or_nearest(const partition& sources,
                                                     const partition& targets, double radius,
                                                     distance_mode mode, double delta_min) {
    if (targets.size() == 0) {
        throw construction_error("radius connection into empty partition '" + targets.name + "'");
    }
    if (!(radius > 0)) throw input_error("radius must be positive");
    const bool self = &sources == &targets;
    std::vector<weighted_edge> edges;
    for (int s = 0; s < sources.size(); ++s) {
        int nearest = -1;
        double nearest_d = 0.0;
        bool any_in_radius = false;
        for (int t = 0; t < targets.size(); ++t) {
            if (self && t == s) continue;
            const double d = distance(sources.coords[s], targets.coords[t], mode);
            if (nearest < 0 || d < nearest_d) {
                nearest = t;
                nearest_d = d;
            }
            if (d <= radius) {
                any_in_radius = true;
                edges.push_back({s, t, edge_weight(d, delta_min), d});
            }
        }
        if (!any_in_radius && nearest >= 0) {
            edges.push_back({s, nearest, edge_weight(nearest_d, delta_min), nearest_d});
        }
    }
    return edges;
}

std::vector<weighted_edge> connect_station_graph(const partition& stations, int k,
                                                 distance_mode mode, double delta_min) {
    const int n = stations.size();
    if (k < 1) throw input_error("station k must be >= 1");
    if (n <= 1) return {};

    // All pairwise distances once; n is small in any realistic city.
    Eigen::MatrixXd dist(n, n);
    for (int i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double d = distance(stations.coords[i], stations.coords[j], mode);
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }

    std::set<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i) {
        std::vector<int> order;
        order.reserve(n - 1);
        for (int j = 0; j < n; ++j) {
            if (j != i) order.push_back(j);
        }
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (dist(i, a) != dist(i, b)) return dist(i, a) < dist(i, b);
            return a < b;
        });
        const int take = std::min<int>(k, static_cast<int>(order.size()));
        for (int t = 0; t < take; ++t) {
            const int j = order[t];
            pairs.insert({std::min(i, j), std::max(i, j)});
        }
    }

    union_find uf(n);
    for (const auto& [a, b] : pairs) uf.unite(a, b);

    // Bridge remaining components with the closest cross-component pair,
    // deterministically (ties by lowest index pair).
    while (true) {
        bool single = true;
        for (int i = 1; i < n; ++i) {
            if (uf.find(i) != uf.find(0)) {
                single = false;
                break;
            }
        }
        if (single) break;
        int best_a = -1, best_b = -1;
        double best_d = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (uf.find(i) == uf.find(j)) continue;
                if (best_a < 0 || dist(i, j) < best_d) {
                    best_a = i;
                    best_b = j;
                    best_d = dist(i, j);
                }
            }
        }
        pairs.insert({best_a, best_b});
        uf.unite(best_a, best_b);
    }

    std::vector<weighted_edge> edges;
    edges.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        edges.push_back({a, b, edge_weight(dist(a, b), delta_min), dist(a, b)});
    }
    return edges;
}

namespace {

void validate_partition(const partition& p) {
    const size_t n = p.ids.size();
    if (p.coords.size() != n) {
        throw construction_error("partition '" + p.name + "': " + std::to_string(p.coords.size()) +
                                 " coordinates for " + std::to_string(n) + " ids");
    }
    if (static_cast<size_t>(p.attrs.cols()) != n) {
        throw construction_error("partition '" + p.name + "': attribute matrix has " +
                                 std::to_string(p.attrs.cols()) + " columns for " +
                                 std::to_string(n) + " nodes");
    }
    if (n > 0 && p.attrs.rows() == 0) {
        throw construction_error("partition '" + p.name + "' has no feature rows");
    }
    std::set<std::int64_t> seen;
    for (const auto id : p.ids) {
        if (!seen.insert(id).second) {
            throw construction_error("partition '" + p.name + "': duplicate id " +
                                     std::to_string(id));
        }
    }
    if (!p.attrs.allFinite()) {
        throw construction_error("partition '" + p.name + "': non-finite attribute values");
    }
}

void assert_connected(const multipartite_graph& g) {
    std::array<int, partition_count> offset{};
    int total = 0;
    for (int p = 0; p < partition_count; ++p) {
        offset[p] = total;
        total += g.partitions[p].size();
    }
    if (total == 0) throw construction_error("graph has no nodes");

    std::vector<std::vector<int>> adj(total);
    for (const auto& set : g.edge_sets) {
        for (const auto& e : set.edges) {
            const int u = offset[set.part_a] + e.a;
            const int v = offset[set.part_b] + e.b;
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
    }

    std::vector<char> seen(total, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (const int v : adj[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                q.push(v);
            }
        }
    }
    if (reached != total) {
        for (int u = 0; u < total; ++u) {
            if (!seen[u]) {
                int p = partition_count - 1;
                while (offset[p] > u) --p;
                const auto& part = g.partitions[p];
                throw construction_error(
                    "graph is not connected: node id " +
                    std::to_string(part.ids[u - offset[p]]) + " in partition '" + part.name +
                    "' is unreachable (" + std::to_string(total - reached) +
                    " nodes isolated)");
            }
        }
    }
}

} // namespace

multipartite_graph build_graph(partition houses, partition regions, partition schools,
                               partition stations, const std::vector<int>& assignment,
                               const graph_options& opts) {
    houses.name = partition_names[part_house];
    regions.name = partition_names[part_region];
    schools.name = partition_names[part_school];
    stations.name = partition_names[part_station];

    if (houses.size() == 0) throw construction_error("house partition is empty");
    if (regions.size() == 0 && schools.size() == 0 && stations.size() == 0) {
        throw construction_error("no point-of-interest partitions present: need at least two "
                                 "node families to build a multipartite graph");
    }

    multipartite_graph g;
    g.mode = opts.mode;
    g.delta_min = opts.delta_min;
    g.partitions = {std::move(houses), std::move(regions), std::move(schools),
                    std::move(stations)};
    for (const auto& p : g.partitions) validate_partition(p);

    const auto& hp = g.partitions[part_house];
    const auto& rp = g.partitions[part_region];
    const auto& cp = g.partitions[part_school];
    const auto& tp = g.partitions[part_station];

    if (rp.size() > 0) {
        g.edge_sets.push_back({"house-region", part_house, part_region,
                               connect_membership(hp, rp, assignment, opts.mode, opts.delta_min)});
    }
    if (cp.size() > 0) {
        g.edge_sets.push_back({"house-school", part_house, part_school,
                               connect_radius_or_nearest(hp, cp, opts.radius_house_school,
                                                         opts.mode, opts.delta_min)});
    }
    if (tp.size() > 0) {
        g.edge_sets.push_back({"house-station", part_house, part_station,
                               connect_radius_or_nearest(hp, tp, opts.radius_house_station,
                                                         opts.mode, opts.delta_min)});
    }
    if (cp.size() > 0 && tp.size() > 0) {
        g.edge_sets.push_back({"school-station", part_school, part_station,
                               connect_radius_or_nearest(cp, tp, opts.radius_school_station,
                                                         opts.mode, opts.delta_min)});
    }
    if (tp.size() > 1) {
        g.edge_sets.push_back({"station-station", part_station, part_station,
                               connect_station_graph(tp, opts.k_nearest_stations, opts.mode,
                                                     opts.delta_min)});
    }

    for (const auto& set : g.edge_sets) {
        for (const auto& e : set.edges) {
            if (!(e.weight > 0) || !std::isfinite(e.weight)) {
                throw construction_error("edge set '" + set.name + "' produced a non-positive "
                                         "or non-finite weight");
            }
        }
    }

    assert_connected(g);
    return g;
}

std::pair<std::vector<int>, std::vector<int>> edge_set_degrees(const edge_set& set, int n_a,
                                                               int n_b) {
    std::vector<int> da(n_a, 0), db(n_b, 0);
    for (const auto& e : set.edges) {
        ++da[e.a];
        ++db[e.b];
    }
    if (set.part_a == set.part_b) {
        for (int i = 0; i < n_a; ++i) {
            da[i] += db[i];
            db[i] = da[i];
        }
    }
    return {std::move(da), std::move(db)};
}

namespace {
constexpr char graph_magic[9] = "GSNEGR\x01\x00";
constexpr std::uint32_t graph_version = 1;
} // namespace

void write_graph_body(bin_writer& w, const multipartite_graph& g) {
    w.u32(g.mode == distance_mode::haversine ? 1 : 0);
    w.f64(g.delta_min);
    w.u32(static_cast<std::uint32_t>(g.partitions.size()));
    for (const auto& p : g.partitions) {
        w.str(p.name);
        w.vec_i64(p.ids);
        std::vector<double> flat;
        flat.reserve(p.coords.size() * 2);
        for (const auto& c : p.coords) {
            flat.push_back(c.x);
            flat.push_back(c.y);
        }
        w.vec_f64(flat);
        w.matrix(p.attrs);
    }
    w.u32(static_cast<std::uint32_t>(g.edge_sets.size()));
    for (const auto& s : g.edge_sets) {
        w.str(s.name);
        w.u32(static_cast<std::uint32_t>(s.part_a));
        w.u32(static_cast<std::uint32_t>(s.part_b));
        w.u64(s.edges.size());
        for (const auto& e : s.edges) {
            w.u32(static_cast<std::uint32_t>(e.a));
            w.u32(static_cast<std::uint32_t>(e.b));
            w.f64(e.weight);
            w.f64(e.dist);
        }
    }
}

void save_graph(const multipartite_graph& g, const std::string& path) {
    bin_writer w(path);
    w.magic(graph_magic);
    w.u32(graph_version);
    write_graph_body(w, g);
    w.close();
}

multipartite_graph read_graph_body(bin_reader& r, const std::string& path) {
    multipartite_graph g;
    g.mode = r.u32() == 1 ? distance_mode::haversine : distance_mode::planar;
    g.delta_min = r.f64();
    const auto nparts = r.u32();
    if (nparts != partition_count) throw load_error(path + ": unexpected partition count");
    g.partitions.resize(nparts);
    for (auto& p : g.partitions) {
        p.name = r.str();
        p.ids = r.vec_i64();
        const auto flat = r.vec_f64();
        if (flat.size() != p.ids.size() * 2) throw load_error(path + ": coordinate block size");
        p.coords.resize(p.ids.size());
        for (size_t i = 0; i < p.coords.size(); ++i) {
            p.coords[i] = {flat[2 * i], flat[2 * i + 1]};
        }
        p.attrs = r.matrix();
        if (static_cast<size_t>(p.attrs.cols()) != p.ids.size()) {
            throw load_error(path + ": attribute matrix shape");
        }
    }
    const auto nsets = r.u32();
    g.edge_sets.resize(nsets);
    for (auto& s : g.edge_sets) {
        s.name = r.str();
        s.part_a = static_cast<int>(r.u32());
        s.part_b = static_cast<int>(r.u32());
        if (s.part_a >= partition_count || s.part_b >= partition_count) {
            throw load_error(path + ": edge set partition index");
        }
        const auto ne = r.u64();
        s.edges.resize(ne);
        for (auto& e : s.edges) {
            e.a = static_cast<int>(r.u32());
            e.b = static_cast<int>(r.u32());
            e.weight = r.f64();
            e.dist = r.f64();
            const int na = g.partitions[s.part_a].size();
            const int nb = g.partitions[s.part_b].size();
            if (e.a < 0 || e.a >= na || e.b < 0 || e.b >= nb) {
                throw load_error(path + ": edge index out of range in '" + s.name + "'");
            }
        }
    }
    return g;
}

multipartite_graph load_graph(const std::string& path) {
    bin_reader r(path);
    r.expect_magic(graph_magic);
    const auto version = r.u32();
    if (version != graph_version) {
        throw load_error(path + ": unsupported graph version " + std::to_string(version));
    }
    multipartite_graph g = read_graph_body(r, path);
    r.expect_eof();
    return g;
}

} // namespace gsne
