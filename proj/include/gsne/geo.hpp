#pragma once

namespace gsne {

// A point in either a planar frame (meters or any consistent unit) or in
// geographic degrees, in which case x is longitude and y is latitude.
struct geo_point {
    double x = 0.0;
    double y = 0.0;
};

enum class distance_mode { planar, haversine };

// Mean Earth radius in meters.
inline constexpr double earth_radius_m = 6'371'000.0;

// Planar: Euclidean in the point's units. Haversine: great-circle meters;
// throws input_error when a latitude is outside [-90, 90].
double distance(const geo_point& a, const geo_point& b, distance_mode mode);

// Inverse-distance edge weight with a floor that keeps near-coincident
// points from producing unbounded weights: w = 1 / max(dist, delta_min).
double edge_weight(double dist, double delta_min);

} // namespace gsne
