#include "gsne/geo.hpp"

#include <cmath>
#include <string>

#include "gsne/errors.hpp"

namespace gsne {

namespace {

constexpr double pi = 3.14159265358979323846;

double deg2rad(double d) { return d * (pi / 180.0); }

} // namespace

double distance(const geo_point& a, const geo_point& b, distance_mode mode) {
    if (mode == distance_mode::planar) {
        const double dx = a.x - b.x;
        const double dy = a.y - b.y;
        return std::sqrt(dx * dx + dy * dy);
    }
    for (const geo_point& p : {a, b}) {
        if (!(p.y >= -90.0 && p.y <= 90.0)) {
            throw input_error("latitude " + std::to_string(p.y) + " outside [-90, 90]");
        }
    }
    const double lat1 = deg2rad(a.y);
    const double lat2 = deg2rad(b.y);
    const double dlat = lat2 - lat1;
    const double dlon = deg2rad(b.x - a.x);
    const double sl = std::sin(0.5 * dlat);
    const double so = std::sin(0.5 * dlon);
    double h = sl * sl + std::cos(lat1) * std::cos(lat2) * so * so;
    if (h > 1.0) h = 1.0;
    if (h < 0.0) h = 0.0;
    return 2.0 * earth_radius_m * std::asin(std::sqrt(h));
}

double edge_weight(double dist, double delta_min) {
    if (!(delta_min > 0.0)) throw input_error("delta_min must be positive");
    if (!(dist >= 0.0)) throw input_error("distance must be non-negative");
    return 1.0 / std::max(dist, delta_min);
}

} // namespace gsne
