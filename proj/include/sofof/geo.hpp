#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sofof/types.hpp"

/// Planar geometry in a single local Cartesian frame (meters) and the two
/// location-based offloading decisions built on it.
namespace sofof::geo {

struct Point2 {
    double x{0.0};
    double y{0.0};

    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Simple polygon, implicitly closed (last vertex connects back to the first).
class Polygon {
public:
    /// Throws ValidationError for fewer than 3 vertices, repeated consecutive
    /// vertices or non-finite coordinates.
    explicit Polygon(std::vector<Point2> vertices);

    std::span<const Point2> vertices() const noexcept { return vertices_; }
    std::size_t size() const noexcept { return vertices_.size(); }

    friend bool operator==(const Polygon&, const Polygon&) = default;

private:
    std::vector<Point2> vertices_;
};

/// Non-empty ordered list of finite waypoints.
class Route {
public:
    explicit Route(std::vector<Point2> waypoints);

    std::span<const Point2> waypoints() const noexcept { return waypoints_; }
    std::size_t size() const noexcept { return waypoints_.size(); }
    const Point2& operator[](std::size_t i) const { return waypoints_[i]; }
    const Point2& front() const { return waypoints_.front(); }
    const Point2& back() const { return waypoints_.back(); }

    friend bool operator==(const Route&, const Route&) = default;

private:
    std::vector<Point2> waypoints_;
};

double euclid(Point2 a, Point2 b) noexcept;

/// Ray-casting inside test. Points exactly on an edge or vertex are inside.
bool point_in_polygon(Point2 p, const Polygon& poly);

/// Travel time at constant speed `v_c` along the longest prefix of `route`
/// whose waypoints all lie inside `poly`. Zero when the first waypoint is
/// outside or the route has a single waypoint.
double time_in_area(const Route& route, const Polygon& poly, double v_c);

/// Centralized (provider-side) decision: the map must be known and the
/// in-area travel time must reach `t_min`.
bool codm_accept(const Route& route, const Polygon& poly, bool map_id_known, double v_c,
                 double t_min);

struct LodmOptions {
    /// Start at the first waypoint inside `r_off` instead of rejecting a path
    /// whose first waypoint lies outside the radius.
    bool skip_to_first_in_radius{false};
};

struct LodmResult {
    bool accept{false};
    double d_passed{0.0};
};

/// Local (requester-side) decision. Walks `path` while its points stay
/// strictly within `r_off` of `pos_sp`, accumulating travelled distance
/// starting from `pos_last`; accepts once that distance strictly exceeds
/// `d_min`.
LodmResult lodm_evaluate(const Route& path, Point2 pos_last, double r_off, Point2 pos_sp,
                         double d_min, LodmOptions options = {});

bool lodm_accept(const Route& path, Point2 pos_last, double r_off, Point2 pos_sp, double d_min,
                 LodmOptions options = {});

// Polyline helpers shared by the planner, the requester and the scenario.

double route_length(const Route& route) noexcept;

struct RouteProjection {
    std::size_t segment{0};  ///< index i of segment [w_i, w_{i+1}] (0 for 1-point routes)
    double arc_length{0.0};  ///< distance along the route to the projected point
    Point2 point;            ///< closest point on the polyline
};

/// Closest point on the polyline; ties resolve to the earliest segment.
RouteProjection project_onto_route(const Route& route, Point2 p) noexcept;

/// Point at arc length `s`, clamped to [0, route_length].
Point2 point_along(const Route& route, double s) noexcept;

/// Heading in [0, 2*pi) of the direction from `a` to `b`; 0 for coincident points.
double heading_of(Point2 a, Point2 b) noexcept;

}  // namespace sofof::geo
