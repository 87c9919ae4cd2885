#include "sofof/geo.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <string>

namespace sofof::geo {
namespace {

bool finite(Point2 p) noexcept { return std::isfinite(p.x) && std::isfinite(p.y); }

bool on_segment(Point2 p, Point2 a, Point2 b) noexcept
{
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross != 0.0) {
        return false;
    }
    return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
           p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y);
}

void require_positive_speed(double v_c)
{
    if (!(v_c > 0.0) || !std::isfinite(v_c)) {
        throw DomainError("constant velocity must be finite and > 0, got " + std::to_string(v_c));
    }
}

}  // namespace

Polygon::Polygon(std::vector<Point2> vertices) : vertices_(std::move(vertices))
{
    if (vertices_.size() < 3) {
        throw ValidationError("polygon needs at least 3 vertices, got " +
                              std::to_string(vertices_.size()));
    }
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
        if (!finite(vertices_[i])) {
            throw ValidationError("polygon vertex " + std::to_string(i) + " is not finite");
        }
        if (vertices_[i] == vertices_[(i + 1) % vertices_.size()]) {
            throw ValidationError("polygon vertex " + std::to_string(i) +
                                  " repeats its successor");
        }
    }
}

Route::Route(std::vector<Point2> waypoints) : waypoints_(std::move(waypoints))
{
    if (waypoints_.empty()) {
        throw ValidationError("route must contain at least one waypoint");
    }
    for (std::size_t i = 0; i < waypoints_.size(); ++i) {
        if (!finite(waypoints_[i])) {
            throw ValidationError("route waypoint " + std::to_string(i) + " is not finite");
        }
    }
}

double euclid(Point2 a, Point2 b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

bool point_in_polygon(Point2 p, const Polygon& poly)
{
    const auto v = poly.vertices();
    const std::size_t n = v.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if (on_segment(p, v[j], v[i])) {
            return true;
        }
    }
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2 a = v[i];
        const Point2 b = v[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < x_cross) {
                inside = !inside;
            }
        }
    }
    return inside;
}

double time_in_area(const Route& route, const Polygon& poly, double v_c)
{
    require_positive_speed(v_c);
    const auto w = route.waypoints();
    if (!point_in_polygon(w[0], poly)) {
        return 0.0;
    }
    double distance = 0.0;
    for (std::size_t i = 1; i < w.size() && point_in_polygon(w[i], poly); ++i) {
        distance += euclid(w[i], w[i - 1]);
    }
    return distance / v_c;
}

bool codm_accept(const Route& route, const Polygon& poly, bool map_id_known, double v_c,
                 double t_min)
{
    require_positive_speed(v_c);
    if (!map_id_known) {
        return false;
    }
    return time_in_area(route, poly, v_c) >= t_min;
}

LodmResult lodm_evaluate(const Route& path, Point2 pos_last, double r_off, Point2 pos_sp,
                         double d_min, LodmOptions options)
{
    if (!(r_off > 0.0) || !std::isfinite(r_off)) {
        throw DomainError("offloading radius must be finite and > 0");
    }
    if (!(d_min >= 0.0) || !std::isfinite(d_min)) {
        throw DomainError("minimum distance must be finite and >= 0");
    }
    if (!finite(pos_last) || !finite(pos_sp)) {
        throw ValidationError("positions must be finite");
    }

    const auto w = path.waypoints();
    std::size_t idx = 0;
    if (options.skip_to_first_in_radius) {
        while (idx < w.size() && !(euclid(w[idx], pos_sp) < r_off)) {
            ++idx;
        }
    }

    LodmResult result;
    while (idx < w.size() && euclid(w[idx], pos_sp) < r_off) {
        result.d_passed += euclid(w[idx], pos_last);
        if (result.d_passed > d_min) {
            result.accept = true;
            return result;
        }
        pos_last = w[idx];
        ++idx;
    }
    return result;
}

bool lodm_accept(const Route& path, Point2 pos_last, double r_off, Point2 pos_sp, double d_min,
                 LodmOptions options)
{
    return lodm_evaluate(path, pos_last, r_off, pos_sp, d_min, options).accept;
}

double route_length(const Route& route) noexcept
{
    const auto w = route.waypoints();
    double total = 0.0;
    for (std::size_t i = 1; i < w.size(); ++i) {
        total += euclid(w[i - 1], w[i]);
    }
    return total;
}

RouteProjection project_onto_route(const Route& route, Point2 p) noexcept
{
    const auto w = route.waypoints();
    RouteProjection best{0, 0.0, w[0]};
    if (w.size() == 1) {
        return best;
    }
    double best_dist = std::numeric_limits<double>::infinity();
    double s_start = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        const Point2 a = w[i];
        const Point2 b = w[i + 1];
        const double dx = b.x - a.x;
        const double dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        double t = 0.0;
        if (len2 > 0.0) {
            t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
        }
        const Point2 q{a.x + t * dx, a.y + t * dy};
        const double d = euclid(p, q);
        const double seg_len = std::sqrt(len2);
        if (d < best_dist) {
            best_dist = d;
            best = RouteProjection{i, s_start + t * seg_len, q};
        }
        s_start += seg_len;
    }
    return best;
}

Point2 point_along(const Route& route, double s) noexcept
{
    const auto w = route.waypoints();
    if (s <= 0.0 || w.size() == 1) {
        return w[0];
    }
    double s_start = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        const double seg_len = euclid(w[i], w[i + 1]);
        if (s <= s_start + seg_len && seg_len > 0.0) {
            const double t = (s - s_start) / seg_len;
            return Point2{w[i].x + t * (w[i + 1].x - w[i].x), w[i].y + t * (w[i + 1].y - w[i].y)};
        }
        s_start += seg_len;
    }
    return w.back();
}

double heading_of(Point2 a, Point2 b) noexcept
{
    if (a == b) {
        return 0.0;
    }
    double h = std::atan2(b.y - a.y, b.x - a.x);
    if (h < 0.0) {
        h += 2.0 * std::numbers::pi;
    }
    if (h >= 2.0 * std::numbers::pi) {
        h = 0.0;
    }
    return h;
}

}  // namespace sofof::geo
