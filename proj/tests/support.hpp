#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sofof/config.hpp"
#include "sofof/geo.hpp"
#include "sofof/scenario.hpp"

namespace sofof::testing {

inline geo::Polygon rect(double x0, double y0, double x1, double y1)
{
    return geo::Polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

inline geo::Polygon square(double lo, double hi) { return rect(lo, lo, hi, hi); }

/// Points (x0, y), (x0 + step, y), ... up to and including x1.
inline geo::Route line_route(double x0, double x1, double step, double y = 0.0)
{
    std::vector<geo::Point2> pts;
    for (double x = x0; x <= x1 + 1e-9; x += step) {
        pts.push_back({x, y});
    }
    return geo::Route(std::move(pts));
}

inline double segment_distance(geo::Point2 p, geo::Point2 a, geo::Point2 b)
{
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

inline double boundary_distance(geo::Point2 p, const geo::Polygon& poly)
{
    const auto v = poly.vertices();
    double best = INFINITY;
    for (std::size_t i = 0; i < v.size(); ++i) {
        best = std::min(best, segment_distance(p, v[i], v[(i + 1) % v.size()]));
    }
    return best;
}

/// Winding number by summing signed angles; nonzero means inside.
inline int winding_number(geo::Point2 p, const geo::Polygon& poly)
{
    const auto v = poly.vertices();
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto a = v[i];
        const auto b = v[(i + 1) % v.size()];
        const double a1 = std::atan2(a.y - p.y, a.x - p.x);
        const double a2 = std::atan2(b.y - p.y, b.x - p.x);
        double d = a2 - a1;
        while (d > std::numbers::pi) d -= 2 * std::numbers::pi;
        while (d < -std::numbers::pi) d += 2 * std::numbers::pi;
        total += d;
    }
    return static_cast<int>(std::lround(total / (2 * std::numbers::pi)));
}

/// Star-shaped (hence simple) polygon around `c` with 3..12 vertices.
inline geo::Polygon random_star(std::mt19937_64& rng, geo::Point2 c = {0, 0})
{
    std::uniform_int_distribution<int> count(3, 12);
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
    std::uniform_real_distribution<double> radius(5.0, 100.0);
    const int n = count(rng);
    std::vector<double> angles;
    while (static_cast<int>(angles.size()) < n) {
        const double a = angle(rng);
        bool spaced = true;
        for (double b : angles) {
            spaced = spaced && std::abs(a - b) > 1e-3;
        }
        if (spaced) {
            angles.push_back(a);
        }
    }
    std::sort(angles.begin(), angles.end());
    std::vector<geo::Point2> pts;
    for (double a : angles) {
        const double r = radius(rng);
        pts.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
    }
    return geo::Polygon(std::move(pts));
}

/// Alternative LODM: the accumulated distance over the in-radius prefix is a
/// running sum, so the decision is whether any prefix sum exceeds d_min.
struct LodmOracle {
    bool accept{false};
    double d_passed{0.0};
};

inline LodmOracle lodm_oracle(const geo::Route& path, geo::Point2 pos_last, double r_off, geo::Point2 sp,
                              double d_min)
{
    const auto w = path.waypoints();
    std::size_t m = 0;
    while (m < w.size() && std::hypot(w[m].x - sp.x, w[m].y - sp.y) < r_off) {
        ++m;
    }
    std::vector<double> prefix;
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const auto prev = k == 0 ? pos_last : w[k - 1];
        sum += std::hypot(w[k].x - prev.x, w[k].y - prev.y);
        prefix.push_back(sum);
    }
    for (double p : prefix) {
        if (p > d_min) {
            return {true, p};
        }
    }
    return {false, prefix.empty() ? 0.0 : prefix.back()};
}

inline std::string source_path(const std::string& rel) { return std::string(SOFOF_SOURCE_DIR) + "/" + rel; }

inline scenario::ScenarioConfig load_config(const std::string& name)
{
    return config::load_scenario(source_path("configs/" + name));
}

/// An area nowhere near the calibrated loop.
inline geo::Polygon far_away_area() { return rect(5000, 5000, 5100, 5100); }

}  // namespace sofof::testing
