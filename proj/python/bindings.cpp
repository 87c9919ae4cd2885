#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sofof/config.hpp"
#include "sofof/geo.hpp"
#include "sofof/messages.hpp"
#include "sofof/scenario.hpp"

namespace py = pybind11;
using namespace sofof;

namespace {

using Xy = std::pair<double, double>;

geo::Point2 point(const Xy& p) { return {p.first, p.second}; }

std::vector<geo::Point2> points(const std::vector<Xy>& xs)
{
    std::vector<geo::Point2> out;
    out.reserve(xs.size());
    for (const auto& p : xs) out.push_back(point(p));
    return out;
}

geo::Polygon polygon(const std::vector<Xy>& xs) { return geo::Polygon(points(xs)); }
geo::Route route(const std::vector<Xy>& xs) { return geo::Route(points(xs)); }

scenario::ScenarioConfig scenario_from(const std::string& yaml, std::optional<std::uint64_t> seed,
                                       std::optional<TimeMs> duration_ms)
{
    auto cfg = config::parse_scenario(yaml);
    if (seed) cfg.seed = *seed;
    if (duration_ms) cfg.duration = *duration_ms;
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Native bindings; use the sofof package wrappers.";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<msg::ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<msg::SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<config::ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("euclid", [](const Xy& a, const Xy& b) { return geo::euclid(point(a), point(b)); });
    m.def("point_in_polygon", [](const Xy& p, const std::vector<Xy>& poly) {
        return geo::point_in_polygon(point(p), polygon(poly));
    });
    m.def("time_in_area", [](const std::vector<Xy>& r, const std::vector<Xy>& poly, double v_c) {
        return geo::time_in_area(route(r), polygon(poly), v_c);
    });
    m.def("codm_accept",
          [](const std::vector<Xy>& r, const std::vector<Xy>& poly, bool map_known, double v_c, double t_min) {
              return geo::codm_accept(route(r), polygon(poly), map_known, v_c, t_min);
          });
    m.def(
        "lodm_evaluate",
        [](const std::vector<Xy>& path, const Xy& pos_last, double r_off, const Xy& pos_sp, double d_min,
           bool skip_to_first_in_radius) {
            const auto r = geo::lodm_evaluate(route(path), point(pos_last), r_off, point(pos_sp), d_min,
                                              {skip_to_first_in_radius});
            return std::make_pair(r.accept, r.d_passed);
        },
        py::arg("path"), py::arg("pos_last"), py::arg("r_off"), py::arg("pos_sp"), py::arg("d_min"),
        py::arg("skip_to_first_in_radius") = false);
    m.def("route_length", [](const std::vector<Xy>& r) { return geo::route_length(route(r)); });

    m.def("normalize_message", [](const std::string& line) { return msg::encode(msg::decode(line)); },
          "Decode one wire line and encode it again.");
    m.def("message_kind", [](const std::string& line) {
        return std::string(msg::to_string(msg::decode(line).kind()));
    });

    m.def("cpu_usage", [](double t_total, double t_active, double t_deactivated, double a, double d, double s) {
        const auto u = scenario::cpu_usage(t_total, t_active, t_deactivated, {a, d, s});
        return std::make_pair(u.c_with, u.c_without);
    });
    m.def("break_even_ratio", [](double a, double d, double s) { return scenario::break_even_ratio({a, d, s}); });

    m.def(
        "run_json",
        [](const std::string& yaml, std::optional<std::uint64_t> seed, std::optional<TimeMs> duration_ms) {
            const auto cfg = scenario_from(yaml, seed, duration_ms);
            py::gil_scoped_release release;
            return scenario::report_json(scenario::run(cfg));
        },
        py::arg("yaml"), py::arg("seed") = py::none(), py::arg("duration_ms") = py::none());
    m.def(
        "sweep_cells",
        [](const std::string& yaml, const std::vector<TimeMs>& dt_max, const std::vector<std::size_t>& n,
           std::optional<std::size_t> replications, std::optional<TimeMs> duration_ms) {
            auto cfg = scenario_from(yaml, std::nullopt, duration_ms);
            if (replications) cfg.sweep_replications = *replications;
            std::vector<scenario::SweepCell> cells;
            {
                py::gil_scoped_release release;
                cells = scenario::sweep(cfg, dt_max, n);
            }
            py::list out;
            for (const auto& c : cells) {
                py::dict d;
                d["n"] = c.n;
                d["dt_max"] = c.dt_max;
                d["mean_t_off_s"] = c.mean_t_off_s;
                d["closed_episodes"] = c.closed_episodes;
                out.append(d);
            }
            return out;
        },
        py::arg("yaml"), py::arg("dt_max"), py::arg("n"), py::arg("replications") = py::none(),
        py::arg("duration_ms") = py::none());
}
