#include "sofof/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sofof::scenario {

using json = nlohmann::ordered_json;

void CpuCosts::validate() const
{
    if (!(tpl_active >= 0.0) || !(tpl_deactivated >= 0.0) || !(sofof_sr >= 0.0)) {
        throw ValidationError("cpu costs must be >= 0");
    }
    if (!(tpl_active > tpl_deactivated)) {
        throw ValidationError("cpu.tpl_active must exceed cpu.tpl_deactivated");
    }
}

CpuUsage cpu_usage(double t_total, double t_active_local, double t_deactivated, const CpuCosts& costs)
{
    if (t_total < 0.0 || t_active_local < 0.0 || t_deactivated < 0.0) {
        throw DomainError("cpu_usage: times must be >= 0");
    }
    if (std::abs(t_active_local + t_deactivated - t_total) > 1e-9 * std::max(1.0, t_total)) {
        throw DomainError("cpu_usage: active and deactivated time must add up to the total");
    }
    CpuUsage u;
    u.c_without = t_total * costs.tpl_active;
    u.c_with = t_total * costs.sofof_sr + t_active_local * costs.tpl_active +
               t_deactivated * costs.tpl_deactivated;
    return u;
}

double break_even_ratio(const CpuCosts& costs)
{
    const double saved = costs.tpl_active - costs.tpl_deactivated;
    if (!(saved > 0.0)) {
        throw DomainError("break_even_ratio: deactivating the local service saves nothing");
    }
    return costs.sofof_sr / saved;
}

// ---------------------------------------------------------------------------

Loop::Loop(geo::Route route) : route_(std::move(route))
{
    const auto wps = route_.waypoints();
    pts_.assign(wps.begin(), wps.end());
    if (pts_.size() > 1 && pts_.back() != pts_.front()) {
        pts_.push_back(pts_.front());
    }
    cum_.assign(pts_.size(), 0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
        cum_[i] = cum_[i - 1] + geo::euclid(pts_[i - 1], pts_[i]);
    }
    length_ = cum_.back();
}

double Loop::wrap(double s) const noexcept
{
    if (length_ <= 0.0) {
        return 0.0;
    }
    double w = std::fmod(s, length_);
    if (w < 0.0) {
        w += length_;
    }
    return w;
}

std::size_t Loop::segment_at(double wrapped) const noexcept
{
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), wrapped);
    const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - cum_.begin() - 1));
    return std::min(idx, pts_.size() - 2);
}

geo::Point2 Loop::position(double s) const noexcept
{
    if (length_ <= 0.0) {
        return pts_.front();
    }
    const double w = wrap(s);
    const std::size_t i = segment_at(w);
    const double seg = cum_[i + 1] - cum_[i];
    const double f = seg > 0.0 ? (w - cum_[i]) / seg : 0.0;
    return {pts_[i].x + f * (pts_[i + 1].x - pts_[i].x), pts_[i].y + f * (pts_[i + 1].y - pts_[i].y)};
}

double Loop::heading(double s) const noexcept
{
    if (length_ <= 0.0) {
        return 0.0;
    }
    std::size_t i = segment_at(wrap(s));
    while (cum_[i + 1] - cum_[i] <= 0.0) {
        i = (i + 1) % (pts_.size() - 1);
    }
    return geo::heading_of(pts_[i], pts_[i + 1]);
}

geo::Route Loop::lookahead(double s, double distance, double resolution) const
{
    if (length_ <= 0.0) {
        return geo::Route({pts_.front()});
    }
    const double end = s + distance;
    std::vector<double> arcs;
    for (double a = s; a < end; a += resolution) {
        arcs.push_back(a);
    }
    arcs.push_back(end);
    for (double base = std::floor(s / length_) * length_; base < end; base += length_) {
        for (std::size_t j = 0; j + 1 < cum_.size(); ++j) {
            const double a = base + cum_[j];
            if (a > s && a < end) {
                arcs.push_back(a);
            }
        }
    }
    std::sort(arcs.begin(), arcs.end());
    std::vector<geo::Point2> out;
    out.reserve(arcs.size());
    for (std::size_t k = 0; k < arcs.size(); ++k) {
        if (k > 0 && arcs[k] - arcs[k - 1] < 1e-9) {
            continue;
        }
        const geo::Point2 p = position(arcs[k]);
        if (out.empty() || out.back() != p) {
            out.push_back(p);
        }
    }
    return geo::Route(std::move(out));
}

// ---------------------------------------------------------------------------

void VehicleConfig::validate() const
{
    requester.validate();
    if (!(speed_mps >= 0.0) || !std::isfinite(speed_mps)) {
        throw ValidationError("vehicle speed_mps must be a finite value >= 0");
    }
    if (cam_period <= 0 || cpm_period <= 0) {
        throw ValidationError("vehicle cam_period and cpm_period must be > 0");
    }
    if (!std::isfinite(spawn_offset_m)) {
        throw ValidationError("vehicle spawn_offset_m must be finite");
    }
}

void ScenarioConfig::validate() const
{
    if (duration <= 0) {
        throw ValidationError("duration must be > 0");
    }
    if (tick <= 0) {
        throw ValidationError("tick must be > 0");
    }
    if (vehicles.empty()) {
        throw ValidationError("at least one vehicle is required");
    }
    if (!(lookahead_m > 0.0) || !(route_resolution_m > 0.0)) {
        throw ValidationError("lookahead_m and route_resolution_m must be > 0");
    }
    if (!(spawn_spacing_m >= 0.0)) {
        throw ValidationError("spawn_spacing_m must be >= 0");
    }
    if (sweep_replications == 0) {
        throw ValidationError("sweep_replications must be >= 1");
    }
    provider.validate();
    latency.validate();
    cpu.validate();
    std::set<StationId> stations{provider.station};
    for (const auto& v : vehicles) {
        v.validate();
        if (!stations.insert(v.requester.station).second) {
            throw ValidationError("duplicate station id " + std::to_string(v.requester.station.value));
        }
    }
}

// ---------------------------------------------------------------------------

namespace {

struct Vehicle {
    const VehicleConfig* cfg;
    Loop loop;
    TimeMs next_cam{0};
    TimeMs next_cpm{0};
    TimeMs in_area_ms{0};
    std::uint64_t availability_violations{0};

    double arc(TimeMs t) const { return cfg->spawn_offset_m + cfg->speed_mps * static_cast<double>(t) / 1000.0; }
};

std::string reason_name(const std::optional<msg::TerminationReason>& r)
{
    return r ? std::string(msg::to_string(*r)) : std::string("Open");
}

}  // namespace

MetricsReport run(const ScenarioConfig& config, const RunOptions& options)
{
    config.validate();

    provider::Provider prov(config.provider);
    const StationId sp = config.provider.station;
    net::Network network(config.latency, config.seed, config.per_link_fifo);
    if (options.fault_hook) {
        network.set_fault_hook(options.fault_hook);
    }
    network.attach(sp);

    std::vector<Vehicle> vehicles;
    std::vector<requester::Requester> reqs;
    std::map<StationId, std::size_t> index;
    vehicles.reserve(config.vehicles.size());
    reqs.reserve(config.vehicles.size());
    for (const auto& vc : config.vehicles) {
        Vehicle v{&vc, Loop(vc.route)};
        auto rc = vc.requester;
        rc.planned_route = v.loop.lookahead(v.arc(0), config.lookahead_m, config.route_resolution_m);
        index[rc.station] = reqs.size();
        reqs.emplace_back(std::move(rc), 0);
        vehicles.push_back(std::move(v));
    }

    auto submit = [&](TimeMs now, msg::Envelope env) {
        if (config.wire_roundtrip) {
            env = msg::decode(msg::encode(env));
        }
        if (options.observer) {
            options.observer(TraceEvent{TraceEvent::Type::Submit, now, StationId{}, env});
        }
        network.submit(now, env, prov.active_session_count());
    };
    auto submit_all = [&](TimeMs now, std::vector<msg::Envelope> envs) {
        for (auto& e : envs) {
            submit(now, std::move(e));
        }
    };
    auto drain = [&](TimeMs until) {
        while (const auto next = network.next_delivery()) {
            if (*next > until) {
                break;
            }
            for (auto& d : network.step(*next)) {
                if (options.observer) {
                    options.observer(TraceEvent{TraceEvent::Type::Deliver, d.deliver_at, d.receiver, d.env});
                }
                if (d.receiver == sp) {
                    submit_all(d.deliver_at, prov.handle(d.deliver_at, d.env));
                } else if (const auto it = index.find(d.receiver); it != index.end()) {
                    submit_all(d.deliver_at, reqs[it->second].handle(d.deliver_at, d.env));
                }
            }
        }
    };

    for (TimeMs t = 0; t <= config.duration; t += config.tick) {
        drain(t - 1);

        for (std::size_t i = 0; i < vehicles.size(); ++i) {
            Vehicle& v = vehicles[i];
            const double s = v.arc(t);
            msg::VehicleState ego{v.cfg->requester.station, t, v.loop.position(s), v.cfg->speed_mps,
                                  v.loop.heading(s)};
            reqs[i].update_ego(ego);
            reqs[i].set_planned_route(v.loop.lookahead(s, config.lookahead_m, config.route_resolution_m));
            if (t < config.duration && geo::point_in_polygon(ego.position, config.provider.offloading_area)) {
                v.in_area_ms += std::min(config.tick, config.duration - t);
            }
            if (t >= v.next_cam) {
                submit(t, msg::make_cam(t, ego));
                v.next_cam += v.cfg->cam_period;
            }
            if (t >= v.next_cpm) {
                const double ahead = s + 30.0;
                msg::CpmBody cpm{{msg::Track{1, v.loop.position(ahead), v.cfg->speed_mps, v.loop.heading(ahead)}}};
                submit(t, msg::make_unicast(ego.station, sp, t, std::move(cpm)));
                v.next_cpm += v.cfg->cpm_period;
            }
        }
        drain(t);

        submit_all(t, prov.tick(t));
        drain(t);

        for (auto& r : reqs) {
            submit_all(t, r.tick(t));
        }
        drain(t);

        for (std::size_t i = 0; i < vehicles.size(); ++i) {
            if (!reqs[i].available(t)) {
                ++vehicles[i].availability_violations;
            }
        }
        if (options.on_tick) {
            options.on_tick(t, prov, reqs);
        }
    }

    const TimeMs end = config.duration;
    const auto history = prov.history();
    MetricsReport report;
    report.seed = config.seed;
    report.duration_s = static_cast<double>(end) / 1000.0;
    report.break_even_ratio = break_even_ratio(config.cpu);
    report.published_ratio = config.published_ratio;

    double closed_sum = 0.0;
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
        const auto& r = reqs[i];
        VehicleMetrics m;
        m.station = r.config().station;
        double vehicle_closed_sum = 0.0;
        std::size_t vehicle_closed = 0;
        for (const auto& e : r.episodes()) {
            EpisodeRow row;
            row.start = e.start;
            row.closed = e.end.has_value();
            row.end = e.end.value_or(end);
            row.reason = reason_name(e.reason);
            if (row.closed) {
                // A provider-side termination inside the episode ended the
                // offloading; the requester only noticed the silence later.
                for (const auto& rec : history) {
                    if (rec.requester == m.station && rec.terminated_at && rec.terminated_reason &&
                        (*rec.terminated_reason == msg::TerminationReason::LeftArea ||
                         *rec.terminated_reason == msg::TerminationReason::CamStale) &&
                        *rec.terminated_at >= e.start && *rec.terminated_at <= row.end) {
                        row.reason = std::string(msg::to_string(*rec.terminated_reason));
                        row.end = *rec.terminated_at;
                        break;
                    }
                }
                const double len = static_cast<double>(row.end - row.start) / 1000.0;
                vehicle_closed_sum += len;
                ++vehicle_closed;
            }
            m.t_off_total_s += static_cast<double>(row.end - row.start) / 1000.0;
            m.episodes.push_back(std::move(row));
        }
        m.mean_t_off_s = vehicle_closed ? vehicle_closed_sum / static_cast<double>(vehicle_closed) : 0.0;
        closed_sum += vehicle_closed_sum;
        report.closed_episodes += vehicle_closed;

        m.t_d_s = static_cast<double>(r.remote_time(end)) / 1000.0;
        for (const auto& [id, st] : r.states()) {
            m.latency_samples.insert(m.latency_samples.end(), st.latency_log.begin(), st.latency_log.end());
        }
        std::stable_sort(m.latency_samples.begin(), m.latency_samples.end(),
                         [](const auto& a, const auto& b) { return a.rx_time < b.rx_time; });
        for (const auto& [reason, count] : r.counters().violations) {
            m.violations[std::string(msg::to_string(reason))] = count;
        }
        m.fallback_count = r.counters().fallbacks;
        m.trajectory_gap_max = r.output_gap_max();
        for (const auto& [id, q] : r.config().qos) {
            m.dt_max = std::max(m.dt_max, q.dt_max);
        }
        for (const auto& spec : r.config().local_services) {
            m.local_period = std::max(m.local_period, spec.period);
        }
        m.time_in_area_s = static_cast<double>(vehicles[i].in_area_ms) / 1000.0;
        m.availability_violations = vehicles[i].availability_violations;
        m.requests_sent = r.counters().requests_sent;
        m.request_timeouts = r.counters().request_timeouts;
        m.mcm_received = r.counters().mcm_received;

        const double t_total = report.duration_s;
        const auto cpu = cpu_usage(t_total, t_total - m.t_d_s, m.t_d_s, config.cpu);
        m.c_with = cpu.c_with;
        m.c_without = cpu.c_without;
        report.t_total_s += t_total;
        report.t_d_s += m.t_d_s;
        report.c_with += cpu.c_with;
        report.c_without += cpu.c_without;
        report.vehicles.push_back(std::move(m));
    }
    report.mean_t_off_s =
        report.closed_episodes ? closed_sum / static_cast<double>(report.closed_episodes) : 0.0;
    report.offloading_pays =
        report.t_total_s > 0.0 && report.t_d_s / report.t_total_s > report.break_even_ratio;
    report.network = network.stats();
    report.provider = prov.counters();
    return report;
}

ScenarioConfig sweep_cell_config(const ScenarioConfig& base, std::size_t n, TimeMs dt_max)
{
    if (base.vehicles.empty()) {
        throw ValidationError("sweep needs a vehicle template");
    }
    if (n == 0) {
        throw ValidationError("sweep vehicle counts must be >= 1");
    }
    ScenarioConfig cfg = base;
    const VehicleConfig tmpl = base.vehicles.front();
    cfg.vehicles.clear();
    for (std::size_t i = 0; i < n; ++i) {
        VehicleConfig v = tmpl;
        v.requester.station = StationId{tmpl.requester.station.value + static_cast<std::uint32_t>(i)};
        v.spawn_offset_m = tmpl.spawn_offset_m - static_cast<double>(i) * base.spawn_spacing_m;
        for (auto& [id, q] : v.requester.qos) {
            q.dt_max = dt_max;
        }
        cfg.vehicles.push_back(std::move(v));
    }
    return cfg;
}

std::vector<SweepCell> sweep(const ScenarioConfig& base, const std::vector<TimeMs>& dt_max_values,
                             const std::vector<std::size_t>& vehicle_counts)
{
    std::vector<SweepCell> cells;
    for (const std::size_t n : vehicle_counts) {
        for (const TimeMs dt : dt_max_values) {
            auto cfg = sweep_cell_config(base, n, dt);
            double sum = 0.0;
            std::uint64_t count = 0;
            for (std::size_t r = 0; r < base.sweep_replications; ++r) {
                cfg.seed = base.seed + r;
                const auto report = run(cfg);
                sum += report.mean_t_off_s * static_cast<double>(report.closed_episodes);
                count += report.closed_episodes;
            }
            cells.push_back(SweepCell{n, dt, count ? sum / static_cast<double>(count) : 0.0, count});
        }
    }
    return cells;
}

// ---------------------------------------------------------------------------

namespace {

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

json counters_json(const net::NetworkStats& s)
{
    return json{{"submitted", s.submitted}, {"dropped", s.dropped}, {"delivered", s.delivered}};
}

json counters_json(const provider::ProviderCounters& c)
{
    return json{{"offers_sent", c.offers_sent},         {"requests_ignored", c.requests_ignored},
                {"requests_accepted", c.requests_accepted}, {"requests_declined", c.requests_declined},
                {"cpm_forwarded", c.cpm_forwarded},     {"cpm_discarded", c.cpm_discarded},
                {"mcm_sent", c.mcm_sent},               {"cams_out_of_order", c.cams_out_of_order}};
}

}  // namespace

std::string report_json(const MetricsReport& report)
{
    json doc;
    doc["seed"] = report.seed;
    doc["duration_s"] = report.duration_s;
    json vehicles = json::array();
    for (const auto& m : report.vehicles) {
        json v;
        v["station"] = m.station.value;
        v["t_off_total_s"] = m.t_off_total_s;
        v["mean_t_off_s"] = m.mean_t_off_s;
        v["t_d_s"] = m.t_d_s;
        json eps = json::array();
        for (const auto& e : m.episodes) {
            eps.push_back(json{{"start_ms", e.start}, {"end_ms", e.end}, {"reason", e.reason}});
        }
        v["episodes"] = std::move(eps);
        json viol = json::object();
        for (const auto& [k, c] : m.violations) {
            viol[k] = c;
        }
        v["violations"] = std::move(viol);
        v["fallback_count"] = m.fallback_count;
        v["trajectory_gap_max_ms"] = m.trajectory_gap_max;
        v["dt_max_ms"] = m.dt_max;
        v["local_period_ms"] = m.local_period;
        v["time_in_area_s"] = m.time_in_area_s;
        v["availability_violations"] = m.availability_violations;
        v["requests_sent"] = m.requests_sent;
        v["request_timeouts"] = m.request_timeouts;
        v["mcm_received"] = m.mcm_received;
        double mean = 0.0;
        double var = 0.0;
        const auto n = static_cast<double>(m.latency_samples.size());
        for (const auto& s : m.latency_samples) {
            mean += static_cast<double>(s.latency_ms);
        }
        if (n > 0) {
            mean /= n;
            for (const auto& s : m.latency_samples) {
                const double d = static_cast<double>(s.latency_ms) - mean;
                var += d * d;
            }
            var /= n;
        }
        v["latency"] = json{{"count", m.latency_samples.size()}, {"mean_ms", mean}, {"std_ms", std::sqrt(var)}};
        v["c_with"] = m.c_with;
        v["c_without"] = m.c_without;
        vehicles.push_back(std::move(v));
    }
    doc["vehicles"] = std::move(vehicles);

    json g;
    g["t_total_s"] = report.t_total_s;
    g["t_d_s"] = report.t_d_s;
    g["t_d_ratio"] = report.t_total_s > 0.0 ? report.t_d_s / report.t_total_s : 0.0;
    g["c_with"] = report.c_with;
    g["c_without"] = report.c_without;
    g["break_even_ratio"] = report.break_even_ratio;
    if (report.published_ratio) {
        g["published_ratio"] = *report.published_ratio;
        if (std::abs(*report.published_ratio - report.break_even_ratio) > 1e-4) {
            g["break_even_note"] =
                "computed ratio differs from the published value; the published figure is not "
                "reproducible from the rounded cost table";
        }
    }
    g["verdict"] = report.offloading_pays ? "offloading pays" : "offloading does not pay";
    g["mean_t_off_s"] = report.mean_t_off_s;
    g["closed_episodes"] = report.closed_episodes;
    doc["global"] = std::move(g);
    doc["network"] = counters_json(report.network);
    doc["provider"] = counters_json(report.provider);
    return doc.dump(2) + "\n";
}

std::string episodes_csv(const MetricsReport& report)
{
    std::ostringstream out;
    out << "vehicle,start_ms,end_ms,reason\n";
    for (const auto& m : report.vehicles) {
        for (const auto& e : m.episodes) {
            out << m.station.value << ',' << e.start << ',' << e.end << ',' << e.reason << '\n';
        }
    }
    return out.str();
}

std::string latency_csv(const MetricsReport& report)
{
    std::ostringstream out;
    out << "vehicle,rx_ms,latency_ms\n";
    for (const auto& m : report.vehicles) {
        for (const auto& s : m.latency_samples) {
            out << m.station.value << ',' << s.rx_time << ',' << s.latency_ms << '\n';
        }
    }
    return out.str();
}

std::string sweep_csv(const std::vector<SweepCell>& cells)
{
    std::ostringstream out;
    out << "n,dt_max_ms,mean_t_off_s\n";
    for (const auto& c : cells) {
        out << c.n << ',' << c.dt_max << ',' << fixed(c.mean_t_off_s, 6) << '\n';
    }
    return out.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw OutputError("cannot open " + path.string() + " for writing");
    }
    f << content;
    if (!f.flush()) {
        throw OutputError("failed writing " + path.string());
    }
}

}  // namespace

void write_outputs(const MetricsReport& report, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw OutputError("cannot create " + dir.string() + ": " + ec.message());
    }
    write_file(dir / "report.json", report_json(report));
    write_file(dir / "episodes.csv", episodes_csv(report));
    write_file(dir / "latency.csv", latency_csv(report));
}

}  // namespace sofof::scenario
