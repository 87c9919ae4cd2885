#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sofof/geo.hpp"
#include "sofof/messages.hpp"
#include "sofof/netsim.hpp"
#include "sofof/provider.hpp"
#include "sofof/requester.hpp"
#include "sofof/types.hpp"

/// Closed-loop simulation of vehicles, one provider and the network on a
/// shared millisecond clock, plus the CPU accounting built on its metrics.
namespace sofof::scenario {

/// CPU cost labels in percent of one core.
struct CpuCosts {
    double tpl_active{19.5};
    double tpl_deactivated{8.5};
    double sofof_sr{0.96};

    void validate() const;
};

struct CpuUsage {
    double c_with{0.0};     ///< percent-core-seconds
    double c_without{0.0};  ///< percent-core-seconds
};

/// c_without = t_total * a, c_with = t_total * s + t_active * a + t_deactivated * d.
/// Throws DomainError for negative times or when the two parts do not add
/// up to t_total.
CpuUsage cpu_usage(double t_total, double t_active_local, double t_deactivated, const CpuCosts& costs);

/// Fraction of time the local service must be deactivated for offloading
/// to reduce total CPU usage: s / (a - d). DomainError unless a > d.
double break_even_ratio(const CpuCosts& costs);

/// Closed polyline traversed repeatedly; the last waypoint connects back to
/// the first.
class Loop {
public:
    explicit Loop(geo::Route route);

    double length() const noexcept { return length_; }
    const geo::Route& route() const noexcept { return route_; }

    /// Position at arc length `s`, wrapped onto the loop.
    geo::Point2 position(double s) const noexcept;
    double heading(double s) const noexcept;

    /// Route from arc length `s` over the next `distance` meters, with a
    /// point every `resolution` meters plus every loop vertex passed.
    geo::Route lookahead(double s, double distance, double resolution) const;

private:
    std::size_t segment_at(double wrapped) const noexcept;
    double wrap(double s) const noexcept;

    geo::Route route_;
    std::vector<geo::Point2> pts_;  // closed: pts_.back() == pts_.front() when length > 0
    std::vector<double> cum_;
    double length_{0.0};
};

struct VehicleConfig {
    requester::RequesterConfig requester;
    geo::Route route{{geo::Point2{}}};
    double spawn_offset_m{0.0};
    double speed_mps{10.0};
    TimeMs cam_period{100};
    TimeMs cpm_period{100};

    void validate() const;
};

struct ScenarioConfig {
    std::uint64_t seed{1};
    TimeMs duration{300000};
    TimeMs tick{10};
    provider::ProviderConfig provider;
    std::vector<VehicleConfig> vehicles;
    net::LatencyModel latency;
    bool per_link_fifo{false};
    CpuCosts cpu;
    /// Ratio printed alongside the computed break-even ratio for comparison.
    std::optional<double> published_ratio;
    /// Length and waypoint spacing of the route handed to the requester.
    double lookahead_m{1000.0};
    double route_resolution_m{10.0};
    /// Spacing between replicated vehicles in sweeps.
    double spawn_spacing_m{25.0};
    /// Sweep cells pool the episodes of this many runs with seeds
    /// seed, seed + 1, ...
    std::size_t sweep_replications{1};
    /// Pass every message through the wire codec.
    bool wire_roundtrip{true};

    void validate() const;
};

/// One offloading episode: from the first remote output to its end, which is
/// the provider-side termination (LeftArea, CamStale) when one falls inside
/// the episode and the requester's fallback otherwise.
struct EpisodeRow {
    TimeMs start{0};
    TimeMs end{0};
    std::string reason;  ///< "Open" for episodes still running at the end
    bool closed{false};
};

struct VehicleMetrics {
    StationId station;
    std::vector<EpisodeRow> episodes;
    double t_off_total_s{0.0};
    double mean_t_off_s{0.0};  ///< over closed episodes
    double t_d_s{0.0};
    std::vector<requester::LatencySample> latency_samples;
    std::map<std::string, std::uint64_t> violations;
    std::uint64_t fallback_count{0};
    TimeMs trajectory_gap_max{0};
    TimeMs dt_max{0};
    TimeMs local_period{0};
    double time_in_area_s{0.0};
    std::uint64_t availability_violations{0};
    std::uint64_t requests_sent{0};
    std::uint64_t request_timeouts{0};
    std::uint64_t mcm_received{0};
    double c_with{0.0};
    double c_without{0.0};
};

struct MetricsReport {
    std::uint64_t seed{0};
    double duration_s{0.0};
    std::vector<VehicleMetrics> vehicles;
    double t_total_s{0.0};  ///< summed over vehicles
    double t_d_s{0.0};      ///< summed over vehicles
    double c_with{0.0};
    double c_without{0.0};
    double break_even_ratio{0.0};
    std::optional<double> published_ratio;
    bool offloading_pays{false};
    double mean_t_off_s{0.0};  ///< over all closed episodes
    std::uint64_t closed_episodes{0};
    net::NetworkStats network;
    provider::ProviderCounters provider;
};

struct TraceEvent {
    enum class Type { Submit, Deliver };
    Type type{Type::Submit};
    TimeMs at{0};
    StationId receiver;  ///< Deliver only
    msg::Envelope env;
};

struct RunOptions {
    net::FaultHook fault_hook;
    std::function<void(const TraceEvent&)> observer;
    /// Called after every tick with the current state of the actors.
    std::function<void(TimeMs, const provider::Provider&, const std::vector<requester::Requester>&)>
        on_tick;
};

MetricsReport run(const ScenarioConfig& config, const RunOptions& options = {});

struct SweepCell {
    std::size_t n{0};
    TimeMs dt_max{0};
    double mean_t_off_s{0.0};
    std::uint64_t closed_episodes{0};
};

/// Configuration of one sweep cell: `n` copies of the first vehicle spaced
/// `spawn_spacing_m` apart, all with inter-arrival bound `dt_max`. Every
/// cell keeps the base seed, so cells share their random draws wherever
/// their message sequences agree.
ScenarioConfig sweep_cell_config(const ScenarioConfig& base, std::size_t n, TimeMs dt_max);

/// Mean episode length per cell, pooled over `sweep_replications` seeds.
std::vector<SweepCell> sweep(const ScenarioConfig& base, const std::vector<TimeMs>& dt_max_values,
                             const std::vector<std::size_t>& vehicle_counts);

std::string report_json(const MetricsReport& report);
std::string episodes_csv(const MetricsReport& report);
std::string latency_csv(const MetricsReport& report);
std::string sweep_csv(const std::vector<SweepCell>& cells);

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Writes report.json, episodes.csv and latency.csv into `dir`.
void write_outputs(const MetricsReport& report, const std::filesystem::path& dir);

}  // namespace sofof::scenario
