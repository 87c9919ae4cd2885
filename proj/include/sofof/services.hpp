#pragma once

#include <map>
#include <optional>
#include <vector>

#include "sofof/geo.hpp"
#include "sofof/messages.hpp"
#include "sofof/types.hpp"

namespace sofof::svc {

/// Static description of a periodic service and its CPU cost labels
/// (percent of one core).
struct ServiceSpec {
    ServiceId id;
    TimeMs period{50};
    double cpu_cost_active{0.0};
    double cpu_cost_deactivated{0.0};

    void validate() const;

    friend bool operator==(const ServiceSpec&, const ServiceSpec&) = default;
};

struct PlannerInput {
    msg::VehicleState ego;
    std::vector<msg::Track> env;
    geo::Route route;
};

/// Deterministic stand-in for the trajectory planner: constant-speed motion
/// along the route polyline from the point closest to the ego position.
/// Emits one point per `step` up to `horizon`, timestamped from
/// `ego.timestamp`. Speed ramps linearly to zero over the last 10 m of the
/// route. `env` is accepted but not used.
std::vector<msg::TrajectoryPoint> plan(const PlannerInput& input, TimeMs horizon, TimeMs step);

struct ServiceHandle {
    std::size_t slot{0};

    friend auto operator<=>(const ServiceHandle&, const ServiceHandle&) = default;
};

/// Owns the service instances of one actor (a provider session or a
/// requester), schedules their periodic outputs and integrates their CPU
/// cost labels over time.
class ServiceHost {
public:
    /// Schedules the instance with first output at `now + period`, or at
    /// `now` when `immediate` is set. Activating an active instance is a no-op.
    ServiceHandle activate(const ServiceSpec& spec, TimeMs now, bool immediate = false);

    /// Stops outputs; unknown or inactive handles are ignored.
    void deactivate(ServiceHandle handle, TimeMs now);

    std::optional<ServiceHandle> find(const ServiceId& id) const;
    bool is_active(ServiceHandle handle) const;
    const ServiceSpec& spec(ServiceHandle handle) const;

    /// Due times in (previous call, now] for an active instance; advances
    /// the schedule.
    std::vector<TimeMs> take_due(ServiceHandle handle, TimeMs now);

    /// Next scheduled output, if active.
    std::optional<TimeMs> next_due(ServiceHandle handle) const;

    /// Integral of the CPU cost labels of all known instances from their first
    /// activation up to `now`, in percent-core-seconds.
    double cpu_usage(TimeMs now) const;

    std::size_t size() const noexcept { return instances_.size(); }

private:
    struct Instance {
        ServiceSpec spec;
        bool active{false};
        TimeMs next_due{0};
        TimeMs meter_since{0};
        double meter_accum{0.0};  // percent * ms
    };

    void settle_meter(Instance& inst, TimeMs now);

    std::vector<Instance> instances_;
};

}  // namespace sofof::svc
