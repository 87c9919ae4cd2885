#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <tuple>
#include <vector>

#include "sofof/messages.hpp"
#include "sofof/types.hpp"

/// Deterministic discrete-event message transport with a congestion-dependent
/// latency model.
namespace sofof::net {

/// Latency per message: lognormal on top of `shift`, moment-matched to a mean
/// and standard deviation that grow with the number of active offloading
/// sessions beyond the first. Samples are truncated below at 0.1 ms.
struct LatencyModel {
    double base_mean{10.54};
    double base_std{9.83};
    double per_session_mean{2.0};
    double per_session_std{3.0};
    double drop_prob{0.0};
    double shift{0.0};

    void validate() const;

    double mean_for(std::size_t n_active) const noexcept;
    double std_for(std::size_t n_active) const noexcept;

    friend bool operator==(const LatencyModel&, const LatencyModel&) = default;
};

inline constexpr double kMinLatencyMs = 0.1;

struct LognormalParams {
    double mu{0.0};
    double sigma{0.0};
};

/// sigma^2 = ln(1 + s^2/m^2), mu = ln m - sigma^2/2.
LognormalParams match_lognormal(double mean, double std);

/// One latency draw in ms for the given congestion level.
double sample_latency(const LatencyModel& model, std::size_t n_active, std::mt19937_64& rng);

/// Scheduled latency rounding: half-up to whole milliseconds.
TimeMs round_latency(double latency_ms) noexcept;

struct Delivery {
    TimeMs deliver_at{0};
    StationId receiver;
    msg::Envelope env;
};

/// Verdict of a fault hook for one (message, receiver) pair.
struct FaultAction {
    bool drop{false};
    std::optional<double> latency_ms;  ///< replaces the sampled latency
};

using FaultHook =
    std::function<std::optional<FaultAction>(TimeMs now, const msg::Envelope& env, StationId receiver)>;

struct NetworkStats {
    std::uint64_t submitted{0};
    std::uint64_t dropped{0};
    std::uint64_t delivered{0};
};

class Network {
public:
    Network(LatencyModel model, std::uint64_t seed, bool per_link_fifo = false);

    /// Registers a receiver of broadcast messages.
    void attach(StationId station);

    /// Schedules `env` for delivery. Broadcasts fan out to every attached
    /// station except the sender. Returns the earliest scheduled delivery, or
    /// nullopt when every copy was dropped.
    std::optional<TimeMs> submit(TimeMs now, const msg::Envelope& env, std::size_t n_active_sessions);

    /// Pops every delivery with deliver_at <= until, in (deliver_at, seq) order.
    std::vector<Delivery> step(TimeMs until);

    std::optional<TimeMs> next_delivery() const;
    bool empty() const noexcept { return queue_.empty(); }

    void set_fault_hook(FaultHook hook) { fault_hook_ = std::move(hook); }

    const LatencyModel& model() const noexcept { return model_; }
    const NetworkStats& stats() const noexcept { return stats_; }

private:
    struct Pending {
        TimeMs deliver_at;
        std::uint64_t seq;
        Delivery delivery;
    };
    struct Later {
        bool operator()(const Pending& a, const Pending& b) const noexcept
        {
            return std::tie(a.deliver_at, a.seq) > std::tie(b.deliver_at, b.seq);
        }
    };
    using LinkKey = std::tuple<std::uint32_t, std::uint32_t, int>;

    std::optional<TimeMs> schedule(TimeMs now, const msg::Envelope& env, StationId receiver,
                                   std::size_t n_active);
    std::mt19937_64 message_rng(const msg::Envelope& env, StationId receiver);

    LatencyModel model_;
    std::uint64_t seed_;
    bool per_link_fifo_;
    std::vector<StationId> attached_;
    std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
    std::uint64_t next_seq_{0};
    std::map<LinkKey, TimeMs> last_delivery_;
    // Occurrence counter per (sent_at, link, kind) to key the per-message draw.
    std::map<std::tuple<TimeMs, std::uint32_t, std::uint32_t, int>, std::uint32_t> occurrences_;
    FaultHook fault_hook_;
    NetworkStats stats_;
};

}  // namespace sofof::net
