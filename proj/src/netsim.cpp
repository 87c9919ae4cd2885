#include "sofof/netsim.hpp"

#include <algorithm>
#include <cmath>

namespace sofof::net {
namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) noexcept { return splitmix64(h ^ splitmix64(v)); }

}  // namespace

void LatencyModel::validate() const
{
    if (!(base_mean > 0.0) || !std::isfinite(base_mean)) {
        throw ValidationError("latency.base_mean must be > 0");
    }
    if (!(base_std >= 0.0) || !(per_session_std >= 0.0) || !std::isfinite(base_std) ||
        !std::isfinite(per_session_std)) {
        throw ValidationError("latency standard deviations must be >= 0");
    }
    if (!std::isfinite(per_session_mean)) {
        throw ValidationError("latency.per_session_mean must be finite");
    }
    if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) {
        throw ValidationError("latency.drop_prob must lie in [0, 1]");
    }
    if (!(shift >= 0.0) || !(shift < base_mean)) {
        throw ValidationError("latency.shift must lie in [0, base_mean)");
    }
}

double LatencyModel::mean_for(std::size_t n_active) const noexcept
{
    const double extra = n_active > 1 ? static_cast<double>(n_active - 1) : 0.0;
    return base_mean + per_session_mean * extra;
}

double LatencyModel::std_for(std::size_t n_active) const noexcept
{
    const double extra = n_active > 1 ? static_cast<double>(n_active - 1) : 0.0;
    return base_std + per_session_std * extra;
}

LognormalParams match_lognormal(double mean, double std)
{
    if (!(mean > 0.0) || !(std >= 0.0)) {
        throw DomainError("lognormal moment matching needs mean > 0 and std >= 0");
    }
    const double sigma2 = std::log1p((std * std) / (mean * mean));
    return LognormalParams{std::log(mean) - sigma2 / 2.0, std::sqrt(sigma2)};
}

double sample_latency(const LatencyModel& model, std::size_t n_active, std::mt19937_64& rng)
{
    const double mean = model.mean_for(n_active) - model.shift;
    const double std = model.std_for(n_active);
    double latency = model.shift + mean;
    if (std > 0.0) {
        const auto p = match_lognormal(mean, std);
        std::lognormal_distribution<double> dist(p.mu, p.sigma);
        latency = model.shift + dist(rng);
    }
    return std::max(latency, kMinLatencyMs);
}

TimeMs round_latency(double latency_ms) noexcept
{
    return static_cast<TimeMs>(std::floor(latency_ms + 0.5));
}

Network::Network(LatencyModel model, std::uint64_t seed, bool per_link_fifo)
    : model_(model), seed_(seed), per_link_fifo_(per_link_fifo)
{
    model_.validate();
}

void Network::attach(StationId station)
{
    if (std::find(attached_.begin(), attached_.end(), station) == attached_.end()) {
        attached_.push_back(station);
    }
}

std::optional<TimeMs> Network::submit(TimeMs now, const msg::Envelope& env,
                                      std::size_t n_active_sessions)
{
    ++stats_.submitted;
    if (!env.is_broadcast()) {
        return schedule(now, env, *env.dst, n_active_sessions);
    }
    std::optional<TimeMs> earliest;
    for (const StationId receiver : attached_) {
        if (receiver == env.src) {
            continue;
        }
        const auto at = schedule(now, env, receiver, n_active_sessions);
        if (at && (!earliest || *at < *earliest)) {
            earliest = at;
        }
    }
    return earliest;
}

std::mt19937_64 Network::message_rng(const msg::Envelope& env, StationId receiver)
{
    const auto kind = static_cast<int>(env.kind());
    const auto key = std::make_tuple(env.sent_at, env.src.value, receiver.value, kind);
    while (!occurrences_.empty() && std::get<0>(occurrences_.begin()->first) < env.sent_at - 1000) {
        occurrences_.erase(occurrences_.begin());
    }
    const std::uint32_t occurrence = occurrences_[key]++;

    std::uint64_t h = splitmix64(seed_);
    h = mix(h, env.src.value);
    h = mix(h, receiver.value);
    h = mix(h, static_cast<std::uint64_t>(kind));
    h = mix(h, static_cast<std::uint64_t>(env.sent_at));
    h = mix(h, occurrence);
    return std::mt19937_64(h);
}

std::optional<TimeMs> Network::schedule(TimeMs now, const msg::Envelope& env, StationId receiver,
                                        std::size_t n_active)
{
    // Each (link, kind, send time, occurrence) gets its own stream: draws on one
    // link do not depend on traffic elsewhere, and configurations that differ
    // only in later behaviour share the draws of identical messages.
    auto rng = message_rng(env, receiver);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double latency = sample_latency(model_, n_active, rng);

    if (fault_hook_) {
        if (const auto action = fault_hook_(now, env, receiver)) {
            if (action->drop) {
                ++stats_.dropped;
                return std::nullopt;
            }
            if (action->latency_ms) {
                latency = *action->latency_ms;
            }
        }
    }
    if (u < model_.drop_prob) {
        ++stats_.dropped;
        return std::nullopt;
    }

    TimeMs deliver_at = now + round_latency(latency);
    if (per_link_fifo_) {
        auto& last = last_delivery_[LinkKey{env.src.value, receiver.value, static_cast<int>(env.kind())}];
        deliver_at = std::max(deliver_at, last);
        last = deliver_at;
    }
    queue_.push(Pending{deliver_at, next_seq_++, Delivery{deliver_at, receiver, env}});
    return deliver_at;
}

std::vector<Delivery> Network::step(TimeMs until)
{
    std::vector<Delivery> out;
    while (!queue_.empty() && queue_.top().deliver_at <= until) {
        out.push_back(queue_.top().delivery);
        queue_.pop();
    }
    stats_.delivered += out.size();
    return out;
}

std::optional<TimeMs> Network::next_delivery() const
{
    if (queue_.empty()) {
        return std::nullopt;
    }
    return queue_.top().deliver_at;
}

}  // namespace sofof::net
