#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sofof/geo.hpp"
#include "sofof/types.hpp"

/// Messages exchanged between service requesters and providers, and their
/// line-delimited JSON wire format.
namespace sofof::msg {

/// Position beacon of a station; the CAM payload.
struct VehicleState {
    StationId station;
    TimeMs timestamp{0};
    geo::Point2 position;
    double speed{0.0};    ///< m/s, >= 0
    double heading{0.0};  ///< radians in [0, 2*pi)

    friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct OfferBody {
    geo::Point2 provider_position;
    std::vector<ServiceId> services;
    std::vector<std::string> map_ids;

    friend bool operator==(const OfferBody&, const OfferBody&) = default;
};

struct RequestBody {
    std::vector<ServiceId> services;
    geo::Route planned_route{{geo::Point2{}}};
    std::string map_id;
    double current_speed{0.0};

    friend bool operator==(const RequestBody&, const RequestBody&) = default;
};

struct Track {
    std::uint32_t object_id{0};
    geo::Point2 position;
    double speed{0.0};
    double heading{0.0};

    friend bool operator==(const Track&, const Track&) = default;
};

/// Environment model of the sender.
struct CpmBody {
    std::vector<Track> tracks;

    friend bool operator==(const CpmBody&, const CpmBody&) = default;
};

struct TrajectoryPoint {
    TimeMs t{0};
    geo::Point2 position;
    double speed{0.0};

    friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

/// Suggested trajectory produced by a remote service.
struct McmBody {
    ServiceId service;
    TimeMs creation_time{0};
    std::vector<TrajectoryPoint> trajectory;

    friend bool operator==(const McmBody&, const McmBody&) = default;
};

enum class TerminationReason { QosLatency, QosInterArrival, LeftArea, CamStale, Shutdown };

std::string_view to_string(TerminationReason reason) noexcept;
std::optional<TerminationReason> termination_reason_from(std::string_view name) noexcept;

struct TerminationBody {
    ServiceId service;
    TerminationReason reason{TerminationReason::Shutdown};

    friend bool operator==(const TerminationBody&, const TerminationBody&) = default;
};

enum class MessageKind { Cam, Offer, Request, Cpm, Mcm, Termination };

std::string_view to_string(MessageKind kind) noexcept;

/// Alternatives are ordered like MessageKind so the payload determines the kind.
using Payload = std::variant<VehicleState, OfferBody, RequestBody, CpmBody, McmBody, TerminationBody>;

struct Envelope {
    StationId src;
    std::optional<StationId> dst;  ///< nullopt means broadcast
    TimeMs sent_at{0};
    Payload payload;

    MessageKind kind() const noexcept { return static_cast<MessageKind>(payload.index()); }
    bool is_broadcast() const noexcept { return !dst.has_value(); }

    friend bool operator==(const Envelope&, const Envelope&) = default;
};

Envelope make_cam(TimeMs sent_at, const VehicleState& state);
Envelope make_unicast(StationId src, StationId dst, TimeMs sent_at, Payload payload);

/// Malformed wire syntax.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what), byte_offset_(byte_offset)
    {
    }
    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

/// Syntactically valid input that violates the schema or a type invariant.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field))
    {
    }
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Throws SchemaError naming the first offending field.
void validate(const Envelope& env);

/// One JSON object terminated by '\n'. Throws SchemaError for invalid input.
std::string encode(const Envelope& env);

/// Accepts exactly one encoded line (the trailing '\n' is optional).
Envelope decode(std::string_view bytes);

}  // namespace sofof::msg
