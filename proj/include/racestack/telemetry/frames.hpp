#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace racestack::telemetry
{

struct FrameStamp
{
    std::uint32_t sec = 0;
    std::uint32_t nsec = 0;

    static FrameStamp from_seconds(double t);
    double seconds() const noexcept { return sec + nsec * 1e-9; }
    bool operator==(const FrameStamp&) const = default;
    auto operator<=>(const FrameStamp&) const = default;
};

/// Car to base station. Field order is the wire order.
struct DashboardFrame
{
    FrameStamp stamp;
    std::int8_t cmd_gear = 0;
    std::int8_t actual_gear = 0;
    std::int8_t cmd_throttle = 0;
    std::int8_t actual_throttle = 0;
    std::int16_t cmd_brake = 0;
    std::int16_t actual_brake_front = 0;
    std::int16_t actual_brake_rear = 0;
    std::int16_t cmd_steering_degree = 0;
    std::int16_t actual_steering_degree = 0;
    float heading_error = 0.0f;
    float cross_track_error = 0.0f;
    float velocity_error = 0.0f;
    float target_velocity_mps = 0.0f;
    float actual_velocity_mps = 0.0f;
    float purepursuit_lookahead_distance = 0.0f;
    float purepursuit_lookahead_angle_rad = 0.0f;
    float position_x = 0.0f;
    float position_y = 0.0f;
    float position_z = 0.0f;
    float position_r = 0.0f;
    float position_p = 0.0f;
    float position_yaw = 0.0f;
    float velocity_x = 0.0f;
    float velocity_y = 0.0f;
    float velocity_z = 0.0f;
    float trust = 0.0f;
    std::int8_t status = 0;
    float engine_speed_rpm = 0.0f;
    float vehicle_speed_kmph = 0.0f;

    bool operator==(const DashboardFrame&) const = default;
};

/// Base station to car.
struct BasestationFrame
{
    FrameStamp stamp;
    float v_max = 0.0f;
    std::int8_t raceline_index = 0;
    std::int8_t veh_flag = 0;
    std::int8_t track_flag = 0;
    bool enable_engine = false;
    bool enable_driving = false;
    bool enable_joystick_control = false;
    float target_velocity = 0.0f;
    float steering_cmd = 0.0f;
    float brake_amount = 0.0f;
    bool throttle_lockout = false;

    bool operator==(const BasestationFrame&) const = default;
};

inline constexpr std::size_t kDashboardPayloadSize = 99;
inline constexpr std::size_t kBasestationPayloadSize = 31;
inline constexpr std::size_t kCrcSize = 4;
inline constexpr std::size_t kDashboardFrameSize = kDashboardPayloadSize + kCrcSize;
inline constexpr std::size_t kBasestationFrameSize = kBasestationPayloadSize + kCrcSize;

/// Payload followed by the CRC-32 of the payload, both little-endian.
std::vector<std::uint8_t> encode(const DashboardFrame& f);
std::vector<std::uint8_t> encode(const BasestationFrame& f);

enum class DecodeError
{
    None,
    Length,
    Crc,
};

/// Decoders count rejected datagrams instead of throwing.
class FrameDecoder
{
public:
    std::optional<DashboardFrame> dashboard(std::span<const std::uint8_t> bytes);
    std::optional<BasestationFrame> basestation(std::span<const std::uint8_t> bytes);

    std::uint64_t dropped() const noexcept { return m_dropped; }
    DecodeError last_error() const noexcept { return m_last; }

private:
    bool check(std::span<const std::uint8_t> bytes, std::size_t payload);

    std::uint64_t m_dropped = 0;
    DecodeError m_last = DecodeError::None;
};

nlohmann::ordered_json to_json(const DashboardFrame& f);
nlohmann::ordered_json to_json(const BasestationFrame& f);
/// Throws FormatError on missing or mistyped fields.
DashboardFrame dashboard_from_json(const nlohmann::json& j);
BasestationFrame basestation_from_json(const nlohmann::json& j);

} // namespace racestack::telemetry
