#include "racestack/telemetry/frames.hpp"

#include "racestack/telemetry/bytes.hpp"

#include <boost/crc.hpp>

#include <cmath>

namespace racestack::telemetry
{

namespace
{

template <class Frame, class F>
void visit(Frame& f, F&& fn)
{
    if constexpr (std::is_same_v<std::remove_const_t<Frame>, DashboardFrame>)
    {
        fn("cmd_gear", f.cmd_gear);
        fn("actual_gear", f.actual_gear);
        fn("cmd_throttle", f.cmd_throttle);
        fn("actual_throttle", f.actual_throttle);
        fn("cmd_brake", f.cmd_brake);
        fn("actual_brake_front", f.actual_brake_front);
        fn("actual_brake_rear", f.actual_brake_rear);
        fn("cmd_steering_degree", f.cmd_steering_degree);
        fn("actual_steering_degree", f.actual_steering_degree);
        fn("heading_error", f.heading_error);
        fn("cross_track_error", f.cross_track_error);
        fn("velocity_error", f.velocity_error);
        fn("target_velocity_mps", f.target_velocity_mps);
        fn("actual_velocity_mps", f.actual_velocity_mps);
        fn("purepursuit_lookahead_distance", f.purepursuit_lookahead_distance);
        fn("purepursuit_lookahead_angle_rad", f.purepursuit_lookahead_angle_rad);
        fn("position_x", f.position_x);
        fn("position_y", f.position_y);
        fn("position_z", f.position_z);
        fn("position_r", f.position_r);
        fn("position_p", f.position_p);
        fn("position_yaw", f.position_yaw);
        fn("velocity_x", f.velocity_x);
        fn("velocity_y", f.velocity_y);
        fn("velocity_z", f.velocity_z);
        fn("trust", f.trust);
        fn("status", f.status);
        fn("engine_speed_rpm", f.engine_speed_rpm);
        fn("vehicle_speed_kmph", f.vehicle_speed_kmph);
    }
    else
    {
        fn("v_max", f.v_max);
        fn("raceline_index", f.raceline_index);
        fn("veh_flag", f.veh_flag);
        fn("track_flag", f.track_flag);
        fn("enable_engine", f.enable_engine);
        fn("enable_driving", f.enable_driving);
        fn("enable_joystick_control", f.enable_joystick_control);
        fn("target_velocity", f.target_velocity);
        fn("steering_cmd", f.steering_cmd);
        fn("brake_amount", f.brake_amount);
        fn("throttle_lockout", f.throttle_lockout);
    }
}

template <class Frame>
std::vector<std::uint8_t> encode_frame(const Frame& f)
{
    ByteWriter w;
    w.put(f.stamp.sec);
    w.put(f.stamp.nsec);
    visit(f, [&](const char*, const auto& v) { w.put(v); });
    const auto c = crc32(w.buffer());
    w.put(c);
    return w.take();
}

template <class Frame>
Frame decode_frame(std::span<const std::uint8_t> bytes)
{
    ByteReader r(bytes);
    Frame f;
    f.stamp.sec = r.get<std::uint32_t>();
    f.stamp.nsec = r.get<std::uint32_t>();
    visit(f, [&](const char*, auto& v) { v = r.get<std::remove_reference_t<decltype(v)>>(); });
    return f;
}

template <class Frame>
nlohmann::ordered_json frame_json(const Frame& f)
{
    nlohmann::ordered_json j;
    j["stamp"] = {{"sec", f.stamp.sec}, {"nsec", f.stamp.nsec}};
    visit(f, [&](const char* name, const auto& v) {
        using T = std::remove_cvref_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::int8_t> || std::is_same_v<T, std::int16_t>)
            j[name] = static_cast<int>(v);
        else
            j[name] = v;
    });
    return j;
}

template <class Frame>
Frame frame_from_json(const nlohmann::json& j)
{
    Frame f;
    try
    {
        f.stamp.sec = j.at("stamp").at("sec").get<std::uint32_t>();
        f.stamp.nsec = j.at("stamp").at("nsec").get<std::uint32_t>();
        visit(f, [&](const char* name, auto& v) {
            using T = std::remove_cvref_t<decltype(v)>;
            const auto& x = j.at(name);
            if constexpr (std::is_same_v<T, bool>)
            {
                v = x.get<bool>();
            }
            else if constexpr (std::is_integral_v<T>)
            {
                const auto n = x.get<long long>();
                if (n < std::numeric_limits<T>::min() || n > std::numeric_limits<T>::max())
                    throw FormatError(std::string("field '") + name + "' out of range");
                v = static_cast<T>(n);
            }
            else
            {
                v = static_cast<T>(x.get<double>());
            }
        });
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("bad frame json: ") + e.what());
    }
    return f;
}

} // namespace

std::uint32_t crc32(std::span<const std::uint8_t> data)
{
    boost::crc_32_type crc;
    crc.process_bytes(data.data(), data.size());
    return crc.checksum();
}

FrameStamp FrameStamp::from_seconds(double t)
{
    FrameStamp s;
    if (!(t > 0.0))
        return s;
    const double whole = std::floor(t);
    s.sec = static_cast<std::uint32_t>(whole);
    auto ns = static_cast<std::int64_t>(std::llround((t - whole) * 1e9));
    if (ns >= 1000000000)
    {
        ++s.sec;
        ns -= 1000000000;
    }
    s.nsec = static_cast<std::uint32_t>(ns);
    return s;
}

std::vector<std::uint8_t> encode(const DashboardFrame& f)
{
    return encode_frame(f);
}

std::vector<std::uint8_t> encode(const BasestationFrame& f)
{
    return encode_frame(f);
}

bool FrameDecoder::check(std::span<const std::uint8_t> bytes, std::size_t payload)
{
    if (bytes.size() != payload + kCrcSize)
    {
        m_last = DecodeError::Length;
        ++m_dropped;
        return false;
    }
    ByteReader r(bytes.subspan(payload));
    if (r.get<std::uint32_t>() != crc32(bytes.first(payload)))
    {
        m_last = DecodeError::Crc;
        ++m_dropped;
        return false;
    }
    m_last = DecodeError::None;
    return true;
}

std::optional<DashboardFrame> FrameDecoder::dashboard(std::span<const std::uint8_t> bytes)
{
    if (!check(bytes, kDashboardPayloadSize))
        return std::nullopt;
    return decode_frame<DashboardFrame>(bytes.first(kDashboardPayloadSize));
}

std::optional<BasestationFrame> FrameDecoder::basestation(std::span<const std::uint8_t> bytes)
{
    if (!check(bytes, kBasestationPayloadSize))
        return std::nullopt;
    return decode_frame<BasestationFrame>(bytes.first(kBasestationPayloadSize));
}

nlohmann::ordered_json to_json(const DashboardFrame& f)
{
    return frame_json(f);
}

nlohmann::ordered_json to_json(const BasestationFrame& f)
{
    return frame_json(f);
}

DashboardFrame dashboard_from_json(const nlohmann::json& j)
{
    return frame_from_json<DashboardFrame>(j);
}

BasestationFrame basestation_from_json(const nlohmann::json& j)
{
    return frame_from_json<BasestationFrame>(j);
}

} // namespace racestack::telemetry
