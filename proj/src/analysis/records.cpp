#include "racestack/analysis/records.hpp"

#include "racestack/errors.hpp"
#include "racestack/telemetry/bytes.hpp"

#include <json.hpp>

namespace racestack::analysis
{

using telemetry::ByteReader;
using telemetry::ByteWriter;

namespace
{

void put_vec(ByteWriter& w, const Eigen::Vector3d& v)
{
    w.put<double>(v.x());
    w.put<double>(v.y());
    w.put<double>(v.z());
}

Eigen::Vector3d get_vec(ByteReader& r)
{
    Eigen::Vector3d v;
    v.x() = r.get<double>();
    v.y() = r.get<double>();
    v.z() = r.get<double>();
    return v;
}

void finish(const ByteReader& r, const char* what)
{
    if (r.remaining() != 0)
        throw FormatError(std::string(what) + ": trailing bytes");
}

void put_doubles(ByteWriter& w, const std::vector<double>& v)
{
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
    for (double d : v)
        w.put<double>(d);
}

std::vector<double> get_doubles(ByteReader& r)
{
    const auto n = r.get<std::uint32_t>();
    if (n > r.remaining() / 8)
        throw FormatError("raceline record: bad length");
    std::vector<double> v(n);
    for (auto& d : v)
        d = r.get<double>();
    return v;
}

} // namespace

PathSummary summarize(const planner::LocalPath& p, std::size_t reference_index)
{
    PathSummary s;
    s.s_star = p.s_star;
    s.v_cap = p.v_cap;
    if (!p.points.empty())
        s.v_ref = p.points[std::min(reference_index, p.points.size() - 1)].v;
    s.status = p.status;
    s.cross_track = p.cross_track;
    s.heading_error = p.heading_error;
    s.raceline = p.raceline;
    s.stamp = p.stamp;
    s.points = static_cast<std::uint16_t>(p.points.size());
    return s;
}

std::vector<std::uint8_t> encode(const plant::PlantState& s)
{
    ByteWriter w;
    for (double d : {s.x, s.y, s.yaw, s.v_x, s.v_y, s.yaw_rate, s.roll, s.engine_rpm})
        w.put<double>(d);
    w.put<std::int8_t>(static_cast<std::int8_t>(s.gear));
    for (double d : {s.road_wheel_angle, s.steering_actual, s.brake_pressure_front, s.brake_pressure_rear,
                     s.throttle_actual, s.a_x, s.a_y})
        w.put<double>(d);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.lowlevel));
    w.put<std::uint8_t>(s.last_counter);
    w.put<double>(s.time);
    return w.take();
}

plant::PlantState decode_plant(std::span<const std::uint8_t> b)
{
    ByteReader r(b);
    plant::PlantState s;
    for (double* d : {&s.x, &s.y, &s.yaw, &s.v_x, &s.v_y, &s.yaw_rate, &s.roll, &s.engine_rpm})
        *d = r.get<double>();
    s.gear = r.get<std::int8_t>();
    for (double* d : {&s.road_wheel_angle, &s.steering_actual, &s.brake_pressure_front, &s.brake_pressure_rear,
                      &s.throttle_actual, &s.a_x, &s.a_y})
        *d = r.get<double>();
    const auto ll = r.get<std::uint8_t>();
    if (ll > static_cast<std::uint8_t>(plant::LowLevelState::Emergency))
        throw FormatError("plant record: bad low-level state");
    s.lowlevel = static_cast<plant::LowLevelState>(ll);
    s.last_counter = r.get<std::uint8_t>();
    s.time = r.get<double>();
    finish(r, "plant record");
    return s;
}

std::vector<std::uint8_t> encode(const plant::ImuSample& s)
{
    ByteWriter w;
    put_vec(w, s.gyro);
    put_vec(w, s.accel);
    w.put<double>(s.stamp);
    return w.take();
}

plant::ImuSample decode_imu(std::span<const std::uint8_t> b)
{
    ByteReader r(b);
    plant::ImuSample s;
    s.gyro = get_vec(r);
    s.accel = get_vec(r);
    s.stamp = r.get<double>();
    finish(r, "imu record");
    return s;
}

std::vector<std::uint8_t> encode(const plant::GnssFix& s)
{
    ByteWriter w;
    put_vec(w, s.position);
    w.put<double>(s.heading);
    put_vec(w, s.variance);
    w.put<double>(s.heading_variance);
    w.put<std::int8_t>(static_cast<std::int8_t>(s.status));
    w.put<double>(s.stamp);
    return w.take();
}

plant::GnssFix decode_gnss(std::span<const std::uint8_t> b)
{
    ByteReader r(b);
    plant::GnssFix s;
    s.position = get_vec(r);
    s.heading = r.get<double>();
    s.variance = get_vec(r);
    s.heading_variance = r.get<double>();
    s.status = static_cast<plant::RtkStatus>(r.get<std::int8_t>());
    s.stamp = r.get<double>();
    finish(r, "gnss record");
    return s;
}

std::vector<std::uint8_t> encode(const estimation::EstimatedState& s)
{
    ByteWriter w;
    put_vec(w, s.position);
    put_vec(w, s.rpy);
    put_vec(w, s.velocity);
    put_vec(w, s.angular_velocity);
    w.put<double>(s.slip_angle_front);
    w.put<double>(s.slip_angle_rear);
    w.put<double>(s.trust);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.status));
    w.put<double>(s.stamp);
    return w.take();
}

estimation::EstimatedState decode_state(std::span<const std::uint8_t> b)
{
    ByteReader r(b);
    estimation::EstimatedState s;
    s.position = get_vec(r);
    s.rpy = get_vec(r);
    s.velocity = get_vec(r);
    s.angular_velocity = get_vec(r);
    s.slip_angle_front = r.get<double>();
    s.slip_angle_rear = r.get<double>();
    s.trust = r.get<double>();
    const auto st = r.get<std::uint8_t>();
    if (st > static_cast<std::uint8_t>(estimation::EstimatorStatus::Failed))
        throw FormatError("state record: bad status");
    s.status = static_cast<estimation::EstimatorStatus>(st);
    s.stamp = r.get<double>();
    finish(r, "state record");
    return s;
}

std::vector<std::uint8_t> encode(const PathSummary& s)
{
    ByteWriter w;
    w.put<double>(s.s_star);
    w.put<double>(s.v_cap);
    w.put<double>(s.v_ref);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.status));
    w.put<double>(s.cross_track);
    w.put<double>(s.heading_error);
    w.put<std::int8_t>(static_cast<std::int8_t>(s.raceline));
    w.put<double>(s.stamp);
    w.put<std::uint16_t>(s.points);
    return w.take();
}

PathSummary decode_path(std::span<const std::uint8_t> b)
{
    ByteReader r(b);
    PathSummary s;
    s.s_star = r.get<double>();
    s.v_cap = r.get<double>();
    s.v_ref = r.get<double>();
    s.status = static_cast<planner::PathStatus>(r.get<std::uint8_t>());
    s.cross_track = r.get<double>();
    s.heading_error = r.get<double>();
    s.raceline = r.get<std::int8_t>();
    s.stamp = r.get<double>();
    s.points = r.get<std::uint16_t>();
    finish(r, "path record");
    return s;
}

std::vector<std::uint8_t> encode(const control::ControllerOutput& s)
{
    ByteWriter w;
    w.put<double>(s.throttle);
    w.put<double>(s.brake);
    w.put<double>(s.steering);
    w.put<std::int8_t>(static_cast<std::int8_t>(s.gear));
    w.put<std::int8_t>(static_cast<std::int8_t>(s.source));
    w.put<std::uint8_t>(s.rolling_counter);
    for (double d : {s.v_ref, s.velocity_error, s.lookahead_distance, s.lookahead_angle, s.heading_error,
                     s.cross_track, s.stamp})
        w.put<double>(d);
    return w.take();
}

control::ControllerOutput decode_command(std::span<const std::uint8_t> b)
{
    ByteReader r(b);
    control::ControllerOutput s;
    s.throttle = r.get<double>();
    s.brake = r.get<double>();
    s.steering = r.get<double>();
    s.gear = r.get<std::int8_t>();
    s.source = static_cast<control::CommandSource>(r.get<std::int8_t>());
    s.rolling_counter = r.get<std::uint8_t>();
    for (double* d : {&s.v_ref, &s.velocity_error, &s.lookahead_distance, &s.lookahead_angle, &s.heading_error,
                      &s.cross_track, &s.stamp})
        *d = r.get<double>();
    finish(r, "command record");
    return s;
}

std::vector<std::uint8_t> encode(const planner::FlagState& s)
{
    ByteWriter w;
    w.put<std::int8_t>(static_cast<std::int8_t>(s.veh_flag));
    w.put<std::int8_t>(static_cast<std::int8_t>(s.track_flag));
    w.put<double>(s.v_max_remote);
    w.put<std::int8_t>(static_cast<std::int8_t>(s.active_raceline));
    w.put<double>(s.last_remote_stamp);
    return w.take();
}

planner::FlagState decode_flags(std::span<const std::uint8_t> b)
{
    ByteReader r(b);
    planner::FlagState s;
    s.veh_flag = static_cast<planner::VehicleFlag>(r.get<std::int8_t>());
    s.track_flag = static_cast<planner::TrackFlag>(r.get<std::int8_t>());
    s.v_max_remote = r.get<double>();
    s.active_raceline = r.get<std::int8_t>();
    s.last_remote_stamp = r.get<double>();
    finish(r, "flag record");
    return s;
}

std::vector<std::uint8_t> encode(const TextEvent& s)
{
    ByteWriter w;
    w.put_string(s.source);
    w.put_string(s.message);
    return w.take();
}

TextEvent decode_event(std::span<const std::uint8_t> b)
{
    ByteReader r(b);
    TextEvent e;
    e.source = r.get_string();
    e.message = r.get_string();
    finish(r, "event record");
    return e;
}

std::vector<std::uint8_t> encode(const safety::Verdict& v)
{
    const auto line = safety::to_json_line(v);
    return {line.begin(), line.end()};
}

safety::Verdict decode_verdict(std::span<const std::uint8_t> b)
{
    return safety::verdict_from_json_line(std::string(b.begin(), b.end()));
}

std::vector<std::uint8_t> encode(const track::RacelineSamples& s)
{
    ByteWriter w;
    w.put<std::uint8_t>(s.closed ? 1 : 0);
    put_doubles(w, s.x);
    put_doubles(w, s.y);
    put_doubles(w, s.v_ref);
    put_doubles(w, s.bank);
    return w.take();
}

track::RacelineSamples decode_raceline(std::span<const std::uint8_t> b)
{
    ByteReader r(b);
    track::RacelineSamples s;
    s.closed = r.get<std::uint8_t>() != 0;
    s.x = get_doubles(r);
    s.y = get_doubles(r);
    s.v_ref = get_doubles(r);
    s.bank = get_doubles(r);
    finish(r, "raceline record");
    return s;
}

RunData decode_run(const std::vector<telemetry::LogRecord>& records)
{
    RunData d;
    telemetry::FrameDecoder frames;
    for (const auto& rec : records)
    {
        const std::span<const std::uint8_t> b(rec.payload);
        const auto& t = rec.topic;
        auto push = [&](auto& stream, auto value) {
            d.order.emplace_back(t, stream.size());
            stream.push_back({rec.stamp, std::move(value)});
        };
        try
        {
            if (t == topics::kHeader)
            {
                d.header.assign(b.begin(), b.end());
                const auto j = nlohmann::json::parse(d.header);
                d.base_tick = j.value("base_tick", 0.001);
            }
            else if (t == topics::kRaceline)
            {
                d.raceline = decode_raceline(b);
                d.has_raceline = true;
            }
            else if (t == topics::kPlant)
                push(d.plant, decode_plant(b));
            else if (t == topics::kPlantEvents)
                push(d.plant_events, decode_event(b));
            else if (t == topics::kImu)
                push(d.imu, decode_imu(b));
            else if (t == topics::kGnss)
                push(d.gnss, decode_gnss(b));
            else if (t == topics::kState)
                push(d.states, decode_state(b));
            else if (t == topics::kPath)
                push(d.paths, decode_path(b));
            else if (t == topics::kCommand)
                push(d.commands, decode_command(b));
            else if (t == topics::kVerdict)
                push(d.verdicts, decode_verdict(b));
            else if (t == topics::kFlags)
                push(d.flags, decode_flags(b));
            else if (t == topics::kFaults)
                push(d.faults, decode_event(b));
            else if (t == topics::kDashboard)
            {
                if (auto f = frames.dashboard(b))
                    push(d.dashboard, *f);
                else
                    ++d.undecodable;
            }
            else if (t == topics::kBasestation)
            {
                if (auto f = frames.basestation(b))
                    push(d.basestation, *f);
                else
                    ++d.undecodable;
            }
            else
                ++d.undecodable;
        }
        catch (const std::exception&)
        {
            ++d.undecodable;
        }
    }
    return d;
}

} // namespace racestack::analysis
