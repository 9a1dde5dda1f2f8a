#pragma once

#include "racestack/control/controller.hpp"
#include "racestack/estimation/types.hpp"
#include "racestack/plant/types.hpp"
#include "racestack/planner/planner.hpp"
#include "racestack/telemetry/channel.hpp"
#include "racestack/telemetry/frames.hpp"

#include <optional>

namespace racestack::telemetry
{

/// Everything the car knows about the base station's latest wishes.
struct RemoteState
{
    planner::FlagState flags;
    control::JoystickCommand joystick;
    bool enable_engine = false;
    bool enable_driving = false;
    bool throttle_lockout = false;
    std::optional<FrameStamp> last_stamp;
};

/// Applies inbound basestation frames. Frames whose stamp is not newer than the
/// last accepted one are ignored.
class BasestationLink
{
public:
    bool apply(const BasestationFrame& f, double now);

    /// Drains and decodes everything pending on the channel. Returns accepted frames.
    int poll(DatagramChannel& channel, double now);

    const RemoteState& state() const noexcept { return m_state; }
    std::uint64_t ignored() const noexcept { return m_ignored; }
    const FrameDecoder& decoder() const noexcept { return m_decoder; }

private:
    RemoteState m_state;
    FrameDecoder m_decoder;
    std::uint64_t m_ignored = 0;
};

struct DashboardInputs
{
    double time = 0.0;
    const control::ControllerOutput* command = nullptr;
    const plant::PlantState* plant = nullptr;
    const estimation::EstimatedState* state = nullptr;
};

/// Maps the stack's latest snapshots onto the dashboard fields. Integer fields are
/// rounded and saturated to their wire type.
DashboardFrame make_dashboard(const DashboardInputs& in);

} // namespace racestack::telemetry
