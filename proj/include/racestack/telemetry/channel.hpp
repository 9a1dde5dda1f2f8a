#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace racestack::telemetry
{

using Datagram = std::vector<std::uint8_t>;

class DatagramChannel
{
public:
    virtual ~DatagramChannel() = default;
    /// False when the datagram could not be handed to the transport.
    virtual bool send(std::span<const std::uint8_t> bytes) = 0;
    /// Next pending datagram, if any. Never blocks.
    virtual std::optional<Datagram> receive() = 0;
};

/// In-memory channel pair for lockstep runs; what one end sends the other receives.
class LoopbackChannel final : public DatagramChannel
{
public:
    static std::pair<std::shared_ptr<LoopbackChannel>, std::shared_ptr<LoopbackChannel>> make_pair();

    bool send(std::span<const std::uint8_t> bytes) override;
    std::optional<Datagram> receive() override;
    std::size_t pending() const;

    /// Drops everything sent from this end while set.
    void set_blocked(bool blocked) noexcept { m_blocked = blocked; }

private:
    struct Queue
    {
        std::mutex mutex;
        std::deque<Datagram> items;
    };
    std::shared_ptr<Queue> m_in;
    std::shared_ptr<Queue> m_out;
    bool m_blocked = false;
};

/// Non-blocking UDP socket bound to a local port, sending to a fixed peer.
class UdpChannel final : public DatagramChannel
{
public:
    /// Throws IoError when the socket cannot be created or bound. Port 0 binds an ephemeral port.
    UdpChannel(const std::string& bind_host, std::uint16_t bind_port, const std::string& peer_host,
               std::uint16_t peer_port);
    ~UdpChannel() override;
    UdpChannel(const UdpChannel&) = delete;
    UdpChannel& operator=(const UdpChannel&) = delete;

    bool send(std::span<const std::uint8_t> bytes) override;
    std::optional<Datagram> receive() override;

    std::uint16_t local_port() const noexcept { return m_local_port; }
    void set_peer(const std::string& host, std::uint16_t port);

private:
    int m_fd = -1;
    std::uint16_t m_local_port = 0;
    std::vector<std::uint8_t> m_peer; // sockaddr_in storage
};

} // namespace racestack::telemetry
