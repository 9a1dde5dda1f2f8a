#include "racestack/telemetry/channel.hpp"

#include "racestack/errors.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

namespace racestack::telemetry
{

namespace
{

sockaddr_in make_addr(const std::string& host, std::uint16_t port)
{
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(port);
    const std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
    if (inet_pton(AF_INET, h.c_str(), &a.sin_addr) != 1)
        throw IoError("invalid IPv4 address '" + host + "'");
    return a;
}

} // namespace

std::pair<std::shared_ptr<LoopbackChannel>, std::shared_ptr<LoopbackChannel>> LoopbackChannel::make_pair()
{
    auto a = std::make_shared<LoopbackChannel>();
    auto b = std::make_shared<LoopbackChannel>();
    auto ab = std::make_shared<Queue>();
    auto ba = std::make_shared<Queue>();
    a->m_out = ab;
    b->m_in = ab;
    b->m_out = ba;
    a->m_in = ba;
    return {a, b};
}

bool LoopbackChannel::send(std::span<const std::uint8_t> bytes)
{
    if (m_blocked)
        return true;
    std::lock_guard lock(m_out->mutex);
    m_out->items.emplace_back(bytes.begin(), bytes.end());
    return true;
}

std::optional<Datagram> LoopbackChannel::receive()
{
    std::lock_guard lock(m_in->mutex);
    if (m_in->items.empty())
        return std::nullopt;
    Datagram d = std::move(m_in->items.front());
    m_in->items.pop_front();
    return d;
}

std::size_t LoopbackChannel::pending() const
{
    std::lock_guard lock(m_in->mutex);
    return m_in->items.size();
}

UdpChannel::UdpChannel(const std::string& bind_host, std::uint16_t bind_port, const std::string& peer_host,
                       std::uint16_t peer_port)
{
    m_fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (m_fd < 0)
        throw IoError(std::string("socket: ") + std::strerror(errno));
    const int flags = ::fcntl(m_fd, F_GETFL, 0);
    ::fcntl(m_fd, F_SETFL, flags | O_NONBLOCK);
    sockaddr_in local{};
    try
    {
        local = make_addr(bind_host, bind_port);
        set_peer(peer_host, peer_port);
    }
    catch (...)
    {
        ::close(m_fd);
        throw;
    }
    if (::bind(m_fd, reinterpret_cast<sockaddr*>(&local), sizeof(local)) != 0)
    {
        const std::string msg = std::strerror(errno);
        ::close(m_fd);
        throw IoError("bind " + bind_host + ":" + std::to_string(bind_port) + ": " + msg);
    }
    socklen_t len = sizeof(local);
    ::getsockname(m_fd, reinterpret_cast<sockaddr*>(&local), &len);
    m_local_port = ntohs(local.sin_port);
}

UdpChannel::~UdpChannel()
{
    if (m_fd >= 0)
        ::close(m_fd);
}

void UdpChannel::set_peer(const std::string& host, std::uint16_t port)
{
    const sockaddr_in a = make_addr(host, port);
    m_peer.assign(reinterpret_cast<const std::uint8_t*>(&a), reinterpret_cast<const std::uint8_t*>(&a) + sizeof(a));
}

bool UdpChannel::send(std::span<const std::uint8_t> bytes)
{
    const ssize_t n = ::sendto(m_fd, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(m_peer.data()),
                               static_cast<socklen_t>(m_peer.size()));
    return n == static_cast<ssize_t>(bytes.size());
}

std::optional<Datagram> UdpChannel::receive()
{
    Datagram buf(2048);
    const ssize_t n = ::recv(m_fd, buf.data(), buf.size(), 0);
    if (n < 0)
        return std::nullopt;
    buf.resize(static_cast<std::size_t>(n));
    return buf;
}

} // namespace racestack::telemetry
