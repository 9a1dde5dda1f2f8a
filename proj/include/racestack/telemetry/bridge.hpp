#pragma once

#include "racestack/telemetry/frames.hpp"

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib
{
class Server;
}

namespace racestack::telemetry
{

/// One JSON object per line, keys named as in the message tables.
std::string to_ndjson(const std::vector<DashboardFrame>& frames);

/// Local HTTP bridge for the operator console.
///   GET  /api/dashboard              latest frame
///   GET  /api/dashboard/stream?since=N  newline-delimited frames with seq > N
///   POST /api/basestation            JSON basestation frame, queued for the stack
///   GET  /api/health
class JsonBridge
{
public:
    explicit JsonBridge(std::size_t history = 1000);
    ~JsonBridge();
    JsonBridge(const JsonBridge&) = delete;
    JsonBridge& operator=(const JsonBridge&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port. Throws IoError.
    void start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();
    int port() const noexcept { return m_port; }
    bool running() const noexcept { return m_thread.joinable(); }

    void publish(const DashboardFrame& f);
    std::vector<BasestationFrame> take_inbound();

    std::uint64_t published() const;

private:
    void routes();

    std::unique_ptr<httplib::Server> m_server;
    std::thread m_thread;
    int m_port = 0;
    std::size_t m_capacity;
    mutable std::mutex m_mutex;
    std::deque<std::pair<std::uint64_t, DashboardFrame>> m_frames;
    std::uint64_t m_seq = 0;
    std::vector<BasestationFrame> m_inbound;
    std::uint64_t m_inbound_total = 0;
};

} // namespace racestack::telemetry
