#include "racestack/telemetry/bridge.hpp"

#include "racestack/errors.hpp"

#include <httplib.h>

namespace racestack::telemetry
{

std::string to_ndjson(const std::vector<DashboardFrame>& frames)
{
    std::string out;
    for (const auto& f : frames)
    {
        out += to_json(f).dump();
        out += '\n';
    }
    return out;
}

JsonBridge::JsonBridge(std::size_t history) : m_server(std::make_unique<httplib::Server>()), m_capacity(history)
{
    routes();
}

JsonBridge::~JsonBridge()
{
    stop();
}

void JsonBridge::routes()
{
    m_server->Get("/api/dashboard", [this](const httplib::Request&, httplib::Response& res) {
        std::lock_guard lock(m_mutex);
        if (m_frames.empty())
        {
            res.status = 404;
            res.set_content(R"({"error":"no dashboard frame yet"})", "application/json");
            return;
        }
        res.set_header("X-Seq", std::to_string(m_frames.back().first));
        res.set_content(to_json(m_frames.back().second).dump(), "application/json");
    });
    m_server->Get("/api/dashboard/stream", [this](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t since = 0;
        if (req.has_param("since"))
        {
            try
            {
                since = std::stoull(req.get_param_value("since"));
            }
            catch (const std::exception&)
            {
                res.status = 400;
                res.set_content(R"({"error":"bad since"})", "application/json");
                return;
            }
        }
        std::string body;
        std::uint64_t last = since;
        {
            std::lock_guard lock(m_mutex);
            for (const auto& [seq, f] : m_frames)
            {
                if (seq > since)
                {
                    body += to_json(f).dump();
                    body += '\n';
                    last = seq;
                }
            }
        }
        res.set_header("X-Last-Seq", std::to_string(last));
        res.set_content(body, "application/x-ndjson");
    });
    m_server->Post("/api/basestation", [this](const httplib::Request& req, httplib::Response& res) {
        try
        {
            const auto f = basestation_from_json(nlohmann::json::parse(req.body));
            std::lock_guard lock(m_mutex);
            m_inbound.push_back(f);
            ++m_inbound_total;
            res.status = 202;
            res.set_content(R"({"queued":true})", "application/json");
        }
        catch (const std::exception& e)
        {
            res.status = 400;
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
    });
    m_server->Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
        std::lock_guard lock(m_mutex);
        res.set_content(nlohmann::json{{"frames", m_seq}, {"inbound", m_inbound_total}}.dump(), "application/json");
    });
}

void JsonBridge::start(const std::string& host, int port)
{
    if (running())
        return;
    if (port == 0)
        m_port = m_server->bind_to_any_port(host);
    else
        m_port = m_server->bind_to_port(host, port) ? port : -1;
    if (m_port <= 0)
        throw IoError("json bridge: cannot bind " + host + ":" + std::to_string(port));
    m_thread = std::thread([this] { m_server->listen_after_bind(); });
    m_server->wait_until_ready();
}

void JsonBridge::stop()
{
    if (!running())
        return;
    m_server->stop();
    m_thread.join();
}

void JsonBridge::publish(const DashboardFrame& f)
{
    std::lock_guard lock(m_mutex);
    m_frames.emplace_back(++m_seq, f);
    while (m_frames.size() > m_capacity)
        m_frames.pop_front();
}

std::vector<BasestationFrame> JsonBridge::take_inbound()
{
    std::lock_guard lock(m_mutex);
    return std::exchange(m_inbound, {});
}

std::uint64_t JsonBridge::published() const
{
    std::lock_guard lock(m_mutex);
    return m_seq;
}

} // namespace racestack::telemetry
