#pragma once

#include "racestack/errors.hpp"
#include "racestack/runtime/clock.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <typeindex>
#include <vector>

namespace racestack::runtime
{

template <class T>
struct Stamped
{
    T value{};
    Tick stamp = 0;
    std::uint64_t seq = 0; // 1-based per topic
};

class TopicBase
{
public:
    TopicBase(std::string name, std::type_index type) : m_name(std::move(name)), m_type(type) {}
    virtual ~TopicBase() = default;

    const std::string& name() const noexcept { return m_name; }
    std::type_index type() const noexcept { return m_type; }

    std::string writer() const
    {
        std::lock_guard lock(m_mutex);
        return m_writer;
    }

    void claim_writer(const std::string& writer)
    {
        std::lock_guard lock(m_mutex);
        if (!m_writer.empty() && m_writer != writer)
        {
            throw ConfigError("topic '" + m_name + "' already has writer '" + m_writer + "', rejected '" + writer + "'");
        }
        m_writer = writer;
    }

protected:
    mutable std::mutex m_mutex;

private:
    std::string m_name;
    std::type_index m_type;
    std::string m_writer;
};

/// Latest-value topic with a bounded history. One writer, any number of readers.
template <class T>
class Topic final : public TopicBase
{
public:
    using Tap = std::function<void(const std::string&, const Stamped<T>&)>;

    explicit Topic(std::string name) : TopicBase(std::move(name), typeid(T)) {}

    Stamped<T> push(T value, Tick stamp)
    {
        Stamped<T> rec{std::move(value), stamp, 0};
        std::vector<Tap> taps;
        {
            std::lock_guard lock(m_mutex);
            rec.seq = ++m_seq;
            m_history.push_back(rec);
            while (m_history.size() > m_depth)
            {
                m_history.pop_front();
            }
            taps = m_taps;
        }
        for (const auto& tap : taps)
        {
            tap(name(), rec);
        }
        return rec;
    }

    std::optional<Stamped<T>> latest() const
    {
        std::lock_guard lock(m_mutex);
        if (m_history.empty())
        {
            return std::nullopt;
        }
        return m_history.back();
    }

    /// Records with seq > after; `dropped` counts records that already left the history.
    std::vector<Stamped<T>> since(std::uint64_t after, std::uint64_t& dropped) const
    {
        std::lock_guard lock(m_mutex);
        std::vector<Stamped<T>> out;
        dropped = 0;
        if (m_history.empty() || m_seq <= after)
        {
            return out;
        }
        const std::uint64_t oldest = m_history.front().seq;
        if (oldest > after + 1)
        {
            dropped = oldest - after - 1;
        }
        for (const auto& rec : m_history)
        {
            if (rec.seq > after)
            {
                out.push_back(rec);
            }
        }
        return out;
    }

    std::uint64_t published() const
    {
        std::lock_guard lock(m_mutex);
        return m_seq;
    }

    void require_depth(std::size_t depth)
    {
        std::lock_guard lock(m_mutex);
        m_depth = std::max(m_depth, depth);
    }

    void add_tap(Tap tap)
    {
        std::lock_guard lock(m_mutex);
        m_taps.push_back(std::move(tap));
    }

private:
    std::deque<Stamped<T>> m_history;
    std::size_t m_depth = 1;
    std::uint64_t m_seq = 0;
    std::vector<Tap> m_taps;
};

template <class T>
class Publisher
{
public:
    Publisher() = default;
    Publisher(Topic<T>* topic, const SimClock* clock) : m_topic(topic), m_clock(clock) {}

    Stamped<T> publish(T value) const { return m_topic->push(std::move(value), m_clock->now()); }
    bool valid() const noexcept { return m_topic != nullptr; }
    const std::string& name() const { return m_topic->name(); }

private:
    Topic<T>* m_topic = nullptr;
    const SimClock* m_clock = nullptr;
};

template <class T>
class Subscriber
{
public:
    Subscriber() = default;
    explicit Subscriber(const Topic<T>* topic) : m_topic(topic) {}

    std::optional<Stamped<T>> latest() const { return m_topic->latest(); }

    /// Everything published since the previous poll, oldest first.
    std::vector<Stamped<T>> poll()
    {
        std::uint64_t lost = 0;
        auto out = m_topic->since(m_last_seq, lost);
        m_dropped += lost;
        if (!out.empty())
        {
            m_last_seq = out.back().seq;
        }
        return out;
    }

    std::uint64_t dropped() const noexcept { return m_dropped; }
    bool valid() const noexcept { return m_topic != nullptr; }

private:
    const Topic<T>* m_topic = nullptr;
    std::uint64_t m_last_seq = 0;
    std::uint64_t m_dropped = 0;
};

class Bus
{
public:
    explicit Bus(const SimClock& clock) : m_clock(&clock) {}
    Bus(const Bus&) = delete;
    Bus& operator=(const Bus&) = delete;

    /// Registers `writer` as the only publisher of `name`.
    template <class T>
    Publisher<T> advertise(const std::string& name, const std::string& writer, std::size_t depth = 1)
    {
        auto& t = topic<T>(name);
        t.claim_writer(writer);
        t.require_depth(depth);
        return Publisher<T>(&t, m_clock);
    }

    template <class T>
    Subscriber<T> subscribe(const std::string& name, std::size_t depth = 1)
    {
        auto& t = topic<T>(name);
        t.require_depth(depth);
        return Subscriber<T>(&t);
    }

    /// Synchronous observer invoked after every publish, in publish order.
    template <class T>
    void tap(const std::string& name, typename Topic<T>::Tap fn)
    {
        topic<T>(name).add_tap(std::move(fn));
    }

    std::vector<std::string> topic_names() const
    {
        std::lock_guard lock(m_mutex);
        std::vector<std::string> names;
        for (const auto& [name, _] : m_topics)
        {
            names.push_back(name);
        }
        return names;
    }

    const SimClock& clock() const noexcept { return *m_clock; }

private:
    template <class T>
    Topic<T>& topic(const std::string& name)
    {
        std::lock_guard lock(m_mutex);
        auto it = m_topics.find(name);
        if (it == m_topics.end())
        {
            it = m_topics.emplace(name, std::make_unique<Topic<T>>(name)).first;
        }
        if (it->second->type() != std::type_index(typeid(T)))
        {
            throw ConfigError("topic '" + name + "' used with conflicting message types");
        }
        return static_cast<Topic<T>&>(*it->second);
    }

    const SimClock* m_clock;
    mutable std::mutex m_mutex;
    std::map<std::string, std::unique_ptr<TopicBase>> m_topics;
};

} // namespace racestack::runtime
