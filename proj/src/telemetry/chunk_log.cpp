#include "racestack/telemetry/chunk_log.hpp"

#include "racestack/errors.hpp"
#include "racestack/telemetry/bytes.hpp"

#include <algorithm>
#include <regex>
#include <set>

namespace racestack::telemetry
{

namespace
{

constexpr char kMagic[4] = {'R', 'S', 'L', 'G'};
constexpr char kIndexMagic[4] = {'R', 'S', 'I', 'X'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kTopicDef = 1;
constexpr std::uint8_t kData = 2;
constexpr std::uint8_t kFooter = 3;

std::vector<std::uint8_t> read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::optional<std::pair<std::string, std::uint32_t>> parse_chunk_name(const std::string& name)
{
    static const std::regex re(R"(run_(.+)_(\d+)\.log)");
    std::smatch m;
    if (!std::regex_match(name, m, re))
        return std::nullopt;
    return std::pair{m[1].str(), static_cast<std::uint32_t>(std::stoul(m[2].str()))};
}

} // namespace

std::filesystem::path chunk_path(const std::filesystem::path& dir, const std::string& run_id, std::uint32_t seq)
{
    return dir / ("run_" + run_id + "_" + std::to_string(seq) + ".log");
}

LogWriter::LogWriter(std::filesystem::path dir, std::string run_id, std::size_t budget, runtime::FaultReporter faults)
    : m_dir(std::move(dir)), m_run_id(std::move(run_id)), m_budget(budget), m_faults(std::move(faults))
{
    if (m_budget < 64)
        throw ConfigError("log chunk budget must be at least 64 bytes");
}

LogWriter::~LogWriter()
{
    try
    {
        close();
    }
    catch (...)
    {
    }
}

void LogWriter::fail(const std::string& msg)
{
    if (!m_enabled)
        return;
    m_enabled = false;
    if (m_out.is_open())
        m_out.close();
    m_open = false;
    if (m_faults)
        m_faults("logger", "recording disabled: " + msg);
}

void LogWriter::emit(const std::vector<std::uint8_t>& bytes)
{
    m_out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    m_size += bytes.size();
    if (!m_out)
        fail("write error on " + chunk_path(m_dir, m_run_id, m_seq).string());
}

void LogWriter::open_chunk()
{
    std::error_code ec;
    std::filesystem::create_directories(m_dir, ec);
    const auto path = chunk_path(m_dir, m_run_id, m_seq);
    m_out.open(path, std::ios::binary | std::ios::trunc);
    if (!m_out)
    {
        fail("cannot create " + path.string());
        return;
    }
    m_open = true;
    m_size = 0;
    m_chunk_records = 0;
    m_index.clear();
    m_chunks.push_back(path);
    ByteWriter w;
    for (char c : kMagic)
        w.put<std::uint8_t>(static_cast<std::uint8_t>(c));
    w.put<std::uint16_t>(kVersion);
    w.put<std::uint16_t>(0);
    w.put<std::uint32_t>(m_seq);
    emit(w.buffer());
}

std::size_t LogWriter::footer_size(std::optional<std::uint16_t> extra_topic) const
{
    std::size_t n = 1 + 2 + 4 + 4;
    for (const auto& [id, offsets] : m_index)
        n += 2 + 4 + 4 * offsets.size();
    if (extra_topic)
        n += m_index.count(*extra_topic) ? 4 : 2 + 4 + 4;
    return n;
}

void LogWriter::close_chunk()
{
    if (!m_open)
        return;
    const auto start = static_cast<std::uint32_t>(m_size);
    ByteWriter w;
    w.put<std::uint8_t>(kFooter);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(m_index.size()));
    for (const auto& [id, offsets] : m_index)
    {
        w.put<std::uint16_t>(id);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(offsets.size()));
        for (auto o : offsets)
            w.put<std::uint32_t>(o);
    }
    w.put<std::uint32_t>(start);
    for (char c : kIndexMagic)
        w.put<std::uint8_t>(static_cast<std::uint8_t>(c));
    emit(w.buffer());
    if (m_enabled)
    {
        m_out.close();
        if (!m_out)
            fail("close error");
    }
    m_open = false;
    ++m_seq;
}

bool LogWriter::write(const std::string& topic, runtime::Tick stamp, std::span<const std::uint8_t> payload)
{
    if (!m_enabled)
        return false;
    if (m_records > 0 && stamp < m_last_stamp)
    {
        if (m_faults)
            m_faults("logger", "out-of-order record on " + topic + " dropped");
        return false;
    }
    auto it = m_topic_ids.find(topic);
    if (it == m_topic_ids.end())
    {
        if (m_topic_ids.size() >= 0xFFFF)
        {
            fail("too many topics");
            return false;
        }
        it = m_topic_ids.emplace(topic, static_cast<std::uint16_t>(m_topic_ids.size())).first;
    }
    const std::uint16_t id = it->second;
    const std::size_t def_size = 1 + 2 + 2 + topic.size();
    const std::size_t rec_size = kRecordOverhead + payload.size();
    auto projected = [&] {
        const bool known = m_index.count(id) > 0;
        return m_size + (known ? 0 : def_size) + rec_size + footer_size(id);
    };
    if (m_open && m_chunk_records > 0 && projected() > m_budget)
        close_chunk();
    if (!m_open)
        open_chunk();
    if (!m_enabled)
        return false;

    ByteWriter w;
    if (!m_index.count(id))
    {
        w.put<std::uint8_t>(kTopicDef);
        w.put<std::uint16_t>(id);
        w.put<std::uint16_t>(static_cast<std::uint16_t>(topic.size()));
        w.put_bytes({reinterpret_cast<const std::uint8_t*>(topic.data()), topic.size()});
        m_index[id];
    }
    m_index[id].push_back(static_cast<std::uint32_t>(m_size + w.size()));
    w.put<std::uint8_t>(kData);
    w.put<std::uint16_t>(id);
    w.put<std::int64_t>(stamp);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(payload.size()));
    w.put_bytes(payload);
    emit(w.buffer());
    if (!m_enabled)
        return false;
    ++m_chunk_records;
    ++m_records;
    m_last_stamp = stamp;
    return true;
}

void LogWriter::close()
{
    if (m_open)
        close_chunk();
}

ChunkContents read_chunk(const std::filesystem::path& path)
{
    const auto data = read_file(path);
    ByteReader r(data);
    ChunkContents out;
    try
    {
        for (char c : kMagic)
        {
            if (r.get<std::uint8_t>() != static_cast<std::uint8_t>(c))
                throw FormatError(path.string() + ": not a log chunk");
        }
        if (r.get<std::uint16_t>() != kVersion)
            throw FormatError(path.string() + ": unsupported version");
        r.get<std::uint16_t>();
        out.seq = r.get<std::uint32_t>();
    }
    catch (const FormatError&)
    {
        throw;
    }

    std::map<std::uint16_t, std::string> names;
    try
    {
        while (r.remaining() > 0)
        {
            const auto kind = r.get<std::uint8_t>();
            if (kind == kTopicDef)
            {
                const auto id = r.get<std::uint16_t>();
                const auto len = r.get<std::uint16_t>();
                const auto b = r.get_bytes(len);
                names[id] = std::string(b.begin(), b.end());
            }
            else if (kind == kData)
            {
                LogRecord rec;
                const auto id = r.get<std::uint16_t>();
                rec.stamp = r.get<std::int64_t>();
                const auto len = r.get<std::uint32_t>();
                const auto b = r.get_bytes(len);
                rec.payload.assign(b.begin(), b.end());
                auto n = names.find(id);
                if (n == names.end())
                    throw FormatError(path.string() + ": record for undefined topic");
                rec.topic = n->second;
                out.records.push_back(std::move(rec));
            }
            else if (kind == kFooter)
            {
                const auto topics = r.get<std::uint16_t>();
                for (std::uint16_t t = 0; t < topics; ++t)
                {
                    const auto id = r.get<std::uint16_t>();
                    const auto count = r.get<std::uint32_t>();
                    auto& offs = out.index[names.count(id) ? names[id] : std::to_string(id)];
                    for (std::uint32_t k = 0; k < count; ++k)
                        offs.push_back(r.get<std::uint32_t>());
                }
                r.get<std::uint32_t>();
                bool magic = true;
                for (char c : kIndexMagic)
                    magic = magic && r.get<std::uint8_t>() == static_cast<std::uint8_t>(c);
                out.complete = magic && r.remaining() == 0;
                break;
            }
            else
            {
                break;
            }
        }
    }
    catch (const FormatError&)
    {
        // truncated tail: keep what was read
        out.complete = false;
    }
    if (!out.complete)
        out.index.clear();
    return out;
}

RunLog read_run(const std::filesystem::path& dir, const std::string& run_id)
{
    RunLog log;
    std::vector<std::pair<std::uint32_t, std::filesystem::path>> files;
    if (std::filesystem::is_regular_file(dir))
    {
        files.emplace_back(0, dir);
    }
    else
    {
        if (!std::filesystem::is_directory(dir))
            throw IoError("no such log directory: " + dir.string());
        for (const auto& e : std::filesystem::directory_iterator(dir))
        {
            const auto parsed = parse_chunk_name(e.path().filename().string());
            if (parsed && parsed->first == run_id)
                files.emplace_back(parsed->second, e.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::optional<std::uint32_t> prev;
    for (const auto& [seq, path] : files)
    {
        const auto chunk = read_chunk(path);
        if (prev)
        {
            for (auto s = *prev + 1; s < chunk.seq; ++s)
                log.missing.push_back(s);
        }
        else
        {
            for (std::uint32_t s = 0; s < chunk.seq; ++s)
                log.missing.push_back(s);
        }
        prev = chunk.seq;
        if (!chunk.complete)
            log.incomplete.push_back(chunk.seq);
        log.records.insert(log.records.end(), chunk.records.begin(), chunk.records.end());
        ++log.chunk_count;
    }
    return log;
}

std::vector<std::string> list_runs(const std::filesystem::path& dir)
{
    std::set<std::string> ids;
    if (std::filesystem::is_directory(dir))
    {
        for (const auto& e : std::filesystem::directory_iterator(dir))
        {
            if (const auto parsed = parse_chunk_name(e.path().filename().string()))
                ids.insert(parsed->first);
        }
    }
    return {ids.begin(), ids.end()};
}

} // namespace racestack::telemetry
