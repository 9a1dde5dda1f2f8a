#pragma once

#include "racestack/runtime/clock.hpp"
#include "racestack/runtime/scheduler.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace racestack::telemetry
{

inline constexpr std::size_t kDefaultChunkBudget = 16u * 1024u * 1024u;
inline constexpr std::size_t kChunkHeaderSize = 12;
inline constexpr std::size_t kRecordOverhead = 15;

std::filesystem::path chunk_path(const std::filesystem::path& dir, const std::string& run_id, std::uint32_t seq);

/// Appends framed records to `run_<id>_<seq>.log` chunks, rotating before a chunk
/// would exceed the byte budget. Each chunk ends with a topic -> offsets index.
/// I/O failures disable recording and are reported once; the run goes on.
class LogWriter
{
public:
    LogWriter(std::filesystem::path dir, std::string run_id, std::size_t budget = kDefaultChunkBudget,
              runtime::FaultReporter faults = {});
    ~LogWriter();
    LogWriter(const LogWriter&) = delete;
    LogWriter& operator=(const LogWriter&) = delete;

    /// Records older than the previous one are dropped (chunks stay stamp-ordered).
    bool write(const std::string& topic, runtime::Tick stamp, std::span<const std::uint8_t> payload);
    void close();

    bool enabled() const noexcept { return m_enabled; }
    const std::vector<std::filesystem::path>& chunks() const noexcept { return m_chunks; }
    std::uint64_t records() const noexcept { return m_records; }

private:
    void open_chunk();
    void close_chunk();
    std::size_t footer_size(std::optional<std::uint16_t> extra_topic) const;
    void fail(const std::string& msg);
    void emit(const std::vector<std::uint8_t>& bytes);

    std::filesystem::path m_dir;
    std::string m_run_id;
    std::size_t m_budget;
    runtime::FaultReporter m_faults;
    bool m_enabled = true;
    std::ofstream m_out;
    bool m_open = false;
    std::uint32_t m_seq = 0;
    std::size_t m_size = 0;
    std::size_t m_chunk_records = 0;
    runtime::Tick m_last_stamp = 0;
    std::map<std::string, std::uint16_t> m_topic_ids;
    std::map<std::uint16_t, std::vector<std::uint32_t>> m_index; // current chunk
    std::vector<std::filesystem::path> m_chunks;
    std::uint64_t m_records = 0;
};

struct LogRecord
{
    std::string topic;
    runtime::Tick stamp = 0;
    std::vector<std::uint8_t> payload;
};

struct ChunkContents
{
    std::uint32_t seq = 0;
    std::vector<LogRecord> records;
    std::map<std::string, std::vector<std::uint32_t>> index; // empty when the footer is missing
    bool complete = false;
};

/// Throws FormatError on a bad header.
ChunkContents read_chunk(const std::filesystem::path& path);

struct RunLog
{
    std::vector<LogRecord> records;
    std::vector<std::uint32_t> missing;     // sequence numbers absent between the first and last chunk
    std::vector<std::uint32_t> incomplete;  // chunks without a valid footer
    std::size_t chunk_count = 0;

    bool gap_free() const noexcept { return missing.empty() && incomplete.empty(); }
};

/// Reads every chunk of a run in sequence order. `dir` may also be one chunk file.
RunLog read_run(const std::filesystem::path& dir, const std::string& run_id);

/// Run ids present in a directory.
std::vector<std::string> list_runs(const std::filesystem::path& dir);

} // namespace racestack::telemetry
