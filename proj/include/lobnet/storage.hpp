#pragma once

// Append-only capture log and replay.
//
// Layout:  <root>/<product>/<YYYY-MM-DD>.ndjson[.gz]   (UTC day of recv_time)
//          <root>/_quarantine/<YYYY-MM-DD>.ndjson       (frames that failed to parse)
// Record:  {"recv_time":<ns>,"kind":"l2update","sequence":6,"raw":"<wire text>"}

#include "lobnet/feed.hpp"
#include "lobnet/source.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

namespace lobnet::storage {

inline constexpr std::string_view kQuarantineDir = "_quarantine";

struct Record {
    std::int64_t recv_time_ns = 0;
    std::string kind;
    std::int64_t sequence = 0;
    std::string raw;
    friend bool operator==(const Record&, const Record&) = default;
};

std::string encode_record(const Record& r);
/// Throws CorruptLine.
Record decode_record(std::string_view line);

/// YYYY-MM-DD of a UTC nanosecond timestamp.
std::string utc_date(std::int64_t ns);
/// Nanoseconds at 00:00 UTC of a YYYY-MM-DD date; throws PreconditionViolation.
std::int64_t date_start_ns(std::string_view date);

std::filesystem::path partition_path(const std::filesystem::path& root, std::string_view product,
                                     std::string_view date, bool compressed);

struct RecorderOptions {
    bool compress = false;
};

/// One open file per product; a message whose UTC day differs from the open
/// file's rolls to a new file and the old one is never written again. Every
/// record is flushed before write() returns.
class Recorder {
public:
    explicit Recorder(std::filesystem::path root, RecorderOptions options = {});
    ~Recorder();
    Recorder(const Recorder&) = delete;
    Recorder& operator=(const Recorder&) = delete;

    /// Throws DiskFull when the record cannot be written and flushed.
    void write(const feed::FeedMessage& msg);
    void quarantine(std::string_view raw, std::int64_t recv_time_ns, std::string_view reason);
    void close();

    std::uint64_t written() const noexcept { return written_; }
    std::uint64_t quarantined() const noexcept { return quarantined_; }

private:
    struct Sink;
    Sink& sink_for(const std::string& key, const std::filesystem::path& dir, const std::string& date, bool compress);
    void append(Sink& sink, const std::string& line);

    std::filesystem::path root_;
    RecorderOptions options_;
    std::map<std::string, std::unique_ptr<Sink>> sinks_;
    std::uint64_t written_ = 0;
    std::uint64_t quarantined_ = 0;
};

enum class Pacing { MaxSpeed, Recorded };

struct ReplayOptions {
    feed::Subscription subscription;
    std::int64_t start_ns = std::numeric_limits<std::int64_t>::min();  // inclusive
    std::int64_t end_ns = std::numeric_limits<std::int64_t>::max();    // exclusive
    Pacing pacing = Pacing::MaxSpeed;
    double speed = 1.0;  // Recorded pacing only
};

struct ReplayStats {
    std::uint64_t frames = 0;
    std::uint64_t corrupt_lines = 0;
    std::uint64_t files = 0;
    std::uint64_t skipped_before_snapshot = 0;
};

/// Merges the subscribed products' files into one stream ordered by
/// (recv_time, product, sequence). Records outside the time range or the
/// subscribed channels are skipped; with the level2 channel, a product's
/// updates start at its first snapshot. Undecodable lines are skipped and
/// counted. Throws ReplayFileMissing when a product has no files.
class ReplaySource final : public feed::Source {
public:
    ReplaySource(std::filesystem::path root, ReplayOptions options);
    ~ReplaySource() override;

    std::optional<feed::SourceFrame> next() override;
    const ReplayStats& stats() const noexcept { return stats_; }

private:
    class Reader;
    struct Head {
        Record record;
        std::size_t reader = 0;
        std::string product;
    };
    struct Later {
        bool operator()(const Head& a, const Head& b) const;
    };

    void advance(std::size_t reader);
    bool wanted(const Head& h);

    ReplayOptions options_;
    std::vector<std::unique_ptr<Reader>> readers_;
    std::priority_queue<Head, std::vector<Head>, Later> heap_;
    std::map<std::string, bool> seen_snapshot_;
    ReplayStats stats_;
    std::optional<std::int64_t> first_recv_;
    std::chrono::steady_clock::time_point wall_start_;
};

struct ReplayResult {
    std::vector<feed::FeedMessage> messages;
    ReplayStats stats;
    std::uint64_t unparsed = 0;
};

/// Drains a replay and parses every frame.
ReplayResult replay(const std::filesystem::path& root, const ReplayOptions& options);

/// Products with a capture directory under `root`, sorted.
std::vector<std::string> list_products(const std::filesystem::path& root);

struct DatasetStats {
    /// product -> message kind ("ticker", "snapshot", ...) -> records
    std::map<std::string, std::map<std::string, std::uint64_t>> counts;
    std::uint64_t corrupt_lines = 0;
    std::uint64_t quarantined = 0;

    std::uint64_t count(const std::string& product, feed::MessageKind kind) const;
};

DatasetStats dataset_stats(const std::filesystem::path& root);

}  // namespace lobnet::storage
