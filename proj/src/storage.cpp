#include "lobnet/storage.hpp"

#include "json.hpp"

#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <thread>

namespace lobnet::storage {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string encode_record(const Record& r) {
    ordered_json j;
    j["recv_time"] = r.recv_time_ns;
    j["kind"] = r.kind;
    j["sequence"] = r.sequence;
    j["raw"] = r.raw;
    return j.dump();
}

Record decode_record(std::string_view line) {
    const auto j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(Errc::CorruptLine, "record is not a json object");
    Record r;
    try {
        r.recv_time_ns = j.at("recv_time").get<std::int64_t>();
        r.kind = j.at("kind").get<std::string>();
        r.sequence = j.contains("sequence") ? j.at("sequence").get<std::int64_t>() : 0;
        r.raw = j.at("raw").get<std::string>();
    } catch (const ordered_json::exception& e) {
        throw Error(Errc::CorruptLine, e.what());
    }
    return r;
}

std::string utc_date(std::int64_t ns) {
    std::int64_t secs = ns / 1'000'000'000;
    if (ns % 1'000'000'000 < 0) --secs;
    const auto t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday);
    return buf;
}

std::int64_t date_start_ns(std::string_view date) {
    std::tm tm{};
    const std::string s(date);
    if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2d-%2d", &tm.tm_year, &tm.tm_mon, &tm.tm_mday) != 3) {
        throw Error(Errc::PreconditionViolation, "not a YYYY-MM-DD date: " + s);
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    return static_cast<std::int64_t>(timegm(&tm)) * 1'000'000'000;
}

fs::path partition_path(const fs::path& root, std::string_view product, std::string_view date, bool compressed) {
    std::string name(date);
    name += compressed ? ".ndjson.gz" : ".ndjson";
    return root / std::string(product) / name;
}

struct Recorder::Sink {
    std::string date;
    fs::path path;
    std::FILE* file = nullptr;
    gzFile gz = nullptr;

    ~Sink() { close(); }
    void close() {
        if (file) std::fclose(file);
        if (gz) gzclose(gz);
        file = nullptr;
        gz = nullptr;
    }
};

Recorder::Recorder(fs::path root, RecorderOptions options) : root_(std::move(root)), options_(options) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw Error(Errc::DiskFull, "cannot create capture root " + root_.string() + ": " + ec.message());
}

Recorder::~Recorder() { close(); }

void Recorder::close() { sinks_.clear(); }

Recorder::Sink& Recorder::sink_for(const std::string& key, const fs::path& dir, const std::string& date, bool compress) {
    auto& slot = sinks_[key];
    if (slot && slot->date == date) return *slot;
    slot = std::make_unique<Sink>();
    slot->date = date;
    slot->path = dir / (date + (compress ? ".ndjson.gz" : ".ndjson"));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::DiskFull, "cannot create " + dir.string() + ": " + ec.message());
    if (compress) {
        slot->gz = gzopen(slot->path.c_str(), "ab");
        if (!slot->gz) throw Error(Errc::DiskFull, "cannot open " + slot->path.string());
    } else {
        slot->file = std::fopen(slot->path.c_str(), "ab");
        if (!slot->file) throw Error(Errc::DiskFull, "cannot open " + slot->path.string() + ": " + std::strerror(errno));
    }
    return *slot;
}

void Recorder::append(Sink& sink, const std::string& line) {
    bool ok = true;
    if (sink.gz) {
        ok = gzwrite(sink.gz, line.data(), static_cast<unsigned>(line.size())) == static_cast<int>(line.size()) &&
             gzwrite(sink.gz, "\n", 1) == 1 && gzflush(sink.gz, Z_SYNC_FLUSH) == Z_OK;
    } else {
        ok = std::fwrite(line.data(), 1, line.size(), sink.file) == line.size() && std::fputc('\n', sink.file) != EOF &&
             std::fflush(sink.file) == 0;
    }
    if (!ok) {
        const std::string path = sink.path.string();
        sink.close();
        throw Error(Errc::DiskFull, "write failed for " + path + ": " + std::strerror(errno));
    }
}

void Recorder::write(const feed::FeedMessage& msg) {
    if (msg.product.empty() || msg.product.front() == '_' || msg.product.find('/') != std::string::npos) {
        throw Error(Errc::PreconditionViolation, "unusable product id for a capture path: " + msg.product);
    }
    const std::string date = utc_date(msg.recv_time_ns);
    Sink& sink = sink_for(msg.product, root_ / msg.product, date, options_.compress);
    append(sink, encode_record({msg.recv_time_ns, std::string(feed::to_string(msg.kind)), msg.sequence, msg.raw}));
    ++written_;
}

void Recorder::quarantine(std::string_view raw, std::int64_t recv_time_ns, std::string_view reason) {
    const std::string date = utc_date(recv_time_ns);
    const std::string key(kQuarantineDir);
    Sink& sink = sink_for(key, root_ / key, date, false);
    ordered_json j;
    j["recv_time"] = recv_time_ns;
    j["kind"] = "quarantine";
    j["reason"] = std::string(reason);
    j["raw"] = std::string(raw);
    append(sink, j.dump());
    ++quarantined_;
}

namespace {

/// Line reader over plain or gzip files; gzread passes plain text through.
class LineReader {
public:
    explicit LineReader(const fs::path& path) : gz_(gzopen(path.c_str(), "rb")) {
        if (!gz_) throw Error(Errc::ReplayFileMissing, "cannot open " + path.string());
    }
    ~LineReader() {
        if (gz_) gzclose(gz_);
    }
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    bool next(std::string& line) {
        line.clear();
        while (true) {
            if (pos_ < buf_.size()) {
                const auto nl = buf_.find('\n', pos_);
                if (nl != std::string::npos) {
                    line.append(buf_, pos_, nl - pos_);
                    pos_ = nl + 1;
                    return true;
                }
                line.append(buf_, pos_, std::string::npos);
                pos_ = buf_.size();
            }
            if (eof_) return !line.empty();
            buf_.resize(1 << 16);
            const int n = gzread(gz_, buf_.data(), static_cast<unsigned>(buf_.size()));
            if (n <= 0) {
                eof_ = true;
                buf_.clear();
            } else {
                buf_.resize(static_cast<std::size_t>(n));
            }
            pos_ = 0;
        }
    }

private:
    gzFile gz_;
    std::string buf_;
    std::size_t pos_ = 0;
    bool eof_ = false;
};

bool is_capture_file(const fs::path& p) {
    const std::string name = p.filename().string();
    const auto ends_with = [&](std::string_view suffix) {
        return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    return ends_with(".ndjson") || ends_with(".ndjson.gz");
}

std::vector<fs::path> capture_files(const fs::path& dir) {
    std::vector<fs::path> out;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        if (e.is_regular_file() && is_capture_file(e.path())) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string file_date(const fs::path& p) { return p.filename().string().substr(0, 10); }

bool channel_wanted(const feed::Subscription& sub, std::string_view kind) {
    const auto has = [&](const char* c) { return std::find(sub.channels.begin(), sub.channels.end(), c) != sub.channels.end(); };
    if (kind == "ticker") return has(feed::kChannelTicker);
    if (kind == "snapshot" || kind == "l2update") return has(feed::kChannelLevel2);
    if (kind == "heartbeat") return has(feed::kChannelHeartbeat);
    return false;
}

}  // namespace

class ReplaySource::Reader {
public:
    Reader(std::string product, std::vector<fs::path> files) : product_(std::move(product)), files_(std::move(files)) {}

    const std::string& product() const noexcept { return product_; }

    /// Next decodable record; corrupt lines are counted and skipped.
    std::optional<Record> next(ReplayStats& stats) {
        std::string line;
        while (true) {
            if (!reader_) {
                if (file_ >= files_.size()) return std::nullopt;
                reader_ = std::make_unique<LineReader>(files_[file_++]);
                ++stats.files;
            }
            if (!reader_->next(line)) {
                reader_.reset();
                continue;
            }
            if (line.empty()) continue;
            try {
                return decode_record(line);
            } catch (const Error&) {
                ++stats.corrupt_lines;
            }
        }
    }

private:
    std::string product_;
    std::vector<fs::path> files_;
    std::size_t file_ = 0;
    std::unique_ptr<LineReader> reader_;
};

bool ReplaySource::Later::operator()(const Head& a, const Head& b) const {
    if (a.record.recv_time_ns != b.record.recv_time_ns) return a.record.recv_time_ns > b.record.recv_time_ns;
    if (a.product != b.product) return a.product > b.product;
    return a.record.sequence > b.record.sequence;
}

ReplaySource::ReplaySource(fs::path root, ReplayOptions options) : options_(std::move(options)) {
    feed::validate(options_.subscription);
    if (!(options_.speed > 0.0)) throw Error(Errc::PreconditionViolation, "replay speed must be positive");
    constexpr std::int64_t kDay = 86'400'000'000'000;
    for (const auto& product : options_.subscription.products) {
        const auto dir = root / product;
        auto files = capture_files(dir);
        if (files.empty()) throw Error(Errc::ReplayFileMissing, "no capture files for " + product + " under " + root.string());
        std::vector<fs::path> in_range;
        for (const auto& f : files) {
            std::int64_t start = 0;
            try {
                start = date_start_ns(file_date(f));
            } catch (const Error&) {
                continue;
            }
            const bool before = options_.start_ns > std::numeric_limits<std::int64_t>::min() && start + kDay <= options_.start_ns;
            if (before || start >= options_.end_ns) continue;
            in_range.push_back(f);
        }
        readers_.push_back(std::make_unique<Reader>(product, std::move(in_range)));
    }
    for (std::size_t i = 0; i < readers_.size(); ++i) advance(i);
}

ReplaySource::~ReplaySource() = default;

void ReplaySource::advance(std::size_t reader) {
    auto rec = readers_[reader]->next(stats_);
    if (rec) heap_.push(Head{std::move(*rec), reader, readers_[reader]->product()});
}

bool ReplaySource::wanted(const Head& h) {
    const auto& r = h.record;
    if (r.recv_time_ns < options_.start_ns || r.recv_time_ns >= options_.end_ns) return false;
    if (!channel_wanted(options_.subscription, r.kind)) return false;
    if (r.kind == "snapshot") seen_snapshot_[h.product] = true;
    if (r.kind == "l2update" && !seen_snapshot_[h.product]) {
        ++stats_.skipped_before_snapshot;
        return false;
    }
    return true;
}

std::optional<feed::SourceFrame> ReplaySource::next() {
    while (!heap_.empty()) {
        Head h = heap_.top();
        heap_.pop();
        advance(h.reader);
        if (!wanted(h)) continue;
        if (options_.pacing == Pacing::Recorded) {
            if (!first_recv_) {
                first_recv_ = h.record.recv_time_ns;
                wall_start_ = std::chrono::steady_clock::now();
            }
            const auto offset = std::chrono::nanoseconds(
                static_cast<std::int64_t>(static_cast<double>(h.record.recv_time_ns - *first_recv_) / options_.speed));
            std::this_thread::sleep_until(wall_start_ + offset);
        }
        ++stats_.frames;
        return feed::SourceFrame{h.record.recv_time_ns, std::move(h.record.raw), false};
    }
    return std::nullopt;
}

ReplayResult replay(const fs::path& root, const ReplayOptions& options) {
    ReplaySource src(root, options);
    ReplayResult out;
    while (auto frame = src.next()) {
        auto parsed = feed::parse_message(frame->raw, frame->recv_time_ns);
        if (auto* m = std::get_if<feed::FeedMessage>(&parsed)) {
            out.messages.push_back(std::move(*m));
        } else {
            ++out.unparsed;
        }
    }
    out.stats = src.stats();
    return out;
}

std::vector<std::string> list_products(const fs::path& root) {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(root, ec)) {
        const std::string name = e.path().filename().string();
        if (e.is_directory() && !name.empty() && name.front() != '_') out.push_back(name);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t DatasetStats::count(const std::string& product, feed::MessageKind kind) const {
    const auto p = counts.find(product);
    if (p == counts.end()) return 0;
    const auto k = p->second.find(std::string(feed::to_string(kind)));
    return k == p->second.end() ? 0 : k->second;
}

DatasetStats dataset_stats(const fs::path& root) {
    DatasetStats stats;
    std::string line;
    for (const auto& product : list_products(root)) {
        auto& per_kind = stats.counts[product];
        for (const auto& f : capture_files(root / product)) {
            LineReader reader(f);
            while (reader.next(line)) {
                if (line.empty()) continue;
                try {
                    ++per_kind[decode_record(line).kind];
                } catch (const Error&) {
                    ++stats.corrupt_lines;
                }
            }
        }
    }
    for (const auto& f : capture_files(root / std::string(kQuarantineDir))) {
        LineReader reader(f);
        while (reader.next(line)) stats.quarantined += !line.empty();
    }
    return stats;
}

}  // namespace lobnet::storage
