#include "ocvtrack/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>

namespace ocvtrack {

LineReader::LineReader(const std::filesystem::path& path, std::size_t chunk)
    : file_(std::fopen(path.c_str(), "rb"), &std::fclose), buf_(chunk) {
    if (!file_) throw MissingInput(path.string());
}

bool LineReader::next(std::string_view& line) {
    for (;;) {
        if (begin_ < end_) {
            const char* start = buf_.data() + begin_;
            const void* nl = std::memchr(start, '\n', end_ - begin_);
            if (nl != nullptr) {
                const std::size_t len = static_cast<const char*>(nl) - start;
                line = std::string_view(start, len);
                begin_ += len + 1;
                if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
                ++line_no_;
                return true;
            }
        }
        if (eof_) {
            if (begin_ >= end_) return false;
            line = std::string_view(buf_.data() + begin_, end_ - begin_);
            begin_ = end_;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            ++line_no_;
            return true;
        }
        // Compact the partial line to the front, grow if one line fills the buffer.
        const std::size_t rest = end_ - begin_;
        if (begin_ > 0) {
            std::memmove(buf_.data(), buf_.data() + begin_, rest);
            begin_ = 0;
            end_ = rest;
        }
        if (end_ == buf_.size()) buf_.resize(buf_.size() * 2);
        const std::size_t got = std::fread(buf_.data() + end_, 1, buf_.size() - end_, file_.get());
        end_ += got;
        if (got == 0) eof_ = true;
    }
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_epoch(std::string_view s, Instant& out) {
    double v = 0.0;
    if (!parse_double(s, v) || !std::isfinite(v)) return false;
    out = static_cast<Instant>(std::llround(v));
    return true;
}

}  // namespace

std::string parse_row(std::string_view line, TimestampFormat& format, TelemetryRecord& out) {
    std::string_view fields[5];
    std::size_t n = 0;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t comma = line.find(',', pos);
        if (n == 5) return "too many fields";
        if (comma == std::string_view::npos) {
            fields[n++] = line.substr(pos);
            break;
        }
        fields[n++] = line.substr(pos, comma - pos);
        pos = comma + 1;
    }
    if (n != 5) return "expected 5 fields";

    const std::string_view ts = trim(fields[0]);
    if (format == TimestampFormat::Unknown) {
        Instant probe = 0;
        if (parse_epoch(ts, probe))
            format = TimestampFormat::Epoch;
        else if (parse_rfc3339(ts))
            format = TimestampFormat::Rfc3339;
        else
            return "unparseable timestamp";
    }
    if (format == TimestampFormat::Epoch) {
        if (!parse_epoch(ts, out.timestamp)) return "timestamp not in the file's epoch format";
    } else {
        const auto parsed = parse_rfc3339(ts);
        if (!parsed) return "timestamp not in the file's RFC 3339 format";
        out.timestamp = *parsed;
    }
    if (!parse_double(fields[1], out.voltage) || !parse_double(fields[2], out.current) ||
        !parse_double(fields[3], out.power) || !parse_double(fields[4], out.temperature))
        return "unparseable number";
    if (!std::isfinite(out.voltage) || !std::isfinite(out.current) || !std::isfinite(out.power) ||
        !std::isfinite(out.temperature))
        return "non-finite value";
    if (!(out.voltage > 0.0)) return "voltage must be > 0";
    if (out.temperature < -40.0 || out.temperature > 80.0) return "temperature outside [-40, 80]";
    return {};
}

namespace {

void check_header(std::string_view line, const std::filesystem::path& path) {
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
        line.remove_prefix(3);
    std::string compact;
    for (const char c : line)
        if (c != ' ' && c != '\t') compact.push_back(c);
    if (compact != telemetry_header)
        throw DataError("bad header in " + path.string() + ": expected '" + std::string(telemetry_header) + "'");
}

std::optional<Instant> first_timestamp(const std::filesystem::path& path) {
    LineReader reader(path, 1 << 16);
    std::string_view line;
    if (!reader.next(line)) throw DataError("empty file (no header): " + path.string());
    check_header(line, path);
    TimestampFormat format = TimestampFormat::Unknown;
    TelemetryRecord r;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        if (parse_row(line, format, r).empty()) return r.timestamp;
    }
    return std::nullopt;
}

}  // namespace

TelemetryReader::TelemetryReader(std::vector<std::filesystem::path> files, IngestOptions options)
    : options_(options) {
    if (files.empty()) throw ConfigError("no telemetry input files given");
    std::vector<std::pair<std::optional<Instant>, std::filesystem::path>> keyed;
    for (auto& f : files) {
        if (!std::filesystem::exists(f)) throw MissingInput(f.string());
        keyed.emplace_back(first_timestamp(f), f);
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.first.has_value() != b.first.has_value()) return a.first.has_value();
        return a.first.has_value() && *a.first < *b.first;
    });
    for (auto& k : keyed) files_.push_back(k.second);
}

TelemetryReader::~TelemetryReader() = default;

void TelemetryReader::open_file(std::size_t index) {
    reader_ = std::make_unique<LineReader>(files_[index]);
    format_ = TimestampFormat::Unknown;
    std::string_view header;
    if (!reader_->next(header)) throw DataError("empty file (no header): " + files_[index].string());
    check_header(header, files_[index]);
}

bool TelemetryReader::read_one_row() {
    std::string_view line;
    for (;;) {
        if (!reader_) {
            if (file_index_ >= files_.size()) return false;
            open_file(file_index_++);
        }
        if (!reader_->next(line)) {
            reader_.reset();
            continue;
        }
        if (trim(line).empty()) continue;
        break;
    }
    ++stats_.rows_read;
    TelemetryRecord r;
    const std::string reason = parse_row(line, format_, r);
    if (!reason.empty()) {
        ++stats_.malformed_rows;
        if (stats_.malformed_samples.size() < 20)
            stats_.malformed_samples.push_back({files_[file_index_ - 1].string(), reader_->line_no(), reason});
        return true;
    }
    accept(r);
    return true;
}

void TelemetryReader::accept(const TelemetryRecord& r) {
    if (last_emitted_ && r.timestamp <= *last_emitted_) {
        if (r.timestamp == *last_emitted_)
            ++stats_.rejected_duplicates;
        else
            ++stats_.rejected_out_of_order;
        check_rejects(false);
        return;
    }
    if (have_seen_ && r.timestamp < max_seen_ - options_.jitter_window_s) {
        ++stats_.rejected_out_of_order;
        check_rejects(false);
        return;
    }
    if (pending_.empty() || r.timestamp > pending_.back().timestamp) {
        pending_.push_back(r);
    } else {
        const auto it = std::lower_bound(pending_.begin(), pending_.end(), r.timestamp,
                                         [](const TelemetryRecord& a, Instant t) { return a.timestamp < t; });
        if (it != pending_.end() && it->timestamp == r.timestamp) {
            ++stats_.rejected_duplicates;
            check_rejects(false);
            return;
        }
        pending_.insert(it, r);
        ++stats_.reordered_rows;
    }
    if (!have_seen_ || r.timestamp > max_seen_) max_seen_ = r.timestamp;
    have_seen_ = true;
    release(false);
}

void TelemetryReader::release(bool flush_all) {
    while (!pending_.empty() && (flush_all || pending_.front().timestamp < max_seen_ - options_.jitter_window_s)) {
        emit(pending_.front());
        pending_.pop_front();
    }
}

void TelemetryReader::emit(const TelemetryRecord& r) {
    if (last_emitted_ && r.timestamp - *last_emitted_ > options_.gap_threshold_s) {
        ready_.emplace_back(GapMarker{*last_emitted_, r.timestamp});
        ++stats_.gap_count;
        stats_.gap_seconds += static_cast<std::uint64_t>(r.timestamp - *last_emitted_);
    }
    const double vi = r.voltage * r.current;
    stats_.power_residual_abs_sum += std::fabs(r.power - vi);
    stats_.power_abs_sum += std::fabs(vi);
    ready_.emplace_back(r);
    last_emitted_ = r.timestamp;
    ++stats_.records_emitted;
}

void TelemetryReader::check_rejects(bool at_eof) {
    if (!at_eof && stats_.rows_read < options_.nonmonotonic_min_rows) return;
    const double limit = options_.max_nonmonotonic_fraction * static_cast<double>(stats_.rows_read);
    if (static_cast<double>(stats_.rejected_total()) > limit)
        throw NonMonotonicTimestamp("non-monotonic timestamps: " + std::to_string(stats_.rejected_total()) + " of " +
                                    std::to_string(stats_.rows_read) + " rows rejected");
}

std::optional<StreamItem> TelemetryReader::next() {
    while (ready_.empty()) {
        if (finished_) return std::nullopt;
        if (!read_one_row()) {
            release(true);
            check_rejects(true);
            finished_ = true;
        }
    }
    StreamItem item = std::move(ready_.front());
    ready_.pop_front();
    return item;
}

std::vector<StreamItem> read_all(const std::vector<std::filesystem::path>& files, IngestOptions options,
                                 IngestStats* stats) {
    TelemetryReader reader(files, options);
    std::vector<StreamItem> out;
    while (auto item = reader.next()) out.push_back(std::move(*item));
    if (stats) *stats = reader.stats();
    return out;
}

}  // namespace ocvtrack
