#pragma once

#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ocvtrack/error.hpp"
#include "ocvtrack/telemetry.hpp"

namespace ocvtrack {

inline constexpr std::string_view telemetry_header = "timestamp,voltage_v,current_a,power_w,temperature_c";

struct IngestOptions {
    Instant gap_threshold_s = 5;
    Instant jitter_window_s = 2;
    double max_nonmonotonic_fraction = 0.001;
    std::size_t nonmonotonic_min_rows = 1000;  // the fraction is enforced once this many rows were read, and at EOF
};

struct MalformedRow {
    std::string file;
    std::uint64_t line_no = 0;
    std::string reason;
};

struct IngestStats {
    std::uint64_t rows_read = 0;
    std::uint64_t records_emitted = 0;
    std::uint64_t malformed_rows = 0;
    std::vector<MalformedRow> malformed_samples;  // first few only
    std::uint64_t reordered_rows = 0;
    std::uint64_t rejected_out_of_order = 0;
    std::uint64_t rejected_duplicates = 0;
    std::uint64_t gap_count = 0;
    std::uint64_t gap_seconds = 0;
    double power_residual_abs_sum = 0.0;  // sum |P - V*I|
    double power_abs_sum = 0.0;           // sum |V*I|

    std::uint64_t rejected_total() const { return rejected_out_of_order + rejected_duplicates; }
    // Mean relative disagreement between the power channel and V*I.
    double power_residual_ratio() const {
        return power_abs_sum > 0.0 ? power_residual_abs_sum / power_abs_sum : 0.0;
    }
};

class NonMonotonicTimestamp : public Error {
public:
    explicit NonMonotonicTimestamp(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// Buffered line splitter over a C stream; lines are views into an internal
// buffer that stay valid until the next call.
class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path, std::size_t chunk = 1 << 20);
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;
    bool next(std::string_view& line);
    std::uint64_t line_no() const { return line_no_; }

private:
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> file_;
    std::vector<char> buf_;
    std::size_t begin_ = 0;
    std::size_t end_ = 0;
    bool eof_ = false;
    std::uint64_t line_no_ = 0;
};

enum class TimestampFormat { Unknown, Epoch, Rfc3339 };

// Parses one data row. Returns an empty string on success, else the reason.
std::string parse_row(std::string_view line, TimestampFormat& format, TelemetryRecord& out);

// Single-pass reader over one or more CSV files. Files are ordered by their
// first timestamp and share one reorder buffer, so the output is a single
// timestamp-ordered stream with gap markers.
class TelemetryReader {
public:
    explicit TelemetryReader(std::vector<std::filesystem::path> files, IngestOptions options = {});
    TelemetryReader(const TelemetryReader&) = delete;
    TelemetryReader& operator=(const TelemetryReader&) = delete;
    ~TelemetryReader();

    std::optional<StreamItem> next();
    const IngestStats& stats() const { return stats_; }
    const std::vector<std::filesystem::path>& files() const { return files_; }

private:
    bool read_one_row();
    void accept(const TelemetryRecord& r);
    void release(bool flush_all);
    void emit(const TelemetryRecord& r);
    void check_rejects(bool at_eof);
    void open_file(std::size_t index);

    std::vector<std::filesystem::path> files_;
    IngestOptions options_;
    IngestStats stats_;
    std::size_t file_index_ = 0;
    std::unique_ptr<LineReader> reader_;
    TimestampFormat format_ = TimestampFormat::Unknown;
    std::deque<TelemetryRecord> pending_;  // reorder buffer, sorted
    std::deque<StreamItem> ready_;
    Instant max_seen_ = 0;
    bool have_seen_ = false;
    std::optional<Instant> last_emitted_;
    bool finished_ = false;
};

// Convenience: drains a reader into memory. Only for small inputs and tests.
std::vector<StreamItem> read_all(const std::vector<std::filesystem::path>& files, IngestOptions options = {},
                                 IngestStats* stats = nullptr);

}  // namespace ocvtrack
