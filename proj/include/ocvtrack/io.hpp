#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ocvtrack {

// Shortest decimal that round-trips the double; "nan"/"inf" spelled out.
std::string format_number(double v);
// Fixed number of decimals, for human-facing tables.
std::string format_fixed(double v, int decimals);

// Writes to a sibling temporary file, then renames over `path`; readers
// never observe a half-written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);
std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);
std::string hex64(std::uint64_t v);
std::string hash_file(const std::filesystem::path& path);  // 16 hex digits

// Minimal CSV: comma separated, no quoting needed for our artifacts.
std::vector<std::string> split_csv_line(std::string_view line);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    CsvWriter& cell(std::string_view text);
    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
    void end_row();
    const std::string& str() const { return out_; }

private:
    std::string out_;
    std::size_t columns_;
    std::size_t in_row_ = 0;
};

// Reads a header-checked CSV into rows of fields.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               const std::vector<std::string>& expected_header);
double parse_double_field(std::string_view text, const std::string& context);

}  // namespace ocvtrack
