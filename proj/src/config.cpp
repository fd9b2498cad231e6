#include "ocvtrack/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ocvtrack {

namespace {

using nlohmann::json;

class TomlParser {
public:
    explicit TomlParser(std::string_view text) : s_(text) {}

    json parse() {
        json root = json::object();
        json* table = &root;
        while (true) {
            skip_blank_lines();
            if (eof()) break;
            if (peek() == '[') {
                const bool array = s_.substr(pos_, 2) == "[[";
                pos_ += array ? 2 : 1;
                std::vector<std::string> path = key_path();
                skip_ws();
                expect(']');
                if (array) expect(']');
                end_of_line();
                table = open_table(root, path, array);
                continue;
            }
            std::vector<std::string> path = key_path();
            skip_ws();
            expect('=');
            skip_ws();
            json value = parse_value();
            end_of_line();
            assign(*table, path, std::move(value));
        }
        return root;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : s_[pos_]; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("TOML line " + std::to_string(line_) + ": " + what);
    }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }

    void newline() {
        if (peek() == '\r') ++pos_;
        if (peek() == '\n') {
            ++pos_;
            ++line_;
        }
    }

    void skip_blank_lines() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\n' || peek() == '\r')
                newline();
            else
                break;
        }
    }

    // Whitespace, comments and newlines inside arrays.
    void skip_space_multiline() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\n' || peek() == '\r')
                newline();
            else
                break;
        }
    }

    void end_of_line() {
        skip_ws();
        skip_comment();
        if (eof()) return;
        if (peek() != '\n' && peek() != '\r') fail("trailing characters");
        newline();
    }

    std::string bare_or_quoted_key() {
        skip_ws();
        if (peek() == '"' || peek() == '\'') return parse_string();
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
        if (pos_ == start) fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    std::vector<std::string> key_path() {
        std::vector<std::string> path{bare_or_quoted_key()};
        skip_ws();
        while (peek() == '.') {
            ++pos_;
            path.push_back(bare_or_quoted_key());
            skip_ws();
        }
        return path;
    }

    json* open_table(json& root, const std::vector<std::string>& path, bool array) {
        json* node = &root;
        for (std::size_t k = 0; k < path.size(); ++k) {
            json& child = (*node)[path[k]];
            const bool last = k + 1 == path.size();
            if (last && array) {
                if (child.is_null()) child = json::array();
                if (!child.is_array()) fail("'" + path[k] + "' is not an array of tables");
                child.push_back(json::object());
                return &child.back();
            }
            if (child.is_null()) child = json::object();
            if (child.is_array() && !child.empty() && child.back().is_object())
                node = &child.back();
            else if (child.is_object())
                node = &child;
            else
                fail("'" + path[k] + "' is not a table");
        }
        return node;
    }

    void assign(json& table, const std::vector<std::string>& path, json value) {
        json* node = &table;
        for (std::size_t k = 0; k + 1 < path.size(); ++k) {
            json& child = (*node)[path[k]];
            if (child.is_null()) child = json::object();
            if (!child.is_object()) fail("'" + path[k] + "' is not a table");
            node = &child;
        }
        if (node->contains(path.back())) fail("duplicate key '" + path.back() + "'");
        (*node)[path.back()] = std::move(value);
    }

    std::string parse_string() {
        const char quote = peek();
        ++pos_;
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = s_[pos_++];
            if (c == quote) break;
            if (c == '\\' && quote == '"') {
                if (eof()) fail("unterminated escape");
                const char e = s_[pos_++];
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
                continue;
            }
            out += c;
        }
        return out;
    }

    json parse_array() {
        expect('[');
        json arr = json::array();
        while (true) {
            skip_space_multiline();
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            arr.push_back(parse_value());
            skip_space_multiline();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            skip_space_multiline();
            expect(']');
            return arr;
        }
    }

    json parse_inline_table() {
        expect('{');
        json obj = json::object();
        skip_ws();
        if (peek() == '}') {
            ++pos_;
            return obj;
        }
        while (true) {
            std::vector<std::string> path = key_path();
            skip_ws();
            expect('=');
            skip_ws();
            assign(obj, path, parse_value());
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            expect('}');
            return obj;
        }
    }

    json parse_scalar_word() {
        const std::size_t start = pos_;
        while (!eof() && peek() != ',' && peek() != ']' && peek() != '}' && peek() != '#' && peek() != '\n' &&
               peek() != '\r' && !(peek() == ' ' && !looks_like_datetime(start)))
            ++pos_;
        std::string word(s_.substr(start, pos_ - start));
        while (!word.empty() && std::isspace(static_cast<unsigned char>(word.back()))) word.pop_back();
        if (word.empty()) fail("expected a value");
        if (word == "true") return true;
        if (word == "false") return false;
        if (word == "inf" || word == "+inf") return std::numeric_limits<double>::infinity();
        if (word == "-inf") return -std::numeric_limits<double>::infinity();
        std::string digits;
        for (const char c : word)
            if (c != '_') digits += c;
        if (!digits.empty() && digits.front() == '+') digits.erase(0, 1);
        const bool is_float = digits.find_first_of(".eE") != std::string::npos;
        if (!is_float) {
            long long v = 0;
            const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
            if (ec == std::errc() && p == digits.data() + digits.size()) return v;
        } else {
            double v = 0;
            const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
            if (ec == std::errc() && p == digits.data() + digits.size()) return v;
        }
        // Offset date-times and local dates are passed through as text.
        if (word.size() >= 10 && word[4] == '-' && word[7] == '-') return word;
        fail("cannot parse value '" + word + "'");
    }

    // A date followed by a space-separated time is one token.
    bool looks_like_datetime(std::size_t start) const {
        const std::size_t len = pos_ - start;
        return len == 10 && s_[start + 4] == '-' && s_[start + 7] == '-' && pos_ + 1 < s_.size() &&
               std::isdigit(static_cast<unsigned char>(s_[pos_ + 1]));
    }

    json parse_value() {
        switch (peek()) {
            case '"':
            case '\'': return parse_string();
            case '[': return parse_array();
            case '{': return parse_inline_table();
            default: return parse_scalar_word();
        }
    }
};

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

const json& section(const json& j, const char* key) {
    static const json empty = json::object();
    if (!j.contains(key)) return empty;
    const json& s = j.at(key);
    if (!s.is_object()) throw ConfigError(std::string("[") + key + "] must be a table");
    return s;
}

void check_positive(double v, const std::string& name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name + " must be positive");
}

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return TomlParser(text).parse(); }

nlohmann::json load_structured_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput(path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (path.extension() == ".toml") return parse_toml(text);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string to_string(DirectionSelection d) {
    switch (d) {
        case DirectionSelection::Charge: return "charge";
        case DirectionSelection::Discharge: return "discharge";
        case DirectionSelection::Both: return "both";
    }
    return "?";
}

DirectionSelection direction_selection_from_string(std::string_view text) {
    if (text == "charge") return DirectionSelection::Charge;
    if (text == "discharge") return DirectionSelection::Discharge;
    if (text == "both") return DirectionSelection::Both;
    throw ConfigError("direction must be charge, discharge or both");
}

void RunConfig::validate() const {
    system.validate();
    check_positive(phases.min_soc_span, "phases.min_soc_span_pct");
    check_positive(phases.max_dynamic_fraction, "phases.max_dynamic_fraction");
    check_positive(phases.idle_fraction, "phases.idle_fraction");
    check_positive(phases.grid_step, "phases.grid_step_pct");
    check_positive(align.voltage_step, "qocv.voltage_step_v");
    check_positive(fuse.voltage_step, "qocv.voltage_step_v");
    check_positive(diff.ic_sigma_v, "diff.ic_sigma_v");
    check_positive(diff.dv_sigma_soc, "diff.dv_sigma_soc_pct");
    check_positive(diff.dv_soc_step, "diff.dv_soc_step_pct");
    check_positive(pulses.min_delta_c, "dcr.min_step_c_rate");
    check_positive(pulses.hold_tolerance, "dcr.hold_tolerance");
    check_positive(dm_significance_floor, "foi.significance_floor_pp_per_year");
    if (dcr_table.soc_edges.size() < 2 || dcr_table.temp_edges.size() < 2)
        throw ConfigError("dcr bin edges need at least two entries");
    for (std::size_t k = 1; k < dcr_table.soc_edges.size(); ++k)
        if (!(dcr_table.soc_edges[k] > dcr_table.soc_edges[k - 1])) throw ConfigError("dcr.soc_edges must increase");
    for (std::size_t k = 1; k < dcr_table.temp_edges.size(); ++k)
        if (!(dcr_table.temp_edges[k] > dcr_table.temp_edges[k - 1])) throw ConfigError("dcr.temp_edges must increase");
    if (pulses.min_hold_s <= 0 || pulses.max_hold_s < pulses.min_hold_s) throw ConfigError("dcr hold window invalid");
    if (fuse.min_phases_per_point == 0 || fuse.min_phases_per_period == 0)
        throw ConfigError("qocv minimum counts must be positive");
    if (correlation_min_overlap < 3) throw ConfigError("correlation needs an overlap of at least 3 periods");
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a table");
    RunConfig c;
    try {
        if (j.contains("system")) c.system = j.at("system").get<SystemConfig>();

        const json& ing = section(j, "ingest");
        read_opt(ing, "gap_threshold_s", c.ingest.gap_threshold_s);
        read_opt(ing, "jitter_window_s", c.ingest.jitter_window_s);
        read_opt(ing, "max_nonmonotonic_fraction", c.ingest.max_nonmonotonic_fraction);

        const json& soc = section(j, "soc");
        if (soc.contains("initial_soc_pct")) c.soc.initial_soc = soc.at("initial_soc_pct").get<double>();
        read_opt(soc, "unanchored_start_soc_pct", c.soc.unanchored_start_soc);
        read_opt(soc, "anchor_hold_s", c.soc.anchor_hold_s);
        if (soc.contains("soh_csv")) c.soh_csv = soc.at("soh_csv").get<std::string>();

        const json& dcr = section(j, "dcr");
        read_opt(dcr, "min_step_a", c.pulses.min_delta_i);
        read_opt(dcr, "min_step_c_rate", c.pulses.min_delta_c);
        read_opt(dcr, "max_step_s", c.pulses.max_step_s);
        read_opt(dcr, "hold_tolerance", c.pulses.hold_tolerance);
        read_opt(dcr, "min_hold_s", c.pulses.min_hold_s);
        read_opt(dcr, "max_hold_s", c.pulses.max_hold_s);
        read_opt(dcr, "soc_edges", c.dcr_table.soc_edges);
        read_opt(dcr, "temp_edges", c.dcr_table.temp_edges);
        read_opt(dcr, "min_samples", c.dcr_table.min_samples);
        if (dcr.contains("period")) c.dcr_period = period_kind_from_string(dcr.at("period").get<std::string>());

        const json& ph = section(j, "phases");
        read_opt(ph, "idle_fraction", c.phases.idle_fraction);
        read_opt(ph, "min_soc_span_pct", c.phases.min_soc_span);
        read_opt(ph, "max_dynamic_fraction", c.phases.max_dynamic_fraction);
        read_opt(ph, "grid_step_pct", c.phases.grid_step);
        if (ph.contains("span_basis")) {
            const std::string b = ph.at("span_basis").get<std::string>();
            if (b == "nominal")
                c.phases.span_basis = SpanBasis::Nominal;
            else if (b == "reference")
                c.phases.span_basis = SpanBasis::Reference;
            else
                throw ConfigError("phases.span_basis must be nominal or reference");
        }

        const json& q = section(j, "qocv");
        if (q.contains("voltage_step_v")) c.align.voltage_step = c.fuse.voltage_step = q.at("voltage_step_v").get<double>();
        read_opt(q, "align_tolerance_pp", c.align.tolerance);
        read_opt(q, "align_max_iterations", c.align.max_iterations);
        read_opt(q, "outlier_limit_pp", c.align.outlier_limit);
        read_opt(q, "min_phases_per_point", c.fuse.min_phases_per_point);
        read_opt(q, "min_phases_per_period", c.fuse.min_phases_per_period);
        if (q.contains("period")) c.qocv_period = period_kind_from_string(q.at("period").get<std::string>());
        if (q.contains("direction")) c.direction = direction_selection_from_string(q.at("direction").get<std::string>());

        const json& d = section(j, "diff");
        read_opt(d, "ic_sigma_v", c.diff.ic_sigma_v);
        read_opt(d, "dv_sigma_soc_pct", c.diff.dv_sigma_soc);
        read_opt(d, "dv_soc_step_pct", c.diff.dv_soc_step);

        const json& f = section(j, "foi");
        if (f.contains("catalog")) c.foi_catalog = f.at("catalog").get<std::string>();
        read_opt(f, "significance_floor_pp_per_year", c.dm_significance_floor);
        read_opt(f, "correlation_min_overlap", c.correlation_min_overlap);

        const json& o = section(j, "output");
        if (o.contains("dir")) c.output_dir = o.at("dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

nlohmann::json to_json(const RunConfig& c) {
    json j;
    j["system"] = c.system;
    j["ingest"] = {{"gap_threshold_s", c.ingest.gap_threshold_s},
                   {"jitter_window_s", c.ingest.jitter_window_s},
                   {"max_nonmonotonic_fraction", c.ingest.max_nonmonotonic_fraction}};
    j["soc"] = {{"unanchored_start_soc_pct", c.soc.unanchored_start_soc}, {"anchor_hold_s", c.soc.anchor_hold_s}};
    if (c.soc.initial_soc) j["soc"]["initial_soc_pct"] = *c.soc.initial_soc;
    if (c.soh_csv) j["soc"]["soh_csv"] = c.soh_csv->generic_string();
    j["dcr"] = {{"min_step_a", c.pulses.min_delta_i},     {"min_step_c_rate", c.pulses.min_delta_c},
                {"max_step_s", c.pulses.max_step_s},     {"hold_tolerance", c.pulses.hold_tolerance},
                {"min_hold_s", c.pulses.min_hold_s},     {"max_hold_s", c.pulses.max_hold_s},
                {"soc_edges", c.dcr_table.soc_edges},    {"temp_edges", c.dcr_table.temp_edges},
                {"min_samples", c.dcr_table.min_samples}, {"period", to_string(c.dcr_period)}};
    j["phases"] = {{"idle_fraction", c.phases.idle_fraction},
                   {"min_soc_span_pct", c.phases.min_soc_span},
                   {"max_dynamic_fraction", c.phases.max_dynamic_fraction},
                   {"grid_step_pct", c.phases.grid_step},
                   {"span_basis", c.phases.span_basis == SpanBasis::Nominal ? "nominal" : "reference"}};
    j["qocv"] = {{"voltage_step_v", c.fuse.voltage_step},
                 {"align_tolerance_pp", c.align.tolerance},
                 {"align_max_iterations", c.align.max_iterations},
                 {"outlier_limit_pp", c.align.outlier_limit},
                 {"min_phases_per_point", c.fuse.min_phases_per_point},
                 {"min_phases_per_period", c.fuse.min_phases_per_period},
                 {"period", to_string(c.qocv_period)},
                 {"direction", to_string(c.direction)}};
    j["diff"] = {{"ic_sigma_v", c.diff.ic_sigma_v},
                 {"dv_sigma_soc_pct", c.diff.dv_sigma_soc},
                 {"dv_soc_step_pct", c.diff.dv_soc_step}};
    j["foi"] = {{"significance_floor_pp_per_year", c.dm_significance_floor},
                {"correlation_min_overlap", c.correlation_min_overlap}};
    if (c.foi_catalog) j["foi"]["catalog"] = c.foi_catalog->generic_string();
    j["output"] = {{"dir", c.output_dir.generic_string()}};
    return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    RunConfig c = run_config_from_json(load_structured_file(path));
    // Relative paths inside the file resolve against the file's directory.
    const auto base = path.parent_path();
    if (c.soh_csv && c.soh_csv->is_relative()) c.soh_csv = base / *c.soh_csv;
    if (c.foi_catalog && c.foi_catalog->is_relative()) c.foi_catalog = base / *c.foi_catalog;
    return c;
}

}  // namespace ocvtrack
