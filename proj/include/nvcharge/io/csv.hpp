#pragma once

// Plain-text tables: spectra, sweeps, arrival times, histograms and
// trajectories. Numbers are written with 17 significant digits so a
// write/parse round trip is exact.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nvcharge/errors.hpp"
#include "nvcharge/spectrum.hpp"
#include "nvcharge/sweep_fit.hpp"

namespace nvcharge::io {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

// Strict decimal parse; accepts "nan"/"inf" spellings so they can be
// reported as non-finite rather than as syntax errors.
inline double parse_number(std::string_view field, std::size_t line) {
    if (field.empty()) throw ParseError("empty field", line, ParseIssue::NotANumber);
    std::string_view f = field;
    if (f.front() == '+') f.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec == std::errc::result_out_of_range) throw ParseError("number out of range: '" + std::string(field) + "'", line, ParseIssue::NotFinite);
    if (ec != std::errc() || ptr != f.data() + f.size())
        throw ParseError("not a number: '" + std::string(field) + "'", line, ParseIssue::NotANumber);
    return v;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> row_lines; // source line of each row
    std::map<std::string, std::string> metadata;
};

// `# key: value` lines before the header become metadata; other '#' lines
// and blank lines are ignored. The header must match one of `accepted`.
inline Table parse_table(std::string_view text, const std::vector<std::vector<std::string>>& accepted, const char* what) {
    Table t;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '#') {
            if (!have_header) {
                const std::string_view body = trim(line.substr(1));
                const auto colon = body.find(':');
                if (colon != std::string_view::npos && colon > 0)
                    t.metadata[std::string(trim(body.substr(0, colon)))] = std::string(trim(body.substr(colon + 1)));
            }
            continue;
        }
        const auto fields = split(line, ',');
        if (!have_header) {
            std::vector<std::string> h(fields.begin(), fields.end());
            bool ok = false;
            for (const auto& a : accepted) ok = ok || a == h;
            if (!ok) {
                std::string expect;
                for (const auto& a : accepted) {
                    if (!expect.empty()) expect += " or ";
                    for (std::size_t i = 0; i < a.size(); ++i) expect += (i ? "," : "") + a[i];
                }
                throw ParseError(std::string(what) + ": expected header " + expect, line_no, ParseIssue::Header);
            }
            t.header = std::move(h);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError(std::string(what) + ": expected " + std::to_string(t.header.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no, ParseIssue::FieldCount);
        std::vector<double> row;
        for (const auto& f : fields) row.push_back(parse_number(f, line_no));
        t.rows.push_back(std::move(row));
        t.row_lines.push_back(line_no);
    }
    if (!have_header) throw ParseError(std::string(what) + ": missing header line", line_no, ParseIssue::Header);
    return t;
}

inline void require_finite(const Table& t, std::size_t col, const char* what) {
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        if (!std::isfinite(t.rows[r][col]))
            throw ParseError(std::string(what) + ": non-finite " + t.header[col], t.row_lines[r], ParseIssue::NotFinite);
}

inline spectra::SpectrumTrace parse_spectrum_csv(std::string_view text) {
    const Table t = parse_table(text, {{"wavelength_nm", "counts"}}, "spectrum");
    require_finite(t, 0, "spectrum");
    require_finite(t, 1, "spectrum");
    spectra::SpectrumTrace s;
    s.metadata = t.metadata;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (r && !(t.rows[r][0] > t.rows[r - 1][0]))
            throw ParseError("spectrum: wavelengths must be strictly increasing", t.row_lines[r], ParseIssue::NonMonotonic);
        s.wavelengths.push_back(t.rows[r][0]);
        s.counts.push_back(t.rows[r][1]);
    }
    if (s.size() < 2) throw ParseError("spectrum: need at least 2 rows", 0, ParseIssue::TooShort);
    return s;
}

inline std::string write_spectrum_csv(const spectra::SpectrumTrace& s) {
    std::string out;
    for (const auto& [k, v] : s.metadata) {
        if (k.find_first_of(":\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw DomainError("write_spectrum_csv: metadata key/value not representable: " + k);
        out += "# " + k + ": " + v + "\n";
    }
    out += "wavelength_nm,counts\n";
    for (std::size_t i = 0; i < s.size(); ++i) out += fmt_double(s.wavelengths[i]) + "," + fmt_double(s.counts[i]) + "\n";
    return out;
}

// Empty tables are accepted; the fitters enforce their own minimum sizes.
inline std::vector<kinetics::SweepPoint> parse_sweep_csv(std::string_view text) {
    const Table t = parse_table(text, {{"x", "y"}, {"x", "y", "y_err"}}, "sweep");
    for (std::size_t c = 0; c < t.header.size(); ++c) require_finite(t, c, "sweep");
    std::vector<kinetics::SweepPoint> pts;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        kinetics::SweepPoint p{t.rows[r][0], t.rows[r][1]};
        if (t.header.size() == 3) {
            p.y_err = t.rows[r][2];
            if (!(p.y_err > 0.0)) throw ParseError("sweep: y_err must be > 0", t.row_lines[r], ParseIssue::Negative);
        }
        pts.push_back(p);
    }
    return pts;
}

inline std::string write_sweep_csv(std::span<const kinetics::SweepPoint> pts) {
    bool with_err = !pts.empty();
    for (const auto& p : pts) with_err = with_err && std::isfinite(p.y_err);
    std::string out = with_err ? "x,y,y_err\n" : "x,y\n";
    for (const auto& p : pts) {
        out += fmt_double(p.x) + "," + fmt_double(p.y);
        if (with_err) out += "," + fmt_double(p.y_err);
        out += "\n";
    }
    return out;
}

inline std::vector<double> parse_arrivals_csv(std::string_view text) {
    const Table t = parse_table(text, {{"t_s"}}, "arrivals");
    require_finite(t, 0, "arrivals");
    std::vector<double> v;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r][0] < 0.0) throw ParseError("arrivals: negative arrival time", t.row_lines[r], ParseIssue::Negative);
        v.push_back(t.rows[r][0]);
    }
    return v;
}

inline std::string write_arrivals_csv(std::span<const double> times) {
    std::string out = "t_s\n";
    for (double x : times) out += fmt_double(x) + "\n";
    return out;
}

// Raw little-endian float64 values, no header.
inline std::vector<double> parse_arrivals_binary(std::string_view bytes) {
    if (bytes.size() % 8 != 0) throw ParseError("arrivals: binary size is not a multiple of 8 bytes", 0, ParseIssue::Syntax);
    std::vector<double> v(bytes.size() / 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t u = 0;
        for (int b = 7; b >= 0; --b) u = (u << 8) | static_cast<unsigned char>(bytes[8 * i + static_cast<std::size_t>(b)]);
        std::memcpy(&v[i], &u, 8);
        if (!std::isfinite(v[i])) throw ParseError("arrivals: non-finite value at record " + std::to_string(i), 0, ParseIssue::NotFinite);
        if (v[i] < 0.0) throw ParseError("arrivals: negative arrival time at record " + std::to_string(i), 0, ParseIssue::Negative);
    }
    return v;
}

inline std::string write_arrivals_binary(std::span<const double> times) {
    std::string out(times.size() * 8, '\0');
    for (std::size_t i = 0; i < times.size(); ++i) {
        std::uint64_t u = 0;
        std::memcpy(&u, &times[i], 8);
        for (std::size_t b = 0; b < 8; ++b) out[8 * i + b] = static_cast<char>((u >> (8 * b)) & 0xFF);
    }
    return out;
}

struct HistogramTable {
    std::vector<double> t_centers;
    std::vector<double> counts;
    std::map<std::string, std::string> metadata;
};

inline HistogramTable parse_histogram_csv(std::string_view text) {
    const Table t = parse_table(text, {{"t_center_s", "counts"}}, "histogram");
    require_finite(t, 0, "histogram");
    require_finite(t, 1, "histogram");
    HistogramTable h;
    h.metadata = t.metadata;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (r && !(t.rows[r][0] > t.rows[r - 1][0]))
            throw ParseError("histogram: bin times must be strictly increasing", t.row_lines[r], ParseIssue::NonMonotonic);
        if (t.rows[r][0] < 0.0 || t.rows[r][1] < 0.0)
            throw ParseError("histogram: negative time or count", t.row_lines[r], ParseIssue::Negative);
        h.t_centers.push_back(t.rows[r][0]);
        h.counts.push_back(t.rows[r][1]);
    }
    return h;
}

inline std::string write_histogram_csv(std::span<const double> t_centers, std::span<const double> counts,
                                       const std::map<std::string, std::string>& metadata = {}) {
    std::string out;
    for (const auto& [k, v] : metadata) out += "# " + k + ": " + v + "\n";
    out += "t_center_s,counts\n";
    for (std::size_t i = 0; i < t_centers.size(); ++i) out += fmt_double(t_centers[i]) + "," + fmt_double(counts[i]) + "\n";
    return out;
}

// Column-major numeric table with a header row.
inline std::string write_columns_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& cols) {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
    out += "\n";
    const std::size_t n = cols.empty() ? 0 : cols.front().size();
    for (const auto& c : cols)
        if (c.size() != n) throw DomainError("write_columns_csv: columns differ in length");
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + fmt_double(cols[c][r]);
        out += "\n";
    }
    return out;
}

} // namespace nvcharge::io
