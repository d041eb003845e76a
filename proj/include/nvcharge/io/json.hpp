#pragma once

// Canonical JSON for reports (sorted keys, %.17g numbers, no insignificant
// whitespace variation), FNV-1a content hashes and config field access with
// dotted paths in error messages.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "nvcharge/errors.hpp"

namespace nvcharge::io {

using Json = nlohmann::json;

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string content_hash(std::string_view bytes) { return "fnv1a64:" + hex64(fnv1a64(bytes)); }

namespace detail {

inline void dump_string(const std::string& s, std::string& out) {
    // nlohmann's escaping is deterministic; reuse it for strings.
    out += Json(s).dump();
}

inline void dump_canonical(const Json& j, int indent, int depth, std::string& out) {
    const std::string pad = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
    const std::string close = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
    const std::string sep = indent > 0 ? ": " : ":";
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) { // std::map order: sorted keys
            if (!first) out += ",";
            first = false;
            out += pad;
            dump_string(it.key(), out);
            out += sep;
            dump_canonical(it.value(), indent, depth + 1, out);
        }
        out += close + "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",";
            out += pad;
            dump_canonical(j[i], indent, depth + 1, out);
        }
        out += close + "]";
        return;
    }
    case Json::value_t::number_float: {
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            out += "null";
            return;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
        out += buf;
        return;
    }
    default:
        out += j.dump();
        return;
    }
}

} // namespace detail

// Non-finite numbers become null.
inline std::string canonical_dump(const Json& j, int indent = 2) {
    std::string out;
    detail::dump_canonical(j, indent, 0, out);
    return out;
}

inline std::string report_hash(const Json& j) { return content_hash(canonical_dump(j, -1)); }

// Parses JSON text, turning syntax errors into ParseError with a line number.
inline Json parse_json(std::string_view text) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        std::size_t line = 1;
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        for (std::size_t i = 0; i + 1 < upto; ++i)
            if (text[i] == '\n') ++line;
        throw ParseError(std::string("invalid JSON: ") + e.what(), line, ParseIssue::Syntax);
    }
}

// Typed access to configuration objects; failures name the dotted path.
class ConfigView {
public:
    ConfigView(const Json& j, std::string path = "") : j_(&j), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const Json& raw() const { return *j_; }

    std::string child_path(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

    bool has(std::string_view key) const { return j_->is_object() && j_->contains(std::string(key)); }

    ConfigView at(std::string_view key) const {
        if (!j_->is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
        const auto it = j_->find(std::string(key));
        if (it == j_->end()) throw ConfigError(child_path(key), "missing required field");
        return ConfigView(*it, child_path(key));
    }

    double number() const {
        if (!j_->is_number()) throw ConfigError(path_, "expected a number");
        const double v = j_->get<double>();
        if (!std::isfinite(v)) throw ConfigError(path_, "expected a finite number");
        return v;
    }

    double number(std::string_view key) const { return at(key).number(); }
    double number_or(std::string_view key, double fallback) const { return has(key) ? number(key) : fallback; }

    double positive(std::string_view key) const {
        const double v = number(key);
        if (!(v > 0.0)) throw ConfigError(child_path(key), "must be > 0");
        return v;
    }
    double non_negative(std::string_view key) const {
        const double v = number(key);
        if (!(v >= 0.0)) throw ConfigError(child_path(key), "must be >= 0");
        return v;
    }
    double non_negative_or(std::string_view key, double fallback) const { return has(key) ? non_negative(key) : fallback; }

    std::uint64_t uint(std::string_view key) const {
        const ConfigView v = at(key);
        if (!v.j_->is_number_integer() || (v.j_->is_number_integer() && !v.j_->is_number_unsigned() && v.j_->get<std::int64_t>() < 0))
            throw ConfigError(v.path_, "expected a non-negative integer");
        return v.j_->get<std::uint64_t>();
    }
    std::uint64_t uint_or(std::string_view key, std::uint64_t fallback) const { return has(key) ? uint(key) : fallback; }

    std::string string(std::string_view key) const {
        const ConfigView v = at(key);
        if (!v.j_->is_string()) throw ConfigError(v.path_, "expected a string");
        return v.j_->get<std::string>();
    }
    std::string string_or(std::string_view key, const std::string& fallback) const { return has(key) ? string(key) : fallback; }

    bool boolean_or(std::string_view key, bool fallback) const {
        if (!has(key)) return fallback;
        const ConfigView v = at(key);
        if (!v.j_->is_boolean()) throw ConfigError(v.path_, "expected true or false");
        return v.j_->get<bool>();
    }

    std::vector<double> numbers(std::string_view key) const {
        const ConfigView v = at(key);
        if (!v.j_->is_array()) throw ConfigError(v.path_, "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.j_->size(); ++i)
            out.push_back(ConfigView((*v.j_)[i], v.path_ + "[" + std::to_string(i) + "]").number());
        return out;
    }

private:
    const Json* j_;
    std::string path_;
};

} // namespace nvcharge::io
