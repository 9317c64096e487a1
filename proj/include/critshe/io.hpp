#pragma once

// Result persistence: canonical JSON (sorted keys, 17 significant digits),
// RFC 4180 CSV, and git-style content hashes.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "critshe/error.hpp"
#include "json.hpp"

namespace critshe::io {

using Json = nlohmann::json;

class IoError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::string number(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write(const Json& j, std::string& out, int indent) {
    const std::string pad(std::size_t(indent + 2), ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) { // std::map keeps keys sorted
            if (!first) out += ",\n";
            first = false;
            out += pad + Json(it.key()).dump() + ": ";
            write(it.value(), out, indent + 2);
        }
        out += "\n" + std::string(std::size_t(indent), ' ') + "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += pad;
            write(j[i], out, indent + 2);
        }
        out += "\n" + std::string(std::size_t(indent), ' ') + "]";
        return;
    }
    case Json::value_t::number_float: out += number(j.get<double>()); return;
    default: out += j.dump(); return;
    }
}

} // namespace detail

inline std::string to_canonical_json(const Json& j) {
    std::string out;
    detail::write(j, out, 0);
    out += "\n";
    return out;
}

// SHA-1 of "blob <size>\0<content>", the identifier git gives a file.
inline std::string git_blob_hash(const std::string& content) {
    const std::string data = "blob " + std::to_string(content.size()) + '\0' + content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1)
        throw NumericalError("git_blob_hash: SHA-1 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

// A value with its error bar; error < 0 marks an exact quantity.
inline Json quantity(double value, double error) {
    Json q;
    q["value"] = value;
    if (error < 0.0)
        q["error"] = "exact";
    else
        q["error"] = error;
    return q;
}

inline Json exact(double value) { return quantity(value, -1.0); }

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> row) {
        if (row.size() != header_.size()) throw DomainError("CsvTable: row width differs from header");
        rows_.push_back(std::move(row));
    }

    std::size_t rows() const { return rows_.size(); }

    static std::string field(const std::string& s) {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    }

    static std::string num(double v) { return detail::number(v); }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) out += ',';
                out += field(r[i]);
            }
            out += "\r\n";
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << content;
    os.flush();
    if (!os) throw IoError("write to '" + path + "' failed");
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace critshe::io
