#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "turnout/error.hpp"

namespace turnout {

/// Calls `on_record(line_number, document)` for every non-blank line.
/// Parse failures and exceptions thrown by the callback are reported as
/// schema errors naming the 1-based line.
inline void read_ndjson(const std::filesystem::path& path,
                        const std::function<void(std::size_t, const nlohmann::json&)>& on_record) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = path.string() + ":" + std::to_string(line_number) + ": ";
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Schema, where + "malformed JSON: " + e.what());
        }
        try {
            on_record(line_number, doc);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Schema, where + e.what());
        } catch (const Error& e) {
            throw Error(e.kind() == ErrorKind::Io ? ErrorKind::Io : ErrorKind::Schema, where + e.what());
        }
    }
    if (in.bad()) throw Error(ErrorKind::Io, "read error on '" + path.string() + "'");
}

inline void write_ndjson(const std::filesystem::path& path, const std::vector<nlohmann::json>& docs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    for (const auto& doc : docs) out << doc.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write error on '" + path.string() + "'");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, path.string() + ": malformed JSON: " + e.what());
    }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write error on '" + path.string() + "'");
}

} // namespace turnout
