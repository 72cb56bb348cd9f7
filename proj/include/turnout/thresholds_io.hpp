#pragma once

// Thresholds document: calibrated thresholds, the classifier baseline and a
// digest of the weights they were calibrated against.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "turnout/classifier.hpp"
#include "turnout/comparator.hpp"
#include "turnout/error.hpp"
#include "turnout/model_io.hpp"
#include "turnout/ndjson.hpp"

namespace turnout {

inline constexpr int kThresholdsFormatVersion = 1;
inline constexpr const char* kThresholdsFormatName = "turnout-thresholds";

/// FNV-1a over the canonical weights document.
inline std::string model_digest(const ForecastModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : model_to_json(model).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct CalibrationBundle {
    Thresholds thresholds;
    BaselineStats baseline;
    ClassifierConfig classifier;
    std::string model_digest;

    bool operator==(const CalibrationBundle&) const = default;
};

inline nlohmann::json bundle_to_json(const CalibrationBundle& b) {
    return {{"format", kThresholdsFormatName},
            {"format_version", kThresholdsFormatVersion},
            {"model_digest", b.model_digest},
            {"thresholds", b.thresholds},
            {"baseline", b.baseline},
            {"classifier", b.classifier}};
}

inline CalibrationBundle bundle_from_json(const nlohmann::json& doc) {
    try {
        if (doc.value("format", std::string{}) != kThresholdsFormatName) {
            throw Error(ErrorKind::Schema, "not a thresholds document");
        }
        const int version = doc.at("format_version").get<int>();
        if (version != kThresholdsFormatVersion) {
            throw Error(ErrorKind::Schema, "unsupported thresholds format_version " + std::to_string(version));
        }
        return {doc.at("thresholds").get<Thresholds>(), doc.at("baseline").get<BaselineStats>(),
                doc.value("classifier", ClassifierConfig{}), doc.at("model_digest").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("malformed thresholds document: ") + e.what());
    }
}

inline void save_bundle(const CalibrationBundle& bundle, const std::filesystem::path& path) {
    write_json_file(path, bundle_to_json(bundle));
}

inline CalibrationBundle load_bundle(const std::filesystem::path& path) {
    try {
        return bundle_from_json(read_json_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

} // namespace turnout
