#pragma once

// Corpus persistence and sliding-window dataset preparation.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "turnout/curve.hpp"
#include "turnout/error.hpp"
#include "turnout/ndjson.hpp"

namespace turnout {

/// The N most recent accepted curves, oldest first.
class CurveWindow {
public:
    explicit CurveWindow(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw Error(ErrorKind::InvalidArgument, "window length must be > 0");
        curves_.reserve(capacity);
    }

    /// Full window from exactly `capacity` curves.
    CurveWindow(std::span<const PowerCurve> curves, std::size_t capacity) : CurveWindow(capacity) {
        if (curves.size() != capacity) {
            throw Error(ErrorKind::Dimension, "window needs exactly " + std::to_string(capacity) +
                                                  " curves, got " + std::to_string(curves.size()));
        }
        curves_.assign(curves.begin(), curves.end());
    }

    /// Appends `curve`; once full, the oldest curve is discarded.
    void push(PowerCurve curve) {
        if (!curves_.empty() && curve.size() != curves_.front().size()) {
            throw Error(ErrorKind::Dimension, "curve length " + std::to_string(curve.size()) +
                                                  " does not match window curves of length " +
                                                  std::to_string(curves_.front().size()));
        }
        if (curves_.size() == capacity_) curves_.erase(curves_.begin());
        curves_.push_back(std::move(curve));
    }

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return curves_.size(); }
    bool full() const noexcept { return curves_.size() == capacity_; }
    const PowerCurve& operator[](std::size_t i) const { return curves_[i]; }
    const PowerCurve& back() const { return curves_.back(); }
    std::span<const PowerCurve> curves() const noexcept { return curves_; }

    bool operator==(const CurveWindow&) const = default;

private:
    std::size_t capacity_;
    std::vector<PowerCurve> curves_;
};

/// A window of N consecutive curves and the curve that followed it. Views into
/// the corpus passed to make_dataset, which must outlive the pair.
struct SupervisedPair {
    std::span<const PowerCurve> inputs;
    const PowerCurve* target = nullptr;
};

/// Pair k takes curves [k, k+N) as input and curve k+N as target, so a corpus
/// of M curves yields M - N pairs in corpus order.
inline std::vector<SupervisedPair> make_dataset(std::span<const PowerCurve> corpus, std::size_t window) {
    if (window == 0) throw Error(ErrorKind::InvalidArgument, "window length must be > 0");
    if (corpus.size() <= window) {
        throw Error(ErrorKind::InsufficientData,
                    "insufficient history: " + std::to_string(corpus.size()) +
                        " curves cannot fill a window of " + std::to_string(window) + " plus a target");
    }
    for (std::size_t i = 1; i < corpus.size(); ++i) {
        if (corpus[i].op_index != corpus[i - 1].op_index + 1) {
            throw Error(ErrorKind::InvalidArgument,
                        "dataset needs consecutive operations; op " + std::to_string(corpus[i].op_index) +
                            " follows op " + std::to_string(corpus[i - 1].op_index));
        }
    }
    std::vector<SupervisedPair> pairs;
    pairs.reserve(corpus.size() - window);
    for (std::size_t k = 0; k + window < corpus.size(); ++k) {
        pairs.push_back({corpus.subspan(k, window), &corpus[k + window]});
    }
    return pairs;
}

/// Chronological split: the first floor(M * train_fraction) records train.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& corpus, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "train_fraction must lie in (0, 1)");
    }
    const auto cut = static_cast<std::size_t>(std::floor(static_cast<double>(corpus.size()) * train_fraction));
    return {std::vector<T>(corpus.begin(), corpus.begin() + static_cast<std::ptrdiff_t>(cut)),
            std::vector<T>(corpus.begin() + static_cast<std::ptrdiff_t>(cut), corpus.end())};
}

// ---------------------------------------------------------------------------
// NDJSON corpus format:
//   {"op_index":0,"timestamp":1.7e9,"samples":[...],
//    "label":{"kind":"EarlyLifeNormal","severity":0.0},"tampered":false}

inline nlohmann::json record_to_json(const CurveRecord& r) {
    return {{"op_index", r.curve.op_index},
            {"timestamp", r.curve.timestamp},
            {"samples", r.curve.samples},
            {"label", {{"kind", to_string(r.label.kind)}, {"severity", r.label.severity}}},
            {"tampered", r.tampered}};
}

inline CurveRecord record_from_json(const nlohmann::json& j) {
    CurveRecord r;
    r.curve.op_index = j.at("op_index").get<std::int64_t>();
    r.curve.timestamp = j.at("timestamp").get<double>();
    r.curve.samples = j.at("samples").get<std::vector<double>>();
    if (j.contains("label")) {
        const auto& label = j.at("label");
        r.label.kind = curve_kind_from_string(label.at("kind").get<std::string>());
        r.label.severity = label.value("severity", 0.0);
    }
    r.tampered = j.value("tampered", false);
    return r;
}

/// Reads a corpus. `expected_length` pins L; otherwise the first record sets it.
/// An empty file is an empty corpus.
inline Corpus read_corpus(const std::filesystem::path& path, std::size_t expected_length = 0) {
    Corpus corpus;
    std::size_t length = expected_length;
    read_ndjson(path, [&](std::size_t, const nlohmann::json& doc) {
        CurveRecord r = record_from_json(doc);
        if (length == 0) length = r.curve.size();
        if (r.curve.size() != length || length == 0) {
            throw Error(ErrorKind::Schema, "expected " + std::to_string(length) + " samples, got " +
                                               std::to_string(r.curve.size()));
        }
        for (double s : r.curve.samples) {
            if (!std::isfinite(s) || s < 0.0) {
                throw Error(ErrorKind::Schema, "samples must be finite and >= 0");
            }
        }
        if (!corpus.empty()) {
            const auto& prev = corpus.back().curve;
            if (r.curve.op_index <= prev.op_index || r.curve.timestamp <= prev.timestamp) {
                throw Error(ErrorKind::Schema, "op_index and timestamp must strictly increase");
            }
        }
        corpus.push_back(std::move(r));
    });
    return corpus;
}

inline void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
    std::vector<nlohmann::json> docs;
    docs.reserve(corpus.size());
    for (const auto& r : corpus) docs.push_back(record_to_json(r));
    write_ndjson(path, docs);
}

} // namespace turnout
