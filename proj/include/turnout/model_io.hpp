#pragma once

// Versioned JSON weights file. Blocks are stored row-major with explicit
// shapes; per-gate blocks are split out of the stacked matrices.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "turnout/error.hpp"
#include "turnout/lstm.hpp"
#include "turnout/ndjson.hpp"

namespace turnout {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatName = "turnout-lstm-forecaster";

namespace detail {

inline nlohmann::json block_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

inline void read_block(const nlohmann::json& doc, const std::string& name, Eigen::Ref<Eigen::MatrixXd> dst) {
    if (!doc.contains(name)) throw Error(ErrorKind::Schema, "weights file lacks parameter block '" + name + "'");
    const auto& blk = doc.at(name);
    const auto shape = blk.at("shape").get<std::vector<Index>>();
    const auto data = blk.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != dst.rows() || shape[1] != dst.cols() ||
        static_cast<Index>(data.size()) != dst.size()) {
        throw Error(ErrorKind::Schema, "parameter block '" + name + "' has the wrong shape");
    }
    for (Index i = 0; i < dst.rows(); ++i)
        for (Index j = 0; j < dst.cols(); ++j) {
            const double v = data[static_cast<std::size_t>(i * dst.cols() + j)];
            if (!std::isfinite(v)) throw Error(ErrorKind::Schema, "non-finite value in block '" + name + "'");
            dst(i, j) = v;
        }
}

inline const char* const kGateNames[] = {"i", "f", "o", "g"};

} // namespace detail

inline nlohmann::json model_to_json(const ForecastModel& model) {
    const Index H = model.hidden();
    const LstmParams& p = model.params;
    nlohmann::json params;
    for (int g = 0; g < 4; ++g) {
        const std::string gate = detail::kGateNames[g];
        params["W_" + gate] = detail::block_json(p.W().middleRows(g * H, H));
        params["U_" + gate] = detail::block_json(p.U().middleRows(g * H, H));
        params["b_" + gate] = detail::block_json(p.b().segment(g * H, H));
    }
    params["V"] = detail::block_json(p.V());
    params["c"] = detail::block_json(p.c());
    const auto& n = model.normalization;
    return {{"format", kModelFormatName},
            {"format_version", kModelFormatVersion},
            {"hyper",
             {{"window", model.window},
              {"input", model.input()},
              {"hidden", H},
              {"epochs", model.metadata.epochs},
              {"seed", model.metadata.seed}}},
            {"window_orientation", "oldest_first"},
            {"layout", "row_major"},
            {"normalization",
             {{"mean", std::vector<double>(n.mean.data(), n.mean.data() + n.mean.size())},
              {"scale", std::vector<double>(n.scale.data(), n.scale.data() + n.scale.size())}}},
            {"parameters", std::move(params)}};
}

inline ForecastModel model_from_json(const nlohmann::json& doc) {
    try {
        if (doc.value("format", std::string{}) != kModelFormatName) {
            throw Error(ErrorKind::Schema, "not a forecaster weights file");
        }
        const int version = doc.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw Error(ErrorKind::Schema, "unsupported weights format_version " + std::to_string(version) +
                                               " (expected " + std::to_string(kModelFormatVersion) + ")");
        }
        const auto& hyper = doc.at("hyper");
        const auto window = hyper.at("window").get<std::size_t>();
        const auto input = hyper.at("input").get<Index>();
        const auto hidden = hyper.at("hidden").get<Index>();
        if (window == 0 || input <= 0 || hidden <= 0) throw Error(ErrorKind::Schema, "invalid model dimensions");

        ForecastModel model(window, input, hidden);
        model.metadata = {hyper.value("epochs", std::size_t{0}), hyper.value("seed", std::uint64_t{0}), version};
        const auto mean = doc.at("normalization").at("mean").get<std::vector<double>>();
        const auto scale = doc.at("normalization").at("scale").get<std::vector<double>>();
        if (static_cast<Index>(mean.size()) != input || static_cast<Index>(scale.size()) != input) {
            throw Error(ErrorKind::Schema, "normalization statistics have the wrong length");
        }
        for (Index i = 0; i < input; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (!std::isfinite(mean[k]) || !(scale[k] > 0) || !std::isfinite(scale[k])) {
                throw Error(ErrorKind::Schema, "invalid normalization statistics");
            }
            model.normalization.mean[i] = mean[k];
            model.normalization.scale[i] = scale[k];
        }
        const auto& params = doc.at("parameters");
        LstmParams& p = model.params;
        for (int g = 0; g < 4; ++g) {
            const std::string gate = detail::kGateNames[g];
            detail::read_block(params, "W_" + gate, p.W().middleRows(g * hidden, hidden));
            detail::read_block(params, "U_" + gate, p.U().middleRows(g * hidden, hidden));
            detail::read_block(params, "b_" + gate, p.b().segment(g * hidden, hidden));
        }
        detail::read_block(params, "V", p.V());
        detail::read_block(params, "c", p.c());
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("malformed weights file: ") + e.what());
    }
}

inline void save_model(const ForecastModel& model, const std::filesystem::path& path) {
    write_json_file(path, model_to_json(model));
}

inline ForecastModel load_model(const std::filesystem::path& path) {
    try {
        return model_from_json(read_json_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

} // namespace turnout
