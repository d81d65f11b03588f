#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vwapforge/numerics/param_store.hpp"

namespace vwapforge {

/// Checkpoint file layout (JSON):
///   {
///     "format_version": 1,
///     "metadata": { ... caller-defined ... },
///     "rng_seed": <uint>,
///     "params": { "<name>": { "shape": [r, c], "values": [...] }, ... }
///   }
/// Doubles are written in shortest round-trip form, so save/load is
/// bit-exact.
inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    ParamStore params;
    nlohmann::json metadata = nlohmann::json::object();
};

inline nlohmann::json checkpoint_to_json(const ParamStore& params, const nlohmann::json& metadata) {
    nlohmann::json doc;
    doc["format_version"] = kCheckpointFormatVersion;
    doc["metadata"] = metadata;
    doc["rng_seed"] = params.rng_seed();
    nlohmann::json ps = nlohmann::json::object();
    for (const auto& [name, e] : params.entries()) {
        ps[name] = {{"shape", e.value.shape()}, {"values", e.value.storage()}};
    }
    doc["params"] = std::move(ps);
    return doc;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != kCheckpointFormatVersion) {
            throw Error("checkpoint: unsupported format_version " + std::to_string(version));
        }
        Checkpoint ck{ParamStore(doc.at("rng_seed").get<std::uint64_t>()), doc.value("metadata", nlohmann::json::object())};
        for (const auto& [name, entry] : doc.at("params").items()) {
            Shape shape = entry.at("shape").get<Shape>();
            std::vector<double> values = entry.at("values").get<std::vector<double>>();
            Tensor t(shape, std::move(values));
            if (!t.all_finite()) throw Error("checkpoint: non-finite value in '" + name + "'");
            ck.params.set(name, std::move(t));
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("checkpoint: malformed document: ") + e.what());
    }
}

inline void save_checkpoint(const std::string& path, const ParamStore& params, const nlohmann::json& metadata) {
    std::ofstream out(path);
    if (!out) throw Error("checkpoint: cannot write " + path);
    out << checkpoint_to_json(params, metadata).dump() << '\n';
    if (!out) throw Error("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("checkpoint: cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("checkpoint: " + path + " is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(doc);
}

} // namespace vwapforge
