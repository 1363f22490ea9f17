#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "apbench/metrics.hpp"
#include "apbench/train.hpp"

namespace apbench {

// ============================================================================
// Run artifacts: NDJSON records (metrics, training history, per-window
// dumps) and the rendered scores table.
// ============================================================================

/// Flat record of one MetricsReport; absent TP-conditional means serialize
/// as nulls. Callers add run identity (dataset, model, seed) before writing.
inline nlohmann::json metrics_to_json(const MetricsReport& r) {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json();
    };
    nlohmann::json j;
    j["n_windows"] = r.n_windows;
    j["tp"] = r.counts.tp;
    j["fp"] = r.counts.fp;
    j["fn"] = r.counts.fn;
    j["tn"] = r.counts.tn;
    j["existence"] = r.existence;
    j["mean_density"] = opt(r.mean_density);
    j["mean_lead_time"] = opt(r.mean_lead_time);
    j["mean_dice"] = opt(r.mean_dice);
    j["mean_wasserstein"] = r.mean_wasserstein;
    j["mean_wasserstein_tp"] = opt(r.mean_wasserstein_tp);
    j["n_tp_localizable"] = r.n_tp_localizable;
    return j;
}

inline void write_ndjson(const std::filesystem::path& path,
                         std::span<const nlohmann::json> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : records) out << r.dump() << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void write_history_ndjson(const std::filesystem::path& path,
                                 std::span<const EpochStats> history) {
    std::vector<nlohmann::json> records;
    records.reserve(history.size());
    for (const auto& e : history) {
        nlohmann::json j;
        j["epoch"] = e.epoch;
        j["train_loss"] = e.train_loss;
        j["val_loss"] = e.val_loss;
        j["improved"] = e.improved;
        records.push_back(std::move(j));
    }
    write_ndjson(path, records);
}

inline void write_windows_ndjson(const std::filesystem::path& path,
                                 std::span<const WindowEval> windows) {
    std::vector<nlohmann::json> records;
    records.reserve(windows.size());
    for (const auto& w : windows) {
        nlohmann::json j;
        j["instance_id"] = w.instance_id;
        j["offset"] = w.offset;
        j["verdict"] = to_string(w.verdict);
        j["wasserstein"] = w.wasserstein;
        j["pred"] = w.pred;
        j["target"] = w.target;
        records.push_back(std::move(j));
    }
    write_ndjson(path, records);
}

namespace detail {

inline std::string fmt3(const nlohmann::json& v) {
    if (v.is_null()) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v.get<double>());
    return buf;
}

}  // namespace detail

/// Renders metric records as an aligned text table with one row per record
/// (columns: dataset, model, Wasserstein, Existence, Density, Lead Time,
/// Dice). Records are the flat NDJSON objects produced by eval runs.
inline std::string render_metrics_table(std::span<const nlohmann::json> records) {
    const std::vector<std::string> headers = {"Dataset",   "Model",   "Wasserstein",
                                              "Existence", "Density", "Lead Time",
                                              "Dice"};
    std::vector<std::vector<std::string>> rows;
    rows.push_back(headers);
    for (const auto& r : records) {
        rows.push_back({r.value("dataset", std::string("?")),
                        r.value("model", std::string("?")),
                        detail::fmt3(r.value("mean_wasserstein", nlohmann::json())),
                        detail::fmt3(r.value("existence", nlohmann::json())),
                        detail::fmt3(r.value("mean_density", nlohmann::json())),
                        detail::fmt3(r.value("mean_lead_time", nlohmann::json())),
                        detail::fmt3(r.value("mean_dice", nlohmann::json()))});
    }
    std::vector<std::size_t> width(headers.size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c)
            width[c] = std::max(width[c], row[c].size());

    std::string out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            out += rows[r][c];
            if (c + 1 < rows[r].size())
                out.append(width[c] - rows[r][c].size() + 2, ' ');
        }
        out += '\n';
        if (r == 0) {
            for (std::size_t c = 0; c < width.size(); ++c) {
                out.append(width[c], '-');
                if (c + 1 < width.size()) out += "  ";
            }
            out += '\n';
        }
    }
    return out;
}

}  // namespace apbench
