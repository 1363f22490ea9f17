#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "apbench/seeding.hpp"
#include "apbench/series.hpp"
#include "apbench/synth.hpp"

namespace apbench {

// ============================================================================
// Dataset serialization
//
// One dataset = a directory holding manifest.json plus one CSV per instance
// (header `feature_0,...,feature_{M-1},label`, one row per time step).
// Values are written with 17 significant digits so save -> load round-trips
// bit-exactly; the manifest records per-file FNV-1a content hashes.
// ============================================================================

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline double parse_double_cell(std::string_view cell, const std::string& file,
                                std::size_t line_no, const std::string& column) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw std::runtime_error("bad numeric cell '" + std::string(cell) + "' in " +
                                 file + " line " + std::to_string(line_no) +
                                 " column '" + column + "'");
    return v;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.emplace_back(line.substr(start));
            break;
        }
        cells.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

/// Reads a whole text file into lines, normalizing \r\n; throws if missing.
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

}  // namespace detail

inline std::string file_content_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for hashing: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    char out[32];
    std::snprintf(out, sizeof out, "fnv1a:%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return out;
}

// ----------------------------------------------------------------------------
// GenConfig <-> JSON (used by manifests and CLI config files)
// ----------------------------------------------------------------------------

inline nlohmann::json duration_to_json(const DurationSpec& d) {
    nlohmann::json j;
    j["kind"] = d.kind == DurationSpec::Kind::Fixed ? "fixed" : "gaussian";
    j["mean"] = d.mean;
    j["stddev"] = d.stddev;
    return j;
}

inline DurationSpec duration_from_json(const nlohmann::json& j) {
    DurationSpec d;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "fixed") d.kind = DurationSpec::Kind::Fixed;
    else if (kind == "gaussian") d.kind = DurationSpec::Kind::Gaussian;
    else throw std::runtime_error("unknown duration kind '" + kind + "'");
    d.mean = j.at("mean").get<double>();
    d.stddev = j.value("stddev", 0.0);
    return d;
}

inline nlohmann::json gen_config_to_json(const GenConfig& c) {
    nlohmann::json j;
    j["dataset_id"] = c.dataset_id;
    j["n_steps"] = c.n_steps;
    j["n_features"] = c.n_features;
    j["n_instances"] = c.n_instances;
    j["n_events"] = c.n_events;
    j["base_pattern"] = to_string(c.base_pattern);
    j["sine_period"] = c.sine_period;
    j["pattern_len"] = c.pattern_len;
    j["brewing"] = duration_to_json(c.brewing);
    j["observation"] = duration_to_json(c.observation);
    j["guard_gap"] = c.guard_gap;
    j["snr"] = c.snr;
    j["seed"] = c.seed;
    return j;
}

inline GenConfig gen_config_from_json(const nlohmann::json& j) {
    GenConfig c;
    c.dataset_id = j.value("dataset_id", c.dataset_id);
    c.n_steps = j.value("n_steps", c.n_steps);
    c.n_features = j.value("n_features", c.n_features);
    c.n_instances = j.value("n_instances", c.n_instances);
    c.n_events = j.value("n_events", c.n_events);
    if (j.contains("base_pattern"))
        c.base_pattern = base_pattern_from_string(j.at("base_pattern").get<std::string>());
    c.sine_period = j.value("sine_period", c.sine_period);
    c.pattern_len = j.value("pattern_len", c.pattern_len);
    if (j.contains("brewing")) c.brewing = duration_from_json(j.at("brewing"));
    if (j.contains("observation")) c.observation = duration_from_json(j.at("observation"));
    c.guard_gap = j.value("guard_gap", c.guard_gap);
    c.snr = j.value("snr", c.snr);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

inline std::string gen_config_hash(const GenConfig& c) {
    const std::string canonical = gen_config_to_json(c).dump();
    char out[32];
    std::snprintf(out, sizeof out, "fnv1a:%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical)));
    return out;
}

// ----------------------------------------------------------------------------
// Instance CSV
// ----------------------------------------------------------------------------

inline void save_instance_csv(const std::filesystem::path& path,
                              const SeriesInstance& s) {
    s.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    for (std::size_t j = 0; j < s.n_features; ++j) out << s.feature_names[j] << ',';
    out << "label\n";
    for (std::size_t k = 0; k < s.n_steps; ++k) {
        for (std::size_t j = 0; j < s.n_features; ++j)
            out << format_double(s.value(k, j)) << ',';
        out << int(s.labels[k]) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Reads one instance CSV in the save_instance_csv layout: any number of
/// feature columns followed by a final binary `label` column.
inline SeriesInstance load_instance_csv(const std::filesystem::path& path,
                                        const std::string& label_column = "label") {
    const std::vector<std::string> lines = detail::read_lines(path);
    const std::string fname = path.string();
    if (lines.empty()) throw std::runtime_error("empty file: " + fname);
    const std::vector<std::string> header = detail::split_csv_line(lines[0]);
    if (header.size() < 2)
        throw std::runtime_error("need at least one feature column and a label column in " +
                                 fname);
    if (header.back() != label_column)
        throw std::runtime_error("last column of " + fname + " is '" + header.back() +
                                 "', expected label column '" + label_column + "'");
    if (lines.size() < 2) throw std::runtime_error("no data rows in " + fname);

    SeriesInstance s;
    s.n_features = header.size() - 1;
    s.n_steps = lines.size() - 1;
    s.feature_names.assign(header.begin(), header.end() - 1);
    s.instance_id = path.stem().string();
    s.values.reserve(s.n_steps * s.n_features);
    s.labels.reserve(s.n_steps);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const std::size_t line_no = r + 1;
        const std::vector<std::string> cells = detail::split_csv_line(lines[r]);
        if (cells.size() != header.size())
            throw std::runtime_error("ragged row in " + fname + " line " +
                                     std::to_string(line_no) + ": got " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        for (std::size_t j = 0; j < s.n_features; ++j)
            s.values.push_back(
                detail::parse_double_cell(cells[j], fname, line_no, header[j]));
        const std::string& lab = cells.back();
        if (lab == "0") s.labels.push_back(0);
        else if (lab == "1") s.labels.push_back(1);
        else
            throw std::runtime_error("non-binary label '" + lab + "' in " + fname +
                                     " line " + std::to_string(line_no));
    }
    s.validate();
    return s;
}

// ----------------------------------------------------------------------------
// Dataset directory (manifest + instance files)
// ----------------------------------------------------------------------------

inline constexpr int kManifestVersion = 1;

/// Writes manifest.json plus one instance_NN.csv per instance. `config` may
/// be null for datasets not produced by the generator; `source_note` then
/// documents where the data came from.
inline void save_dataset(const std::filesystem::path& dir,
                         const std::vector<SeriesInstance>& instances,
                         const GenConfig* config = nullptr,
                         const std::string& source_note = "") {
    if (instances.empty())
        throw std::invalid_argument("save_dataset: no instances");
    std::filesystem::create_directories(dir);

    nlohmann::json manifest;
    manifest["format"] = "apbench-dataset";
    manifest["version"] = kManifestVersion;
    manifest["name"] =
        config ? dataset_name(config->dataset_id) : dir.filename().string();
    manifest["generator"] = config ? gen_config_to_json(*config) : nlohmann::json();
    manifest["config_hash"] = config ? gen_config_hash(*config) : "";
    manifest["source_note"] = source_note;

    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < instances.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "instance_%02zu.csv", i);
        const std::filesystem::path file = dir / name;
        save_instance_csv(file, instances[i]);
        nlohmann::json e;
        e["file"] = name;
        e["instance_id"] = instances[i].instance_id;
        e["n_steps"] = instances[i].n_steps;
        e["n_features"] = instances[i].n_features;
        e["label_column"] = "label";
        e["content_hash"] = file_content_hash(file);
        entries.push_back(std::move(e));
    }
    manifest["instances"] = std::move(entries);

    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

struct LoadedDataset {
    std::string name;
    std::vector<SeriesInstance> instances;
    nlohmann::json manifest;
    std::vector<std::string> warnings;  // e.g. content-hash mismatches

    bool has_generator_config() const {
        return manifest.contains("generator") && !manifest["generator"].is_null();
    }
    GenConfig generator_config() const {
        return gen_config_from_json(manifest.at("generator"));
    }
};

inline LoadedDataset load_dataset(const std::filesystem::path& dir) {
    const std::filesystem::path mpath = dir / "manifest.json";
    std::ifstream in(mpath);
    if (!in) throw std::runtime_error("missing manifest: " + mpath.string());
    LoadedDataset ds;
    try {
        in >> ds.manifest;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("unparseable manifest " + mpath.string() + ": " + e.what());
    }
    if (ds.manifest.value("format", "") != "apbench-dataset")
        throw std::runtime_error("not an apbench dataset manifest: " + mpath.string());
    if (ds.manifest.value("version", 0) != kManifestVersion)
        throw std::runtime_error("unsupported manifest version in " + mpath.string());
    ds.name = ds.manifest.value("name", dir.filename().string());

    for (const auto& e : ds.manifest.at("instances")) {
        const std::string fname = e.at("file").get<std::string>();
        const std::filesystem::path file = dir / fname;
        if (!std::filesystem::exists(file))
            throw std::runtime_error("manifest lists missing file: " + file.string());
        const std::string actual_hash = file_content_hash(file);
        const std::string expect_hash = e.value("content_hash", "");
        if (!expect_hash.empty() && actual_hash != expect_hash)
            ds.warnings.push_back("content hash mismatch for " + file.string() +
                                  ": manifest " + expect_hash + ", file " + actual_hash);
        SeriesInstance s = load_instance_csv(file, e.value("label_column", "label"));
        s.instance_id = e.value("instance_id", s.instance_id);
        if (s.n_steps != e.at("n_steps").get<std::size_t>() ||
            s.n_features != e.at("n_features").get<std::size_t>())
            throw std::runtime_error("dimension mismatch between manifest and " +
                                     file.string());
        ds.instances.push_back(std::move(s));
    }
    if (ds.instances.empty())
        throw std::runtime_error("dataset has no instances: " + dir.string());
    return ds;
}

// ----------------------------------------------------------------------------
// External CSV ingestion (real-data exports: features + one binary label col)
// ----------------------------------------------------------------------------

struct CsvSchema {
    /// Columns to use as features, in this order. Empty = every column that
    /// is neither the label nor excluded, in file order.
    std::vector<std::string> feature_columns;
    std::string label_column = "label";
    std::vector<std::string> exclude_columns;
};

inline SeriesInstance load_external_csv(const std::filesystem::path& path,
                                        const CsvSchema& schema = {}) {
    const std::vector<std::string> lines = detail::read_lines(path);
    const std::string fname = path.string();
    if (lines.empty()) throw std::runtime_error("empty file: " + fname);
    const std::vector<std::string> header = detail::split_csv_line(lines[0]);

    auto col_index = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw std::runtime_error("column '" + name + "' not found in " + fname);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t label_idx = col_index(schema.label_column);

    std::vector<std::size_t> feature_idx;
    if (!schema.feature_columns.empty()) {
        for (const auto& name : schema.feature_columns) feature_idx.push_back(col_index(name));
    } else {
        auto excluded = [&](const std::string& name) {
            return std::find(schema.exclude_columns.begin(), schema.exclude_columns.end(),
                             name) != schema.exclude_columns.end();
        };
        for (std::size_t j = 0; j < header.size(); ++j)
            if (j != label_idx && !excluded(header[j])) feature_idx.push_back(j);
    }
    if (feature_idx.empty())
        throw std::runtime_error("no feature columns selected from " + fname);
    if (lines.size() < 2) throw std::runtime_error("no data rows in " + fname);

    SeriesInstance s;
    s.n_features = feature_idx.size();
    s.n_steps = lines.size() - 1;
    for (std::size_t j : feature_idx) s.feature_names.push_back(header[j]);
    s.instance_id = path.stem().string();
    s.values.reserve(s.n_steps * s.n_features);
    s.labels.reserve(s.n_steps);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const std::size_t line_no = r + 1;
        const std::vector<std::string> cells = detail::split_csv_line(lines[r]);
        if (cells.size() != header.size())
            throw std::runtime_error("ragged row in " + fname + " line " +
                                     std::to_string(line_no) + ": got " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        for (std::size_t j : feature_idx) {
            const double v = detail::parse_double_cell(cells[j], fname, line_no, header[j]);
            if (!std::isfinite(v))
                throw std::runtime_error("non-finite value in " + fname + " line " +
                                         std::to_string(line_no) + " column '" +
                                         header[j] + "'");
            s.values.push_back(v);
        }
        const double lab =
            detail::parse_double_cell(cells[label_idx], fname, line_no, header[label_idx]);
        if (lab == 0.0) s.labels.push_back(0);
        else if (lab == 1.0) s.labels.push_back(1);
        else
            throw std::runtime_error("non-binary label '" + cells[label_idx] + "' in " +
                                     fname + " line " + std::to_string(line_no));
    }
    s.validate();
    return s;
}

}  // namespace apbench
