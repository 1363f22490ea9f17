// apbench: generate synthetic anomaly-prediction datasets, train the FCN
// density forecaster, evaluate the temporal metrics, and verify the numerics.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error,
// 4 verification (check) failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "apbench/dataset_io.hpp"
#include "apbench/report.hpp"
#include "apbench/selfcheck.hpp"
#include "apbench/series.hpp"
#include "apbench/synth.hpp"
#include "apbench/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitCheckFailed = 4;

fs::path output_root() {
    if (const char* env = std::getenv("APBENCH_OUT"); env && *env) return env;
    return "out";
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("unparseable config file " + path.string() + ": " +
                                    e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
    int dataset = 0;
    bool all = false;
    std::uint64_t seed = 42;
    std::string out;
    double snr = -1.0;  // <0 means "not set"
    std::string config_file;
};

int cmd_gen(const GenArgs& args) {
    if (!args.all && args.dataset == 0)
        throw std::invalid_argument("gen: pass --dataset <1..10> or --all");
    std::vector<int> ids;
    if (args.all)
        for (int i = 1; i <= 10; ++i) ids.push_back(i);
    else
        ids.push_back(args.dataset);

    json overlay;
    if (!args.config_file.empty()) overlay = load_json_file(args.config_file);

    const fs::path root = args.out.empty() ? output_root() / "datasets" : fs::path(args.out);
    for (int id : ids) {
        apbench::GenConfig cfg = apbench::dataset_config(id, args.seed);
        if (!overlay.is_null()) {
            json merged = apbench::gen_config_to_json(cfg);
            for (auto& [key, value] : overlay.items()) merged[key] = value;
            // identity and seed always come from the command line
            merged["dataset_id"] = id;
            merged["seed"] = args.seed;
            cfg = apbench::gen_config_from_json(merged);
        }
        if (args.snr >= 0.0) cfg.snr = args.snr;
        cfg.validate();

        const fs::path dir = root / apbench::dataset_name(id);
        const std::vector<apbench::SeriesInstance> instances =
            apbench::generate_dataset(cfg);
        apbench::save_dataset(dir, instances, &cfg);
        std::size_t positives = 0, steps = 0;
        for (const auto& s : instances) {
            positives += s.positive_label_count();
            steps += s.n_steps;
        }
        std::cout << "wrote " << dir.string() << " (" << instances.size()
                  << " instances, " << steps << " steps, " << positives
                  << " positive labels)\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string dataset_dir;
    std::string out;
    std::string config_file;
    // flag presence tracked by CLI11 counts; values below are defaults
    apbench::TrainConfig cfg;
};

apbench::TrainConfig resolve_train_config(const CLI::App* cmd, const TrainArgs& args) {
    apbench::TrainConfig cfg;
    if (!args.config_file.empty())
        cfg = apbench::train_config_from_json(load_json_file(args.config_file));
    // explicit flags override the config file
    auto given = [&](const char* name) { return cmd->count(name) > 0; };
    if (given("--L")) cfg.lookback = args.cfg.lookback;
    if (given("--T")) cfg.horizon = args.cfg.horizon;
    if (given("--stride")) cfg.stride = args.cfg.stride;
    if (given("--lr")) cfg.lr = args.cfg.lr;
    if (given("--hidden")) cfg.hidden = args.cfg.hidden;
    if (given("--epochs")) cfg.max_epochs = args.cfg.max_epochs;
    if (given("--patience")) cfg.patience = args.cfg.patience;
    if (given("--threshold")) cfg.threshold = args.cfg.threshold;
    if (given("--seed")) cfg.seed = args.cfg.seed;
    cfg.validate();
    return cfg;
}

int cmd_train(const CLI::App* cmd, const TrainArgs& args) {
    const apbench::TrainConfig cfg = resolve_train_config(cmd, args);
    if (cfg.lr == 0.0)
        std::cerr << "warning: --lr 0 leaves parameters static; training will not learn\n";

    const apbench::LoadedDataset ds = apbench::load_dataset(args.dataset_dir);
    for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';

    std::vector<apbench::WindowSample> windows;
    for (const auto& inst : ds.instances) {
        std::vector<apbench::WindowSample> w =
            apbench::make_windows(inst, cfg.lookback, cfg.horizon, cfg.stride);
        windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
    }
    const apbench::SplitAssignment split =
        apbench::split_windows(windows, cfg.split, cfg.seed, cfg.split_mode);
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << '\n';

    const apbench::TrainResult result = apbench::train_fcn(windows, split, cfg);

    const fs::path out_dir =
        args.out.empty() ? output_root() / "runs" / ds.name : fs::path(args.out);
    fs::create_directories(out_dir);

    apbench::Checkpoint ckpt;
    ckpt.params = result.params;
    ckpt.scaler = result.scaler;
    ckpt.train_config = apbench::train_config_to_json(cfg);
    ckpt.dataset = ds.name;
    apbench::save_checkpoint(out_dir / "checkpoint.json", ckpt);
    apbench::write_history_ndjson(out_dir / "history.ndjson", result.history);

    json snapshot;
    snapshot["command"] = "train";
    snapshot["dataset_dir"] = args.dataset_dir;
    snapshot["dataset"] = ds.name;
    snapshot["dataset_config_hash"] = ds.manifest.value("config_hash", "");
    snapshot["train_config"] = apbench::train_config_to_json(cfg);
    write_json_file(out_dir / "run_config.json", snapshot);

    std::cout << "trained on " << ds.name << ": " << result.history.size()
              << " epochs, best epoch " << result.best_epoch << " (val loss "
              << result.best_val_loss << (result.stopped_early ? ", early stop" : "")
              << ")\n"
              << "wrote " << (out_dir / "checkpoint.json").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string dataset_dir;
    std::string checkpoint;
    std::string model = "fcn";
    double constant = 0.5;
    double threshold = 0.1;
    std::uint64_t seed = 42;
    std::size_t lookback = 50, horizon = 20, stride = 1;
    std::string out;
    bool dump_windows = false;
};

int cmd_eval(const CLI::App* cmd, const EvalArgs& args) {
    const apbench::LoadedDataset ds = apbench::load_dataset(args.dataset_dir);
    for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';

    apbench::TrainConfig cfg;  // defaults; windowing/split source of truth
    cfg.threshold = args.threshold;
    cfg.lookback = args.lookback;
    cfg.horizon = args.horizon;
    cfg.stride = args.stride;
    cfg.seed = args.seed;

    apbench::Predictor predictor;
    std::optional<apbench::Checkpoint> ckpt;
    if (args.model == "fcn") {
        if (args.checkpoint.empty())
            throw std::invalid_argument("eval: --model fcn requires --checkpoint");
        ckpt = apbench::load_checkpoint(args.checkpoint);
        // replay the training run's windowing and split so the test split is
        // the one the checkpoint never saw; the threshold remains an eval knob
        if (!ckpt->train_config.is_null() && !ckpt->train_config.empty()) {
            apbench::TrainConfig tc = apbench::train_config_from_json(ckpt->train_config);
            tc.threshold = args.threshold;
            if (cmd->count("--seed")) tc.seed = args.seed;
            cfg = tc;
        }
        predictor = apbench::make_fcn_predictor(ckpt->params, ckpt->scaler);
    } else if (args.model == "oracle") {
        predictor = apbench::make_oracle_predictor();
    } else if (args.model == "zeros") {
        predictor = apbench::make_zeros_predictor();
    } else if (args.model == "constant") {
        predictor = apbench::make_constant_predictor(args.constant);
    } else {
        throw std::invalid_argument("eval: unknown --model '" + args.model +
                                    "' (fcn|oracle|zeros|constant)");
    }
    cfg.validate();

    std::vector<apbench::WindowSample> windows;
    for (const auto& inst : ds.instances) {
        std::vector<apbench::WindowSample> w =
            apbench::make_windows(inst, cfg.lookback, cfg.horizon, cfg.stride);
        windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
    }
    const apbench::SplitAssignment split =
        apbench::split_windows(windows, cfg.split, cfg.seed, cfg.split_mode);
    const apbench::EvalOutput result =
        apbench::evaluate(predictor, windows, split.test, cfg.threshold, cfg.norm);

    json record = apbench::metrics_to_json(result.report);
    record["dataset"] = ds.name;
    record["model"] = args.model;
    record["seed"] = cfg.seed;
    record["threshold"] = cfg.threshold;
    record["loss_norm"] = apbench::to_string(cfg.norm);

    const fs::path out_dir =
        args.out.empty() ? output_root() / "evals" / ds.name : fs::path(args.out);
    fs::create_directories(out_dir);
    apbench::write_ndjson(out_dir / "metrics.ndjson", {&record, 1});
    const std::string table = apbench::render_metrics_table({&record, 1});
    {
        std::ofstream tout(out_dir / "table.txt", std::ios::binary);
        if (!tout) throw std::runtime_error("cannot write table.txt");
        tout << table;
    }
    if (args.dump_windows)
        apbench::write_windows_ndjson(out_dir / "windows.ndjson", result.windows);

    json snapshot;
    snapshot["command"] = "eval";
    snapshot["dataset_dir"] = args.dataset_dir;
    snapshot["dataset"] = ds.name;
    snapshot["model"] = args.model;
    if (args.model == "constant") snapshot["constant"] = args.constant;
    if (!args.checkpoint.empty()) snapshot["checkpoint"] = args.checkpoint;
    snapshot["threshold"] = cfg.threshold;
    snapshot["seed"] = cfg.seed;
    snapshot["lookback"] = cfg.lookback;
    snapshot["horizon"] = cfg.horizon;
    snapshot["stride"] = cfg.stride;
    snapshot["loss_norm"] = apbench::to_string(cfg.norm);
    snapshot["dump_windows"] = args.dump_windows;
    write_json_file(out_dir / "run_config.json", snapshot);

    std::cout << table << "wrote " << (out_dir / "metrics.ndjson").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
    std::vector<json> records;
    for (const auto& file : inputs) {
        std::ifstream in(file);
        if (!in) throw std::runtime_error("cannot open " + file);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                records.push_back(json::parse(line));
            } catch (const json::exception& e) {
                throw std::runtime_error("bad NDJSON in " + file + " line " +
                                         std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    if (records.empty()) throw std::invalid_argument("report: no records found");
    const std::string table = apbench::render_metrics_table(records);
    std::cout << table;
    if (!out.empty()) {
        std::ofstream f(out, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + out);
        f << table;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

int cmd_check(std::uint64_t seed) {
    const std::vector<apbench::CheckResult> results = apbench::run_all_checks(seed);
    bool all_ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail
                  << '\n';
        all_ok = all_ok && r.passed;
    }
    std::cout << (all_ok ? "all checks passed\n" : "CHECK FAILURES PRESENT\n");
    return all_ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"anomaly-prediction benchmark: synthetic data, FCN forecaster, "
                 "temporal metrics"};
    app.require_subcommand(1);

    GenArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen", "generate synthetic datasets");
    gen->add_option("--dataset", gen_args.dataset, "dataset id (1..10)")
        ->check(CLI::Range(1, 10));
    gen->add_flag("--all", gen_args.all, "generate all 10 datasets");
    gen->add_option("--seed", gen_args.seed, "root RNG seed");
    gen->add_option("--out", gen_args.out, "output root (default $APBENCH_OUT/datasets)");
    gen->add_option("--snr", gen_args.snr, "precursor amplitude scale")
        ->check(CLI::PositiveNumber);
    gen->add_option("--config", gen_args.config_file,
                    "JSON file overriding generator fields");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train the FCN on a dataset directory");
    train->add_option("dataset_dir", train_args.dataset_dir, "dataset directory")
        ->required();
    train->add_option("--out", train_args.out, "run output directory");
    train->add_option("--config", train_args.config_file, "JSON training config");
    train->add_option("--L", train_args.cfg.lookback, "look-back length");
    train->add_option("--T", train_args.cfg.horizon, "prediction horizon");
    train->add_option("--stride", train_args.cfg.stride, "window stride");
    train->add_option("--lr", train_args.cfg.lr, "learning rate");
    std::size_t hidden_width = 128;
    train->add_option("--hidden", hidden_width, "hidden width (two hidden layers)");
    train->add_option("--epochs", train_args.cfg.max_epochs, "max epochs");
    train->add_option("--patience", train_args.cfg.patience, "early-stop patience");
    train->add_option("--threshold", train_args.cfg.threshold, "eval threshold s");
    train->add_option("--seed", train_args.cfg.seed, "root RNG seed");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a model on the test split");
    eval->add_option("dataset_dir", eval_args.dataset_dir, "dataset directory")
        ->required();
    eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file (fcn model)");
    eval->add_option("--model", eval_args.model, "fcn|oracle|zeros|constant");
    eval->add_option("--constant", eval_args.constant, "constant model value");
    eval->add_option("--threshold", eval_args.threshold, "existence/step threshold s");
    eval->add_option("--seed", eval_args.seed, "split seed (non-fcn models)");
    eval->add_option("--L", eval_args.lookback, "look-back (non-fcn models)");
    eval->add_option("--T", eval_args.horizon, "horizon (non-fcn models)");
    eval->add_option("--stride", eval_args.stride, "window stride (non-fcn models)");
    eval->add_option("--out", eval_args.out, "output directory");
    eval->add_flag("--dump-windows", eval_args.dump_windows,
                   "write per-window NDJSON dump");

    std::vector<std::string> report_inputs;
    std::string report_out;
    CLI::App* report = app.add_subcommand("report", "render a table from metrics NDJSON");
    report->add_option("inputs", report_inputs, "metrics.ndjson files")->required();
    report->add_option("--out", report_out, "also write the table to this file");

    std::uint64_t check_seed = 1;
    CLI::App* check = app.add_subcommand("check", "run the built-in verification suite");
    check->add_option("--seed", check_seed, "RNG seed for the checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_args);
        if (train->parsed()) {
            if (train->count("--hidden")) train_args.cfg.hidden = {hidden_width, hidden_width};
            return cmd_train(train, train_args);
        }
        if (eval->parsed()) return cmd_eval(eval, eval_args);
        if (report->parsed()) return cmd_report(report_inputs, report_out);
        if (check->parsed()) return cmd_check(check_seed);
        std::cerr << "no subcommand selected\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
