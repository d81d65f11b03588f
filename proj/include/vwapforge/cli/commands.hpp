#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vwapforge/allocation/execution.hpp"
#include "vwapforge/cli/config_file.hpp"
#include "vwapforge/numerics/checkpoint.hpp"
#include "vwapforge/training/experiment.hpp"

namespace vwapforge::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Flags shared by every command.
struct Common {
    std::string config;
    std::uint64_t seed = 1;
    std::string out = ".";
};

/// Model and window flags shared by train, evaluate, execute.
struct ModelFlags {
    std::string model = "dynamic-lstm";
    std::string loss = "absolute";
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::size_t max_epochs = 0;
};

inline std::vector<std::string> model_names() {
    return {"naive", "static-lstm", "static-tkan", "dynamic-lstm", "dynamic-tkan"};
}

inline bool given(const CLI::App& sub, const std::string& flag) {
    const CLI::Option* opt = sub.get_option_no_throw(flag);
    return opt && opt->count() > 0;
}

inline Settings load_settings(const Common& c, const CLI::App& sub, const ModelFlags* mf = nullptr) {
    Settings s;
    if (!c.config.empty()) apply_config(s, load_config_file(c.config));
    if (const char* env = std::getenv("VWAP_FORGE_ENDPOINT"); env && *env) s.klines.endpoint = env;
    if (mf) {
        if (given(sub, "--lookback")) s.features.lookback = mf->lookback;
        if (given(sub, "--horizon")) s.features.horizon = mf->horizon;
        if (given(sub, "--max-epochs")) s.train.max_epochs = mf->max_epochs;
    }
    s.features.validate();
    s.train.validate();
    return s;
}

inline fs::path prepare_out(const Common& c) {
    fs::path dir(c.out);
    fs::create_directories(dir);
    return dir;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("cannot write " + path.string());
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    fn(out);
    if (!out) throw Error("write failed for " + path.string());
}

inline ModelSpec spec_from(const Settings& s, const std::string& model) {
    ModelSpec spec = s.sizes;
    spec.set_name(model);
    spec.lookback = s.features.lookback;
    spec.horizon = s.features.horizon;
    spec.features = kFeatureCount;
    spec.validate();
    return spec;
}

inline nlohmann::json feature_json(const FeatureConfig& f) {
    return {{"lookback", f.lookback}, {"horizon", f.horizon}, {"rolling_window", f.rolling_window}};
}

inline nlohmann::json metrics_json(const MetricSet& m) {
    return {{"abs_vwap_loss", m.abs_vwap_loss},
            {"quad_vwap_loss", m.quad_vwap_loss},
            {"r2_volume", m.r2_volume},
            {"n_windows", m.n_windows},
            {"abs_vwap_loss_e-2", format_scaled(m.abs_vwap_loss, 1e2)},
            {"quad_vwap_loss_e-4", format_scaled(m.quad_vwap_loss, 1e4)},
            {"r2_volume_text", format_scaled(m.r2_volume, 1.0)}};
}

/// A trained model as stored on disk, or the parameter-free naive curve.
struct LoadedModel {
    ModelSpec spec;
    FeatureConfig features;
    ParamStore params;
};

inline LoadedModel load_model(const std::string& model, const Settings& s) {
    if (model == "naive") {
        return {spec_from(s, "naive"), s.features, ParamStore{}};
    }
    if (!fs::exists(model)) throw ConfigError("--model: '" + model + "' is neither 'naive' nor a checkpoint file");
    Checkpoint ck = load_checkpoint(model);
    LoadedModel m{ModelSpec::from_json(ck.metadata.at("model")), s.features, std::move(ck.params)};
    const auto& f = ck.metadata.at("features");
    m.features.lookback = f.at("lookback").get<std::size_t>();
    m.features.horizon = f.at("horizon").get<std::size_t>();
    m.features.rolling_window = f.at("rolling_window").get<std::size_t>();
    return m;
}

inline void print_metrics(std::ostream& out, const MetricSet& m) {
    out << "abs_vwap_loss_e-2  " << format_scaled(m.abs_vwap_loss, 1e2) << '\n'
        << "quad_vwap_loss_e-4 " << format_scaled(m.quad_vwap_loss, 1e4) << '\n'
        << "r2_volume          " << format_scaled(m.r2_volume, 1.0) << '\n'
        << "windows            " << m.n_windows << '\n';
}

// ---------------------------------------------------------------- commands

inline int cmd_fetch(const Common& c, const CLI::App& sub, std::string symbol, std::string start, std::string end,
                     std::ostream& out) {
    Settings s = load_settings(c, sub);
    if (!symbol.empty()) s.symbol = symbol;
    if (!start.empty()) s.start = start;
    if (!end.empty()) s.end = end;
    if (s.symbol.empty() || s.start.empty() || s.end.empty()) {
        throw ConfigError("fetch: --symbol, --start and --end are required (flags or data.* config keys)");
    }
    const BarSeries series = fetch_klines(s.symbol, parse_utc_time(s.start), parse_utc_time(s.end), s.klines);
    const fs::path path = prepare_out(c) / (s.symbol + ".csv");
    write_bars_csv(path.string(), series);
    out << "wrote " << series.size() << " bars to " << path.string() << '\n';
    return kExitOk;
}

inline int cmd_synth(const Common& c, const CLI::App& sub, std::size_t bars, const std::string& name,
                     double hour_amplitude, std::ostream& out) {
    Settings s = load_settings(c, sub);
    if (given(sub, "--bars")) s.synth_bars = bars;
    if (given(sub, "--hour-amplitude")) s.synth.hour_amplitude = hour_amplitude;
    s.synth.asset = name;
    const BarSeries series = generate_synthetic(s.synth, s.synth_bars, c.seed);
    const fs::path path = prepare_out(c) / (name + ".csv");
    write_bars_csv(path.string(), series);
    out << "wrote " << series.size() << " bars to " << path.string() << '\n';
    return kExitOk;
}

inline int cmd_split(const Common& c, const CLI::App& sub, const std::string& data, std::ostream& out) {
    const Settings s = load_settings(c, sub);
    const BarSeries series = read_bars_csv(data);
    const SplitResult r = split(series, s.split, s.features.window_span());
    const fs::path dir = prepare_out(c);
    write_bars_csv((dir / (series.asset + "_train.csv")).string(), r.train);
    write_bars_csv((dir / (series.asset + "_validation.csv")).string(), r.validation);
    write_bars_csv((dir / (series.asset + "_test.csv")).string(), r.test);
    write_json(dir / "split.json", {{"bars", series.size()},
                                    {"train", {r.bounds.train_begin, r.bounds.train_end}},
                                    {"validation", {r.bounds.validation_begin, r.bounds.validation_end}},
                                    {"test", {r.bounds.test_begin, r.bounds.test_end}}});
    out << "train " << r.bounds.train_size() << ", validation " << r.bounds.validation_size() << ", test "
        << r.bounds.test_size() << " bars\n";
    return kExitOk;
}

inline int cmd_train(const Common& c, const CLI::App& sub, const ModelFlags& mf, const std::string& data,
                     std::ostream& out) {
    const Settings s = load_settings(c, sub, &mf);
    const ModelSpec spec = spec_from(s, mf.model);
    const LossKind loss = parse_loss(mf.loss);
    const BarSeries series = read_bars_csv(data);
    const PartitionedFeatures parts = build_partitioned_features(series, s.features, s.split);

    TrainResult tr = train(spec, loss, parts.train.samples, parts.validation.samples, s.train, c.seed,
                           [&](const EpochRecord& e) {
                               out << "epoch " << e.epoch << " train " << csv::format_double(e.train_loss) << " val "
                                   << csv::format_double(e.val_loss) << " lr " << csv::format_double(e.learning_rate)
                                   << (e.improved ? " *" : "") << '\n'
                                   << std::flush;
                           });
    const Evaluation ev = evaluate(spec, tr.params, parts.test.samples);

    const fs::path dir = prepare_out(c);
    save_checkpoint((dir / "checkpoint.json").string(), tr.params,
                    {{"model", spec.to_json()},
                     {"features", feature_json(s.features)},
                     {"loss", loss_name(loss)},
                     {"seed", c.seed},
                     {"data", series.asset}});
    write_file(dir / "history.csv", [&](std::ostream& o) { write_history_csv(o, tr.history); });
    nlohmann::json m = metrics_json(ev.metrics);
    m["model"] = spec.name();
    m["loss"] = loss_name(loss);
    m["seed"] = c.seed;
    m["best_val_loss"] = tr.best_val_loss;
    m["best_epoch"] = tr.best_epoch;
    m["epochs_run"] = tr.epochs_run;
    write_json(dir / "metrics.json", m);
    write_json(dir / "timing.json", {{"train_seconds", tr.seconds}});
    out << "test metrics (" << spec.name() << ", " << loss_name(loss) << ", seed " << c.seed << ")\n";
    print_metrics(out, ev.metrics);
    return kExitOk;
}

inline int cmd_evaluate(const Common& c, const CLI::App& sub, const ModelFlags& mf, const std::string& data,
                        const std::string& partition, std::ostream& out) {
    const Settings s = load_settings(c, sub, &mf);
    const LoadedModel m = load_model(mf.model, s);
    const BarSeries series = read_bars_csv(data);
    const std::vector<WindowSample>* samples = nullptr;
    FeatureSet all;
    PartitionedFeatures parts;
    if (partition == "all") {
        all = build_features(series, m.features);
        samples = &all.samples;
    } else {
        parts = build_partitioned_features(series, m.features, s.split);
        samples = partition == "train" ? &parts.train.samples
                  : partition == "validation" ? &parts.validation.samples : &parts.test.samples;
    }
    const Evaluation ev = evaluate(m.spec, m.params, *samples);
    const fs::path dir = prepare_out(c);
    nlohmann::json j = metrics_json(ev.metrics);
    j["model"] = m.spec.name();
    j["partition"] = partition;
    write_json(dir / "metrics.json", j);
    write_file(dir / "slippage.csv", [&](std::ostream& o) { write_slippage_csv(o, ev); });
    write_file(dir / "allocation_stats.csv", [&](std::ostream& o) { write_allocation_stats_csv(o, ev); });
    write_file(dir / "slippage_bound.csv", [&](std::ostream& o) { write_slippage_bound_csv(o, ev); });
    print_metrics(out, ev.metrics);
    return kExitOk;
}

inline int cmd_execute(const Common& c, const CLI::App& sub, const ModelFlags& mf, const std::string& data,
                       const std::string& stream, std::ostream& out, std::istream& in) {
    const Settings s = load_settings(c, sub, &mf);
    if (data.empty() == stream.empty()) throw ConfigError("execute: give exactly one of --data or --stream");
    const LoadedModel m = load_model(mf.model, s);
    const fs::path dir = prepare_out(c);
    std::ofstream file(dir / "allocations.csv");
    if (!file) throw Error("cannot write " + (dir / "allocations.csv").string());
    write_fill_header(out);
    write_fill_header(file);
    auto emit = [&](const ExecutionFill& f) {
        write_fill(out, f);
        write_fill(file, f);
    };

    if (!data.empty()) {
        const BarSeries series = read_bars_csv(data);
        for (const auto& f : execute_batch(m.spec, m.params, series, m.features)) emit(f);
        return kExitOk;
    }

    std::ifstream stream_file;
    std::istream* src = &in;
    if (stream != "-") {
        stream_file.open(stream);
        if (!stream_file) throw DataError("execute: cannot open " + stream);
        src = &stream_file;
    }
    std::string line;
    if (!std::getline(*src, line)) throw DataError("execute: empty stream (header required)");
    const BarCsvLayout layout(line);
    StreamingExecutor exec(m.spec, m.params, m.features);
    std::size_t row = 0;
    while (std::getline(*src, line)) {
        csv::strip_cr(line);
        if (line.empty()) continue;
        for (const auto& f : exec.push(layout.parse(line, row++))) emit(f);
        out.flush();
    }
    return kExitOk;
}

inline int cmd_report(const Common& c, const CLI::App& sub, const std::string& runs, std::ostream& out) {
    (void)load_settings(c, sub);
    const RunReport report = load_report(runs.empty() ? fs::path(c.out) : fs::path(runs));
    write_report_files(prepare_out(c), report);
    write_report_text(out, report);
    return kExitOk;
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    for (auto& item : csv::split_record(text)) {
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

inline int cmd_experiment(const Common& c, const CLI::App& sub, const ModelFlags& mf,
                          const std::vector<std::string>& data, std::size_t synthetic, std::size_t bars,
                          const std::string& models, const std::string& losses, const std::string& seeds,
                          std::size_t jobs, std::ostream& out) {
    Settings s = load_settings(c, sub, &mf);
    if (given(sub, "--bars")) s.synth_bars = bars;
    if (!seeds.empty()) s.train.seeds = detail::config_seed_list("--seeds", seeds);

    std::vector<NamedSeries> datasets;
    for (const auto& path : data) {
        BarSeries series = read_bars_csv(path);
        datasets.push_back({series.asset, std::move(series)});
    }
    if (data.empty() && synthetic == 0) synthetic = 1;
    for (std::size_t k = 0; k < synthetic; ++k) {
        SynthSpec spec = s.synth;
        spec.asset = "synth" + std::to_string(k + 1);
        datasets.push_back({spec.asset, generate_synthetic(spec, s.synth_bars, c.seed + k)});
    }

    ExperimentConfig cfg;
    cfg.sizes = s.sizes;
    cfg.models = split_list(models);
    cfg.losses.clear();
    for (const auto& l : split_list(losses)) cfg.losses.push_back(parse_loss(l));
    for (const auto& name : cfg.models) (void)spec_from(s, name);
    cfg.features = s.features;
    cfg.split = s.split;
    cfg.train = s.train;
    cfg.jobs = jobs;
    cfg.artifacts_dir = prepare_out(c).string();
    const RunReport report = run_experiment(datasets, cfg, [&](const RunRecord& r) {
        out << "run " << r.asset << ' ' << r.model << ' ' << r.loss << " seed " << r.seed
            << (r.ok ? " ok" : " FAILED: " + r.error) << '\n'
            << std::flush;
    });
    write_report_text(out, report);
    return kExitOk;
}

// ---------------------------------------------------------------- entry

inline std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const DegenerateWindow*>(&e)) return "degenerate-window";
    if (dynamic_cast<const DataError*>(&e)) return "data";
    if (dynamic_cast<const ShapeError*>(&e)) return "shape";
    if (dynamic_cast<const NumericError*>(&e)) return "numeric";
    if (dynamic_cast<const TrainingError*>(&e)) return "training";
    if (dynamic_cast<const Error*>(&e)) return "error";
    return "internal";
}

/// Parses argv and dispatches. 0 success, 1 usage error, 2 runtime error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
               std::istream& in = std::cin) {
    CLI::App app{"vwapforge: neural VWAP execution toolkit", "vwapforge"};
    app.require_subcommand(1);
    Common common;
    ModelFlags mf;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "key = value settings file")->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed, "random seed");
        sub->add_option("--out", common.out, "output directory")->capture_default_str();
    };
    auto add_model = [&](CLI::App* sub, bool with_loss, bool model_is_path) {
        auto* opt = sub->add_option("--model", mf.model,
                                    model_is_path ? "checkpoint file, or 'naive'" : "allocator")->capture_default_str();
        if (!model_is_path) opt->check(CLI::IsMember(model_names()));
        if (with_loss) {
            sub->add_option("--loss", mf.loss, "training objective")
                ->check(CLI::IsMember({"absolute", "quadratic", "volume-curve"}))
                ->capture_default_str();
        }
        sub->add_option("--lookback", mf.lookback, "lookback bars l")->check(CLI::PositiveNumber);
        sub->add_option("--horizon", mf.horizon, "execution horizon h")->check(CLI::Range(2, 1 << 20));
    };

    std::string symbol, start, end, data, stream, partition = "test", runs, name = "synth";
    std::string models = "naive,dynamic-lstm,dynamic-tkan", losses = "absolute,quadratic,volume-curve", seeds;
    std::vector<std::string> data_list;
    std::size_t bars = 50'000, synthetic = 0, jobs = 1;
    double hour_amplitude = 0.5;

    auto* fetch = app.add_subcommand("fetch", "download hourly klines into <out>/<SYMBOL>.csv");
    add_common(fetch);
    fetch->add_option("--symbol", symbol, "instrument, e.g. BTCUSDT");
    fetch->add_option("--start", start, "first open time (YYYY-MM-DD[THH:MM[:SS]] UTC or epoch ms)");
    fetch->add_option("--end", end, "end of range, exclusive");

    auto* synth = app.add_subcommand("synth", "generate a synthetic bar series into <out>/<name>.csv");
    add_common(synth);
    synth->add_option("--bars", bars, "number of hourly bars")->check(CLI::Range(1000, 10'000'000));
    synth->add_option("--name", name, "asset and file name")->capture_default_str();
    synth->add_option("--hour-amplitude", hour_amplitude, "intraday seasonality amplitude");

    auto* split_cmd = app.add_subcommand("split", "write the chronological train/validation/test partitions");
    add_common(split_cmd);
    split_cmd->add_option("--data", data, "bar CSV")->required()->check(CLI::ExistingFile);

    auto* train_cmd = app.add_subcommand("train", "train one model and write checkpoint, history and metrics");
    add_common(train_cmd);
    add_model(train_cmd, true, false);
    train_cmd->add_option("--data", data, "bar CSV")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--max-epochs", mf.max_epochs, "epoch cap")->check(CLI::PositiveNumber);

    auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint and write metrics and plot data");
    add_common(eval_cmd);
    add_model(eval_cmd, false, true);
    eval_cmd->add_option("--data", data, "bar CSV")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--partition", partition, "windows to score")
        ->check(CLI::IsMember({"train", "validation", "test", "all"}))
        ->capture_default_str();

    auto* exec_cmd = app.add_subcommand("execute", "emit step allocations for back-to-back orders");
    add_common(exec_cmd);
    add_model(exec_cmd, false, true);
    exec_cmd->add_option("--data", data, "bar CSV (batch mode)")->check(CLI::ExistingFile);
    exec_cmd->add_option("--stream", stream, "bar CSV read line by line ('-' for stdin)");

    auto* report_cmd = app.add_subcommand("report", "rebuild the results table from stored run artifacts");
    add_common(report_cmd);
    report_cmd->add_option("--runs", runs, "experiment directory (default: --out)");

    auto* exp_cmd = app.add_subcommand("experiment", "train and evaluate a grid of datasets x models x losses x seeds");
    add_common(exp_cmd);
    exp_cmd->add_option("--lookback", mf.lookback, "lookback bars l")->check(CLI::PositiveNumber);
    exp_cmd->add_option("--horizon", mf.horizon, "execution horizon h")->check(CLI::Range(2, 1 << 20));
    exp_cmd->add_option("--data", data_list, "bar CSV files")->check(CLI::ExistingFile);
    exp_cmd->add_option("--synthetic", synthetic, "number of synthetic assets");
    exp_cmd->add_option("--bars", bars, "bars per synthetic asset")->check(CLI::Range(1000, 10'000'000));
    exp_cmd->add_option("--models", models, "comma-separated allocators")->capture_default_str();
    exp_cmd->add_option("--losses", losses, "comma-separated objectives")->capture_default_str();
    exp_cmd->add_option("--seeds", seeds, "comma-separated run seeds (default: train.seeds)");
    exp_cmd->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
    exp_cmd->add_option("--max-epochs", mf.max_epochs, "epoch cap")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        const auto subs = app.get_subcommands();
        err << "usage error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    }

    try {
        if (*fetch) return cmd_fetch(common, *fetch, symbol, start, end, out);
        if (*synth) return cmd_synth(common, *synth, bars, name, hour_amplitude, out);
        if (*split_cmd) return cmd_split(common, *split_cmd, data, out);
        if (*train_cmd) return cmd_train(common, *train_cmd, mf, data, out);
        if (*eval_cmd) return cmd_evaluate(common, *eval_cmd, mf, data, partition, out);
        if (*exec_cmd) return cmd_execute(common, *exec_cmd, mf, data, stream, out, in);
        if (*report_cmd) return cmd_report(common, *report_cmd, runs, out);
        if (*exp_cmd) {
            return cmd_experiment(common, *exp_cmd, mf, data_list, synthetic, bars, models, losses, seeds, jobs, out);
        }
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << "\n(run with --help for the flag list)\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        nlohmann::json j{{"error", error_kind(e)}, {"message", e.what()}};
        err << j.dump() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace vwapforge::cli
