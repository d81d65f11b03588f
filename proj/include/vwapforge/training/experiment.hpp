#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vwapforge/features/features.hpp"
#include "vwapforge/numerics/checkpoint.hpp"
#include "vwapforge/training/trainer.hpp"

namespace vwapforge {

/// One dataset of the grid: a named bar series (real asset or synthetic).
struct NamedSeries {
    std::string name;
    BarSeries series;
};

struct ExperimentConfig {
    ModelSpec sizes;                        // widths shared by every model of the grid
    std::vector<std::string> models{"naive", "dynamic-lstm"};
    std::vector<LossKind> losses{LossKind::absolute_vwap};
    FeatureConfig features;
    SplitSpec split;
    TrainConfig train;
    std::size_t jobs = 1;
    std::string artifacts_dir;              // empty: keep nothing on disk
};

/// Outcome of one (asset, model, loss, seed) cell.
struct RunRecord {
    std::size_t order = 0;  // position in the grid, fixes report ordering
    std::string asset, model, loss;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    MetricSet test;
    double best_val_loss = 0.0;
    std::size_t epochs_run = 0;
    double seconds = 0.0;

    nlohmann::json to_json() const {
        return {{"order", order},
                {"asset", asset},
                {"model", model},
                {"loss", loss},
                {"seed", seed},
                {"ok", ok},
                {"error", error},
                {"abs_vwap_loss", test.abs_vwap_loss},
                {"quad_vwap_loss", test.quad_vwap_loss},
                {"r2_volume", test.r2_volume},
                {"n_windows", test.n_windows},
                {"best_val_loss", best_val_loss},
                {"epochs_run", epochs_run},
                {"seconds", seconds}};
    }

    static RunRecord from_json(const nlohmann::json& j) {
        RunRecord r;
        try {
            r.order = j.at("order").get<std::size_t>();
            r.asset = j.at("asset").get<std::string>();
            r.model = j.at("model").get<std::string>();
            r.loss = j.at("loss").get<std::string>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.ok = j.at("ok").get<bool>();
            r.error = j.at("error").get<std::string>();
            r.test.abs_vwap_loss = j.at("abs_vwap_loss").get<double>();
            r.test.quad_vwap_loss = j.at("quad_vwap_loss").get<double>();
            r.test.r2_volume = j.at("r2_volume").get<double>();
            r.test.n_windows = j.at("n_windows").get<std::size_t>();
            r.best_val_loss = j.at("best_val_loss").get<double>();
            r.epochs_run = j.at("epochs_run").get<std::size_t>();
            r.seconds = j.at("seconds").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("run record: ") + e.what());
        }
        return r;
    }

    std::string directory_name() const {
        return asset + "__" + model + "__" + loss + "__seed" + std::to_string(seed);
    }
};

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;
};

/// Sample standard deviation (n - 1); a single value has std 0.
inline Summary summarize(const std::vector<double>& xs) {
    Summary s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return s;
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return s;
}

struct ReportRow {
    std::string model, asset, loss;
    Summary abs_loss, quad_loss, r2, seconds;
    std::size_t runs_ok = 0;
    std::size_t runs_failed = 0;
    bool single_seed = false;  // std reported as 0
};

struct RunReport {
    std::vector<RunRecord> runs;
    std::vector<ReportRow> rows;
};

/// Groups successful runs by (model, asset, loss) in grid order.
inline RunReport aggregate(std::vector<RunRecord> runs) {
    std::sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) { return a.order < b.order; });
    RunReport report;
    for (const auto& r : runs) {
        auto it = std::find_if(report.rows.begin(), report.rows.end(), [&](const ReportRow& row) {
            return row.model == r.model && row.asset == r.asset && row.loss == r.loss;
        });
        if (it == report.rows.end()) {
            report.rows.push_back(ReportRow{r.model, r.asset, r.loss, {}, {}, {}, {}, 0, 0, false});
            it = report.rows.end() - 1;
        }
        r.ok ? ++it->runs_ok : ++it->runs_failed;
    }
    for (auto& row : report.rows) {
        std::vector<double> a, q, r2, s;
        for (const auto& r : runs) {
            if (!r.ok || r.model != row.model || r.asset != row.asset || r.loss != row.loss) continue;
            a.push_back(r.test.abs_vwap_loss);
            q.push_back(r.test.quad_vwap_loss);
            r2.push_back(r.test.r2_volume);
            s.push_back(r.seconds);
        }
        row.abs_loss = summarize(a);
        row.quad_loss = summarize(q);
        row.r2 = summarize(r2);
        row.seconds = summarize(s);
        row.single_seed = row.runs_ok < 2;
    }
    report.runs = std::move(runs);
    return report;
}

namespace detail {

inline std::string row_flags(const ReportRow& row) {
    std::string f;
    if (row.single_seed) f += "single-seed";
    if (row.runs_failed) {
        if (!f.empty()) f += ';';
        f += std::to_string(row.runs_failed) + "-failed";
    }
    return f;
}

inline std::vector<std::string> report_header() {
    return {"model", "asset", "optimization", "abs_loss_e-2_mean", "abs_loss_e-2_std", "quad_loss_e-4_mean",
            "quad_loss_e-4_std", "r2_mean", "r2_std", "train_seconds_mean", "runs", "flags"};
}

inline std::vector<std::string> report_cells(const ReportRow& row) {
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.2f", row.seconds.mean);
    return {row.model,
            row.asset,
            row.loss,
            format_scaled(row.abs_loss.mean, 1e2),
            format_scaled(row.abs_loss.stddev, 1e2),
            format_scaled(row.quad_loss.mean, 1e4),
            format_scaled(row.quad_loss.stddev, 1e4),
            format_scaled(row.r2.mean, 1.0),
            format_scaled(row.r2.stddev, 1.0),
            secs,
            std::to_string(row.runs_ok),
            row_flags(row)};
}

} // namespace detail

/// Abs loss is reported x1e2 and quadratic loss x1e4, eight decimals.
inline void write_report_csv(std::ostream& out, const RunReport& report) {
    auto header = detail::report_header();
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : report.rows) {
        auto cells = detail::report_cells(row);
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    }
}

inline void write_report_text(std::ostream& out, const RunReport& report) {
    std::vector<std::vector<std::string>> table{detail::report_header()};
    for (const auto& row : report.rows) table.push_back(detail::report_cells(row));
    std::vector<std::size_t> width(table.front().size(), 0);
    for (const auto& r : table)
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    for (const auto& r : table) {
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            std::string cell = r[i];
            cell.resize(width[i], ' ');
            line += (i ? "  " : "") + cell;
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << '\n';
    }
}

inline void write_report_files(const std::filesystem::path& dir, const RunReport& report) {
    std::filesystem::create_directories(dir);
    std::ofstream csv_out(dir / "report.csv");
    write_report_csv(csv_out, report);
    std::ofstream txt_out(dir / "report.txt");
    write_report_text(txt_out, report);
    if (!csv_out || !txt_out) throw Error("report: cannot write report files under " + dir.string());
}

/// Rebuilds the report from the per-run artifacts under <dir>/runs.
inline RunReport load_report(const std::filesystem::path& dir) {
    const auto runs_dir = dir / "runs";
    if (!std::filesystem::is_directory(runs_dir)) throw Error("report: no runs directory under " + dir.string());
    std::vector<RunRecord> runs;
    for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
        const auto file = entry.path() / "run.json";
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file);
        try {
            runs.push_back(RunRecord::from_json(nlohmann::json::parse(in)));
        } catch (const nlohmann::json::exception& e) {
            throw Error("report: " + file.string() + ": " + e.what());
        }
    }
    if (runs.empty()) throw Error("report: no run artifacts under " + runs_dir.string());
    return aggregate(std::move(runs));
}

namespace detail {

struct GridCell {
    std::size_t order;
    std::size_t dataset;
    ModelSpec spec;
    LossKind loss;
    bool naive;
    std::uint64_t seed;
};

inline void save_run_artifacts(const std::filesystem::path& root, const RunRecord& rec, const ModelSpec& spec,
                               const TrainResult* trained, const Evaluation* ev) {
    const auto dir = root / "runs" / rec.directory_name();
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "run.json");
        out << rec.to_json().dump(2) << '\n';
    }
    if (trained) {
        save_checkpoint((dir / "checkpoint.json").string(), trained->params,
                        {{"model", spec.to_json()}, {"loss", rec.loss}, {"seed", rec.seed}});
        std::ofstream out(dir / "history.csv");
        write_history_csv(out, trained->history);
    }
    if (ev) {
        std::ofstream s(dir / "slippage.csv");
        write_slippage_csv(s, *ev);
        std::ofstream a(dir / "allocation_stats.csv");
        write_allocation_stats_csv(a, *ev);
        std::ofstream b(dir / "slippage_bound.csv");
        write_slippage_bound_csv(b, *ev);
    }
}

} // namespace detail

using RunCallback = std::function<void(const RunRecord&)>;

/// Trains and evaluates every (dataset, model, loss, seed) cell. The naive
/// allocator has no objective and appears once per dataset with loss
/// "none". Failed runs are kept, flagged and excluded from aggregates.
/// Runs execute on up to cfg.jobs threads; results do not depend on it.
inline RunReport run_experiment(const std::vector<NamedSeries>& datasets, const ExperimentConfig& cfg,
                                const RunCallback& on_run = {}) {
    if (datasets.empty()) throw ConfigError("experiment: no datasets");
    if (cfg.models.empty()) throw ConfigError("experiment: no models");
    cfg.train.validate();
    cfg.features.validate();

    std::vector<PartitionedFeatures> parts;
    parts.reserve(datasets.size());
    for (const auto& d : datasets) parts.push_back(build_partitioned_features(d.series, cfg.features, cfg.split));

    std::vector<detail::GridCell> cells;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        for (const auto& model : cfg.models) {
            ModelSpec spec = cfg.sizes;
            spec.set_name(model);
            spec.lookback = cfg.features.lookback;
            spec.horizon = cfg.features.horizon;
            spec.features = kFeatureCount;
            spec.validate();
            const bool naive = !spec.has_parameters();
            if (!naive && cfg.losses.empty()) throw ConfigError("experiment: no loss kinds");
            const std::vector<LossKind> losses = naive ? std::vector<LossKind>{LossKind::absolute_vwap} : cfg.losses;
            for (LossKind loss : losses) {
                for (std::uint64_t seed : cfg.train.seeds) {
                    cells.push_back({cells.size(), d, spec, loss, naive, seed});
                }
            }
        }
    }

    std::vector<RunRecord> records(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex callback_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const auto& c = cells[i];
            RunRecord& rec = records[i];
            rec.order = c.order;
            rec.asset = datasets[c.dataset].name;
            rec.model = c.spec.name();
            rec.loss = c.naive ? "none" : loss_name(c.loss);
            rec.seed = c.seed;
            try {
                const auto& p = parts[c.dataset];
                if (p.train.samples.empty() || p.validation.samples.empty() || p.test.samples.empty()) {
                    throw DataError("experiment: a partition of " + rec.asset + " has no windows");
                }
                if (c.naive) {
                    const Evaluation ev = evaluate(c.spec, ParamStore(c.seed), p.test.samples);
                    rec.test = ev.metrics;
                    rec.ok = true;
                    if (!cfg.artifacts_dir.empty()) {
                        detail::save_run_artifacts(cfg.artifacts_dir, rec, c.spec, nullptr, &ev);
                    }
                } else {
                    TrainResult tr = train(c.spec, c.loss, p.train.samples, p.validation.samples, cfg.train, c.seed);
                    const Evaluation ev = evaluate(c.spec, tr.params, p.test.samples);
                    rec.test = ev.metrics;
                    rec.best_val_loss = tr.best_val_loss;
                    rec.epochs_run = tr.epochs_run;
                    rec.seconds = tr.seconds;
                    rec.ok = true;
                    if (!cfg.artifacts_dir.empty()) {
                        detail::save_run_artifacts(cfg.artifacts_dir, rec, c.spec, &tr, &ev);
                    }
                }
            } catch (const std::exception& e) {
                rec.ok = false;
                rec.error = e.what();
                if (!cfg.artifacts_dir.empty()) {
                    detail::save_run_artifacts(cfg.artifacts_dir, rec, c.spec, nullptr, nullptr);
                }
            }
            if (on_run) {
                std::lock_guard lock(callback_mutex);
                on_run(rec);
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(cfg.jobs, 1, std::max<std::size_t>(cells.size(), 1));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    RunReport report = aggregate(std::move(records));
    if (!cfg.artifacts_dir.empty()) write_report_files(cfg.artifacts_dir, report);
    return report;
}

} // namespace vwapforge
