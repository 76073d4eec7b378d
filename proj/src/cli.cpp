#include "dbforge/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "dbforge/config.hpp"
#include "dbforge/error.hpp"
#include "dbforge/report.hpp"

namespace fs = std::filesystem;

namespace dbforge::cli {

namespace {

int map_exception(const char* context) {
    try {
        throw;
    } catch (const ConfigError& e) {
        std::cerr << context << ": " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << context << ": " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << context << ": " << e.what() << "\n";
        return kExitPipeline;
    } catch (const std::exception& e) {
        std::cerr << context << ": " << e.what() << "\n";
        return kExitPipeline;
    }
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_brief(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

fs::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<std::string>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("DBFORGE_OUTPUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return cfg.output_dir;
}

// Runs fn(i) for i in [0, count) on up to `jobs` threads; rethrows the
// first failure after joining.
void parallel_for(int jobs, std::int64_t count, const std::function<void(std::int64_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    const int worker_count = static_cast<int>(std::min<std::int64_t>(jobs, count));
    workers.reserve(worker_count);
    for (int w = 0; w < worker_count; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                const std::int64_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

struct SeedRun {
    JsonValue record;
    bool reused = false;
};

SeedRun run_or_load_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out_dir) {
    const fs::path record_path = out_dir / ("seed_" + std::to_string(seed) + ".json");
    if (fs::exists(record_path)) {
        try {
            JsonValue record = parse_json(read_file(record_path));
            if (record.at("schema").as_int() == 1 &&
                record.at("config_digest").as_string() == cfg.digest &&
                static_cast<std::uint64_t>(record.at("seed").as_int()) == seed) {
                return {std::move(record), true};
            }
        } catch (const Error&) {
            // stale or corrupt record: recompute below
        }
    }
    const PipelineResult result = run_pipeline(cfg, seed);
    JsonValue record = to_json(result);
    write_file_atomic(record_path, record.dump(2) + "\n");
    return {std::move(record), false};
}

// One pipeline failure does not abort the batch: completed seeds keep
// their records on disk (a rerun resumes them) and every failure is
// reported per seed.
struct BatchOutcome {
    JsonValue report;
    std::vector<std::pair<std::uint64_t, std::string>> errors;
};

BatchOutcome run_all_seeds(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                           const fs::path& out_dir, int jobs, bool verbose) {
    fs::create_directories(out_dir);
    std::vector<JsonValue> records(seeds.size());
    std::vector<bool> reused(seeds.size(), false);
    std::vector<std::string> failures(seeds.size());
    parallel_for(jobs, static_cast<std::int64_t>(seeds.size()), [&](std::int64_t i) {
        try {
            SeedRun run = run_or_load_seed(cfg, seeds[i], out_dir);
            records[i] = std::move(run.record);
            reused[i] = run.reused;
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    BatchOutcome outcome;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!failures[i].empty()) outcome.errors.emplace_back(seeds[i], failures[i]);
    }
    if (!outcome.errors.empty()) {
        JsonValue errors = JsonValue::object();
        for (const auto& [seed, message] : outcome.errors) {
            errors.set("seed_" + std::to_string(seed), message);
        }
        write_file_atomic(out_dir / "errors.json", errors.dump(2) + "\n");
        return outcome;
    }

    if (verbose) {
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            std::cout << "seed " << seeds[i] << ": " << (reused[i] ? "reused" : "computed")
                      << "  erm_wga=" << format_brief(records[i].at("erm").at("wga").as_double())
                      << "  debiased_wga="
                      << format_brief(records[i].at("debiased").at("wga").as_double()) << "\n";
        }
    }
    ExperimentConfig report_cfg = cfg;
    report_cfg.seeds = seeds;
    outcome.report = assemble_report(report_cfg, records);
    return outcome;
}

int report_batch_errors(const char* command, const BatchOutcome& outcome) {
    for (const auto& [seed, message] : outcome.errors) {
        std::cerr << command << ": seed " << seed << ": " << message << "\n";
    }
    return kExitPipeline;
}

} // namespace

int cmd_gen(const std::string& config_path, const std::string& out_dir) {
    try {
        const ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
        if (!cfg.generate) {
            throw ConfigError("gen needs 'dataset.source = generate'");
        }
        for (const auto& w : cfg.generator.warnings()) std::cerr << "warning: " << w << "\n";
        const datagen::DatasetBundle bundle = datagen::generate(cfg.generator);
        fs::create_directories(out_dir);
        datagen::save_dataset(bundle.train, fs::path(out_dir) / "train.dbds");
        datagen::save_dataset(bundle.val, fs::path(out_dir) / "val.dbds");
        datagen::save_dataset(bundle.test, fs::path(out_dir) / "test.dbds");
        std::cout << "wrote train/val/test datasets to " << out_dir << "\n";
        return kExitOk;
    } catch (...) {
        return map_exception("gen");
    }
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& out_dir,
            std::optional<int> jobs, std::optional<std::uint64_t> seed_override) {
    try {
        const ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
        const fs::path out = resolve_output_dir(cfg, out_dir);
        const std::vector<std::uint64_t> seeds =
            seed_override ? std::vector<std::uint64_t>{*seed_override} : cfg.seeds;
        const BatchOutcome outcome = run_all_seeds(cfg, seeds, out, jobs.value_or(cfg.jobs), true);
        if (!outcome.errors.empty()) return report_batch_errors("run", outcome);
        const JsonValue& report = outcome.report;
        write_file_atomic(out / "report.json", report.dump(2) + "\n");
        const auto& agg = report.at("aggregate");
        std::cout << "report: " << (out / "report.json").string() << "\n"
                  << "erm_wga mean=" << format_brief(agg.at("erm_wga").at("mean").as_double())
                  << "  debiased_wga mean="
                  << format_brief(agg.at("debiased_wga").at("mean").as_double()) << "\n";
        return kExitOk;
    } catch (...) {
        return map_exception("run");
    }
}

int cmd_weights(const std::string& modes_csv, const std::string& out_csv,
                const std::string& diagnostics_json) {
    try {
        const std::string text = read_file(modes_csv);
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line)) throw ConfigError(modes_csv + ": empty file");

        std::vector<std::string> ids;
        std::vector<int> bias, labels;
        std::int64_t row_no = 1;
        while (std::getline(in, line)) {
            ++row_no;
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string id, s_str, y_str;
            if (!std::getline(row, id, ',') || !std::getline(row, s_str, ',') ||
                !std::getline(row, y_str)) {
                throw ConfigError(modes_csv + ": row " + std::to_string(row_no) +
                                  ": expected 'sample_id,bias_label,class_label'");
            }
            int s = 0, y = 0;
            const auto rs = std::from_chars(s_str.data(), s_str.data() + s_str.size(), s);
            const auto ry = std::from_chars(y_str.data(), y_str.data() + y_str.size(), y);
            if (rs.ec != std::errc{} || rs.ptr != s_str.data() + s_str.size() ||
                ry.ec != std::errc{} || ry.ptr != y_str.data() + y_str.size() || s < 0 || y < 0) {
                throw ConfigError(modes_csv + ": row " + std::to_string(row_no) +
                                  ": labels must be nonnegative integers");
            }
            ids.push_back(id);
            bias.push_back(s);
            labels.push_back(y);
        }
        if (ids.empty()) throw ConfigError(modes_csv + ": no data rows after the header");

        int classes = 2;
        for (std::size_t i = 0; i < bias.size(); ++i) {
            classes = std::max({classes, bias[i] + 1, labels[i] + 1});
        }
        std::vector<core::ModeAssignment> modes(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) modes[i] = {bias[i], labels[i]};
        const fgccdb::DerivedWeights derived = fgccdb::derive_weights(modes, classes);

        std::string csv = "sample_id,weight\n";
        for (std::size_t i = 0; i < ids.size(); ++i) {
            csv += ids[i];
            csv.push_back(',');
            csv += format_number(derived.sample_weights[i]);
            csv.push_back('\n');
        }
        write_file_atomic(out_csv, csv);

        JsonValue diag = JsonValue::object();
        diag.set("schema", 1);
        diag.set("classes", classes);
        JsonValue w_rows = JsonValue::array();
        JsonValue p_rows = JsonValue::array();
        for (int i = 0; i < classes; ++i) {
            JsonValue wr = JsonValue::array();
            JsonValue pr = JsonValue::array();
            for (int j = 0; j < classes; ++j) {
                wr.push(derived.table.mode_weight(i, j));
                pr.push(derived.stats.conditional(i, j));
            }
            w_rows.push(std::move(wr));
            p_rows.push(std::move(pr));
        }
        diag.set("W", std::move(w_rows));
        diag.set("P", std::move(p_rows));
        JsonValue q = JsonValue::array();
        for (const double v : derived.stats.bias_marginal) q.push(v);
        diag.set("q", std::move(q));
        diag.set("mi_original_joint", derived.mi_original_joint);
        diag.set("mi_multiplier_joint", derived.mi_multiplier_joint);
        JsonValue matchable = JsonValue::array();
        for (const bool b : derived.table.matchable) matchable.push(b);
        diag.set("matchable", std::move(matchable));
        write_file_atomic(diagnostics_json, diag.dump(2) + "\n");

        std::cout << "wrote " << out_csv << " and " << diagnostics_json << "\n";
        return kExitOk;
    } catch (...) {
        return map_exception("weights");
    }
}

int cmd_sweep(const std::string& config_path, const std::string& parameter,
              const std::vector<std::string>& values, const std::optional<std::string>& out_dir,
              std::optional<int> jobs) {
    try {
        if (values.empty()) throw ConfigError("sweep needs at least one value");
        const ExperimentConfig base = ExperimentConfig::from_file(config_path);
        const fs::path out = resolve_output_dir(base, out_dir);
        fs::create_directories(out);

        const auto parse_value = [&](const std::string& text) {
            double v = 0.0;
            const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
            if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
                throw ConfigError("sweep value '" + text + "' is not a number");
            }
            return v;
        };

        JsonValue rows = JsonValue::array();
        std::printf("%-10s %-10s %-22s %-22s %-12s\n", parameter.c_str(), "erm_wga", "smallest_mode_recall",
                    "smallest_mode_f1", "wga");
        for (const auto& value_text : values) {
            ExperimentConfig cfg = base;
            if (parameter == "gamma") {
                cfg.mst_cfg.gamma = parse_value(value_text);
            } else if (parameter == "beta") {
                cfg.mst_cfg.beta = parse_value(value_text);
            } else if (parameter == "repeats") {
                cfg.mst_cfg.repeats = static_cast<int>(parse_value(value_text));
            } else if (parameter == "rho") {
                if (!cfg.generate) throw ConfigError("rho sweep needs a generated dataset");
                const double rho = parse_value(value_text);
                std::fill(cfg.generator.rho.begin(), cfg.generator.rho.end(), rho);
                cfg.generator.validate();
            } else {
                throw ConfigError("sweep parameter must be one of gamma, beta, repeats, rho");
            }
            try {
                cfg.mst_cfg.validate();
            } catch (const ValidationError& e) {
                throw ConfigError(std::string("sweep value '") + value_text + "': " + e.what());
            }
            // sweep records are keyed by base digest + override
            cfg.digest = base.digest + "+" + parameter + "=" + value_text;

            const fs::path value_dir = out / (parameter + "_" + value_text);
            const BatchOutcome outcome =
                run_all_seeds(cfg, cfg.seeds, value_dir, jobs.value_or(cfg.jobs), false);
            if (!outcome.errors.empty()) return report_batch_errors("sweep", outcome);
            const JsonValue& report = outcome.report;
            const auto& agg = report.at("aggregate");
            JsonValue row = JsonValue::object();
            row.set("value", value_text);
            row.set("erm_wga_mean", agg.at("erm_wga").at("mean").as_double());
            row.set("smallest_mode_recall_mean",
                    agg.at("smallest_mode_recall").at("mean").as_double());
            row.set("smallest_mode_f1_mean", agg.at("smallest_mode_f1").at("mean").as_double());
            row.set("wga_mean", agg.at("debiased_wga").at("mean").as_double());
            std::printf("%-10s %-10.4f %-22.4f %-22.4f %-12.4f\n", value_text.c_str(),
                        agg.at("erm_wga").at("mean").as_double(),
                        agg.at("smallest_mode_recall").at("mean").as_double(),
                        agg.at("smallest_mode_f1").at("mean").as_double(),
                        agg.at("debiased_wga").at("mean").as_double());
            rows.push(std::move(row));
        }

        JsonValue sweep = JsonValue::object();
        sweep.set("schema", 1);
        sweep.set("parameter", parameter);
        sweep.set("config_digest", base.digest);
        sweep.set("rows", std::move(rows));
        write_file_atomic(out / ("sweep_" + parameter + ".json"), sweep.dump(2) + "\n");
        return kExitOk;
    } catch (...) {
        return map_exception("sweep");
    }
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::optional<std::string>& train_data_path,
             const std::optional<std::string>& out_json) {
    try {
        const nn::ClassifierModel model = nn::load_model(model_path);
        const datagen::LabeledDataset data = datagen::load_dataset(data_path);
        std::optional<metrics::GroupFreqs> freqs;
        if (train_data_path) {
            freqs = metrics::group_frequencies(datagen::load_dataset(*train_data_path));
        }
        const auto pred = nn::predict_labels(model, nn::view(data));
        const auto grouped =
            metrics::grouped_accuracy(pred, data, freqs ? &*freqs : nullptr);

        JsonValue out = JsonValue::object();
        out.set("schema", 1);
        out.set("iid_acc", grouped.iid_acc);
        out.set("wga", grouped.wga);
        out.set("per_class_worst", grouped.per_class_worst);
        out.set("weighting", grouped.weighting);
        JsonValue groups = JsonValue::array();
        for (const auto& [key, stats] : grouped.per_group) {
            JsonValue row = JsonValue::object();
            JsonValue k = JsonValue::array();
            for (const int v : key) k.push(v);
            row.set("key", std::move(k));
            row.set("count", stats.count);
            row.set("accuracy", stats.accuracy);
            groups.push(std::move(row));
        }
        out.set("groups", std::move(groups));
        if (data.shortcut_count == 2) {
            const auto gaps = metrics::shortcut_gaps(grouped);
            JsonValue g = JsonValue::object();
            g.set("id_acc", gaps.id_acc);
            g.set("gap_a", gaps.gap_a);
            g.set("gap_b", gaps.gap_b);
            g.set("gap_both", gaps.gap_both);
            out.set("gaps", std::move(g));
        }

        const std::string text = out.dump(2) + "\n";
        if (out_json) {
            write_file_atomic(*out_json, text);
            std::cout << "wrote " << *out_json << "\n";
        } else {
            std::cout << text;
        }
        return kExitOk;
    } catch (...) {
        return map_exception("eval");
    }
}

int cmd_mi(const std::string& joint_csv) {
    try {
        const std::string text = read_file(joint_csv);
        std::istringstream in(text);
        std::string line;
        std::vector<std::vector<double>> rows;
        std::int64_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::vector<double> row;
            std::istringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) {
                double v = 0.0;
                const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (res.ec != std::errc{}) {
                    throw ConfigError(joint_csv + ": line " + std::to_string(line_no) +
                                      ": bad number '" + cell + "'");
                }
                row.push_back(v);
            }
            if (!rows.empty() && row.size() != rows.front().size()) {
                throw ConfigError(joint_csv + ": line " + std::to_string(line_no) +
                                  ": ragged row");
            }
            rows.push_back(std::move(row));
        }
        if (rows.empty()) throw ConfigError(joint_csv + ": no rows");

        Matrix joint(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < rows[i].size(); ++j) {
                joint(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
            }
        }
        double mi = 0.0;
        try {
            mi = core::mutual_information(joint);
        } catch (const ValidationError& e) {
            throw ConfigError(joint_csv + ": " + e.what());
        }
        std::cout << format_number(mi) << "\n";
        return kExitOk;
    } catch (...) {
        return map_exception("mi");
    }
}

int run_main(int argc, const char* const* argv) {
    CLI::App app{"dbforge: annotation-free debiasing laboratory on synthetic biased datasets"};
    app.require_subcommand(1);

    std::string config_path, out_dir, parameter, in_path, out_csv, diag_path;
    std::string model_path, data_path;
    std::optional<std::string> out_opt, train_data_opt, out_json_opt;
    std::optional<int> jobs_opt;
    std::optional<std::uint64_t> seed_opt;
    std::vector<std::string> values;

    auto* gen = app.add_subcommand("gen", "generate dataset files from a config");
    gen->add_option("--config", config_path, "experiment config file")->required();
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* run = app.add_subcommand("run", "run the full experiment per seed");
    run->add_option("--config", config_path, "experiment config file")->required();
    std::string run_out, sweep_out;
    run->add_option("--out", run_out, "output directory override");
    int jobs_val = 0;
    run->add_option("--jobs", jobs_val, "parallel seed jobs");
    std::uint64_t seed_val = 0;
    auto* seed_flag = run->add_option("--seed-override", seed_val, "run a single seed");

    auto* weights = app.add_subcommand("weights", "derive FG-CCDB weights from a modes CSV");
    weights->add_option("--in", in_path, "CSV of sample_id,bias_label,class_label")->required();
    weights->add_option("--out", out_csv, "output weights CSV")->required();
    weights->add_option("--diag", diag_path, "output diagnostics JSON");

    auto* sweep = app.add_subcommand("sweep", "sweep one hyperparameter");
    sweep->add_option("--config", config_path, "experiment config file")->required();
    sweep->add_option("--parameter", parameter, "gamma | beta | repeats | rho")->required();
    sweep->add_option("--values", values, "comma-separated values")->required()->delimiter(',');
    sweep->add_option("--out", sweep_out, "output directory override");
    sweep->add_option("--jobs", jobs_val, "parallel seed jobs");

    auto* eval = app.add_subcommand("eval", "grouped metrics for a checkpoint on a dataset");
    eval->add_option("--model", model_path, "model checkpoint file")->required();
    eval->add_option("--data", data_path, "dataset file with shortcut columns")->required();
    std::string train_data, eval_out;
    eval->add_option("--train-data", train_data, "dataset supplying group frequencies");
    eval->add_option("--out", eval_out, "write JSON here instead of stdout");

    auto* mi = app.add_subcommand("mi", "mutual information of a CSV joint table");
    mi->add_option("--in", in_path, "CSV with one joint row per line")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (gen->parsed()) return cmd_gen(config_path, out_dir);
    if (run->parsed()) {
        if (*run->get_option("--jobs")) jobs_opt = jobs_val;
        if (*seed_flag) seed_opt = seed_val;
        if (!run_out.empty()) out_opt = run_out;
        return cmd_run(config_path, out_opt, jobs_opt, seed_opt);
    }
    if (weights->parsed()) {
        if (diag_path.empty()) diag_path = out_csv + ".diag.json";
        return cmd_weights(in_path, out_csv, diag_path);
    }
    if (sweep->parsed()) {
        if (*sweep->get_option("--jobs")) jobs_opt = jobs_val;
        if (!sweep_out.empty()) out_opt = sweep_out;
        return cmd_sweep(config_path, parameter, values, out_opt, jobs_opt);
    }
    if (eval->parsed()) {
        if (!train_data.empty()) train_data_opt = train_data;
        if (!eval_out.empty()) out_json_opt = eval_out;
        return cmd_eval(model_path, data_path, train_data_opt, out_json_opt);
    }
    if (mi->parsed()) return cmd_mi(in_path);
    return kExitConfig;
}

} // namespace dbforge::cli
