#include <algorithm>
#include <cmath>

#include "dbforge/error.hpp"
#include "dbforge/report.hpp"
#include "dbforge/rng.hpp"

namespace dbforge::cli {

namespace {

constexpr std::uint64_t kErmStream = 0x65726dULL;
constexpr std::uint64_t kMstStream = 0x6d7374ULL;
constexpr std::uint64_t kDebiasStream = 0x646562ULL;

} // namespace

datagen::DatasetBundle materialize_data(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.generate) {
        datagen::GeneratorConfig gen = cfg.generator;
        gen.seed = derive_seed(cfg.generator.seed, {seed});
        return datagen::generate(gen);
    }
    datagen::DatasetBundle bundle;
    bundle.train = datagen::load_dataset(cfg.train_path);
    bundle.val = datagen::load_dataset(cfg.val_path);
    bundle.test = datagen::load_dataset(cfg.test_path);
    return bundle;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, std::uint64_t seed) {
    PipelineResult result;
    result.seed = seed;
    result.config_digest = cfg.digest;

    // stage-tagged diagnostics; the error category is preserved so the
    // CLI exit-code contract still holds (I/O stays I/O, etc.)
    const auto stage_guard = [](const char* stage, auto&& fn) {
        try {
            return fn();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(stage) + ": " + e.what());
        } catch (const IoError& e) {
            throw IoError(std::string(stage) + ": " + e.what());
        } catch (const TrainingError& e) {
            throw TrainingError(std::string(stage) + ": " + e.what());
        } catch (const Error& e) {
            throw TrainingError(std::string(stage) + ": " + e.what());
        }
    };

    const datagen::DatasetBundle data =
        stage_guard("data", [&] { return materialize_data(cfg, seed); });
    if (cfg.generate) {
        for (auto& w : cfg.generator.warnings()) result.warnings.push_back(w);
    }
    const nn::DataView train = nn::view(data.train);
    const nn::DataView val = nn::view(data.val);
    const nn::DataView test = nn::view(data.test);
    const nn::Architecture arch = cfg.architecture(train.feature_dim, train.classes);
    const metrics::GroupFreqs train_freqs = metrics::group_frequencies(data.train);

    // ERM baseline: same loop as the debiased run, uniform weights.
    const auto erm_result = stage_guard("erm", [&] {
        fgccdb::DebiasConfig erm_cfg;
        erm_cfg.train = cfg.erm;
        erm_cfg.checkpoint_every = cfg.debias.checkpoint_every;
        const std::vector<double> uniform(train.size(), 1.0);
        return fgccdb::train_debiased(train, val, uniform, arch, erm_cfg,
                                      derive_seed(seed, {kErmStream}));
    });
    result.erm_best_iteration = erm_result.best_iteration;
    const auto erm_pred = nn::predict_labels(erm_result.model, test);
    result.erm = metrics::grouped_accuracy(erm_pred, data.test, &train_freqs);
    if (data.test.shortcut_count == 2) result.erm_gaps = metrics::shortcut_gaps(result.erm);

    // Bias exploration.
    mst::MstConfig mst_cfg = cfg.mst_cfg;
    mst_cfg.seed = derive_seed(seed, {kMstStream});
    const mst::MstResult mst_result =
        stage_guard("mst", [&] { return mst::run_mst(train, arch, mst_cfg); });
    for (const auto& w : mst_result.warnings) result.warnings.push_back(w);
    for (int s = 0; s < data.train.shortcut_count; ++s) {
        const auto quality = mst::stage_quality(mst_result, data.train, s);
        if (result.stage_quality.empty()) result.stage_quality.resize(quality.size());
        for (std::size_t st = 0; st < quality.size(); ++st) {
            result.stage_quality[st].push_back(quality[st]);
        }
    }
    for (const auto& stage : mst_result.stages) {
        result.stage_conflicting_fraction.push_back(
            mst::conflicting_fraction(stage, data.train, 0));
        result.stage_selected_count.push_back(static_cast<std::int64_t>(stage.selected.size()));
        result.stage_train_loss.push_back(stage.final_train_loss);
        result.stage_confusions.push_back(stage.confusion);
    }
    result.final_confusion = mst_result.final_confusion;

    // Closed-form weight inference over predicted modes.
    result.weights = stage_guard("weights", [&] {
        return fgccdb::derive_weights(mst_result, train.labels, train.classes);
    });
    if (!result.weights.table.all_matchable()) {
        result.warnings.push_back("some class columns are unmatchable; exact distribution "
                                  "matching is impossible there (residuals recorded)");
    }

    // Debiased training with the weighted sampler.
    const auto debias_result = stage_guard("debias", [&] {
        return fgccdb::train_debiased(train, val, result.weights.sample_weights, arch, cfg.debias,
                                      derive_seed(seed, {kDebiasStream}));
    });
    result.debias_best_iteration = debias_result.best_iteration;
    result.debias_best_worst_class = debias_result.best_worst_class;
    result.debias_evaluations = static_cast<std::int64_t>(debias_result.trace.size());
    const auto debiased_pred = nn::predict_labels(debias_result.model, test);
    result.debiased = metrics::grouped_accuracy(debiased_pred, data.test, &train_freqs);
    if (data.test.shortcut_count == 2) {
        result.debiased_gaps = metrics::shortcut_gaps(result.debiased);
    }
    return result;
}

namespace {

JsonValue grouped_to_json(const metrics::GroupedAccuracy& g) {
    JsonValue out = JsonValue::object();
    out.set("iid_acc", g.iid_acc);
    out.set("wga", g.wga);
    out.set("per_class_worst", g.per_class_worst);
    out.set("weighting", g.weighting);
    JsonValue groups = JsonValue::array();
    for (const auto& [key, stats] : g.per_group) {
        JsonValue row = JsonValue::object();
        JsonValue k = JsonValue::array();
        for (const int v : key) k.push(v);
        row.set("key", std::move(k));
        row.set("count", stats.count);
        row.set("accuracy", stats.accuracy);
        groups.push(std::move(row));
    }
    out.set("groups", std::move(groups));
    return out;
}

JsonValue gaps_to_json(const std::optional<metrics::ShortcutGaps>& gaps) {
    if (!gaps) return JsonValue();
    JsonValue out = JsonValue::object();
    out.set("id_acc", gaps->id_acc);
    out.set("gap_a", gaps->gap_a);
    out.set("gap_b", gaps->gap_b);
    out.set("gap_both", gaps->gap_both);
    return out;
}

JsonValue confusion_to_json(const core::ConfusionMatrix& m) {
    JsonValue rows = JsonValue::array();
    for (int i = 0; i < m.classes; ++i) {
        JsonValue row = JsonValue::array();
        for (int j = 0; j < m.classes; ++j) row.push(m.at(i, j));
        rows.push(std::move(row));
    }
    return rows;
}

JsonValue matrix_to_json(const Matrix& m) {
    JsonValue rows = JsonValue::array();
    for (int i = 0; i < m.rows; ++i) {
        JsonValue row = JsonValue::array();
        for (int j = 0; j < m.cols; ++j) row.push(m(i, j));
        rows.push(std::move(row));
    }
    return rows;
}

JsonValue quality_to_json(const metrics::ModeQuality& q, int shortcut_column) {
    JsonValue out = JsonValue::object();
    out.set("shortcut", shortcut_column);
    out.set("overall_accuracy", q.overall_accuracy);
    JsonValue smallest = JsonValue::object();
    smallest.set("bias", q.smallest_mode.first);
    smallest.set("label", q.smallest_mode.second);
    smallest.set("truth_count", q.smallest.truth_count);
    smallest.set("precision", q.smallest.precision);
    smallest.set("recall", q.smallest.recall);
    smallest.set("f1", q.smallest.f1);
    out.set("smallest_mode", std::move(smallest));
    return out;
}

} // namespace

JsonValue to_json(const PipelineResult& r) {
    JsonValue out = JsonValue::object();
    out.set("schema", 1);
    out.set("seed", r.seed);
    out.set("config_digest", r.config_digest);

    JsonValue warnings = JsonValue::array();
    for (const auto& w : r.warnings) warnings.push(w);
    out.set("warnings", std::move(warnings));

    out.set("erm", grouped_to_json(r.erm));

    JsonValue mst_block = JsonValue::object();
    JsonValue stages = JsonValue::array();
    for (std::size_t st = 0; st < r.stage_confusions.size(); ++st) {
        JsonValue stage = JsonValue::object();
        stage.set("stage", static_cast<std::int64_t>(st));
        stage.set("selected_count", r.stage_selected_count[st]);
        stage.set("conflicting_fraction", r.stage_conflicting_fraction[st]);
        stage.set("train_loss", r.stage_train_loss[st]);
        stage.set("confusion", confusion_to_json(r.stage_confusions[st]));
        JsonValue quality = JsonValue::array();
        for (std::size_t s = 0; s < r.stage_quality[st].size(); ++s) {
            quality.push(quality_to_json(r.stage_quality[st][s], static_cast<int>(s)));
        }
        stage.set("quality", std::move(quality));
        stages.push(std::move(stage));
    }
    mst_block.set("stages", std::move(stages));
    mst_block.set("final_confusion", confusion_to_json(r.final_confusion));
    out.set("mst", std::move(mst_block));

    JsonValue weights = JsonValue::object();
    weights.set("W", matrix_to_json(r.weights.table.mode_weight));
    weights.set("w", matrix_to_json(r.weights.table.sample_weight));
    JsonValue matchable = JsonValue::array();
    for (const bool b : r.weights.table.matchable) matchable.push(b);
    weights.set("matchable", std::move(matchable));
    std::int64_t empty_modes = 0;
    for (const bool b : r.weights.table.empty_mode) empty_modes += b;
    weights.set("empty_modes", empty_modes);
    weights.set("mi_original_joint", r.weights.mi_original_joint);
    weights.set("mi_multiplier_joint", r.weights.mi_multiplier_joint);
    weights.set("max_min_weight_ratio", r.weights.max_min_weight_ratio);
    JsonValue mass = JsonValue::array();
    for (const double v : r.weights.realized_class_mass) mass.push(v);
    weights.set("realized_class_mass", std::move(mass));
    JsonValue residual = JsonValue::object();
    double worst = 0.0;
    JsonValue per_class = JsonValue::array();
    for (const double v : r.weights.residuals) {
        worst = std::max(worst, v);
        per_class.push(v);
    }
    residual.set("max", worst);
    residual.set("per_class", std::move(per_class));
    weights.set("residual_mismatch", std::move(residual));
    out.set("weights", std::move(weights));

    JsonValue debias = JsonValue::object();
    debias.set("best_iteration", r.debias_best_iteration);
    debias.set("best_worst_class", r.debias_best_worst_class);
    debias.set("evaluations", r.debias_evaluations);
    debias.set("erm_best_iteration", r.erm_best_iteration);
    out.set("debias", std::move(debias));

    out.set("debiased", grouped_to_json(r.debiased));

    JsonValue gaps = JsonValue::object();
    gaps.set("erm", gaps_to_json(r.erm_gaps));
    gaps.set("debiased", gaps_to_json(r.debiased_gaps));
    out.set("gaps", std::move(gaps));
    return out;
}

Aggregate aggregate_of(const std::vector<double>& values) {
    Aggregate agg;
    if (values.empty()) return agg;
    for (const double v : values) agg.mean += v;
    agg.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (const double v : values) var += (v - agg.mean) * (v - agg.mean);
    agg.stddev = std::sqrt(var / static_cast<double>(values.size()));
    return agg;
}

namespace {

JsonValue aggregate_to_json(const Aggregate& agg) {
    JsonValue out = JsonValue::object();
    out.set("mean", agg.mean);
    out.set("stddev", agg.stddev);
    return out;
}

// Pulls one number out of a seed record by path; throws on schema drift.
double record_number(const JsonValue& run, std::initializer_list<const char*> path) {
    const JsonValue* v = &run;
    for (const char* key : path) v = &v->at(key);
    return v->as_double();
}

} // namespace

JsonValue assemble_report(const ExperimentConfig& cfg, const std::vector<JsonValue>& runs) {
    JsonValue out = JsonValue::object();
    out.set("schema", 1);
    out.set("config_digest", cfg.digest);
    JsonValue seeds = JsonValue::array();
    for (const auto s : cfg.seeds) seeds.push(s);
    out.set("seeds", std::move(seeds));

    JsonValue run_array = JsonValue::array();
    std::vector<double> erm_wga, erm_iid, deb_wga, deb_iid, recall, f1, gap_both_erm, gap_both_deb;
    for (const auto& run : runs) {
        erm_wga.push_back(record_number(run, {"erm", "wga"}));
        erm_iid.push_back(record_number(run, {"erm", "iid_acc"}));
        deb_wga.push_back(record_number(run, {"debiased", "wga"}));
        deb_iid.push_back(record_number(run, {"debiased", "iid_acc"}));
        const auto& stages = run.at("mst").at("stages").items();
        const auto& last_quality = stages.back().at("quality").items();
        recall.push_back(last_quality.front().at("smallest_mode").at("recall").as_double());
        f1.push_back(last_quality.front().at("smallest_mode").at("f1").as_double());
        const JsonValue& gaps = run.at("gaps");
        if (gaps.at("erm").is_object()) {
            gap_both_erm.push_back(gaps.at("erm").at("gap_both").as_double());
            gap_both_deb.push_back(gaps.at("debiased").at("gap_both").as_double());
        }
        run_array.push(run);
    }
    out.set("runs", std::move(run_array));

    JsonValue agg = JsonValue::object();
    agg.set("erm_wga", aggregate_to_json(aggregate_of(erm_wga)));
    agg.set("erm_iid_acc", aggregate_to_json(aggregate_of(erm_iid)));
    agg.set("debiased_wga", aggregate_to_json(aggregate_of(deb_wga)));
    agg.set("debiased_iid_acc", aggregate_to_json(aggregate_of(deb_iid)));
    agg.set("smallest_mode_recall", aggregate_to_json(aggregate_of(recall)));
    agg.set("smallest_mode_f1", aggregate_to_json(aggregate_of(f1)));
    agg.set("gap_both_erm",
            gap_both_erm.empty() ? JsonValue() : aggregate_to_json(aggregate_of(gap_both_erm)));
    agg.set("gap_both_debiased",
            gap_both_deb.empty() ? JsonValue() : aggregate_to_json(aggregate_of(gap_both_deb)));
    out.set("aggregate", std::move(agg));
    return out;
}

} // namespace dbforge::cli
