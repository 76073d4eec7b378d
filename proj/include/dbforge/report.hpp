#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbforge/config.hpp"
#include "dbforge/fgccdb.hpp"
#include "dbforge/json_writer.hpp"
#include "dbforge/metrics.hpp"
#include "dbforge/mst.hpp"

namespace dbforge::cli {

// Everything one seed of the experiment produced. `to_json` emits the
// versioned, fixed-key record embedded in report.json.
struct PipelineResult {
    std::uint64_t seed = 0;
    std::string config_digest;

    metrics::GroupedAccuracy erm;
    metrics::GroupedAccuracy debiased;
    std::optional<metrics::ShortcutGaps> erm_gaps;      // present when S = 2
    std::optional<metrics::ShortcutGaps> debiased_gaps;

    std::vector<std::vector<metrics::ModeQuality>> stage_quality; // [stage][shortcut column]
    std::vector<double> stage_conflicting_fraction;               // impurity of each stage's selection
    std::vector<std::int64_t> stage_selected_count;
    std::vector<double> stage_train_loss;
    std::vector<core::ConfusionMatrix> stage_confusions;
    core::ConfusionMatrix final_confusion;

    fgccdb::DerivedWeights weights;

    std::int64_t debias_best_iteration = 0;
    double debias_best_worst_class = 0.0;
    std::int64_t debias_evaluations = 0;
    std::int64_t erm_best_iteration = 0;

    std::vector<std::string> warnings;
};

JsonValue to_json(const PipelineResult& result);

// Loads the datasets a pipeline run works on. Generated data derives
// its stream from (generator seed, run seed); loaded data is shared
// across seeds.
datagen::DatasetBundle materialize_data(const ExperimentConfig& cfg, std::uint64_t seed);

// One full seed: ERM baseline, MST, weight inference, debiased
// training, metrics.
PipelineResult run_pipeline(const ExperimentConfig& cfg, std::uint64_t seed);

// Parses JSON text (used to resume from per-seed record files).
JsonValue parse_json(const std::string& text);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0; // population
};

Aggregate aggregate_of(const std::vector<double>& values);

// Full report: config digest, per-seed records, cross-seed aggregates.
JsonValue assemble_report(const ExperimentConfig& cfg, const std::vector<JsonValue>& runs);

} // namespace dbforge::cli
