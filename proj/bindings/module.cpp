#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dbforge/config.hpp"
#include "dbforge/diagnostics.hpp"
#include "dbforge/error.hpp"
#include "dbforge/report.hpp"

namespace py = pybind11;
using namespace dbforge;

namespace {

std::vector<std::vector<double>> matrix_rows(const Matrix& m) {
    std::vector<std::vector<double>> rows(m.rows);
    for (int i = 0; i < m.rows; ++i) {
        rows[i].assign(m.data.begin() + static_cast<std::int64_t>(i) * m.cols,
                       m.data.begin() + static_cast<std::int64_t>(i + 1) * m.cols);
    }
    return rows;
}

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ValidationError("matrix needs at least one row");
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw ValidationError("ragged matrix rows");
        std::copy(rows[i].begin(), rows[i].end(), m.data.begin() + i * rows.front().size());
    }
    return m;
}

metrics::GroupFreqs freqs_from_pairs(
    const std::vector<std::pair<std::vector<int>, double>>& pairs) {
    metrics::GroupFreqs freqs;
    for (const auto& [key, value] : pairs) freqs[key] = value;
    return freqs;
}

std::vector<std::pair<std::vector<int>, double>> freqs_to_pairs(const metrics::GroupFreqs& freqs) {
    return {freqs.begin(), freqs.end()};
}

} // namespace

PYBIND11_MODULE(_dbforge, m) {
    m.doc() = "Annotation-free debiasing laboratory: confusion-mode statistics, "
              "closed-form mode reweighting, multi-stage bias exploration and the "
              "experiment pipeline.";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

    // ---- core -----------------------------------------------------------
    py::class_<core::ConfusionMatrix>(m, "ConfusionMatrix")
        .def_readonly("classes", &core::ConfusionMatrix::classes)
        .def_readonly("total", &core::ConfusionMatrix::total)
        .def("at", [](const core::ConfusionMatrix& cm, int s, int y) { return cm.at(s, y); })
        .def("rows", [](const core::ConfusionMatrix& cm) {
            std::vector<std::vector<std::int64_t>> rows(cm.classes);
            for (int i = 0; i < cm.classes; ++i) {
                for (int j = 0; j < cm.classes; ++j) rows[i].push_back(cm.at(i, j));
            }
            return rows;
        });

    py::class_<core::ModeStatistics>(m, "ModeStatistics")
        .def_readonly("classes", &core::ModeStatistics::classes)
        .def_property_readonly("joint",
                               [](const core::ModeStatistics& s) { return matrix_rows(s.joint); })
        .def_property_readonly(
            "conditional",
            [](const core::ModeStatistics& s) { return matrix_rows(s.conditional); })
        .def_readonly("bias_marginal", &core::ModeStatistics::bias_marginal)
        .def_readonly("class_prior", &core::ModeStatistics::class_prior)
        .def_readonly("empty_class", &core::ModeStatistics::empty_class);

    py::class_<core::WeightTable>(m, "WeightTable")
        .def_readonly("classes", &core::WeightTable::classes)
        .def_property_readonly(
            "mode_weight", [](const core::WeightTable& w) { return matrix_rows(w.mode_weight); })
        .def_property_readonly(
            "sample_weight",
            [](const core::WeightTable& w) { return matrix_rows(w.sample_weight); })
        .def_readonly("matchable", &core::WeightTable::matchable)
        .def("all_matchable", &core::WeightTable::all_matchable)
        .def("any_empty_mode", &core::WeightTable::any_empty_mode);

    m.def(
        "build_confusion",
        [](const std::vector<int>& bias, const std::vector<int>& labels, int classes) {
            return core::build_confusion(bias, labels, classes);
        },
        py::arg("bias"), py::arg("labels"), py::arg("classes"));
    m.def("estimate_statistics", &core::estimate_statistics, py::arg("confusion"));
    m.def("compute_weights", &core::compute_weights, py::arg("statistics"), py::arg("confusion"));
    m.def(
        "reweighted_joint",
        [](const core::ModeStatistics& stats, const core::WeightTable& table) {
            return matrix_rows(core::reweighted_joint(stats, table));
        },
        py::arg("statistics"), py::arg("weights"));
    m.def(
        "mutual_information",
        [](const std::vector<std::vector<double>>& joint) {
            return core::mutual_information(matrix_from_rows(joint));
        },
        py::arg("joint"), "Discrete mutual information of a joint table, in nats.");
    m.def(
        "matching_residuals",
        [](const core::ModeStatistics& stats, const core::WeightTable& table) {
            return core::matching_residuals(stats, table);
        },
        py::arg("statistics"), py::arg("weights"));
    m.def(
        "per_sample_weights",
        [](const core::WeightTable& table, const std::vector<int>& bias,
           const std::vector<int>& labels) {
            return core::per_sample_weights(table, bias, labels);
        },
        py::arg("weights"), py::arg("bias"), py::arg("labels"));

    // ---- datagen --------------------------------------------------------
    py::class_<datagen::SplitSizes>(m, "SplitSizes")
        .def(py::init([](int train, int val, int test) {
                 return datagen::SplitSizes{train, val, test};
             }),
             py::arg("train"), py::arg("val") = 0, py::arg("test") = 0)
        .def_readwrite("train", &datagen::SplitSizes::train)
        .def_readwrite("val", &datagen::SplitSizes::val)
        .def_readwrite("test", &datagen::SplitSizes::test);

    py::class_<datagen::GeneratorConfig>(m, "GeneratorConfig")
        .def(py::init<>())
        .def_readwrite("name", &datagen::GeneratorConfig::name)
        .def_readwrite("classes", &datagen::GeneratorConfig::classes)
        .def_readwrite("rho", &datagen::GeneratorConfig::rho)
        .def_readwrite("core_dim", &datagen::GeneratorConfig::core_dim)
        .def_readwrite("spur_dim", &datagen::GeneratorConfig::spur_dim)
        .def_readwrite("core_sep", &datagen::GeneratorConfig::core_sep)
        .def_readwrite("spur_sep", &datagen::GeneratorConfig::spur_sep)
        .def_readwrite("noise_std", &datagen::GeneratorConfig::noise_std)
        .def_readwrite("seed", &datagen::GeneratorConfig::seed)
        .def_readwrite("per_class", &datagen::GeneratorConfig::per_class)
        .def_readwrite("test_unbiased", &datagen::GeneratorConfig::test_unbiased)
        .def("validate", &datagen::GeneratorConfig::validate)
        .def("warnings", &datagen::GeneratorConfig::warnings);

    py::class_<datagen::LabeledDataset>(m, "LabeledDataset")
        .def_readonly("name", &datagen::LabeledDataset::name)
        .def_readonly("classes", &datagen::LabeledDataset::classes)
        .def_readonly("feature_dim", &datagen::LabeledDataset::feature_dim)
        .def_readonly("shortcut_count", &datagen::LabeledDataset::shortcut_count)
        .def_readonly("features", &datagen::LabeledDataset::features)
        .def_readonly("labels", &datagen::LabeledDataset::labels)
        .def_readonly("shortcuts", &datagen::LabeledDataset::shortcuts)
        .def("size", &datagen::LabeledDataset::size)
        .def("same_data", &datagen::LabeledDataset::same_data);

    py::class_<datagen::DatasetBundle>(m, "DatasetBundle")
        .def_readonly("train", &datagen::DatasetBundle::train)
        .def_readonly("val", &datagen::DatasetBundle::val)
        .def_readonly("test", &datagen::DatasetBundle::test);

    m.def("generate", &datagen::generate, py::arg("config"));
    m.def("save_dataset", &datagen::save_dataset, py::arg("dataset"), py::arg("path"));
    m.def("load_dataset", &datagen::load_dataset, py::arg("path"));

    // ---- nn ---------------------------------------------------------------
    py::class_<nn::Architecture>(m, "Architecture")
        .def(py::init([](int input_dim, std::vector<int> hidden, int classes) {
                 return nn::Architecture{input_dim, std::move(hidden), classes};
             }),
             py::arg("input_dim"), py::arg("hidden"), py::arg("classes"))
        .def_readwrite("input_dim", &nn::Architecture::input_dim)
        .def_readwrite("hidden", &nn::Architecture::hidden)
        .def_readwrite("classes", &nn::Architecture::classes)
        .def("parameter_count", &nn::Architecture::parameter_count);

    py::enum_<nn::Optimizer>(m, "Optimizer")
        .value("SGD", nn::Optimizer::Sgd)
        .value("ADAM", nn::Optimizer::Adam);

    py::class_<nn::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &nn::TrainConfig::epochs)
        .def_readwrite("iterations", &nn::TrainConfig::iterations)
        .def_readwrite("batch_size", &nn::TrainConfig::batch_size)
        .def_readwrite("learning_rate", &nn::TrainConfig::learning_rate)
        .def_readwrite("optimizer", &nn::TrainConfig::optimizer)
        .def_readwrite("weight_decay", &nn::TrainConfig::weight_decay)
        .def_readwrite("seed", &nn::TrainConfig::seed);

    py::class_<nn::ClassifierModel>(m, "ClassifierModel")
        .def_readonly("arch", &nn::ClassifierModel::arch)
        .def_readonly("params", &nn::ClassifierModel::params)
        .def_readonly("init_scheme", &nn::ClassifierModel::init_scheme);

    py::class_<nn::WeightedSampler>(m, "WeightedSampler")
        .def(py::init<std::vector<double>, std::uint64_t>(), py::arg("weights"), py::arg("seed"))
        .def("sample_indices", &nn::WeightedSampler::sample_indices, py::arg("count"))
        .def("size", &nn::WeightedSampler::size)
        .def("total_weight", &nn::WeightedSampler::total_weight);

    m.def(
        "train_erm",
        [](const datagen::LabeledDataset& ds, const nn::Architecture& arch,
           const nn::TrainConfig& cfg, const std::optional<std::vector<double>>& weights) {
            std::optional<nn::WeightedSampler> sampler;
            if (weights) sampler.emplace(*weights, derive_seed(cfg.seed, {0x7079ULL}));
            const auto result = nn::train_erm(nn::view(ds), arch, cfg, std::move(sampler));
            return py::make_tuple(result.model, result.epoch_loss);
        },
        py::arg("dataset"), py::arg("arch"), py::arg("config"),
        py::arg("sample_weights") = std::nullopt,
        "Returns (model, per-epoch mean losses). With sample_weights, batches are drawn "
        "by weighted sampling with replacement.");
    m.def(
        "predict_proba",
        [](const nn::ClassifierModel& model, const datagen::LabeledDataset& ds) {
            return matrix_rows(nn::predict_proba(model, nn::view(ds)));
        },
        py::arg("model"), py::arg("dataset"));
    m.def(
        "predict_labels",
        [](const nn::ClassifierModel& model, const datagen::LabeledDataset& ds) {
            return nn::predict_labels(model, nn::view(ds));
        },
        py::arg("model"), py::arg("dataset"));
    m.def("gradient_check", &nn::gradient_check, py::arg("arch"), py::arg("seed"),
          "Max relative error between analytic and central-difference gradients.");
    m.def("save_model", &nn::save_model, py::arg("model"), py::arg("path"));
    m.def("load_model", &nn::load_model, py::arg("path"));

    // ---- mst ---------------------------------------------------------------
    py::enum_<mst::Confidence>(m, "Confidence")
        .value("OWN_LABEL", mst::Confidence::OwnLabel)
        .value("MAX_PROBABILITY", mst::Confidence::MaxProbability);

    py::class_<mst::MstConfig>(m, "MstConfig")
        .def(py::init<>())
        .def_readwrite("gamma", &mst::MstConfig::gamma)
        .def_readwrite("beta", &mst::MstConfig::beta)
        .def_readwrite("repeats", &mst::MstConfig::repeats)
        .def_readwrite("confidence", &mst::MstConfig::confidence)
        .def_readwrite("stage_train", &mst::MstConfig::stage_train)
        .def_readwrite("seed", &mst::MstConfig::seed);

    py::class_<mst::MstResult>(m, "MstResult")
        .def_readonly("bias_labels", &mst::MstResult::bias_labels)
        .def_readonly("final_confusion", &mst::MstResult::final_confusion)
        .def_readonly("warnings", &mst::MstResult::warnings)
        .def_property_readonly("stage_count",
                               [](const mst::MstResult& r) { return r.stages.size(); })
        .def("stage_selected",
             [](const mst::MstResult& r, int stage) { return r.stages.at(stage).selected; })
        .def("stage_bias_labels",
             [](const mst::MstResult& r, int stage) { return r.stages.at(stage).bias_labels; });

    m.def(
        "run_mst",
        [](const datagen::LabeledDataset& ds, const nn::Architecture& arch,
           const mst::MstConfig& cfg) { return mst::run_mst(nn::view(ds), arch, cfg); },
        py::arg("dataset"), py::arg("arch"), py::arg("config"),
        "Multi-stage data-selective retraining. Ground-truth shortcut columns are "
        "structurally invisible to this path.");

    py::class_<metrics::ModeMetrics>(m, "ModeMetrics")
        .def_readonly("precision", &metrics::ModeMetrics::precision)
        .def_readonly("recall", &metrics::ModeMetrics::recall)
        .def_readonly("f1", &metrics::ModeMetrics::f1)
        .def_readonly("truth_count", &metrics::ModeMetrics::truth_count);

    py::class_<metrics::ModeQuality>(m, "ModeQuality")
        .def_readonly("overall_accuracy", &metrics::ModeQuality::overall_accuracy)
        .def_readonly("smallest_mode", &metrics::ModeQuality::smallest_mode)
        .def_readonly("smallest", &metrics::ModeQuality::smallest);

    m.def("stage_quality", &mst::stage_quality, py::arg("result"), py::arg("dataset"),
          py::arg("shortcut_column") = 0);

    // ---- fgccdb -------------------------------------------------------------
    py::class_<fgccdb::DerivedWeights>(m, "DerivedWeights")
        .def_readonly("confusion", &fgccdb::DerivedWeights::confusion)
        .def_readonly("table", &fgccdb::DerivedWeights::table)
        .def_readonly("sample_weights", &fgccdb::DerivedWeights::sample_weights)
        .def_readonly("mi_original_joint", &fgccdb::DerivedWeights::mi_original_joint)
        .def_readonly("mi_multiplier_joint", &fgccdb::DerivedWeights::mi_multiplier_joint)
        .def_readonly("max_min_weight_ratio", &fgccdb::DerivedWeights::max_min_weight_ratio)
        .def_readonly("residuals", &fgccdb::DerivedWeights::residuals)
        .def_readonly("realized_class_mass", &fgccdb::DerivedWeights::realized_class_mass);

    m.def(
        "derive_weights",
        [](const std::vector<int>& bias, const std::vector<int>& labels, int classes) {
            if (bias.size() != labels.size()) {
                throw ValidationError("bias and label lists differ in length");
            }
            std::vector<core::ModeAssignment> modes(bias.size());
            for (std::size_t i = 0; i < bias.size(); ++i) modes[i] = {bias[i], labels[i]};
            return fgccdb::derive_weights(modes, classes);
        },
        py::arg("bias"), py::arg("labels"), py::arg("classes"),
        "Closed-form FG-CCDB weights from (bias, label) assignments; feed MST output "
        "or ground-truth shortcut labels.");

    py::class_<fgccdb::DebiasConfig>(m, "DebiasConfig")
        .def(py::init<>())
        .def_readwrite("train", &fgccdb::DebiasConfig::train)
        .def_readwrite("checkpoint_every", &fgccdb::DebiasConfig::checkpoint_every);

    py::class_<fgccdb::DebiasResult>(m, "DebiasResult")
        .def_readonly("model", &fgccdb::DebiasResult::model)
        .def_readonly("best_iteration", &fgccdb::DebiasResult::best_iteration)
        .def_readonly("best_worst_class", &fgccdb::DebiasResult::best_worst_class)
        .def_property_readonly("evaluations",
                               [](const fgccdb::DebiasResult& r) { return r.trace.size(); });

    m.def(
        "train_debiased",
        [](const datagen::LabeledDataset& train, const datagen::LabeledDataset& val,
           const std::vector<double>& weights, const nn::Architecture& arch,
           const fgccdb::DebiasConfig& cfg, std::uint64_t seed) {
            return fgccdb::train_debiased(nn::view(train), nn::view(val), weights, arch, cfg,
                                          seed);
        },
        py::arg("train"), py::arg("val"), py::arg("weights"), py::arg("arch"), py::arg("config"),
        py::arg("seed"));

    // ---- metrics ------------------------------------------------------------
    py::class_<metrics::GroupedAccuracy>(m, "GroupedAccuracy")
        .def_readonly("iid_acc", &metrics::GroupedAccuracy::iid_acc)
        .def_readonly("wga", &metrics::GroupedAccuracy::wga)
        .def_readonly("per_class_worst", &metrics::GroupedAccuracy::per_class_worst)
        .def_readonly("weighting", &metrics::GroupedAccuracy::weighting)
        .def("groups", [](const metrics::GroupedAccuracy& g) {
            std::vector<std::tuple<std::vector<int>, std::int64_t, double>> out;
            for (const auto& [key, stats] : g.per_group) {
                out.emplace_back(key, stats.count, stats.accuracy);
            }
            return out;
        });

    py::class_<metrics::ShortcutGaps>(m, "ShortcutGaps")
        .def_readonly("id_acc", &metrics::ShortcutGaps::id_acc)
        .def_readonly("gap_a", &metrics::ShortcutGaps::gap_a)
        .def_readonly("gap_b", &metrics::ShortcutGaps::gap_b)
        .def_readonly("gap_both", &metrics::ShortcutGaps::gap_both);

    m.def(
        "grouped_accuracy",
        [](const std::vector<int>& predictions, const datagen::LabeledDataset& ds,
           const std::optional<std::vector<std::pair<std::vector<int>, double>>>& train_freqs) {
            if (train_freqs) {
                const auto freqs = freqs_from_pairs(*train_freqs);
                return metrics::grouped_accuracy(predictions, ds, &freqs);
            }
            return metrics::grouped_accuracy(predictions, ds, nullptr);
        },
        py::arg("predictions"), py::arg("dataset"), py::arg("train_freqs") = std::nullopt);
    m.def(
        "group_frequencies",
        [](const datagen::LabeledDataset& ds) {
            return freqs_to_pairs(metrics::group_frequencies(ds));
        },
        py::arg("dataset"));
    m.def("shortcut_gaps", &metrics::shortcut_gaps, py::arg("grouped"));

    // ---- experiment pipeline --------------------------------------------------
    m.def(
        "run_experiment",
        [](const std::string& config_text, std::uint64_t seed) {
            const auto cfg =
                cli::ExperimentConfig::from_kv(cli::KeyValueConfig::parse_text(config_text));
            return cli::to_json(cli::run_pipeline(cfg, seed)).dump(2);
        },
        py::arg("config_text"), py::arg("seed"),
        "Runs one seed of the full pipeline from experiment-config text and returns "
        "the seed record as a JSON string.");
    m.def(
        "config_digest",
        [](const std::string& config_text) {
            return cli::KeyValueConfig::parse_text(config_text).digest();
        },
        py::arg("config_text"));
}
