#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dbforge::datagen {

// Feature matrix with class labels and optional ground-truth shortcut
// labels. Shortcut columns exist for evaluation only; the training
// path never reads them.
struct LabeledDataset {
    std::string name;
    int classes = 0;
    int feature_dim = 0;
    int shortcut_count = 0;
    std::vector<double> features;  // N x feature_dim, row-major
    std::vector<int> labels;       // N
    std::vector<int> shortcuts;    // N x shortcut_count, row-major

    std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
    double feature(std::int64_t i, int j) const { return features[i * feature_dim + j]; }
    int shortcut(std::int64_t i, int k) const { return shortcuts[i * shortcut_count + k]; }
    std::span<const double> row(std::int64_t i) const {
        return {features.data() + i * feature_dim, static_cast<std::size_t>(feature_dim)};
    }

    bool same_data(const LabeledDataset& other) const;
};

struct SplitSizes {
    int train = 0;
    int val = 0;
    int test = 0;
};

// Synthetic biased dataset recipe. Each class gets a core prototype
// block and one spurious block per shortcut; a fraction rho of each
// class is shortcut-aligned, the rest cycles over the other values.
struct GeneratorConfig {
    std::string name = "synthetic";
    int classes = 2;
    std::vector<double> rho;       // per shortcut, in (0, 1]
    int core_dim = 6;
    int spur_dim = 2;              // per shortcut block
    double core_sep = 1.5;
    double spur_sep = 4.0;
    double noise_std = 1.0;
    std::uint64_t seed = 1;
    SplitSizes per_class;
    bool test_unbiased = true;

    int shortcut_count() const { return static_cast<int>(rho.size()); }
    int feature_dim() const { return core_dim + shortcut_count() * spur_dim; }
    void validate() const;                  // throws ConfigError
    std::vector<std::string> warnings() const;
};

struct DatasetBundle {
    LabeledDataset train;
    LabeledDataset val;
    LabeledDataset test;
};

// Per-class shortcut value counts for a single-shortcut split:
// round(rho * n) aligned, the remainder cycled over the other values.
std::vector<int> aligned_conflicting_counts(double rho, int n, int classes, int class_label);

// Per-class cell counts over the 2x2 aligned/conflicting grid for two
// shortcuts; each cell rounded, leftover assigned to the largest cell.
std::array<int, 4> pair_cell_counts(double rho1, double rho2, int n);

DatasetBundle generate_single_shortcut(const GeneratorConfig& cfg);
DatasetBundle generate_multi_shortcut(const GeneratorConfig& cfg);
DatasetBundle generate(const GeneratorConfig& cfg); // dispatch on shortcut count

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

} // namespace dbforge::datagen
