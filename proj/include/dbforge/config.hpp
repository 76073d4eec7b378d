#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dbforge/datagen.hpp"
#include "dbforge/fgccdb.hpp"
#include "dbforge/mst.hpp"
#include "dbforge/nn.hpp"

namespace dbforge::cli {

// Flat sectioned key-value text: one `section.key = value` per line,
// `#` comments, blank lines ignored. Keys carry their units.
class KeyValueConfig {
public:
    static KeyValueConfig parse_text(const std::string& text, const std::string& origin = "<text>");
    static KeyValueConfig parse_file(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const;
    std::vector<std::int64_t> get_int_list(const std::string& key,
                                           std::vector<std::int64_t> fallback) const;

    // Keys that were never read; used to reject typos.
    std::vector<std::string> unread_keys() const;

    // 64-bit FNV-1a over the sorted `key=value` pairs. Insensitive to
    // whitespace, comments and key order; excludes orchestration keys
    // (run.output_dir, run.jobs) that cannot affect results.
    std::string digest() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, bool> read_;
    std::string origin_;
};

// Everything one experiment needs: data source, architecture, the
// MST / debias / ERM-baseline training blocks, seeds and output.
struct ExperimentConfig {
    bool generate = true;
    datagen::GeneratorConfig generator;
    std::filesystem::path train_path, val_path, test_path;

    std::vector<int> hidden; // classifier hidden widths, empty = softmax regression

    mst::MstConfig mst_cfg;
    fgccdb::DebiasConfig debias;
    nn::TrainConfig erm;

    std::vector<std::uint64_t> seeds;
    std::string output_dir = "out";
    int jobs = 1;
    std::string digest;

    static ExperimentConfig from_kv(const KeyValueConfig& kv);
    static ExperimentConfig from_file(const std::filesystem::path& path);

    nn::Architecture architecture(int input_dim, int classes) const;
};

} // namespace dbforge::cli
