#include "dbforge/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dbforge/error.hpp"

namespace dbforge::cli {

namespace {

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, sep)) parts.push_back(trim(cur));
    return parts;
}

} // namespace

KeyValueConfig KeyValueConfig::parse_text(const std::string& text, const std::string& origin) {
    KeyValueConfig kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + trimmed + "'");
        }
        const std::string key = trim(trimmed.substr(0, eq));
        const std::string value = trim(trimmed.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        if (kv.values_.count(key)) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                              "'");
        }
        kv.values_[key] = value;
    }
    return kv;
}

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path.string());
}

bool KeyValueConfig::has(const std::string& key) const {
    return values_.count(key) > 0;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    read_[key] = true;
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string KeyValueConfig::require_string(const std::string& key) const {
    read_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
    return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    read_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = 0.0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc{} || res.ptr != it->second.data() + it->second.size()) {
        throw ConfigError(origin_ + ": key '" + key + "' is not a number: '" + it->second + "'");
    }
    return v;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
    read_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::int64_t v = 0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc{} || res.ptr != it->second.data() + it->second.size()) {
        throw ConfigError(origin_ + ": key '" + key + "' is not an integer: '" + it->second + "'");
    }
    return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    read_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError(origin_ + ": key '" + key + "' is not a boolean: '" + it->second + "'");
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    std::vector<double> fallback) const {
    read_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const auto& part : split(it->second, ',')) {
        if (part.empty()) continue;
        double v = 0.0;
        const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
        if (res.ec != std::errc{} || res.ptr != part.data() + part.size()) {
            throw ConfigError(origin_ + ": key '" + key + "' has a bad list entry: '" + part + "'");
        }
        out.push_back(v);
    }
    return out;
}

std::vector<std::int64_t> KeyValueConfig::get_int_list(const std::string& key,
                                                       std::vector<std::int64_t> fallback) const {
    read_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::int64_t> out;
    for (const auto& part : split(it->second, ',')) {
        if (part.empty()) continue;
        std::int64_t v = 0;
        const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
        if (res.ec != std::errc{} || res.ptr != part.data() + part.size()) {
            throw ConfigError(origin_ + ": key '" + key + "' has a bad list entry: '" + part + "'");
        }
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> KeyValueConfig::unread_keys() const {
    std::vector<std::string> out;
    for (const auto& [key, value] : values_) {
        if (!read_.count(key)) out.push_back(key);
    }
    return out;
}

std::string KeyValueConfig::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV offset basis
    const auto feed = [&h](std::string_view s) {
        for (const char ch : s) {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [key, value] : values_) { // std::map: sorted keys
        if (key == "run.output_dir" || key == "run.jobs") continue;
        feed(key);
        feed("=");
        feed(value);
        feed("\n");
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

nn::TrainConfig train_block(const KeyValueConfig& kv, const std::string& prefix,
                            const nn::TrainConfig& defaults) {
    nn::TrainConfig cfg = defaults;
    cfg.epochs = static_cast<int>(kv.get_int(prefix + ".epochs", cfg.epochs));
    cfg.iterations = kv.get_int(prefix + ".iterations", cfg.iterations);
    cfg.batch_size = static_cast<int>(kv.get_int(prefix + ".batch_size", cfg.batch_size));
    cfg.learning_rate = kv.get_double(prefix + ".learning_rate", cfg.learning_rate);
    cfg.weight_decay = kv.get_double(prefix + ".weight_decay", cfg.weight_decay);
    const std::string opt =
        kv.get_string(prefix + ".optimizer", cfg.optimizer == nn::Optimizer::Adam ? "adam" : "sgd");
    if (opt == "adam") {
        cfg.optimizer = nn::Optimizer::Adam;
    } else if (opt == "sgd") {
        cfg.optimizer = nn::Optimizer::Sgd;
    } else {
        throw ConfigError("key '" + prefix + ".optimizer' must be 'sgd' or 'adam', got '" + opt +
                          "'");
    }
    return cfg;
}

} // namespace

ExperimentConfig ExperimentConfig::from_kv(const KeyValueConfig& kv) {
    ExperimentConfig cfg;

    const std::string source = kv.get_string("dataset.source", "generate");
    if (source == "generate") {
        cfg.generate = true;
        auto& g = cfg.generator;
        g.name = kv.get_string("dataset.name", g.name);
        g.classes = static_cast<int>(kv.get_int("dataset.classes", g.classes));
        g.rho = kv.get_double_list("dataset.rho", {0.95});
        g.core_dim = static_cast<int>(kv.get_int("dataset.d_core", g.core_dim));
        g.spur_dim = static_cast<int>(kv.get_int("dataset.d_spur", g.spur_dim));
        g.core_sep = kv.get_double("dataset.core_sep", g.core_sep);
        g.spur_sep = kv.get_double("dataset.spur_sep", g.spur_sep);
        g.noise_std = kv.get_double("dataset.noise_std", g.noise_std);
        g.seed = static_cast<std::uint64_t>(kv.get_int("dataset.seed", 1));
        g.per_class.train = static_cast<int>(kv.get_int("dataset.n_per_class_train", 2000));
        g.per_class.val = static_cast<int>(kv.get_int("dataset.n_per_class_val", 500));
        g.per_class.test = static_cast<int>(kv.get_int("dataset.n_per_class_test", 1000));
        g.test_unbiased = kv.get_bool("dataset.test_unbiased", true);
        g.validate();
    } else if (source == "path") {
        cfg.generate = false;
        cfg.train_path = kv.require_string("dataset.train_path");
        cfg.val_path = kv.require_string("dataset.val_path");
        cfg.test_path = kv.require_string("dataset.test_path");
    } else {
        throw ConfigError("key 'dataset.source' must be 'generate' or 'path', got '" + source +
                          "'");
    }

    for (const auto h : kv.get_int_list("model.hidden", {32})) {
        cfg.hidden.push_back(static_cast<int>(h));
    }

    cfg.mst_cfg.gamma = kv.get_double("mst.gamma_fraction", 0.10);
    cfg.mst_cfg.beta = kv.get_double("mst.beta_fraction", 0.50);
    cfg.mst_cfg.repeats = static_cast<int>(kv.get_int("mst.repeats", 3));
    const std::string conf = kv.get_string("mst.confidence", "own_label");
    if (conf == "own_label") {
        cfg.mst_cfg.confidence = mst::Confidence::OwnLabel;
    } else if (conf == "max_prob") {
        cfg.mst_cfg.confidence = mst::Confidence::MaxProbability;
    } else {
        throw ConfigError("key 'mst.confidence' must be 'own_label' or 'max_prob', got '" + conf +
                          "'");
    }
    nn::TrainConfig stage_defaults;
    stage_defaults.epochs = 20;
    stage_defaults.batch_size = 64;
    stage_defaults.learning_rate = 0.01;
    stage_defaults.optimizer = nn::Optimizer::Adam;
    stage_defaults.weight_decay = 1e-4;
    cfg.mst_cfg.stage_train = train_block(kv, "mst", stage_defaults);

    nn::TrainConfig debias_defaults;
    debias_defaults.iterations = 5000;
    debias_defaults.batch_size = 64;
    debias_defaults.learning_rate = 0.01;
    debias_defaults.optimizer = nn::Optimizer::Adam;
    debias_defaults.weight_decay = 1e-4;
    cfg.debias.train = train_block(kv, "debias", debias_defaults);
    cfg.debias.checkpoint_every = kv.get_int("debias.checkpoint_every", 100);

    nn::TrainConfig erm_defaults = debias_defaults;
    cfg.erm = train_block(kv, "erm", erm_defaults);

    for (const auto s : kv.get_int_list("run.seeds", {1, 2, 3, 4, 5})) {
        cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (cfg.seeds.empty()) throw ConfigError("key 'run.seeds' must list at least one seed");
    cfg.output_dir = kv.get_string("run.output_dir", "out");
    cfg.jobs = static_cast<int>(kv.get_int("run.jobs", 1));
    if (cfg.jobs < 1) throw ConfigError("key 'run.jobs' must be positive");

    const auto unread = kv.unread_keys();
    if (!unread.empty()) {
        throw ConfigError("unknown config key '" + unread.front() + "'");
    }

    try {
        cfg.mst_cfg.validate();
        cfg.debias.validate();
        cfg.erm.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }

    cfg.digest = kv.digest();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    return from_kv(KeyValueConfig::parse_file(path));
}

nn::Architecture ExperimentConfig::architecture(int input_dim, int classes) const {
    nn::Architecture arch;
    arch.input_dim = input_dim;
    arch.classes = classes;
    arch.hidden = hidden;
    arch.validate();
    return arch;
}

} // namespace dbforge::cli
