#include "dbforge/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dbforge/error.hpp"
#include "dbforge/rng.hpp"

namespace dbforge::datagen {

namespace {

constexpr std::uint64_t kSplitTrain = 0;
constexpr std::uint64_t kSplitVal = 1;
constexpr std::uint64_t kSplitTest = 2;

int round_count(double x) {
    return static_cast<int>(std::lround(x));
}

// Other class values in ascending order; conflicting samples cycle
// through these so every minority mode is populated whenever
// (1 - rho) * n >= C - 1.
std::vector<int> other_values(int classes, int class_label) {
    std::vector<int> others;
    others.reserve(classes - 1);
    for (int v = 0; v < classes; ++v) {
        if (v != class_label) others.push_back(v);
    }
    return others;
}

void append_number(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

} // namespace

bool LabeledDataset::same_data(const LabeledDataset& other) const {
    return classes == other.classes && feature_dim == other.feature_dim &&
           shortcut_count == other.shortcut_count && features == other.features &&
           labels == other.labels && shortcuts == other.shortcuts;
}

void GeneratorConfig::validate() const {
    if (classes < 2) throw ConfigError("dataset.classes must be at least 2");
    if (rho.empty() || rho.size() > 2) {
        throw ConfigError("dataset.rho must list one or two alignment ratios");
    }
    for (std::size_t k = 0; k < rho.size(); ++k) {
        if (!(rho[k] > 0.0) || rho[k] > 1.0) {
            throw ConfigError("dataset.rho[" + std::to_string(k) + "] must lie in (0, 1], got " +
                              std::to_string(rho[k]));
        }
    }
    if (core_dim < 1) throw ConfigError("dataset.d_core must be at least 1");
    if (spur_dim < 1) throw ConfigError("dataset.d_spur must be at least 1");
    if (!(noise_std > 0.0)) throw ConfigError("dataset.noise_std must be positive");
    if (per_class.train < 1) throw ConfigError("dataset.n_per_class_train must be at least 1");
    if (per_class.val < 0 || per_class.test < 0) {
        throw ConfigError("dataset split sizes must be nonnegative");
    }
}

std::vector<std::string> GeneratorConfig::warnings() const {
    std::vector<std::string> out;
    if (spur_sep / noise_std <= core_sep / noise_std) {
        out.push_back("spur_sep/noise_std <= core_sep/noise_std: shortcut is not easier to learn "
                      "than the core feature, bias preference is not guaranteed");
    }
    if (classes > core_dim) {
        out.push_back("classes exceed d_core: some class prototypes truncate to zero");
    }
    if (classes > spur_dim) {
        out.push_back("classes exceed d_spur: some shortcut prototypes truncate to zero");
    }
    return out;
}

std::vector<int> aligned_conflicting_counts(double rho, int n, int classes, int class_label) {
    std::vector<int> counts(classes, 0);
    const int aligned = std::min(n, round_count(rho * n));
    counts[class_label] = aligned;
    const auto others = other_values(classes, class_label);
    for (int k = 0; k < n - aligned; ++k) {
        ++counts[others[k % others.size()]];
    }
    return counts;
}

std::array<int, 4> pair_cell_counts(double rho1, double rho2, int n) {
    std::array<int, 4> cells = {
        round_count(rho1 * rho2 * n),
        round_count(rho1 * (1.0 - rho2) * n),
        round_count((1.0 - rho1) * rho2 * n),
        round_count((1.0 - rho1) * (1.0 - rho2) * n),
    };
    int total = cells[0] + cells[1] + cells[2] + cells[3];
    auto largest = std::max_element(cells.begin(), cells.end());
    *largest += n - total;
    return cells;
}

namespace {

// Writes prototype + noise features for one sample. The stream is a
// pure function of (seed, split, class, index); generation order and
// threading cannot change the data.
void fill_features(const GeneratorConfig& cfg, std::uint64_t split_id, int class_label,
                   int index_in_class, std::span<const int> shortcut_values, double* out) {
    Rng rng(derive_seed(cfg.seed, {split_id, static_cast<std::uint64_t>(class_label),
                                   static_cast<std::uint64_t>(index_in_class)}));
    int pos = 0;
    for (int j = 0; j < cfg.core_dim; ++j, ++pos) {
        const double proto = (j == class_label) ? cfg.core_sep : 0.0;
        out[pos] = proto + cfg.noise_std * rng.next_gaussian();
    }
    for (int s = 0; s < cfg.shortcut_count(); ++s) {
        for (int j = 0; j < cfg.spur_dim; ++j, ++pos) {
            const double proto = (j == shortcut_values[s]) ? cfg.spur_sep : 0.0;
            out[pos] = proto + cfg.noise_std * rng.next_gaussian();
        }
    }
}

LabeledDataset make_split(const GeneratorConfig& cfg, std::uint64_t split_id, int n_per_class,
                          bool unbiased, const char* suffix) {
    LabeledDataset ds;
    ds.name = cfg.name + suffix;
    ds.classes = cfg.classes;
    ds.feature_dim = cfg.feature_dim();
    ds.shortcut_count = cfg.shortcut_count();
    const std::int64_t n = static_cast<std::int64_t>(n_per_class) * cfg.classes;
    ds.features.resize(n * ds.feature_dim);
    ds.labels.resize(n);
    ds.shortcuts.resize(n * ds.shortcut_count);

    std::vector<double> rho(cfg.rho);
    if (unbiased) {
        std::fill(rho.begin(), rho.end(), 1.0 / cfg.classes);
    }

    std::int64_t row = 0;
    for (int c = 0; c < cfg.classes; ++c) {
        // Per-sample shortcut values for this class, one column per shortcut.
        std::vector<std::vector<int>> values(ds.shortcut_count,
                                             std::vector<int>(n_per_class, c));
        if (ds.shortcut_count == 1) {
            const int aligned = std::min(n_per_class, round_count(rho[0] * n_per_class));
            const auto others = other_values(cfg.classes, c);
            for (int k = aligned; k < n_per_class; ++k) {
                values[0][k] = others[(k - aligned) % others.size()];
            }
        } else {
            const auto cells = pair_cell_counts(rho[0], rho[1], n_per_class);
            const auto others = other_values(cfg.classes, c);
            int k = 0;
            int conflict1 = 0;
            int conflict2 = 0;
            for (int cell = 0; cell < 4; ++cell) {
                const bool aligned1 = cell == 0 || cell == 1;
                const bool aligned2 = cell == 0 || cell == 2;
                for (int t = 0; t < cells[cell]; ++t, ++k) {
                    values[0][k] = aligned1 ? c : others[conflict1++ % others.size()];
                    values[1][k] = aligned2 ? c : others[conflict2++ % others.size()];
                }
            }
        }

        for (int k = 0; k < n_per_class; ++k, ++row) {
            ds.labels[row] = c;
            std::vector<int> sample_values(ds.shortcut_count);
            for (int s = 0; s < ds.shortcut_count; ++s) {
                sample_values[s] = values[s][k];
                ds.shortcuts[row * ds.shortcut_count + s] = values[s][k];
            }
            fill_features(cfg, split_id, c, k, sample_values,
                          ds.features.data() + row * ds.feature_dim);
        }
    }
    return ds;
}

DatasetBundle generate_impl(const GeneratorConfig& cfg) {
    cfg.validate();
    DatasetBundle out;
    out.train = make_split(cfg, kSplitTrain, cfg.per_class.train, false, ".train");
    out.val = make_split(cfg, kSplitVal, cfg.per_class.val, false, ".val");
    out.test = make_split(cfg, kSplitTest, cfg.per_class.test, cfg.test_unbiased, ".test");
    return out;
}

} // namespace

DatasetBundle generate_single_shortcut(const GeneratorConfig& cfg) {
    if (cfg.shortcut_count() != 1) throw ConfigError("generate_single_shortcut needs exactly one rho");
    return generate_impl(cfg);
}

DatasetBundle generate_multi_shortcut(const GeneratorConfig& cfg) {
    if (cfg.shortcut_count() != 2) throw ConfigError("generate_multi_shortcut needs exactly two rho values");
    return generate_impl(cfg);
}

DatasetBundle generate(const GeneratorConfig& cfg) {
    return cfg.shortcut_count() == 2 ? generate_multi_shortcut(cfg) : generate_single_shortcut(cfg);
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary); // binary: LF line endings everywhere
    if (!out) throw IoError("cannot open " + path.string() + " for writing");

    std::string line;
    line.reserve(64);
    out << "#dbforge-dataset v1 n=" << ds.size() << " d=" << ds.feature_dim << " c=" << ds.classes
        << " shortcuts=" << ds.shortcut_count << "\n";
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        line.clear();
        for (int j = 0; j < ds.feature_dim; ++j) {
            append_number(line, ds.feature(i, j));
            line.push_back(',');
        }
        line.append(std::to_string(ds.labels[i]));
        for (int s = 0; s < ds.shortcut_count; ++s) {
            line.push_back(',');
            line.append(std::to_string(ds.shortcut(i, s)));
        }
        line.push_back('\n');
        out << line;
    }
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

[[noreturn]] void format_fail(const std::filesystem::path& path, std::int64_t line_no,
                              const std::string& what) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

long long parse_header_int(const std::string& header, const std::string& key,
                           const std::filesystem::path& path) {
    const std::string tag = key + "=";
    const auto pos = header.find(tag);
    if (pos == std::string::npos) format_fail(path, 1, "header missing '" + key + "='");
    long long v = 0;
    const char* begin = header.data() + pos + tag.size();
    const char* end = header.data() + header.size();
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{}) format_fail(path, 1, "bad integer for '" + key + "'");
    return v;
}

} // namespace

LabeledDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::string header;
    if (!std::getline(in, header)) format_fail(path, 1, "empty file");
    if (!header.starts_with("#dbforge-dataset v1 ")) {
        format_fail(path, 1, "expected '#dbforge-dataset v1' header");
    }
    LabeledDataset ds;
    const long long n = parse_header_int(header, "n", path);
    ds.feature_dim = static_cast<int>(parse_header_int(header, "d", path));
    ds.classes = static_cast<int>(parse_header_int(header, "c", path));
    ds.shortcut_count = static_cast<int>(parse_header_int(header, "shortcuts", path));
    if (n < 0 || ds.feature_dim < 1 || ds.classes < 2 || ds.shortcut_count < 0 ||
        ds.shortcut_count > 2) {
        format_fail(path, 1, "implausible dimensions in header");
    }
    ds.name = path.stem().string();
    ds.features.reserve(n * ds.feature_dim);
    ds.labels.reserve(n);
    ds.shortcuts.reserve(n * ds.shortcut_count);

    const int fields = ds.feature_dim + 1 + ds.shortcut_count;
    std::string line;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() && ds.size() == n) break; // tolerate one trailing newline
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int f = 0; f < fields; ++f) {
            if (f > 0) {
                if (p >= end || *p != ',') format_fail(path, line_no, "expected ',' between fields");
                ++p;
            }
            if (f < ds.feature_dim) {
                double v = 0.0;
                auto res = std::from_chars(p, end, v);
                if (res.ec != std::errc{}) format_fail(path, line_no, "bad feature value");
                ds.features.push_back(v);
                p = res.ptr;
            } else {
                int v = 0;
                auto res = std::from_chars(p, end, v);
                if (res.ec != std::errc{}) format_fail(path, line_no, "bad label value");
                if (v < 0 || v >= ds.classes) {
                    format_fail(path, line_no,
                                "label " + std::to_string(v) + " outside [0, " +
                                    std::to_string(ds.classes) + ")");
                }
                if (f == ds.feature_dim) {
                    ds.labels.push_back(v);
                } else {
                    ds.shortcuts.push_back(v);
                }
                p = res.ptr;
            }
        }
        if (p != end) format_fail(path, line_no, "trailing characters after last field");
    }
    if (ds.size() != n) {
        format_fail(path, line_no,
                    "expected " + std::to_string(n) + " rows, found " + std::to_string(ds.size()));
    }
    return ds;
}

} // namespace dbforge::datagen
