#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dbforge/core.hpp"
#include "dbforge/datagen.hpp"
#include "dbforge/error.hpp"
#include "dbforge/nn.hpp"

using namespace dbforge;
using namespace dbforge::datagen;

namespace {

GeneratorConfig small_config() {
    GeneratorConfig cfg;
    cfg.classes = 2;
    cfg.rho = {0.95};
    cfg.core_dim = 4;
    cfg.spur_dim = 2;
    cfg.core_sep = 1.5;
    cfg.spur_sep = 4.0;
    cfg.noise_std = 1.0;
    cfg.seed = 7;
    cfg.per_class = {100, 20, 50};
    return cfg;
}

core::ConfusionMatrix shortcut_confusion(const LabeledDataset& ds, int column) {
    std::vector<int> s(ds.size());
    for (std::int64_t i = 0; i < ds.size(); ++i) s[i] = ds.shortcut(i, column);
    return core::build_confusion(s, ds.labels, ds.classes);
}

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("single shortcut: alignment counts are exact") {
    const auto bundle = generate_single_shortcut(small_config());
    const auto m = shortcut_confusion(bundle.train, 0);
    CHECK(m.at(0, 0) == 95);
    CHECK(m.at(1, 0) == 5);
    CHECK(m.at(1, 1) == 95);
    CHECK(m.at(0, 1) == 5);
}

TEST_CASE("single shortcut: rho=0.5 yields the uniform confusion") {
    auto cfg = small_config();
    cfg.rho = {0.5};
    const auto bundle = generate_single_shortcut(cfg);
    const auto m = shortcut_confusion(bundle.train, 0);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) CHECK(m.at(i, j) == 50);
    }
}

TEST_CASE("single shortcut: ten classes at rho=0.995") {
    GeneratorConfig cfg;
    cfg.classes = 10;
    cfg.rho = {0.995};
    cfg.core_dim = 10;
    cfg.spur_dim = 10;
    cfg.seed = 3;
    cfg.per_class = {1000, 0, 0};
    const auto bundle = generate_single_shortcut(cfg);
    const auto m = shortcut_confusion(bundle.train, 0);
    for (int c = 0; c < 10; ++c) {
        CHECK(m.at(c, c) == 995);
        std::int64_t conflicting = 0;
        for (int v = 0; v < 10; ++v) {
            if (v != c) conflicting += m.at(v, c);
        }
        CHECK(conflicting == 5);
    }
}

TEST_CASE("pair cell counts: rounding arithmetic") {
    CHECK(pair_cell_counts(0.95, 0.95, 400) == std::array<int, 4>{361, 19, 19, 1});
    CHECK(pair_cell_counts(1.0, 1.0, 400) == std::array<int, 4>{400, 0, 0, 0});
    CHECK(pair_cell_counts(0.5, 0.5, 4) == std::array<int, 4>{1, 1, 1, 1});
}

TEST_CASE("multi shortcut: generated cells match the rounding arithmetic") {
    GeneratorConfig cfg = small_config();
    cfg.rho = {0.95, 0.95};
    cfg.per_class = {400, 0, 40};
    const auto bundle = generate_multi_shortcut(cfg);
    const auto& train = bundle.train;
    REQUIRE(train.shortcut_count == 2);

    for (int c = 0; c < 2; ++c) {
        std::int64_t cells[4] = {0, 0, 0, 0};
        for (std::int64_t i = 0; i < train.size(); ++i) {
            if (train.labels[i] != c) continue;
            const bool a1 = train.shortcut(i, 0) == c;
            const bool a2 = train.shortcut(i, 1) == c;
            ++cells[(a1 ? 0 : 2) + (a2 ? 0 : 1)];
        }
        CHECK(cells[0] == 361);
        CHECK(cells[1] == 19);
        CHECK(cells[2] == 19);
        CHECK(cells[3] == 1);
    }
}

TEST_CASE("generation is deterministic in the config") {
    const auto a = generate(small_config());
    const auto b = generate(small_config());
    CHECK(a.train.same_data(b.train));
    CHECK(a.val.same_data(b.val));
    CHECK(a.test.same_data(b.test));

    auto other = small_config();
    other.seed = 8;
    CHECK_FALSE(generate(other).train.same_data(a.train));
}

TEST_CASE("unbiased test split has near-zero shortcut-label MI") {
    auto cfg = small_config();
    cfg.per_class = {100, 0, 500};
    const auto bundle = generate(cfg);
    const auto m = shortcut_confusion(bundle.test, 0);
    const auto st = core::estimate_statistics(m);
    CHECK(core::mutual_information(st.joint) <= 0.01);
}

TEST_CASE("dataset file roundtrip is lossless") {
    const auto bundle = generate(small_config());
    const auto path = temp_path("dbforge_roundtrip.dbds");
    save_dataset(bundle.train, path);
    const auto loaded = load_dataset(path);
    CHECK(loaded.same_data(bundle.train));

    // second hop: identical bytes once more
    const auto path2 = temp_path("dbforge_roundtrip2.dbds");
    save_dataset(loaded, path2);
    const auto loaded2 = load_dataset(path2);
    CHECK(loaded2.same_data(bundle.train));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("dataset header echo") {
    const auto path = temp_path("dbforge_header.dbds");
    {
        std::ofstream out(path, std::ios::binary);
        out << "#dbforge-dataset v1 n=4 d=3 c=2 shortcuts=1\n";
        out << "0.5,1,-2,0,0\n";
        out << "1.25,0,3,1,1\n";
        out << "0,0,0,0,1\n";
        out << "-1,2,0.125,1,0\n";
    }
    const auto ds = load_dataset(path);
    CHECK(ds.size() == 4);
    CHECK(ds.feature_dim == 3);
    CHECK(ds.classes == 2);
    CHECK(ds.shortcut_count == 1);
    CHECK(ds.feature(1, 0) == 1.25);
    CHECK(ds.shortcut(2, 0) == 1);
    std::filesystem::remove(path);
}

TEST_CASE("dataset loader reports the offending row") {
    const auto path = temp_path("dbforge_badrow.dbds");
    {
        std::ofstream out(path, std::ios::binary);
        out << "#dbforge-dataset v1 n=2 d=2 c=2 shortcuts=0\n";
        out << "0.5,1,0\n";
        out << "0.5,1,5\n"; // label 5 with c=2
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains(":3:"), FormatError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_dataset(temp_path("dbforge_missing.dbds")), IoError);
}

TEST_CASE("config validation names the bad key") {
    auto cfg = small_config();
    cfg.rho = {1.5};
    CHECK_THROWS_WITH_AS(generate(cfg), doctest::Contains("dataset.rho"), ConfigError);
    cfg = small_config();
    cfg.per_class.train = 0;
    CHECK_THROWS_AS(generate(cfg), ConfigError);

    auto warned = small_config();
    warned.spur_sep = 1.0; // shortcut no easier than the core signal
    CHECK_FALSE(warned.warnings().empty());
}

TEST_CASE("separability oracle: spur block alone predicts aligned samples") {
    auto cfg = small_config();
    cfg.per_class = {500, 0, 0};
    const auto bundle = generate(cfg);
    const auto& train = bundle.train;

    // strip to the spurious block
    nn::OwnedData spur;
    spur.feature_dim = cfg.spur_dim;
    spur.classes = 2;
    spur.labels = train.labels;
    for (std::int64_t i = 0; i < train.size(); ++i) {
        for (int j = 0; j < cfg.spur_dim; ++j) {
            spur.features.push_back(train.feature(i, cfg.core_dim + j));
        }
    }

    nn::Architecture arch{cfg.spur_dim, {}, 2};
    nn::TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 32;
    tc.learning_rate = 0.05;
    tc.optimizer = nn::Optimizer::Adam;
    tc.seed = 11;
    const auto trained = nn::train_erm(spur.as_view(), arch, tc);
    const auto pred = nn::predict_labels(trained.model, spur.as_view());

    std::int64_t aligned = 0;
    std::int64_t aligned_correct = 0;
    for (std::int64_t i = 0; i < train.size(); ++i) {
        if (train.shortcut(i, 0) != train.labels[i]) continue;
        ++aligned;
        aligned_correct += pred[i] == train.labels[i];
    }
    CHECK(static_cast<double>(aligned_correct) / static_cast<double>(aligned) >= 0.99);
}
