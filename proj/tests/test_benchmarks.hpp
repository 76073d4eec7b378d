#pragma once

// Shared synthetic benchmarks for the heavier tests. The reduced
// benchmark keeps the unit suite fast; the acceptance suite pins the
// full-size one separately.

#include "dbforge/datagen.hpp"
#include "dbforge/fgccdb.hpp"
#include "dbforge/mst.hpp"
#include "dbforge/nn.hpp"

namespace bench {

inline dbforge::datagen::GeneratorConfig reduced(std::uint64_t seed) {
    dbforge::datagen::GeneratorConfig cfg;
    cfg.classes = 2;
    cfg.rho = {0.95};
    cfg.core_dim = 6;
    cfg.spur_dim = 2;
    cfg.core_sep = 1.5;
    cfg.spur_sep = 4.0;
    cfg.noise_std = 1.0;
    cfg.seed = seed;
    cfg.per_class = {500, 200, 400};
    return cfg;
}

// Same geometry as configs/standard.cfg; smallest-mode statistics only
// resolve trends at this size.
inline dbforge::datagen::GeneratorConfig standard(std::uint64_t seed) {
    auto cfg = reduced(seed);
    cfg.per_class = {2000, 500, 1000};
    return cfg;
}

inline dbforge::nn::TrainConfig stage_train() {
    dbforge::nn::TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 64;
    cfg.learning_rate = 0.01;
    cfg.optimizer = dbforge::nn::Optimizer::Adam;
    cfg.weight_decay = 1e-4;
    return cfg;
}

inline dbforge::mst::MstConfig mst_config(std::uint64_t seed, int repeats = 2) {
    dbforge::mst::MstConfig cfg;
    cfg.gamma = 0.10;
    cfg.beta = 0.50;
    cfg.repeats = repeats;
    cfg.stage_train = stage_train();
    cfg.seed = seed;
    return cfg;
}

inline dbforge::nn::Architecture mlp(int input_dim) {
    return {input_dim, {32}, 2};
}

inline dbforge::fgccdb::DebiasConfig debias_config(std::int64_t iterations = 1500) {
    dbforge::fgccdb::DebiasConfig cfg;
    cfg.train.iterations = iterations;
    cfg.train.batch_size = 64;
    cfg.train.learning_rate = 0.01;
    cfg.train.optimizer = dbforge::nn::Optimizer::Adam;
    cfg.train.weight_decay = 1e-4;
    cfg.checkpoint_every = 100;
    return cfg;
}

} // namespace bench
