#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvsg/episodes.hpp"
#include "uvsg/net.hpp"

namespace uvsg {

struct InferConfig {
    int support_size = 64;
    int ensemble = 5;
    double threshold = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EvalReport {
    std::vector<double> per_subject;  // one Dice score per test subject
    double mean = 0;
    double bootstrap_stddev = 0;
    nlohmann::json config;

    nlohmann::json to_json() const;
};

// Average of K soft predictions, each from an independent with-replacement
// support draw of size n out of `pool` (the query subject index, if given,
// is never drawn).
Tensor ensemble_predict(const ModelParameters& params, const NetworkConfig& net,
                        const Tensor& query, const TaskArchive& archive,
                        const std::vector<int>& pool, int n, int k, Rng& rng,
                        int exclude_index = -1);

Tensor threshold(const Tensor& soft, double tau);

// 100 * 2|a&b| / (|a|+|b|); both-empty is defined as 100.
double dice_score(const Tensor& a, const Tensor& b);

double bootstrap_std(const std::vector<double>& scores, int reps, Rng& rng);

// Ensemble-predict every subject of `query_split`, score against its label.
// Per-subject RNG substreams derive from (seed, subject index).
EvalReport evaluate_split(const ModelParameters& params, const NetworkConfig& net,
                          const TaskArchive& archive, const std::vector<int>& query_split,
                          const std::vector<int>& support_pool, const InferConfig& cfg);

struct SupportSweepRow {
    int n = 0;
    double mean_dice = 0;
};
std::vector<SupportSweepRow> sweep_support_size(const ModelParameters& params,
                                                const NetworkConfig& net,
                                                const TaskArchive& archive,
                                                const std::vector<int>& ns, int k,
                                                std::uint64_t seed);

struct GridCell {
    int n = 0, k = 0;
    double mean = 0, std = 0;  // across independent repetitions
};
std::vector<GridCell> sweep_ensemble_grid(const ModelParameters& params, const NetworkConfig& net,
                                          const TaskArchive& archive, const std::vector<int>& ns,
                                          const std::vector<int>& ks, int reps,
                                          std::uint64_t seed);

struct PoolRow {
    int pool_size = 0;
    double mean = 0, std = 0;  // across random pools
};
// Restrict inference to a random subject pool and use the whole pool as the
// support (no ensembling); statistics across `reps` pools.
std::vector<PoolRow> sweep_limited_data(const ModelParameters& params, const NetworkConfig& net,
                                        const TaskArchive& archive,
                                        const std::vector<int>& pool_sizes, int reps,
                                        std::uint64_t seed);

std::string to_csv(const std::vector<SupportSweepRow>& rows);
std::string to_csv(const std::vector<GridCell>& cells);
std::string to_csv(const std::vector<PoolRow>& rows);

}  // namespace uvsg
