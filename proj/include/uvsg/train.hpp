#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvsg/augment.hpp"
#include "uvsg/checkpoint.hpp"
#include "uvsg/episodes.hpp"
#include "uvsg/net.hpp"

namespace uvsg {

struct TrainConfig {
    double lr = 1e-4;
    int support_size = 64;
    int batch_size = 1;
    int max_steps = 1000;
    int eval_every = 0;    // 0 disables dev evaluation
    int eval_episodes = 8; // dev episodes averaged per evaluation
    std::uint64_t seed = 0;
    AugmentConfig augment;
    NetworkConfig network;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct AdamState {
    std::vector<Tensor> m, v;  // first/second moments, in named-tensor order
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState init(ModelParameters& params);
};

// Standard bias-corrected Adam update, in place.
void adam_step(ModelParameters& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr);

// Uniform over collections, then uniform over tasks within the chosen one.
const TaskArchive& sample_task_hierarchical(
    const std::vector<std::vector<TaskArchive>>& collections, Rng& rng);

struct TrainResult {
    Checkpoint checkpoint;                 // final parameters + resume state
    std::vector<nlohmann::json> metrics;   // one JSON record per step / eval
    double best_dev_dice = -1;
};

// One optimization step per iteration: sample a task, sample an episode,
// augment per entry and then per task, forward, soft-Dice loss, backward,
// Adam. If out_dir is nonempty, writes metrics.jsonl and checkpoint.uvck
// (plus best.uvck when dev evaluation runs). Passing `resume` continues a
// run bit-exactly from its recorded step.
TrainResult train(const TrainConfig& cfg,
                  const std::vector<std::vector<TaskArchive>>& collections,
                  const std::string& out_dir = "", const Checkpoint* resume = nullptr);

}  // namespace uvsg
