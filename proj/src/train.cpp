#include "uvsg/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "uvsg/eval.hpp"
#include "uvsg/tape.hpp"

namespace fs = std::filesystem;

namespace uvsg {

namespace {

// disjoint stream families under one training seed
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kStepStream = 1;
constexpr std::uint64_t kEvalStream = 2;

}  // namespace

void TrainConfig::validate() const {
    if (lr <= 0) throw ConfigError("learning rate must be positive");
    if (support_size < 1) throw ConfigError("support size must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
    if (eval_every < 0 || eval_episodes < 1) throw ConfigError("bad evaluation schedule");
    augment.validate();
    network.validate();
}

nlohmann::json TrainConfig::to_json() const {
    return {{"lr", lr},
            {"support_size", support_size},
            {"batch_size", batch_size},
            {"max_steps", max_steps},
            {"eval_every", eval_every},
            {"eval_episodes", eval_episodes},
            {"seed", seed},
            {"augment", augment_config_to_json(augment)},
            {"network", config_to_json(network)}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lr = j.at("lr").get<double>();
    c.support_size = j.at("support_size").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_steps = j.at("max_steps").get<int>();
    c.eval_every = j.at("eval_every").get<int>();
    c.eval_episodes = j.at("eval_episodes").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.augment = augment_config_from_json(j.at("augment"));
    c.network = config_from_json(j.at("network"));
    c.validate();
    return c;
}

AdamState AdamState::init(ModelParameters& params) {
    AdamState st;
    for (auto& [name, t] : params.named_tensors()) {
        st.m.emplace_back(t->shape);
        st.v.emplace_back(t->shape);
    }
    return st;
}

void adam_step(ModelParameters& params, const std::vector<Tensor>& grads, AdamState& st,
               double lr) {
    auto named = params.named_tensors();
    if (grads.size() != named.size() || st.m.size() != named.size())
        throw ShapeError("adam_step tensor lists are misaligned");
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < named.size(); ++i) {
        Tensor& p = *named[i].second;
        if (grads[i].shape != p.shape) throw ShapeError("gradient shape mismatch in adam_step");
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            const double g = grads[i].data[j];
            const double m = st.beta1 * st.m[i].data[j] + (1.0 - st.beta1) * g;
            const double v = st.beta2 * st.v[i].data[j] + (1.0 - st.beta2) * g * g;
            st.m[i].data[j] = static_cast<float>(m);
            st.v[i].data[j] = static_cast<float>(v);
            p.data[j] = static_cast<float>(p.data[j] - lr * (m / c1) / (std::sqrt(v / c2) + st.eps));
        }
    }
}

const TaskArchive& sample_task_hierarchical(
    const std::vector<std::vector<TaskArchive>>& collections, Rng& rng) {
    if (collections.empty()) throw DomainError("no task collections");
    const auto& chosen = collections[static_cast<std::size_t>(rng.below(collections.size()))];
    if (chosen.empty()) throw DomainError("empty task collection");
    return chosen[static_cast<std::size_t>(rng.below(chosen.size()))];
}

namespace {

struct StepOutcome {
    double loss = 0;
    std::vector<Tensor> grads;
};

StepOutcome run_episode(const TrainConfig& cfg, ModelParameters& params,
                        const std::vector<std::vector<TaskArchive>>& collections, Rng& rng) {
    const TaskArchive& task = sample_task_hierarchical(collections, rng);
    Episode ep = sample_episode(task, task.splits.support, cfg.support_size, rng);

    const InTaskGates gates = sample_in_task_gates(rng, cfg.augment);
    std::pair<Tensor, Tensor> query = in_task_augment(ep.query, gates, rng, cfg.augment);
    std::vector<std::pair<Tensor, Tensor>> support;
    support.reserve(ep.support.size());
    for (const auto& entry : ep.support)
        support.push_back(in_task_augment(entry, gates, rng, cfg.augment));
    task_augment(query, support, rng, cfg.augment);

    Tape tape;
    NetParamIds ids = register_network(tape, params);
    const int q = tape.input(query.first);
    const int sup = tape.input(stack_support(support));
    const int logits = forward_node(tape, ids, q, sup, cfg.network);
    const int loss = tape.soft_dice_loss(tape.sigmoid(logits), tape.input(query.second));

    StepOutcome out;
    out.loss = tape.value(loss).data[0];
    tape.backward(loss);
    for (int id : ids.all()) out.grads.push_back(tape.gradient(id));
    return out;
}

double dev_dice(const TrainConfig& cfg, const ModelParameters& params,
                const std::vector<std::vector<TaskArchive>>& collections, Rng& rng) {
    double sum = 0;
    for (int e = 0; e < cfg.eval_episodes; ++e) {
        const TaskArchive& task = sample_task_hierarchical(collections, rng);
        Episode ep =
            sample_episode(task, task.splits.dev, task.splits.support, cfg.support_size, rng);
        Tensor soft = predict_soft(params, cfg.network, ep.query.first, ep.support);
        sum += dice_score(threshold(soft, 0.5), ep.query.second);
    }
    return sum / cfg.eval_episodes;
}

Checkpoint make_checkpoint(const TrainConfig& cfg, const ModelParameters& params,
                           const AdamState& adam, int step, double best_dev) {
    Checkpoint ckpt;
    ckpt.config = cfg.network;
    ckpt.params = params;
    ckpt.extra = {{"step", step},
                  {"adam_step", adam.step},
                  {"best_dev_dice", best_dev},
                  {"train_config", cfg.to_json()},
                  {"rng_scheme", "per-step streams derived from the training seed"}};
    auto named = ckpt.params.named_tensors();
    for (std::size_t i = 0; i < named.size(); ++i) {
        ckpt.extra_tensors.emplace_back("adam.m." + named[i].first, adam.m[i]);
        ckpt.extra_tensors.emplace_back("adam.v." + named[i].first, adam.v[i]);
    }
    return ckpt;
}

}  // namespace

TrainResult train(const TrainConfig& cfg,
                  const std::vector<std::vector<TaskArchive>>& collections,
                  const std::string& out_dir, const Checkpoint* resume) {
    cfg.validate();
    if (collections.empty()) throw DomainError("no task collections");

    ModelParameters params;
    AdamState adam;
    int start_step = 0;
    double best_dev = -1;
    if (resume) {
        params = resume->params;
        adam = AdamState::init(params);
        adam.step = resume->extra.at("adam_step").get<long>();
        start_step = resume->extra.at("step").get<int>();
        best_dev = resume->extra.value("best_dev_dice", -1.0);
        auto named = params.named_tensors();
        if (resume->extra_tensors.size() != 2 * named.size())
            throw StateError("resume checkpoint is missing optimizer state");
        for (std::size_t i = 0; i < named.size(); ++i) {
            adam.m[i] = resume->extra_tensors[2 * i].second;
            adam.v[i] = resume->extra_tensors[2 * i + 1].second;
        }
    } else {
        Rng init_rng(derive_seed(cfg.seed, kInitStream));
        params = init_network(cfg.network, init_rng);
        adam = AdamState::init(params);
    }

    std::ofstream log;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        log.open(fs::path(out_dir) / "metrics.jsonl",
                 resume ? std::ios::app : std::ios::trunc);
        if (!log) throw IoError("cannot open metrics log in " + out_dir);
    }

    TrainResult result;
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t step_family = derive_seed(cfg.seed, kStepStream);
    const std::uint64_t eval_family = derive_seed(cfg.seed, kEvalStream);

    for (int step = start_step; step < cfg.max_steps; ++step) {
        Rng rng(derive_seed(step_family, static_cast<std::uint64_t>(step)));
        double loss = 0;
        std::vector<Tensor> grads;
        for (int b = 0; b < cfg.batch_size; ++b) {
            StepOutcome out = run_episode(cfg, params, collections, rng);
            loss += out.loss;
            if (grads.empty()) {
                grads = std::move(out.grads);
            } else {
                for (std::size_t i = 0; i < grads.size(); ++i)
                    for (std::size_t j = 0; j < grads[i].data.size(); ++j)
                        grads[i].data[j] += out.grads[i].data[j];
            }
        }
        loss /= cfg.batch_size;
        if (cfg.batch_size > 1)
            for (auto& g : grads)
                for (float& v : g.data) v /= static_cast<float>(cfg.batch_size);

        if (!std::isfinite(loss))
            throw StateError("loss diverged to a non-finite value at step " +
                             std::to_string(step));
        adam_step(params, grads, adam, cfg.lr);

        nlohmann::json record = {{"step", step}, {"loss", loss}};
        if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
            Rng erng(derive_seed(eval_family, static_cast<std::uint64_t>(step)));
            const double dice = dev_dice(cfg, params, collections, erng);
            record["dev_dice"] = dice;
            if (dice > best_dev) {
                best_dev = dice;
                if (!out_dir.empty()) {
                    Checkpoint best = make_checkpoint(cfg, params, adam, step + 1, best_dev);
                    save_checkpoint((fs::path(out_dir) / "best.uvck").string(), best);
                }
            }
        }
        record["wallclock_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                  t0)
                .count();
        if (log.is_open()) log << record.dump() << "\n";
        result.metrics.push_back(std::move(record));
    }

    result.best_dev_dice = best_dev;
    result.checkpoint = make_checkpoint(cfg, params, adam, cfg.max_steps, best_dev);
    if (!out_dir.empty()) {
        log.flush();
        save_checkpoint((fs::path(out_dir) / "checkpoint.uvck").string(), result.checkpoint);
    }
    return result;
}

}  // namespace uvsg
