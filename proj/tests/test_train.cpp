#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "uvsg/eval.hpp"
#include "uvsg/gradcheck.hpp"
#include "uvsg/train.hpp"

using namespace uvsg;
namespace fs = std::filesystem;

namespace {

// a task with two well-separated intensity levels: bright disk on a dark
// background, light pixel noise
TaskArchive easy_task(int subjects, int size, std::uint64_t seed) {
    SyntheticTask task;
    task.id = "easy";
    task.seed = seed;
    Rng rng(seed);
    for (int s = 0; s < subjects; ++s) {
        const double cy = rng.uniform(size * 0.3, size * 0.7);
        const double cx = rng.uniform(size * 0.3, size * 0.7);
        const double r = rng.uniform(size * 0.15, size * 0.3);
        Tensor img(Shape{1, size, size}), lbl(Shape{1, size, size});
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const bool in = (y - cy) * (y - cy) + (x - cx) * (x - cx) < r * r;
                lbl.at(0, y, x) = in ? 1.f : 0.f;
                img.at(0, y, x) = static_cast<float>(
                    std::clamp((in ? 0.8 : 0.2) + rng.normal(0.0, 0.02), 0.0, 1.0));
            }
        task.subjects.emplace_back(std::move(img), std::move(lbl));
    }
    return archive_from_task(task, derive_seed(seed, 999));
}

TrainConfig small_config(int steps) {
    TrainConfig cfg;
    cfg.network.features = 8;
    cfg.support_size = 4;
    cfg.max_steps = steps;
    cfg.augment.enabled = false;
    return cfg;
}

}  // namespace

TEST_CASE("soft dice loss hand-checked values") {
    auto loss_of = [](std::vector<float> pred, std::vector<float> target) {
        TapeD t;
        TensorD p(Shape{1, 2, 2}), y(Shape{1, 2, 2});
        for (int i = 0; i < 4; ++i) {
            p.data[i] = pred[static_cast<std::size_t>(i)];
            y.data[i] = target[static_cast<std::size_t>(i)];
        }
        return t.value(t.soft_dice_loss(t.input(p), t.input(y))).data[0];
    };
    // similarity 2*1/(2+1) = 2/3
    CHECK(loss_of({0.5f, 0.5f, 0.5f, 0.5f}, {1, 1, 0, 0}) == doctest::Approx(1.0 / 3).epsilon(1e-5));
    CHECK(loss_of({1, 0, 1, 0}, {1, 0, 1, 0}) == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(loss_of({0, 0, 0, 0}, {0, 0, 0, 0}) == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("soft dice gradient matches finite differences") {
    Rng rng(1);
    TensorD pred(Shape{1, 4, 4}), target(Shape{1, 4, 4});
    for (auto& v : pred.data) v = rng.uniform(0.05, 0.95);
    for (auto& v : target.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double err = grad_check(
        [&](TapeD& t, const std::vector<int>& ids) {
            return t.soft_dice_loss(ids[0], t.input(target));
        },
        {pred}, 1e-6);
    CHECK(err < 1e-5);
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    NetworkConfig net;
    net.features = 2;
    Rng rng(2);
    ModelParameters params = init_network(net, rng);
    ModelParameters before = params;
    AdamState st = AdamState::init(params);
    std::vector<Tensor> grads;
    for (auto& [name, t] : params.named_tensors()) grads.emplace_back(t->shape);
    adam_step(params, grads, st, 1e-2);
    CHECK(st.step == 1);
    auto na = params.named_tensors(), nb = before.named_tensors();
    for (std::size_t i = 0; i < na.size(); ++i) CHECK(na[i].second->data == nb[i].second->data);
}

TEST_CASE("first adam step moves each weight by about lr in the gradient direction") {
    NetworkConfig net;
    net.features = 2;
    Rng rng(3);
    ModelParameters params = init_network(net, rng);
    ModelParameters before = params;
    AdamState st = AdamState::init(params);
    std::vector<Tensor> grads;
    for (auto& [name, t] : params.named_tensors()) {
        grads.emplace_back(t->shape);
        for (auto& g : grads.back().data) g = static_cast<float>(rng.uniform(-1, 1));
    }
    const double lr = 1e-3;
    adam_step(params, grads, st, lr);
    auto na = params.named_tensors(), nb = before.named_tensors();
    for (std::size_t i = 0; i < na.size(); ++i)
        for (std::size_t j = 0; j < na[i].second->data.size(); ++j) {
            const double g = grads[i].data[j];
            if (std::abs(g) < 1e-2) continue;  // sign(g) limit needs |g| >> eps
            const double delta = na[i].second->data[j] - nb[i].second->data[j];
            CHECK(delta == doctest::Approx(-lr * (g > 0 ? 1.0 : -1.0)).epsilon(1e-3));
        }
}

TEST_CASE("hierarchical task sampling balances collections") {
    TaskArchive lone = easy_task(4, 32, 1);
    std::vector<TaskArchive> big;
    for (int i = 0; i < 99; ++i) {
        TaskArchive t = easy_task(4, 32, 100 + static_cast<std::uint64_t>(i));
        t.name = "big_" + std::to_string(i);
        big.push_back(std::move(t));
    }
    std::vector<std::vector<TaskArchive>> collections{{lone}, big};
    Rng rng(4);
    int lone_hits = 0;
    for (int draw = 0; draw < 10000; ++draw)
        if (sample_task_hierarchical(collections, rng).name == "easy") ++lone_hits;
    CHECK(lone_hits > 4700);
    CHECK(lone_hits < 5300);

    // one collection: plain uniform over its tasks
    std::vector<std::vector<TaskArchive>> single{big};
    std::map<std::string, int> counts;
    for (int draw = 0; draw < 9900; ++draw)
        ++counts[sample_task_hierarchical(single, rng).name];
    for (const auto& [name, c] : counts) CHECK(c > 30);

    Rng a(5), b(5);
    CHECK(sample_task_hierarchical(collections, a).name ==
          sample_task_hierarchical(collections, b).name);
}

TEST_CASE("training is reproducible from the seed") {
    std::vector<std::vector<TaskArchive>> collections{{easy_task(10, 32, 6)}};
    TrainConfig cfg = small_config(3);
    cfg.seed = 11;
    TrainResult a = train(cfg, collections);
    TrainResult b = train(cfg, collections);
    REQUIRE(a.metrics.size() == 3);
    for (std::size_t i = 0; i < a.metrics.size(); ++i)
        CHECK(a.metrics[i].at("loss").get<double>() == b.metrics[i].at("loss").get<double>());
    auto na = a.checkpoint.params.named_tensors(), nb = b.checkpoint.params.named_tensors();
    for (std::size_t i = 0; i < na.size(); ++i) CHECK(na[i].second->data == nb[i].second->data);
}

TEST_CASE("resume continues bit-exactly") {
    std::vector<std::vector<TaskArchive>> collections{{easy_task(10, 32, 7)}};
    TrainConfig cfg = small_config(6);
    cfg.seed = 12;
    TrainResult full = train(cfg, collections);

    TrainConfig half = cfg;
    half.max_steps = 3;
    TrainResult first = train(half, collections);
    TrainResult second = train(cfg, collections, "", &first.checkpoint);
    REQUIRE(second.metrics.size() == 3);
    for (int i = 0; i < 3; ++i)
        CHECK(second.metrics[static_cast<std::size_t>(i)].at("loss").get<double>() ==
              full.metrics[static_cast<std::size_t>(i + 3)].at("loss").get<double>());
    auto na = full.checkpoint.params.named_tensors(), nb = second.checkpoint.params.named_tensors();
    for (std::size_t i = 0; i < na.size(); ++i) CHECK(na[i].second->data == nb[i].second->data);
}

TEST_CASE("checkpoint files round trip with optimizer state") {
    std::vector<std::vector<TaskArchive>> collections{{easy_task(10, 32, 8)}};
    TrainConfig cfg = small_config(2);
    cfg.seed = 13;
    const std::string dir = (fs::temp_directory_path() / "uvsg_train_out").string();
    fs::remove_all(dir);
    TrainResult r = train(cfg, collections, dir);
    CHECK(fs::exists(fs::path(dir) / "metrics.jsonl"));
    Checkpoint back = load_checkpoint((fs::path(dir) / "checkpoint.uvck").string());
    CHECK(back.extra.at("step").get<int>() == 2);
    CHECK(back.extra_tensors.size() == r.checkpoint.extra_tensors.size());
    // resuming from the reloaded file matches resuming from the in-memory state
    TrainConfig more = cfg;
    more.max_steps = 4;
    TrainResult a = train(more, collections, "", &r.checkpoint);
    TrainResult b = train(more, collections, "", &back);
    for (std::size_t i = 0; i < a.metrics.size(); ++i)
        CHECK(a.metrics[i].at("loss").get<double>() == b.metrics[i].at("loss").get<double>());
    fs::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    std::vector<std::vector<TaskArchive>> collections{{easy_task(10, 32, 9)}};
    TrainConfig cfg = small_config(2);
    TrainResult r = train(cfg, collections);
    Checkpoint poisoned = r.checkpoint;
    poisoned.params.projection.weight.data[0] = std::numeric_limits<float>::quiet_NaN();
    TrainConfig more = cfg;
    more.max_steps = 4;
    CHECK_THROWS_AS(train(more, collections, "", &poisoned), StateError);
}

TEST_CASE("config serialization and validation") {
    TrainConfig cfg = small_config(5);
    cfg.lr = 3e-4;
    cfg.seed = 21;
    TrainConfig back = TrainConfig::from_json(cfg.to_json());
    CHECK(back.lr == 3e-4);
    CHECK(back.support_size == 4);
    CHECK(back.network.features == 8);
    CHECK(back.augment.enabled == false);

    TrainConfig bad;
    bad.lr = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = TrainConfig{};
    bad.support_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    // paper-scale defaults
    CHECK(TrainConfig{}.support_size == 64);
    CHECK(TrainConfig{}.lr == 1e-4);
    CHECK(TrainConfig{}.batch_size == 1);
}

TEST_CASE("desk-scale convergence on one easy task") {
    std::vector<std::vector<TaskArchive>> collections{{easy_task(12, 32, 10)}};
    TrainConfig cfg = small_config(500);
    cfg.network.features = 16;
    cfg.lr = 3e-4;
    cfg.seed = 14;
    TrainResult r = train(cfg, collections);
    double tail = 0;
    for (int i = 0; i < 20; ++i)
        tail += r.metrics[r.metrics.size() - 1 - static_cast<std::size_t>(i)].at("loss").get<double>();
    tail /= 20;
    MESSAGE("mean loss over final 20 steps: ", tail);
    CHECK(tail < 0.2);
}
