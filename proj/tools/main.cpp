#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uvsg/checkpoint.hpp"
#include "uvsg/episodes.hpp"
#include "uvsg/eval.hpp"
#include "uvsg/gradcheck.hpp"
#include "uvsg/synth.hpp"
#include "uvsg/tensor_io.hpp"
#include "uvsg/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uvsg;

namespace {

constexpr const char* kToolVersion = "1.0";

std::uint64_t fnv1a_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot hash " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 14];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!is) break;
    }
    return h;
}

// One order-stable hash per directory tree (file names + contents).
std::string dir_hash(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& f : files) {
        for (char c : f.filename().string()) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        h ^= fnv1a_file(f);
        h *= 1099511628211ULL;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& config,
                    std::uint64_t seed, const json& corpus_hashes,
                    const std::string& checkpoint_hash) {
    json manifest = {{"command", command},
                     {"config", config},
                     {"seed", seed},
                     {"corpus_hashes", corpus_hashes},
                     {"checkpoint_hash", checkpoint_hash},
                     {"tool_version", kToolVersion}};
    std::ofstream os(out_dir / "run_manifest.json");
    if (!os) throw IoError("cannot write run manifest in " + out_dir.string());
    os << manifest.dump(2) << "\n";
}

// every task directory (detected by manifest.json) under the given roots
std::vector<TaskArchive> load_collection(const std::string& root) {
    std::vector<TaskArchive> tasks;
    if (fs::exists(fs::path(root) / "manifest.json")) {
        tasks.push_back(load_archive(root));
        return tasks;
    }
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) tasks.push_back(load_archive(d.string()));
    if (tasks.empty()) throw IoError("no task archives under " + root);
    return tasks;
}

int cmd_synth_gen(int tasks, int subjects, int size, int shapes, std::uint64_t seed,
                  const std::string& out) {
    SynthConfig cfg;
    cfg.num_tasks = tasks;
    cfg.num_subjects = subjects;
    cfg.image_size = size;
    cfg.num_shapes = shapes;
    cfg.seed = seed;
    cfg.validate();
    fs::create_directories(out);
    for (int i = 0; i < tasks; ++i) {
        SyntheticTask task = gen_task(cfg, i);
        TaskArchive archive = archive_from_task(task, derive_seed(seed, 0x5B115ULL + i));
        save_archive(archive, (fs::path(out) / task.id).string());
    }
    json corpus = {{"corpus", dir_hash(out)}};
    write_manifest(out, "synth-gen",
                   {{"tasks", tasks}, {"subjects", subjects}, {"size", size}, {"shapes", shapes}},
                   seed, corpus, "");
    std::cout << "wrote " << tasks << " task archives to " << out << "\n";
    return 0;
}

int cmd_train(const std::vector<std::string>& corpora, TrainConfig cfg, const std::string& out,
              const std::string& resume_path) {
    std::vector<std::vector<TaskArchive>> collections;
    json hashes = json::object();
    for (const auto& root : corpora) {
        collections.push_back(load_collection(root));
        hashes[root] = dir_hash(root);
    }
    Checkpoint resume;
    const Checkpoint* resume_ptr = nullptr;
    if (!resume_path.empty()) {
        resume = load_checkpoint(resume_path);
        resume_ptr = &resume;
    }
    TrainResult result = train(cfg, collections, out, resume_ptr);
    write_manifest(out, "train", cfg.to_json(), cfg.seed, hashes,
                   dir_hash(fs::path(out)) /* includes the fresh checkpoint */);
    const double final_loss = result.metrics.empty()
                                  ? 0.0
                                  : result.metrics.back().at("loss").get<double>();
    std::cout << "trained " << cfg.max_steps << " steps; final loss " << final_loss << "\n";
    return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& query_path,
                const std::string& archive_path, int n, int k, std::uint64_t seed,
                const std::string& out) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Tensor query = load_tensor<float>(query_path);
    TaskArchive archive = load_archive(archive_path);
    Rng rng(seed);
    Tensor soft = ensemble_predict(ckpt.params, ckpt.config, query, archive,
                                   archive.splits.support, n, k, rng);
    Tensor binary = threshold(soft, 0.5);
    fs::create_directories(out);
    save_tensor((fs::path(out) / "soft.uvsg").string(), soft, Dtype::f32);
    save_tensor((fs::path(out) / "binary.uvsg").string(), binary, Dtype::f32);
    save_pgm((fs::path(out) / "soft.pgm").string(), soft);
    save_pgm((fs::path(out) / "binary.pgm").string(), binary);
    write_manifest(out, "predict",
                   {{"query", query_path}, {"archive", archive_path}, {"n", n}, {"k", k}}, seed,
                   {{archive_path, dir_hash(archive_path)}}, std::to_string(fnv1a_file(ckpt_path)));
    std::cout << "wrote soft and binary maps to " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& archive_path,
             const std::string& split, int n, int k, int bootstrap_reps, const std::string& sweep,
             std::uint64_t seed, const std::string& out) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    TaskArchive archive = load_archive(archive_path);
    fs::create_directories(out);

    json cfg_json = {{"archive", archive_path}, {"split", split},       {"n", n},
                     {"k", k},                  {"sweep", sweep},       {"bootstrap", bootstrap_reps}};
    bool any_nan = false;
    if (sweep.empty()) {
        const std::vector<int>* query_split = &archive.splits.test;
        if (split == "dev")
            query_split = &archive.splits.dev;
        else if (split == "support")
            query_split = &archive.splits.support;
        else if (split != "test")
            throw ConfigError("unknown split: " + split);
        InferConfig icfg;
        icfg.support_size = n;
        icfg.ensemble = k;
        icfg.seed = seed;
        EvalReport report = evaluate_split(ckpt.params, ckpt.config, archive, *query_split,
                                           archive.splits.support, icfg);
        for (double d : report.per_subject) any_nan = any_nan || !std::isfinite(d);
        std::ofstream os(fs::path(out) / "report.json");
        os << report.to_json().dump(2) << "\n";
        std::cout << "mean dice " << report.mean << " +/- " << report.bootstrap_stddev << "\n";
    } else if (sweep == "support") {
        auto rows = sweep_support_size(ckpt.params, ckpt.config, archive, {1, 2, 4, 8}, k, seed);
        for (const auto& r : rows) any_nan = any_nan || !std::isfinite(r.mean_dice);
        std::ofstream os(fs::path(out) / "support_sweep.csv");
        os << to_csv(rows);
    } else if (sweep == "grid") {
        auto cells =
            sweep_ensemble_grid(ckpt.params, ckpt.config, archive, {2, 4}, {1, 2, 4, 8}, 10, seed);
        for (const auto& c : cells) any_nan = any_nan || !std::isfinite(c.mean);
        std::ofstream os(fs::path(out) / "ensemble_grid.csv");
        os << to_csv(cells);
    } else if (sweep == "limited") {
        const int full = static_cast<int>(archive.splits.support.size());
        auto rows = sweep_limited_data(ckpt.params, ckpt.config, archive, {1, 2, 4, full}, 10, seed);
        for (const auto& r : rows) any_nan = any_nan || !std::isfinite(r.mean);
        std::ofstream os(fs::path(out) / "limited_data.csv");
        os << to_csv(rows);
    } else {
        throw ConfigError("unknown sweep: " + sweep);
    }
    write_manifest(out, "eval", cfg_json, seed, {{archive_path, dir_hash(archive_path)}},
                   std::to_string(fnv1a_file(ckpt_path)));
    return any_nan ? 1 : 0;
}

int cmd_gradcheck(int size, int support, std::uint64_t seed) {
    // extended precision keeps finite-difference noise below the tolerance
    using S = long double;
    NetworkConfig cfg;
    cfg.features = 2;
    if (size % cfg.size_divisor() != 0)
        throw ConfigError("size must be divisible by " + std::to_string(cfg.size_divisor()));
    Rng rng(seed);
    auto params = init_network<S>(cfg, rng);
    TensorT<S> query(Shape{1, size, size});
    for (auto& v : query.data) v = static_cast<S>(rng.uniform());
    std::vector<std::pair<TensorT<S>, TensorT<S>>> sup;
    for (int i = 0; i < support; ++i) {
        TensorT<S> img(Shape{1, size, size}), lbl(Shape{1, size, size});
        for (auto& v : img.data) v = static_cast<S>(rng.uniform());
        for (auto& v : lbl.data) v = rng.bernoulli(0.4) ? 1 : 0;
        sup.emplace_back(std::move(img), std::move(lbl));
    }
    TensorT<S> target(Shape{1, size, size});
    for (auto& v : target.data) v = rng.bernoulli(0.4) ? 1 : 0;

    std::vector<TensorT<S>> flat;
    for (auto& [name, t] : params.named_tensors()) flat.push_back(*t);
    const double err = grad_check_sampled<S>(
        [&](TapeT<S>& t, const std::vector<int>& ids) {
            NetParamIds nid;
            std::size_t idx = 0;
            for (std::size_t s = 0; s < params.encoder.size(); ++s, idx += 4)
                nid.encoder.push_back({{ids[idx], ids[idx + 1]}, {ids[idx + 2], ids[idx + 3]}});
            for (std::size_t s = 0; s < params.decoder.size(); ++s, idx += 4)
                nid.decoder.push_back({{ids[idx], ids[idx + 1]}, {ids[idx + 2], ids[idx + 3]}});
            nid.projection = {ids[idx], ids[idx + 1]};
            const int q = t.input(query);
            const int sn = t.input(stack_support(sup));
            const int logits = forward_node(t, nid, q, sn, cfg);
            return t.soft_dice_loss(t.sigmoid(logits), t.input(target));
        },
        flat, 1e-6, 6, seed ^ 0x6AD5ULL);
    std::cout << "max relative gradient error: " << err << "\n";
    return err < 1e-3 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"in-context segmentation: synthesis, training, inference, evaluation"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    if (const char* env = std::getenv("UVSG_SEED")) seed = std::strtoull(env, nullptr, 10);

    auto* synth = app.add_subcommand("synth-gen", "generate synthetic task archives");
    int tasks = 1000, subjects = 100, size = 128, shapes = 16;
    std::string out;
    synth->add_option("--tasks", tasks);
    synth->add_option("--subjects", subjects);
    synth->add_option("--size", size);
    synth->add_option("--shapes", shapes);
    synth->add_option("--seed", seed);
    synth->add_option("--out", out)->required();

    auto* tr = app.add_subcommand("train", "train on task archive collections");
    std::vector<std::string> corpora;
    TrainConfig tcfg;
    std::string resume;
    tr->add_option("--corpus", corpora, "collection root (repeatable)")->required();
    tr->add_option("--support", tcfg.support_size);
    tr->add_option("--lr", tcfg.lr);
    tr->add_option("--steps", tcfg.max_steps);
    tr->add_option("--eval-every", tcfg.eval_every);
    tr->add_option("--features", tcfg.network.features);
    tr->add_flag_callback("--no-augment", [&tcfg] { tcfg.augment.enabled = false; });
    tr->add_option("--eval-episodes", tcfg.eval_episodes);
    tr->add_option("--seed", seed);
    tr->add_option("--out", out)->required();
    tr->add_option("--resume", resume);

    auto* pr = app.add_subcommand("predict", "segment one query with an ensemble");
    std::string ckpt_path, query_path, archive_path;
    int n = 64, k = 5;
    pr->add_option("--checkpoint", ckpt_path)->required();
    pr->add_option("--query", query_path)->required();
    pr->add_option("--support-archive", archive_path)->required();
    pr->add_option("-N,--support", n);
    pr->add_option("-K,--ensemble", k);
    pr->add_option("--seed", seed);
    pr->add_option("--out", out)->required();

    auto* ev = app.add_subcommand("eval", "score a checkpoint on an archive split");
    std::string split = "test", sweep;
    int bootstrap_reps = 1000;
    ev->add_option("--checkpoint", ckpt_path)->required();
    ev->add_option("--archive", archive_path)->required();
    ev->add_option("--split", split);
    ev->add_option("-N,--support", n);
    ev->add_option("-K,--ensemble", k);
    ev->add_option("--bootstrap", bootstrap_reps);
    ev->add_option("--sweep", sweep, "support | grid | limited");
    ev->add_option("--seed", seed);
    ev->add_option("--out", out)->required();

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    int gc_size = 16, gc_support = 2;
    gc->add_option("--size", gc_size);
    gc->add_option("--support", gc_support);
    gc->add_option("--seed", seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth_gen(tasks, subjects, size, shapes, seed, out);
        if (tr->parsed()) {
            tcfg.seed = seed;
            return cmd_train(corpora, tcfg, out, resume);
        }
        if (pr->parsed()) return cmd_predict(ckpt_path, query_path, archive_path, n, k, seed, out);
        if (ev->parsed())
            return cmd_eval(ckpt_path, archive_path, split, n, k, bootstrap_reps, sweep, seed, out);
        if (gc->parsed()) return cmd_gradcheck(gc_size, gc_support, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
