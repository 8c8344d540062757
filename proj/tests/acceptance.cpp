// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. argv[1] must be the path to the command-line tool. The desk-scale
// training run happens once (criterion 4) and its checkpoint feeds the trend
// criteria that follow.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uvsg/cross.hpp"
#include "uvsg/eval.hpp"
#include "uvsg/gradcheck.hpp"
#include "uvsg/train.hpp"

namespace fs = std::filesystem;
using namespace uvsg;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& what, double seconds) {
    std::printf("criterion %2d: %s  %s  (%.1fs)\n", criterion, pass ? "PASS" : "FAIL",
                what.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

double now_minus(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_image(int h, int w, Rng& rng) {
    Tensor t(Shape{1, h, w});
    for (auto& v : t.data) v = static_cast<float>(rng.uniform());
    return t;
}

Tensor random_label(int h, int w, Rng& rng) {
    Tensor t(Shape{1, h, w});
    for (auto& v : t.data) v = rng.bernoulli(0.4) ? 1.f : 0.f;
    return t;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// metrics lines with the timing field removed (the only nondeterministic one)
std::string strip_wallclock(const std::string& jsonl) {
    std::istringstream is(jsonl);
    std::ostringstream os;
    std::string line;
    while (std::getline(is, line)) {
        auto j = nlohmann::json::parse(line);
        j.erase("wallclock_ms");
        os << j.dump() << "\n";
    }
    return os.str();
}

// ---- criterion 1: permutation invariance ----
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    Rng rng(101);
    for (int trial = 0; trial < 50 && ok; ++trial) {
        const int n = std::vector<int>{2, 4, 8}[trial % 3];
        Tensor u = random_image(8, 8, rng);
        std::vector<Tensor> V;
        for (int i = 0; i < n; ++i) {
            Tensor v(Shape{2, 8, 8});
            for (auto& x : v.data) x = static_cast<float>(rng.uniform(-1, 1));
            V.push_back(std::move(v));
        }
        ConvParams theta;
        theta.weight = Tensor(Shape{4, 3, 3, 3});
        theta.bias = Tensor(Shape{4});
        for (auto& x : theta.weight.data) x = static_cast<float>(rng.uniform(-1, 1));
        for (auto& x : theta.bias.data) x = static_cast<float>(rng.uniform(-1, 1));

        std::vector<int> perm(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
        rng.shuffle(perm);
        std::vector<Tensor> pv;
        for (int p : perm) pv.push_back(V[static_cast<std::size_t>(p)]);
        auto base = cross_conv(u, V, theta);
        auto permuted = cross_conv(u, pv, theta);
        for (int i = 0; i < n; ++i)
            ok = ok && base[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])].data ==
                           permuted[static_cast<std::size_t>(i)].data;
    }

    // full network at 32x32
    NetworkConfig cfg;
    Rng prng(102);
    ModelParameters params = init_network(cfg, prng);
    for (int n : {2, 4, 8}) {
        Tensor q = random_image(32, 32, prng);
        std::vector<std::pair<Tensor, Tensor>> sup;
        for (int i = 0; i < n; ++i)
            sup.emplace_back(random_image(32, 32, prng), random_label(32, 32, prng));
        auto perm = sup;
        std::rotate(perm.begin(), perm.begin() + 1, perm.end());
        ok = ok && max_abs_diff(forward(params, cfg, q, sup), forward(params, cfg, q, perm)) < 1e-5;
        NetworkConfig det = cfg;
        det.reduction = Reduction::sorted;
        ok = ok && forward(params, det, q, sup).data == forward(params, det, q, perm).data;
    }
    const double dt = now_minus(t0);
    report(1, ok && dt < 10, "support permutation invariance (exact under sorted reduction)", dt);
}

// ---- criterion 2: tiled CrossConv vs loop oracle ----
void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    Rng rng(202);
    for (int trial = 0; trial < 100 && ok; ++trial) {
        const int cu = 1 + static_cast<int>(rng.below(3));
        const int cv = 1 + static_cast<int>(rng.below(3));
        const int n = 1 + static_cast<int>(rng.below(8));
        const int size = 4 + 2 * static_cast<int>(rng.below(4));
        TensorD u(Shape{cu, size, size});
        for (auto& v : u.data) v = rng.uniform(-1, 1);
        std::vector<TensorD> V(static_cast<std::size_t>(n), TensorD(Shape{cv, size, size}));
        for (auto& t : V)
            for (auto& v : t.data) v = rng.uniform(-1, 1);
        ConvParamsT<double> theta;
        theta.weight = TensorD(Shape{1 + static_cast<int>(rng.below(8)), cu + cv, 3, 3});
        theta.bias = TensorD(Shape{theta.weight.shape[0]});
        for (auto& v : theta.weight.data) v = rng.uniform(-1, 1);
        for (auto& v : theta.bias.data) v = rng.uniform(-1, 1);
        auto tiled = cross_conv(u, V, theta);
        auto ref = cross_conv_reference(u, V, theta);
        for (int i = 0; i < n; ++i)
            ok = ok && max_abs_diff(tiled[static_cast<std::size_t>(i)],
                                    ref[static_cast<std::size_t>(i)]) < 1e-6;
    }
    const double dt = now_minus(t0);
    report(2, ok && dt < 10, "tiled CrossConv matches the per-entry loop oracle < 1e-6", dt);
}

// ---- criterion 3: gradient correctness ----
void criterion_3(const std::string& tool) {
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = std::system((tool + " gradcheck --size 16 --support 2 --seed 3 > /dev/null").c_str());
    bool ok = rc == 0;

    // each primitive op against finite differences on 4x4 inputs
    Rng rng(303);
    auto rand4 = [&](Shape s) {
        TensorD t(std::move(s));
        for (auto& v : t.data) v = rng.uniform(-1, 1);
        return t;
    };
    std::vector<double> errs;
    errs.push_back(grad_check(
        [&](TapeD& t, const std::vector<int>& ids) {
            return t.sum(t.mul(t.conv2d(ids[0], ids[1], ids[2], Padding::same),
                               t.conv2d(ids[0], ids[1], ids[2], Padding::same)));
        },
        {rand4({2, 4, 4}), rand4({3, 2, 3, 3}), rand4({3})}, 1e-6));
    TensorD off = rand4({2, 4, 4});
    for (auto& v : off.data) v += (v >= 0 ? 0.5 : -0.5);  // keep clear of the kink
    errs.push_back(grad_check(
        [&](TapeD& t, const std::vector<int>& ids) {
            return t.sum(t.mul(t.leaky_relu(ids[0], 0.01), t.leaky_relu(ids[0], 0.01)));
        },
        {off}, 1e-6));
    errs.push_back(grad_check(
        [&](TapeD& t, const std::vector<int>& ids) {
            const int up = t.bilinear_resize(ids[0], 8, 8);
            return t.sum(t.mul(up, up));
        },
        {rand4({1, 4, 4})}, 1e-6));
    errs.push_back(grad_check(
        [&](TapeD& t, const std::vector<int>& ids) {
            const int m = t.mean_batch(t.stack_batch({ids[0], ids[1]}));
            return t.sum(t.mul(m, m));
        },
        {rand4({1, 4, 4}), rand4({1, 4, 4})}, 1e-6));
    TensorD prob = rand4({1, 4, 4});
    for (auto& v : prob.data) v = 0.05 + 0.9 * std::abs(v);
    TensorD target(Shape{1, 4, 4});
    for (auto& v : target.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    errs.push_back(grad_check(
        [&](TapeD& t, const std::vector<int>& ids) {
            return t.soft_dice_loss(t.sigmoid(ids[0]), t.input(target));
        },
        {rand4({1, 4, 4})}, 1e-6));
    for (double e : errs) ok = ok && e < 1e-5;

    const double dt = now_minus(t0);
    report(3, ok && dt < 120, "full-net gradcheck < 1e-3; per-op checks < 1e-5", dt);
}

struct DeskRun {
    Checkpoint ckpt;
    std::vector<TaskArchive> held;  // two held-out tasks
};

// ---- criterion 4: desk-scale learning ----
DeskRun criterion_4(const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();

    SynthConfig sc;
    sc.image_size = 32;
    sc.num_shapes = 4;  // at 32x32, more shapes leave regions too small to learn
    sc.num_subjects = 100;
    sc.seed = 42;
    std::vector<TaskArchive> train_tasks;
    for (int i = 0; i < 8; ++i)
        train_tasks.push_back(archive_from_task(gen_task(sc, i), derive_seed(sc.seed, 7000 + i)));

    SynthConfig hc = sc;
    hc.num_subjects = 20;  // enough for a 4-subject test split
    hc.seed = 4242;        // unseen shapes and textures
    DeskRun run;
    for (int i = 0; i < 2; ++i)
        run.held.push_back(archive_from_task(gen_task(hc, i), derive_seed(hc.seed, 7100 + i)));

    TrainConfig cfg;
    cfg.network.features = 32;
    cfg.support_size = 8;
    cfg.lr = 3e-4;
    cfg.max_steps = 3000;  // frozen after the convergence measurement run
    cfg.eval_every = 500;
    cfg.seed = 5;
    TrainResult result = train(cfg, {train_tasks}, (work / "desk_run").string());
    run.ckpt = result.checkpoint;

    double mean = 0;
    InferConfig icfg;
    icfg.support_size = 8;
    icfg.ensemble = 5;
    icfg.seed = 77;
    for (const auto& archive : run.held)
        mean += evaluate_split(run.ckpt.params, run.ckpt.config, archive, archive.splits.test,
                               archive.splits.support, icfg)
                    .mean;
    mean /= static_cast<double>(run.held.size());

    const double dt = now_minus(t0);
    std::ostringstream what;
    what << "held-out mean Dice " << mean << " (threshold 70, " << cfg.max_steps << " steps)";
    report(4, mean >= 70.0 && dt < 1800, what.str(), dt);
    return run;
}

// ---- criterion 5: support-size and ensembling trends ----
void criterion_5(const DeskRun& run) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<int> ns{1, 2, 4, 8};
    std::vector<double> single(ns.size(), 0), ensembled(ns.size(), 0);
    for (const auto& archive : run.held) {
        auto k1 = sweep_support_size(run.ckpt.params, run.ckpt.config, archive, ns, 1, 505);
        auto k10 = sweep_support_size(run.ckpt.params, run.ckpt.config, archive, ns, 10, 505);
        for (std::size_t i = 0; i < ns.size(); ++i) {
            single[i] += k1[i].mean_dice / run.held.size();
            ensembled[i] += k10[i].mean_dice / run.held.size();
        }
    }
    bool ok = true;
    std::ostringstream what;
    what << "Dice by N {";
    for (std::size_t i = 0; i < ns.size(); ++i) {
        what << (i ? " " : "") << single[i];
        if (i > 0) ok = ok && single[i] >= single[i - 1] - 1.0;  // 1-point noise band
        ok = ok && ensembled[i] >= single[i] - 0.5;              // ensembling never hurts much
    }
    what << "}, K=10 {";
    for (std::size_t i = 0; i < ns.size(); ++i) what << (i ? " " : "") << ensembled[i];
    what << "}";
    report(5, ok, what.str(), now_minus(t0));
}

// ---- criterion 6: ensemble-grid variance reduction ----
void criterion_6(const DeskRun& run) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::ostringstream what;
    what << "std(K=1) vs std(K=8):";
    for (int n : {2, 4}) {
        auto grid = sweep_ensemble_grid(run.ckpt.params, run.ckpt.config, run.held[0], {n}, {1, 8},
                                        100, 606);
        ok = ok && grid[1].std <= grid[0].std;
        what << " N=" << n << " " << grid[0].std << "/" << grid[1].std;
    }
    report(6, ok, what.str(), now_minus(t0));
}

// ---- criterion 7: limited-data trend ----
void criterion_7(const DeskRun& run) {
    const auto t0 = std::chrono::steady_clock::now();
    const TaskArchive& archive = run.held[0];
    const int full = static_cast<int>(archive.splits.support.size());
    auto rows = sweep_limited_data(run.ckpt.params, run.ckpt.config, archive, {1, 2, 4, 8, full},
                                   20, 707);
    bool ok = rows[1].std > rows.back().std;  // spread shrinks from pool 2 to the full pool
    std::ostringstream what;
    what << "mean/std by pool:";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0) ok = ok && rows[i].mean >= rows[i - 1].mean - 1.0;
        what << " " << rows[i].pool_size << ":" << rows[i].mean << "/" << rows[i].std;
    }
    report(7, ok, what.str(), now_minus(t0));
}

// ---- criterion 8: end-to-end determinism ----
void criterion_8(const std::string& tool, const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    for (const char* leg : {"a", "b"}) {
        const fs::path root = work / (std::string("det_") + leg);
        fs::remove_all(root);
        std::ostringstream cmd;
        cmd << tool << " synth-gen --tasks 2 --subjects 10 --size 32 --seed 9 --out "
            << (root / "corpus") << " > /dev/null && " << tool
            << " train --corpus " << (root / "corpus") << " --support 4 --steps 200 --features 8"
            << " --seed 9 --out " << (root / "run") << " > /dev/null && " << tool << " eval"
            << " --checkpoint " << (root / "run" / "checkpoint.uvck") << " --archive "
            << (root / "corpus" / "synth_0") << " -N 4 -K 2 --seed 9 --out " << (root / "eval")
            << " > /dev/null";
        ok = ok && std::system(cmd.str().c_str()) == 0;
    }
    const fs::path a = work / "det_a", b = work / "det_b";
    if (ok) {
        for (const auto& rel : {"corpus/synth_0/manifest.json", "corpus/synth_0/img_0.uvsg",
                                "corpus/synth_1/lbl_3.uvsg", "run/checkpoint.uvck",
                                "eval/report.json"})
            ok = ok && slurp(a / rel) == slurp(b / rel);
        ok = ok && strip_wallclock(slurp(a / "run/metrics.jsonl")) ==
                       strip_wallclock(slurp(b / "run/metrics.jsonl"));
    }
    report(8, ok, "synth-gen + train + eval reruns are byte-identical", now_minus(t0));
}

// ---- criterion 9: named unit examples ----
void criterion_9() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;

    Tensor a(Shape{1, 2, 4}), b(Shape{1, 2, 4});
    a.data = {1, 1, 1, 1, 0, 0, 0, 0};
    b.data = {1, 1, 0, 0, 1, 1, 0, 0};
    ok = ok && dice_score(a, a) == 100.0;
    ok = ok && dice_score(a, b) == 50.0;
    Tensor disj(Shape{1, 2, 4});
    disj.data = {0, 0, 0, 0, 1, 1, 1, 1};
    ok = ok && dice_score(a, disj) == 0.0;

    {
        TapeD t;
        TensorD p(Shape{1, 2, 2}), y(Shape{1, 2, 2});
        p.data = {0.5, 0.5, 0.5, 0.5};
        y.data = {1, 1, 0, 0};
        const double loss = t.value(t.soft_dice_loss(t.input(p), t.input(y))).data[0];
        ok = ok && std::abs(loss - 1.0 / 3) < 1e-5;
    }

    SynthConfig sc;
    sc.image_size = 32;
    sc.num_subjects = 10;
    sc.seed = 3;
    TaskArchive arch = archive_from_task(gen_task(sc, 0), 77);
    Splits s = split_subjects(arch, 5);
    ok = ok && s.support.size() == 6 && s.dev.size() == 2 && s.test.size() == 2;

    Rng rng(909);
    Tensor lbl = random_label(8, 8, rng);
    ok = ok && flip_labels(flip_labels(lbl)).data == lbl.data;
    Tensor img = random_image(8, 8, rng);
    ok = ok && max_abs_diff(flip_intensities(flip_intensities(img)), img) < 1e-7;

    Tensor square(Shape{1, 8, 8});
    for (int y = 3; y < 6; ++y)
        for (int x = 2; x < 6; ++x) square.at(0, y, x) = 1.f;
    Tensor edge = sobel_edge_label(square);
    const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    for (int y = 0; y < 8 && ok; ++y)
        for (int x = 0; x < 8 && ok; ++x) {
            double gx = 0, gy = 0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    const int yy = std::clamp(y + i - 1, 0, 7), xx = std::clamp(x + j - 1, 0, 7);
                    gx += kx[i][j] * square.at(0, yy, xx);
                    gy += kx[j][i] * square.at(0, yy, xx);
                }
            ok = ok && edge.at(0, y, x) == (gx * gx + gy * gy > 0 ? 1.f : 0.f);
        }

    report(9, ok, "metric, loss, split, flip, and edge examples hold exactly", now_minus(t0));
}

// ---- criterion 10: parameter count ----
void criterion_10() {
    const auto t0 = std::chrono::steady_clock::now();
    NetworkConfig cfg;
    Rng rng(1);
    const double count = static_cast<double>(init_network(cfg, rng).parameter_count());
    const bool ok = count > 1.18e6 * 0.85 && count < 1.18e6 * 1.15;
    std::ostringstream what;
    what << "default network has " << static_cast<long>(count) << " parameters (target 1.18M +/- 15%)";
    report(10, ok, what.str(), now_minus(t0));
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <path-to-cli-tool> [criteria e.g. 1,2,9]\n");
        return 2;
    }
    const std::string tool = argv[1];
    std::vector<bool> want(11, true);
    if (argc > 2) {
        want.assign(11, false);
        std::istringstream is(argv[2]);
        std::string tok;
        while (std::getline(is, tok, ',')) want[static_cast<std::size_t>(std::stoi(tok))] = true;
    }
    const fs::path work = fs::temp_directory_path() / "uvsg_acceptance";
    fs::create_directories(work);

    if (want[1]) criterion_1();
    if (want[2]) criterion_2();
    if (want[3]) criterion_3(tool);
    if (want[4] || want[5] || want[6] || want[7]) {
        DeskRun run = criterion_4(work);
        if (want[5]) criterion_5(run);
        if (want[6]) criterion_6(run);
        if (want[7]) criterion_7(run);
    }
    if (want[8]) criterion_8(tool, work);
    if (want[9]) criterion_9();
    if (want[10]) criterion_10();

    if (failures == 0) std::printf("all 10 criteria passed\n");
    else std::printf("%d criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
