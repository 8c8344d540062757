#include "uvsg/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "uvsg/tensor_io.hpp"

namespace fs = std::filesystem;

namespace uvsg {

int TaskArchive::image_size() const {
    if (subjects.empty()) throw StateError("archive has no subjects");
    return subjects.front().first.shape[1];
}

void TaskArchive::validate() const {
    if (subjects.empty()) throw StateError("archive has no subjects");
    const Shape& ref = subjects.front().first.shape;
    if (ref.size() != 3 || ref[0] != 1 || ref[1] != ref[2])
        throw ShapeError("archive subjects must be square [1,S,S] tensors");
    for (const auto& [img, lbl] : subjects) {
        if (img.shape != ref || lbl.shape != ref)
            throw ShapeError("archive subjects must share one spatial size");
        for (float v : img.data)
            if (v < 0.f || v > 1.f) throw DomainError("archive image outside [0,1]");
        for (float v : lbl.data)
            if (v != 0.f && v != 1.f) throw DomainError("archive label not binary");
    }
    std::vector<int> seen(subjects.size(), 0);
    for (const auto* part : {&splits.support, &splits.dev, &splits.test})
        for (int i : *part) {
            if (i < 0 || i >= static_cast<int>(subjects.size()))
                throw DomainError("split index out of range");
            ++seen[static_cast<std::size_t>(i)];
        }
    for (int count : seen)
        if (count != 1) throw DomainError("splits must partition the subjects exactly once");
}

Splits split_subjects(const TaskArchive& archive, std::uint64_t seed) {
    const int n = static_cast<int>(archive.subjects.size());
    if (n < 3) throw DomainError("need at least 3 subjects to split");
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(order);

    int n_support = (n * 6) / 10, n_dev = (n * 2) / 10, n_test = (n * 2) / 10;
    int rem = n - n_support - n_dev - n_test;
    // leftover subjects: support first, then dev
    while (rem > 0) {
        ++n_support;
        --rem;
        if (rem > 0) {
            ++n_dev;
            --rem;
        }
    }
    Splits s;
    auto it = order.begin();
    s.support.assign(it, it + n_support);
    it += n_support;
    s.dev.assign(it, it + n_dev);
    it += n_dev;
    s.test.assign(it, it + n_test);
    return s;
}

Episode sample_episode(const TaskArchive& archive, const std::vector<int>& query_split,
                       const std::vector<int>& support_pool, int n, Rng& rng) {
    if (query_split.empty()) throw DomainError("cannot sample from an empty split");
    if (n < 1) throw DomainError("support size must be at least 1");
    Episode ep;
    const std::size_t qpos = static_cast<std::size_t>(rng.below(query_split.size()));
    ep.query_index = query_split[qpos];
    ep.query = archive.subjects[static_cast<std::size_t>(ep.query_index)];
    std::vector<int> pool;
    pool.reserve(support_pool.size());
    for (int idx : support_pool)
        if (idx != ep.query_index) pool.push_back(idx);
    if (pool.empty()) throw DomainError("split too small to exclude the query subject");
    for (int i = 0; i < n; ++i) {
        const int idx = pool[static_cast<std::size_t>(rng.below(pool.size()))];
        ep.support_indices.push_back(idx);
        ep.support.push_back(archive.subjects[static_cast<std::size_t>(idx)]);
    }
    return ep;
}

Episode sample_episode(const TaskArchive& archive, const std::vector<int>& split, int n,
                       Rng& rng) {
    if (split.size() < 2 && !split.empty())
        throw DomainError("split too small to exclude the query subject");
    return sample_episode(archive, split, split, n, rng);
}

namespace {

float percentile_value(std::vector<float> sorted, double pct) {
    const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
    return sorted[static_cast<std::size_t>(std::llround(pos))];
}

}  // namespace

Tensor normalize_image(const Tensor& raw, NormalizeMode mode, double lo_pct, double hi_pct) {
    if (raw.data.empty()) throw DomainError("cannot normalize an empty tensor");
    Tensor out = raw;
    if (mode == NormalizeMode::percentile) {
        if (!(0 <= lo_pct && lo_pct < hi_pct && hi_pct <= 100))
            throw DomainError("bad percentile bounds");
        std::vector<float> sorted = out.data;
        std::sort(sorted.begin(), sorted.end());
        const float lo = percentile_value(sorted, lo_pct);
        const float hi = percentile_value(std::move(sorted), hi_pct);
        for (float& v : out.data) v = std::clamp(v, lo, hi);
    }
    const auto [mn, mx] = std::minmax_element(out.data.begin(), out.data.end());
    const float lo = *mn, hi = *mx;
    if (lo == hi) {
        std::fill(out.data.begin(), out.data.end(), 0.f);
        return out;
    }
    for (float& v : out.data) v = (v - lo) / (hi - lo);
    return out;
}

void save_archive(const TaskArchive& archive, const std::string& dir) {
    archive.validate();
    fs::create_directories(dir);
    for (std::size_t i = 0; i < archive.subjects.size(); ++i) {
        save_tensor((fs::path(dir) / ("img_" + std::to_string(i) + ".uvsg")).string(),
                    archive.subjects[i].first, Dtype::f32);
        save_tensor((fs::path(dir) / ("lbl_" + std::to_string(i) + ".uvsg")).string(),
                    archive.subjects[i].second, Dtype::f32);
    }
    nlohmann::json manifest = {{"name", archive.name},
                               {"size", archive.image_size()},
                               {"subjects", archive.subjects.size()},
                               {"label_desc", archive.label_desc},
                               {"seed", archive.seed},
                               {"split_seed", archive.split_seed},
                               {"splits",
                                {{"support", archive.splits.support},
                                 {"dev", archive.splits.dev},
                                 {"test", archive.splits.test}}}};
    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os) throw IoError("cannot write manifest in " + dir);
    os << manifest.dump(2) << "\n";
}

TaskArchive load_archive(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is) throw IoError("missing manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(is);

    TaskArchive archive;
    archive.name = manifest.at("name").get<std::string>();
    archive.label_desc = manifest.value("label_desc", "");
    archive.seed = manifest.at("seed").get<std::uint64_t>();
    archive.split_seed = manifest.at("split_seed").get<std::uint64_t>();
    archive.splits.support = manifest.at("splits").at("support").get<std::vector<int>>();
    archive.splits.dev = manifest.at("splits").at("dev").get<std::vector<int>>();
    archive.splits.test = manifest.at("splits").at("test").get<std::vector<int>>();

    const std::size_t count = manifest.at("subjects").get<std::size_t>();
    const int size = manifest.at("size").get<int>();
    for (std::size_t i = 0; i < count; ++i) {
        const std::string img_path = (fs::path(dir) / ("img_" + std::to_string(i) + ".uvsg")).string();
        const std::string lbl_path = (fs::path(dir) / ("lbl_" + std::to_string(i) + ".uvsg")).string();
        if (!fs::exists(img_path) || !fs::exists(lbl_path))
            throw IoError("manifest subject count does not match directory contents");
        archive.subjects.emplace_back(load_tensor<float>(img_path), load_tensor<float>(lbl_path));
        if (archive.subjects.back().first.shape != Shape{1, size, size})
            throw ShapeError("archive tensor size disagrees with the manifest");
    }
    if (fs::exists(fs::path(dir) / ("img_" + std::to_string(count) + ".uvsg")))
        throw IoError("manifest subject count does not match directory contents");
    archive.validate();
    return archive;
}

TaskArchive archive_from_task(const SyntheticTask& task, std::uint64_t split_seed) {
    TaskArchive archive;
    archive.name = task.id;
    archive.subjects = task.subjects;
    archive.label_desc = "one procedurally generated shape region";
    archive.seed = task.seed;
    archive.split_seed = split_seed;
    archive.splits = split_subjects(archive, split_seed);
    archive.validate();
    return archive;
}

}  // namespace uvsg
