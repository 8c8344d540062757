#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uvsg/rng.hpp"
#include "uvsg/synth.hpp"
#include "uvsg/tensor.hpp"

namespace uvsg {

struct Splits {
    std::vector<int> support, dev, test;
};

struct TaskArchive {
    std::string name;
    std::vector<std::pair<Tensor, Tensor>> subjects;  // (image, label)
    std::string label_desc;
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    Splits splits;

    int image_size() const;
    // shared sizes, binary labels, unit-range images, splits partition
    void validate() const;
};

struct Episode {
    std::pair<Tensor, Tensor> query;
    std::vector<std::pair<Tensor, Tensor>> support;
    int query_index = -1;
    std::vector<int> support_indices;
};

// Seeded shuffle, then a 60/20/20 partition; remainder subjects go to
// support, then dev.
Splits split_subjects(const TaskArchive& archive, std::uint64_t seed);

// Query uniform from the split; support drawn with replacement from the
// split excluding the query subject.
Episode sample_episode(const TaskArchive& archive, const std::vector<int>& split, int n, Rng& rng);

// Query uniform from query_split; support drawn with replacement from
// support_pool, still never the query subject itself.
Episode sample_episode(const TaskArchive& archive, const std::vector<int>& query_split,
                       const std::vector<int>& support_pool, int n, Rng& rng);

enum class NormalizeMode { minmax, percentile };

// Rescale raw intensities to [0,1]; percentile mode clips to the given
// percentiles first. A constant input maps to all-zeros.
Tensor normalize_image(const Tensor& raw, NormalizeMode mode, double lo_pct = 0.5,
                       double hi_pct = 99.5);

// Directory layout: manifest.json plus img_<i>.uvsg / lbl_<i>.uvsg.
void save_archive(const TaskArchive& archive, const std::string& dir);
TaskArchive load_archive(const std::string& dir);

TaskArchive archive_from_task(const SyntheticTask& task, std::uint64_t split_seed);

}  // namespace uvsg
