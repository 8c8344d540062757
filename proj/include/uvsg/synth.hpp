#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uvsg/rng.hpp"
#include "uvsg/tensor.hpp"

namespace uvsg {

struct SynthConfig {
    int num_shapes = 16;
    int num_subjects = 100;
    int num_tasks = 1000;
    int image_size = 128;
    double deform_alpha = 1.5;  // displacement stddev in pixels
    double deform_sigma = 8.0;  // smoothness of the displacement field
    double gauss_noise = 0.03;  // additive pixel noise stddev
    double perlin_noise = 0.15; // amplitude of the low-frequency texture
    int perlin_scale = 16;      // lattice cell size in pixels
    double fill_jitter = 0.05;  // per-pixel spread around each region mean
    double min_contrast = 0.25; // smallest |mean difference| between the
                                // foreground region and any other region
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticTask {
    std::string id;
    // (image in [0,1], label in {0,1}), both [1,S,S]
    std::vector<std::pair<Tensor, Tensor>> subjects;
    std::uint64_t seed = 0;  // provenance: the task's own derived stream seed
};

// Integer map [1,S,S] with values in {0..num_shapes}; 0 is background. Each
// shape is a blob cut from an independently smoothed noise field at a random
// quantile; later shapes overwrite earlier ones. Regenerates (bounded) until
// every shape id keeps at least one pixel.
Tensor gen_label_map(Rng& rng, int num_shapes, int size);

// Displacement field [2,S,S] in pixels: per-axis white noise, Gaussian
// smoothed with stddev sigma, normalized to unit sample stddev, scaled by
// alpha. alpha = 0 yields the zero field.
Tensor gen_deformation(Rng& rng, double alpha, double sigma, int size);

// Classic gradient-lattice noise [1,S,S] in [-1,1] with smoothstep fade;
// grid_scale is the lattice cell size in pixels (>= 2).
Tensor perlin(Rng& rng, int size, int grid_scale);

// Fill each region with intensities around its mean, then add Gaussian and
// low-frequency noise; clamp to [0,1].
Tensor render_with_means(const Tensor& labels, const std::vector<float>& means, Rng& rng,
                         const SynthConfig& cfg);
// Same, with region means drawn Uniform[0,1].
Tensor render_intensity(const Tensor& labels, Rng& rng, const SynthConfig& cfg);

// One base label map warped per subject (nearest for labels), a uniformly
// chosen shape id as foreground, and an image rendered from each subject's
// warped integer map. Retries (at most 10 times) if the foreground vanishes
// in more than half the subjects.
SyntheticTask gen_task(Rng& rng, const SynthConfig& cfg);
// Task `index` on its own RNG stream derived from cfg.seed, so tasks can be
// generated in any order.
SyntheticTask gen_task(const SynthConfig& cfg, int index);

}  // namespace uvsg
