#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uvsg/rng.hpp"
#include "uvsg/tensor.hpp"

namespace uvsg {

struct Range {
    double lo = 0, hi = 0;
    double sample(Rng& rng) const { return rng.uniform(lo, hi); }
};

// Probabilities and parameter ranges for every augmentation row, with the
// task-level rows (one draw shared by the whole episode) separated from the
// per-entry rows (independent draws per image/label pair).
struct AugmentConfig {
    bool enabled = true;

    // task rows, in application order
    double p_flip_intensities = 0.50;
    double p_flip_labels = 0.50;
    double p_hv_flip = 0.50;
    double p_sobel = 0.50;
    double p_affine = 0.50;
    Range degrees{0, 360};
    Range translate{0, 0.2};  // fraction of the image size
    Range scale{0.8, 1.1};
    double p_brightness_contrast = 0.50;
    Range brightness{-0.1, 0.1};
    Range contrast{0.8, 1.2};
    double p_elastic = 0.25;
    Range elastic_alpha{1, 2};
    Range elastic_sigma{6, 8};
    double p_blur = 0.50;
    int blur_kernel = 5;
    Range blur_sigma{0.1, 1.1};
    double p_noise = 0.50;
    Range noise_mean{0, 0.05};
    Range noise_var{0, 0.05};
    double p_sharpness = 0.50;
    double sharpness = 5;

    // per-entry rows
    double p_entry_affine = 0.50;
    double p_entry_brightness_contrast = 0.25;
    Range entry_contrast{0.5, 1.5};
    double p_entry_blur = 0.25;
    double p_entry_noise = 0.25;
    double p_entry_sharpness = 0.25;
    double p_entry_elastic = 0.80;
    Range entry_elastic_alpha{1, 2.5};
    Range entry_elastic_sigma{7, 8};

    void validate() const;
};

nlohmann::json augment_config_to_json(const AugmentConfig& cfg);
AugmentConfig augment_config_from_json(const nlohmann::json& j);

// A sampled spatial transform; the same transform is applied to the image
// (bilinear) and the label (nearest).
struct GeometricParams {
    bool affine = false;
    double degrees = 0, ty = 0, tx = 0, scale = 1;  // translation in pixels
    bool elastic = false;
    Tensor field;  // [2,H,W] displacement, shared by image and label
};

struct PhotometricParams {
    bool brightness_contrast = false;
    double brightness = 0, contrast = 1;
    bool blur = false;
    int blur_kernel = 5;
    double blur_sigma = 0;
    bool noise = false;
    double noise_mean = 0, noise_std = 0;
    bool sharpen = false;
    double sharpness = 0;
};

std::pair<Tensor, Tensor> apply_geometric(const std::pair<Tensor, Tensor>& pair,
                                          const GeometricParams& params);
// rng supplies the pixel noise realization only; all other parameters are
// fixed by `params`.
Tensor apply_photometric(const Tensor& image, const PhotometricParams& params, Rng& rng);

Tensor flip_labels(const Tensor& label);
Tensor flip_intensities(const Tensor& image);
Tensor sobel_edge_label(const Tensor& label);

// Which per-entry rows fire this episode. One draw gates all entries; the
// parameters themselves are drawn independently per pair.
struct InTaskGates {
    bool affine = false, brightness_contrast = false, blur = false, noise = false,
         sharpen = false, elastic = false;
};
InTaskGates sample_in_task_gates(Rng& rng, const AugmentConfig& cfg);

std::pair<Tensor, Tensor> in_task_augment(const std::pair<Tensor, Tensor>& pair,
                                          const InTaskGates& gates, Rng& rng,
                                          const AugmentConfig& cfg);
// Convenience form that also draws the gates.
std::pair<Tensor, Tensor> in_task_augment(const std::pair<Tensor, Tensor>& pair, Rng& rng,
                                          const AugmentConfig& cfg);

// Complete record of one task-augmentation draw; applying it to the original
// episode reproduces the augmented episode bit-exactly.
struct TaskAugmentRecord {
    bool flip_intensities = false;
    bool flip_labels = false;
    bool hflip = false, vflip = false;
    bool sobel = false;
    GeometricParams geom;
    PhotometricParams photo;
    std::uint64_t noise_seed = 0;  // per-member noise streams derive from this
};

TaskAugmentRecord sample_task_record(Rng& rng, const AugmentConfig& cfg, int height, int width);
void apply_task_record(std::pair<Tensor, Tensor>& query,
                       std::vector<std::pair<Tensor, Tensor>>& support,
                       const TaskAugmentRecord& record);
// Samples one record and applies it to the query and every support entry
// identically (the query label is transformed too).
TaskAugmentRecord task_augment(std::pair<Tensor, Tensor>& query,
                               std::vector<std::pair<Tensor, Tensor>>& support, Rng& rng,
                               const AugmentConfig& cfg);

}  // namespace uvsg
