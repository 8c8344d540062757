#include "uvsg/augment.hpp"

#include <cmath>

#include "uvsg/imageops.hpp"
#include "uvsg/synth.hpp"

namespace uvsg {

namespace {

void check_prob(double p, const char* what) {
    if (p < 0 || p > 1) throw ConfigError(std::string(what) + " probability must be in [0,1]");
}

void check_range(const Range& r, const char* what) {
    if (!(r.lo <= r.hi)) throw ConfigError(std::string(what) + " range is inverted");
}

nlohmann::json range_json(const Range& r) { return {r.lo, r.hi}; }
Range range_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void AugmentConfig::validate() const {
    check_prob(p_flip_intensities, "flip_intensities");
    check_prob(p_flip_labels, "flip_labels");
    check_prob(p_hv_flip, "hv_flip");
    check_prob(p_sobel, "sobel");
    check_prob(p_affine, "affine");
    check_prob(p_brightness_contrast, "brightness_contrast");
    check_prob(p_elastic, "elastic");
    check_prob(p_blur, "blur");
    check_prob(p_noise, "noise");
    check_prob(p_sharpness, "sharpness");
    check_prob(p_entry_affine, "entry_affine");
    check_prob(p_entry_brightness_contrast, "entry_brightness_contrast");
    check_prob(p_entry_blur, "entry_blur");
    check_prob(p_entry_noise, "entry_noise");
    check_prob(p_entry_sharpness, "entry_sharpness");
    check_prob(p_entry_elastic, "entry_elastic");
    for (const auto* r : {&degrees, &translate, &scale, &brightness, &contrast, &elastic_alpha,
                          &elastic_sigma, &blur_sigma, &noise_mean, &noise_var, &entry_contrast,
                          &entry_elastic_alpha, &entry_elastic_sigma})
        check_range(*r, "augment");
    if (blur_kernel < 1 || blur_kernel % 2 == 0) throw ConfigError("blur kernel must be odd");
    if (translate.lo < 0 || scale.lo <= 0 || elastic_sigma.lo <= 0 || entry_elastic_sigma.lo <= 0 ||
        noise_var.lo < 0)
        throw ConfigError("augment parameter range out of domain");
}

nlohmann::json augment_config_to_json(const AugmentConfig& c) {
    return {{"enabled", c.enabled},
            {"p_flip_intensities", c.p_flip_intensities},
            {"p_flip_labels", c.p_flip_labels},
            {"p_hv_flip", c.p_hv_flip},
            {"p_sobel", c.p_sobel},
            {"p_affine", c.p_affine},
            {"degrees", range_json(c.degrees)},
            {"translate", range_json(c.translate)},
            {"scale", range_json(c.scale)},
            {"p_brightness_contrast", c.p_brightness_contrast},
            {"brightness", range_json(c.brightness)},
            {"contrast", range_json(c.contrast)},
            {"p_elastic", c.p_elastic},
            {"elastic_alpha", range_json(c.elastic_alpha)},
            {"elastic_sigma", range_json(c.elastic_sigma)},
            {"p_blur", c.p_blur},
            {"blur_kernel", c.blur_kernel},
            {"blur_sigma", range_json(c.blur_sigma)},
            {"p_noise", c.p_noise},
            {"noise_mean", range_json(c.noise_mean)},
            {"noise_var", range_json(c.noise_var)},
            {"p_sharpness", c.p_sharpness},
            {"sharpness", c.sharpness},
            {"p_entry_affine", c.p_entry_affine},
            {"p_entry_brightness_contrast", c.p_entry_brightness_contrast},
            {"entry_contrast", range_json(c.entry_contrast)},
            {"p_entry_blur", c.p_entry_blur},
            {"p_entry_noise", c.p_entry_noise},
            {"p_entry_sharpness", c.p_entry_sharpness},
            {"p_entry_elastic", c.p_entry_elastic},
            {"entry_elastic_alpha", range_json(c.entry_elastic_alpha)},
            {"entry_elastic_sigma", range_json(c.entry_elastic_sigma)}};
}

AugmentConfig augment_config_from_json(const nlohmann::json& j) {
    AugmentConfig c;
    c.enabled = j.at("enabled").get<bool>();
    c.p_flip_intensities = j.at("p_flip_intensities").get<double>();
    c.p_flip_labels = j.at("p_flip_labels").get<double>();
    c.p_hv_flip = j.at("p_hv_flip").get<double>();
    c.p_sobel = j.at("p_sobel").get<double>();
    c.p_affine = j.at("p_affine").get<double>();
    c.degrees = range_from(j.at("degrees"));
    c.translate = range_from(j.at("translate"));
    c.scale = range_from(j.at("scale"));
    c.p_brightness_contrast = j.at("p_brightness_contrast").get<double>();
    c.brightness = range_from(j.at("brightness"));
    c.contrast = range_from(j.at("contrast"));
    c.p_elastic = j.at("p_elastic").get<double>();
    c.elastic_alpha = range_from(j.at("elastic_alpha"));
    c.elastic_sigma = range_from(j.at("elastic_sigma"));
    c.p_blur = j.at("p_blur").get<double>();
    c.blur_kernel = j.at("blur_kernel").get<int>();
    c.blur_sigma = range_from(j.at("blur_sigma"));
    c.p_noise = j.at("p_noise").get<double>();
    c.noise_mean = range_from(j.at("noise_mean"));
    c.noise_var = range_from(j.at("noise_var"));
    c.p_sharpness = j.at("p_sharpness").get<double>();
    c.sharpness = j.at("sharpness").get<double>();
    c.p_entry_affine = j.at("p_entry_affine").get<double>();
    c.p_entry_brightness_contrast = j.at("p_entry_brightness_contrast").get<double>();
    c.entry_contrast = range_from(j.at("entry_contrast"));
    c.p_entry_blur = j.at("p_entry_blur").get<double>();
    c.p_entry_noise = j.at("p_entry_noise").get<double>();
    c.p_entry_sharpness = j.at("p_entry_sharpness").get<double>();
    c.p_entry_elastic = j.at("p_entry_elastic").get<double>();
    c.entry_elastic_alpha = range_from(j.at("entry_elastic_alpha"));
    c.entry_elastic_sigma = range_from(j.at("entry_elastic_sigma"));
    c.validate();
    return c;
}

std::pair<Tensor, Tensor> apply_geometric(const std::pair<Tensor, Tensor>& pair,
                                          const GeometricParams& p) {
    if (pair.first.shape != pair.second.shape)
        throw ShapeError("image and label sizes differ");
    std::pair<Tensor, Tensor> out = pair;
    if (p.affine) {
        out.first = affine_warp(out.first, p.degrees, p.ty, p.tx, p.scale, Interp::bilinear);
        out.second = affine_warp(out.second, p.degrees, p.ty, p.tx, p.scale, Interp::nearest);
    }
    if (p.elastic) {
        out.first = warp(out.first, p.field, Interp::bilinear);
        out.second = warp(out.second, p.field, Interp::nearest);
    }
    return out;
}

Tensor apply_photometric(const Tensor& image, const PhotometricParams& p, Rng& rng) {
    Tensor out = image;
    bool touched = false;
    if (p.brightness_contrast) {
        for (float& v : out.data)
            v = static_cast<float>(p.contrast * (v - 0.5) + 0.5 + p.brightness);
        touched = true;
    }
    if (p.blur) {
        out = gaussian_blur(out, p.blur_sigma, (p.blur_kernel - 1) / 2);
        touched = true;
    }
    if (p.noise) {
        for (float& v : out.data) v += static_cast<float>(rng.normal(p.noise_mean, p.noise_std));
        touched = true;
    }
    if (p.sharpen) {
        // unsharp mask against a 3x3 smoothing, border pixels untouched
        const int h = out.shape[1], w = out.shape[2];
        Tensor smooth = out;
        for (int y = 1; y < h - 1; ++y)
            for (int x = 1; x < w - 1; ++x) {
                double acc = 0;
                for (int i = -1; i <= 1; ++i)
                    for (int j = -1; j <= 1; ++j)
                        acc += (i == 0 && j == 0 ? 5.0 : 1.0) * out.at(0, y + i, x + j);
                smooth.at(0, y, x) = static_cast<float>(acc / 13.0);
            }
        for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] = smooth.data[i] +
                          static_cast<float>(p.sharpness) * (out.data[i] - smooth.data[i]);
        touched = true;
    }
    if (touched) clamp01(out);
    return out;
}

Tensor flip_labels(const Tensor& label) {
    Tensor out = label;
    for (float& v : out.data) v = 1.f - v;
    return out;
}

Tensor flip_intensities(const Tensor& image) {
    Tensor out = image;
    for (float& v : out.data) v = 1.f - v;
    return out;
}

Tensor sobel_edge_label(const Tensor& label) {
    for (float v : label.data)
        if (v != 0.f && v != 1.f) throw DomainError("sobel_edge_label expects a binary map");
    return sobel_edge(label);
}

InTaskGates sample_in_task_gates(Rng& rng, const AugmentConfig& cfg) {
    InTaskGates g;
    if (!cfg.enabled) return g;
    g.affine = rng.bernoulli(cfg.p_entry_affine);
    g.brightness_contrast = rng.bernoulli(cfg.p_entry_brightness_contrast);
    g.blur = rng.bernoulli(cfg.p_entry_blur);
    g.noise = rng.bernoulli(cfg.p_entry_noise);
    g.sharpen = rng.bernoulli(cfg.p_entry_sharpness);
    g.elastic = rng.bernoulli(cfg.p_entry_elastic);
    return g;
}

namespace {

GeometricParams sample_geometric(Rng& rng, bool affine, bool elastic, const AugmentConfig& cfg,
                                 const Range& alpha, const Range& sigma, int height, int width) {
    GeometricParams p;
    p.affine = affine;
    if (affine) {
        p.degrees = cfg.degrees.sample(rng);
        const double fy = cfg.translate.sample(rng), fx = cfg.translate.sample(rng);
        p.ty = (rng.bernoulli(0.5) ? 1 : -1) * fy * height;
        p.tx = (rng.bernoulli(0.5) ? 1 : -1) * fx * width;
        p.scale = cfg.scale.sample(rng);
    }
    p.elastic = elastic;
    if (elastic) {
        if (height != width) throw ShapeError("elastic warp expects square images");
        p.field = gen_deformation(rng, alpha.sample(rng), sigma.sample(rng), height);
    }
    return p;
}

PhotometricParams sample_photometric(Rng& rng, bool bc, bool blur, bool noise, bool sharpen,
                                     const AugmentConfig& cfg, const Range& contrast) {
    PhotometricParams p;
    p.brightness_contrast = bc;
    if (bc) {
        p.brightness = cfg.brightness.sample(rng);
        p.contrast = contrast.sample(rng);
    }
    p.blur = blur;
    if (blur) {
        p.blur_kernel = cfg.blur_kernel;
        p.blur_sigma = cfg.blur_sigma.sample(rng);
    }
    p.noise = noise;
    if (noise) {
        p.noise_mean = cfg.noise_mean.sample(rng);
        p.noise_std = std::sqrt(cfg.noise_var.sample(rng));
    }
    p.sharpen = sharpen;
    if (sharpen) p.sharpness = cfg.sharpness;
    return p;
}

}  // namespace

std::pair<Tensor, Tensor> in_task_augment(const std::pair<Tensor, Tensor>& pair,
                                          const InTaskGates& g, Rng& rng,
                                          const AugmentConfig& cfg) {
    if (!cfg.enabled) return pair;
    const int h = pair.first.shape[1], w = pair.first.shape[2];
    GeometricParams geom = sample_geometric(rng, g.affine, g.elastic, cfg, cfg.entry_elastic_alpha,
                                            cfg.entry_elastic_sigma, h, w);
    PhotometricParams photo = sample_photometric(rng, g.brightness_contrast, g.blur, g.noise,
                                                 g.sharpen, cfg, cfg.entry_contrast);
    std::pair<Tensor, Tensor> out = apply_geometric(pair, geom);
    out.first = apply_photometric(out.first, photo, rng);
    return out;
}

std::pair<Tensor, Tensor> in_task_augment(const std::pair<Tensor, Tensor>& pair, Rng& rng,
                                          const AugmentConfig& cfg) {
    return in_task_augment(pair, sample_in_task_gates(rng, cfg), rng, cfg);
}

TaskAugmentRecord sample_task_record(Rng& rng, const AugmentConfig& cfg, int height, int width) {
    TaskAugmentRecord r;
    if (!cfg.enabled) return r;
    r.flip_intensities = rng.bernoulli(cfg.p_flip_intensities);
    r.flip_labels = rng.bernoulli(cfg.p_flip_labels);
    if (rng.bernoulli(cfg.p_hv_flip)) {
        if (rng.bernoulli(0.5))
            r.hflip = true;
        else
            r.vflip = true;
    }
    r.sobel = rng.bernoulli(cfg.p_sobel);
    const bool affine = rng.bernoulli(cfg.p_affine);
    const bool bc = rng.bernoulli(cfg.p_brightness_contrast);
    const bool elastic = rng.bernoulli(cfg.p_elastic);
    const bool blur = rng.bernoulli(cfg.p_blur);
    const bool noise = rng.bernoulli(cfg.p_noise);
    const bool sharpen = rng.bernoulli(cfg.p_sharpness);
    r.geom = sample_geometric(rng, affine, elastic, cfg, cfg.elastic_alpha, cfg.elastic_sigma,
                              height, width);
    r.photo = sample_photometric(rng, bc, blur, noise, sharpen, cfg, cfg.contrast);
    r.noise_seed = rng.next_u64();
    return r;
}

void apply_task_record(std::pair<Tensor, Tensor>& query,
                       std::vector<std::pair<Tensor, Tensor>>& support,
                       const TaskAugmentRecord& r) {
    // one member at a time, rows in the catalog's fixed order; the noise
    // realization is the only per-member difference, on seeded substreams so
    // replaying the record is bit-exact
    std::uint64_t member = 0;
    auto apply = [&](std::pair<Tensor, Tensor>& pair) {
        auto& [img, lbl] = pair;
        if (r.flip_intensities) img = flip_intensities(img);
        if (r.flip_labels) lbl = flip_labels(lbl);
        if (r.hflip) {
            img = flip_horizontal(img);
            lbl = flip_horizontal(lbl);
        }
        if (r.vflip) {
            img = flip_vertical(img);
            lbl = flip_vertical(lbl);
        }
        if (r.sobel) lbl = sobel_edge_label(lbl);
        if (r.geom.affine) {
            GeometricParams affine_only = r.geom;
            affine_only.elastic = false;
            pair = apply_geometric(pair, affine_only);
        }
        if (r.photo.brightness_contrast) {
            PhotometricParams bc;
            bc.brightness_contrast = true;
            bc.brightness = r.photo.brightness;
            bc.contrast = r.photo.contrast;
            Rng unused(0);
            img = apply_photometric(img, bc, unused);
        }
        if (r.geom.elastic) {
            GeometricParams elastic_only = r.geom;
            elastic_only.affine = false;
            pair = apply_geometric(pair, elastic_only);
        }
        PhotometricParams tail = r.photo;
        tail.brightness_contrast = false;
        Rng noise_rng(derive_seed(r.noise_seed, member++));
        img = apply_photometric(img, tail, noise_rng);
    };
    apply(query);
    for (auto& entry : support) apply(entry);
}

TaskAugmentRecord task_augment(std::pair<Tensor, Tensor>& query,
                               std::vector<std::pair<Tensor, Tensor>>& support, Rng& rng,
                               const AugmentConfig& cfg) {
    const int h = query.first.shape[1], w = query.first.shape[2];
    TaskAugmentRecord r = sample_task_record(rng, cfg, h, w);
    apply_task_record(query, support, r);
    return r;
}

}  // namespace uvsg
