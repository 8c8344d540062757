#include "uvsg/synth.hpp"

#include <algorithm>
#include <cmath>

#include "uvsg/imageops.hpp"

namespace uvsg {

void SynthConfig::validate() const {
    if (num_shapes < 1 || num_subjects < 1 || num_tasks < 1)
        throw ConfigError("synth counts must be positive");
    if (image_size < 16) throw ConfigError("image_size must be at least 16");
    if (deform_alpha < 0 || deform_sigma <= 0) throw ConfigError("bad deformation parameters");
    if (gauss_noise < 0 || perlin_noise < 0 || fill_jitter < 0)
        throw ConfigError("noise levels must be non-negative");
    if (perlin_scale < 2) throw ConfigError("perlin_scale must be at least 2");
    if (min_contrast < 0 || min_contrast >= 1)
        throw ConfigError("min_contrast must be in [0,1)");
}

namespace {

// One blob: smoothed white noise thresholded at a random high quantile, so a
// fixed fraction of pixels is always selected.
void stamp_shape(Tensor& map, Rng& rng, int shape_id, int size) {
    Tensor field(Shape{1, size, size});
    for (float& v : field.data) v = static_cast<float>(rng.normal());
    const double sigma = rng.uniform(size / 16.0, size / 8.0);
    const double q = rng.uniform(0.80, 0.92);
    field = gaussian_blur(field, sigma);
    std::vector<float> sorted = field.data;
    const std::size_t pos = static_cast<std::size_t>(q * (sorted.size() - 1));
    std::nth_element(sorted.begin(), sorted.begin() + pos, sorted.end());
    const float thr = sorted[pos];
    for (std::size_t i = 0; i < field.data.size(); ++i)
        if (field.data[i] > thr) map.data[i] = static_cast<float>(shape_id);
}

}  // namespace

Tensor gen_label_map(Rng& rng, int num_shapes, int size) {
    if (num_shapes < 1) throw DomainError("num_shapes must be at least 1");
    // Later stamps overwrite earlier ones, so a shape can be eroded down to a
    // sliver; any shape left below ~1% of the image is restamped.
    const long min_area = std::max(1L, static_cast<long>(size) * size / 100);
    Tensor map(Shape{1, size, size});
    for (int k = 1; k <= num_shapes; ++k) stamp_shape(map, rng, k, size);
    for (int pass = 0; pass < 50; ++pass) {
        std::vector<long> area(static_cast<std::size_t>(num_shapes) + 1, 0);
        for (float v : map.data) ++area[static_cast<std::size_t>(v)];
        int smallest = 0;
        for (int k = 1; k <= num_shapes; ++k)
            if (area[static_cast<std::size_t>(k)] < min_area &&
                (smallest == 0 ||
                 area[static_cast<std::size_t>(k)] < area[static_cast<std::size_t>(smallest)]))
                smallest = k;
        if (smallest == 0) return map;
        stamp_shape(map, rng, smallest, size);
    }
    throw DomainError("could not place all shapes after 50 restamps");
}

Tensor gen_deformation(Rng& rng, double alpha, double sigma, int size) {
    if (alpha < 0 || sigma <= 0) throw DomainError("bad deformation parameters");
    Tensor field(Shape{2, size, size});
    if (alpha == 0.0) {
        // keep the stream position independent of alpha
        return field;
    }
    for (float& v : field.data) v = static_cast<float>(rng.normal());
    field = gaussian_blur(field, sigma);
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    for (int axis = 0; axis < 2; ++axis) {
        float* p = field.data.data() + axis * plane;
        double mean = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mean += p[i];
        mean /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
        const double sd = std::sqrt(sq / static_cast<double>(plane));
        const double scale = sd > 0 ? alpha / sd : 0.0;
        for (std::size_t i = 0; i < plane; ++i)
            p[i] = static_cast<float>((p[i] - mean) * scale);
    }
    return field;
}

Tensor perlin(Rng& rng, int size, int grid_scale) {
    if (grid_scale < 2) throw DomainError("grid_scale must be at least 2");
    const int cells = (size + grid_scale - 1) / grid_scale;
    std::vector<double> gy((cells + 1) * (cells + 1)), gx(gy.size());
    for (std::size_t i = 0; i < gy.size(); ++i) {
        const double a = rng.uniform(0.0, 2.0 * M_PI);
        gy[i] = std::sin(a);
        gx[i] = std::cos(a);
    }
    auto fade = [](double t) { return t * t * t * (t * (t * 6 - 15) + 10); };
    Tensor out(Shape{1, size, size});
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const int cy = y / grid_scale, cx = x / grid_scale;
            const double fy = (y - cy * grid_scale + 0.5) / grid_scale;
            const double fx = (x - cx * grid_scale + 0.5) / grid_scale;
            double corner[2][2];
            for (int oy = 0; oy <= 1; ++oy)
                for (int ox = 0; ox <= 1; ++ox) {
                    const std::size_t g = static_cast<std::size_t>(cy + oy) * (cells + 1) + (cx + ox);
                    corner[oy][ox] = gy[g] * (fy - oy) + gx[g] * (fx - ox);
                }
            const double uy = fade(fy), ux = fade(fx);
            const double top = corner[0][0] + ux * (corner[0][1] - corner[0][0]);
            const double bot = corner[1][0] + ux * (corner[1][1] - corner[1][0]);
            const double v = (top + uy * (bot - top)) * 1.41421356237;  // rescale to ~[-1,1]
            out.at(0, y, x) = static_cast<float>(std::clamp(v, -1.0, 1.0));
        }
    return out;
}

Tensor render_with_means(const Tensor& labels, const std::vector<float>& means, Rng& rng,
                         const SynthConfig& cfg) {
    if (labels.shape.size() != 3 || labels.shape[0] != 1)
        throw ShapeError("render expects a [1,S,S] label map");
    const int size = labels.shape[1];
    Tensor out(labels.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const std::size_t region = static_cast<std::size_t>(labels.data[i]);
        if (region >= means.size()) throw DomainError("label id exceeds the mean table");
        double v = means[region];
        if (cfg.fill_jitter > 0) v += rng.normal(0.0, cfg.fill_jitter);
        if (cfg.gauss_noise > 0) v += rng.normal(0.0, cfg.gauss_noise);
        out.data[i] = static_cast<float>(v);
    }
    if (cfg.perlin_noise > 0) {
        Tensor tex = perlin(rng, size, cfg.perlin_scale);
        for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] += static_cast<float>(cfg.perlin_noise) * tex.data[i];
    }
    clamp01(out);
    return out;
}

Tensor render_intensity(const Tensor& labels, Rng& rng, const SynthConfig& cfg) {
    float max_id = 0.f;
    for (float v : labels.data) max_id = std::max(max_id, v);
    std::vector<float> means(static_cast<std::size_t>(max_id) + 1);
    for (float& m : means) m = static_cast<float>(rng.uniform());
    return render_with_means(labels, means, rng, cfg);
}

SyntheticTask gen_task(Rng& rng, const SynthConfig& cfg) {
    cfg.validate();
    const int s = cfg.image_size;
    for (int attempt = 0; attempt < 10; ++attempt) {
        Tensor base = gen_label_map(rng, cfg.num_shapes, s);
        const float fg = static_cast<float>(1 + rng.below(static_cast<std::uint64_t>(cfg.num_shapes)));
        std::vector<Tensor> warped;
        warped.reserve(cfg.num_subjects);
        int empty = 0;
        for (int i = 0; i < cfg.num_subjects; ++i) {
            Tensor field = gen_deformation(rng, cfg.deform_alpha, cfg.deform_sigma, s);
            warped.push_back(warp(base, field, Interp::nearest));
            bool has_fg = false;
            for (float v : warped.back().data) has_fg = has_fg || v == fg;
            if (!has_fg) ++empty;
        }
        if (2 * empty > cfg.num_subjects) continue;
        // one mean table per task: subjects are deformations of the same
        // underlying appearance, so region intensities must agree across them.
        // Every non-target region keeps a minimum contrast to the target so
        // the task stays identifiable from a handful of examples.
        std::vector<float> means(static_cast<std::size_t>(cfg.num_shapes) + 1);
        means[static_cast<std::size_t>(fg)] = static_cast<float>(rng.uniform());
        for (std::size_t r = 0; r < means.size(); ++r) {
            if (r == static_cast<std::size_t>(fg)) continue;
            for (int draw = 0; draw < 50; ++draw) {
                means[r] = static_cast<float>(rng.uniform());
                if (std::abs(means[r] - means[static_cast<std::size_t>(fg)]) >=
                    cfg.min_contrast)
                    break;
            }
        }
        SyntheticTask task;
        for (Tensor& labels : warped) {
            Tensor image = render_with_means(labels, means, rng, cfg);
            Tensor binary(labels.shape);
            for (std::size_t i = 0; i < labels.data.size(); ++i)
                binary.data[i] = labels.data[i] == fg ? 1.f : 0.f;
            task.subjects.emplace_back(std::move(image), std::move(binary));
        }
        return task;
    }
    throw DomainError("foreground region kept vanishing; task generation gave up after 10 attempts");
}

SyntheticTask gen_task(const SynthConfig& cfg, int index) {
    const std::uint64_t task_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(index));
    Rng rng(task_seed);
    SyntheticTask task = gen_task(rng, cfg);
    task.id = "synth_" + std::to_string(index);
    task.seed = task_seed;
    return task;
}

}  // namespace uvsg
