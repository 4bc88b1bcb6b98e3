#include "miturbo/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace miturbo::data {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

std::span<const double> Dataset::row(int i) const {
    if (i < 0 || i >= n) throw std::out_of_range("Dataset: row out of range");
    return {values.data() + static_cast<std::size_t>(i) * dim,
            static_cast<std::size_t>(dim)};
}

// ---- IDX ----

namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

uint32_t read_be32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw std::runtime_error("idx: truncated header in " + path);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

std::vector<unsigned char> read_payload(std::ifstream& f, std::size_t expected,
                                        const std::string& path) {
    std::vector<unsigned char> buf(expected);
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(expected));
    const std::size_t got = static_cast<std::size_t>(f.gcount());
    if (got != expected) {
        throw std::runtime_error("idx: truncated payload in " + path + ": expected " +
                                 std::to_string(expected) + " bytes, got " +
                                 std::to_string(got));
    }
    return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw std::runtime_error("idx: cannot open " + images_path);
    if (read_be32(fi, images_path) != kIdxImagesMagic) {
        throw std::runtime_error("idx: bad image magic in " + images_path);
    }
    const uint32_t n = read_be32(fi, images_path);
    const uint32_t h = read_be32(fi, images_path);
    const uint32_t w = read_be32(fi, images_path);
    const std::size_t n_pixels = static_cast<std::size_t>(n) * h * w;
    auto pixels = read_payload(fi, n_pixels, images_path);

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw std::runtime_error("idx: cannot open " + labels_path);
    if (read_be32(fl, labels_path) != kIdxLabelsMagic) {
        throw std::runtime_error("idx: bad label magic in " + labels_path);
    }
    const uint32_t n_labels = read_be32(fl, labels_path);
    if (n_labels != n) {
        throw std::runtime_error("idx: image/label count mismatch: " +
                                 std::to_string(n) + " images vs " +
                                 std::to_string(n_labels) + " labels");
    }
    auto label_bytes = read_payload(fl, n_labels, labels_path);

    Dataset d;
    d.n = static_cast<int>(n);
    d.height = static_cast<int>(h);
    d.width = static_cast<int>(w);
    d.dim = static_cast<int>(h * w);
    d.values.resize(n_pixels);
    for (std::size_t i = 0; i < n_pixels; ++i) {
        d.values[i] = static_cast<double>(pixels[i]) / 255.0;
    }
    d.labels.assign(label_bytes.begin(), label_bytes.end());
    const int max_label =
        d.labels.empty() ? 0 : *std::max_element(d.labels.begin(), d.labels.end());
    d.n_classes = max_label + 1;
    return d;
}

// ---- synthetic blobs ----

namespace {

std::vector<std::vector<double>> blob_centers(int n_classes, int dim,
                                              double separation, Rng& rng) {
    std::vector<std::vector<double>> centers(n_classes, std::vector<double>(dim, 0.0));
    if (separation <= 0.0) return centers;
    if (2 * dim >= n_classes) {
        // Orthoplex vertices +-e_i * separation/sqrt(2): every pair is at
        // distance exactly `separation` (or 2/sqrt(2) of it for +-e_i pairs,
        // which is larger).
        const double a = separation / std::sqrt(2.0);
        for (int c = 0; c < n_classes; ++c) {
            const int axis = c / 2;
            centers[c][axis] = (c % 2 == 0) ? a : -a;
        }
        return centers;
    }
    // Low-dimensional fallback: rejection-sample inside a growing box.
    std::normal_distribution<double> gauss(0.0, 2.0 * separation);
    for (int c = 0; c < n_classes; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < 20000 && !placed; ++attempt) {
            const double stretch = 1.0 + attempt / 2000.0;
            std::vector<double> cand(dim);
            for (double& v : cand) v = stretch * gauss(rng);
            placed = true;
            for (int prev = 0; prev < c; ++prev) {
                double sq = 0.0;
                for (int k = 0; k < dim; ++k) {
                    const double diff = cand[k] - centers[prev][k];
                    sq += diff * diff;
                }
                if (sq < separation * separation) {
                    placed = false;
                    break;
                }
            }
            if (placed) centers[c] = std::move(cand);
        }
        if (!placed) {
            throw std::runtime_error("gen_blobs: could not place separated centres");
        }
    }
    return centers;
}

}  // namespace

Dataset gen_blobs(int n_classes, int n_per_class, int dim, double separation,
                  uint64_t seed) {
    require(n_classes >= 2 && n_per_class >= 1 && dim >= 1, "gen_blobs: bad sizes");
    require(separation >= 0.0, "gen_blobs: negative separation");
    Rng rng(seed);
    const auto centers = blob_centers(n_classes, dim, separation, rng);

    Dataset d;
    d.n = n_classes * n_per_class;
    d.dim = dim;
    d.n_classes = n_classes;
    d.values.resize(static_cast<std::size_t>(d.n) * dim);
    d.labels.resize(d.n);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t at = 0;
    for (int c = 0; c < n_classes; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            d.labels[at / dim] = c;
            for (int k = 0; k < dim; ++k) d.values[at++] = centers[c][k] + noise(rng);
        }
    }
    return d;
}

std::pair<Dataset, Dataset> split_per_class(const Dataset& d, int train_per_class) {
    require(train_per_class >= 1, "split_per_class: bad split");
    Dataset train, test;
    for (Dataset* part : {&train, &test}) {
        part->dim = d.dim;
        part->height = d.height;
        part->width = d.width;
        part->n_classes = d.n_classes;
    }
    std::vector<int> seen(d.n_classes, 0);
    for (int i = 0; i < d.n; ++i) {
        Dataset& dst = (seen[d.labels[i]]++ < train_per_class) ? train : test;
        const auto r = d.row(i);
        dst.values.insert(dst.values.end(), r.begin(), r.end());
        dst.labels.push_back(d.labels[i]);
        ++dst.n;
    }
    require(test.n > 0, "split_per_class: empty test split");
    return {std::move(train), std::move(test)};
}

LabelledSubset stratified_subset(const Dataset& d, int size, Rng& rng) {
    require(size >= 1 && size <= d.n, "stratified_subset: bad size");
    require(d.n_classes >= 1, "stratified_subset: dataset has no classes");

    std::vector<std::vector<int>> by_class(d.n_classes);
    for (int i = 0; i < d.n; ++i) by_class[d.labels[i]].push_back(i);
    for (auto& bucket : by_class) std::shuffle(bucket.begin(), bucket.end(), rng);

    // Round-robin over classes so per-class counts differ by at most one.
    LabelledSubset subset;
    subset.per_class_count.assign(d.n_classes, 0);
    std::size_t taken = 0;
    for (int round = 0; static_cast<int>(taken) < size; ++round) {
        bool any = false;
        for (int c = 0; c < d.n_classes && static_cast<int>(taken) < size; ++c) {
            if (round < static_cast<int>(by_class[c].size())) {
                subset.indices.push_back(by_class[c][round]);
                ++subset.per_class_count[c];
                ++taken;
                any = true;
            }
        }
        if (!any) break;
    }
    require(static_cast<int>(subset.indices.size()) == size,
            "stratified_subset: dataset too small for requested size");
    return subset;
}

DualSampler::DualSampler(const Dataset& dataset, LabelledSubset subset,
                         int n_labelled, int n_unlabelled, uint64_t seed)
    : dataset_(&dataset),
      subset_(std::move(subset)),
      n_labelled_(n_labelled),
      n_unlabelled_(n_unlabelled),
      rng_labelled_(seed ^ 0x9E3779B97F4A7C15ull),
      rng_unlabelled_(seed ^ 0xC2B2AE3D27D4EB4Full) {
    require(!subset_.indices.empty(), "DualSampler: empty labelled subset");
    require(n_labelled_ >= 1 && n_unlabelled_ >= 1, "DualSampler: bad batch sizes");
    require(n_unlabelled_ <= dataset.n, "DualSampler: unlabelled batch too large");
    order_.resize(dataset.n);
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_unlabelled_);
}

int DualSampler::steps_per_epoch() const {
    return dataset_->n / n_unlabelled_;
}

DualBatch DualSampler::next() {
    DualBatch batch;
    batch.n_labelled = n_labelled_;
    batch.n_unlabelled = n_unlabelled_;
    const int dim = dataset_->dim;

    batch.labelled_x.reserve(static_cast<std::size_t>(n_labelled_) * dim);
    std::uniform_int_distribution<std::size_t> pick(0, subset_.indices.size() - 1);
    for (int i = 0; i < n_labelled_; ++i) {
        const int idx = subset_.indices[pick(rng_labelled_)];
        const auto r = dataset_->row(idx);
        batch.labelled_x.insert(batch.labelled_x.end(), r.begin(), r.end());
        batch.labelled_y.push_back(dataset_->labels[idx]);
    }

    batch.unlabelled_x.reserve(static_cast<std::size_t>(n_unlabelled_) * dim);
    for (int i = 0; i < n_unlabelled_; ++i) {
        if (cursor_ >= order_.size()) {
            std::shuffle(order_.begin(), order_.end(), rng_unlabelled_);
            cursor_ = 0;
        }
        const auto r = dataset_->row(order_[cursor_++]);
        batch.unlabelled_x.insert(batch.unlabelled_x.end(), r.begin(), r.end());
    }
    return batch;
}

// ---- augmentations ----

void AugmentationConfig::validate() const {
    require(crop_scale_min > 0.0 && crop_scale_min <= 1.0,
            "augment: crop_scale_min must be in (0,1]");
    require(jitter_strength >= 0.0 && jitter_strength < 1.0,
            "augment: jitter_strength must be in [0,1)");
    require(blur_sigma_min > 0.0 && blur_sigma_max >= blur_sigma_min,
            "augment: bad blur sigma range");
    require(solarize_threshold >= 0.0 && solarize_threshold <= 1.0,
            "augment: solarize threshold must be in [0,1]");
    require(noise_sigma >= 0.0, "augment: negative noise sigma");
}

AugmentationConfig AugmentationConfig::image_defaults(bool flip_allowed_) {
    AugmentationConfig cfg;
    cfg.resize_crop = true;
    cfg.horizontal_flip = true;
    cfg.jitter = true;
    cfg.grayscale = true;
    cfg.blur = true;
    cfg.solarize = true;
    cfg.flip_allowed = flip_allowed_;
    return cfg;
}

AugmentationConfig AugmentationConfig::vector_defaults(double noise_sigma_) {
    AugmentationConfig cfg;
    cfg.gaussian_noise = true;
    cfg.noise_sigma = noise_sigma_;
    cfg.clamp_output = false;
    return cfg;
}

namespace {

double bilinear_at(const double* img, int h, int w, double y, double x) {
    const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, h - 1);
    const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const double fy = std::clamp(y - y0, 0.0, 1.0);
    const double fx = std::clamp(x - x0, 0.0, 1.0);
    const double top = img[y0 * w + x0] * (1.0 - fx) + img[y0 * w + x1] * fx;
    const double bot = img[y1 * w + x0] * (1.0 - fx) + img[y1 * w + x1] * fx;
    return top * (1.0 - fy) + bot * fy;
}

void resize_crop_image(std::vector<double>& img, int h, int w,
                       double scale_min, Rng& rng) {
    std::uniform_real_distribution<double> area(scale_min, 1.0);
    const double side = std::sqrt(area(rng));
    const int ch = std::max(1, static_cast<int>(std::round(h * side)));
    const int cw = std::max(1, static_cast<int>(std::round(w * side)));
    std::uniform_int_distribution<int> top_dist(0, h - ch);
    std::uniform_int_distribution<int> left_dist(0, w - cw);
    const int top = top_dist(rng);
    const int left = left_dist(rng);
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const double sy = top + (static_cast<double>(y) / std::max(1, h - 1)) * (ch - 1);
        for (int x = 0; x < w; ++x) {
            const double sx =
                left + (static_cast<double>(x) / std::max(1, w - 1)) * (cw - 1);
            out[y * w + x] = bilinear_at(img.data(), h, w, sy, sx);
        }
    }
    img = std::move(out);
}

void blur_image(std::vector<double>& img, int h, int w, double sigma) {
    const int radius = std::min(4, std::max(1, static_cast<int>(std::ceil(2.0 * sigma))));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        ksum += kernel[i + radius];
    }
    for (double& k : kernel) k /= ksum;

    std::vector<double> tmp(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[i + radius] * img[y * w + std::clamp(x + i, 0, w - 1)];
            }
            tmp[y * w + x] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[i + radius] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
            }
            img[y * w + x] = acc;
        }
    }
}

}  // namespace

std::vector<double> augment(std::span<const double> x, int n, int h, int w,
                            const AugmentationConfig& cfg, Rng& rng) {
    cfg.validate();
    const bool image_like = h > 0 && w > 0;
    const int dim = image_like ? h * w : (n > 0 ? static_cast<int>(x.size()) / n : 0);
    require(n >= 1 && static_cast<std::size_t>(n) * dim == x.size(),
            "augment: shape mismatch");
    if (!image_like) {
        require(!cfg.resize_crop && !cfg.horizontal_flip && !cfg.jitter &&
                    !cfg.grayscale && !cfg.blur && !cfg.solarize,
                "augment: image ops require image-shaped data");
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> out(x.begin(), x.end());
    std::vector<double> img;
    for (int i = 0; i < n; ++i) {
        double* p = out.data() + static_cast<std::size_t>(i) * dim;
        if (image_like) {
            img.assign(p, p + dim);
            if (cfg.resize_crop) resize_crop_image(img, h, w, cfg.crop_scale_min, rng);
            if (cfg.horizontal_flip && cfg.flip_allowed && unit(rng) < 0.5) {
                for (int y = 0; y < h; ++y) {
                    std::reverse(img.begin() + y * w, img.begin() + (y + 1) * w);
                }
            }
            if (cfg.jitter && unit(rng) < 0.8) {
                std::uniform_real_distribution<double> factor(
                    1.0 - cfg.jitter_strength, 1.0 + cfg.jitter_strength);
                const double brightness = factor(rng);
                const double contrast = factor(rng);
                double mean = 0.0;
                for (double v : img) mean += v;
                mean /= img.size();
                for (double& v : img) v = (v * brightness - mean) * contrast + mean;
            }
            // Grayscale is an identity on single-channel data; the draw is
            // still consumed so streams stay aligned with the config.
            if (cfg.grayscale) (void)unit(rng);
            if (cfg.blur && unit(rng) < 0.5) {
                std::uniform_real_distribution<double> sig(cfg.blur_sigma_min,
                                                           cfg.blur_sigma_max);
                blur_image(img, h, w, sig(rng));
            }
            if (cfg.solarize && unit(rng) < 0.2) {
                for (double& v : img) {
                    if (v >= cfg.solarize_threshold) v = 1.0 - v;
                }
            }
            std::copy(img.begin(), img.end(), p);
        }
        if (cfg.gaussian_noise && cfg.noise_sigma > 0.0) {
            std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
            for (int k = 0; k < dim; ++k) p[k] += noise(rng);
        }
        if (cfg.clamp_output) {
            for (int k = 0; k < dim; ++k) p[k] = std::clamp(p[k], 0.0, 1.0);
        }
    }
    return out;
}

}  // namespace miturbo::data
