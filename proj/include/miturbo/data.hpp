#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace miturbo::data {

using Rng = std::mt19937_64;

// Immutable sample store: row-major [n, dim] values plus integer labels.
// Image datasets carry height/width (dim = h*w, values in [0,1]); vector
// datasets leave them at 0.
struct Dataset {
    int n = 0;
    int dim = 0;
    int height = 0;
    int width = 0;
    int n_classes = 0;
    std::vector<double> values;
    std::vector<int> labels;

    bool image_like() const { return height > 0 && width > 0; }
    std::span<const double> row(int i) const;
};

// IDX image/label pair (big-endian header, magic 0x803 / 0x801). Pixel
// bytes are scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Unit-covariance Gaussian clusters, class-contiguous rows, centres at
// pairwise distance >= separation (exactly separation when 2*dim >=
// n_classes, via orthoplex vertices). Deterministic per seed.
Dataset gen_blobs(int n_classes, int n_per_class, int dim, double separation,
                  uint64_t seed);

// Stratified split keeping the first `train_per_class` rows of each class
// for the first dataset and the remainder for the second.
std::pair<Dataset, Dataset> split_per_class(const Dataset& d, int train_per_class);

struct LabelledSubset {
    std::vector<int> indices;          // unique indices into the base dataset
    std::vector<int> per_class_count;  // counts differ by at most 1
};

// Draws `size` unique indices, stratified over classes.
LabelledSubset stratified_subset(const Dataset& d, int size, Rng& rng);

struct DualBatch {
    int n_labelled = 0;
    int n_unlabelled = 0;
    std::vector<double> labelled_x;  // [n_labelled, dim]
    std::vector<int> labelled_y;
    std::vector<double> unlabelled_x;  // [n_unlabelled, dim]; labels stripped
};

// Parallel sampler over the dual dataset: the labelled stream resamples the
// duplicated subset with replacement every step, the unlabelled stream
// walks a reshuffled permutation of the full dataset. The two streams hold
// independent generator states.
class DualSampler {
public:
    DualSampler(const Dataset& dataset, LabelledSubset subset, int n_labelled,
                int n_unlabelled, uint64_t seed);

    DualBatch next();
    int steps_per_epoch() const;

private:
    const Dataset* dataset_;
    LabelledSubset subset_;
    int n_labelled_;
    int n_unlabelled_;
    Rng rng_labelled_;
    Rng rng_unlabelled_;
    std::vector<int> order_;
    std::size_t cursor_ = 0;
};

struct AugmentationConfig {
    bool resize_crop = false;
    bool horizontal_flip = false;
    bool jitter = false;
    bool grayscale = false;
    bool blur = false;
    bool solarize = false;
    bool gaussian_noise = false;

    bool flip_allowed = true;  // digits: false
    double crop_scale_min = 0.8;
    double jitter_strength = 0.4;
    double blur_sigma_min = 0.1;
    double blur_sigma_max = 2.0;
    double solarize_threshold = 0.5;
    double noise_sigma = 0.1;
    bool clamp_output = true;  // [0,1] clamp; disable for vector data

    void validate() const;
    static AugmentationConfig image_defaults(bool flip_allowed);
    static AugmentationConfig vector_defaults(double noise_sigma);
};

// Applies the enabled ops independently per image. `x` is [n, dim]
// row-major; h and w are 0 for vector data, in which case only
// gaussian-noise is legal.
std::vector<double> augment(std::span<const double> x, int n, int h, int w,
                            const AugmentationConfig& cfg, Rng& rng);

}  // namespace miturbo::data
