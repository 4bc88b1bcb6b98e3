#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "miturbo/data.hpp"
#include "miturbo/networks.hpp"
#include "miturbo/trainer.hpp"

namespace miturbo::cli {

// Raised on unreadable files, unknown keys or malformed values; the message
// names the offending key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DatasetConfig {
    std::string type = "blobs";  // blobs | idx
    // blobs
    int classes = 10;
    int per_class = 1100;
    int dim = 16;
    double separation = 4.0;
    uint64_t seed = 7;
    int train_per_class = 1000;  // remainder becomes the test split
    // idx
    std::string train_images, train_labels, test_images, test_labels;
};

// Flat key-value document with sections; unknown keys are rejected.
struct RunConfig {
    DatasetConfig dataset;
    nn::EncoderConfig encoder;
    nn::PredictorConfig predictor;
    nn::DiscriminatorConfig discriminator;
    trainer::TrainConfig train;
    data::AugmentationConfig augment;
    bool augment_clamp_auto = true;  // clamp tracks dataset kind unless pinned
    // ablation
    std::vector<int> ablation_subset_sizes = {100, 1000};
    double ablation_lambda_critic = 0.1;
    double ablation_lambda_latent = 0.1;
    double ablation_lambda_augment = 0.1;

    // Fills the dims derived from the dataset (encoder input width,
    // predictor classes, discriminator input) and the auto clamp flag.
    void finalize(const data::Dataset& train_set);
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);  // for tests

// Materialises the configured dataset as a train/test pair.
std::pair<data::Dataset, data::Dataset> load_datasets(const DatasetConfig& cfg);

}  // namespace miturbo::cli
