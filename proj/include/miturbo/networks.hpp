#pragma once

#include <string>
#include <utility>
#include <vector>

#include "miturbo/layers.hpp"
#include "miturbo/tensor.hpp"

namespace miturbo::nn {

struct EncoderConfig {
    int input_dim = 16;
    int feature_dim = 64;  // CLS-analog width
    int n_patch_tokens = 4;
    int token_dim = 32;
    int projector_hidden = 256;  // also the latent width
    double dropout_p = 0.3;
    double leaky_slope = 0.01;
    bool freeze_backbone = false;

    int latent_dim() const { return projector_hidden; }
    void validate() const;
};

struct PredictorConfig {
    int latent_dim = 256;
    int hidden = 128;
    int n_classes = 10;

    void validate() const;
};

struct DiscriminatorConfig {
    int input_dim = 10;  // class count
    int hidden = 64;     // two hidden layers of this width

    void validate() const;
};

// Feature extractor standing in for a vision backbone (one vector of global
// features plus a small grid of patch tokens), a single transformer layer
// over the patch tokens, mean pooling, and a projector head. The global
// features skip the transformer.
class Encoder {
public:
    Encoder(EncoderConfig cfg, Rng& rng);

    // x: [N, input_dim] -> latent [N, projector_hidden]. Dropout draws from
    // `rng` only when train is set.
    Tensor forward(const Tensor& x, Rng& rng, bool train) const;

    std::vector<Tensor> parameters() const;
    std::vector<Tensor> trainable_parameters() const;  // honors freeze_backbone
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    const EncoderConfig& config() const { return cfg_; }

private:
    EncoderConfig cfg_;
    Linear backbone_;   // input -> feature_dim + n_patch_tokens*token_dim
    AttentionBlock attn_;
    SwiGluBlock ffn_;
    Linear projector_;  // feature_dim + token_dim -> projector_hidden
};

// Classifier head mapping latents to class logits.
class Predictor {
public:
    Predictor(PredictorConfig cfg, Rng& rng);

    Tensor forward(const Tensor& latent) const;  // [N, n_classes] logits

    std::vector<Tensor> parameters() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    const PredictorConfig& config() const { return cfg_; }

private:
    PredictorConfig cfg_;
    Linear l1_, l2_;
};

// Binary critic over class-probability vectors; returns one logit per row,
// so D(y) = sigmoid(logit) stays in (0,1) and log D / log(1-D) go through
// the stable log-sigmoid.
class Discriminator {
public:
    Discriminator(DiscriminatorConfig cfg, Rng& rng);

    Tensor forward(const Tensor& probs) const;  // [N, 1] logits

    std::vector<Tensor> parameters() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    const DiscriminatorConfig& config() const { return cfg_; }

private:
    DiscriminatorConfig cfg_;
    Linear l1_, l2_, l3_;
};

// Flat little-endian checkpoint: per parameter (name, shape, row-major f64
// values). load_checkpoint requires an exact name/shape match.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params);
void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params);

}  // namespace miturbo::nn
