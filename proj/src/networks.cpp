#include "miturbo/networks.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace miturbo::nn {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void EncoderConfig::validate() const {
    require(input_dim > 0 && feature_dim > 0 && n_patch_tokens > 0 &&
                token_dim > 0 && projector_hidden > 0,
            "EncoderConfig: dimensions must be positive");
    require(dropout_p >= 0.0 && dropout_p < 1.0,
            "EncoderConfig: dropout_p must be in [0,1)");
    require(leaky_slope >= 0.0, "EncoderConfig: leaky_slope must be >= 0");
}

void PredictorConfig::validate() const {
    require(latent_dim > 0 && hidden > 0 && n_classes >= 2,
            "PredictorConfig: bad dimensions");
}

void DiscriminatorConfig::validate() const {
    require(input_dim > 0 && hidden > 0, "DiscriminatorConfig: bad dimensions");
}

Encoder::Encoder(EncoderConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    backbone_ = Linear(cfg_.input_dim,
                       cfg_.feature_dim + cfg_.n_patch_tokens * cfg_.token_dim, rng);
    attn_ = AttentionBlock(cfg_.token_dim, rng);
    ffn_ = SwiGluBlock(cfg_.token_dim, rng);
    projector_ = Linear(cfg_.feature_dim + cfg_.token_dim, cfg_.projector_hidden, rng);
}

Tensor Encoder::forward(const Tensor& x, Rng& rng, bool train) const {
    require(x.cols() == cfg_.input_dim, "Encoder: input width mismatch");
    const int n = x.rows();
    const int t = cfg_.n_patch_tokens;

    Tensor features = leaky_relu(backbone_.forward(x), cfg_.leaky_slope);
    Tensor cls = slice_cols(features, 0, cfg_.feature_dim);
    Tensor tokens = reshape(
        slice_cols(features, cfg_.feature_dim, cfg_.feature_dim + t * cfg_.token_dim),
        {n * t, cfg_.token_dim});

    tokens = attn_.forward(tokens, t);
    tokens = ffn_.forward(tokens);
    Tensor pooled = mean_pool_blocks(tokens, t);

    Tensor proj = projector_.forward(concat_cols(cls, pooled));
    proj = leaky_relu(proj, cfg_.leaky_slope);
    return dropout(proj, cfg_.dropout_p, rng, train);
}

std::vector<Tensor> Encoder::parameters() const {
    std::vector<Tensor> p;
    backbone_.collect(p);
    attn_.collect(p);
    ffn_.collect(p);
    projector_.collect(p);
    return p;
}

std::vector<Tensor> Encoder::trainable_parameters() const {
    std::vector<Tensor> p;
    if (!cfg_.freeze_backbone) backbone_.collect(p);
    attn_.collect(p);
    ffn_.collect(p);
    projector_.collect(p);
    return p;
}

namespace {

void name_linear(std::vector<std::pair<std::string, Tensor>>& out,
                 const std::string& prefix, const Linear& l) {
    out.emplace_back(prefix + ".weight", l.weight);
    out.emplace_back(prefix + ".bias", l.bias);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> Encoder::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    name_linear(out, "encoder.backbone", backbone_);
    name_linear(out, "encoder.attn.wq", attn_.wq);
    name_linear(out, "encoder.attn.wk", attn_.wk);
    name_linear(out, "encoder.attn.wv", attn_.wv);
    name_linear(out, "encoder.attn.wo", attn_.wo);
    name_linear(out, "encoder.ffn.in", ffn_.in);
    name_linear(out, "encoder.ffn.out", ffn_.out);
    name_linear(out, "encoder.projector", projector_);
    return out;
}

Predictor::Predictor(PredictorConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    l1_ = Linear(cfg_.latent_dim, cfg_.hidden, rng);
    l2_ = Linear(cfg_.hidden, cfg_.n_classes, rng);
}

Tensor Predictor::forward(const Tensor& latent) const {
    require(latent.cols() == cfg_.latent_dim, "Predictor: latent width mismatch");
    return l2_.forward(leaky_relu(l1_.forward(latent), 0.01));
}

std::vector<Tensor> Predictor::parameters() const {
    std::vector<Tensor> p;
    l1_.collect(p);
    l2_.collect(p);
    return p;
}

std::vector<std::pair<std::string, Tensor>> Predictor::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    name_linear(out, "predictor.l1", l1_);
    name_linear(out, "predictor.l2", l2_);
    return out;
}

Discriminator::Discriminator(DiscriminatorConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    l1_ = Linear(cfg_.input_dim, cfg_.hidden, rng);
    l2_ = Linear(cfg_.hidden, cfg_.hidden, rng);
    l3_ = Linear(cfg_.hidden, 1, rng);
}

Tensor Discriminator::forward(const Tensor& probs) const {
    require(probs.cols() == cfg_.input_dim, "Discriminator: input width mismatch");
    Tensor h = relu(l1_.forward(probs));
    h = relu(l2_.forward(h));
    return l3_.forward(h);
}

std::vector<Tensor> Discriminator::parameters() const {
    std::vector<Tensor> p;
    l1_.collect(p);
    l2_.collect(p);
    l3_.collect(p);
    return p;
}

std::vector<std::pair<std::string, Tensor>> Discriminator::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    name_linear(out, "discriminator.l1", l1_);
    name_linear(out, "discriminator.l2", l2_);
    name_linear(out, "discriminator.l3", l3_);
    return out;
}

// ---- checkpoint io ----

namespace {

constexpr uint32_t kMagic = 0x4354494Du;  // "MITC" little-endian
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& f, uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& f) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!f) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    write_u32(f, kMagic);
    write_u32(f, kVersion);
    write_u32(f, static_cast<uint32_t>(params.size()));
    for (const auto& [name, tensor] : params) {
        write_u32(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Shape& shape = tensor.shape();
        write_u32(f, static_cast<uint32_t>(shape.size()));
        for (int d : shape) write_u32(f, static_cast<uint32_t>(d));
        const auto& values = tensor.values();
        f.write(reinterpret_cast<const char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    if (read_u32(f) != kMagic) throw std::runtime_error("checkpoint: bad magic");
    if (read_u32(f) != kVersion) throw std::runtime_error("checkpoint: bad version");
    const uint32_t count = read_u32(f);
    if (count != params.size()) {
        throw std::runtime_error("checkpoint: parameter count mismatch");
    }
    for (const auto& [name, tensor] : params) {
        const uint32_t name_len = read_u32(f);
        std::string stored(name_len, '\0');
        f.read(stored.data(), name_len);
        if (!f || stored != name) {
            throw std::runtime_error("checkpoint: expected parameter " + name);
        }
        const uint32_t rank = read_u32(f);
        Shape shape(rank);
        for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(read_u32(f));
        Tensor t = tensor;
        if (shape != t.shape()) {
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        }
        auto& values = t.mutable_values();
        f.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint: truncated values for " + name);
    }
}

}  // namespace miturbo::nn
