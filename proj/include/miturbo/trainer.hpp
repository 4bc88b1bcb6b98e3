#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "miturbo/data.hpp"
#include "miturbo/losses.hpp"
#include "miturbo/networks.hpp"
#include "miturbo/optim.hpp"

namespace miturbo::trainer {

enum class LossVariant { CatCross, CatTwin, BinCross };
enum class TwinDenominator { Unlabelled, Labelled };
enum class PriorKind { Uniform, Empirical };

struct TrainConfig {
    int epochs = 5;
    int batch_size = 128;    // unlabelled stream
    int labelled_batch = 0;  // 0 -> min(subset_size, 128)
    double base_lr = 5e-5;
    int warmup_steps = 150;
    double warmup_factor = 0.001;
    double weight_decay = 0.01;
    std::vector<uint64_t> seeds = {42, 1337, 3435};
    LossVariant variant = LossVariant::CatCross;
    densities::RescaleKind rescale = densities::RescaleKind::Softmax;
    losses::LossWeights weights;
    int subset_size = 100;
    TwinDenominator twin_denominator = TwinDenominator::Unlabelled;
    PriorKind prior = PriorKind::Uniform;

    void validate() const;
};

struct StepRecord {
    int64_t step = 0;
    int epoch = 0;
    double lr = 0.0;
    double total = 0.0;
    double supervised = 0.0;
    double critic_model = 0.0;
    double critic_disc = 0.0;
    double latent = 0.0;
    double augment = 0.0;
    int latent_skipped = 0;
};

struct RunMetrics {
    std::vector<StepRecord> steps;
    std::vector<double> epoch_accuracy;
    double final_accuracy = 0.0;
    int degenerate_batches = 0;
    int64_t total_steps = 0;
    // Console diagnostics only; metrics files must stay byte-identical
    // across reruns, so wall time is never written to them.
    double wall_seconds = 0.0;
};

// A loss went non-finite; the message names the offending component.
struct TrainAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One seeded training run over a train/test dataset pair.
class Trainer {
public:
    Trainer(const data::Dataset& train, const data::Dataset& test,
            TrainConfig cfg, nn::EncoderConfig encoder_cfg,
            nn::PredictorConfig predictor_cfg,
            nn::DiscriminatorConfig discriminator_cfg,
            data::AugmentationConfig augment_cfg, uint64_t seed);

    RunMetrics run();

    // One optimisation step (discriminator half-step then model step);
    // exposed for tests.
    StepRecord train_step(const data::DualBatch& batch);

    double evaluate_accuracy() const;

    nn::Encoder& encoder() { return *encoder_; }
    nn::Predictor& predictor() { return *predictor_; }
    nn::Discriminator& discriminator() { return *discriminator_; }
    data::DualSampler& sampler() { return *sampler_; }
    const data::LabelledSubset& subset() const { return subset_; }

private:
    nn::Tensor rescale_probs(const nn::Tensor& logits) const;
    nn::Tensor sample_prior(int rows);

    const data::Dataset* train_;
    const data::Dataset* test_;
    TrainConfig cfg_;
    data::AugmentationConfig augment_cfg_;
    data::LabelledSubset subset_;
    std::unique_ptr<nn::Encoder> encoder_;
    std::unique_ptr<nn::Predictor> predictor_;
    std::unique_ptr<nn::Discriminator> discriminator_;
    std::unique_ptr<nn::AdamW> model_opt_;
    std::unique_ptr<nn::AdamW> disc_opt_;
    std::unique_ptr<data::DualSampler> sampler_;
    nn::Rng train_rng_;
    std::vector<double> prior_weights_;
    int64_t step_ = 0;
    int epoch_ = 0;
    int degenerate_batches_ = 0;
};

// Argmax accuracy on a test set (eval mode; ties go to the lowest class).
double evaluate_accuracy(const nn::Encoder& encoder, const nn::Predictor& predictor,
                         const data::Dataset& test);

// ---- ablation protocol ----

struct AblationCell {
    std::string name;
    LossVariant variant = LossVariant::CatCross;
    densities::RescaleKind rescale = densities::RescaleKind::Softmax;
    losses::LossWeights weights;
};

struct CellResult {
    AblationCell cell;
    int subset_size = 0;
    std::vector<uint64_t> seeds;
    std::vector<double> accuracies;    // NaN for failed seeds
    std::vector<std::string> errors;   // empty string when the run succeeded
    std::vector<RunMetrics> runs;      // empty metrics for failed seeds
    bool failed = false;               // no seed finished
    double best_accuracy = 0.0;
    uint64_t best_seed = 0;
    double acc_min = 0.0;
    double acc_max = 0.0;
};

// Runs every cell x subset size x seed, three nested loops flattened into a
// deterministic job list; failures are recorded and the sweep continues.
// `threads` > 1 fans independent runs out over worker threads.
std::vector<CellResult> run_ablation(
    const data::Dataset& train, const data::Dataset& test,
    const TrainConfig& base_cfg, const nn::EncoderConfig& encoder_cfg,
    const nn::PredictorConfig& predictor_cfg,
    const nn::DiscriminatorConfig& discriminator_cfg,
    const data::AugmentationConfig& augment_cfg,
    const std::vector<AblationCell>& cells, const std::vector<int>& subset_sizes,
    const std::vector<uint64_t>& seeds, int threads);

// The activation sequence mirroring the ablation bar structure: supervised
// baseline, twin loss, sigmoid rescale, binary cross-entropy, then critic,
// latent and augmentation terms switched on one by one.
std::vector<AblationCell> default_ablation_cells(double lambda_critic,
                                                 double lambda_latent,
                                                 double lambda_augment);

const char* to_string(LossVariant v);
const char* to_string(densities::RescaleKind k);

}  // namespace miturbo::trainer
