#include "miturbo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace miturbo::trainer {

using densities::RescaleKind;
using nn::Tensor;

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Evaluates one loss component; a non-finite value or an arithmetic error
// inside the forward pass aborts naming the component.
template <typename Fn>
Tensor guarded(const char* component, int64_t step, Fn&& fn) {
    try {
        Tensor t = fn();
        if (!std::isfinite(t.item())) {
            throw TrainAbort(std::string("non-finite loss component '") + component +
                             "' at step " + std::to_string(step));
        }
        return t;
    } catch (const TrainAbort&) {
        throw;
    } catch (const std::exception& e) {
        throw TrainAbort(std::string("loss component '") + component +
                         "' failed at step " + std::to_string(step) + ": " +
                         e.what());
    }
}

}  // namespace

void TrainConfig::validate() const {
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(labelled_batch >= 0, "TrainConfig: labelled_batch must be >= 0");
    require(base_lr > 0.0 && std::isfinite(base_lr), "TrainConfig: bad base_lr");
    require(warmup_steps >= 0, "TrainConfig: warmup_steps must be >= 0");
    require(warmup_factor > 0.0 && warmup_factor <= 1.0,
            "TrainConfig: warmup_factor must be in (0,1]");
    require(weight_decay >= 0.0, "TrainConfig: weight_decay must be >= 0");
    require(!seeds.empty(), "TrainConfig: seeds must be non-empty");
    require(subset_size >= 1, "TrainConfig: subset_size must be >= 1");
    weights.validate();
}

Trainer::Trainer(const data::Dataset& train, const data::Dataset& test,
                 TrainConfig cfg, nn::EncoderConfig encoder_cfg,
                 nn::PredictorConfig predictor_cfg,
                 nn::DiscriminatorConfig discriminator_cfg,
                 data::AugmentationConfig augment_cfg, uint64_t seed)
    : train_(&train),
      test_(&test),
      cfg_(std::move(cfg)),
      augment_cfg_(augment_cfg),
      train_rng_(seed ^ 0xA3C59AC2F1E3B7C1ull) {
    cfg_.validate();
    require(train.dim == encoder_cfg.input_dim, "Trainer: encoder input dim mismatch");
    require(encoder_cfg.latent_dim() == predictor_cfg.latent_dim,
            "Trainer: latent dim mismatch");
    require(predictor_cfg.n_classes == discriminator_cfg.input_dim,
            "Trainer: discriminator input dim mismatch");
    require(train.n_classes <= predictor_cfg.n_classes,
            "Trainer: dataset has more classes than the predictor");

    nn::Rng init_rng(seed);
    encoder_ = std::make_unique<nn::Encoder>(encoder_cfg, init_rng);
    predictor_ = std::make_unique<nn::Predictor>(predictor_cfg, init_rng);
    discriminator_ = std::make_unique<nn::Discriminator>(discriminator_cfg, init_rng);

    std::vector<Tensor> model_params = encoder_->trainable_parameters();
    for (const Tensor& p : predictor_->parameters()) model_params.push_back(p);
    nn::AdamWConfig opt_cfg;
    opt_cfg.lr = cfg_.base_lr;
    opt_cfg.weight_decay = cfg_.weight_decay;
    model_opt_ = std::make_unique<nn::AdamW>(std::move(model_params), opt_cfg);
    disc_opt_ = std::make_unique<nn::AdamW>(discriminator_->parameters(), opt_cfg);

    nn::Rng subset_rng(seed ^ 0x6A09E667F3BCC908ull);
    subset_ = data::stratified_subset(train, cfg_.subset_size, subset_rng);

    const int n_labelled = cfg_.labelled_batch > 0
                               ? cfg_.labelled_batch
                               : std::min(cfg_.subset_size, 128);
    sampler_ = std::make_unique<data::DualSampler>(train, subset_, n_labelled,
                                                   cfg_.batch_size, seed);

    prior_weights_.assign(predictor_cfg.n_classes, 1.0);
    if (cfg_.prior == PriorKind::Empirical) {
        for (int c = 0; c < train.n_classes; ++c) {
            prior_weights_[c] = static_cast<double>(subset_.per_class_count[c]);
        }
        for (int c = train.n_classes; c < predictor_cfg.n_classes; ++c) {
            prior_weights_[c] = 0.0;
        }
    }
}

Tensor Trainer::rescale_probs(const Tensor& logits) const {
    return cfg_.rescale == RescaleKind::Softmax ? nn::softmax_rows(logits)
                                                : nn::sigmoid(logits);
}

Tensor Trainer::sample_prior(int rows) {
    const int c = predictor_->config().n_classes;
    std::discrete_distribution<int> pick(prior_weights_.begin(), prior_weights_.end());
    std::vector<double> onehots(static_cast<std::size_t>(rows) * c, 0.0);
    for (int i = 0; i < rows; ++i) {
        onehots[static_cast<std::size_t>(i) * c + pick(train_rng_)] = 1.0;
    }
    return Tensor::from({rows, c}, std::move(onehots));
}

StepRecord Trainer::train_step(const data::DualBatch& batch) {
    const double lr =
        nn::warmup_lr(step_, cfg_.base_lr, cfg_.warmup_steps, cfg_.warmup_factor);
    StepRecord rec;
    rec.step = step_;
    rec.epoch = epoch_;
    rec.lr = lr;

    const int dim = train_->dim;
    const auto& w = cfg_.weights;
    const bool critic_on = w.lambda_critic > 0.0;
    const bool augment_on = w.lambda_augment > 0.0;
    const bool latent_on = w.lambda_latent > 0.0;
    const bool twin_unlabelled = cfg_.variant == LossVariant::CatTwin &&
                                 cfg_.twin_denominator == TwinDenominator::Unlabelled;

    // One unlabelled forward shared by the critic, the twin denominator and
    // the augmentation anchors; computed lazily inside the first component
    // that needs it so failures are attributed to that component.
    Tensor z_u, logits_u, probs_u;
    auto ensure_unlabelled = [&]() {
        if (z_u.defined()) return;
        Tensor x_u = Tensor::from({batch.n_unlabelled, dim}, batch.unlabelled_x);
        z_u = encoder_->forward(x_u, train_rng_, true);
        logits_u = predictor_->forward(z_u);
        if (critic_on) probs_u = rescale_probs(logits_u);
    };

    // (a) Discriminator half-step on the current model outputs; the model
    // is frozen here (loss_critic_disc detaches its input).
    if (critic_on) {
        Tensor disc_loss = guarded("loss_critic_disc", step_, [&] {
            ensure_unlabelled();
            Tensor prior = sample_prior(batch.n_unlabelled);
            return losses::loss_critic_disc(*discriminator_, probs_u, prior);
        });
        rec.critic_disc = disc_loss.item();
        disc_loss.backward();
        disc_opt_->step(lr);
        disc_opt_->zero_grad();
    }

    // (b) Model step on the combined loss.
    Tensor z_l;
    Tensor supervised = guarded("loss_supervised", step_, [&] {
        Tensor x_l = Tensor::from({batch.n_labelled, dim}, batch.labelled_x);
        z_l = encoder_->forward(x_l, train_rng_, true);
        Tensor logits_l = predictor_->forward(z_l);
        switch (cfg_.variant) {
            case LossVariant::CatTwin:
                if (twin_unlabelled) ensure_unlabelled();
                return losses::loss_cat_twin(
                    logits_l, batch.labelled_y,
                    twin_unlabelled ? logits_u : logits_l, cfg_.rescale);
            case LossVariant::BinCross:
                return losses::loss_bin_cross(logits_l, batch.labelled_y,
                                              cfg_.rescale);
            case LossVariant::CatCross:
            default:
                return losses::loss_cat_cross(logits_l, batch.labelled_y,
                                              cfg_.rescale);
        }
    });
    rec.supervised = supervised.item();

    Tensor critic_model, latent, augment_loss;
    if (critic_on) {
        critic_model = guarded("loss_critic_model", step_, [&] {
            return losses::loss_critic_model(*discriminator_, probs_u);
        });
        rec.critic_model = critic_model.item();
    }
    if (latent_on) {
        latent = guarded("loss_latent", step_, [&] {
            auto lat =
                losses::loss_latent_supervised(z_l, batch.labelled_y, train_rng_);
            rec.latent_skipped = lat.anchors_skipped;
            if (lat.degenerate) ++degenerate_batches_;
            return lat.loss;
        });
        rec.latent = latent.item();
    }
    if (augment_on) {
        augment_loss = guarded("loss_augment", step_, [&] {
            ensure_unlabelled();
            auto augmented_x =
                data::augment(batch.unlabelled_x, batch.n_unlabelled,
                              train_->height, train_->width, augment_cfg_,
                              train_rng_);
            Tensor x_a =
                Tensor::from({batch.n_unlabelled, dim}, std::move(augmented_x));
            // Target views run without dropout: the alignment signal should
            // come from the input augmentation, not from dropout masks.
            Tensor z_a = encoder_->forward(x_a, train_rng_, false).detach();
            return losses::loss_latent_augment(z_u, z_a);
        });
        rec.augment = augment_loss.item();
    }

    Tensor total = guarded("loss_total", step_, [&] {
        return losses::loss_total(supervised, critic_on ? &critic_model : nullptr,
                                  latent_on ? &latent : nullptr,
                                  augment_on ? &augment_loss : nullptr, w);
    });
    rec.total = total.item();

    total.backward();
    model_opt_->step(lr);
    model_opt_->zero_grad();
    // The critic term routed gradients through the discriminator graph;
    // those are not applied, only cleared.
    disc_opt_->zero_grad();

    ++step_;
    return rec;
}

double Trainer::evaluate_accuracy() const {
    return trainer::evaluate_accuracy(*encoder_, *predictor_, *test_);
}

RunMetrics Trainer::run() {
    const auto t0 = std::chrono::steady_clock::now();
    RunMetrics metrics;
    const int steps_per_epoch = sampler_->steps_per_epoch();
    require(steps_per_epoch >= 1, "Trainer: batch larger than dataset");
    for (epoch_ = 0; epoch_ < cfg_.epochs; ++epoch_) {
        for (int s = 0; s < steps_per_epoch; ++s) {
            metrics.steps.push_back(train_step(sampler_->next()));
        }
        metrics.epoch_accuracy.push_back(evaluate_accuracy());
    }
    metrics.final_accuracy = metrics.epoch_accuracy.back();
    metrics.degenerate_batches = degenerate_batches_;
    metrics.total_steps = step_;
    metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return metrics;
}

double evaluate_accuracy(const nn::Encoder& encoder, const nn::Predictor& predictor,
                         const data::Dataset& test) {
    if (test.n == 0) throw std::invalid_argument("evaluate_accuracy: empty test set");
    nn::Rng unused(0);  // eval mode draws nothing
    constexpr int kChunk = 256;
    int correct = 0;
    for (int start = 0; start < test.n; start += kChunk) {
        const int rows = std::min(kChunk, test.n - start);
        std::vector<double> chunk(
            test.values.begin() + static_cast<std::size_t>(start) * test.dim,
            test.values.begin() + static_cast<std::size_t>(start + rows) * test.dim);
        Tensor x = Tensor::from({rows, test.dim}, std::move(chunk));
        Tensor logits = predictor.forward(encoder.forward(x, unused, false));
        const auto& v = logits.values();
        const int c = logits.cols();
        for (int i = 0; i < rows; ++i) {
            const double* row = &v[static_cast<std::size_t>(i) * c];
            const int pred = static_cast<int>(
                std::max_element(row, row + c) - row);  // first max wins ties
            if (pred == test.labels[start + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / test.n;
}

// ---- ablation ----

const char* to_string(LossVariant v) {
    switch (v) {
        case LossVariant::CatCross: return "cat-cross";
        case LossVariant::CatTwin: return "cat-twin";
        case LossVariant::BinCross: return "bin-cross";
    }
    return "?";
}

const char* to_string(densities::RescaleKind k) {
    return k == RescaleKind::Softmax ? "softmax" : "sigmoid";
}

std::vector<AblationCell> default_ablation_cells(double lambda_critic,
                                                 double lambda_latent,
                                                 double lambda_augment) {
    using losses::LossWeights;
    std::vector<AblationCell> cells;
    cells.push_back({"baseline", LossVariant::CatCross, RescaleKind::Softmax, {}});
    cells.push_back({"cat-twin", LossVariant::CatTwin, RescaleKind::Softmax, {}});
    cells.push_back({"cat-twin+sigmoid", LossVariant::CatTwin, RescaleKind::Sigmoid, {}});
    cells.push_back({"bin-cross", LossVariant::BinCross, RescaleKind::Sigmoid, {}});
    LossWeights w;
    w.lambda_critic = lambda_critic;
    cells.push_back({"+critic", LossVariant::BinCross, RescaleKind::Sigmoid, w});
    w.lambda_latent = lambda_latent;
    cells.push_back({"+latent", LossVariant::BinCross, RescaleKind::Sigmoid, w});
    w.lambda_augment = lambda_augment;
    cells.push_back({"+augment", LossVariant::BinCross, RescaleKind::Sigmoid, w});
    return cells;
}

std::vector<CellResult> run_ablation(
    const data::Dataset& train, const data::Dataset& test,
    const TrainConfig& base_cfg, const nn::EncoderConfig& encoder_cfg,
    const nn::PredictorConfig& predictor_cfg,
    const nn::DiscriminatorConfig& discriminator_cfg,
    const data::AugmentationConfig& augment_cfg,
    const std::vector<AblationCell>& cells, const std::vector<int>& subset_sizes,
    const std::vector<uint64_t>& seeds, int threads) {
    require(!cells.empty() && !subset_sizes.empty() && !seeds.empty(),
            "run_ablation: empty grid");

    const std::size_t n_cells = cells.size() * subset_sizes.size();
    std::vector<CellResult> results(n_cells);
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        for (std::size_t si = 0; si < subset_sizes.size(); ++si) {
            CellResult& r = results[ci * subset_sizes.size() + si];
            r.cell = cells[ci];
            r.subset_size = subset_sizes[si];
            r.seeds = seeds;
            r.accuracies.assign(seeds.size(), std::nan(""));
            r.errors.assign(seeds.size(), "");
            r.runs.resize(seeds.size());
        }
    }

    const std::size_t n_jobs = n_cells * seeds.size();
    auto run_job = [&](std::size_t job) {
        const std::size_t cell_index = job / seeds.size();
        const std::size_t seed_index = job % seeds.size();
        CellResult& r = results[cell_index];
        TrainConfig cfg = base_cfg;
        cfg.variant = r.cell.variant;
        cfg.rescale = r.cell.rescale;
        cfg.weights = r.cell.weights;
        cfg.subset_size = r.subset_size;
        try {
            Trainer t(train, test, cfg, encoder_cfg, predictor_cfg,
                      discriminator_cfg, augment_cfg, seeds[seed_index]);
            r.runs[seed_index] = t.run();
            r.accuracies[seed_index] = r.runs[seed_index].final_accuracy;
        } catch (const std::exception& e) {
            r.errors[seed_index] = e.what();
        }
    };

    const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(n_jobs)));
    if (n_threads == 1) {
        for (std::size_t j = 0; j < n_jobs; ++j) run_job(j);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&, t]() {
                for (std::size_t j = t; j < n_jobs; j += n_threads) run_job(j);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (CellResult& r : results) {
        double best = -1.0, lo = 2.0, hi = -1.0;
        std::size_t best_i = 0;
        int ok = 0;
        for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
            const double a = r.accuracies[i];
            if (std::isnan(a)) continue;
            ++ok;
            if (a > best) {
                best = a;
                best_i = i;
            }
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
        r.failed = (ok == 0);
        if (!r.failed) {
            r.best_accuracy = best;
            r.best_seed = r.seeds[best_i];
            r.acc_min = lo;
            r.acc_max = hi;
        }
    }
    return results;
}

}  // namespace miturbo::trainer
