#include "miturbo/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace miturbo::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        bad_key(key, "expected a number, got '" + v + "'");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return static_cast<int>(d);
    } catch (const std::exception&) {
        bad_key(key, "expected an integer, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        bad_key(key, "expected an unsigned integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_key(key, "expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    // Defaults for a fresh document: every weight off, noise-only augment.
    cfg.augment = data::AugmentationConfig{};
    cfg.augment.gaussian_noise = true;
    cfg.augment.noise_sigma = 0.25;

    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "dataset" && section != "encoder" && section != "predictor" &&
                section != "discriminator" && section != "train" &&
                section != "augment" && section != "ablation") {
                throw ConfigError("config: unknown section '" + section + "'");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qual = section.empty() ? key : section + "." + key;

        if (section == "dataset") {
            if (key == "type") {
                if (value != "blobs" && value != "idx") bad_key(qual, "must be blobs or idx");
                cfg.dataset.type = value;
            } else if (key == "classes") cfg.dataset.classes = parse_int(qual, value);
            else if (key == "per_class") cfg.dataset.per_class = parse_int(qual, value);
            else if (key == "dim") cfg.dataset.dim = parse_int(qual, value);
            else if (key == "separation") cfg.dataset.separation = parse_double(qual, value);
            else if (key == "seed") cfg.dataset.seed = parse_u64(qual, value);
            else if (key == "train_per_class") cfg.dataset.train_per_class = parse_int(qual, value);
            else if (key == "train_images") cfg.dataset.train_images = value;
            else if (key == "train_labels") cfg.dataset.train_labels = value;
            else if (key == "test_images") cfg.dataset.test_images = value;
            else if (key == "test_labels") cfg.dataset.test_labels = value;
            else bad_key(qual, "unknown key");
        } else if (section == "encoder") {
            if (key == "feature_dim") cfg.encoder.feature_dim = parse_int(qual, value);
            else if (key == "n_patch_tokens") cfg.encoder.n_patch_tokens = parse_int(qual, value);
            else if (key == "token_dim") cfg.encoder.token_dim = parse_int(qual, value);
            else if (key == "projector_hidden") cfg.encoder.projector_hidden = parse_int(qual, value);
            else if (key == "dropout") cfg.encoder.dropout_p = parse_double(qual, value);
            else if (key == "leaky_slope") cfg.encoder.leaky_slope = parse_double(qual, value);
            else if (key == "freeze_backbone") cfg.encoder.freeze_backbone = parse_bool(qual, value);
            else bad_key(qual, "unknown key");
        } else if (section == "predictor") {
            if (key == "hidden") cfg.predictor.hidden = parse_int(qual, value);
            else bad_key(qual, "unknown key");
        } else if (section == "discriminator") {
            if (key == "hidden") cfg.discriminator.hidden = parse_int(qual, value);
            else bad_key(qual, "unknown key");
        } else if (section == "train") {
            if (key == "epochs") cfg.train.epochs = parse_int(qual, value);
            else if (key == "batch_size") cfg.train.batch_size = parse_int(qual, value);
            else if (key == "labelled_batch") cfg.train.labelled_batch = parse_int(qual, value);
            else if (key == "base_lr") cfg.train.base_lr = parse_double(qual, value);
            else if (key == "warmup_steps") cfg.train.warmup_steps = parse_int(qual, value);
            else if (key == "warmup_factor") cfg.train.warmup_factor = parse_double(qual, value);
            else if (key == "weight_decay") cfg.train.weight_decay = parse_double(qual, value);
            else if (key == "seeds") {
                cfg.train.seeds.clear();
                for (const auto& s : split_list(value)) {
                    cfg.train.seeds.push_back(parse_u64(qual, s));
                }
                if (cfg.train.seeds.empty()) bad_key(qual, "needs at least one seed");
            } else if (key == "variant") {
                if (value == "cat-cross") cfg.train.variant = trainer::LossVariant::CatCross;
                else if (value == "cat-twin") cfg.train.variant = trainer::LossVariant::CatTwin;
                else if (value == "bin-cross") cfg.train.variant = trainer::LossVariant::BinCross;
                else bad_key(qual, "must be cat-cross, cat-twin or bin-cross");
            } else if (key == "rescale") {
                if (value == "softmax") cfg.train.rescale = densities::RescaleKind::Softmax;
                else if (value == "sigmoid") cfg.train.rescale = densities::RescaleKind::Sigmoid;
                else bad_key(qual, "must be softmax or sigmoid");
            } else if (key == "lambda_critic") cfg.train.weights.lambda_critic = parse_double(qual, value);
            else if (key == "lambda_latent") cfg.train.weights.lambda_latent = parse_double(qual, value);
            else if (key == "lambda_augment") cfg.train.weights.lambda_augment = parse_double(qual, value);
            else if (key == "subset_size") cfg.train.subset_size = parse_int(qual, value);
            else if (key == "twin_denominator") {
                if (value == "unlabelled") cfg.train.twin_denominator = trainer::TwinDenominator::Unlabelled;
                else if (value == "labelled") cfg.train.twin_denominator = trainer::TwinDenominator::Labelled;
                else bad_key(qual, "must be unlabelled or labelled");
            } else if (key == "prior") {
                if (value == "uniform") cfg.train.prior = trainer::PriorKind::Uniform;
                else if (value == "empirical") cfg.train.prior = trainer::PriorKind::Empirical;
                else bad_key(qual, "must be uniform or empirical");
            } else bad_key(qual, "unknown key");
        } else if (section == "augment") {
            if (key == "ops") {
                auto& a = cfg.augment;
                a.resize_crop = a.horizontal_flip = a.jitter = false;
                a.grayscale = a.blur = a.solarize = a.gaussian_noise = false;
                for (const auto& op : split_list(value)) {
                    if (op == "crop") a.resize_crop = true;
                    else if (op == "flip") a.horizontal_flip = true;
                    else if (op == "jitter") a.jitter = true;
                    else if (op == "grayscale") a.grayscale = true;
                    else if (op == "blur") a.blur = true;
                    else if (op == "solarize") a.solarize = true;
                    else if (op == "noise") a.gaussian_noise = true;
                    else if (op == "none") { /* all off */ }
                    else bad_key(qual, "unknown op '" + op + "'");
                }
            } else if (key == "flip_allowed") cfg.augment.flip_allowed = parse_bool(qual, value);
            else if (key == "crop_scale_min") cfg.augment.crop_scale_min = parse_double(qual, value);
            else if (key == "jitter_strength") cfg.augment.jitter_strength = parse_double(qual, value);
            else if (key == "blur_sigma_min") cfg.augment.blur_sigma_min = parse_double(qual, value);
            else if (key == "blur_sigma_max") cfg.augment.blur_sigma_max = parse_double(qual, value);
            else if (key == "solarize_threshold") cfg.augment.solarize_threshold = parse_double(qual, value);
            else if (key == "noise_sigma") cfg.augment.noise_sigma = parse_double(qual, value);
            else if (key == "clamp") {
                if (value == "auto") cfg.augment_clamp_auto = true;
                else {
                    cfg.augment_clamp_auto = false;
                    cfg.augment.clamp_output = parse_bool(qual, value);
                }
            } else bad_key(qual, "unknown key");
        } else if (section == "ablation") {
            if (key == "subset_sizes") {
                cfg.ablation_subset_sizes.clear();
                for (const auto& s : split_list(value)) {
                    cfg.ablation_subset_sizes.push_back(parse_int(qual, s));
                }
                if (cfg.ablation_subset_sizes.empty()) bad_key(qual, "needs at least one size");
            } else if (key == "lambda_critic") cfg.ablation_lambda_critic = parse_double(qual, value);
            else if (key == "lambda_latent") cfg.ablation_lambda_latent = parse_double(qual, value);
            else if (key == "lambda_augment") cfg.ablation_lambda_augment = parse_double(qual, value);
            else bad_key(qual, "unknown key");
        } else {
            bad_key(key, "key outside any section");
        }
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config not found: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::pair<data::Dataset, data::Dataset> load_datasets(const DatasetConfig& cfg) {
    if (cfg.type == "blobs") {
        data::Dataset all = data::gen_blobs(cfg.classes, cfg.per_class, cfg.dim,
                                            cfg.separation, cfg.seed);
        if (cfg.train_per_class >= cfg.per_class) {
            throw ConfigError("config key 'dataset.train_per_class': must leave a test split");
        }
        return data::split_per_class(all, cfg.train_per_class);
    }
    if (cfg.train_images.empty() || cfg.train_labels.empty() ||
        cfg.test_images.empty() || cfg.test_labels.empty()) {
        throw ConfigError("config key 'dataset.train_images': idx dataset needs all four paths");
    }
    return {data::load_idx(cfg.train_images, cfg.train_labels),
            data::load_idx(cfg.test_images, cfg.test_labels)};
}

void RunConfig::finalize(const data::Dataset& train_set) {
    encoder.input_dim = train_set.dim;
    predictor.latent_dim = encoder.latent_dim();
    predictor.n_classes = train_set.n_classes;
    discriminator.input_dim = train_set.n_classes;
    if (augment_clamp_auto) augment.clamp_output = train_set.image_like();
}

}  // namespace miturbo::cli
