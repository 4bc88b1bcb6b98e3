#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "miturbo/data.hpp"

using namespace miturbo::data;
using doctest::Approx;

namespace fs = std::filesystem;

namespace {

void put_be32(std::ofstream& f, uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

struct IdxFixture {
    fs::path images = fs::temp_directory_path() / "miturbo_test_images.idx";
    fs::path labels = fs::temp_directory_path() / "miturbo_test_labels.idx";

    // 4 images of 3x2, pixel value = linear index, labels 0..3.
    void write(bool truncate_images = false, uint32_t image_magic = 0x00000803,
               uint32_t label_count = 4) const {
        {
            std::ofstream f(images, std::ios::binary | std::ios::trunc);
            put_be32(f, image_magic);
            put_be32(f, 4);
            put_be32(f, 3);
            put_be32(f, 2);
            const int total = truncate_images ? 20 : 24;
            for (int i = 0; i < total; ++i) {
                const unsigned char px = static_cast<unsigned char>(i * 10);
                f.write(reinterpret_cast<const char*>(&px), 1);
            }
        }
        {
            std::ofstream f(labels, std::ios::binary | std::ios::trunc);
            put_be32(f, 0x00000801);
            put_be32(f, label_count);
            for (uint32_t i = 0; i < label_count; ++i) {
                const unsigned char lab = static_cast<unsigned char>(i % 4);
                f.write(reinterpret_cast<const char*>(&lab), 1);
            }
        }
    }
    ~IdxFixture() {
        std::error_code ec;
        fs::remove(images, ec);
        fs::remove(labels, ec);
    }
};

}  // namespace

TEST_CASE("load_idx round trip") {
    IdxFixture fx;
    fx.write();
    const Dataset d = load_idx(fx.images.string(), fx.labels.string());
    CHECK(d.n == 4);
    CHECK(d.height == 3);
    CHECK(d.width == 2);
    CHECK(d.dim == 6);
    CHECK(d.image_like());
    CHECK(d.labels == std::vector<int>{0, 1, 2, 3});
    CHECK(d.values[0] == Approx(0.0));
    CHECK(d.values[1] == Approx(10.0 / 255.0));
    CHECK(d.values[23] == Approx(230.0 / 255.0));
    for (double v : d.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("load_idx error paths") {
    IdxFixture fx;
    SUBCASE("bad magic") {
        fx.write(false, 0x00000807);
        CHECK_THROWS_WITH_AS(load_idx(fx.images.string(), fx.labels.string()),
                             doctest::Contains("bad image magic"),
                             std::runtime_error);
    }
    SUBCASE("truncated payload names the byte counts") {
        fx.write(true);
        CHECK_THROWS_WITH_AS(load_idx(fx.images.string(), fx.labels.string()),
                             doctest::Contains("expected 24 bytes, got 20"),
                             std::runtime_error);
    }
    SUBCASE("image/label count mismatch") {
        fx.write(false, 0x00000803, 5);
        CHECK_THROWS_WITH_AS(load_idx(fx.images.string(), fx.labels.string()),
                             doctest::Contains("count mismatch"),
                             std::runtime_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS(load_idx("/nonexistent.idx", fx.labels.string()));
    }
}

TEST_CASE("gen_blobs determinism and geometry") {
    const Dataset a = gen_blobs(10, 20, 16, 6.0, 99);
    const Dataset b = gen_blobs(10, 20, 16, 6.0, 99);
    CHECK(a.values == b.values);
    CHECK(a.labels == b.labels);
    CHECK(a.n == 200);
    CHECK(a.dim == 16);
    CHECK(a.n_classes == 10);
    CHECK_FALSE(a.image_like());

    const Dataset c = gen_blobs(10, 20, 16, 6.0, 100);
    CHECK(a.values != c.values);

    // Class means must be ~separation apart (unit noise, 20 samples).
    std::vector<std::vector<double>> means(10, std::vector<double>(16, 0.0));
    for (int i = 0; i < a.n; ++i) {
        for (int k = 0; k < 16; ++k) means[a.labels[i]][k] += a.values[i * 16 + k];
    }
    for (auto& m : means) {
        for (double& v : m) v /= 20.0;
    }
    for (int c1 = 0; c1 < 10; ++c1) {
        for (int c2 = c1 + 1; c2 < 10; ++c2) {
            double sq = 0.0;
            for (int k = 0; k < 16; ++k) {
                const double d = means[c1][k] - means[c2][k];
                sq += d * d;
            }
            CHECK(std::sqrt(sq) > 6.0 - 2.0);  // sample-mean noise slack
        }
    }
}

TEST_CASE("gen_blobs separation zero is chance level") {
    const Dataset d = gen_blobs(4, 50, 3, 0.0, 5);
    // All centres coincide: nearest-class-mean classification cannot beat
    // chance by a wide margin. Check the means are all near the origin.
    for (int c = 0; c < 4; ++c) {
        double norm = 0.0;
        std::vector<double> mean(3, 0.0);
        for (int i = 0; i < d.n; ++i) {
            if (d.labels[i] != c) continue;
            for (int k = 0; k < 3; ++k) mean[k] += d.values[i * 3 + k];
        }
        for (double v : mean) norm += (v / 50.0) * (v / 50.0);
        CHECK(std::sqrt(norm) < 1.0);
    }
}

TEST_CASE("gen_blobs separated clusters admit a near-perfect linear rule") {
    // Sanity oracle: nearest class centre on held-out points.
    const Dataset d = gen_blobs(10, 40, 2, 10.0, 31);  // low-dim fallback path
    std::vector<std::vector<double>> means(10, std::vector<double>(2, 0.0));
    std::vector<int> counts(10, 0);
    for (int i = 0; i < d.n; i += 2) {  // half as "train"
        for (int k = 0; k < 2; ++k) means[d.labels[i]][k] += d.values[i * 2 + k];
        ++counts[d.labels[i]];
    }
    for (int c = 0; c < 10; ++c) {
        for (double& v : means[c]) v /= counts[c];
    }
    int correct = 0, total = 0;
    for (int i = 1; i < d.n; i += 2) {  // other half as "test"
        double best = 1e300;
        int arg = -1;
        for (int c = 0; c < 10; ++c) {
            double sq = 0.0;
            for (int k = 0; k < 2; ++k) {
                const double diff = d.values[i * 2 + k] - means[c][k];
                sq += diff * diff;
            }
            if (sq < best) {
                best = sq;
                arg = c;
            }
        }
        correct += (arg == d.labels[i]);
        ++total;
    }
    CHECK(static_cast<double>(correct) / total > 0.99);
}

TEST_CASE("split_per_class") {
    const Dataset d = gen_blobs(3, 10, 4, 5.0, 1);
    const auto [train, test] = split_per_class(d, 8);
    CHECK(train.n == 24);
    CHECK(test.n == 6);
    CHECK(train.n_classes == 3);
    std::vector<int> tc(3, 0);
    for (int lab : test.labels) ++tc[lab];
    CHECK(tc == std::vector<int>{2, 2, 2});
}

TEST_CASE("stratified_subset balanced counts") {
    const Dataset d = gen_blobs(10, 50, 4, 5.0, 2);
    Rng rng(3);
    const auto subset = stratified_subset(d, 100, rng);
    CHECK(subset.indices.size() == 100);
    for (int c : subset.per_class_count) CHECK(c == 10);
    // Unique indices.
    auto sorted = subset.indices;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());

    // Uneven size: counts differ by at most one.
    Rng rng2(4);
    const auto odd = stratified_subset(d, 103, rng2);
    int lo = 1000, hi = 0;
    for (int c : odd.per_class_count) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    CHECK(hi - lo <= 1);
}

TEST_CASE("dual sampler") {
    const Dataset d = gen_blobs(5, 40, 4, 5.0, 7);
    Rng srng(8);
    auto subset = stratified_subset(d, 20, srng);

    SUBCASE("reproducible per seed, independent streams") {
        DualSampler s1(d, subset, 10, 16, 42);
        DualSampler s2(d, subset, 10, 16, 42);
        for (int step = 0; step < 5; ++step) {
            const auto a = s1.next();
            const auto b = s2.next();
            CHECK(a.labelled_x == b.labelled_x);
            CHECK(a.labelled_y == b.labelled_y);
            CHECK(a.unlabelled_x == b.unlabelled_x);
        }
        DualSampler s3(d, subset, 10, 16, 43);
        CHECK(s3.next().unlabelled_x != s1.next().unlabelled_x);
    }
    SUBCASE("unlabelled epoch covers the whole dataset") {
        DualSampler s(d, subset, 4, d.n, 11);
        const auto batch = s.next();
        CHECK(batch.n_unlabelled == d.n);
        // Sort rows by first coordinate multiset equality.
        std::vector<double> got, want;
        for (int i = 0; i < d.n; ++i) {
            got.push_back(batch.unlabelled_x[i * d.dim]);
            want.push_back(d.values[i * d.dim]);
        }
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        CHECK(got == want);
    }
    SUBCASE("labelled part draws only subset members with labels kept") {
        DualSampler s(d, subset, 50, 8, 12);
        const auto batch = s.next();
        CHECK(batch.labelled_y.size() == 50);
        for (std::size_t i = 0; i < batch.labelled_y.size(); ++i) {
            // Every labelled row matches some subset row with that label.
            bool found = false;
            for (int idx : subset.indices) {
                if (d.labels[idx] != batch.labelled_y[i]) continue;
                bool same = true;
                for (int k = 0; k < d.dim; ++k) {
                    if (d.values[idx * d.dim + k] !=
                        batch.labelled_x[i * d.dim + k]) {
                        same = false;
                        break;
                    }
                }
                if (same) {
                    found = true;
                    break;
                }
            }
            CHECK(found);
        }
    }
    SUBCASE("steps per epoch") {
        DualSampler s(d, subset, 10, 16, 13);
        CHECK(s.steps_per_epoch() == d.n / 16);
    }
}

TEST_CASE("augment identity when disabled") {
    AugmentationConfig cfg;  // everything off
    cfg.clamp_output = false;
    Rng rng(1);
    const std::vector<double> x{0.1, 0.5, -0.2, 1.4};
    CHECK(augment(x, 2, 0, 0, cfg, rng) == x);
}

TEST_CASE("augment image ops preserve shape and range") {
    auto cfg = AugmentationConfig::image_defaults(true);
    Rng rng(2);
    std::vector<double> img(5 * 8 * 8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (double& v : img) v = unit(rng);
    const auto out = augment(img, 5, 8, 8, cfg, rng);
    CHECK(out.size() == img.size());
    for (double v : out) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("flip never applied when flip_allowed is false") {
    AugmentationConfig cfg;
    cfg.horizontal_flip = true;
    cfg.flip_allowed = false;  // digits
    Rng rng(3);
    // Asymmetric image: any flip would change it.
    std::vector<double> img(4 * 4, 0.0);
    img[0] = 1.0;
    for (int t = 0; t < 50; ++t) {
        CHECK(augment(img, 1, 4, 4, cfg, rng) == img);
    }
}

TEST_CASE("vector data accepts only noise") {
    auto cfg = AugmentationConfig::vector_defaults(0.5);
    Rng rng(4);
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const auto out = augment(x, 2, 0, 0, cfg, rng);
    CHECK(out.size() == 4);
    CHECK(out != x);  // noise applied, no clamp
    double maxdev = 0.0;
    for (int i = 0; i < 4; ++i) maxdev = std::max(maxdev, std::abs(out[i] - x[i]));
    CHECK(maxdev < 5.0);

    auto bad = AugmentationConfig::image_defaults(true);
    CHECK_THROWS(augment(x, 2, 0, 0, bad, rng));
}

TEST_CASE("augmentation is deterministic per rng seed") {
    auto cfg = AugmentationConfig::image_defaults(false);
    std::vector<double> img(3 * 6 * 6);
    Rng fill(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (double& v : img) v = unit(fill);
    Rng r1(9), r2(9);
    CHECK(augment(img, 3, 6, 6, cfg, r1) == augment(img, 3, 6, 6, cfg, r2));
}
