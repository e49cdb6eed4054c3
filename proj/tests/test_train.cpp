#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "cfcnn/train.hpp"

using namespace cfcnn;

namespace {

// Small, fast configuration: 32x32 canvas, few images, few epochs.
RunConfig small_config(int epochs, double lambda, std::uint64_t seed) {
    RunConfig cfg;
    cfg.training.lambda_weight = lambda;
    cfg.training.num_groups = 4;
    cfg.training.target_layer = "conv4";
    cfg.training.random_seed = seed;
    cfg.num_classes = 2;
    cfg.epochs = epochs;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.test_fraction = 0.25;
    cfg.curve_points = 5;
    cfg.canvas = 32;
    cfg.data_n = 48;
    cfg.data_seed = 3;
    cfg.scene = default_scene_spec(2);
    cfg.scene.canvas = 32;
    for (auto& p : cfg.scene.parts) {
        p.anchor_x /= 2.0;
        p.anchor_y /= 2.0;
        p.size_min /= 2.0;
        p.size_max /= 2.0;
        p.jitter /= 2.0;
    }
    return cfg;
}

} // namespace

TEST_CASE("zero epochs yields a manifest with only the initial partition") {
    RunConfig cfg = small_config(0, 1.0, 1);
    const Dataset data = load_configured_dataset(cfg);
    auto [train_idx, test_idx] = split_dataset(data, cfg.test_fraction, 1);
    Model model = build_model(cfg.arch, "conv4", 2, 32, 32, 1);
    const RunManifest manifest = train(model, data, train_idx, cfg);
    CHECK(manifest.status == "completed");
    CHECK(manifest.epochs.empty());
    CHECK(manifest.initial_partition.size() == 4);
    // Evaluation of the untrained model still works (accuracy only checked
    // for being a probability).
    const EvaluationResult eval = evaluate(model, data, test_idx, cfg, "");
    CHECK(eval.accuracy >= 0.0);
    CHECK(eval.accuracy <= 1.0);
}

TEST_CASE("training records one partition per epoch and stays reproducible") {
    RunConfig cfg = small_config(2, 1.0, 5);
    const Dataset data = load_configured_dataset(cfg);
    auto [train_idx, test_idx] = split_dataset(data, cfg.test_fraction, 5);

    Model a = build_model(cfg.arch, "conv4", 2, 32, 32, 5);
    const RunManifest ma = train(a, data, train_idx, cfg);
    REQUIRE(ma.epochs.size() == 2);
    for (const auto& e : ma.epochs) {
        CHECK(e.partition.size() == 4);
        CHECK(e.group_loss < 0.0);
        CHECK(e.group_loss >= -4.0);
        CHECK(std::isfinite(e.ncut_value));
        // Partition invariants hold for the recorded groups.
        CHECK_NOTHROW(partition_from_groups(e.partition, 32));
    }

    Model b = build_model(cfg.arch, "conv4", 2, 32, 32, 5);
    const RunManifest mb = train(b, data, train_idx, cfg);
    for (std::size_t e = 0; e < ma.epochs.size(); ++e) {
        CHECK(ma.epochs[e].cls_loss == doctest::Approx(mb.epochs[e].cls_loss).epsilon(1e-6));
        CHECK(ma.epochs[e].group_loss ==
              doctest::Approx(mb.epochs[e].group_loss).epsilon(1e-6));
        CHECK(ma.epochs[e].partition == mb.epochs[e].partition);
    }
}

TEST_CASE("lambda 0 trains a plain classifier but still tracks the partition") {
    RunConfig cfg = small_config(1, 0.0, 7);
    const Dataset data = load_configured_dataset(cfg);
    auto [train_idx, test_idx] = split_dataset(data, cfg.test_fraction, 7);
    Model model = build_model(cfg.arch, "conv4", 2, 32, 32, 7);
    const RunManifest manifest = train(model, data, train_idx, cfg);
    REQUIRE(manifest.epochs.size() == 1);
    CHECK(manifest.epochs[0].partition.size() == 4);
    CHECK(manifest.epochs[0].group_loss < 0.0); // recorded even when inert
}

TEST_CASE("multi-category mode records the multi loss") {
    RunConfig cfg = small_config(1, 0.1, 9);
    cfg.training.task_mode = TaskMode::multi;
    cfg.training.beta_weight = 0.1;
    cfg.num_classes = 3;
    cfg.scene = default_scene_spec(3);
    cfg.scene.canvas = 32;
    for (auto& p : cfg.scene.parts) {
        p.anchor_x /= 2.0;
        p.anchor_y /= 2.0;
        p.size_min /= 2.0;
        p.size_max /= 2.0;
        p.jitter /= 2.0;
    }
    cfg.data_n = 48;
    const Dataset data = load_configured_dataset(cfg);
    auto [train_idx, test_idx] = split_dataset(data, cfg.test_fraction, 9);
    Model model = build_model(cfg.arch, "conv4", 3, 32, 32, 9);
    const RunManifest manifest = train(model, data, train_idx, cfg);
    REQUIRE(manifest.epochs.size() == 1);
    REQUIRE(manifest.epochs[0].multi_loss.has_value());
    CHECK(*manifest.epochs[0].multi_loss < 0.0);
    CHECK(*manifest.epochs[0].multi_loss >= -3.0);
}

TEST_CASE("divergence aborts with a partial manifest") {
    RunConfig cfg = small_config(3, 1.0, 11);
    cfg.optimizer = "sgd";
    cfg.learning_rate = 1e25; // guaranteed blow-up
    const Dataset data = load_configured_dataset(cfg);
    auto [train_idx, test_idx] = split_dataset(data, cfg.test_fraction, 11);
    Model model = build_model(cfg.arch, "conv4", 2, 32, 32, 11);
    const RunManifest manifest = train(model, data, train_idx, cfg);
    CHECK(manifest.status == "diverged");
    CHECK(manifest.epochs.size() < 3);
}

TEST_CASE("evaluation produces curves and files when masks exist") {
    RunConfig cfg = small_config(1, 1.0, 13);
    const Dataset data = load_configured_dataset(cfg);
    auto [train_idx, test_idx] = split_dataset(data, cfg.test_fraction, 13);
    Model model = build_model(cfg.arch, "conv4", 2, 32, 32, 13);
    train(model, data, train_idx, cfg);

    const std::string out = "/tmp/cfcnn_eval_test";
    std::filesystem::remove_all(out);
    const EvaluationResult eval = evaluate(model, data, test_idx, cfg, out);
    CHECK(eval.has_metrics);
    CHECK(!eval.curve.points.empty());
    CHECK(!eval.shuffled_curve.points.empty());
    CHECK(std::filesystem::exists(out + "/curve.csv"));
    CHECK(std::filesystem::exists(out + "/shuffled_curve.csv"));
    CHECK(std::filesystem::exists(out + "/activations.bin"));

    SUBCASE("masks removed -> accuracy only") {
        Dataset no_masks = data;
        no_masks.masks.reset();
        const EvaluationResult e2 = evaluate(model, no_masks, test_idx, cfg, "");
        CHECK(!e2.has_metrics);
        CHECK(e2.summary.contains("warning"));
        CHECK(e2.summary.contains("accuracy"));
    }
}

TEST_CASE("shuffling feature maps raises inconsistency at matched diversity") {
    // Statistical check over 5 seeds: after short training with the group
    // loss, the shuffled-feature curve sits at or above the model's curve.
    double model_sum = 0.0, shuffled_sum = 0.0;
    int matched = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RunConfig cfg = small_config(10, 1.0, seed);
        cfg.data_n = 400;
        cfg.batch_size = 16;
        cfg.curve_points = 10;
        const Dataset data = load_configured_dataset(cfg);
        auto [train_idx, test_idx] = split_dataset(data, cfg.test_fraction, seed);
        Model model = build_model(cfg.arch, "conv4", 2, 32, 32, seed);
        train(model, data, train_idx, cfg);
        const EvaluationResult eval = evaluate(model, data, test_idx, cfg, "");

        std::map<int, double> grid, sgrid;
        for (const auto& p : eval.curve.points)
            grid[static_cast<int>(std::lround(p.diversity * 10))] = p.inconsistency;
        for (const auto& p : eval.shuffled_curve.points)
            sgrid[static_cast<int>(std::lround(p.diversity * 10))] = p.inconsistency;
        for (const auto& [g, h] : grid) {
            const auto it = sgrid.find(g);
            if (it == sgrid.end()) continue;
            model_sum += h;
            shuffled_sum += it->second;
            ++matched;
        }
    }
    REQUIRE(matched >= 10);
    CHECK(shuffled_sum / matched >= model_sum / matched);
}

TEST_CASE("manifest JSON round-trip") {
    RunConfig cfg = small_config(1, 1.0, 15);
    const Dataset data = load_configured_dataset(cfg);
    auto [train_idx, test_idx] = split_dataset(data, cfg.test_fraction, 15);
    Model model = build_model(cfg.arch, "conv4", 2, 32, 32, 15);
    const RunManifest manifest = train(model, data, train_idx, cfg);
    const RunManifest back = RunManifest::from_json(manifest.to_json());
    CHECK(back.status == manifest.status);
    CHECK(back.initial_partition == manifest.initial_partition);
    REQUIRE(back.epochs.size() == manifest.epochs.size());
    CHECK(back.epochs[0].partition == manifest.epochs[0].partition);
    CHECK(back.epochs[0].cls_loss == doctest::Approx(manifest.epochs[0].cls_loss));
}
