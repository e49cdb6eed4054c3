#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "cfcnn/synthetic.hpp"
#include "cfcnn/types.hpp"

namespace cfcnn {

// Everything a run needs: hyperparameters, architecture, data source and
// output location. Mirrors the JSON config file consumed by `cfcnn train`.
struct RunConfig {
    TrainingConfig training;

    std::string arch = "tiny-cnn";
    int num_classes = 2;
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    double test_fraction = 0.2;
    int curve_points = 20;
    double gamma = 0.2;
    int canvas = 64;

    enum class DataMode { synthetic, directory };
    DataMode data_mode = DataMode::synthetic;
    SyntheticSceneSpec scene;
    int data_n = 2000;
    std::uint64_t data_seed = 7;
    std::string images_dir, labels_csv, masks_dir, merge_config;

    std::string output_dir = "run";

    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

RunConfig load_run_config(const std::string& path);

// Materializes the configured dataset (generates or ingests).
Dataset load_configured_dataset(const RunConfig& config);

} // namespace cfcnn
