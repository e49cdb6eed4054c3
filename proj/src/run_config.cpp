#include "cfcnn/run_config.hpp"

#include <fstream>

#include "cfcnn/dataset.hpp"

namespace cfcnn {

using Json = nlohmann::json;

RunConfig RunConfig::from_json(const Json& j) {
    RunConfig cfg;
    cfg.training.lambda_weight = j.value("lambda", 1.0);
    cfg.training.beta_weight = j.value("beta", 0.0);
    cfg.training.num_groups = j.value("num_groups", 4);
    cfg.training.target_layer = j.value("target_layer", std::string("conv4"));
    cfg.training.partition_update_period = j.value("partition_update_period", 1);
    const std::string mode = j.value("task_mode", std::string("binary"));
    if (mode == "binary")
        cfg.training.task_mode = TaskMode::binary;
    else if (mode == "multi")
        cfg.training.task_mode = TaskMode::multi;
    else
        throw ValidationError("config: task_mode must be 'binary' or 'multi'");
    cfg.training.epsilon_sigma = j.value("epsilon_sigma", 1e-8);
    cfg.training.random_seed = j.value("seed", 0ULL);

    cfg.arch = j.value("arch", std::string("tiny-cnn"));
    cfg.num_classes = j.value("num_classes", 2);
    cfg.epochs = j.value("epochs", 30);
    cfg.batch_size = j.value("batch_size", 32);
    cfg.learning_rate = j.value("learning_rate", 1e-3);
    cfg.optimizer = j.value("optimizer", std::string("adam"));
    cfg.test_fraction = j.value("test_fraction", 0.2);
    cfg.curve_points = j.value("curve_points", 20);
    cfg.gamma = j.value("gamma", 0.2);
    cfg.canvas = j.value("canvas", 64);
    cfg.output_dir = j.value("output_dir", std::string("run"));

    if (j.contains("data")) {
        const auto& dj = j["data"];
        const std::string dmode = dj.value("mode", std::string("synthetic"));
        if (dmode == "synthetic") {
            cfg.data_mode = DataMode::synthetic;
            cfg.data_n = dj.value("n", 2000);
            cfg.data_seed = dj.value("seed", 7ULL);
            if (dj.contains("spec_path")) {
                std::ifstream in(dj["spec_path"].get<std::string>());
                if (!in)
                    throw ValidationError("config: cannot open scene spec '" +
                                          dj["spec_path"].get<std::string>() + "'");
                Json sj;
                in >> sj;
                cfg.scene = SyntheticSceneSpec::from_json(sj);
            } else if (dj.contains("spec")) {
                cfg.scene = SyntheticSceneSpec::from_json(dj["spec"]);
            } else {
                cfg.scene = default_scene_spec(cfg.num_classes);
            }
        } else if (dmode == "directory") {
            cfg.data_mode = DataMode::directory;
            cfg.images_dir = dj.at("images_dir");
            cfg.labels_csv = dj.at("labels_csv");
            cfg.masks_dir = dj.value("masks_dir", std::string());
            cfg.merge_config = dj.value("merge_config", std::string());
        } else {
            throw ValidationError("config: data.mode must be 'synthetic' or 'directory'");
        }
    } else {
        cfg.scene = default_scene_spec(cfg.num_classes);
    }
    return cfg;
}

Json RunConfig::to_json() const {
    Json j;
    j["lambda"] = training.lambda_weight;
    j["beta"] = training.beta_weight;
    j["num_groups"] = training.num_groups;
    j["target_layer"] = training.target_layer;
    j["partition_update_period"] = training.partition_update_period;
    j["task_mode"] = training.task_mode == TaskMode::binary ? "binary" : "multi";
    j["epsilon_sigma"] = training.epsilon_sigma;
    j["seed"] = training.random_seed;
    j["arch"] = arch;
    j["num_classes"] = num_classes;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["optimizer"] = optimizer;
    j["test_fraction"] = test_fraction;
    j["curve_points"] = curve_points;
    j["gamma"] = gamma;
    j["canvas"] = canvas;
    j["output_dir"] = output_dir;
    if (data_mode == DataMode::synthetic) {
        j["data"] = {{"mode", "synthetic"},
                     {"n", data_n},
                     {"seed", data_seed},
                     {"spec", scene.to_json()}};
    } else {
        j["data"] = {{"mode", "directory"},
                     {"images_dir", images_dir},
                     {"labels_csv", labels_csv},
                     {"masks_dir", masks_dir},
                     {"merge_config", merge_config}};
    }
    return j;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path + "'");
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw ValidationError("config '" + path + "': " + e.what());
    }
    return RunConfig::from_json(j);
}

Dataset load_configured_dataset(const RunConfig& config) {
    if (config.data_mode == RunConfig::DataMode::synthetic)
        return generate_synthetic(config.scene, config.data_n, config.data_seed);
    return load_directory_dataset(config.images_dir, config.labels_csv, config.masks_dir,
                                  config.merge_config, config.canvas);
}

} // namespace cfcnn
