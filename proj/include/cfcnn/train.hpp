#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfcnn/dataset.hpp"
#include "cfcnn/metrics.hpp"
#include "cfcnn/nn.hpp"
#include "cfcnn/run_config.hpp"
#include "cfcnn/types.hpp"

namespace cfcnn {

struct EpochRecord {
    int epoch = 0;
    double cls_loss = 0.0;
    double group_loss = 0.0;
    std::optional<double> multi_loss;
    double accuracy = 0.0;   // training accuracy over the epoch's batches
    double ncut_value = 0.0; // of the current partition on the epoch matrix
    std::vector<std::vector<int>> partition;
};

struct RunManifest {
    nlohmann::json config_snapshot;
    std::vector<std::vector<int>> initial_partition;
    double initial_ncut = 0.0;
    std::vector<EpochRecord> epochs;
    std::string status = "completed"; // or "diverged"
    nlohmann::json final_summary;     // evaluation artifacts, filled later

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

// Alternating optimization: gradient steps on the composed objective with a
// fixed partition inside each epoch, one spectral partition update at each
// epoch boundary. On divergence returns the manifest so far with status
// "diverged".
RunManifest train(Model& model, const Dataset& data, const std::vector<int>& train_indices,
                  const RunConfig& config);

struct EvaluationResult {
    double accuracy = 0.0;
    bool has_metrics = false;
    Curve curve;
    Curve shuffled_curve;
    nlohmann::json summary; // file paths and scalars
};

// Test-split evaluation: accuracy always; when masks are present, the
// inconsistency-diversity curve, the shuffled-feature-map baseline curve
// and group heat-map overlays are produced. Artifacts are written under
// out_dir when nonempty.
EvaluationResult evaluate(Model& model, const Dataset& data,
                          const std::vector<int>& test_indices, const RunConfig& config,
                          const std::string& out_dir);

} // namespace cfcnn
