#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfcnn/common.hpp"

namespace cfcnn {

// Post-ReLU feature maps of one convolutional layer over a set of images.
// values is laid out [image][filter][cell] with the spatial cells flattened
// row-major from a map_h x map_w grid. All similarity computations read
// from this structure.
struct ActivationBatch {
    std::vector<double> values; // n * d * m
    int n = 0;                  // images
    int d = 0;                  // filters
    int m = 0;                  // spatial cells per map (map_h * map_w)
    int map_h = 0;
    int map_w = 0;
    std::vector<std::string> image_ids;
    std::string layer_name;

    double& at(int image, int filter, int cell) {
        return values[(static_cast<std::size_t>(image) * d + filter) * m + cell];
    }
    double at(int image, int filter, int cell) const {
        return values[(static_cast<std::size_t>(image) * d + filter) * m + cell];
    }
    const double* map(int image, int filter) const {
        return values.data() + (static_cast<std::size_t>(image) * d + filter) * m;
    }
    double* map(int image, int filter) {
        return values.data() + (static_cast<std::size_t>(image) * d + filter) * m;
    }
};

// Makes an empty batch with the given shape, zero-filled, ids "img0".."imgN-1".
ActivationBatch make_batch(int n, int d, int map_h, int map_w,
                           std::string layer_name = "layer");

// Checks the ActivationBatch invariants: entries finite and nonnegative,
// n >= 2, shapes consistent. Throws ValidationError naming the violation.
void validate(const ActivationBatch& batch);

// Shape/value checks only (finite, nonnegative, consistent sizes). The
// n >= 2 requirement is specific to moment-based operations; per-image
// operations accept a single image.
void validate_values(const ActivationBatch& batch);

// Partition A = {A_1,...,A_K} of the filter index set {0,...,d-1}.
// Immutable after construction; construct through make_partition or
// partition_from_groups so the invariants always hold.
class FilterPartition {
public:
    FilterPartition() = default;

    const std::vector<std::vector<int>>& groups() const { return groups_; }
    int num_groups() const { return static_cast<int>(groups_.size()); }
    int num_filters() const { return num_filters_; }
    // Group index of each filter; inverse of groups().
    const std::vector<int>& assignments() const { return assignments_; }
    int group_of(int filter) const { return assignments_[filter]; }

    friend FilterPartition make_partition(const std::vector<int>& assignments, int K);
    friend FilterPartition partition_from_groups(std::vector<std::vector<int>> groups,
                                                 int num_filters);

private:
    std::vector<std::vector<int>> groups_;
    std::vector<int> assignments_;
    int num_filters_ = 0;
};

// Builds a partition from per-filter group indices in [0, K). Throws if an
// index is out of range or some group ends up empty.
FilterPartition make_partition(const std::vector<int>& assignments, int K);

// Builds a partition from explicit groups; validates disjointness, coverage
// of {0..num_filters-1} and nonemptiness.
FilterPartition partition_from_groups(std::vector<std::vector<int>> groups,
                                      int num_filters);

// The d x d kernel matrix s_ij in [0, 2].
struct SimilarityMatrix {
    Eigen::MatrixXd entries;

    int size() const { return static_cast<int>(entries.rows()); }
};

// Checks symmetry (1e-8), entry range [0,2] (1e-6 slack) and squareness.
void validate(const SimilarityMatrix& S);

// Ground-truth concept masks over images. masks is [image][concept][pixel],
// entries 0/1. When `partitioning` is set, the concepts of each image are
// pairwise disjoint and cover every pixel.
struct ConceptMaskSet {
    std::vector<std::uint8_t> masks; // n * T * M
    int n = 0;
    int T = 0;
    int M = 0;
    int img_h = 0;
    int img_w = 0;
    std::vector<std::string> concept_names;
    bool partitioning = false;

    std::uint8_t at(int image, int concept_idx, int pixel) const {
        return masks[(static_cast<std::size_t>(image) * T + concept_idx) * M + pixel];
    }
    std::uint8_t& at(int image, int concept_idx, int pixel) {
        return masks[(static_cast<std::size_t>(image) * T + concept_idx) * M + pixel];
    }
};

// Checks mask invariants; when `partitioning` is set, verifies the disjoint
// cover property per image.
void validate(const ConceptMaskSet& masks);

// Per-filter, per-image activation projections at image resolution (raw)
// and their thresholded binary receptive fields.
struct ReceptiveFieldStack {
    std::vector<double> raw;           // n * d * M, nonnegative
    std::vector<std::uint8_t> binary;  // same shape; empty until thresholded
    int n = 0;
    int d = 0;
    int M = 0;
    int img_h = 0;
    int img_w = 0;
    double tau = 0.0;

    const double* raw_map(int image, int filter) const {
        return raw.data() + (static_cast<std::size_t>(image) * d + filter) * M;
    }
    double* raw_map(int image, int filter) {
        return raw.data() + (static_cast<std::size_t>(image) * d + filter) * M;
    }
    const std::uint8_t* binary_map(int image, int filter) const {
        return binary.data() + (static_cast<std::size_t>(image) * d + filter) * M;
    }
    bool has_binary() const { return !binary.empty(); }
};

// One sample on an inconsistency-diversity curve.
struct CurvePoint {
    double tau = 0.0;
    double diversity = 0.0;     // in [0, 1]
    double inconsistency = 0.0; // mean entropy over defined filters, >= 0
    int n_defined_filters = 0;
};

enum class TaskMode { binary, multi };

// Hyperparameters of the alternating optimization.
struct TrainingConfig {
    double lambda_weight = 1.0;       // weight on the group loss
    double beta_weight = 0.0;         // weight on the multi-category loss
    int num_groups = 4;               // K
    std::string target_layer = "conv4";
    int partition_update_period = 1;  // epochs between A updates
    TaskMode task_mode = TaskMode::binary;
    double epsilon_sigma = 1e-8;      // sigma regularizer in the kernel
    std::uint64_t random_seed = 0;
};

// Validates the config against a target layer of d filters.
// lambda_weight = 0 is accepted and turns the group loss into a tracked but
// loss-inert diagnostic (baseline mode).
void validate(const TrainingConfig& config, int d_filters);

} // namespace cfcnn
