#include "cfcnn/types.hpp"

#include <algorithm>
#include <cmath>

namespace cfcnn {

ActivationBatch make_batch(int n, int d, int map_h, int map_w, std::string layer_name) {
    ActivationBatch b;
    b.n = n;
    b.d = d;
    b.map_h = map_h;
    b.map_w = map_w;
    b.m = map_h * map_w;
    b.values.assign(static_cast<std::size_t>(n) * d * b.m, 0.0);
    b.image_ids.resize(n);
    for (int i = 0; i < n; ++i) b.image_ids[i] = "img" + std::to_string(i);
    b.layer_name = std::move(layer_name);
    return b;
}

void validate_values(const ActivationBatch& batch) {
    if (batch.n < 1 || batch.d < 1 || batch.m < 1)
        throw ValidationError("activation batch: empty dimension");
    if (batch.map_h * batch.map_w != batch.m)
        throw ValidationError("activation batch: map_h * map_w != m");
    if (batch.values.size() != static_cast<std::size_t>(batch.n) * batch.d * batch.m)
        throw ValidationError("activation batch: values size does not match n*d*m");
    if (!batch.image_ids.empty() &&
        batch.image_ids.size() != static_cast<std::size_t>(batch.n))
        throw ValidationError("activation batch: image_ids length != n");
    for (double v : batch.values) {
        if (!std::isfinite(v))
            throw ValidationError("activation batch: non-finite activation");
        if (v < 0.0)
            throw ValidationError("activation batch: negative activation (maps must be post-ReLU)");
    }
}

void validate(const ActivationBatch& batch) {
    if (batch.n < 2)
        throw ValidationError("activation batch: need n >= 2 images, got " +
                              std::to_string(batch.n));
    validate_values(batch);
}

FilterPartition make_partition(const std::vector<int>& assignments, int K) {
    if (K < 1) throw ValidationError("partition: K must be >= 1");
    const int d = static_cast<int>(assignments.size());
    if (d < K)
        throw ValidationError("partition: fewer filters than groups (d=" +
                              std::to_string(d) + ", K=" + std::to_string(K) + ")");
    FilterPartition p;
    p.groups_.assign(K, {});
    for (int i = 0; i < d; ++i) {
        const int g = assignments[i];
        if (g < 0 || g >= K)
            throw ValidationError("partition: group index " + std::to_string(g) +
                                  " out of range [0," + std::to_string(K) + ") for filter " +
                                  std::to_string(i));
        p.groups_[g].push_back(i);
    }
    for (int g = 0; g < K; ++g)
        if (p.groups_[g].empty())
            throw ValidationError("partition: group " + std::to_string(g) + " empty");
    p.assignments_ = assignments;
    p.num_filters_ = d;
    return p;
}

FilterPartition partition_from_groups(std::vector<std::vector<int>> groups, int num_filters) {
    if (groups.empty()) throw ValidationError("partition: no groups");
    std::vector<int> assignments(num_filters, -1);
    for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
        if (groups[g].empty())
            throw ValidationError("partition: group " + std::to_string(g) + " empty");
        for (int i : groups[g]) {
            if (i < 0 || i >= num_filters)
                throw ValidationError("partition: filter index " + std::to_string(i) +
                                      " out of range");
            if (assignments[i] != -1)
                throw ValidationError("partition: filter " + std::to_string(i) +
                                      " appears in two groups");
            assignments[i] = g;
        }
        std::sort(groups[g].begin(), groups[g].end());
    }
    for (int i = 0; i < num_filters; ++i)
        if (assignments[i] == -1)
            throw ValidationError("partition: filter " + std::to_string(i) +
                                  " not covered by any group");
    FilterPartition p;
    p.groups_ = std::move(groups);
    p.assignments_ = std::move(assignments);
    p.num_filters_ = num_filters;
    return p;
}

void validate(const SimilarityMatrix& S) {
    const auto& E = S.entries;
    if (E.rows() != E.cols())
        throw ValidationError("similarity matrix: not square");
    constexpr double sym_tol = 1e-8;
    constexpr double range_tol = 1e-6;
    for (Eigen::Index i = 0; i < E.rows(); ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            if (std::abs(E(i, j) - E(j, i)) > sym_tol)
                throw ValidationError("similarity matrix: asymmetric at (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")");
            if (!std::isfinite(E(i, j)))
                throw ValidationError("similarity matrix: non-finite entry");
            if (E(i, j) < -range_tol || E(i, j) > 2.0 + range_tol)
                throw ValidationError("similarity matrix: entry outside [0,2]");
        }
    }
}

void validate(const ConceptMaskSet& masks) {
    if (masks.n < 1 || masks.T < 1 || masks.M < 1)
        throw ValidationError("concept masks: empty dimension");
    if (masks.img_h * masks.img_w != masks.M)
        throw ValidationError("concept masks: img_h * img_w != M");
    if (masks.masks.size() != static_cast<std::size_t>(masks.n) * masks.T * masks.M)
        throw ValidationError("concept masks: size does not match n*T*M");
    if (masks.concept_names.size() != static_cast<std::size_t>(masks.T))
        throw ValidationError("concept masks: concept_names length != T");
    for (std::uint8_t v : masks.masks)
        if (v > 1) throw ValidationError("concept masks: non-binary entry");
    if (masks.partitioning) {
        for (int i = 0; i < masks.n; ++i) {
            for (int u = 0; u < masks.M; ++u) {
                int cover = 0;
                for (int j = 0; j < masks.T; ++j) cover += masks.at(i, j, u);
                if (cover != 1)
                    throw ValidationError(
                        "concept masks: partitioning set does not cover pixel " +
                        std::to_string(u) + " of image " + std::to_string(i) +
                        " exactly once");
            }
        }
    }
}

void validate(const TrainingConfig& config, int d_filters) {
    if (config.lambda_weight < 0.0)
        throw ValidationError("config: lambda_weight must be >= 0");
    if (config.beta_weight < 0.0)
        throw ValidationError("config: beta_weight must be >= 0");
    if (config.num_groups < 1)
        throw ValidationError("config: num_groups must be >= 1");
    if (config.num_groups > d_filters)
        throw ValidationError("config: num_groups K=" + std::to_string(config.num_groups) +
                              " exceeds filter count d=" + std::to_string(d_filters));
    if (config.partition_update_period < 1)
        throw ValidationError("config: partition_update_period must be >= 1");
    if (config.epsilon_sigma <= 0.0)
        throw ValidationError("config: epsilon_sigma must be > 0");
}

} // namespace cfcnn
