#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "cfcnn/types.hpp"

namespace cfcnn {

// Normalized-cut value of a partition on similarity graph S:
//   (1/2) sum_k (sum_{i in A_k, j not in A_k} s_ij) / (sum_{i in A_k, j} s_ij).
// Equals (group_loss(S, A) + K) / 2.
double ncut_objective(const SimilarityMatrix& S, const FilterPartition& A);

struct NcutResult {
    FilterPartition partition;
    double ncut_value = 0.0;
    Eigen::VectorXd eigenvalues; // K smallest Laplacian eigenvalues, diagnostics
};

// Shi-Malik spectral clustering: eigenvectors of the random-walk normalized
// Laplacian for the K smallest eigenvalues, rows clustered with seeded
// k-means (k-means++ init, 10 restarts, 300 iteration cap). Deterministic
// for a fixed (S, K, seed).
NcutResult spectral_partition(const SimilarityMatrix& S, int K, std::uint64_t seed);

// The A-step of the alternating optimization, called at epoch boundaries.
// Runs spectral_partition and keeps `previous` when the fresh partition has
// a worse ncut value on the same matrix, so the A-step never increases the
// objective.
FilterPartition update_partition(const SimilarityMatrix& epoch_similarity,
                                 const TrainingConfig& config,
                                 const FilterPartition& previous);

} // namespace cfcnn
