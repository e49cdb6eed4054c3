#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cfcnn/similarity.hpp"
#include "cfcnn/types.hpp"

namespace cfcnn {

// Group interpretability loss
//   Loss(S, A) = -sum_k S_k^within / S_k^all
// with S_k^within = sum_{i,j in A_k} s_ij and S_k^all = sum_{i in A_k, j} s_ij.
// Lies in [-K, 0) for any valid similarity matrix.
double group_loss(const SimilarityMatrix& S, const FilterPartition& A);

// dLoss/dS over ordered entries (the caller chains this through the kernel).
Eigen::MatrixXd group_loss_gradient(const SimilarityMatrix& S, const FilterPartition& A);

// Multi-category distribution loss over group-activation vectors
//   L = -sum_c (sum_{p,q in I_c} z_p.z_q) / (sum_{p in I_c, q} z_p.z_q).
// Every category in [0, C) must be present in Z; lies in [-C, 0).
double multi_loss(const std::vector<GroupActivationVector>& Z, int C);

// dL/dz as an n x K matrix (row per image).
Eigen::MatrixXd multi_loss_gradient(const std::vector<GroupActivationVector>& Z, int C);

// Mean softmax cross-entropy over the batch. logits is n x C.
double softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

// d(mean CE)/dlogits, n x C.
Eigen::MatrixXd softmax_cross_entropy_gradient(const Eigen::MatrixXd& logits,
                                               const std::vector<int>& labels);

struct LossBreakdown {
    double group_loss = 0.0;
    std::optional<double> multi_loss; // present in multi mode only
    double cls_loss = 0.0;
    double total = 0.0;
};

// Composes the training objective from a raw activation batch:
// binary mode  total = lambda * group_loss + cls_loss
// multi mode   total = lambda * group_loss + beta * multi_loss + cls_loss.
LossBreakdown total_objective(const ActivationBatch& batch, const FilterPartition& partition,
                              const std::vector<int>& labels, const Eigen::MatrixXd& logits,
                              const TrainingConfig& config);

} // namespace cfcnn
