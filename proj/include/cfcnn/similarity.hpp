#pragma once

#include <vector>

#include <Eigen/Core>

#include "cfcnn/types.hpp"

namespace cfcnn {

// Per-filter first and second moments over the images of a batch.
// sigma is the scalar per-filter standard deviation: the square root of
// (1/(n-1)) sum_I ||x_i^I - mu_i||^2, aggregating all spatial cells.
struct FilterMoments {
    Eigen::MatrixXd mu;   // d x m
    Eigen::VectorXd sigma; // d, nonnegative
};

FilterMoments compute_moments(const ActivationBatch& batch);

// Pearson-correlation kernel between filters, shifted into [0, 2]:
//   s_ij = cov(X_i, X_j) / ((sigma_i + eps)(sigma_j + eps)) + 1.
SimilarityMatrix pairwise_similarity(const ActivationBatch& batch, double eps);

// Same kernel written as a sum of feature-embedding inner products
// s_ij = sum_I phi(x_i^I)^T phi(x_j^I). Kept off the training path; it
// exists to cross-validate pairwise_similarity.
SimilarityMatrix embedding_similarity(const ActivationBatch& batch, double eps);

// Forward pass of the kernel that retains the intermediates needed to
// backpropagate through it. The training loop uses this instead of the
// plain pairwise_similarity when gradients must flow into the activations.
class SimilarityComputation {
public:
    SimilarityComputation(const ActivationBatch& batch, double eps);

    const SimilarityMatrix& matrix() const { return S_; }
    const Eigen::VectorXd& sigma() const { return sigma_; }

    // Given dL/dS over ordered entries, returns dL/dvalues with the batch
    // layout [image][filter][cell]. Filters with sigma == 0 receive no
    // gradient through their own sigma (the kernel is flat there).
    std::vector<double> backward(const Eigen::MatrixXd& grad_S) const;

private:
    int n_, d_, m_;
    double eps_;
    Eigen::MatrixXd centered_; // d x (n*m); row i is x_i - mu_i over (image, cell)
    Eigen::MatrixXd cov_;      // d x d
    Eigen::VectorXd sigma_;    // d
    Eigen::VectorXd inv_;      // 1 / (sigma + eps)
    SimilarityMatrix S_;
};

// Streaming accumulator for epoch-level similarity: sums of values and
// cross products over every image seen in the epoch, so the epoch-end
// matrix equals the exact full-epoch kernel in one pass.
class MomentAccumulator {
public:
    MomentAccumulator(int d, int m);

    void add(const ActivationBatch& batch);
    void reset();
    long images_seen() const { return n_; }

    // Kernel matrix over all accumulated images; requires n >= 2.
    SimilarityMatrix similarity(double eps) const;

private:
    int d_, m_;
    long n_ = 0;
    Eigen::MatrixXd cross_; // d x d: sum_I <x_i, x_j>
    Eigen::MatrixXd sum_;   // d x m: sum_I x_i
};

// Per-image vector of mean activations per filter group:
//   z_k = (1/(|A_k| m)) sum_{i in A_k} sum_u x_{i,u}.
struct GroupActivationVector {
    Eigen::VectorXd z; // K, nonnegative
    int label = 0;     // category index
};

std::vector<GroupActivationVector> group_activations(const ActivationBatch& batch,
                                                     const FilterPartition& partition,
                                                     const std::vector<int>& labels);

// Inner-product kernel s_pq = z_p . z_q between two images' group vectors.
double image_pair_similarity(const GroupActivationVector& zp,
                             const GroupActivationVector& zq);

// Adjoint of group_activations: spreads dL/dz (one K-vector per image) back
// onto the batch values.
std::vector<double> group_activations_backward(const ActivationBatch& batch,
                                               const FilterPartition& partition,
                                               const Eigen::MatrixXd& grad_z);

} // namespace cfcnn
