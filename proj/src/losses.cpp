#include "cfcnn/losses.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <vector>

namespace cfcnn {

namespace {

// Within-group and group-to-all similarity sums per group. Addends are
// sorted before accumulation so the sums do not depend on how filters are
// labeled; relabeling then leaves the loss bit-identical.
void group_sums(const SimilarityMatrix& S, const FilterPartition& A,
                Eigen::VectorXd& within, Eigen::VectorXd& all) {
    const int K = A.num_groups();
    const int d = S.size();
    within = Eigen::VectorXd::Zero(K);
    all = Eigen::VectorXd::Zero(K);
    std::vector<double> within_vals, all_vals;
    for (int k = 0; k < K; ++k) {
        within_vals.clear();
        all_vals.clear();
        for (int i : A.groups()[k]) {
            for (int j = 0; j < d; ++j) {
                const double s = S.entries(i, j);
                all_vals.push_back(s);
                if (A.group_of(j) == k) within_vals.push_back(s);
            }
        }
        std::sort(within_vals.begin(), within_vals.end());
        std::sort(all_vals.begin(), all_vals.end());
        for (double s : within_vals) within(k) += s;
        for (double s : all_vals) all(k) += s;
    }
}

void check_loss_inputs(const SimilarityMatrix& S, const FilterPartition& A) {
    if (S.size() != A.num_filters())
        throw ValidationError("group_loss: matrix of size " + std::to_string(S.size()) +
                              " vs partition over " + std::to_string(A.num_filters()) +
                              " filters");
}

} // namespace

double group_loss(const SimilarityMatrix& S, const FilterPartition& A) {
    check_loss_inputs(S, A);
    Eigen::VectorXd within, all;
    group_sums(S, A, within, all);
    double loss = 0.0;
    for (int k = 0; k < A.num_groups(); ++k) {
        // With diagonal entries near 2 the denominator is bounded away from 0.
        assert(all(k) > 0.0);
        loss -= within(k) / all(k);
    }
    return loss;
}

Eigen::MatrixXd group_loss_gradient(const SimilarityMatrix& S, const FilterPartition& A) {
    check_loss_inputs(S, A);
    Eigen::VectorXd within, all;
    group_sums(S, A, within, all);
    const int d = S.size();
    Eigen::MatrixXd grad(d, d);
    // d/ds_ab of -sum_k W_k/T_k: entry s_ab contributes to W_{k(a)} iff
    // b is in a's group, and to T_{k(a)} always.
    for (int a = 0; a < d; ++a) {
        const int k = A.group_of(a);
        const double inv_all = 1.0 / all(k);
        const double ratio = within(k) * inv_all * inv_all;
        for (int b = 0; b < d; ++b) {
            grad(a, b) = (A.group_of(b) == k) ? (ratio - inv_all) : ratio;
        }
    }
    return grad;
}

namespace {

// Per-category sums w_c = sum_{p in I_c} z_p and the grand sum; shared by
// value and gradient.
struct MultiSums {
    Eigen::MatrixXd w_cat; // C x K
    Eigen::VectorXd w_all; // K
    Eigen::VectorXd numer; // C: ||w_c||^2
    Eigen::VectorXd denom; // C: w_c . w_all
};

MultiSums multi_sums(const std::vector<GroupActivationVector>& Z, int C) {
    if (Z.empty()) throw ValidationError("multi_loss: empty batch");
    const int K = static_cast<int>(Z[0].z.size());
    MultiSums s;
    s.w_cat = Eigen::MatrixXd::Zero(C, K);
    s.w_all = Eigen::VectorXd::Zero(K);
    std::vector<int> count(C, 0);
    for (const auto& gv : Z) {
        if (gv.label < 0 || gv.label >= C)
            throw ValidationError("multi_loss: label " + std::to_string(gv.label) +
                                  " outside [0," + std::to_string(C) + ")");
        if (gv.z.size() != K) throw ValidationError("multi_loss: inconsistent K");
        s.w_cat.row(gv.label) += gv.z.transpose();
        s.w_all += gv.z;
        ++count[gv.label];
    }
    for (int c = 0; c < C; ++c)
        if (count[c] == 0)
            throw ValidationError("multi_loss: category " + std::to_string(c) +
                                  " has no images in the batch");
    s.numer = Eigen::VectorXd(C);
    s.denom = Eigen::VectorXd(C);
    for (int c = 0; c < C; ++c) {
        s.numer(c) = s.w_cat.row(c).squaredNorm();
        s.denom(c) = s.w_cat.row(c).dot(s.w_all.transpose());
        if (s.denom(c) <= 0.0)
            throw ValidationError("multi_loss: category " + std::to_string(c) +
                                  " has all-zero group activations");
    }
    return s;
}

} // namespace

double multi_loss(const std::vector<GroupActivationVector>& Z, int C) {
    const MultiSums s = multi_sums(Z, C);
    double loss = 0.0;
    for (int c = 0; c < C; ++c) loss -= s.numer(c) / s.denom(c);
    return loss;
}

Eigen::MatrixXd multi_loss_gradient(const std::vector<GroupActivationVector>& Z, int C) {
    const MultiSums s = multi_sums(Z, C);
    const int n = static_cast<int>(Z.size());
    const int K = static_cast<int>(Z[0].z.size());
    Eigen::MatrixXd grad(n, K);
    for (int p = 0; p < n; ++p) {
        const int c0 = Z[p].label;
        // Own category: d(N/D) has numerator term 2 w_c and denominator term
        // (w_all + w_c); other categories contribute through w_all only.
        Eigen::VectorXd g =
            -(2.0 * s.w_cat.row(c0).transpose() * s.denom(c0) -
              s.numer(c0) * (s.w_all + s.w_cat.row(c0).transpose())) /
            (s.denom(c0) * s.denom(c0));
        for (int c = 0; c < C; ++c) {
            if (c == c0) continue;
            g += s.numer(c) / (s.denom(c) * s.denom(c)) * s.w_cat.row(c).transpose();
        }
        grad.row(p) = g.transpose();
    }
    return grad;
}

namespace {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p = logits;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

} // namespace

double softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
    if (logits.rows() != static_cast<Eigen::Index>(labels.size()))
        throw ValidationError("cross_entropy: logits rows != labels length");
    const Eigen::MatrixXd p = softmax_rows(logits);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= p.cols())
            throw ValidationError("cross_entropy: label out of range");
        loss -= std::log(std::max(p(i, y), 1e-300));
    }
    return loss / static_cast<double>(p.rows());
}

Eigen::MatrixXd softmax_cross_entropy_gradient(const Eigen::MatrixXd& logits,
                                               const std::vector<int>& labels) {
    Eigen::MatrixXd g = softmax_rows(logits);
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, labels[i]) -= 1.0;
    return g / static_cast<double>(g.rows());
}

LossBreakdown total_objective(const ActivationBatch& batch, const FilterPartition& partition,
                              const std::vector<int>& labels, const Eigen::MatrixXd& logits,
                              const TrainingConfig& config) {
    LossBreakdown out;
    const SimilarityMatrix S = pairwise_similarity(batch, config.epsilon_sigma);
    out.group_loss = group_loss(S, partition);
    out.cls_loss = softmax_cross_entropy(logits, labels);
    out.total = config.lambda_weight * out.group_loss + out.cls_loss;
    if (config.task_mode == TaskMode::multi) {
        const int C = static_cast<int>(logits.cols());
        const auto Z = group_activations(batch, partition, labels);
        out.multi_loss = multi_loss(Z, C);
        out.total += config.beta_weight * *out.multi_loss;
    }
    return out;
}

} // namespace cfcnn
