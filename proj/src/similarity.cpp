#include "cfcnn/similarity.hpp"

#include <cmath>

namespace cfcnn {

namespace {

// d x (n*m) matrix whose row i holds filter i's values over (image, cell),
// column index I*m + u.
Eigen::MatrixXd stack_by_filter(const ActivationBatch& b) {
    Eigen::MatrixXd V(b.d, static_cast<Eigen::Index>(b.n) * b.m);
    for (int i = 0; i < b.n; ++i)
        for (int f = 0; f < b.d; ++f)
            for (int u = 0; u < b.m; ++u)
                V(f, static_cast<Eigen::Index>(i) * b.m + u) = b.at(i, f, u);
    return V;
}

void center_rows(Eigen::MatrixXd& V, int n, int m) {
    // Subtract the per-(filter, cell) mean over images.
    for (Eigen::Index f = 0; f < V.rows(); ++f) {
        for (int u = 0; u < m; ++u) {
            double mean = 0.0;
            for (int i = 0; i < n; ++i) mean += V(f, static_cast<Eigen::Index>(i) * m + u);
            mean /= n;
            for (int i = 0; i < n; ++i) V(f, static_cast<Eigen::Index>(i) * m + u) -= mean;
        }
    }
}

// Exactly symmetric covariance C = V V^T / (n-1).
Eigen::MatrixXd covariance_of(const Eigen::MatrixXd& centered, int n) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(centered.rows(), centered.rows());
    C.selfadjointView<Eigen::Upper>().rankUpdate(centered, 1.0 / (n - 1));
    C.triangularView<Eigen::StrictlyLower>() =
        C.transpose().triangularView<Eigen::StrictlyLower>();
    return C;
}

} // namespace

FilterMoments compute_moments(const ActivationBatch& batch) {
    validate(batch);
    FilterMoments mo;
    mo.mu = Eigen::MatrixXd::Zero(batch.d, batch.m);
    for (int i = 0; i < batch.n; ++i)
        for (int f = 0; f < batch.d; ++f)
            for (int u = 0; u < batch.m; ++u) mo.mu(f, u) += batch.at(i, f, u);
    mo.mu /= batch.n;

    mo.sigma = Eigen::VectorXd::Zero(batch.d);
    for (int f = 0; f < batch.d; ++f) {
        double ss = 0.0;
        for (int i = 0; i < batch.n; ++i)
            for (int u = 0; u < batch.m; ++u) {
                const double c = batch.at(i, f, u) - mo.mu(f, u);
                ss += c * c;
            }
        mo.sigma(f) = std::sqrt(ss / (batch.n - 1));
    }
    return mo;
}

SimilarityComputation::SimilarityComputation(const ActivationBatch& batch, double eps)
    : n_(batch.n), d_(batch.d), m_(batch.m), eps_(eps) {
    validate(batch);
    centered_ = stack_by_filter(batch);
    center_rows(centered_, n_, m_);
    cov_ = covariance_of(centered_, n_);
    sigma_ = cov_.diagonal().cwiseMax(0.0).cwiseSqrt();
    inv_ = (sigma_.array() + eps_).inverse().matrix();
    // The product form keeps s_ij == s_ji exactly. Cauchy-Schwarz bounds the
    // entries inside (0, 2) up to rounding, so no clamping is applied and the
    // forward stays consistent with backward().
    S_.entries = (inv_ * inv_.transpose()).cwiseProduct(cov_);
    S_.entries.array() += 1.0;
}

std::vector<double> SimilarityComputation::backward(const Eigen::MatrixXd& grad_S) const {
    // S = R C R + 1 elementwise with r_i = 1/(sigma_i + eps), sigma_i = sqrt(C_ii).
    // Accumulate dL/dC over ordered entries, then pull back through
    // C = V V^T/(n-1) and the centering projection.
    Eigen::MatrixXd H = grad_S.cwiseProduct(inv_ * inv_.transpose());

    const Eigen::MatrixXd Gsym = grad_S + grad_S.transpose();
    const Eigen::VectorXd t = (Gsym.cwiseProduct(cov_)) * inv_;
    for (int i = 0; i < d_; ++i) {
        if (sigma_(i) > 0.0) {
            const double dsigma = -inv_(i) * inv_(i) * t(i);
            H(i, i) += dsigma / (2.0 * sigma_(i));
        }
    }

    Eigen::MatrixXd dV = (H + H.transpose()) * centered_ / (n_ - 1);

    // Adjoint of centering: subtract the per-(filter, cell) mean over images.
    std::vector<double> grad(static_cast<std::size_t>(n_) * d_ * m_);
    for (int f = 0; f < d_; ++f) {
        for (int u = 0; u < m_; ++u) {
            double mean = 0.0;
            for (int i = 0; i < n_; ++i) mean += dV(f, static_cast<Eigen::Index>(i) * m_ + u);
            mean /= n_;
            for (int i = 0; i < n_; ++i) {
                grad[(static_cast<std::size_t>(i) * d_ + f) * m_ + u] =
                    dV(f, static_cast<Eigen::Index>(i) * m_ + u) - mean;
            }
        }
    }
    return grad;
}

SimilarityMatrix pairwise_similarity(const ActivationBatch& batch, double eps) {
    return SimilarityComputation(batch, eps).matrix();
}

SimilarityMatrix embedding_similarity(const ActivationBatch& batch, double eps) {
    validate(batch);
    const int n = batch.n, d = batch.d, m = batch.m;
    Eigen::MatrixXd V = stack_by_filter(batch);
    center_rows(V, n, m);
    Eigen::VectorXd sigma(d);
    for (int f = 0; f < d; ++f) sigma(f) = std::sqrt(V.row(f).squaredNorm() / (n - 1));

    // phi(x_i^I) = [(x_i^I - mu_i)^T, sqrt(1 - 1/n) * sig_i] / (sqrt(n-1) * sig_i)
    // with sig_i = sigma_i + eps matching the regularized pairwise kernel.
    SimilarityMatrix S;
    S.entries = Eigen::MatrixXd::Zero(d, d);
    const double tail = std::sqrt(1.0 - 1.0 / n);
    for (int i = 0; i < d; ++i) {
        const double si = sigma(i) + eps;
        for (int j = 0; j <= i; ++j) {
            const double sj = sigma(j) + eps;
            double acc = 0.0;
            for (int img = 0; img < n; ++img) {
                double dot = 0.0;
                for (int u = 0; u < m; ++u)
                    dot += V(i, static_cast<Eigen::Index>(img) * m + u) *
                           V(j, static_cast<Eigen::Index>(img) * m + u);
                dot += tail * si * tail * sj;
                acc += dot / ((n - 1) * si * sj);
            }
            S.entries(i, j) = acc;
            S.entries(j, i) = acc;
        }
    }
    return S;
}

MomentAccumulator::MomentAccumulator(int d, int m) : d_(d), m_(m) { reset(); }

void MomentAccumulator::reset() {
    n_ = 0;
    cross_ = Eigen::MatrixXd::Zero(d_, d_);
    sum_ = Eigen::MatrixXd::Zero(d_, m_);
}

void MomentAccumulator::add(const ActivationBatch& batch) {
    if (batch.d != d_ || batch.m != m_)
        throw ValidationError("moment accumulator: batch shape mismatch");
    const Eigen::MatrixXd V = stack_by_filter(batch); // d x (n*m)
    cross_.selfadjointView<Eigen::Upper>().rankUpdate(V, 1.0);
    for (int i = 0; i < batch.n; ++i) sum_ += V.middleCols(static_cast<Eigen::Index>(i) * m_, m_);
    n_ += batch.n;
}

SimilarityMatrix MomentAccumulator::similarity(double eps) const {
    if (n_ < 2) throw ValidationError("moment accumulator: need >= 2 images");
    Eigen::MatrixXd cov = cross_;
    cov.triangularView<Eigen::StrictlyLower>() =
        cov.transpose().triangularView<Eigen::StrictlyLower>();
    cov.noalias() -= sum_ * sum_.transpose() / static_cast<double>(n_);
    cov /= static_cast<double>(n_ - 1);
    cov = 0.5 * (cov + cov.transpose().eval());
    const Eigen::VectorXd sigma = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    const Eigen::VectorXd inv = (sigma.array() + eps).inverse().matrix();
    SimilarityMatrix S;
    S.entries = (inv * inv.transpose()).cwiseProduct(cov);
    S.entries.array() += 1.0;
    // Rounding in the two-pass moment algebra can nudge an entry past the
    // [0,2] bound; clamp so downstream validation holds.
    S.entries = S.entries.cwiseMax(0.0).cwiseMin(2.0);
    return S;
}

std::vector<GroupActivationVector> group_activations(const ActivationBatch& batch,
                                                     const FilterPartition& partition,
                                                     const std::vector<int>& labels) {
    validate_values(batch);
    if (partition.num_filters() != batch.d)
        throw ValidationError("group_activations: partition covers " +
                              std::to_string(partition.num_filters()) +
                              " filters but batch has " + std::to_string(batch.d));
    if (!labels.empty() && labels.size() != static_cast<std::size_t>(batch.n))
        throw ValidationError("group_activations: labels length != n");

    const int K = partition.num_groups();
    std::vector<GroupActivationVector> out(batch.n);
    for (int i = 0; i < batch.n; ++i) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(K);
        for (int k = 0; k < K; ++k) {
            const auto& grp = partition.groups()[k];
            double sum = 0.0;
            for (int f : grp) {
                const double* map = batch.map(i, f);
                for (int u = 0; u < batch.m; ++u) sum += map[u];
            }
            z(k) = sum / (static_cast<double>(grp.size()) * batch.m);
        }
        out[i].z = std::move(z);
        out[i].label = labels.empty() ? 0 : labels[i];
    }
    return out;
}

double image_pair_similarity(const GroupActivationVector& zp,
                             const GroupActivationVector& zq) {
    if (zp.z.size() != zq.z.size())
        throw ValidationError("image_pair_similarity: dimension mismatch (" +
                              std::to_string(zp.z.size()) + " vs " +
                              std::to_string(zq.z.size()) + ")");
    return zp.z.dot(zq.z);
}

std::vector<double> group_activations_backward(const ActivationBatch& batch,
                                               const FilterPartition& partition,
                                               const Eigen::MatrixXd& grad_z) {
    if (grad_z.rows() != batch.n || grad_z.cols() != partition.num_groups())
        throw ValidationError("group_activations_backward: grad_z shape mismatch");
    std::vector<double> grad(static_cast<std::size_t>(batch.n) * batch.d * batch.m, 0.0);
    for (int i = 0; i < batch.n; ++i) {
        for (int k = 0; k < partition.num_groups(); ++k) {
            const auto& grp = partition.groups()[k];
            const double g = grad_z(i, k) / (static_cast<double>(grp.size()) * batch.m);
            for (int f : grp) {
                double* dst = grad.data() + (static_cast<std::size_t>(i) * batch.d + f) * batch.m;
                for (int u = 0; u < batch.m; ++u) dst[u] += g;
            }
        }
    }
    return grad;
}

} // namespace cfcnn
