#include "cfcnn/spectral.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "cfcnn/common.hpp"

namespace cfcnn {

double ncut_objective(const SimilarityMatrix& S, const FilterPartition& A) {
    if (S.size() != A.num_filters())
        throw ValidationError("ncut_objective: matrix/partition size mismatch");
    const int d = S.size();
    const int K = A.num_groups();
    Eigen::VectorXd cut = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd assoc = Eigen::VectorXd::Zero(K);
    for (int i = 0; i < d; ++i) {
        const int ki = A.group_of(i);
        for (int j = 0; j < d; ++j) {
            assoc(ki) += S.entries(i, j);
            if (A.group_of(j) != ki) cut(ki) += S.entries(i, j);
        }
    }
    double value = 0.0;
    for (int k = 0; k < K; ++k) value += cut(k) / assoc(k);
    return 0.5 * value;
}

namespace {

struct KmeansRun {
    std::vector<int> assignment;
    double sse = std::numeric_limits<double>::infinity();
    bool valid = false;
};

int nearest_center(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                   int point, int current) {
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < centers.rows(); ++k) {
        const double dist = (points.row(point) - centers.row(k)).squaredNorm();
        // Sticky tie-break: a point keeps its cluster on exact ties, which
        // stops the empty-cluster repair from being undone by reassignment.
        if (dist < best_dist || (dist == best_dist && k == current)) {
            best_dist = dist;
            best = k;
        }
    }
    return best;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& points, int K, Rng& rng) {
    const int n = static_cast<int>(points.rows());
    Eigen::MatrixXd centers(K, points.cols());
    std::uniform_int_distribution<int> uni(0, n - 1);
    centers.row(0) = points.row(uni(rng));
    Eigen::VectorXd dist2(n);
    for (int i = 0; i < n; ++i)
        dist2(i) = (points.row(i) - centers.row(0)).squaredNorm();
    for (int k = 1; k < K; ++k) {
        const double total = dist2.sum();
        int chosen = -1;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng);
            for (int i = 0; i < n; ++i) {
                r -= dist2(i);
                if (r <= 0.0) {
                    chosen = i;
                    break;
                }
            }
            if (chosen < 0) chosen = n - 1;
        } else {
            // All remaining points coincide with a center; fall back to the
            // lowest untouched index so the run stays deterministic.
            chosen = uni(rng) % n;
        }
        centers.row(k) = points.row(chosen);
        for (int i = 0; i < n; ++i)
            dist2(i) = std::min(dist2(i), (points.row(i) - centers.row(k)).squaredNorm());
    }
    return centers;
}

void recompute_centers(const Eigen::MatrixXd& points, const std::vector<int>& assignment,
                       Eigen::MatrixXd& centers) {
    centers.setZero();
    std::vector<int> count(centers.rows(), 0);
    for (int i = 0; i < points.rows(); ++i) {
        centers.row(assignment[i]) += points.row(i);
        ++count[assignment[i]];
    }
    for (int k = 0; k < centers.rows(); ++k)
        if (count[k] > 0) centers.row(k) /= count[k];
}

// Moves the point farthest from its centroid into each empty cluster, then
// reassigns once. Returns false if a cluster is still empty afterwards.
bool repair_empty_clusters(const Eigen::MatrixXd& points, Eigen::MatrixXd& centers,
                           std::vector<int>& assignment, int K) {
    std::vector<int> count(K, 0);
    for (int a : assignment) ++count[a];
    bool repaired = false;
    for (int k = 0; k < K; ++k) {
        if (count[k] > 0) continue;
        int farthest = -1;
        double far_dist = -1.0;
        for (int i = 0; i < points.rows(); ++i) {
            if (count[assignment[i]] < 2) continue;
            const double dist = (points.row(i) - centers.row(assignment[i])).squaredNorm();
            if (dist > far_dist) {
                far_dist = dist;
                farthest = i;
            }
        }
        if (farthest < 0) return false;
        --count[assignment[farthest]];
        assignment[farthest] = k;
        ++count[k];
        centers.row(k) = points.row(farthest);
        repaired = true;
    }
    if (repaired) {
        recompute_centers(points, assignment, centers);
        for (int i = 0; i < points.rows(); ++i)
            assignment[i] = nearest_center(points, centers, i, assignment[i]);
        std::fill(count.begin(), count.end(), 0);
        for (int a : assignment) ++count[a];
        for (int k = 0; k < K; ++k)
            if (count[k] == 0) return false;
    }
    return true;
}

KmeansRun lloyd(const Eigen::MatrixXd& points, int K, Rng& rng, int max_iter) {
    KmeansRun run;
    Eigen::MatrixXd centers = kmeanspp_init(points, K, rng);
    const int n = static_cast<int>(points.rows());
    std::vector<int> assignment(n, -1);
    for (int i = 0; i < n; ++i) assignment[i] = nearest_center(points, centers, i, -1);
    if (!repair_empty_clusters(points, centers, assignment, K)) return run;

    for (int iter = 0; iter < max_iter; ++iter) {
        recompute_centers(points, assignment, centers);
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            const int next = nearest_center(points, centers, i, assignment[i]);
            if (next != assignment[i]) {
                assignment[i] = next;
                changed = true;
            }
        }
        if (!repair_empty_clusters(points, centers, assignment, K)) return run;
        if (!changed) break;
    }
    recompute_centers(points, assignment, centers);
    run.sse = 0.0;
    for (int i = 0; i < n; ++i)
        run.sse += (points.row(i) - centers.row(assignment[i])).squaredNorm();
    run.assignment = std::move(assignment);
    run.valid = true;
    return run;
}

std::vector<int> kmeans(const Eigen::MatrixXd& points, int K, std::uint64_t seed,
                        int restarts, int max_iter) {
    Rng rng = make_rng(seed, /*stream=*/11);
    KmeansRun best;
    for (int r = 0; r < restarts; ++r) {
        KmeansRun run = lloyd(points, K, rng, max_iter);
        if (run.valid && run.sse < best.sse) best = std::move(run);
    }
    if (!best.valid)
        throw ValidationError("spectral_partition: k-means could not produce K nonempty clusters");
    return best.assignment;
}

} // namespace

NcutResult spectral_partition(const SimilarityMatrix& S, int K, std::uint64_t seed) {
    validate(S);
    const int d = S.size();
    if (K < 1) throw ValidationError("spectral_partition: K must be >= 1");
    if (K > d)
        throw ValidationError("spectral_partition: K=" + std::to_string(K) +
                              " exceeds d=" + std::to_string(d));

    NcutResult result;
    if (K == 1) {
        std::vector<int> all(d);
        std::iota(all.begin(), all.end(), 0);
        result.partition = partition_from_groups({all}, d);
        result.ncut_value = 0.0;
        result.eigenvalues = Eigen::VectorXd::Zero(1);
        return result;
    }

    Eigen::VectorXd degree = S.entries.rowwise().sum();
    for (int i = 0; i < d; ++i)
        if (degree(i) <= 0.0)
            throw ValidationError("spectral_partition: zero degree at filter " +
                                  std::to_string(i));
    const Eigen::VectorXd dinv_sqrt = degree.cwiseSqrt().cwiseInverse();

    // Symmetric normalization shares the spectrum of the random-walk
    // Laplacian; rescaling the eigenvectors by D^{-1/2} recovers its
    // eigenvectors, which are the rows Shi-Malik clusters.
    Eigen::MatrixXd lap = -S.entries;
    lap = dinv_sqrt.asDiagonal() * lap * dinv_sqrt.asDiagonal();
    lap.diagonal().array() += 1.0;
    lap = 0.5 * (lap + lap.transpose().eval());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
    if (eig.info() != Eigen::Success)
        throw ValidationError("spectral_partition: eigendecomposition failed");

    result.eigenvalues = eig.eigenvalues().head(K);
    Eigen::MatrixXd embedding = eig.eigenvectors().leftCols(K);
    embedding = dinv_sqrt.asDiagonal() * embedding;

    std::vector<int> assignment;
    if (K == d) {
        assignment.resize(d);
        std::iota(assignment.begin(), assignment.end(), 0);
    } else {
        assignment = kmeans(embedding, K, seed, /*restarts=*/10, /*max_iter=*/300);
    }
    result.partition = make_partition(assignment, K);
    result.ncut_value = ncut_objective(S, result.partition);
    return result;
}

FilterPartition update_partition(const SimilarityMatrix& epoch_similarity,
                                 const TrainingConfig& config,
                                 const FilterPartition& previous) {
    NcutResult fresh =
        spectral_partition(epoch_similarity, config.num_groups, config.random_seed);
    if (previous.num_filters() == epoch_similarity.size() &&
        previous.num_groups() == config.num_groups) {
        const double prev_value = ncut_objective(epoch_similarity, previous);
        if (prev_value <= fresh.ncut_value) return previous;
    }
    return fresh.partition;
}

} // namespace cfcnn
