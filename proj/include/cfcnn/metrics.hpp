#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cfcnn/types.hpp"

namespace cfcnn {

// Projects each filter's feature map onto the image plane by bilinear
// upsampling of the post-ReLU map (endpoint-aligned grid, so the identity
// when m == M and exact at cells that land on pixels). Returns a stack with
// raw filled and no binary masks yet.
ReceptiveFieldStack project_rf(const ActivationBatch& batch, int img_h, int img_w);

// Binary receptive fields: binary[u] = 1 iff raw[u] >= tau.
ReceptiveFieldStack threshold_rf(const ReceptiveFieldStack& stack, double tau);

// In-place variant used by the curve sampler to avoid copying raw.
void apply_threshold(ReceptiveFieldStack& stack, double tau);

// Probability of one filter being associated with each concept:
//   p_j = sum_I sum_u min(Q~_u(I), G^j_u(I)) / sum_I sum_u Q~_u(I).
// `defined` is false when the filter never fires above tau.
struct ConceptProbabilities {
    Eigen::VectorXd p;
    int filter_index = 0;
    bool defined = false;
};

ConceptProbabilities concept_probabilities(const ReceptiveFieldStack& stack, int filter,
                                           const ConceptMaskSet& masks);

// Entropy H = -sum_j p_j ln p_j of a defined concept distribution.
double inconsistency(const ConceptProbabilities& p);

// Fraction of pixels covered by at least a gamma fraction of the filters'
// binary receptive fields, averaged over images.
double diversity(const ReceptiveFieldStack& stack, double gamma);

struct Curve {
    std::vector<CurvePoint> points; // sorted by diversity ascending
    bool truncated = false;         // some diversity targets were unreachable
};

// Samples the inconsistency-diversity curve: picks tau values by bisection
// so the diversities land on n_points even targets {1/n, ..., 1} within
// 0.02, then reports the mean inconsistency over defined filters at each
// accepted tau. Unreachable targets are skipped and the curve flagged.
Curve sample_curve(const ReceptiveFieldStack& raw_stack, const ConceptMaskSet& masks,
                   int n_points, double gamma);

// Baseline with no cross-image consistency: independently permutes the
// image axis of every filter. Per-filter marginals are preserved.
ActivationBatch shuffle_baseline(const ActivationBatch& batch, std::uint64_t seed);

} // namespace cfcnn
