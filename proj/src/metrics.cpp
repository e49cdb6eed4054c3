#include "cfcnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfcnn/common.hpp"

namespace cfcnn {

namespace {

// Endpoint-aligned source coordinate and interpolation weights for 1-D
// bilinear resampling from `src_len` samples to `dst_len`.
struct LinearGrid {
    std::vector<int> lo;
    std::vector<double> frac;
};

LinearGrid make_grid(int src_len, int dst_len) {
    LinearGrid g;
    g.lo.resize(dst_len);
    g.frac.resize(dst_len);
    for (int i = 0; i < dst_len; ++i) {
        double pos = (src_len == 1 || dst_len == 1)
                         ? 0.0
                         : static_cast<double>(i) * (src_len - 1) / (dst_len - 1);
        int lo = static_cast<int>(pos);
        if (lo >= src_len - 1) lo = src_len - 1;
        g.lo[i] = lo;
        g.frac[i] = pos - lo;
    }
    return g;
}

} // namespace

ReceptiveFieldStack project_rf(const ActivationBatch& batch, int img_h, int img_w) {
    validate_values(batch);
    if (img_h < 1 || img_w < 1)
        throw ValidationError("project_rf: image dimensions must be positive");
    ReceptiveFieldStack stack;
    stack.n = batch.n;
    stack.d = batch.d;
    stack.img_h = img_h;
    stack.img_w = img_w;
    stack.M = img_h * img_w;
    stack.raw.assign(static_cast<std::size_t>(stack.n) * stack.d * stack.M, 0.0);

    const LinearGrid gy = make_grid(batch.map_h, img_h);
    const LinearGrid gx = make_grid(batch.map_w, img_w);
    for (int i = 0; i < batch.n; ++i) {
        for (int f = 0; f < batch.d; ++f) {
            const double* src = batch.map(i, f);
            double* dst = stack.raw_map(i, f);
            for (int y = 0; y < img_h; ++y) {
                const int y0 = gy.lo[y];
                const int y1 = std::min(y0 + 1, batch.map_h - 1);
                const double fy = gy.frac[y];
                for (int x = 0; x < img_w; ++x) {
                    const int x0 = gx.lo[x];
                    const int x1 = std::min(x0 + 1, batch.map_w - 1);
                    const double fx = gx.frac[x];
                    const double top = src[y0 * batch.map_w + x0] * (1.0 - fx) +
                                       src[y0 * batch.map_w + x1] * fx;
                    const double bot = src[y1 * batch.map_w + x0] * (1.0 - fx) +
                                       src[y1 * batch.map_w + x1] * fx;
                    dst[y * img_w + x] = top * (1.0 - fy) + bot * fy;
                }
            }
        }
    }
    return stack;
}

void apply_threshold(ReceptiveFieldStack& stack, double tau) {
    stack.tau = tau;
    stack.binary.resize(stack.raw.size());
    for (std::size_t k = 0; k < stack.raw.size(); ++k)
        stack.binary[k] = stack.raw[k] >= tau ? 1 : 0;
}

ReceptiveFieldStack threshold_rf(const ReceptiveFieldStack& stack, double tau) {
    ReceptiveFieldStack out = stack;
    apply_threshold(out, tau);
    return out;
}

ConceptProbabilities concept_probabilities(const ReceptiveFieldStack& stack, int filter,
                                           const ConceptMaskSet& masks) {
    if (!stack.has_binary())
        throw ValidationError("concept_probabilities: stack has no binary masks; threshold first");
    if (stack.n != masks.n || stack.M != masks.M)
        throw ValidationError("concept_probabilities: stack and masks shapes differ");
    if (filter < 0 || filter >= stack.d)
        throw ValidationError("concept_probabilities: filter index out of range");

    ConceptProbabilities cp;
    cp.filter_index = filter;
    cp.p = Eigen::VectorXd::Zero(masks.T);
    double rf_area = 0.0;
    for (int i = 0; i < stack.n; ++i) {
        const std::uint8_t* rf = stack.binary_map(i, filter);
        for (int u = 0; u < stack.M; ++u) {
            if (!rf[u]) continue;
            rf_area += 1.0;
            for (int j = 0; j < masks.T; ++j)
                if (masks.at(i, j, u)) cp.p(j) += 1.0;
        }
    }
    if (rf_area == 0.0) {
        cp.defined = false;
        return cp;
    }
    cp.p /= rf_area;
    cp.defined = true;
    return cp;
}

double inconsistency(const ConceptProbabilities& cp) {
    if (!cp.defined)
        throw ValidationError("inconsistency: undefined concept distribution (empty RF)");
    double h = 0.0;
    for (Eigen::Index j = 0; j < cp.p.size(); ++j) {
        const double pj = cp.p(j);
        if (pj > 0.0) h -= pj * std::log(pj);
    }
    return h;
}

double diversity(const ReceptiveFieldStack& stack, double gamma) {
    if (!stack.has_binary())
        throw ValidationError("diversity: stack has no binary masks; threshold first");
    if (gamma <= 0.0 || gamma > 1.0)
        throw ValidationError("diversity: gamma must lie in (0, 1]");
    double explained = 0.0;
    for (int i = 0; i < stack.n; ++i) {
        for (int u = 0; u < stack.M; ++u) {
            int covered = 0;
            for (int f = 0; f < stack.d; ++f) covered += stack.binary_map(i, f)[u];
            if (static_cast<double>(covered) / stack.d >= gamma) explained += 1.0;
        }
    }
    return explained / (static_cast<double>(stack.n) * stack.M);
}

namespace {

// Per-pixel coverage threshold: the c-th largest activation across filters,
// where c = ceil(gamma * d). A pixel counts as explained at threshold tau
// iff tau <= that value, which turns diversity(tau) into a quantile lookup
// on the sorted array.
std::vector<double> coverage_thresholds(const ReceptiveFieldStack& stack, double gamma) {
    const int c = static_cast<int>(std::ceil(gamma * stack.d));
    std::vector<double> t(static_cast<std::size_t>(stack.n) * stack.M);
    std::vector<double> vals(stack.d);
    for (int i = 0; i < stack.n; ++i) {
        for (int u = 0; u < stack.M; ++u) {
            for (int f = 0; f < stack.d; ++f) vals[f] = stack.raw_map(i, f)[u];
            std::nth_element(vals.begin(), vals.begin() + (c - 1), vals.end(),
                             std::greater<double>());
            t[static_cast<std::size_t>(i) * stack.M + u] = vals[c - 1];
        }
    }
    std::sort(t.begin(), t.end());
    return t;
}

// diversity(tau) from the ascending-sorted coverage thresholds.
double diversity_at(const std::vector<double>& sorted_t, double tau) {
    const auto it = std::lower_bound(sorted_t.begin(), sorted_t.end(), tau);
    return static_cast<double>(sorted_t.end() - it) / sorted_t.size();
}

// Mean entropy over filters with defined distributions at threshold tau,
// counted straight off the raw stack so no binary buffer is materialized.
std::pair<double, int> mean_inconsistency(const ReceptiveFieldStack& stack,
                                          const ConceptMaskSet& masks, double tau) {
    Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(stack.d, masks.T);
    Eigen::VectorXd area = Eigen::VectorXd::Zero(stack.d);
    for (int i = 0; i < stack.n; ++i) {
        for (int f = 0; f < stack.d; ++f) {
            const double* raw = stack.raw_map(i, f);
            for (int u = 0; u < stack.M; ++u) {
                if (raw[u] < tau) continue;
                area(f) += 1.0;
                for (int j = 0; j < masks.T; ++j)
                    if (masks.at(i, j, u)) overlap(f, j) += 1.0;
            }
        }
    }
    double sum = 0.0;
    int defined = 0;
    for (int f = 0; f < stack.d; ++f) {
        if (area(f) == 0.0) continue;
        double h = 0.0;
        for (int j = 0; j < masks.T; ++j) {
            const double pj = overlap(f, j) / area(f);
            if (pj > 0.0) h -= pj * std::log(pj);
        }
        sum += h;
        ++defined;
    }
    return {defined > 0 ? sum / defined : 0.0, defined};
}

} // namespace

Curve sample_curve(const ReceptiveFieldStack& raw_stack, const ConceptMaskSet& masks,
                   int n_points, double gamma) {
    if (n_points < 2) throw ValidationError("sample_curve: need n_points >= 2");
    if (raw_stack.n != masks.n || raw_stack.M != masks.M)
        throw ValidationError("sample_curve: stack and masks shapes differ");

    const std::vector<double> sorted_t = coverage_thresholds(raw_stack, gamma);
    const double max_raw = *std::max_element(raw_stack.raw.begin(), raw_stack.raw.end());

    constexpr double kDiversityTol = 0.02;
    constexpr int kBisectIters = 40;

    Curve curve;
    for (int t = 1; t <= n_points; ++t) {
        const double target = static_cast<double>(t) / n_points;
        // diversity is non-increasing in tau; keep lo on the >= target side.
        double lo = 0.0;
        double hi = max_raw + 1.0;
        for (int it = 0; it < kBisectIters; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (diversity_at(sorted_t, mid) >= target)
                lo = mid;
            else
                hi = mid;
        }
        const double div = diversity_at(sorted_t, lo);
        if (std::abs(div - target) > kDiversityTol) {
            curve.truncated = true;
            continue;
        }
        const auto [mean_h, n_defined] = mean_inconsistency(raw_stack, masks, lo);
        curve.points.push_back(CurvePoint{lo, div, mean_h, n_defined});
    }

    std::sort(curve.points.begin(), curve.points.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.diversity < b.diversity; });
    // Collapse duplicate diversity levels (step plateaus) so the curve stays
    // strictly monotone in both diversity and tau.
    std::vector<CurvePoint> unique;
    for (const auto& pt : curve.points) {
        if (!unique.empty() && (pt.diversity <= unique.back().diversity ||
                                pt.tau >= unique.back().tau)) {
            curve.truncated = true;
            continue;
        }
        unique.push_back(pt);
    }
    curve.points = std::move(unique);
    return curve;
}

ActivationBatch shuffle_baseline(const ActivationBatch& batch, std::uint64_t seed) {
    validate(batch);
    Rng rng = make_rng(seed, /*stream=*/23);
    ActivationBatch out = batch;
    std::vector<int> perm(batch.n);
    for (int f = 0; f < batch.d; ++f) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < batch.n; ++i) {
            const double* src = batch.map(perm[i], f);
            std::copy(src, src + batch.m, out.map(i, f));
        }
    }
    return out;
}

} // namespace cfcnn
