#include "cfcnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cfcnn/io.hpp"
#include "cfcnn/losses.hpp"
#include "cfcnn/spectral.hpp"

namespace cfcnn {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::vector<std::vector<int>> groups_of(const FilterPartition& p) { return p.groups(); }

// Forward the given images in fixed-size chunks without touching gradients,
// accumulating target-layer activations (and optionally logits).
void forward_in_chunks(Model& model, const Dataset& data, const std::vector<int>& indices,
                       int chunk, MomentAccumulator* accum, ActivationBatch* collected,
                       Eigen::MatrixXd* logits_out, const std::vector<int>* = nullptr) {
    const int n = static_cast<int>(indices.size());
    if (collected) {
        *collected = make_batch(n, model.target_filters(), model.target_map_h(),
                                model.target_map_w(), model.target_layer());
        for (int i = 0; i < n; ++i) collected->image_ids[i] = data.ids[indices[i]];
    }
    if (logits_out) logits_out->resize(n, model.num_classes());
    for (int ofs = 0; ofs < n; ofs += chunk) {
        const int len = std::min(chunk, n - ofs);
        std::vector<int> slice(indices.begin() + ofs, indices.begin() + ofs + len);
        BatchVolume vol = gather_images(data, slice);
        ActivationBatch act;
        const Eigen::MatrixXd logits = model.forward(vol, &act);
        if (accum) accum->add(act);
        if (collected)
            std::copy(act.values.begin(), act.values.end(),
                      collected->values.begin() +
                          static_cast<std::size_t>(ofs) * act.d * act.m);
        if (logits_out) logits_out->middleRows(ofs, len) = logits;
    }
}

double accuracy_of(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
    int correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index arg = 0;
        logits.row(i).maxCoeff(&arg);
        if (static_cast<int>(arg) == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

} // namespace

Json RunManifest::to_json() const {
    Json j;
    j["config"] = config_snapshot;
    j["status"] = status;
    j["initial_partition"] = initial_partition;
    j["initial_ncut"] = initial_ncut;
    j["epochs"] = Json::array();
    for (const auto& e : epochs) {
        Json ej;
        ej["epoch"] = e.epoch;
        ej["cls_loss"] = e.cls_loss;
        ej["group_loss"] = e.group_loss;
        if (e.multi_loss) ej["multi_loss"] = *e.multi_loss;
        ej["accuracy"] = e.accuracy;
        ej["ncut_value"] = e.ncut_value;
        ej["partition"] = e.partition;
        j["epochs"].push_back(ej);
    }
    j["final"] = final_summary;
    return j;
}

RunManifest RunManifest::from_json(const Json& j) {
    RunManifest m;
    m.config_snapshot = j.at("config");
    m.status = j.at("status");
    m.initial_partition = j.at("initial_partition").get<std::vector<std::vector<int>>>();
    m.initial_ncut = j.at("initial_ncut");
    for (const auto& ej : j.at("epochs")) {
        EpochRecord e;
        e.epoch = ej.at("epoch");
        e.cls_loss = ej.at("cls_loss");
        e.group_loss = ej.at("group_loss");
        if (ej.contains("multi_loss")) e.multi_loss = ej["multi_loss"].get<double>();
        e.accuracy = ej.at("accuracy");
        e.ncut_value = ej.at("ncut_value");
        e.partition = ej.at("partition").get<std::vector<std::vector<int>>>();
        m.epochs.push_back(std::move(e));
    }
    if (j.contains("final")) m.final_summary = j["final"];
    return m;
}

RunManifest train(Model& model, const Dataset& data, const std::vector<int>& train_indices,
                  const RunConfig& config) {
    const TrainingConfig& tc = config.training;
    validate(tc, model.target_filters());
    if (data.n == 0 || train_indices.empty())
        throw ValidationError("train: empty dataset");
    const bool multi = tc.task_mode == TaskMode::multi;
    const bool aux_active = tc.lambda_weight > 0.0 || (multi && tc.beta_weight > 0.0);
    if (aux_active && config.batch_size < 8)
        throw ValidationError("train: minibatch similarity needs batch_size >= 8");

    RunManifest manifest;
    manifest.config_snapshot = config.to_json();

    const int d = model.target_filters();
    const int m = model.target_map_h() * model.target_map_w();
    MomentAccumulator accum(d, m);

    // Initial A: spectral clustering of the initialized model's activations
    // over one pass through the training images.
    forward_in_chunks(model, data, train_indices, config.batch_size, &accum, nullptr,
                      nullptr);
    SimilarityMatrix S0 = accum.similarity(tc.epsilon_sigma);
    NcutResult init = spectral_partition(S0, tc.num_groups, tc.random_seed);
    FilterPartition partition = init.partition;
    manifest.initial_partition = groups_of(partition);
    manifest.initial_ncut = init.ncut_value;

    auto optimizer = make_optimizer(config.optimizer, config.learning_rate);
    std::vector<Param*> params = model.parameters();

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        accum.reset();
        const auto batches = make_batches(data, train_indices, config.batch_size, multi,
                                          tc.random_seed, epoch);
        if (batches.empty())
            throw ValidationError("train: no full batches; reduce batch_size");

        double sum_cls = 0.0, sum_group = 0.0, sum_multi = 0.0, sum_acc = 0.0;
        for (const auto& batch_idx : batches) {
            BatchVolume vol = gather_images(data, batch_idx);
            std::vector<int> labels(batch_idx.size());
            for (std::size_t k = 0; k < batch_idx.size(); ++k)
                labels[k] = data.labels[batch_idx[k]];

            ActivationBatch act;
            const Eigen::MatrixXd logits = model.forward(vol, &act);
            const bool act_finite =
                std::all_of(act.values.begin(), act.values.end(),
                            [](double v) { return std::isfinite(v); });
            if (!act_finite || !logits.allFinite()) {
                manifest.status = "diverged";
                return manifest;
            }

            const double cls = softmax_cross_entropy(logits, labels);
            Eigen::MatrixXd dlogits = softmax_cross_entropy_gradient(logits, labels);

            SimilarityComputation sim(act, tc.epsilon_sigma);
            const double gl = group_loss(sim.matrix(), partition);

            double total = tc.lambda_weight * gl + cls;
            std::vector<double> d_act;
            if (tc.lambda_weight > 0.0) {
                const Eigen::MatrixXd dS =
                    tc.lambda_weight * group_loss_gradient(sim.matrix(), partition);
                d_act = sim.backward(dS);
            }

            double ml = 0.0;
            if (multi) {
                const auto Z = group_activations(act, partition, labels);
                ml = multi_loss(Z, config.num_classes);
                total += tc.beta_weight * ml;
                if (tc.beta_weight > 0.0) {
                    const Eigen::MatrixXd dz =
                        tc.beta_weight * multi_loss_gradient(Z, config.num_classes);
                    std::vector<double> d_from_z =
                        group_activations_backward(act, partition, dz);
                    if (d_act.empty()) {
                        d_act = std::move(d_from_z);
                    } else {
                        for (std::size_t k = 0; k < d_act.size(); ++k)
                            d_act[k] += d_from_z[k];
                    }
                }
            }

            if (!std::isfinite(total)) {
                manifest.status = "diverged";
                return manifest;
            }

            model.zero_grad();
            model.backward(dlogits, d_act.empty() ? nullptr : &d_act);
            optimizer->step(params);

            accum.add(act);
            sum_cls += cls;
            sum_group += gl;
            sum_multi += ml;
            sum_acc += accuracy_of(logits, labels);
        }

        SimilarityMatrix S_epoch = accum.similarity(tc.epsilon_sigma);
        if (epoch % tc.partition_update_period == 0)
            partition = update_partition(S_epoch, tc, partition);

        EpochRecord rec;
        rec.epoch = epoch;
        const double nb = static_cast<double>(batches.size());
        rec.cls_loss = sum_cls / nb;
        rec.group_loss = sum_group / nb;
        if (multi) rec.multi_loss = sum_multi / nb;
        rec.accuracy = sum_acc / nb;
        rec.ncut_value = ncut_objective(S_epoch, partition);
        rec.partition = groups_of(partition);
        manifest.epochs.push_back(std::move(rec));
    }
    return manifest;
}

namespace {

// Blends a group's mean receptive field over an image as a red heat layer.
void write_overlay(const std::string& path, const double* image, int h, int w,
                   const std::vector<double>& heat) {
    const int M = h * w;
    double mx = 0.0;
    for (double v : heat) mx = std::max(mx, v);
    std::vector<double> out(static_cast<std::size_t>(3) * M);
    for (int u = 0; u < M; ++u) {
        const double a = mx > 0.0 ? heat[u] / mx : 0.0;
        const double gray =
            (image[u] + image[M + u] + image[2 * M + u]) / 3.0;
        out[u] = std::clamp(0.4 * gray + 0.6 * a, 0.0, 1.0);
        out[M + u] = 0.4 * gray;
        out[2 * M + u] = std::clamp(0.4 * gray + 0.6 * (1.0 - a) * 0.25, 0.0, 1.0);
    }
    write_ppm(path, out.data(), h, w);
}

Curve curve_for_batch(const ActivationBatch& act, const ConceptMaskSet& masks,
                      const RunConfig& config) {
    const ReceptiveFieldStack stack = project_rf(act, masks.img_h, masks.img_w);
    return sample_curve(stack, masks, config.curve_points, config.gamma);
}

Json curve_to_json(const Curve& c) {
    Json j;
    j["truncated"] = c.truncated;
    j["points"] = Json::array();
    for (const auto& p : c.points)
        j["points"].push_back({{"tau", p.tau},
                               {"diversity", p.diversity},
                               {"inconsistency", p.inconsistency},
                               {"n_defined_filters", p.n_defined_filters}});
    return j;
}

} // namespace

EvaluationResult evaluate(Model& model, const Dataset& data,
                          const std::vector<int>& test_indices, const RunConfig& config,
                          const std::string& out_dir) {
    if (test_indices.empty()) throw ValidationError("evaluate: empty test split");
    EvaluationResult result;

    ActivationBatch act;
    Eigen::MatrixXd logits;
    forward_in_chunks(model, data, test_indices, config.batch_size, nullptr, &act, &logits);
    std::vector<int> labels(test_indices.size());
    for (std::size_t k = 0; k < test_indices.size(); ++k)
        labels[k] = data.labels[test_indices[k]];
    result.accuracy = accuracy_of(logits, labels);
    result.summary["accuracy"] = result.accuracy;
    result.summary["n_test"] = static_cast<int>(test_indices.size());

    if (!out_dir.empty()) fs::create_directories(out_dir);

    if (!data.masks) {
        result.has_metrics = false;
        result.summary["warning"] = "no masks available; metrics skipped";
        return result;
    }

    const ConceptMaskSet masks = gather_masks(*data.masks, test_indices);
    result.curve = curve_for_batch(act, masks, config);
    const ActivationBatch shuffled = shuffle_baseline(act, config.training.random_seed + 1);
    result.shuffled_curve = curve_for_batch(shuffled, masks, config);
    result.has_metrics = true;

    result.summary["curve"] = curve_to_json(result.curve);
    result.summary["shuffled_curve"] = curve_to_json(result.shuffled_curve);

    if (!out_dir.empty()) {
        const std::string dump_path = (fs::path(out_dir) / "activations.bin").string();
        write_activation_dump(dump_path, act);
        result.summary["activations"] = dump_path;

        const std::string curve_csv = (fs::path(out_dir) / "curve.csv").string();
        const std::string curve_json = (fs::path(out_dir) / "curve.json").string();
        const std::string shuf_csv = (fs::path(out_dir) / "shuffled_curve.csv").string();
        const std::string shuf_json = (fs::path(out_dir) / "shuffled_curve.json").string();
        write_curve_csv(curve_csv, result.curve.points);
        write_curve_json(curve_json, result.curve.points, result.curve.truncated);
        write_curve_csv(shuf_csv, result.shuffled_curve.points);
        write_curve_json(shuf_json, result.shuffled_curve.points,
                         result.shuffled_curve.truncated);
        result.summary["curve_csv"] = curve_csv;
        result.summary["curve_json"] = curve_json;
        result.summary["shuffled_curve_csv"] = shuf_csv;
        result.summary["shuffled_curve_json"] = shuf_json;

        // Group heat-map overlays for a handful of test images.
        const SimilarityMatrix S = pairwise_similarity(act, config.training.epsilon_sigma);
        const NcutResult nc =
            spectral_partition(S, config.training.num_groups, config.training.random_seed);
        const ReceptiveFieldStack stack = project_rf(act, masks.img_h, masks.img_w);
        const int n_show = std::min(4, stack.n);
        for (int i = 0; i < n_show; ++i) {
            for (int g = 0; g < nc.partition.num_groups(); ++g) {
                std::vector<double> heat(stack.M, 0.0);
                for (int f : nc.partition.groups()[g])
                    for (int u = 0; u < stack.M; ++u) heat[u] += stack.raw_map(i, f)[u];
                const std::string path =
                    (fs::path(out_dir) /
                     ("overlay_img" + std::to_string(i) + "_group" + std::to_string(g) +
                      ".ppm"))
                        .string();
                write_overlay(path, data.image(test_indices[i]), masks.img_h, masks.img_w,
                              heat);
            }
        }
    }
    return result;
}

} // namespace cfcnn
