// cfcnn: train, cluster, evaluate and audit compositional CNNs.
//
// Exit codes: 0 success, 1 validation error, 2 divergence abort.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cfcnn/dataset.hpp"
#include "cfcnn/io.hpp"
#include "cfcnn/losses.hpp"
#include "cfcnn/metrics.hpp"
#include "cfcnn/run_config.hpp"
#include "cfcnn/spectral.hpp"
#include "cfcnn/synthetic.hpp"
#include "cfcnn/train.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;
using namespace cfcnn;

namespace {

std::optional<std::uint64_t> env_seed_override() {
    const char* env = std::getenv("CFCNN_SEED");
    if (!env || !*env) return std::nullopt;
    return std::strtoull(env, nullptr, 10);
}

void write_manifest(const RunManifest& manifest, const std::string& dir) {
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.to_json().dump(2) << "\n";
}

int cmd_train(const std::string& config_path) {
    RunConfig config = load_run_config(config_path);
    if (auto seed = env_seed_override()) config.training.random_seed = *seed;

    Dataset data = load_configured_dataset(config);
    for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";

    auto [train_idx, test_idx] = split_dataset(data, config.test_fraction,
                                               config.training.random_seed);
    Model model = build_model(config.arch, config.training.target_layer, config.num_classes,
                              data.h, data.w, config.training.random_seed);

    fs::create_directories(config.output_dir);
    {
        std::ofstream out(fs::path(config.output_dir) / "config.json");
        out << config.to_json().dump(2) << "\n";
    }

    RunManifest manifest = train(model, data, train_idx, config);
    model.save((fs::path(config.output_dir) / "model.bin").string());

    if (manifest.status == "diverged") {
        write_manifest(manifest, config.output_dir);
        std::cerr << "training diverged; partial manifest written to " << config.output_dir
                  << "\n";
        return 2;
    }

    if (!test_idx.empty()) {
        EvaluationResult eval = evaluate(model, data, test_idx, config,
                                         (fs::path(config.output_dir) / "eval").string());
        manifest.final_summary = eval.summary;
        std::cout << "test accuracy: " << eval.accuracy << "\n";
    }
    write_manifest(manifest, config.output_dir);
    std::cout << "run written to " << config.output_dir << "\n";
    return 0;
}

int cmd_cluster(const std::string& activations, const std::string& similarity, int k,
                const std::string& out, std::uint64_t seed) {
    SimilarityMatrix S;
    if (!activations.empty()) {
        const ActivationBatch batch = read_activation_dump(activations);
        S = pairwise_similarity(batch, 1e-8);
    } else if (!similarity.empty()) {
        S = read_similarity_json(similarity);
    } else {
        throw ValidationError("cluster: give --activations or --similarity");
    }
    if (auto env = env_seed_override()) seed = *env;

    const NcutResult result = spectral_partition(S, k, seed);
    Json j;
    j["groups"] = result.partition.groups();
    j["ncut_value"] = result.ncut_value;
    j["eigenvalues"] = std::vector<double>(
        result.eigenvalues.data(), result.eigenvalues.data() + result.eigenvalues.size());
    std::ofstream os(out);
    if (!os) throw ValidationError("cluster: cannot open '" + out + "' for writing");
    os << j.dump(2) << "\n";
    std::cout << "ncut " << result.ncut_value << ", partition written to " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& run_dir, const std::string& out) {
    RunConfig config = load_run_config((fs::path(run_dir) / "config.json").string());
    if (auto seed = env_seed_override()) config.training.random_seed = *seed;
    Model model = Model::load((fs::path(run_dir) / "model.bin").string());
    Dataset data = load_configured_dataset(config);
    auto [train_idx, test_idx] = split_dataset(data, config.test_fraction,
                                               config.training.random_seed);
    if (test_idx.empty()) throw ValidationError("evaluate: test split is empty");

    EvaluationResult eval =
        evaluate(model, data, test_idx, config, (fs::path(run_dir) / "eval").string());
    if (!out.empty()) write_curve_csv(out, eval.curve.points);

    const std::string manifest_path = (fs::path(run_dir) / "manifest.json").string();
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        Json mj;
        in >> mj;
        RunManifest manifest = RunManifest::from_json(mj);
        manifest.final_summary = eval.summary;
        write_manifest(manifest, run_dir);
    }
    std::cout << "accuracy " << eval.accuracy;
    if (eval.has_metrics)
        std::cout << ", " << eval.curve.points.size() << " curve points";
    else
        std::cout << " (metrics skipped: no masks)";
    std::cout << "\n";
    return 0;
}

int cmd_curve(const std::string& activations, const std::string& masks_dir,
              const std::string& merge_config, int points, double gamma,
              const std::string& out_prefix) {
    const ActivationBatch batch = read_activation_dump(activations);
    int canvas = 0;
    {
        // Mask size defines the image resolution for the projection.
        int h = 0, w = 0;
        const std::string first =
            (fs::path(masks_dir) / (batch.image_ids.at(0) + ".pgm")).string();
        read_pgm(first, h, w);
        if (h != w) throw ValidationError("curve: only square masks supported");
        canvas = h;
    }
    const ConceptMaskSet masks =
        load_mask_directory(masks_dir, merge_config, batch.image_ids, canvas);
    const ReceptiveFieldStack stack = project_rf(batch, canvas, canvas);
    const Curve curve = sample_curve(stack, masks, points, gamma);
    write_curve_csv(out_prefix + ".csv", curve.points);
    write_curve_json(out_prefix + ".json", curve.points, curve.truncated);
    std::cout << curve.points.size() << " points written to " << out_prefix << ".csv"
              << (curve.truncated ? " (truncated)" : "") << "\n";
    return 0;
}

int cmd_synth(const std::string& spec_path, int n, std::uint64_t seed,
              const std::string& out_dir) {
    SyntheticSceneSpec spec;
    if (spec_path.empty()) {
        spec = default_scene_spec(2);
    } else {
        std::ifstream in(spec_path);
        if (!in) throw ValidationError("synth: cannot open spec '" + spec_path + "'");
        Json j;
        in >> j;
        spec = SyntheticSceneSpec::from_json(j);
    }
    if (auto env = env_seed_override()) seed = *env;

    const Dataset data = generate_synthetic(spec, n, seed);
    for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";

    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "masks");
    std::ofstream labels(fs::path(out_dir) / "labels.csv");
    labels << "id,label\n";
    const int M = data.h * data.w;
    std::vector<std::uint8_t> label_map(M);
    for (int i = 0; i < data.n; ++i) {
        write_ppm((fs::path(out_dir) / "images" / (data.ids[i] + ".ppm")).string(),
                  data.image(i), data.h, data.w);
        const auto& masks = *data.masks;
        for (int u = 0; u < M; ++u) {
            label_map[u] = 0;
            for (int t = 0; t < masks.T; ++t)
                if (masks.at(i, t, u)) label_map[u] = static_cast<std::uint8_t>(t);
        }
        write_pgm((fs::path(out_dir) / "masks" / (data.ids[i] + ".pgm")).string(),
                  label_map.data(), data.h, data.w);
        labels << data.ids[i] << "," << data.labels[i] << "\n";
    }

    // Merge config mapping raw labels (= concept indices) to concept names.
    Json merge;
    merge["mode"] = "merge";
    merge["map"] = Json::object();
    for (int t = 0; t < data.masks->T; ++t)
        merge["map"][std::to_string(t)] = data.masks->concept_names[t];
    std::ofstream mc(fs::path(out_dir) / "concepts.json");
    mc << merge.dump(2) << "\n";

    std::ofstream sj(fs::path(out_dir) / "scene.json");
    sj << spec.to_json().dump(2) << "\n";
    std::cout << data.n << " images written to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"compositional CNN trainer and interpretability auditor"};
    app.require_subcommand(1);

    std::string config_path;
    auto* train_cmd = app.add_subcommand("train", "train a compositional CNN from a JSON config");
    train_cmd->add_option("--config", config_path, "run configuration JSON")->required();

    std::string activations, similarity, cluster_out = "partition.json";
    int k = 5;
    std::uint64_t cluster_seed = 0;
    auto* cluster_cmd =
        app.add_subcommand("cluster", "spectral-partition filters of an activation dump");
    cluster_cmd->add_option("--activations", activations, "activation dump file");
    cluster_cmd->add_option("--similarity", similarity, "similarity matrix JSON");
    cluster_cmd->add_option("--k", k, "number of groups")->required();
    cluster_cmd->add_option("--out", cluster_out, "output partition JSON");
    cluster_cmd->add_option("--seed", cluster_seed, "clustering seed");

    std::string run_dir, eval_out;
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a finished run directory");
    eval_cmd->add_option("--run", run_dir, "run directory (config.json + model.bin)")
        ->required();
    eval_cmd->add_option("--out", eval_out, "write the main curve CSV here");

    std::string curve_acts, curve_masks, curve_merge, curve_prefix = "curve";
    int curve_pts = 20;
    double curve_gamma = 0.2;
    auto* curve_cmd =
        app.add_subcommand("curve", "inconsistency-diversity curve from a dump and masks");
    curve_cmd->add_option("--activations", curve_acts, "activation dump file")->required();
    curve_cmd->add_option("--masks", curve_masks, "directory of <id>.pgm label maps")
        ->required();
    curve_cmd->add_option("--merge", curve_merge, "concept merge config JSON")->required();
    curve_cmd->add_option("--points", curve_pts, "number of diversity targets");
    curve_cmd->add_option("--gamma", curve_gamma, "diversity coverage fraction");
    curve_cmd->add_option("--out", curve_prefix, "output path prefix");

    std::string synth_spec, synth_out = "synth";
    int synth_n = 2000;
    std::uint64_t synth_seed = 7;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic part dataset");
    synth_cmd->add_option("--spec", synth_spec, "scene spec JSON (default: 2-class scene)");
    synth_cmd->add_option("--n", synth_n, "number of images");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");
    synth_cmd->add_option("--out", synth_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) return cmd_train(config_path);
        if (*cluster_cmd) return cmd_cluster(activations, similarity, k, cluster_out, cluster_seed);
        if (*eval_cmd) return cmd_evaluate(run_dir, eval_out);
        if (*curve_cmd)
            return cmd_curve(curve_acts, curve_masks, curve_merge, curve_pts, curve_gamma,
                             curve_prefix);
        if (*synth_cmd) return cmd_synth(synth_spec, synth_n, synth_seed, synth_out);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
