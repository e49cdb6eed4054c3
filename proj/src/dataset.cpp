#include "cfcnn/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cfcnn/io.hpp"

namespace cfcnn {

namespace fs = std::filesystem;
using Json = nlohmann::json;

std::pair<std::vector<int>, std::vector<int>> split_dataset(const Dataset& data,
                                                            double test_fraction,
                                                            std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw ValidationError("split: test_fraction must lie in [0, 1)");
    Rng rng = make_rng(seed, /*stream=*/51);
    std::vector<std::vector<int>> by_class(std::max(data.num_classes, 1));
    for (int i = 0; i < data.n; ++i) by_class[data.labels[i]].push_back(i);

    std::vector<int> train, test;
    for (auto& idxs : by_class) {
        std::shuffle(idxs.begin(), idxs.end(), rng);
        const int n_test = static_cast<int>(std::lround(idxs.size() * test_fraction));
        for (std::size_t k = 0; k < idxs.size(); ++k)
            (static_cast<int>(k) < n_test ? test : train).push_back(idxs[k]);
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

std::vector<std::vector<int>> make_batches(const Dataset& data,
                                           const std::vector<int>& indices, int batch_size,
                                           bool stratified, std::uint64_t seed, int epoch) {
    if (batch_size < 1) throw ValidationError("make_batches: batch_size must be >= 1");
    Rng rng = make_rng(seed ^ (0xabcdull + epoch), /*stream=*/52);

    if (!stratified) {
        std::vector<int> order = indices;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::vector<int>> batches;
        for (std::size_t ofs = 0; ofs + batch_size <= order.size(); ofs += batch_size)
            batches.emplace_back(order.begin() + ofs, order.begin() + ofs + batch_size);
        return batches;
    }

    // Stratified: deal shuffled per-class pools round-robin so every batch
    // holds at least one sample of every class.
    std::vector<std::vector<int>> pools(data.num_classes);
    for (int idx : indices) pools[data.labels[idx]].push_back(idx);
    std::size_t min_pool = indices.size();
    for (auto& pool : pools) {
        if (pool.empty())
            throw ValidationError("make_batches: a class has no samples; cannot stratify");
        std::shuffle(pool.begin(), pool.end(), rng);
        min_pool = std::min(min_pool, pool.size());
    }
    if (batch_size < data.num_classes)
        throw ValidationError("make_batches: batch_size smaller than the class count");

    const int num_batches = std::min(static_cast<int>(indices.size()) / batch_size,
                                     static_cast<int>(min_pool));
    std::vector<std::vector<int>> batches(std::max(num_batches, 0));
    if (num_batches == 0) return batches;

    // One guaranteed sample per class per batch, then fill round-robin.
    std::vector<std::size_t> cursor(pools.size(), 0);
    for (int b = 0; b < num_batches; ++b)
        for (std::size_t c = 0; c < pools.size(); ++c)
            batches[b].push_back(pools[c][cursor[c]++]);
    std::vector<int> rest;
    for (std::size_t c = 0; c < pools.size(); ++c)
        rest.insert(rest.end(), pools[c].begin() + cursor[c], pools[c].end());
    std::shuffle(rest.begin(), rest.end(), rng);
    std::size_t r = 0;
    for (int b = 0; b < num_batches && r < rest.size(); ++b)
        while (static_cast<int>(batches[b].size()) < batch_size && r < rest.size())
            batches[b].push_back(rest[r++]);
    return batches;
}

BatchVolume gather_images(const Dataset& data, const std::vector<int>& indices) {
    BatchVolume vol;
    vol.resize(static_cast<int>(indices.size()), data.channels, data.h, data.w);
    for (std::size_t k = 0; k < indices.size(); ++k)
        std::copy(data.image(indices[k]), data.image(indices[k]) + vol.per_image(),
                  vol.image(static_cast<int>(k)));
    return vol;
}

ConceptMaskSet gather_masks(const ConceptMaskSet& masks, const std::vector<int>& indices) {
    ConceptMaskSet out = masks;
    out.n = static_cast<int>(indices.size());
    out.masks.assign(static_cast<std::size_t>(out.n) * masks.T * masks.M, 0);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t src = static_cast<std::size_t>(indices[k]) * masks.T * masks.M;
        std::copy(masks.masks.begin() + src, masks.masks.begin() + src + masks.T * masks.M,
                  out.masks.begin() + k * masks.T * masks.M);
    }
    return out;
}

namespace {

// Nearest-neighbor resize for label maps, bilinear for images.
std::vector<double> resize_image(const std::vector<double>& img, int h, int w, int out) {
    std::vector<double> dst(static_cast<std::size_t>(3) * out * out);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < out; ++y) {
            const double sy = out == 1 ? 0.0 : static_cast<double>(y) * (h - 1) / (out - 1);
            const int y0 = std::min(static_cast<int>(sy), h - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double fy = sy - y0;
            for (int x = 0; x < out; ++x) {
                const double sx =
                    out == 1 ? 0.0 : static_cast<double>(x) * (w - 1) / (out - 1);
                const int x0 = std::min(static_cast<int>(sx), w - 1);
                const int x1 = std::min(x0 + 1, w - 1);
                const double fx = sx - x0;
                const auto src = [&](int yy, int xx) {
                    return img[static_cast<std::size_t>(c) * h * w + yy * w + xx];
                };
                dst[static_cast<std::size_t>(c) * out * out + y * out + x] =
                    src(y0, x0) * (1 - fy) * (1 - fx) + src(y0, x1) * (1 - fy) * fx +
                    src(y1, x0) * fy * (1 - fx) + src(y1, x1) * fy * fx;
            }
        }
    }
    return dst;
}

std::vector<std::uint8_t> resize_labels(const std::vector<std::uint8_t>& map, int h, int w,
                                        int out) {
    std::vector<std::uint8_t> dst(static_cast<std::size_t>(out) * out);
    for (int y = 0; y < out; ++y) {
        const int sy = std::min(static_cast<int>(static_cast<double>(y) * h / out), h - 1);
        for (int x = 0; x < out; ++x) {
            const int sx = std::min(static_cast<int>(static_cast<double>(x) * w / out), w - 1);
            dst[static_cast<std::size_t>(y) * out + x] = map[static_cast<std::size_t>(sy) * w + sx];
        }
    }
    return dst;
}

} // namespace

Dataset load_directory_dataset(const std::string& images_dir, const std::string& labels_csv,
                               const std::string& masks_dir, const std::string& merge_config,
                               int canvas) {
    std::ifstream csv(labels_csv);
    if (!csv) throw ValidationError("cannot open labels CSV '" + labels_csv + "'");

    std::vector<std::pair<std::string, int>> entries;
    std::string line;
    while (std::getline(csv, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ValidationError("labels CSV: malformed line '" + line + "'");
        const std::string id = line.substr(0, comma);
        if (id == "id") continue; // header
        entries.emplace_back(id, std::stoi(line.substr(comma + 1)));
    }
    if (entries.size() < 2) throw ValidationError("labels CSV: need at least 2 images");

    Dataset data;
    data.n = static_cast<int>(entries.size());
    data.channels = 3;
    data.h = canvas;
    data.w = canvas;
    data.images.assign(static_cast<std::size_t>(data.n) * 3 * canvas * canvas, 0.0);
    for (const auto& [id, label] : entries) {
        data.ids.push_back(id);
        data.labels.push_back(label);
        data.num_classes = std::max(data.num_classes, label + 1);
    }
    for (int i = 0; i < data.n; ++i) {
        int h = 0, w = 0;
        const std::string path = (fs::path(images_dir) / (data.ids[i] + ".ppm")).string();
        std::vector<double> img = read_ppm(path, h, w);
        std::vector<double> resized =
            (h == canvas && w == canvas) ? std::move(img) : resize_image(img, h, w, canvas);
        std::copy(resized.begin(), resized.end(), data.image(i));
    }

    if (!masks_dir.empty())
        data.masks = load_mask_directory(masks_dir, merge_config, data.ids, canvas,
                                         &data.labels);
    return data;
}

ConceptMaskSet load_mask_directory(const std::string& masks_dir,
                                   const std::string& merge_config,
                                   const std::vector<std::string>& ids, int canvas,
                                   const std::vector<int>* category_labels) {
    if (merge_config.empty())
        throw ValidationError("masks: no concept merge config given");
    std::ifstream mc(merge_config);
    if (!mc) throw ValidationError("cannot open merge config '" + merge_config + "'");
    Json merge;
    mc >> merge;

    const std::string mode = merge.value("mode", "merge");
    ConceptMaskSet masks;
    masks.n = static_cast<int>(ids.size());
    masks.M = canvas * canvas;
    masks.img_h = canvas;
    masks.img_w = canvas;
    masks.partitioning = true;

    std::map<int, int> raw_to_concept;
    int num_classes = 0;
    if (mode == "merge") {
        // Keys of "map" are raw integer labels, or area names resolved
        // through an optional "label_names" table {"<int>": "<name>"}.
        std::map<std::string, int> area_to_raw;
        if (merge.contains("label_names"))
            for (const auto& [raw, name] : merge["label_names"].items())
                area_to_raw[name.get<std::string>()] = std::stoi(raw);
        std::map<std::string, int> name_to_idx;
        for (const auto& [key, name] : merge.at("map").items()) {
            const std::string cname = name.get<std::string>();
            if (!name_to_idx.count(cname)) {
                name_to_idx[cname] = static_cast<int>(masks.concept_names.size());
                masks.concept_names.push_back(cname);
            }
            int raw;
            if (const auto it = area_to_raw.find(key); it != area_to_raw.end()) {
                raw = it->second;
            } else {
                try {
                    raw = std::stoi(key);
                } catch (const std::exception&) {
                    throw ValidationError("merge config: key '" + key +
                                          "' is neither a raw label nor a known area name");
                }
            }
            raw_to_concept[raw] = name_to_idx[cname];
        }
        masks.T = static_cast<int>(masks.concept_names.size());
    } else if (mode == "object_background_per_category") {
        if (!category_labels)
            throw ValidationError("masks: per-category concepts need image labels");
        for (int y : *category_labels) num_classes = std::max(num_classes, y + 1);
        masks.T = 2 * num_classes;
        for (int c = 0; c < num_classes; ++c) {
            masks.concept_names.push_back("object-" + std::to_string(c));
            masks.concept_names.push_back("background-" + std::to_string(c));
        }
    } else {
        throw ValidationError("merge config: unknown mode '" + mode + "'");
    }

    masks.masks.assign(static_cast<std::size_t>(masks.n) * masks.T * masks.M, 0);
    for (int i = 0; i < masks.n; ++i) {
        int h = 0, w = 0;
        const std::string path = (fs::path(masks_dir) / (ids[i] + ".pgm")).string();
        std::vector<std::uint8_t> raw = read_pgm(path, h, w);
        std::vector<std::uint8_t> labels =
            (h == canvas && w == canvas) ? std::move(raw) : resize_labels(raw, h, w, canvas);
        for (int u = 0; u < masks.M; ++u) {
            int concept_idx;
            if (mode == "merge") {
                const auto it = raw_to_concept.find(labels[u]);
                if (it == raw_to_concept.end())
                    throw ValidationError("mask '" + path + "': raw label " +
                                          std::to_string(labels[u]) +
                                          " missing from merge config");
                concept_idx = it->second;
            } else {
                // Foreground = any nonzero raw label.
                concept_idx = 2 * (*category_labels)[i] + (labels[u] != 0 ? 0 : 1);
            }
            masks.at(i, concept_idx, u) = 1;
        }
    }
    return masks;
}

} // namespace cfcnn
