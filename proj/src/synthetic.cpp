#include "cfcnn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cfcnn {

using Json = nlohmann::json;

namespace {

PartShape shape_from_string(const std::string& s) {
    if (s == "disk") return PartShape::disk;
    if (s == "bar") return PartShape::bar;
    if (s == "triangle") return PartShape::triangle;
    throw ValidationError("scene spec: unknown shape '" + s + "'");
}

std::string shape_to_string(PartShape s) {
    switch (s) {
        case PartShape::disk: return "disk";
        case PartShape::bar: return "bar";
        case PartShape::triangle: return "triangle";
    }
    return "disk";
}

// True if the pixel center (x, y) lies inside the part placed at (cx, cy)
// with extent `size`.
bool inside_part(const PartSpec& part, double cx, double cy, double size, int x, int y) {
    const double dx = x + 0.5 - cx;
    const double dy = y + 0.5 - cy;
    switch (part.shape) {
        case PartShape::disk:
            return dx * dx + dy * dy <= size * size;
        case PartShape::bar:
            return std::abs(dx) <= size && std::abs(dy) <= size * 0.35;
        case PartShape::triangle:
            // Upward triangle: |dx| grows linearly with depth below the apex.
            return dy >= -size && dy <= size && std::abs(dx) <= (dy + size) * 0.6;
    }
    return false;
}

// Two textured regions split at the horizon: a light "sky" band above and a
// darker "ground" band below. Each is its own concept, which keeps concept
// areas balanced against the parts instead of one dominant background.
void paint_background(std::vector<double>& img, int canvas, int texture, Rng& rng) {
    std::uniform_real_distribution<double> noise(-0.04, 0.04);
    std::uniform_real_distribution<double> phase01(0.0, 1.0);
    const double phase = phase01(rng);
    const int M = canvas * canvas;
    const int horizon = canvas / 2;
    for (int y = 0; y < canvas; ++y) {
        const bool sky = y < horizon;
        for (int x = 0; x < canvas; ++x) {
            double r, g, b;
            if (sky) {
                double base;
                switch (texture) {
                    case 1: base = 0.75 - 0.2 * (static_cast<double>(y) / horizon); break;
                    case 2: base = (((x / 8) % 2) == 0) ? 0.75 : 0.62; break;
                    default:
                        base = 0.7 + 0.06 * std::sin(2.0 * M_PI * (x / 16.0 + phase));
                }
                r = base * 0.85;
                g = base * 0.9;
                b = base;
            } else {
                double base;
                switch (texture) {
                    case 1: base = 0.25 + 0.15 * (static_cast<double>(y - horizon) / horizon); break;
                    case 2: base = (((x / 4) + (y / 4)) % 2 == 0) ? 0.3 : 0.42; break;
                    default:
                        base = 0.35 + 0.07 * std::sin(2.0 * M_PI * (x / 8.0 + phase)) *
                                          std::cos(2.0 * M_PI * (y / 8.0 + phase));
                }
                r = base;
                g = base * 0.85;
                b = base * 0.6;
            }
            const int u = y * canvas + x;
            img[0 * M + u] = std::clamp(r + noise(rng), 0.0, 1.0);
            img[1 * M + u] = std::clamp(g + noise(rng), 0.0, 1.0);
            img[2 * M + u] = std::clamp(b + noise(rng), 0.0, 1.0);
        }
    }
}

} // namespace

SyntheticSceneSpec SyntheticSceneSpec::from_json(const Json& j) {
    SyntheticSceneSpec spec;
    spec.canvas = j.value("canvas", 64);
    spec.background_texture = j.value("background_texture", 0);
    spec.num_classes = j.at("num_classes");
    for (const auto& pj : j.at("parts")) {
        PartSpec p;
        p.name = pj.at("name");
        p.shape = shape_from_string(pj.at("shape"));
        if (pj.contains("color")) {
            for (int c = 0; c < 3; ++c) p.color[c] = pj["color"][c];
        }
        p.size_min = pj.value("size_min", 8.0);
        p.size_max = pj.value("size_max", 12.0);
        p.anchor_x = pj.at("anchor_x");
        p.anchor_y = pj.at("anchor_y");
        p.jitter = pj.value("jitter", 4.0);
        spec.parts.push_back(p);
    }
    for (const auto& row : j.at("class_part_table"))
        spec.class_part_table.push_back(row.get<std::vector<int>>());
    return spec;
}

Json SyntheticSceneSpec::to_json() const {
    Json j;
    j["canvas"] = canvas;
    j["background_texture"] = background_texture;
    j["num_classes"] = num_classes;
    j["parts"] = Json::array();
    for (const auto& p : parts) {
        Json pj;
        pj["name"] = p.name;
        pj["shape"] = shape_to_string(p.shape);
        pj["color"] = p.color;
        pj["size_min"] = p.size_min;
        pj["size_max"] = p.size_max;
        pj["anchor_x"] = p.anchor_x;
        pj["anchor_y"] = p.anchor_y;
        pj["jitter"] = p.jitter;
        j["parts"].push_back(pj);
    }
    j["class_part_table"] = class_part_table;
    return j;
}

SyntheticSceneSpec default_scene_spec(int num_classes) {
    if (num_classes < 2 || num_classes > 3)
        throw ValidationError("default scene spec supports 2 or 3 classes");
    SyntheticSceneSpec spec;
    spec.canvas = 64;
    spec.background_texture = 0;
    spec.num_classes = num_classes;
    // Parts roam most of the canvas (jitter 17 around the center) so that
    // filters must track them and the shuffled baseline genuinely breaks
    // the image/mask alignment.
    spec.parts = {
        {"disk", PartShape::disk, {0.9, 0.15, 0.1}, 10.0, 14.0, 32.0, 32.0, 17.0},
        {"bar", PartShape::bar, {0.1, 0.2, 0.9}, 11.0, 14.0, 32.0, 32.0, 17.0},
        {"triangle", PartShape::triangle, {0.1, 0.8, 0.2}, 10.0, 13.0, 32.0, 32.0, 17.0},
    };
    if (num_classes == 2) {
        spec.class_part_table = {{0, 1}, {0, 2}};
    } else {
        spec.class_part_table = {{0, 1}, {0, 2}, {1, 2}};
    }
    return spec;
}

std::vector<std::string> validate_scene_spec(const SyntheticSceneSpec& spec) {
    if (spec.canvas < 8) throw ValidationError("scene spec: canvas too small");
    if (spec.num_classes < 2) throw ValidationError("scene spec: need >= 2 classes");
    if (spec.parts.empty()) throw ValidationError("scene spec: no parts");
    if (static_cast<int>(spec.class_part_table.size()) != spec.num_classes)
        throw ValidationError("scene spec: class_part_table rows != num_classes");

    for (const auto& p : spec.parts) {
        if (p.size_min <= 0 || p.size_max < p.size_min)
            throw ValidationError("scene spec: bad size range for part '" + p.name + "'");
        const double reach = p.size_max + p.jitter;
        if (p.anchor_x - reach < 0 || p.anchor_x + reach > spec.canvas ||
            p.anchor_y - reach < 0 || p.anchor_y + reach > spec.canvas)
            throw ValidationError("scene spec: part '" + p.name +
                                  "' cannot fit the canvas at maximal jitter");
    }
    for (const auto& row : spec.class_part_table) {
        if (row.empty())
            throw ValidationError("scene spec: class with no parts");
        for (int idx : row)
            if (idx < 0 || idx >= static_cast<int>(spec.parts.size()))
                throw ValidationError("scene spec: part index out of range in class table");
    }

    std::vector<std::string> warnings;
    for (int a = 0; a < spec.num_classes; ++a) {
        for (int b = a + 1; b < spec.num_classes; ++b) {
            std::set<int> sa(spec.class_part_table[a].begin(), spec.class_part_table[a].end());
            std::set<int> sb(spec.class_part_table[b].begin(), spec.class_part_table[b].end());
            if (sa == sb)
                warnings.push_back("classes " + std::to_string(a) + " and " +
                                   std::to_string(b) + " indistinguishable (same parts)");
        }
    }
    return warnings;
}

Dataset generate_synthetic(const SyntheticSceneSpec& spec, int n, std::uint64_t seed) {
    auto warnings = validate_scene_spec(spec);
    if (n < 1) throw ValidationError("generate_synthetic: n must be >= 1");

    const int canvas = spec.canvas;
    const int M = canvas * canvas;
    const int T = static_cast<int>(spec.parts.size()) + 2; // + sky + ground

    Dataset data;
    data.n = n;
    data.channels = 3;
    data.h = canvas;
    data.w = canvas;
    data.num_classes = spec.num_classes;
    data.images.assign(static_cast<std::size_t>(n) * 3 * M, 0.0);
    data.labels.resize(n);
    data.ids.resize(n);
    data.warnings = warnings;

    ConceptMaskSet masks;
    masks.n = n;
    masks.T = T;
    masks.M = M;
    masks.img_h = canvas;
    masks.img_w = canvas;
    masks.partitioning = true;
    masks.masks.assign(static_cast<std::size_t>(n) * T * M, 0);
    for (const auto& p : spec.parts) masks.concept_names.push_back(p.name);
    masks.concept_names.push_back("sky");
    masks.concept_names.push_back("ground");

    Rng rng = make_rng(seed, /*stream=*/41);
    std::uniform_real_distribution<double> jit(-1.0, 1.0);
    std::uniform_real_distribution<double> uni01(0.0, 1.0);

    std::vector<double> img(3 * M);
    std::vector<int> label_map(M); // concept per pixel; T-1 = background
    for (int i = 0; i < n; ++i) {
        const int cls = i % spec.num_classes; // balanced classes
        data.labels[i] = cls;
        data.ids[i] = "synth" + std::to_string(i);

        paint_background(img, canvas, spec.background_texture, rng);
        const int horizon = canvas / 2;
        for (int y = 0; y < canvas; ++y)
            for (int x = 0; x < canvas; ++x)
                label_map[y * canvas + x] = y < horizon ? T - 2 : T - 1;

        for (int part_idx : spec.class_part_table[cls]) {
            const PartSpec& p = spec.parts[part_idx];
            const double cx = p.anchor_x + jit(rng) * p.jitter;
            const double cy = p.anchor_y + jit(rng) * p.jitter;
            const double size = p.size_min + uni01(rng) * (p.size_max - p.size_min);
            const double shade = 0.85 + 0.15 * uni01(rng);
            for (int y = 0; y < canvas; ++y) {
                for (int x = 0; x < canvas; ++x) {
                    if (!inside_part(p, cx, cy, size, x, y)) continue;
                    const int u = y * canvas + x;
                    label_map[u] = part_idx; // later parts overwrite earlier
                    for (int c = 0; c < 3; ++c)
                        img[c * M + u] = std::clamp(p.color[c] * shade, 0.0, 1.0);
                }
            }
        }

        std::copy(img.begin(), img.end(), data.image(i));
        for (int u = 0; u < M; ++u) masks.at(i, label_map[u], u) = 1;
    }
    data.masks = std::move(masks);
    return data;
}

} // namespace cfcnn
