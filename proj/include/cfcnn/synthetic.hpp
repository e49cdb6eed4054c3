#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfcnn/dataset.hpp"
#include "cfcnn/types.hpp"

namespace cfcnn {

enum class PartShape { disk, bar, triangle };

struct PartSpec {
    std::string name;
    PartShape shape = PartShape::disk;
    std::array<double, 3> color{1.0, 0.0, 0.0};
    double size_min = 8.0; // radius-like extent in pixels
    double size_max = 12.0;
    double anchor_x = 32.0; // canvas coordinates
    double anchor_y = 32.0;
    double jitter = 4.0; // max absolute offset applied to the anchor
};

// Declarative description of the synthetic scenes: which parts exist, where
// they live, and which classes show which parts. Stands in for the part-
// annotated datasets at desk scale.
struct SyntheticSceneSpec {
    int canvas = 64;
    int background_texture = 0; // 0 noise, 1 gradient, 2 checker
    int num_classes = 2;
    std::vector<PartSpec> parts;
    std::vector<std::vector<int>> class_part_table; // per class: part indices

    static SyntheticSceneSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Two or three classes sharing one part and differing in the others.
SyntheticSceneSpec default_scene_spec(int num_classes);

// Checks feasibility (parts fit at maximal jitter and size) and returns
// human-readable warnings (e.g. indistinguishable classes). Throws
// ValidationError on infeasible specs.
std::vector<std::string> validate_scene_spec(const SyntheticSceneSpec& spec);

// Renders n images with pixel-exact partitioning part masks. Concepts are
// one per part plus "background". Deterministic for a fixed seed.
Dataset generate_synthetic(const SyntheticSceneSpec& spec, int n, std::uint64_t seed);

} // namespace cfcnn
