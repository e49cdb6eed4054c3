#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfcnn/common.hpp"
#include "cfcnn/nn.hpp"
#include "cfcnn/types.hpp"

namespace cfcnn {

// Labeled image collection with optional pixel-level concept masks.
// Images are [image][channel][row][col] doubles in [0, 1].
struct Dataset {
    int n = 0;
    int channels = 3;
    int h = 0;
    int w = 0;
    std::vector<double> images; // n * channels * h * w
    std::vector<int> labels;
    int num_classes = 0;
    std::vector<std::string> ids;
    std::optional<ConceptMaskSet> masks;
    std::vector<std::string> warnings; // generator/ingestion notes

    const double* image(int i) const {
        return images.data() + static_cast<std::size_t>(i) * channels * h * w;
    }
    double* image(int i) {
        return images.data() + static_cast<std::size_t>(i) * channels * h * w;
    }
};

// Deterministic stratified split; returns (train_indices, test_indices).
std::pair<std::vector<int>, std::vector<int>> split_dataset(const Dataset& data,
                                                            double test_fraction,
                                                            std::uint64_t seed);

// Shuffled minibatches over the given indices. When stratified, every batch
// contains at least one sample of every class (required by the
// multi-category loss); trailing samples that cannot fill a batch are
// dropped. Batches are deterministic for a fixed seed and epoch.
std::vector<std::vector<int>> make_batches(const Dataset& data,
                                           const std::vector<int>& indices, int batch_size,
                                           bool stratified, std::uint64_t seed, int epoch);

// Copies selected images into a dense batch volume.
BatchVolume gather_images(const Dataset& data, const std::vector<int>& indices);

// Extracts the mask subset for the given images (same order).
ConceptMaskSet gather_masks(const ConceptMaskSet& masks, const std::vector<int>& indices);

// Loads a dataset from an image directory (PPM), a labels CSV
// "id,label" and optionally a directory of PGM label maps plus a concept
// merge configuration. Images are resized to canvas x canvas.
Dataset load_directory_dataset(const std::string& images_dir, const std::string& labels_csv,
                               const std::string& masks_dir, const std::string& merge_config,
                               int canvas);

// Loads per-image PGM label maps named "<id>.pgm" and merges raw labels
// into concepts. The merge config is JSON: mode "merge" maps raw labels to
// concept names; mode "object_background_per_category" derives the T = 2C
// object/background concepts and needs per-image category labels.
ConceptMaskSet load_mask_directory(const std::string& masks_dir,
                                   const std::string& merge_config,
                                   const std::vector<std::string>& ids, int canvas,
                                   const std::vector<int>* category_labels = nullptr);

} // namespace cfcnn
