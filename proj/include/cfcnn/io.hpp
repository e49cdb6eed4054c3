#pragma once

#include <string>
#include <vector>

#include "cfcnn/types.hpp"

namespace cfcnn {

// --- Portable pixmap (binary P6/P5) ---------------------------------------

// RGB image in [0,1], [channel][row][col].
void write_ppm(const std::string& path, const double* rgb, int h, int w);
std::vector<double> read_ppm(const std::string& path, int& h, int& w);

// 8-bit label map.
void write_pgm(const std::string& path, const std::uint8_t* labels, int h, int w);
std::vector<std::uint8_t> read_pgm(const std::string& path, int& h, int& w);

// --- Activation dump container ---------------------------------------------
// Single binary file: magic "CFTN", a length-prefixed JSON header listing the
// named arrays, then the raw payloads. values are stored float32; image ids,
// layer name and map shape ride along in the header.

void write_activation_dump(const std::string& path, const ActivationBatch& batch);
ActivationBatch read_activation_dump(const std::string& path);

// Similarity matrix as JSON {"entries": [[...], ...]}.
void write_similarity_json(const std::string& path, const SimilarityMatrix& S);
SimilarityMatrix read_similarity_json(const std::string& path);

// --- Curve export ------------------------------------------------------------

struct CurvePoint;

// CSV with header tau,diversity,inconsistency,n_defined_filters plus a JSON
// mirror carrying the truncation flag.
void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& points);
void write_curve_json(const std::string& path, const std::vector<CurvePoint>& points,
                      bool truncated);

} // namespace cfcnn
