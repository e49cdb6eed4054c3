#include "cfcnn/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cfcnn/common.hpp"

namespace cfcnn {

using Json = nlohmann::json;

namespace {

void skip_pnm_whitespace(std::istream& in) {
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
}

int read_pnm_int(std::istream& in) {
    skip_pnm_whitespace(in);
    int value = 0;
    in >> value;
    return value;
}

} // namespace

void write_ppm(const std::string& path, const double* rgb, int h, int w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << "P6\n" << w << " " << h << "\n255\n";
    const int M = h * w;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(rgb[c * M + y * w + x], 0.0, 1.0);
                row[x * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
}

std::vector<double> read_ppm(const std::string& path, int& h, int& w) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::string magic;
    in >> magic;
    if (magic != "P6") throw ValidationError("'" + path + "' is not a binary PPM");
    w = read_pnm_int(in);
    h = read_pnm_int(in);
    const int maxval = read_pnm_int(in);
    if (maxval != 255) throw ValidationError("'" + path + "': only maxval 255 supported");
    in.get(); // single whitespace before payload
    const int M = h * w;
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(M) * 3);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw ValidationError("'" + path + "': truncated PPM payload");
    std::vector<double> img(static_cast<std::size_t>(3) * M);
    for (int u = 0; u < M; ++u)
        for (int c = 0; c < 3; ++c) img[c * M + u] = buf[u * 3 + c] / 255.0;
    return img;
}

void write_pgm(const std::string& path, const std::uint8_t* labels, int h, int w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(labels),
              static_cast<std::streamsize>(h) * w);
}

std::vector<std::uint8_t> read_pgm(const std::string& path, int& h, int& w) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ValidationError("'" + path + "' is not a binary PGM");
    w = read_pnm_int(in);
    h = read_pnm_int(in);
    const int maxval = read_pnm_int(in);
    if (maxval > 255) throw ValidationError("'" + path + "': only 8-bit PGM supported");
    in.get();
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw ValidationError("'" + path + "': truncated PGM payload");
    return buf;
}

void write_activation_dump(const std::string& path, const ActivationBatch& batch) {
    validate(batch);
    Json header;
    header["arrays"] = {
        {{"name", "values"}, {"dtype", "float32"}, {"shape", {batch.n, batch.d, batch.m}}}};
    header["image_ids"] = batch.image_ids;
    header["layer_name"] = batch.layer_name;
    header["map_shape"] = {batch.map_h, batch.map_w};
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out.write("CFTN", 4);
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(hlen));
    std::vector<float> payload(batch.values.begin(), batch.values.end());
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw ValidationError("write to '" + path + "' failed");
}

ActivationBatch read_activation_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "CFTN")
        throw ValidationError("'" + path + "' is not an activation dump");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    const Json header = Json::parse(htext);

    const auto& arr = header.at("arrays").at(0);
    if (arr.at("name") != "values" || arr.at("dtype") != "float32")
        throw ValidationError("'" + path + "': unexpected array layout");
    const auto shape = arr.at("shape");
    ActivationBatch batch;
    batch.n = shape.at(0);
    batch.d = shape.at(1);
    batch.m = shape.at(2);
    batch.map_h = header.at("map_shape").at(0);
    batch.map_w = header.at("map_shape").at(1);
    batch.image_ids = header.at("image_ids").get<std::vector<std::string>>();
    batch.layer_name = header.at("layer_name");

    std::vector<float> payload(static_cast<std::size_t>(batch.n) * batch.d * batch.m);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!in) throw ValidationError("'" + path + "': truncated payload");
    batch.values.assign(payload.begin(), payload.end());
    validate(batch);
    return batch;
}

void write_similarity_json(const std::string& path, const SimilarityMatrix& S) {
    Json j;
    j["entries"] = Json::array();
    for (Eigen::Index i = 0; i < S.entries.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < S.entries.cols(); ++k) row.push_back(S.entries(i, k));
        j["entries"].push_back(row);
    }
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

SimilarityMatrix read_similarity_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    Json j;
    in >> j;
    const auto& rows = j.at("entries");
    SimilarityMatrix S;
    const Eigen::Index d = static_cast<Eigen::Index>(rows.size());
    S.entries.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != d)
            throw ValidationError("'" + path + "': non-square similarity matrix");
        for (Eigen::Index k = 0; k < d; ++k) S.entries(i, k) = rows[i][k];
    }
    validate(S);
    return S;
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& points) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << "tau,diversity,inconsistency,n_defined_filters\n";
    out.precision(10);
    for (const auto& p : points)
        out << p.tau << "," << p.diversity << "," << p.inconsistency << ","
            << p.n_defined_filters << "\n";
}

void write_curve_json(const std::string& path, const std::vector<CurvePoint>& points,
                      bool truncated) {
    Json j;
    j["truncated"] = truncated;
    j["points"] = Json::array();
    for (const auto& p : points) {
        j["points"].push_back({{"tau", p.tau},
                               {"diversity", p.diversity},
                               {"inconsistency", p.inconsistency},
                               {"n_defined_filters", p.n_defined_filters}});
    }
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

} // namespace cfcnn
