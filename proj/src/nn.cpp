#include "cfcnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cfcnn {

namespace {

using Json = nlohmann::json;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRowMat = Eigen::Map<RowMat>;
using ConstMapRowMat = Eigen::Map<const RowMat>;

// Gathers 3x3 patches of one image into a (in_c*9) x (h*w) matrix.
// Out-of-range taps are clamped (replicate) or skipped (zero).
void im2col(const double* img, int c, int h, int w, PadMode pad, RowMat& cols) {
    cols.setZero(static_cast<Eigen::Index>(c) * 9, static_cast<Eigen::Index>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        const double* plane = img + static_cast<std::size_t>(ch) * h * w;
        for (int ky = -1; ky <= 1; ++ky) {
            for (int kx = -1; kx <= 1; ++kx) {
                const Eigen::Index row = ch * 9 + (ky + 1) * 3 + (kx + 1);
                for (int y = 0; y < h; ++y) {
                    int sy = y + ky;
                    if (pad == PadMode::replicate) sy = std::clamp(sy, 0, h - 1);
                    if (sy < 0 || sy >= h) continue;
                    const double* src_row = plane + static_cast<std::size_t>(sy) * w;
                    double* dst = cols.row(row).data() + static_cast<std::size_t>(y) * w;
                    for (int x = 0; x < w; ++x) {
                        int sx = x + kx;
                        if (pad == PadMode::replicate) sx = std::clamp(sx, 0, w - 1);
                        if (sx < 0 || sx >= w) continue;
                        dst[x] = src_row[sx];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds patch gradients back onto the image.
void col2im(const RowMat& dcols, int c, int h, int w, PadMode pad, double* dimg) {
    for (int ch = 0; ch < c; ++ch) {
        double* plane = dimg + static_cast<std::size_t>(ch) * h * w;
        for (int ky = -1; ky <= 1; ++ky) {
            for (int kx = -1; kx <= 1; ++kx) {
                const Eigen::Index row = ch * 9 + (ky + 1) * 3 + (kx + 1);
                const double* src = dcols.row(row).data();
                for (int y = 0; y < h; ++y) {
                    int sy = y + ky;
                    if (pad == PadMode::replicate) sy = std::clamp(sy, 0, h - 1);
                    if (sy < 0 || sy >= h) continue;
                    for (int x = 0; x < w; ++x) {
                        int sx = x + kx;
                        if (pad == PadMode::replicate) sx = std::clamp(sx, 0, w - 1);
                        if (sx < 0 || sx >= w) continue;
                        plane[static_cast<std::size_t>(sy) * w + sx] +=
                            src[static_cast<std::size_t>(y) * w + x];
                    }
                }
            }
        }
    }
}

} // namespace

Conv3x3::Conv3x3(int in_c_, int out_c_, PadMode pad_) : in_c(in_c_), out_c(out_c_), pad(pad_) {
    weight.resize(static_cast<std::size_t>(out_c) * in_c * 9);
    bias.resize(out_c);
}

void Conv3x3::init_weights(Rng& rng) {
    const double bound = std::sqrt(6.0 / (in_c * 9 + out_c * 9));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (double& x : weight.value) x = uni(rng);
    std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

void Conv3x3::forward(const BatchVolume& in, BatchVolume& out) const {
    out.resize(in.n, out_c, in.h, in.w);
    ConstMapRowMat W(weight.value.data(), out_c, static_cast<Eigen::Index>(in_c) * 9);
    Eigen::Map<const Eigen::VectorXd> b(bias.value.data(), out_c);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < in.n; ++i) {
        RowMat cols;
        im2col(in.image(i), in.c, in.h, in.w, pad, cols);
        MapRowMat o(out.image(i), out_c, static_cast<Eigen::Index>(in.h) * in.w);
        o.noalias() = W * cols;
        o.colwise() += b;
    }
}

void Conv3x3::backward(const BatchVolume& in, const BatchVolume& dout, BatchVolume* din) {
    ConstMapRowMat W(weight.value.data(), out_c, static_cast<Eigen::Index>(in_c) * 9);
    if (din) din->resize(in.n, in.c, in.h, in.w);

    // Per-image parameter partials, reduced sequentially afterwards so the
    // result does not depend on the thread schedule.
    std::vector<RowMat> dw_slabs(in.n);
    std::vector<Eigen::VectorXd> db_slabs(in.n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < in.n; ++i) {
        RowMat cols;
        im2col(in.image(i), in.c, in.h, in.w, pad, cols);
        ConstMapRowMat dY(dout.image(i), out_c, static_cast<Eigen::Index>(in.h) * in.w);
        dw_slabs[i].noalias() = dY * cols.transpose();
        db_slabs[i] = dY.rowwise().sum();
        if (din) {
            RowMat dcols = W.transpose() * dY;
            std::memset(din->image(i), 0, sizeof(double) * din->per_image());
            col2im(dcols, in.c, in.h, in.w, pad, din->image(i));
        }
    }
    MapRowMat dW(weight.grad.data(), out_c, static_cast<Eigen::Index>(in_c) * 9);
    Eigen::Map<Eigen::VectorXd> db(bias.grad.data(), out_c);
    for (int i = 0; i < in.n; ++i) {
        dW += dw_slabs[i];
        db += db_slabs[i];
    }
}

Linear::Linear(int in_features_, int out_features_)
    : in_features(in_features_), out_features(out_features_) {
    weight.resize(static_cast<std::size_t>(out_features) * in_features);
    bias.resize(out_features);
}

void Linear::init_weights(Rng& rng) {
    const double bound = std::sqrt(6.0 / (in_features + out_features));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (double& x : weight.value) x = uni(rng);
    std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Eigen::MatrixXd Linear::forward(const BatchVolume& in) const {
    if (static_cast<int>(in.per_image()) != in_features)
        throw ValidationError("linear: input features mismatch");
    ConstMapRowMat W(weight.value.data(), out_features, in_features);
    ConstMapRowMat X(in.v.data(), in.n, in_features);
    Eigen::MatrixXd out = X * W.transpose();
    out.rowwise() += Eigen::Map<const Eigen::VectorXd>(bias.value.data(), out_features)
                         .transpose();
    return out;
}

void Linear::backward(const BatchVolume& in, const Eigen::MatrixXd& dout, BatchVolume& din) {
    ConstMapRowMat W(weight.value.data(), out_features, in_features);
    ConstMapRowMat X(in.v.data(), in.n, in_features);
    MapRowMat dW(weight.grad.data(), out_features, in_features);
    dW.noalias() += dout.transpose() * X;
    Eigen::Map<Eigen::VectorXd>(bias.grad.data(), out_features) +=
        dout.colwise().sum().transpose();
    din.resize(in.n, in.c, in.h, in.w);
    MapRowMat dX(din.v.data(), in.n, in_features);
    dX.noalias() = dout * W;
}

namespace {

void relu_inplace(BatchVolume& x) {
    for (double& v : x.v)
        if (v < 0.0) v = 0.0;
}

void maxpool2_forward(const BatchVolume& in, BatchVolume& out, std::vector<int>& argmax) {
    const int oh = in.h / 2, ow = in.w / 2;
    out.resize(in.n, in.c, oh, ow);
    argmax.assign(out.v.size(), 0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < in.n; ++i) {
        const double* src = in.image(i);
        double* dst = out.image(i);
        int* am = argmax.data() + out.per_image() * i;
        for (int ch = 0; ch < in.c; ++ch) {
            const double* plane = src + static_cast<std::size_t>(ch) * in.h * in.w;
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x) {
                    int best_idx = (2 * y) * in.w + 2 * x;
                    double best = plane[best_idx];
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int idx = (2 * y + dy) * in.w + (2 * x + dx);
                            if (plane[idx] > best) {
                                best = plane[idx];
                                best_idx = idx;
                            }
                        }
                    const std::size_t o = static_cast<std::size_t>(ch) * oh * ow +
                                          static_cast<std::size_t>(y) * ow + x;
                    dst[o] = best;
                    am[o] = ch * in.h * in.w + best_idx;
                }
            }
        }
    }
}

void maxpool2_backward(const BatchVolume& dout, const std::vector<int>& argmax,
                       BatchVolume& din) {
    std::fill(din.v.begin(), din.v.end(), 0.0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < dout.n; ++i) {
        const double* g = dout.image(i);
        const int* am = argmax.data() + dout.per_image() * i;
        double* dst = din.image(i);
        for (std::size_t k = 0; k < dout.per_image(); ++k) dst[am[k]] += g[k];
    }
}

} // namespace

ArchDescription describe_arch(const std::string& arch, int in_h, int in_w) {
    ArchDescription a;
    a.arch_name = arch;
    a.in_h = in_h;
    a.in_w = in_w;
    if (arch == "tiny-cnn") {
        a.blocks = {{"conv1", 16, true},
                    {"conv2", 16, true},
                    {"conv3", 32, true},
                    {"conv4", 32, true}};
    } else if (arch == "vgg-like") {
        a.blocks = {{"conv1_1", 16, false}, {"conv1_2", 16, true},
                    {"conv2_1", 32, false}, {"conv2_2", 32, true},
                    {"conv3_1", 64, false}, {"conv3_2", 64, true}};
    } else {
        throw ValidationError("unknown architecture '" + arch + "'");
    }
    return a;
}

Model::Model(ArchDescription arch, std::string target_layer, int num_classes,
             std::uint64_t seed)
    : arch_(std::move(arch)), target_layer_(std::move(target_layer)),
      num_classes_(num_classes) {
    int c = arch_.in_channels;
    int h = arch_.in_h, w = arch_.in_w;
    for (std::size_t b = 0; b < arch_.blocks.size(); ++b) {
        const auto& blk = arch_.blocks[b];
        stages_.emplace_back(blk.name, c, blk.out_channels, blk.pool_after,
                             PadMode::replicate);
        c = blk.out_channels;
        if (blk.name == target_layer_) {
            target_stage_ = static_cast<int>(b);
            target_h_ = h;
            target_w_ = w;
        }
        if (blk.pool_after) {
            h /= 2;
            w /= 2;
        }
    }
    if (target_stage_ < 0)
        throw ValidationError("model: target layer '" + target_layer_ +
                              "' not found in arch '" + arch_.arch_name + "'");
    fc_ = std::make_unique<Linear>(c * h * w, num_classes_);

    Rng rng = make_rng(seed, /*stream=*/31);
    for (auto& st : stages_) st.conv.init_weights(rng);
    fc_->init_weights(rng);
}

Eigen::MatrixXd Model::forward(const BatchVolume& images, ActivationBatch* target_out) {
    if (images.c != arch_.in_channels || images.h != arch_.in_h || images.w != arch_.in_w)
        throw ValidationError("model: input shape mismatch");
    input_cache_ = images;
    const BatchVolume* cur = &input_cache_;
    for (auto& st : stages_) {
        st.conv.forward(*cur, st.post_act);
        relu_inplace(st.post_act);
        if (st.pool_after) {
            maxpool2_forward(st.post_act, st.pooled, st.pool_argmax);
            cur = &st.pooled;
        } else {
            cur = &st.post_act;
        }
    }
    if (target_out) {
        const BatchVolume& act = stages_[target_stage_].post_act;
        *target_out = make_batch(act.n, act.c, act.h, act.w, target_layer_);
        std::copy(act.v.begin(), act.v.end(), target_out->values.begin());
    }
    return fc_->forward(*cur);
}

void Model::backward(const Eigen::MatrixXd& dlogits, const std::vector<double>* d_target) {
    const BatchVolume& head_in =
        stages_.back().pool_after ? stages_.back().pooled : stages_.back().post_act;
    BatchVolume grad;
    fc_->backward(head_in, dlogits, grad);

    for (int s = static_cast<int>(stages_.size()) - 1; s >= 0; --s) {
        ConvStage& st = stages_[s];
        BatchVolume d_post;
        if (st.pool_after) {
            d_post.resize(st.post_act.n, st.post_act.c, st.post_act.h, st.post_act.w);
            maxpool2_backward(grad, st.pool_argmax, d_post);
        } else {
            d_post = std::move(grad);
        }
        if (s == target_stage_ && d_target) {
            if (d_target->size() != d_post.v.size())
                throw ValidationError("model: target gradient size mismatch");
            for (std::size_t k = 0; k < d_post.v.size(); ++k)
                d_post.v[k] += (*d_target)[k];
        }
        // ReLU: gradient passes where the activation is strictly positive.
        for (std::size_t k = 0; k < d_post.v.size(); ++k)
            if (st.post_act.v[k] <= 0.0) d_post.v[k] = 0.0;

        const BatchVolume& in = (s == 0) ? input_cache_
                                         : (stages_[s - 1].pool_after ? stages_[s - 1].pooled
                                                                      : stages_[s - 1].post_act);
        if (s == 0) {
            st.conv.backward(in, d_post, nullptr);
        } else {
            st.conv.backward(in, d_post, &grad);
        }
    }
}

void Model::zero_grad() {
    for (Param* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

std::vector<Param*> Model::parameters() {
    std::vector<Param*> ps;
    for (auto& st : stages_) {
        ps.push_back(&st.conv.weight);
        ps.push_back(&st.conv.bias);
    }
    ps.push_back(&fc_->weight);
    ps.push_back(&fc_->bias);
    return ps;
}

int Model::target_filters() const { return stages_[target_stage_].conv.out_c; }

void Model::save(const std::string& path) const {
    Json header;
    header["arch"] = arch_.arch_name;
    header["target_layer"] = target_layer_;
    header["num_classes"] = num_classes_;
    header["in_h"] = arch_.in_h;
    header["in_w"] = arch_.in_w;
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("model: cannot open '" + path + "' for writing");
    out.write("CFMD", 4);
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(hlen));
    for (const auto& st : stages_) {
        for (const Param* p : {&st.conv.weight, &st.conv.bias})
            out.write(reinterpret_cast<const char*>(p->value.data()),
                      static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    for (const Param* p : {&fc_->weight, &fc_->bias})
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!out) throw ValidationError("model: write to '" + path + "' failed");
}

Model Model::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("model: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "CFMD")
        throw ValidationError("model: '" + path + "' is not a model file");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    const Json header = Json::parse(htext);

    Model model = build_model(header.at("arch"), header.at("target_layer"),
                              header.at("num_classes"), header.at("in_h"),
                              header.at("in_w"), /*seed=*/0);
    for (Param* p : model.parameters()) {
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!in) throw ValidationError("model: truncated file '" + path + "'");
    return model;
}

Model build_model(const std::string& arch, const std::string& target_layer, int num_classes,
                  int in_h, int in_w, std::uint64_t seed) {
    if (num_classes < 2) throw ValidationError("model: need at least 2 classes");
    return Model(describe_arch(arch, in_h, in_w), target_layer, num_classes, seed);
}

SgdOptimizer::SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

void SgdOptimizer::step(const std::vector<Param*>& params) {
    if (velocity_.empty()) {
        velocity_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i)
            velocity_[i].assign(params[i]->value.size(), 0.0);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        auto& vel = velocity_[i];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            vel[k] = momentum_ * vel[k] + p.grad[k];
            p.value[k] -= lr_ * vel[k];
        }
    }
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(const std::vector<Param*>& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i]->value.size(), 0.0);
            v_[i].assign(params[i]->value.size(), 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * p.grad[k];
            v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * p.grad[k] * p.grad[k];
            p.value[k] -= lr_ * (m_[i][k] / bc1) / (std::sqrt(v_[i][k] / bc2) + eps_);
        }
    }
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double lr) {
    if (name == "adam") return std::make_unique<AdamOptimizer>(lr);
    if (name == "sgd") return std::make_unique<SgdOptimizer>(lr, 0.9);
    throw ValidationError("unknown optimizer '" + name + "'");
}

} // namespace cfcnn
