#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfcnn/common.hpp"
#include "cfcnn/types.hpp"

namespace cfcnn {

// Dense activation tensor [image][channel][row][col].
struct BatchVolume {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    void resize(int n_, int c_, int h_, int w_) {
        n = n_;
        c = c_;
        h = h_;
        w = w_;
        v.assign(static_cast<std::size_t>(n) * c * h * w, 0.0);
    }
    std::size_t per_image() const { return static_cast<std::size_t>(c) * h * w; }
    double* image(int i) { return v.data() + per_image() * i; }
    const double* image(int i) const { return v.data() + per_image() * i; }
};

enum class PadMode { replicate, zero };

struct Param {
    std::vector<double> value;
    std::vector<double> grad;

    void resize(std::size_t s) {
        value.assign(s, 0.0);
        grad.assign(s, 0.0);
    }
};

// 3x3 convolution, stride 1, same-size output. Replication padding is the
// default everywhere in this project; zero padding exists for comparisons.
class Conv3x3 {
public:
    Conv3x3(int in_c, int out_c, PadMode pad);

    void init_weights(Rng& rng);
    void forward(const BatchVolume& in, BatchVolume& out) const;
    // Accumulates weight/bias grads; fills din unless null. Deterministic
    // for any thread count: per-image partials are reduced in image order.
    void backward(const BatchVolume& in, const BatchVolume& dout, BatchVolume* din);

    Param weight; // out_c x (in_c*9), row-major
    Param bias;   // out_c
    int in_c;
    int out_c;
    PadMode pad;
};

class Linear {
public:
    Linear(int in_features, int out_features);
    void init_weights(Rng& rng);
    Eigen::MatrixXd forward(const BatchVolume& in) const; // n x out
    void backward(const BatchVolume& in, const Eigen::MatrixXd& dout, BatchVolume& din);

    Param weight; // out x in, row-major
    Param bias;   // out
    int in_features;
    int out_features;
};

// conv -> relu [-> 2x2 maxpool] with per-batch caches for backprop.
struct ConvStage {
    std::string name;
    Conv3x3 conv;
    bool pool_after;

    BatchVolume post_act; // after relu (pre-pool); the tap point
    BatchVolume pooled;
    std::vector<int> pool_argmax;

    ConvStage(std::string n, int in_c, int out_c, bool pool, PadMode pad)
        : name(std::move(n)), conv(in_c, out_c, pad), pool_after(pool) {}
};

struct ArchDescription {
    std::string arch_name;
    int in_channels = 3;
    int in_h = 64;
    int in_w = 64;
    struct Block {
        std::string name;
        int out_channels;
        bool pool_after;
    };
    std::vector<Block> blocks;
};

// Named architectures. tiny-cnn: four conv blocks with 32 filters in the
// last conv layer; vgg-like: six conv layers in three pooled pairs.
ArchDescription describe_arch(const std::string& arch, int in_h, int in_w);

class Model {
public:
    Model(ArchDescription arch, std::string target_layer, int num_classes,
          std::uint64_t seed);

    // Runs the network; when target_out is non-null it receives the
    // post-ReLU activations of the target layer as an ActivationBatch.
    Eigen::MatrixXd forward(const BatchVolume& images, ActivationBatch* target_out);

    // dlogits is n x C. d_target, when non-null, is an extra gradient with
    // respect to the target layer's post-ReLU activations (ActivationBatch
    // layout) and is injected at the tap point.
    void backward(const Eigen::MatrixXd& dlogits, const std::vector<double>* d_target);

    void zero_grad();
    std::vector<Param*> parameters();

    const std::string& target_layer() const { return target_layer_; }
    int target_filters() const;
    int target_map_h() const { return target_h_; }
    int target_map_w() const { return target_w_; }
    int num_classes() const { return num_classes_; }
    const ArchDescription& arch() const { return arch_; }

    void save(const std::string& path) const;
    static Model load(const std::string& path);

private:
    ArchDescription arch_;
    std::string target_layer_;
    int num_classes_;
    int target_stage_ = -1;
    int target_h_ = 0, target_w_ = 0;
    std::vector<ConvStage> stages_;
    std::unique_ptr<Linear> fc_;
    BatchVolume input_cache_;
};

Model build_model(const std::string& arch, const std::string& target_layer, int num_classes,
                  int in_h = 64, int in_w = 64, std::uint64_t seed = 0);

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(const std::vector<Param*>& params) = 0;
};

class SgdOptimizer : public Optimizer {
public:
    explicit SgdOptimizer(double lr, double momentum = 0.0);
    void step(const std::vector<Param*>& params) override;

private:
    double lr_, momentum_;
    std::vector<std::vector<double>> velocity_;
};

class AdamOptimizer : public Optimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8);
    void step(const std::vector<Param*>& params) override;

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double lr);

} // namespace cfcnn
