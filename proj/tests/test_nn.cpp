#include <doctest.h>

#include <cmath>
#include <random>

#include "cfcnn/losses.hpp"
#include "cfcnn/nn.hpp"
#include "support/oracles.hpp"

using namespace cfcnn;

namespace {

BatchVolume random_volume(int n, int c, int h, int w, std::uint64_t seed) {
    BatchVolume v;
    v.resize(n, c, h, w);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (double& x : v.v) x = uni(rng);
    return v;
}

} // namespace

TEST_CASE("tiny-cnn shape contract") {
    Model model = build_model("tiny-cnn", "conv4", 2, 64, 64, 1);
    BatchVolume in = random_volume(8, 3, 64, 64, 2);
    ActivationBatch act;
    const Eigen::MatrixXd logits = model.forward(in, &act);
    CHECK(logits.rows() == 8);
    CHECK(logits.cols() == 2);
    CHECK(act.n == 8);
    CHECK(act.d == 32);
    CHECK(act.m == act.map_h * act.map_w);
    CHECK(act.map_h == 8);
    CHECK(act.layer_name == "conv4");
    // Post-ReLU tap: no negative activations.
    for (double v : act.values) CHECK(v >= 0.0);
}

TEST_CASE("unknown target layer raises") {
    CHECK_THROWS_WITH_AS(build_model("tiny-cnn", "conv9", 2), doctest::Contains("conv9"),
                         ValidationError);
    CHECK_THROWS_AS(describe_arch("resnet-200", 64, 64), ValidationError);
}

TEST_CASE("replication padding keeps a constant image constant") {
    Conv3x3 repl(2, 3, PadMode::replicate);
    Conv3x3 zero(2, 3, PadMode::zero);
    Rng rng = make_rng(3, 0);
    repl.init_weights(rng);
    zero.weight.value = repl.weight.value;
    zero.bias.value = repl.bias.value;

    BatchVolume in;
    in.resize(1, 2, 6, 6);
    std::fill(in.v.begin(), in.v.end(), 0.8);

    BatchVolume out_r, out_z;
    repl.forward(in, out_r);
    zero.forward(in, out_z);

    // Replication output is constant across the whole plane.
    for (int ch = 0; ch < 3; ++ch) {
        const double* plane = out_r.image(0) + ch * 36;
        for (int u = 1; u < 36; ++u) CHECK(plane[u] == doctest::Approx(plane[0]));
    }
    // Zero padding agrees in the interior but differs on the border.
    const double* pr = out_r.image(0);
    const double* pz = out_z.image(0);
    CHECK(pr[7] == doctest::Approx(pz[7])); // interior cell (1,1)
    double border_gap = 0.0;
    for (int x = 0; x < 6; ++x) border_gap += std::abs(pr[x] - pz[x]);
    CHECK(border_gap > 1e-6);
}

TEST_CASE("conv gradient matches finite differences") {
    for (PadMode pad : {PadMode::replicate, PadMode::zero}) {
        Conv3x3 conv(2, 3, pad);
        Rng rng = make_rng(5, 0);
        conv.init_weights(rng);
        const BatchVolume in = random_volume(2, 2, 5, 4, 7);
        BatchVolume out;
        conv.forward(in, out);
        // Scalar probe: sum of out elementwise-weighted by fixed R.
        std::vector<double> R(out.v.size());
        std::mt19937_64 rr(11);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        for (double& x : R) x = uni(rr);

        BatchVolume dout = out;
        dout.v = R;
        BatchVolume din;
        std::fill(conv.weight.grad.begin(), conv.weight.grad.end(), 0.0);
        std::fill(conv.bias.grad.begin(), conv.bias.grad.end(), 0.0);
        conv.backward(in, dout, &din);

        auto loss_at = [&](const BatchVolume& input, const Conv3x3& c) {
            BatchVolume o;
            c.forward(input, o);
            double s = 0.0;
            for (std::size_t k = 0; k < o.v.size(); ++k) s += o.v[k] * R[k];
            return s;
        };

        // d/d input
        const auto fd_in = oracle::finite_difference(
            in.v,
            [&](const std::vector<double>& vals) {
                BatchVolume probe = in;
                probe.v = vals;
                return loss_at(probe, conv);
            },
            1e-6);
        for (std::size_t k = 0; k < fd_in.size(); ++k)
            CHECK(din.v[k] == doctest::Approx(fd_in[k]).epsilon(1e-5));

        // d/d weight and bias
        const auto fd_w = oracle::finite_difference(
            conv.weight.value,
            [&](const std::vector<double>& vals) {
                Conv3x3 probe = conv;
                probe.weight.value = vals;
                return loss_at(in, probe);
            },
            1e-6);
        for (std::size_t k = 0; k < fd_w.size(); ++k)
            CHECK(conv.weight.grad[k] == doctest::Approx(fd_w[k]).epsilon(1e-5));
    }
}

TEST_CASE("model end-to-end gradient including the target injection") {
    // Small custom walk: tiny model on 16x16 inputs, loss = CE + <G, act>.
    Model model = build_model("tiny-cnn", "conv3", 2, 16, 16, 13);
    const BatchVolume in = random_volume(3, 3, 16, 16, 17);
    const std::vector<int> labels = {0, 1, 0};

    ActivationBatch act;
    Eigen::MatrixXd logits = model.forward(in, &act);
    std::vector<double> G(act.values.size());
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    for (double& g : G) g = uni(rng);

    model.zero_grad();
    Eigen::MatrixXd dlogits = softmax_cross_entropy_gradient(logits, labels);
    model.backward(dlogits, &G);

    auto objective = [&]() {
        ActivationBatch a;
        const Eigen::MatrixXd lg = model.forward(in, &a);
        double s = softmax_cross_entropy(lg, labels);
        for (std::size_t k = 0; k < a.values.size(); ++k) s += G[k] * a.values[k];
        return s;
    };

    // Spot-check a sample of parameters in every layer.
    std::vector<Param*> params = model.parameters();
    std::mt19937_64 pick(23);
    for (Param* p : params) {
        const int checks = std::min<std::size_t>(10, p->value.size());
        for (int c = 0; c < checks; ++c) {
            const std::size_t k = pick() % p->value.size();
            const double keep = p->value[k];
            const double h = 1e-5;
            p->value[k] = keep + h;
            const double up = objective();
            p->value[k] = keep - h;
            const double down = objective();
            p->value[k] = keep;
            const double fd = (up - down) / (2 * h);
            CHECK(p->grad[k] == doctest::Approx(fd).epsilon(5e-4));
        }
    }
}

TEST_CASE("weight init is seed-deterministic") {
    Model a = build_model("tiny-cnn", "conv4", 2, 32, 32, 7);
    Model b = build_model("tiny-cnn", "conv4", 2, 32, 32, 7);
    Model c = build_model("tiny-cnn", "conv4", 2, 32, 32, 8);
    CHECK(a.parameters()[0]->value == b.parameters()[0]->value);
    CHECK(a.parameters()[0]->value != c.parameters()[0]->value);
}

TEST_CASE("model save/load round-trips the forward pass") {
    Model model = build_model("vgg-like", "conv3_2", 3, 32, 32, 29);
    const BatchVolume in = random_volume(2, 3, 32, 32, 31);
    ActivationBatch act;
    const Eigen::MatrixXd before = model.forward(in, &act);
    CHECK(act.d == 64);

    const std::string path = "/tmp/cfcnn_model_test.bin";
    model.save(path);
    Model loaded = Model::load(path);
    const Eigen::MatrixXd after = loaded.forward(in, nullptr);
    CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("optimizers reduce a simple objective") {
    // One linear layer fit to map a fixed input to target logits.
    for (const std::string& name : {std::string("adam"), std::string("sgd")}) {
        Linear lin(4, 2);
        Rng rng = make_rng(37, 0);
        lin.init_weights(rng);
        BatchVolume x;
        x.resize(5, 1, 1, 4);
        std::mt19937_64 xr(41);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        for (double& v : x.v) v = uni(xr);
        const std::vector<int> y = {0, 1, 0, 1, 1};

        auto loss_now = [&]() { return softmax_cross_entropy(lin.forward(x), y); };
        const double before = loss_now();
        auto opt = make_optimizer(name, 0.05);
        std::vector<Param*> params = {&lin.weight, &lin.bias};
        for (int step = 0; step < 60; ++step) {
            const Eigen::MatrixXd logits = lin.forward(x);
            const Eigen::MatrixXd dl = softmax_cross_entropy_gradient(logits, y);
            std::fill(lin.weight.grad.begin(), lin.weight.grad.end(), 0.0);
            std::fill(lin.bias.grad.begin(), lin.bias.grad.end(), 0.0);
            BatchVolume dx;
            lin.backward(x, dl, dx);
            opt->step(params);
        }
        CHECK(loss_now() < before - 0.1);
    }
}
