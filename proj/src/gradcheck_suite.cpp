#include "cueing/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "cueing/encoder.hpp"
#include "cueing/grad_check.hpp"
#include "cueing/model.hpp"
#include "cueing/nn_ops.hpp"
#include "cueing/rng.hpp"
#include "cueing/tokenizer.hpp"

namespace cueing {

namespace {



DTensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    DTensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

double dot(const DTensor& a, const DTensor& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) s += a.data[i] * b.data[i];
    return s;
}

struct SuiteState {
    std::ostream& os;
    bool ok = true;
    double worst = 0.0;

    void record(const nn::GradCheckReport& rep) {
        ok &= rep.passed();
        worst = std::max(worst, rep.max_rel_err);
    }
    void line(const std::string& name, double max_err, double tol, bool passed) {
        os << (passed ? "  [ok]   " : "  [FAIL] ") << std::left << std::setw(28) << name
           << " max_rel_err=" << std::scientific << std::setprecision(3) << max_err
           << "  tol=" << tol << std::defaultfloat << "\n";
    }
};

}  // namespace

bool run_gradcheck_suite(uint64_t seed, std::ostream& os) {
    using namespace cueing::nn;
    SuiteState st{os};

    auto run_many = [&](const std::string& name, double tol, auto&& one) {
        double worst = 0.0;
        bool passed = true;
        for (uint64_t s = 1; s <= 20; ++s) {
            Rng rng(mix_seed(seed, s, std::hash<std::string>{}(name)));
            auto rep = one(rng, tol);
            worst = std::max(worst, rep.max_rel_err);
            passed &= rep.passed();
            st.record(rep);
        }
        st.line(name, worst, tol, passed);
    };

    run_many("linear", 1e-6, [&](Rng& rng, double tol) {
        int n = static_cast<int>(rng.uniform_int(1, 4));
        int in = static_cast<int>(rng.uniform_int(2, 6));
        int out = static_cast<int>(rng.uniform_int(2, 6));
        DTensor x = random_tensor({n, in}, rng);
        DTensor w = random_tensor({out, in}, rng);
        DTensor b = random_tensor({out}, rng);
        DTensor probe = random_tensor({n, out}, rng);
        auto loss = [&] { return dot(linear(x, w, b), probe); };
        DTensor gx, gw, gb;
        linear_backward(x, w, probe, &gx, &gw, &gb);
        auto r1 = grad_check("linear.x", loss, x, gx, tol);
        auto r2 = grad_check("linear.w", loss, w, gw, tol);
        auto r3 = grad_check("linear.b", loss, b, gb, tol);
        r1.max_rel_err = std::max({r1.max_rel_err, r2.max_rel_err, r3.max_rel_err});
        return r1;
    });

    run_many("conv2d", 1e-5, [&](Rng& rng, double tol) {
        int stride = static_cast<int>(rng.uniform_int(1, 2));
        int pad = static_cast<int>(rng.uniform_int(0, 1));
        DTensor x = random_tensor({2, 2, 6, 5}, rng);
        DTensor w = random_tensor({3, 2, 3, 3}, rng);
        DTensor b = random_tensor({3}, rng);
        auto y0 = conv2d(x, w, b, stride, pad);
        DTensor probe = random_tensor(y0.shape, rng);
        auto loss = [&] { return dot(conv2d(x, w, b, stride, pad), probe); };
        DTensor gx, gw, gb;
        conv2d_backward(x, w, probe, stride, pad, &gx, &gw, &gb);
        auto r1 = grad_check("conv.x", loss, x, gx, tol);
        auto r2 = grad_check("conv.w", loss, w, gw, tol);
        auto r3 = grad_check("conv.b", loss, b, gb, tol);
        r1.max_rel_err = std::max({r1.max_rel_err, r2.max_rel_err, r3.max_rel_err});
        return r1;
    });

    run_many("relu", 1e-4, [&](Rng& rng, double tol) {
        DTensor x = random_tensor({5, 5}, rng);
        for (double& v : x.data)
            if (std::fabs(v) < 0.1) v += v >= 0 ? 0.2 : -0.2;  // stay off the kink
        DTensor probe = random_tensor({5, 5}, rng);
        auto loss = [&] { return dot(relu(x), probe); };
        DTensor gx = relu_backward(x, probe);
        return grad_check("relu", loss, x, gx, tol);
    });

    run_many("sigmoid", 1e-4, [&](Rng& rng, double tol) {
        DTensor x = random_tensor({12}, rng, -3.0, 3.0);
        DTensor probe = random_tensor({12}, rng);
        auto loss = [&] { return dot(sigmoid(x), probe); };
        DTensor gx = sigmoid_backward(sigmoid(x), probe);
        return grad_check("sigmoid", loss, x, gx, tol);
    });

    run_many("softmax", 1e-4, [&](Rng& rng, double tol) {
        DTensor x = random_tensor({4, 6}, rng, -2.0, 2.0);
        DTensor probe = random_tensor({4, 6}, rng);
        auto loss = [&] { return dot(softmax(x, 1), probe); };
        DTensor gx = softmax_backward(softmax(x, 1), probe, 1);
        return grad_check("softmax", loss, x, gx, tol);
    });

    run_many("layer_norm", 1e-4, [&](Rng& rng, double tol) {
        DTensor x = random_tensor({4, 7}, rng, -2.0, 2.0);
        DTensor gain = random_tensor({7}, rng, 0.5, 1.5);
        DTensor bias = random_tensor({7}, rng);
        DTensor probe = random_tensor({4, 7}, rng);
        auto loss = [&] { return dot(layer_norm(x, gain, bias), probe); };
        DTensor gx, gg, gb;
        layer_norm_backward(x, gain, probe, &gx, &gg, &gb);
        auto r1 = grad_check("ln.x", loss, x, gx, tol);
        auto r2 = grad_check("ln.gain", loss, gain, gg, tol);
        auto r3 = grad_check("ln.bias", loss, bias, gb, tol);
        r1.max_rel_err = std::max({r1.max_rel_err, r2.max_rel_err, r3.max_rel_err});
        return r1;
    });

    run_many("mean", 1e-4, [&](Rng& rng, double tol) {
        DTensor x = random_tensor({3, 4, 2}, rng);
        DTensor probe = random_tensor({4}, rng);
        auto loss = [&] { return dot(mean(x, {0, 2}), probe); };
        DTensor gx = mean_backward(x.shape, {0, 2}, probe);
        return grad_check("mean", loss, x, gx, tol);
    });

    run_many("bce", 1e-4, [&](Rng& rng, double tol) {
        DTensor p({10});
        std::vector<double> y(10);
        for (double& v : p.data) v = rng.uniform(0.05, 0.95);
        for (double& v : y) v = rng.uniform();
        auto loss = [&] { return bce_loss(p.data, y); };
        DTensor g({10});
        g.data = bce_backward(p.data, y);
        return grad_check("bce", loss, p, g, tol);
    });

    run_many("channel_attention", 1e-4, [&](Rng& rng, double tol) {
        RegistryT<double> reg;
        auto ca = ChannelAttentionT<double>::create(reg, "chattn", 4, 4, false);
        reg.init_params(rng.next_u64());
        DTensor v = random_tensor({2, 4, 3, 4}, rng);
        DTensor probe = random_tensor({2, 4, 3, 4}, rng);
        auto loss = [&] {
            typename ChannelAttentionT<double>::Cache c;
            return dot(ca.forward(v, &c), probe);
        };
        typename ChannelAttentionT<double>::Cache cache;
        ca.forward(v, &cache);
        reg.zero_grad();
        DTensor gv = ca.backward(cache, probe);
        auto rep = grad_check("chattn.v", loss, v, gv, tol);
        for (size_t i = 0; i < reg.size(); ++i) {
            auto r = grad_check(reg[i].name, loss, reg[i].value, reg[i].grad, tol);
            rep.max_rel_err = std::max(rep.max_rel_err, r.max_rel_err);
        }
        return rep;
    });

    run_many("encoder_layer", 1e-4, [&](Rng& rng, double tol) {
        RegistryT<double> reg;
        auto enc = EncoderLayerT<double>::create(reg, "enc", 8, 2, 16, false);
        reg.init_params(rng.next_u64());
        DTensor x = random_tensor({4, 8}, rng);
        DTensor probe = random_tensor({4, 8}, rng);
        auto loss = [&] { return dot(enc.forward(x, nullptr), probe); };
        typename EncoderLayerT<double>::Cache cache;
        enc.forward(x, &cache);
        reg.zero_grad();
        DTensor gx = enc.backward(cache, probe);
        auto rep = grad_check("enc.x", loss, x, gx, tol);
        for (size_t i = 0; i < reg.size(); ++i) {
            auto r = grad_check(reg[i].name, loss, reg[i].value, reg[i].grad, tol);
            rep.max_rel_err = std::max(rep.max_rel_err, r.max_rel_err);
        }
        return rep;
    });

    // Full tiny-config model: T=16, 64x64 input, tolerance 1e-3.
    {
        ModelConfig cfg;
        cfg.tokens = 16;
        cfg.width = 64;
        cfg.height = 64;
        CueingModelT<double> model(cfg, mix_seed(seed, 1001));

        Rng rng(mix_seed(seed, 1002));
        ImageT<double> img(64, 64);
        for (double& v : img.data) v = rng.uniform();
        GazeMapT<double> gaze(64, 64);
        for (double& v : gaze.data) v = rng.uniform();
        auto target = downsample_gaze(gaze, cfg.tokens);

        auto loss = [&] {
            ForwardTraceT<double> tr;
            return bce_loss(model.forward(img, &tr), target);
        };
        ForwardTraceT<double> trace;
        auto pred = model.forward(img, &trace);
        model.registry().zero_grad();
        model.backward(trace, bce_backward(pred, target));

        double worst = 0.0;
        bool passed = true;
        Rng pick(mix_seed(seed, 1003));
        auto& reg = model.registry();
        for (size_t i = 0; i < reg.size(); ++i) {
            auto& p = reg[i];
            std::vector<size_t> coords;
            size_t n = p.value.numel();
            for (size_t k = 0; k < std::min<size_t>(n, 6); ++k)
                coords.push_back(
                    static_cast<size_t>(pick.uniform_int(0, static_cast<int64_t>(n - 1))));
            auto rep = grad_check(p.name, loss, p.value, p.grad, 1e-3, coords);
            worst = std::max(worst, rep.max_rel_err);
            passed &= rep.passed();
            st.record(rep);
        }
        st.line("full_model (T=16, 64x64)", worst, 1e-3, passed);
    }

    os << (st.ok ? "gradcheck: all checks passed" : "gradcheck: FAILURES detected") << "\n";
    return st.ok;
}

}  // namespace cueing
