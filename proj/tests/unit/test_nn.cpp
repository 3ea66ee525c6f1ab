#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "hsi/error.hpp"
#include "hsi/nn/adam.hpp"
#include "hsi/nn/checkpoint.hpp"
#include "hsi/nn/cnn.hpp"
#include "hsi/nn/layers.hpp"
#include "hsi/nn/lstm.hpp"
#include "hsi/nn/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hsi;
using namespace hsi::nn;

namespace {

FeatureMap random_map(std::mt19937_64& gen, std::size_t h, std::size_t w, std::size_t c) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FeatureMap m(h, w, c);
    for (double& v : m.data) v = u(gen);
    return m;
}

std::vector<double> random_vec(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> v(n);
    for (double& x : v) x = u(gen);
    return v;
}

CnnShape tiny_cnn() {
    CnnShape s;
    s.input_size = 12;
    s.conv1_kernel = 3;
    s.conv1_channels = 2;
    s.conv2_kernel = 2;
    s.conv2_channels = 3;
    s.fc1 = 5;
    s.fc2 = 4;
    return s;
}

}  // namespace

TEST_CASE("conv2d forward") {
    SUBCASE("all-ones 2x2 kernel over an all-ones 3x3 input gives 4") {
        const FeatureMap in(3, 3, 1, 1.0);
        const std::vector<double> k(4, 1.0), b(1, 0.0);
        const FeatureMap out = conv2d_forward(in, {2, 1, 1, k, b}, Activation::none);
        CHECK(out.height == 2);
        CHECK(out.width == 2);
        for (double v : out.data) CHECK(v == 4.0);
    }
    SUBCASE("matches the loop oracle") {
        std::mt19937_64 gen(1);
        for (int i = 0; i < 30; ++i) {
            const std::size_t k = 1 + i % 4, cin = 1 + i % 3, cout = 1 + i % 5;
            const FeatureMap in = random_map(gen, 6 + i % 5, 5 + i % 4, cin);
            const auto kernels = random_vec(gen, k * k * cin * cout);
            const auto bias = random_vec(gen, cout);
            const bool relu = i % 2 == 0;
            const FeatureMap got =
                conv2d_forward(in, {k, cin, cout, kernels, bias}, relu ? Activation::relu : Activation::none);
            const FeatureMap want = oracle::conv2d(in, kernels, bias, k, cout, relu);
            REQUIRE(got.data.size() == want.data.size());
            for (std::size_t j = 0; j < got.data.size(); ++j) CHECK(got.data[j] == doctest::Approx(want.data[j]).epsilon(1e-12));
        }
    }
    SUBCASE("kernel larger than the input") {
        const FeatureMap in(2, 2, 1);
        const std::vector<double> k(9, 1.0), b(1, 0.0);
        CHECK_THROWS_AS(conv2d_forward(in, {3, 1, 1, k, b}, Activation::none), ShapeError);
    }
}

TEST_CASE("maxpool2") {
    std::mt19937_64 gen(2);
    for (int i = 0; i < 20; ++i) {
        const FeatureMap in = random_map(gen, 4 + i % 3, 5 + i % 2, 1 + i % 3);
        CHECK(maxpool2(in).output == oracle::maxpool2(in));
    }
    SUBCASE("ties pick the first element in window order") {
        const FeatureMap in(2, 2, 1, 3.0);
        const PoolResult p = maxpool2(in);
        CHECK(p.argmax == std::vector<std::uint32_t>{0});
        FeatureMap d_in(2, 2, 1);
        maxpool2_backward(p, FeatureMap(1, 1, 1, 1.0), d_in);
        CHECK(d_in.data == std::vector<double>{1, 0, 0, 0});
    }
}

TEST_CASE("softmax and cross entropy") {
    const std::vector<double> logits{1000.0, 1000.0};
    CHECK(softmax(logits) == std::vector<double>{0.5, 0.5});
    CHECK(cross_entropy_from_logits(logits, 0) == doctest::Approx(std::log(2.0)));
    const std::vector<double> l2{2.0, -1.0};
    std::vector<double> d(2);
    cross_entropy_grad(l2, 1, 1.0, d);
    const auto p = softmax(l2);
    CHECK(d[0] == doctest::Approx(p[0]));
    CHECK(d[1] == doctest::Approx(p[1] - 1.0));

    SUBCASE("smoothed targets") {
        CHECK(cross_entropy_from_logits(l2, 1, 0.2) == doctest::Approx(2.7485873515737422).epsilon(1e-13));
        cross_entropy_grad(l2, 1, 1.0, d, 0.2);
        CHECK(d[0] == doctest::Approx(0.8525741268224333).epsilon(1e-13));
        CHECK(d[1] == doctest::Approx(-0.8525741268224333).epsilon(1e-13));
        CHECK(cross_entropy_from_logits(l2, 1, 0.0) == cross_entropy_from_logits(l2, 1));
        // the floor of the smoothed loss sits at the target entropy
        const std::vector<double> best{std::log(0.95), std::log(0.05)};
        CHECK(cross_entropy_from_logits(best, 0, 0.1) == doctest::Approx(0.1985152433458726).epsilon(1e-12));
    }
}

TEST_CASE("LSTM cell examples") {
    LstmShape shape{3, 2, 2, CandidateActivation::sigmoid, 0.0};
    SUBCASE("zero parameters from a zero state") {
        const LstmModel model(shape, LstmModel::layout(shape));
        const std::vector<double> x{0.3, -0.7, 1.1}, zero(2, 0.0);
        const CellState st = model.cell_forward(x, zero, zero);
        for (double h : st.h) CHECK(h == doctest::Approx(0.5 * std::tanh(0.25)).epsilon(1e-12));
        for (double s : st.s) CHECK(s == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(0.5 * std::tanh(0.25) == doctest::Approx(0.122467).epsilon(1e-5));
    }
    SUBCASE("open forget gate carries the state") {
        ParamSet p = LstmModel::layout(shape);
        p.at("lstm.b_f").values.assign(2, 40.0);
        p.at("lstm.b_c").values = {0.7, -1.3};
        const LstmModel model(shape, p);
        const std::vector<double> x{0.1, 0.2, 0.3}, h{0.0, 0.0}, s{0.4, -0.2};
        const CellState st = model.cell_forward(x, h, s);
        CHECK(st.s[0] == doctest::Approx(0.4 + 0.5 * sigmoid(0.7)).epsilon(1e-12));
        CHECK(st.s[1] == doctest::Approx(-0.2 + 0.5 * sigmoid(-1.3)).epsilon(1e-12));
    }
    SUBCASE("zero head gives uniform probabilities") {
        std::mt19937_64 gen(3);
        LstmModel model = LstmModel::initialize(shape, 9);
        std::fill(model.params().at("head.W").values.begin(), model.params().at("head.W").values.end(), 0.0);
        std::fill(model.params().at("head.b").values.begin(), model.params().at("head.b").values.end(), 0.0);
        const auto probs = model.predict(oracle::random_image(gen, 5, 3));
        CHECK(probs[0] == doctest::Approx(0.5));
        CHECK(probs[1] == doctest::Approx(0.5));
    }
    SUBCASE("wrong input width") {
        const LstmModel model = LstmModel::initialize(shape, 1);
        CHECK_THROWS_AS(model.predict(Image(4, 2)), ShapeError);
    }
}

TEST_CASE("LSTM unroll matches the gate-by-gate oracle") {
    std::mt19937_64 gen(4);
    for (int i = 0; i < 20; ++i) {
        LstmShape shape{1 + static_cast<std::size_t>(i % 4), 1 + static_cast<std::size_t>(i % 6), 2,
                        i % 3 == 0 ? CandidateActivation::tanh : CandidateActivation::sigmoid, 1.0};
        LstmModel model = LstmModel::initialize(shape, static_cast<std::uint64_t>(i));
        oracle::randomize(model.params(), gen, 0.8);
        const Image seq = oracle::random_image(gen, 2 + i % 7, shape.input_size);
        const auto got = model.predict(seq);
        const auto want = oracle::lstm_probabilities(seq, model);
        CHECK(got[0] == doctest::Approx(want[0]).epsilon(1e-12));
        CHECK(got[1] == doctest::Approx(want[1]).epsilon(1e-12));
    }
}

TEST_CASE("gradients match central differences") {
    std::mt19937_64 gen(5);
    SUBCASE("LSTM") {
        for (auto cand : {CandidateActivation::sigmoid, CandidateActivation::tanh}) {
            LstmShape shape{3, 4, 2, cand, 1.0};
            LstmModel model = LstmModel::initialize(shape, 2);
            oracle::randomize(model.params(), gen, 0.5);
            std::vector<Image> seqs;
            for (int k = 0; k < 3; ++k) seqs.push_back(oracle::random_image(gen, 5, 3));
            const std::vector<const Image*> batch{&seqs[0], &seqs[1], &seqs[2]};
            const std::vector<int> labels{0, 1, 1};
            const auto r = gradient_check(model, batch, labels);
            CHECK(r.max_rel_error < 1e-4);
        }
    }
    SUBCASE("LSTM with smoothed targets") {
        LstmShape shape{3, 4, 2, CandidateActivation::sigmoid, 1.0, 0.1};
        LstmModel model = LstmModel::initialize(shape, 4);
        oracle::randomize(model.params(), gen, 0.5);
        std::vector<Image> seqs;
        for (int k = 0; k < 3; ++k) seqs.push_back(oracle::random_image(gen, 4, 3));
        const std::vector<const Image*> batch{&seqs[0], &seqs[1], &seqs[2]};
        const std::vector<int> labels{1, 0, 1};
        CHECK(gradient_check(model, batch, labels).max_rel_error < 1e-4);
    }
    SUBCASE("CNN") {
        CnnModel model = CnnModel::initialize(tiny_cnn(), 3);
        std::vector<Image> imgs;
        for (int k = 0; k < 2; ++k) imgs.push_back(oracle::random_image(gen, 12, 12, 0.0, 1.0));
        const std::vector<const Image*> batch{&imgs[0], &imgs[1]};
        const std::vector<int> labels{1, 0};
        const auto r = gradient_check(model, batch, labels);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("CNN shape bookkeeping") {
    CnnShape s;
    s.input_size = 32;
    CHECK(s.final_spatial() == 5);  // 32-4=28 -> 14 -> 10 -> 5
    CHECK(s.flat_features() == 5 * 5 * 16);
    s.input_size = 8;
    CHECK_THROWS_AS(s.final_spatial(), ShapeError);
    const CnnModel m = CnnModel::initialize(tiny_cnn(), 1);
    CHECK(m.params().at("conv1.kernel").shape == std::vector<std::size_t>{3, 3, 1, 2});
    CHECK(cnn_forward(Image(12, 12, 0.5), m).size() == 2);
}

TEST_CASE("Adam") {
    ParamSet p;
    p.add("w", {3}, TensorKind::weight).values = {1.0, -2.0, 0.5};
    ParamSet g = p.zeros_like();
    g.at("w").values = {0.3, -4.0, 0.0};
    AdamState st = AdamState::for_params(p);
    const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};

    SUBCASE("first step moves each weight by about lr against the gradient sign") {
        adam_step(p, g, st, cfg);
        CHECK(p.at("w").values[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
        CHECK(p.at("w").values[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
        CHECK(p.at("w").values[2] == 0.5);
        CHECK(st.step == 1);
    }
    SUBCASE("zero gradient leaves parameters unchanged") {
        ParamSet before = p;
        adam_step(p, p.zeros_like(), st, cfg);
        CHECK(p == before);
    }
}

TEST_CASE("training") {
    std::mt19937_64 gen(6);
    std::normal_distribution<double> noise(0.0, 0.1);
    Dataset data;
    for (int i = 0; i < 40; ++i) {
        const int label = i % 2;
        Image seq(3, 2);
        for (double& v : seq.pixels) v = (label ? 0.8 : -0.8) + noise(gen);
        data.samples.push_back(seq);
        data.labels.push_back(label);
    }
    const LstmShape shape{2, 4, 2, CandidateActivation::sigmoid, 1.0};

    SUBCASE("separable blobs are learned") {
        TrainConfig cfg;
        cfg.batch_size = 8;
        cfg.learning_rate = 0.05;
        cfg.iterations = 200;
        cfg.rng_seed = 2;
        const auto r = train_classifier<LstmModel>(shape, data, cfg);
        CHECK(r.train_accuracy == 1.0);
        CHECK(r.curve.losses.back() < r.curve.losses.front());
    }
    SUBCASE("zero learning rate never moves") {
        TrainConfig cfg;
        cfg.batch_size = 40;
        cfg.learning_rate = 0.0;
        cfg.iterations = 10;
        const auto r = train_classifier<LstmModel>(shape, data, cfg);
        CHECK(r.model.params() == LstmModel::initialize(shape, derive_seed(cfg.rng_seed, "init")).params());
    }
    SUBCASE("same seed, same curve") {
        TrainConfig cfg;
        cfg.batch_size = 4;
        cfg.iterations = 30;
        cfg.loss_record_stride = 7;
        cfg.rng_seed = 11;
        const auto a = train_classifier<LstmModel>(shape, data, cfg);
        const auto b = train_classifier<LstmModel>(shape, data, cfg);
        CHECK(a.curve == b.curve);
        CHECK(a.curve.iterations == std::vector<long>{7, 14, 21, 28, 30});
    }
    SUBCASE("config validation") {
        TrainConfig cfg;
        cfg.batch_size = 0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        CHECK_THROWS_AS(train_config_from_json({{"bogus", 1}}), ConfigError);
        Dataset one;
        one.samples = {Image(3, 2), Image(3, 2)};
        one.labels = {1, 1};
        CHECK_THROWS_AS(train_classifier<LstmModel>(shape, one, TrainConfig{}), ConfigError);
    }
}

TEST_CASE("checkpoints round trip exactly") {
    TempDir tmp;
    const CnnModel cnn = CnnModel::initialize(tiny_cnn(), 42);
    save_model(cnn, tmp.path / "c.ckpt");
    const CnnModel cnn2 = load_cnn_model(tmp.path / "c.ckpt");
    CHECK(cnn2.shape() == cnn.shape());
    CHECK(cnn2.params() == cnn.params());

    const LstmModel lstm = LstmModel::initialize({4, 3, 2, CandidateActivation::tanh, 1.0}, 5);
    save_model(lstm, tmp.path / "l.ckpt");
    const LstmModel lstm2 = load_lstm_model(tmp.path / "l.ckpt");
    CHECK(lstm2.shape() == lstm.shape());
    CHECK(lstm2.params() == lstm.params());

    CHECK_THROWS_AS(load_cnn_model(tmp.path / "l.ckpt"), FormatError);
    std::filesystem::resize_file(tmp.path / "c.ckpt", std::filesystem::file_size(tmp.path / "c.ckpt") - 8);
    CHECK_THROWS_AS(load_cnn_model(tmp.path / "c.ckpt"), FormatError);
}
