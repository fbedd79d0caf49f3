#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "rom/binary_io.hpp"
#include "rom/error.hpp"
#include "rom/nn.hpp"

using namespace rom;
using namespace rom::nn;

namespace {

NetworkSpec lstm_spec(std::size_t n, std::size_t units) {
    NetworkSpec s;
    s.kind = ModelKind::Lstm;
    s.modes = n;
    s.horizon = 6;
    s.window = 10;
    s.units = units;
    return s;
}

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "romkit_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("parameter counts") {
    CHECK(count_parameters(lstm_spec(18, 100)) == 125028);
    CHECK(count_parameters(lstm_spec(18, 400)) == 1673628);
    NetworkSpec cnn = lstm_spec(18, 100);
    cnn.kind = ModelKind::Cnn;
    CHECK(count_parameters(cnn) == 64218);

    // Per-layer closed forms.
    const std::size_t n = 18, p = 6, u = 100, q = 10;
    const std::size_t lstm = 4 * u * (n + u + 1) + p * u * (u + 1) + 80 * (u + 1) + p * n * 81;
    CHECK(count_parameters(lstm_spec(n, u)) == lstm);
    const std::size_t conv = 30 * (3 * n + 1) + 60 * (3 * 30 + 1) + 100 * ((q - 4) * 60 + 1) + 100 * 101 + p * n * 101;
    CHECK(count_parameters(cnn) == conv);
    CHECK(cnn.window - 4 == 6);
    CHECK(parameter_layout(cnn)[4].cols == 360);

    const auto blocks = parameter_layout(lstm_spec(3, 5));
    std::size_t offset = 0;
    for (const auto& b : blocks) {
        CHECK(b.offset == offset);
        offset += b.size();
    }
    CHECK(offset == count_parameters(lstm_spec(3, 5)));
}

TEST_CASE("spec validation") {
    NetworkSpec cnn = lstm_spec(2, 4);
    cnn.kind = ModelKind::Cnn;
    cnn.window = 4;
    CHECK_THROWS_AS(cnn.validate(), InvalidArgument);
    NetworkSpec zero = lstm_spec(0, 4);
    CHECK_THROWS_AS(zero.validate(), InvalidArgument);
}

TEST_CASE("activations") {
    CHECK(activate(Activation::Elu, 0.0) == 0.0);
    CHECK(activate_derivative(Activation::Elu, 1e-300) == 1.0);
    CHECK(activate(Activation::Relu, -2.0) == 0.0);
    CHECK(activate(Activation::Elu, -1.0) == doctest::Approx(std::exp(-1.0) - 1.0));
    CHECK(activate(Activation::Sigmoid, 0.0) == 0.5);
    for (auto a : {Activation::Relu, Activation::Elu, Activation::Sigmoid, Activation::Tanh}) {
        for (double x : {-1.3, -0.2, 0.4, 2.1}) {
            const double fd = (activate(a, x + 1e-6) - activate(a, x - 1e-6)) / 2e-6;
            CHECK(activate_derivative(a, x) == doctest::Approx(fd).epsilon(1e-6));
        }
        CHECK(parse_activation(to_string(a)) == a);
    }
    CHECK_THROWS_AS(parse_activation("swish"), InvalidArgument);
}

TEST_CASE("forward with zero parameters") {
    for (auto kind : {ModelKind::Lstm, ModelKind::Cnn}) {
        NetworkSpec s = lstm_spec(3, 4);
        s.kind = kind;
        const Parameters zero(s);
        const Eigen::MatrixXd window = Eigen::MatrixXd::Random(10, 3);
        s.output = Activation::Tanh;
        CHECK(forward(s, zero, window).cwiseAbs().maxCoeff() == 0.0);
        s.output = Activation::Sigmoid;
        const auto out = forward(s, zero, window);
        CHECK(out.rows() == 6);
        CHECK(out.cols() == 3);
        CHECK((out.array() == 0.5).all());
    }
}

TEST_CASE("hand-set convolution") {
    NetworkSpec s;
    s.kind = ModelKind::Cnn;
    s.modes = 1;
    s.horizon = 1;
    s.window = 10;
    s.hidden = Activation::Relu;
    s.output = Activation::Tanh;
    Parameters p(s);
    auto set = [&](const char* name, Eigen::Index r, Eigen::Index c, double v) {
        const auto& b = p.block(name);
        p.values[b.offset + static_cast<std::size_t>(c) * b.rows + static_cast<std::size_t>(r)] = v;
    };
    // conv1 channel 0 = x[t] + 2 x[t+1] + 3 x[t+2]; conv2 channel 0 = channel 0 at offset 1.
    set("conv1.W", 0, 0, 1.0);
    set("conv1.W", 0, 1, 2.0);
    set("conv1.W", 0, 2, 3.0);
    set("conv2.W", 0, 30, 1.0);
    // fc1 unit 0 reads flattened position t=2 of channel 0; fc2 and the head pass it through at 0.01 scale.
    set("fc1.W", 0, 2 * 60, 1.0);
    set("fc2.W", 0, 0, 1.0);
    set("head0.W", 0, 0, 0.01);
    Eigen::MatrixXd window(10, 1);
    for (int t = 0; t < 10; ++t) window(t, 0) = t + 1;
    // conv1 at t = 3: 4 + 2*5 + 3*6 = 32
    CHECK(forward(s, p, window)(0, 0) == doctest::Approx(std::tanh(0.32)));
}

TEST_CASE("forward output range and determinism") {
    std::mt19937_64 rng(1);
    for (auto kind : {ModelKind::Lstm, ModelKind::Cnn}) {
        NetworkSpec s = lstm_spec(4, 8);
        s.kind = kind;
        s.output = Activation::Tanh;
        const auto params = Parameters::initialized(s, 5);
        const Eigen::MatrixXd w = oracle::random_matrix(10, 4, rng) * 3.0;
        const auto a = forward(s, params, w);
        CHECK(a.cwiseAbs().maxCoeff() < 1.0);
        CHECK(a == forward(s, params, w));
    }
    NetworkSpec s = lstm_spec(2, 4);
    const auto params = Parameters::initialized(s, 1);
    CHECK_THROWS_AS(forward(s, params, Eigen::MatrixXd::Zero(9, 2)), ShapeError);
    Eigen::MatrixXd nan = Eigen::MatrixXd::Zero(10, 2);
    nan(3, 1) = NAN;
    CHECK_THROWS_AS(forward(s, params, nan), NumericError);
}

TEST_CASE("losses") {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(1, 1), p(1, 1);
    p << 2;
    CHECK(loss_mse(p, t) == 4.0);
    Eigen::MatrixXd t2 = Eigen::MatrixXd::Zero(1, 2), p2 = Eigen::MatrixXd::Ones(1, 2);
    CHECK(loss_mse(p2, t2) == 1.0);
    CHECK(loss_mse(p2, p2) == 0.0);

    // One species, one point, identity mode, sigma 1, scale 1: PA-MSE = 1 + 1.
    const data::Layout layout{1, 1, 1};
    const Eigen::MatrixXd modes = Eigen::MatrixXd::Ones(1, 1);
    const bool species[] = {true};
    const double sigma[] = {1.0};
    const auto pa = make_physics_aware_loss(modes, layout, species, sigma, Eigen::VectorXd::Ones(1));
    Eigen::MatrixXd truth(1, 1), pred(1, 1);
    truth << 1;
    pred << 0;
    const auto terms = loss_pa_mse(pred, truth, pa);
    CHECK(terms.mse == 1.0);
    CHECK(terms.mass == 1.0);
    CHECK(terms.total == 2.0);
    CHECK(loss_pa_mse(truth, truth, pa).total == 0.0);

    const bool none[] = {false};
    CHECK_THROWS_AS(make_physics_aware_loss(modes, layout, none, sigma, Eigen::VectorXd::Ones(1)), InvalidArgument);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto spec = LossSpec::physics_aware(oracle::random_matrix(4, 3, rng));
        const Eigen::MatrixXd a = oracle::random_matrix(5, 3, rng), b = oracle::random_matrix(5, 3, rng);
        const auto r = evaluate_loss(a, b, spec);
        CHECK(r.total >= r.mse);
    }
}

TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        for (auto kind : {ModelKind::Lstm, ModelKind::Cnn}) {
            for (bool pa : {false, true}) {
                const auto c = gradcheck::make_case(kind, pa, seed);
                INFO(describe(c.spec), " pa=", pa, " seed=", seed);
                CHECK(gradcheck::max_error(c) <= 1e-4);
            }
        }
    }
}

TEST_CASE("spec example: LSTM N=3 q=5 p=2 units=4 and CNN with PA-MSE") {
    auto c = gradcheck::make_case(ModelKind::Lstm, false, 21);
    c.spec.modes = 3;
    c.spec.window = 5;
    c.spec.horizon = 2;
    c.spec.units = 4;
    c.spec.hidden = Activation::Tanh;
    c.params = Parameters::initialized(c.spec, 4);
    std::mt19937_64 rng(2);
    c.inputs.assign(3, Eigen::MatrixXd());
    c.targets.assign(3, Eigen::MatrixXd());
    for (int b = 0; b < 3; ++b) {
        c.inputs[b] = oracle::random_matrix(5, 3, rng);
        c.targets[b] = oracle::random_matrix(2, 3, rng) * 0.5;
    }
    CHECK(gradcheck::max_error(c) < 1e-4);
}

TEST_CASE("zero gradient at a reachable optimum") {
    NetworkSpec s = lstm_spec(2, 3);
    s.output = Activation::Tanh;
    const Parameters zero(s);
    const std::vector<Eigen::MatrixXd> in{Eigen::MatrixXd::Random(10, 2)};
    const std::vector<Eigen::MatrixXd> out{Eigen::MatrixXd::Zero(6, 2)};
    const auto g = backward(s, zero, in, out, LossSpec::mse());
    CHECK(g.loss.total == 0.0);
    for (double v : g.gradient) CHECK(v == 0.0);
}

TEST_CASE("adam") {
    std::vector<double> w{0.5, -0.2};
    std::vector<double> g{0.0, 0.0};
    AdamState st;
    adam_step(w, g, st, AdamConfig{}, 1);
    CHECK(w[0] == 0.5);
    CHECK(w[1] == -0.2);

    std::vector<double> x{0.0};
    std::vector<double> one{1.0};
    AdamState s1;
    adam_step(x, one, s1, AdamConfig{}, 1);
    CHECK(x[0] == doctest::Approx(-0.001 / (1.0 + 1e-8)));

    std::vector<double> bowl{1.0};
    AdamState s2;
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    for (std::size_t t = 1; t <= 500; ++t) {
        std::vector<double> grad{2.0 * bowl[0]};
        adam_step(bowl, grad, s2, cfg, t);
    }
    CHECK(std::abs(bowl[0]) < 1e-2);

    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(adam_step(bowl, one, s2, cfg, 1), InvalidArgument);
}

TEST_CASE("checkpoint round trip and mismatch") {
    NetworkSpec s = lstm_spec(3, 5);
    s.hidden = Activation::Elu;
    s.output = Activation::Tanh;
    const auto params = Parameters::initialized(s, 9);
    const auto path = temp_path("weights.romw");
    save_checkpoint(path, s, params);
    const auto [spec, back] = load_checkpoint(path);
    CHECK(spec == s);
    CHECK(back.values == params.values);

    NetworkSpec other = s;
    other.units = 6;
    CHECK_THROWS_AS(load_checkpoint(path, other), MismatchError);

    auto bytes = io::read_file(path);
    bytes.resize(bytes.size() - 3);
    io::write_file(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), CorruptError);
}

TEST_CASE("initialization is seeded") {
    NetworkSpec s = lstm_spec(3, 5);
    const auto a = Parameters::initialized(s, 1);
    const auto b = Parameters::initialized(s, 1);
    const auto c = Parameters::initialized(s, 2);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    const auto& bias = a.block("lstm.b");
    CHECK(a.values[bias.offset + 5] == 1.0);  // forget gate
}
