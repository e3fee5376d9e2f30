#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "cascademl/model_io.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace cml;
using testutil::TempDir;

namespace {

DenseNetwork sample_network() {
    DenseNetwork net(3, 77);
    LayerSpec hidden{5, Activation::relu};
    hidden.dropout_rate = 0.2;
    hidden.batch_norm = true;
    hidden.l2 = 0.01;
    net.add_layer(hidden);
    LayerSpec out{2, Activation::softmax};
    out.init = WeightInit::glorot_uniform;
    net.add_layer(out);
    // perturb the batch-norm state so the round-trip is non-trivial
    net.layers()[0].bn_running_mean = {0.1, -0.2, 0.3, -0.4, 0.5};
    net.layers()[0].bn_running_var = {1.1, 0.9, 1.2, 0.8, 1.0};
    net.layers()[0].bn_gamma = {0.5, 1.5, 1.0, 2.0, 0.25};
    net.layers()[0].bn_beta = {0.01, -0.02, 0.03, -0.04, 0.05};
    return net;
}

} // namespace

TEST_CASE("a saved network loads back bit-identically") {
    TempDir dir;
    const DenseNetwork net = sample_network();
    const std::string path = (dir / "model.cmnet").string();
    save_network(net, path);

    const DenseNetwork loaded = load_network(path);
    REQUIRE(loaded.n_layers() == net.n_layers());
    CHECK(loaded.input_dim() == net.input_dim());
    CHECK(loaded.seed() == net.seed());
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        const Layer& a = net.layers()[l];
        const Layer& b = loaded.layers()[l];
        CHECK(a.spec.units == b.spec.units);
        CHECK(a.spec.activation == b.spec.activation);
        CHECK(a.spec.dropout_rate == b.spec.dropout_rate);
        CHECK(a.spec.batch_norm == b.spec.batch_norm);
        CHECK(a.spec.l2 == b.spec.l2);
        CHECK(a.spec.init == b.spec.init);
        CHECK(a.weights.data() == b.weights.data());
        CHECK(a.bias == b.bias);
        CHECK(a.bn_gamma == b.bn_gamma);
        CHECK(a.bn_beta == b.bn_beta);
        CHECK(a.bn_running_mean == b.bn_running_mean);
        CHECK(a.bn_running_var == b.bn_running_var);
    }

    Rng rng(8);
    const Matrix x = oracle::random_matrix(rng, 4, 3);
    CHECK(predict(net, x).data() == predict(loaded, x).data());

    // serialization itself is deterministic
    CHECK(network_to_text(net) == network_to_text(loaded));
}

TEST_CASE("class-name metadata rides along when provided") {
    TempDir dir;
    const DenseNetwork net = sample_network();
    const std::string path = (dir / "classifier.cmnet").string();
    save_network(net, path, {"first class", "second"});

    const LoadedModel loaded = load_model(path);
    CHECK(loaded.class_names == std::vector<std::string>{"first class", "second"});
    CHECK(loaded.net.n_layers() == net.n_layers());

    // files without the block load with empty metadata
    save_network(net, path);
    CHECK(load_model(path).class_names.empty());
}

TEST_CASE("unsupported versions and malformed files are rejected") {
    {
        std::istringstream in("cmnet 2\n");
        CHECK_THROWS_WITH(load_network_from_stream(in, "test"),
                          Catch::Matchers::ContainsSubstring("unsupported cmnet version"));
    }
    {
        std::istringstream in("bogus\n");
        CHECK_THROWS_AS(load_network_from_stream(in, "test"), io_error);
    }
    {
        // truncated: promises one layer but stops early
        std::istringstream in("cmnet 1\ninput_dim 2\nseed 0\nlayers 1\n");
        CHECK_THROWS_WITH(load_network_from_stream(in, "test"),
                          Catch::Matchers::ContainsSubstring("unexpected end of file"));
    }
    {
        std::istringstream in(
            "cmnet 1\ninput_dim 2\nseed 0\nlayers 1\n"
            "layer units 1 activation warp dropout 0 batch_norm 0 l2 0 init he_normal\n");
        CHECK_THROWS_WITH(load_network_from_stream(in, "test"),
                          Catch::Matchers::ContainsSubstring("unknown activation"));
    }
    CHECK_THROWS_AS(load_network("does_not_exist.cmnet"), io_error);
}

TEST_CASE("a hand-written minimal model is usable") {
    std::istringstream in(
        "cmnet 1\n"
        "input_dim 2\n"
        "seed 0\n"
        "layers 1\n"
        "layer units 1 activation sigmoid dropout 0 batch_norm 0 l2 0 init he_normal\n"
        "weights 2 1\n"
        "10\n"
        "0\n"
        "bias 1\n"
        "0\n"
        "end\n");
    const DenseNetwork net = load_network_from_stream(in, "inline");
    const Matrix x(2, 2, {1.0, 5.0, -1.0, 5.0});
    const auto labels = predict_classes(net, x, Task::binary);
    CHECK(labels == std::vector<int>{1, 0});
}
