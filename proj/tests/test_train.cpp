#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "relconv/synth.hpp"
#include "relconv/train.hpp"

using namespace relconv;

namespace {

SynthSpec bench_spec() {
    SynthSpec spec;  // ~200 nodes, 2 node types, 3 relations, C=3
    return spec;
}

TrainConfig small_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.filters = 16;
    cfg.hidden = 32;
    cfg.depth = 2;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("xavier draws stay inside the fan bound") {
    Rng rng(1);
    Tensor w = xavier({4, 4}, 4, 4, rng);
    const double bound = std::sqrt(6.0 / 8.0);
    for (double x : w.data()) {
        CHECK(x > -bound);
        CHECK(x < bound);
    }
    CHECK_THROWS_AS(xavier({2, 2}, 0, 2, rng), std::invalid_argument);
}

TEST_CASE("xavier variance approaches bound^2/3") {
    Rng rng(2);
    const std::size_t fan_in = 40, fan_out = 60, n = 100000;
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor w = xavier({n}, fan_in, fan_out, rng);
    double mean = 0.0;
    for (double x : w.data()) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : w.data()) var += (x - mean) * (x - mean);
    var /= n;
    CHECK(var == Catch::Approx(a * a / 3.0).epsilon(0.05));
}

TEST_CASE("same seed gives identical parameters") {
    HeteroGraph g = synth_graph(bench_spec(), 4);
    ModelDims dims = small_config(0).dims(g.class_count);
    ModelParams a = init_params(dims, g, 11);
    ModelParams b = init_params(dims, g, 11);
    auto na = a.named_parameters();
    auto nb = b.named_parameters();
    REQUIRE(na.size() == nb.size());
    for (std::size_t i = 0; i < na.size(); ++i) {
        CHECK(na[i].first == nb[i].first);
        CHECK(na[i].second.data() == nb[i].second.data());
    }
}

TEST_CASE("adam first step moves by -lr * sign(g)") {
    double m = 0.0, v = 0.0;
    const double lr = 0.05;
    const double x1 = adam_scalar_step(0.0, 3.7, m, v, 1, lr);
    CHECK(x1 == Catch::Approx(-lr).epsilon(1e-6));
    double m2 = 0.0, v2 = 0.0;
    const double x2 = adam_scalar_step(0.0, -0.4, m2, v2, 1, lr);
    CHECK(x2 == Catch::Approx(lr).epsilon(1e-6));
}

TEST_CASE("adam leaves parameters alone under zero gradient") {
    Tensor p = Tensor::from_data({3}, {1, 2, 3}, true);
    // a recorded but zero gradient
    Tape tape;
    Tensor loss = reduce_sum(mul(p, Tensor::scalar(0.0), &tape), 0, &tape);
    tape.backward(loss);
    std::vector<std::pair<std::string, Tensor>> params{{"p", p}};
    Adam adam(0.1);
    adam.step(params);
    CHECK(p.data() == std::vector<double>{1, 2, 3});
}

TEST_CASE("adam drives a quadratic toward zero") {
    double x = 1.0, m = 0.0, v = 0.0;
    for (std::size_t t = 1; t <= 100; ++t) x = adam_scalar_step(x, 2.0 * x, m, v, t, 0.1);
    CHECK(std::abs(x) < 0.1);
}

TEST_CASE("adam rejects non-finite gradients by name") {
    Tensor p = Tensor::from_data({1}, {1.0}, true);
    Tape tape;
    Tensor bad = mul(p, Tensor::scalar(std::numeric_limits<double>::infinity()), &tape);
    tape.backward(reduce_sum(bad, 0, &tape));
    std::vector<std::pair<std::string, Tensor>> params{{"layer0.kernels", p}};
    Adam adam(0.1);
    CHECK_THROWS_WITH(adam.step(params), Catch::Matchers::ContainsSubstring("layer0.kernels"));
}

TEST_CASE("f1 on perfect predictions") {
    auto s = f1_scores({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
    CHECK(s.micro == 1.0);
    CHECK(s.macro == 1.0);
}

TEST_CASE("f1 hand-computed confusion cases") {
    auto s = f1_scores({0, 1, 1, 1}, {0, 0, 1, 1}, 2);
    CHECK(s.micro == Catch::Approx(0.75).epsilon(1e-12));
    CHECK(s.macro == Catch::Approx((2.0 / 3.0 + 0.8) / 2.0).epsilon(1e-12));

    auto t = f1_scores({1, 1, 1, 1}, {0, 0, 1, 1}, 2);
    CHECK(t.micro == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(t.macro == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("micro F1 equals accuracy on random single-label vectors") {
    Rng rng(33);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 20 + rng.below(30), c = 2 + rng.below(4);
        std::vector<std::size_t> pred(n), truth(n);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.below(c);
            truth[i] = rng.below(c);
            if (pred[i] == truth[i]) correct++;
        }
        auto s = f1_scores(pred, truth, c);
        CHECK(s.micro == Catch::Approx(static_cast<double>(correct) / n).epsilon(1e-12));
    }
}

TEST_CASE("f1 rejects empty and out-of-range input") {
    CHECK_THROWS_AS(f1_scores({}, {}, 2), std::invalid_argument);
    CHECK_THROWS_AS(f1_scores({0, 5}, {0, 1}, 2), std::out_of_range);
}

TEST_CASE("training learns the noise-0 synthetic benchmark") {
    HeteroGraph g = synth_graph(bench_spec(), 1);
    TrainResult r = train(g, small_config(1));
    CHECK(r.best_val_f1 >= 0.95);
    // loss decreases over the first epochs
    REQUIRE(r.history.size() >= 5);
    CHECK(r.history[4].train_loss < r.history[0].train_loss);
    // epoch indices are 1-based and monotone
    for (std::size_t i = 0; i < r.history.size(); ++i) CHECK(r.history[i].epoch == i + 1);
}

TEST_CASE("lr=0 stops after exactly patience+1 epochs with unchanged parameters") {
    HeteroGraph g = synth_graph(SynthSpec{.entities = 30, .carriers = 2, .feature_dim = 6}, 3);
    TrainConfig cfg = small_config(3);
    cfg.learning_rate = 0.0;
    cfg.patience = 7;
    cfg.max_epochs = 100;
    cfg.filters = 4;
    cfg.hidden = 8;
    cfg.depth = 1;
    TrainResult r = train(g, cfg);
    CHECK(r.history.size() == cfg.patience + 1);
    CHECK(r.best_epoch == 1);
    // parameters unchanged: the snapshot equals a fresh initialization
    ModelParams fresh = init_params(cfg.dims(g.class_count), g, splitmix64(cfg.seed ^ 0x1a2b3c4dULL));
    auto ns = r.model.named_parameters();
    auto nf = fresh.named_parameters();
    for (std::size_t i = 0; i < ns.size(); ++i) CHECK(ns[i].second.data() == nf[i].second.data());
}

TEST_CASE("returned model reproduces its recorded best validation score") {
    HeteroGraph g = synth_graph(SynthSpec{.entities = 60, .carriers = 3}, 9);
    TrainConfig cfg = small_config(9);
    cfg.max_epochs = 25;
    cfg.patience = 10;
    TrainResult r = train(g, cfg);
    EvalResult again = evaluate(g, r.model, r.splits.val);
    CHECK(again.f1.micro == Catch::Approx(r.best_val_f1).epsilon(1e-12));
    CHECK(r.history[r.best_epoch - 1].val_f1_micro == Catch::Approx(r.best_val_f1).epsilon(1e-12));
}

TEST_CASE("training is deterministic given dataset, config and seed") {
    HeteroGraph g = synth_graph(SynthSpec{.entities = 40, .carriers = 2}, 6);
    TrainConfig cfg = small_config(6);
    cfg.max_epochs = 8;
    TrainResult a = train(g, cfg);
    TrainResult b = train(g, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val_loss == b.history[i].val_loss);
        CHECK(a.history[i].val_f1_micro == b.history[i].val_f1_micro);
        CHECK(a.history[i].val_f1_macro == b.history[i].val_f1_macro);
    }
}

TEST_CASE("ablation mean of identical pooled rows is that row") {
    // one relation, one neighbor, k=2: slice = (gated row, mean pad) which are equal
    HeteroGraph g;
    g.node_count = 2;
    g.node_type_names = {"a", "b"};
    g.node_type = {1, 0};
    g.type_feature_dim = {2, 2};
    g.labels = {-1, -1};
    g.edge_type_names = {"e"};
    g.edges = {{0, 1, 0}};
    g.raw_features = {{2, 4}, {0, 0}};
    g.build_index();
    PoolingParams p;
    p.k = 2;
    p.projections = {Tensor::from_data({2}, {2, -1})};
    PooledNeighborhood pn = pool_all(g, 1, p);
    Tensor mean = reduce_mean(pn.x, 1);
    CHECK(mean.shape() == Shape{1, 2});
    CHECK(mean.data() == std::vector<double>{1, 2});
}

TEST_CASE("ablation layer output has the same shape as the full layer") {
    HeteroGraph g = synth_graph(SynthSpec{.entities = 12, .carriers = 2, .feature_dim = 4}, 2);
    TrainConfig cfg = small_config(2);
    cfg.depth = 1;
    cfg.filters = 4;
    cfg.hidden = 8;
    ModelDims full_dims = cfg.dims(g.class_count);
    ModelDims abl_dims = full_dims;
    abl_dims.ablation = true;
    ModelParams full = init_params(full_dims, g, 5);
    ModelParams abl = init_params(abl_dims, g, 5);
    Tensor ho = layer_forward(g, g.features(), full.layers[0]);
    Tensor ha = ablation_forward(g, g.features(), abl.layers[0]);
    CHECK(ho.shape() == ha.shape());
}

TEST_CASE("full and ablation variants share pooling at identical seeds") {
    HeteroGraph g = synth_graph(SynthSpec{.entities = 12, .carriers = 2, .feature_dim = 4}, 8);
    TrainConfig cfg = small_config(8);
    ModelDims full_dims = cfg.dims(g.class_count);
    ModelDims abl_dims = full_dims;
    abl_dims.ablation = true;
    ModelParams full = init_params(full_dims, g, 31);
    ModelParams abl = init_params(abl_dims, g, 31);
    for (std::size_t v = 0; v < g.node_count; ++v) {
        PooledNeighborhood a = pool_all(g, v, full.layers[0].pooling);
        PooledNeighborhood b = pool_all(g, v, abl.layers[0].pooling);
        CHECK(a.x.data() == b.x.data());
    }
}

TEST_CASE("training requires labeled nodes") {
    HeteroGraph g = synth_graph(SynthSpec{.entities = 10, .carriers = 2}, 1);
    for (auto& l : g.labels) l = -1;
    CHECK_THROWS_AS(train(g, small_config(1)), data_error);
}
