#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "relconv/tensor.hpp"

using namespace relconv;

TEST_CASE("matmul identity and small products") {
    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor v = Tensor::from_data({2, 1}, {3, 4});
    Tensor r = matmul(eye, v);
    CHECK(r.data() == std::vector<double>{3, 4});

    Tensor row = Tensor::from_data({1, 2}, {1, 2});
    CHECK(matmul(row, v).value() == 11.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    Rng rng(11);
    std::vector<double> a(4 * 5), b(5 * 2);
    for (auto& x : a) x = rng.uniform(-2, 2);
    for (auto& x : b) x = rng.uniform(-2, 2);
    Tensor ta = Tensor::from_data({4, 5}, a);
    Tensor tb = Tensor::from_data({5, 2}, b);
    auto expect = oracle::matmul(a, b, 4, 5, 2);
    CHECK(oracle::max_abs_diff(matmul(ta, tb).data(), expect) < 1e-12);
}

TEST_CASE("matmul rejects mismatched shapes, naming both") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 3});
    CHECK_THROWS_WITH(matmul(a, b), Catch::Matchers::ContainsSubstring("(2,3)") &&
                                        Catch::Matchers::ContainsSubstring("matmul"));
}

TEST_CASE("matmul gradients match finite differences") {
    Rng rng(7);
    std::vector<double> av(6), bv(6);
    for (auto& x : av) x = rng.uniform(-1, 1);
    for (auto& x : bv) x = rng.uniform(-1, 1);
    Tensor a = Tensor::from_data({2, 3}, av, true);
    Tensor b = Tensor::from_data({3, 2}, bv, true);
    auto forward = [&] {
        Tensor c = matmul(a, b);
        double s = 0.0;
        for (std::size_t i = 0; i < c.numel(); ++i) s += c.data()[i] * static_cast<double>(i + 1);
        return s;
    };
    Tape tape;
    Tensor c = matmul(a, b, &tape);
    Tensor w = Tensor::from_data({4}, {1, 2, 3, 4});
    Tensor loss = reduce_sum(mul(reshape(c, {4}, &tape), w, &tape), 0, &tape);
    tape.backward(loss);
    CHECK(oracle::max_rel_err(*a.grad(), oracle::fd_gradient(a, forward)) < 1e-5);
    CHECK(oracle::max_rel_err(*b.grad(), oracle::fd_gradient(b, forward)) < 1e-5);
}

TEST_CASE("elementwise values") {
    CHECK(sigmoid(Tensor::scalar(0.0)).value() == 0.5);
    Tensor s = add(Tensor::from_data({2}, {1, 2}), Tensor::from_data({2}, {3, 4}));
    CHECK(s.data() == std::vector<double>{4, 6});
    CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), std::invalid_argument);
}

TEST_CASE("non-finite inputs propagate, no clamping") {
    const double inf = std::numeric_limits<double>::infinity();
    Tensor t = Tensor::from_data({2}, {inf, -inf});
    Tensor r = add(t, Tensor::from_data({2}, {1.0, 1.0}));
    CHECK(std::isinf(r.at(0)));
    CHECK(std::isnan(relu(mul(t, Tensor::scalar(0.0))).at(0)));
}

TEST_CASE("sigmoid derivative matches central differences at x=1") {
    Tensor x = Tensor::from_data({1}, {1.0}, true);
    Tape tape;
    Tensor y = sigmoid(x, &tape);
    tape.backward(y);
    const double h = 1e-6;
    const double fd = (1.0 / (1.0 + std::exp(-(1.0 + h))) - 1.0 / (1.0 + std::exp(-(1.0 - h)))) / (2 * h);
    CHECK(std::abs((*x.grad())[0] - fd) < 1e-8);
}

TEST_CASE("scalar broadcast in binary ops") {
    Tensor t = Tensor::from_data({3}, {1, 2, 3});
    Tensor c = mul(t, Tensor::scalar(2.0));
    CHECK(c.data() == std::vector<double>{2, 4, 6});
    Tensor q = div(t, Tensor::scalar(2.0));
    CHECK(q.data() == std::vector<double>{0.5, 1.0, 1.5});
}

TEST_CASE("reduce values") {
    Tensor m = Tensor::from_data({2, 2}, {2, 4, 6, 8});
    CHECK(reduce_mean(m, 0).data() == std::vector<double>{4, 6});
    CHECK(reduce_sum(Tensor::from_data({3}, {1, 2, 3}), 0).value() == 6.0);
    CHECK(reduce_max(Tensor::from_data({3}, {1, 5, 2}), 0).value() == 5.0);
}

TEST_CASE("reduce gradient matches finite differences") {
    Rng rng(3);
    std::vector<double> v(6);
    for (auto& x : v) x = rng.uniform(-1, 1);
    Tensor t = Tensor::from_data({2, 3}, v, true);
    auto forward = [&] {
        Tensor r = reduce_mean(t, 0);
        return r.at(0) + 2 * r.at(1) + 3 * r.at(2);
    };
    Tape tape;
    Tensor r = reduce_mean(t, 0, &tape);
    Tensor loss = reduce_sum(mul(r, Tensor::from_data({3}, {1, 2, 3}), &tape), 0, &tape);
    tape.backward(loss);
    CHECK(oracle::max_rel_err(*t.grad(), oracle::fd_gradient(t, forward)) < 1e-8);
}

TEST_CASE("max reduce routes gradient to first argmax on ties") {
    Tensor t = Tensor::from_data({4}, {3, 7, 7, 1}, true);
    Tape tape;
    tape.backward(reduce_max(t, 0, &tape));
    CHECK(*t.grad() == std::vector<double>{0, 1, 0, 0});
}

TEST_CASE("reduce over an empty axis fails") {
    Tensor empty = Tensor::from_data({0, 3}, {});
    CHECK_THROWS_WITH(reduce_sum(empty, 0), Catch::Matchers::ContainsSubstring("empty reduction"));
}

TEST_CASE("gather_rows selects in index order") {
    Tensor t = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor g = gather_rows(t, {2, 0});
    CHECK(g.data() == std::vector<double>{5, 6, 1, 2});
}

TEST_CASE("gather_rows duplicate indices accumulate gradients") {
    Tensor t = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6}, true);
    Tape tape;
    Tensor g = gather_rows(t, {0, 0}, &tape);
    tape.backward(reduce_sum(reduce_sum(g, 0, &tape), 0, &tape));
    CHECK(*t.grad() == std::vector<double>{2, 2, 0, 0, 0, 0});
}

TEST_CASE("gather_rows out-of-range names the offending index") {
    Tensor t = Tensor::zeros({3, 2});
    CHECK_THROWS_WITH(gather_rows(t, {1, 9}), Catch::Matchers::ContainsSubstring("9"));
}

TEST_CASE("gather_rows gradient matches finite differences") {
    Rng rng(5);
    std::vector<double> v(8);
    for (auto& x : v) x = rng.uniform(-1, 1);
    Tensor t = Tensor::from_data({4, 2}, v, true);
    const std::vector<std::size_t> idx{3, 1, 3};
    auto weights = Tensor::from_data({6}, {1, -2, 3, -4, 5, -6});
    auto forward = [&] {
        Tensor g = gather_rows(t, idx);
        double s = 0.0;
        for (std::size_t i = 0; i < 6; ++i) s += g.data()[i] * weights.data()[i];
        return s;
    };
    Tape tape;
    Tensor g = gather_rows(t, idx, &tape);
    tape.backward(reduce_sum(mul(reshape(g, {6}, &tape), weights, &tape), 0, &tape));
    CHECK(oracle::max_rel_err(*t.grad(), oracle::fd_gradient(t, forward)) < 1e-8);
}

TEST_CASE("concat basics and shape arithmetic") {
    Tensor a = Tensor::from_data({1, 1}, {1});
    Tensor b = Tensor::from_data({1, 1}, {2});
    Tensor c = concat({a, b}, 0);
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c.data() == std::vector<double>{1, 2});

    const std::size_t p = 5, k = 4, s = 2;
    std::vector<Tensor> parts(p, Tensor::zeros({k - s + 1}));
    CHECK(concat(parts, 0).numel() == p * (k - s + 1));

    CHECK_THROWS_AS(concat({Tensor::zeros({1, 2}), Tensor::zeros({1, 3})}, 0), std::invalid_argument);
}

TEST_CASE("concat gradient splits by part") {
    Tensor a = Tensor::from_data({2}, {1, 2}, true);
    Tensor b = Tensor::from_data({3}, {3, 4, 5}, true);
    auto weights = Tensor::from_data({5}, {1, 2, 3, 4, 5});
    auto forward = [&] {
        Tensor c = concat({a, b}, 0);
        double s = 0.0;
        for (std::size_t i = 0; i < 5; ++i) s += c.data()[i] * weights.data()[i];
        return s;
    };
    Tape tape;
    Tensor c = concat({a, b}, 0, &tape);
    tape.backward(reduce_sum(mul(c, weights, &tape), 0, &tape));
    CHECK(oracle::max_rel_err(*a.grad(), oracle::fd_gradient(a, forward)) < 1e-8);
    CHECK(oracle::max_rel_err(*b.grad(), oracle::fd_gradient(b, forward)) < 1e-8);
}

TEST_CASE("cross entropy of uniform logits is ln C") {
    Tensor logits = Tensor::full({3, 4}, 0.7);
    CHECK(softmax_cross_entropy(logits, {0, 1, 3}).value() == Catch::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy decreases with the correct-class margin") {
    double prev = std::numeric_limits<double>::max();
    for (double margin : {1.0, 10.0, 100.0}) {
        Tensor logits = Tensor::from_data({1, 3}, {margin, 0.0, 0.0});
        const double loss = softmax_cross_entropy(logits, {0}).value();
        CHECK(loss < prev);
        prev = loss;
    }
    CHECK(prev < 1e-8);
}

TEST_CASE("cross entropy rejects out-of-range labels") {
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::zeros({2, 3}), {0, 3}), std::out_of_range);
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng(13);
    std::vector<double> v(4 * 3);
    for (auto& x : v) x = rng.uniform(-2, 2);
    Tensor logits = Tensor::from_data({4, 3}, v, true);
    const std::vector<std::size_t> labels{0, 2, 1, 1};
    auto forward = [&] { return softmax_cross_entropy(logits, labels).value(); };
    Tape tape;
    tape.backward(softmax_cross_entropy(logits, labels, &tape));
    CHECK(oracle::max_rel_err(*logits.grad(), oracle::fd_gradient(logits, forward)) < 1e-6);
}

TEST_CASE("backward seeds ones through sums") {
    Tensor x = Tensor::from_data({3}, {5, -1, 2}, true);
    Tape tape;
    tape.backward(reduce_sum(x, 0, &tape));
    CHECK(*x.grad() == std::vector<double>{1, 1, 1});
}

TEST_CASE("backward of sum of squares") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tape tape;
    tape.backward(reduce_sum(mul(x, x, &tape), 0, &tape));
    CHECK(*x.grad() == std::vector<double>{2, 4});
}

TEST_CASE("backward rejects non-scalar losses and double consumption") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tape tape;
    Tensor y = mul(x, x, &tape);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
    Tensor loss = reduce_sum(y, 0, &tape);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("gradient accumulation is additive across losses") {
    Tensor x = Tensor::from_data({2}, {0.5, -1.5}, true);

    Tape t1;
    Tensor l1 = reduce_sum(mul(x, x, &t1), 0, &t1);
    t1.backward(l1);
    const std::vector<double> g1 = *x.grad();
    x.clear_grad();

    Tape t2;
    Tensor l2 = reduce_sum(sigmoid(x, &t2), 0, &t2);
    t2.backward(l2);
    const std::vector<double> g2 = *x.grad();
    x.clear_grad();

    // one tape, summed loss
    Tape t3;
    Tensor l3 = add(reduce_sum(mul(x, x, &t3), 0, &t3), reduce_sum(sigmoid(x, &t3), 0, &t3), &t3);
    t3.backward(l3);
    for (std::size_t i = 0; i < 2; ++i) CHECK((*x.grad())[i] == Catch::Approx(g1[i] + g2[i]).epsilon(1e-15));
}

TEST_CASE("running forward twice without backward does not double gradients") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tape tape;
    Tensor y1 = reduce_sum(mul(x, x, &tape), 0, &tape);  // discarded
    Tensor y2 = reduce_sum(mul(x, x, &tape), 0, &tape);
    tape.backward(y2);
    CHECK(*x.grad() == std::vector<double>{2, 4});
    (void)y1;
}

TEST_CASE("tensors not reachable from the loss keep no gradient") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tensor z = Tensor::from_data({2}, {3, 4}, true);
    Tape tape;
    Tensor dead = mul(z, z, &tape);
    tape.backward(reduce_sum(x, 0, &tape));
    CHECK(x.grad() != nullptr);
    CHECK(z.grad() == nullptr);
    (void)dead;
}

TEST_CASE("identical inputs give bit-identical forward values and gradients") {
    auto run = [](std::vector<double>& out_grad) {
        Rng rng(99);
        std::vector<double> v(12);
        for (auto& x : v) x = rng.uniform(-1, 1);
        Tensor a = Tensor::from_data({3, 4}, v, true);
        Tape tape;
        Tensor h = sigmoid(matmul(a, Tensor::from_data({4, 1}, {0.3, -0.2, 0.9, 0.1}), &tape), &tape);
        Tensor loss = reduce_sum(reduce_sum(h, 0, &tape), 0, &tape);
        tape.backward(loss);
        out_grad = *a.grad();
        return loss.value();
    };
    std::vector<double> g1, g2;
    const double v1 = run(g1);
    const double v2 = run(g2);
    CHECK(v1 == v2);
    CHECK(g1 == g2);
}
