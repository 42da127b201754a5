#include <doctest.h>

#include <cmath>

#include "eloc/gradcheck.hpp"
#include "eloc/graph.hpp"
#include "eloc/rng.hpp"

using namespace eloc;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, bool requires_grad = true,
                     double lo = -2.0, double hi = 2.0) {
    Tensor t(std::move(shape), requires_grad);
    for (long long i = 0; i < t.size(); ++i) t.at(static_cast<int>(i)) = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("tensor invariants") {
    Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK(t.at(1, 2) == 6.0);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), dimension_error);
    CHECK_THROWS_AS(Tensor({0, 3}), dimension_error);

    Tensor p({2, 2}, true);
    CHECK(p.has_grad());  // grad accumulator present iff requires_grad
    CHECK(p.grad().size() == 4);
    Tensor q({2, 2});
    CHECK(!q.has_grad());
}

TEST_CASE("matmul examples") {
    Graph g;
    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor out = g.matmul(eye, a);
    for (int i = 0; i < 4; ++i) CHECK(out.at(i) == a.at(i));

    Tensor sel = Tensor::from({2, 2}, {1, 0, 0, 0});
    Tensor v = Tensor::from({2, 1}, {5, 7});
    Tensor picked = g.matmul(sel, v);
    CHECK(picked.at(0) == 5.0);
    CHECK(picked.at(1) == 0.0);

    CHECK_THROWS_WITH_AS(g.matmul(a, v.payload() ? Tensor::from({3, 1}, {1, 2, 3}) : v),
                         doctest::Contains("[2x2]"), dimension_error);
}

TEST_CASE("matmul gradient matches finite differences") {
    // gradient of sum(a*b) wrt a at a=[[1,2]], b=[[3],[4]] is [[3,4]]
    Tensor a = Tensor::from({1, 2}, {1, 2}, true);
    Tensor b = Tensor::from({2, 1}, {3, 4});
    auto f = [&](Graph& g) { return g.sum(g.matmul(a, b)); };
    {
        Graph g;
        Tensor loss = f(g);
        g.backward(loss);
        CHECK(a.grad()[0] == doctest::Approx(3.0));
        CHECK(a.grad()[1] == doctest::Approx(4.0));
    }
    a.zero_grad();
    auto report = check_gradients(f, {{"a", a}}, 1e-6);
    CHECK(report.max_error < 1e-8);
}

TEST_CASE("leaky_relu examples and adjoint convention") {
    Graph g;
    Tensor x = Tensor::from({3}, {2.0, -3.0, 0.0}, true);
    Tensor y = g.leaky_relu(x, -0.1);
    CHECK(y.at(0) == 2.0);
    CHECK(y.at(1) == doctest::Approx(0.3));  // -0.1 * -3.0
    CHECK(y.at(2) == 0.0);
    g.backward(g.sum(y));
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == doctest::Approx(-0.1));
    CHECK(x.grad()[2] == 1.0);  // positive-side derivative at exactly 0
}

TEST_CASE("sigmoid examples") {
    Graph g;
    Tensor x = Tensor::from({3}, {0.0, 1e3, -1e3});
    Tensor y = g.sigmoid(x);
    CHECK(y.at(0) == 0.5);
    CHECK(y.at(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y.at(2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(y.all_finite());

    Tensor z = Tensor::from({1}, {0.0}, true);
    Graph g2;
    g2.backward(g2.sum(g2.sigmoid(z)));
    CHECK(z.grad()[0] == doctest::Approx(0.25));  // sigma'(0)
}

TEST_CASE("softmax examples") {
    Graph g;
    Tensor uniform = g.softmax(Tensor::from({3}, {0, 0, 0}), 0);
    for (int i = 0; i < 3; ++i) CHECK(uniform.at(i) == doctest::Approx(1.0 / 3));

    Tensor huge = g.softmax(Tensor::from({2}, {1000, 0}), 0);
    CHECK(huge.at(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(huge.at(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(huge.all_finite());

    Tensor logs = g.softmax(Tensor::from({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}), 0);
    CHECK(logs.at(0) == doctest::Approx(1.0 / 6).epsilon(1e-12));
    CHECK(logs.at(1) == doctest::Approx(2.0 / 6).epsilon(1e-12));
    CHECK(logs.at(2) == doctest::Approx(3.0 / 6).epsilon(1e-12));

    CHECK_THROWS_AS(g.softmax(Tensor::from({3}, {0, 0, 0}), 1), dimension_error);
}

TEST_CASE("softmax slices sum to one under extreme inputs") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor x = random_tensor(rng, {5, 4}, false, -1e4, 1e4);
        for (int axis = 0; axis < 2; ++axis) {
            Graph g;
            Tensor y = g.softmax(x, axis);
            const int slices = axis == 0 ? 4 : 5;
            for (int s = 0; s < slices; ++s) {
                double total = 0.0;
                for (int k = 0; k < (axis == 0 ? 5 : 4); ++k) {
                    total += axis == 0 ? y.at(k, s) : y.at(s, k);
                }
                CHECK(std::abs(total - 1.0) < 1e-12);
            }
        }
    }
}

TEST_CASE("gradient checker on f(x)=x^2") {
    Tensor x = Tensor::from({1}, {3.0}, true);
    auto f = [&](Graph& g) { return g.mul(x, x); };
    auto report = check_gradients(f, {{"x", x}}, 1e-6);
    CHECK(report.max_error < 1e-8);
    // analytic derivative is 6
    x.zero_grad();
    Graph g;
    g.backward(f(g));
    CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("gradient checker rejects bad step sizes and non-finite targets") {
    Tensor x = Tensor::from({1}, {1.0}, true);
    auto f = [&](Graph& g) { return g.mul(x, x); };
    CHECK_THROWS_AS(check_gradients(f, {{"x", x}}, 1e-2), config_error);
    auto bad = [&](Graph& g) {
        Tensor y = g.mul(x, x);
        y.at(0) = std::numeric_limits<double>::quiet_NaN();
        return y;
    };
    CHECK_THROWS_AS(check_gradients(bad, {{"x", x}}, 1e-6), numeric_error);
}

TEST_CASE("every primitive passes finite differences on random inputs") {
    Rng rng(46);
    const double tol = 1e-6;

    for (int rep = 0; rep < 5; ++rep) {
        Tensor a = random_tensor(rng, {3, 4});
        Tensor b = random_tensor(rng, {4, 2});
        Tensor c = random_tensor(rng, {3, 4});
        Tensor bias = random_tensor(rng, {4});

        auto check = [&](const char* name, const std::function<Tensor(Graph&)>& f,
                         std::vector<NamedParam> params) {
            for (auto& p : params) p.tensor.zero_grad();
            auto report = check_gradients(f, params, 1e-6);
            INFO(name << " worst entry " << report.worst.param << "[" << report.worst.index
                      << "] analytic " << report.worst.analytic << " numeric "
                      << report.worst.numeric);
            CHECK(report.max_error < tol);
        };

        check("matmul", [&](Graph& g) { return g.sum(g.tanh(g.matmul(a, b))); },
              {{"a", a}, {"b", b}});
        check("transpose", [&](Graph& g) { return g.sum(g.sigmoid(g.transpose(a))); },
              {{"a", a}});
        check("add/mul/sub", [&](Graph& g) {
                  return g.sum(g.mul(g.add(a, c), g.sub(a, g.scale(c, 0.5))));
              },
              {{"a", a}, {"c", c}});
        check("bias+leaky", [&](Graph& g) {
                  return g.sum(g.leaky_relu(g.add_bias_rows(a, bias), -0.1));
              },
              {{"a", a}, {"bias", bias}});
        check("log_sigmoid", [&](Graph& g) { return g.sum(g.log_sigmoid(a)); }, {{"a", a}});
        check("softmax0", [&](Graph& g) { return g.sum(g.mul(g.softmax(a, 0), c)); },
              {{"a", a}});
        check("log_softmax1", [&](Graph& g) { return g.sum(g.mul(g.log_softmax(a, 1), c)); },
              {{"a", a}});
        check("slice/concat/reshape", [&](Graph& g) {
                  Tensor top = g.slice_rows(a, 0, 2);
                  Tensor cols = g.slice_cols(a, 1, 3);
                  Tensor glued = g.concat_rows({top, g.slice_rows(a, 1, 3)});
                  Tensor extra = g.reshape(g.transpose(cols), {1, 6});
                  return g.add(g.sum(g.tanh(glued)), g.sum(g.sigmoid(extra)));
              },
              {{"a", a}});
    }
}

TEST_CASE("forward replay is bit-identical") {
    Rng rng(7);
    Tensor a = random_tensor(rng, {4, 4}, false);
    Tensor b = random_tensor(rng, {4, 4}, false);
    auto run = [&]() {
        Graph g;
        return g.softmax(g.matmul(g.leaky_relu(a, -0.1), g.sigmoid(b)), 1);
    };
    Tensor first = run();
    Tensor second = run();
    for (long long i = 0; i < first.size(); ++i) {
        CHECK(first.at(static_cast<int>(i)) == second.at(static_cast<int>(i)));
    }
}

TEST_CASE("backward twice is an error, not silent accumulation") {
    Tensor x = Tensor::from({1}, {2.0}, true);
    Graph g;
    Tensor loss = g.mul(x, x);
    g.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    CHECK_THROWS_AS(g.backward(loss), numeric_error);
}

TEST_CASE("gradients accumulate across passes until zeroed") {
    Tensor x = Tensor::from({1}, {2.0}, true);
    for (int pass = 0; pass < 2; ++pass) {
        Graph g;
        g.backward(g.mul(x, x));
    }
    CHECK(x.grad()[0] == doctest::Approx(8.0));  // 4 + 4
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}
