#include "doctest.h"

#include <cmath>
#include <vector>

#include "unicast/tensor.hpp"

using namespace unicast;

TEST_CASE("tensor: construction validates shape against data") {
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), dimension_error);
    CHECK_THROWS_AS(Tensor::from_data({0}, {}), dimension_error);
    Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.at(1, 2) == 6.0);
}

TEST_CASE("tensor: matmul identity, hand oracle, zeros") {
    Tensor i2 = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor r = matmul(i2, a);
    CHECK(r.values() == a.values());

    Tensor b = Tensor::from_data({2, 1}, {5, 6});
    Tensor c = matmul(a, b);
    CHECK(c.at(0, 0) == 17.0);
    CHECK(c.at(1, 0) == 39.0);

    Tensor z = Tensor::zeros({2, 2});
    Tensor zr = matmul(z, a);
    for (double v : zr.values()) CHECK(v == 0.0);
}

TEST_CASE("tensor: matmul rejects mismatched inner dimensions, naming both shapes") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    try {
        matmul(a, b);
        FAIL("expected dimension_error");
    } catch (const dimension_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[2,2]") != std::string::npos);
    }
}

TEST_CASE("tensor: softmax of a constant row is uniform and rows sum to one") {
    Tensor x = Tensor::from_data({1, 3}, {0, 0, 0});
    Tensor s = softmax_rows(x);
    for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Rng rng(5);
    Tensor y = seeded_init({4, 7}, Init::gaussian(3.0), rng);
    Tensor sy = softmax_rows(y);
    for (int r = 0; r < 4; ++r) {
        double sum = 0.0;
        for (int j = 0; j < 7; ++j) sum += sy.at(r, j);
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("tensor: layer norm matches hand-computed values and centers rows") {
    Tensor x = Tensor::from_data({1, 3}, {1, 2, 3});
    Tensor gain = Tensor::full({3}, 1.0);
    Tensor bias = Tensor::zeros({3});
    Tensor y = layer_norm(x, gain, bias);
    CHECK(y.at(0, 0) == doctest::Approx(-1.2247).epsilon(1e-3));
    CHECK(y.at(0, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-3));
    CHECK(y.at(0, 2) == doctest::Approx(1.2247).epsilon(1e-3));

    Rng rng(6);
    Tensor z = seeded_init({5, 9}, Init::gaussian(2.0), rng);
    Tensor gz = Tensor::full({9}, 1.0);
    Tensor bz = Tensor::zeros({9});
    Tensor nz = layer_norm(z, gz, bz);
    for (int r = 0; r < 5; ++r) {
        double mean = 0.0;
        for (int j = 0; j < 9; ++j) mean += nz.at(r, j);
        mean /= 9;
        CHECK(std::abs(mean) < 1e-9);
    }
}

TEST_CASE("tensor: mean_square and sum_all") {
    Tensor x = Tensor::from_data({2}, {1, -1});
    CHECK(mean_square(x).value() == 1.0);
    CHECK(sum_all(x).value() == 0.0);
}

TEST_CASE("tensor: x squared has gradient 2x") {
    Tensor x = Tensor::scalar(3.0, true);
    Tensor loss = sum_all(hadamard(x, x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("tensor: backward demands a scalar loss") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tensor y = scale(x, 2.0);
    CHECK_THROWS_AS(backward(y), contract_error);
}

TEST_CASE("tensor: frozen tensors receive no gradient") {
    Tensor w = Tensor::from_data({2, 2}, {1, 2, 3, 4}, false);
    Tensor x = Tensor::from_data({2, 2}, {1, 1, 1, 1}, true);
    Tensor loss = mean_square(matmul(x, w));
    backward(loss);
    CHECK(x.has_grad());
    CHECK_FALSE(w.has_grad());
}

TEST_CASE("tensor: gradients accumulate over branches and over backward calls") {
    Tensor p = Tensor::from_data({3}, {1, 2, 3}, true);
    // p used twice: loss = sum(p*p) + sum(3p)  =>  d/dp = 2p + 3
    Tensor loss = sum_all(add(hadamard(p, p), scale(p, 3.0)));
    backward(loss);
    CHECK(p.grad()[0] == doctest::Approx(5.0));
    CHECK(p.grad()[1] == doctest::Approx(7.0));
    CHECK(p.grad()[2] == doctest::Approx(9.0));

    backward(loss); // second sweep doubles leaf grads
    CHECK(p.grad()[0] == doctest::Approx(10.0));
    p.zero_grad();
    CHECK_FALSE(p.has_grad());
}

TEST_CASE("tensor: duplicated-parameter construction matches single-use sum") {
    // f(a) = sum(a ⊙ a) built with the same leaf twice must equal the
    // analytic 2a, i.e. both parent slots contribute.
    Tensor a = Tensor::from_data({2}, {4, -2}, true);
    backward(sum_all(hadamard(a, a)));
    CHECK(a.grad()[0] == doctest::Approx(8.0));
    CHECK(a.grad()[1] == doctest::Approx(-4.0));
}

TEST_CASE("tensor: finite differences agree with autodiff on sum(a*b)") {
    Tensor a = Tensor::from_data({2, 3}, {0.5, -1.2, 2.0, 0.1, 0.7, -0.3}, true);
    Tensor b = Tensor::from_data({2, 3}, {1.5, 0.2, -0.8, 1.1, -0.6, 0.9}, true);
    double err = finite_diff_check([&] { return sum_all(hadamard(a, b)); }, {a, b}, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("tensor: finite differences are exact for quadratics and constants") {
    Tensor p = Tensor::from_data({4}, {0.3, -0.9, 1.7, 0.2}, true);
    double err = finite_diff_check([&] { return mean_square(p); }, {p}, 1e-5);
    CHECK(err < 1e-8);

    double cerr = finite_diff_check([&] { return Tensor::scalar(5.0); }, {p}, 1e-5);
    CHECK(cerr == 0.0);
}

TEST_CASE("tensor: composite op chain passes the gradient oracle") {
    Rng rng(17);
    Tensor x = seeded_init({3, 4}, Init::gaussian(0.5), rng, true);
    Tensor w = seeded_init({4, 4}, Init::gaussian(0.5), rng, true);
    Tensor g = Tensor::full({4}, 1.0, true);
    Tensor b = Tensor::zeros({4}, true);
    auto f = [&] {
        Tensor h = gelu(matmul(x, w));
        Tensor n = layer_norm(h, g, b);
        Tensor s = softmax_rows(causal_mask_add(matmul(n, transpose(n))));
        return mean_square(matmul(s, n));
    };
    double err = finite_diff_check(f, {x, w, g, b}, 1e-5);
    CHECK(err < 1e-5);
}

TEST_CASE("tensor: broadcast add covers bias rows and sums gradient back") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor bias = Tensor::from_data({3}, {10, 20, 30}, true);
    Tensor y = add(a, bias);
    CHECK(y.at(1, 0) == 14.0);
    backward(sum_all(y));
    CHECK(bias.grad()[0] == doctest::Approx(2.0)); // two rows fold into each bias slot
    CHECK(a.grad()[3] == doctest::Approx(1.0));

    Tensor bad = Tensor::from_data({2}, {1, 2});
    CHECK_THROWS_AS(add(a, bad), dimension_error);
}

TEST_CASE("tensor: concat and slice are gradient-exact inverses") {
    Tensor top = Tensor::from_data({1, 2}, {1, 2}, true);
    Tensor bot = Tensor::from_data({2, 2}, {3, 4, 5, 6}, true);
    Tensor cat = concat_rows({top, bot});
    CHECK(cat.rows() == 3);
    Tensor back = slice_rows(cat, 1, 3);
    backward(mean_square(back));
    if (top.has_grad()) {
        CHECK(top.grad()[0] == 0.0); // sliced away, nothing flows back
        CHECK(top.grad()[1] == 0.0);
    }
    CHECK(bot.grad()[0] == doctest::Approx(2.0 * 3.0 / 4.0));

    Tensor wide = concat_cols({Tensor::from_data({2, 1}, {1, 2}), Tensor::from_data({2, 2}, {3, 4, 5, 6})});
    CHECK(wide.cols() == 3);
    CHECK(wide.at(1, 2) == 6.0);
    Tensor cut = slice_cols(wide, 1, 3);
    CHECK(cut.at(0, 0) == 3.0);
}

TEST_CASE("tensor: causal mask sends future positions to zero attention") {
    Tensor scores = Tensor::zeros({3, 3});
    Tensor att = softmax_rows(causal_mask_add(scores));
    CHECK(att.at(0, 0) == doctest::Approx(1.0));
    CHECK(att.at(0, 1) == 0.0);
    CHECK(att.at(0, 2) == 0.0);
    CHECK(att.at(1, 0) == doctest::Approx(0.5));
    CHECK(att.at(2, 2) == doctest::Approx(1.0 / 3));
}

TEST_CASE("tensor: embedding gathers rows and scatters gradients") {
    Tensor table = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6}, true);
    Tensor seq = embedding_rows(table, {2, 0, 2});
    CHECK(seq.at(0, 0) == 5.0);
    CHECK(seq.at(1, 1) == 2.0);
    backward(sum_all(seq));
    CHECK(table.grad()[4] == doctest::Approx(2.0)); // row 2 referenced twice
    CHECK(table.grad()[2] == doctest::Approx(0.0)); // row 1 never referenced

    CHECK_THROWS_AS(embedding_rows(table, {3}), input_error);
    CHECK_THROWS_AS(embedding_rows(table, {-1}), input_error);
}

TEST_CASE("tensor: no-grad mode detaches results") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    {
        NoGradGuard ng;
        Tensor y = scale(x, 2.0);
        CHECK_FALSE(y.requires_grad());
        CHECK(y.is_leaf());
    }
    Tensor z = scale(x, 2.0);
    CHECK(z.requires_grad());
    CHECK_FALSE(z.is_leaf());
    CHECK_THROWS_AS(z.mutable_data(), contract_error);
}

TEST_CASE("tensor: seeded init is deterministic and scheme-faithful") {
    Tensor z = Tensor::zeros({2, 2});
    for (double v : z.values()) CHECK(v == 0.0);

    Rng r1(31), r2(31);
    Tensor a = seeded_init({4, 4}, Init::uniform(-0.1, 0.1), r1, true);
    Tensor b = seeded_init({4, 4}, Init::uniform(-0.1, 0.1), r2, true);
    CHECK(a.values() == b.values());
    for (double v : a.values()) {
        CHECK(v >= -0.1);
        CHECK(v < 0.1);
    }
}

TEST_CASE("tensor: check_finite names the offending site") {
    Tensor ok = Tensor::from_data({2}, {1.0, 2.0});
    CHECK_NOTHROW(check_finite(ok, "here"));
    Tensor bad = Tensor::from_data({2}, {1.0, std::nan("")});
    try {
        check_finite(bad, "attention_scores");
        FAIL("expected numeric_error");
    } catch (const numeric_error& e) {
        CHECK(std::string(e.what()).find("attention_scores") != std::string::npos);
    }
}

TEST_CASE("tensor: reshape preserves data and gradients flow through") {
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor y = reshape(x, {3, 2});
    CHECK(y.at(2, 1) == 6.0);
    CHECK_THROWS_AS(reshape(x, {4, 2}), dimension_error);
    backward(mean_square(y));
    CHECK(x.grad()[5] == doctest::Approx(2.0 * 6.0 / 6.0));
}
