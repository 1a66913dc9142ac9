#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "gsne/encoder.hpp"
#include "gsne/errors.hpp"
#include "gsne/rng.hpp"
#include "gsne/serialize.hpp"

using namespace gsne;

namespace {

model_hyper small_hyper() {
    model_hyper h;
    h.embed_dim = 3;
    h.hidden_dim = 4;
    h.first_hidden = 5;
    h.var_floor = 1e-6;
    h.mu_relu = true;
    return h;
}

param_store zero_store(const model_hyper& h, const std::vector<int>& dims) {
    param_store s = init_params(h, dims, 1, false);
    for (auto& lp : s.attr.parts) {
        lp.w1.setZero();
        lp.w2.setZero();
    }
    s.attr.head.w_mu.setZero();
    s.attr.head.w_var.setZero();
    return s;
}

} // namespace

TEST_CASE("all-zero parameters embed every input as a standard gaussian") {
    auto h = small_hyper();
    auto s = zero_store(h, {2, 6});
    Eigen::VectorXd x(6);
    x << 1, -2, 3, 0.5, -0.5, 10;
    auto u = encode_attributes(s.attr, 1, x);
    CHECK(u.norm() == 0.0);
    auto e = encode_gaussian(s.attr, u, h);
    CHECK(e.mu.norm() == 0.0);
    for (int i = 0; i < h.embed_dim; ++i) CHECK(e.var[i] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("variance head is shifted elu with a floor") {
    auto h = small_hyper();
    auto s = zero_store(h, {2});
    // Put a known pre-activation into the first variance output via the bias.
    s.attr.head.b_var[0] = 0.0;   // elu(0)+1 = 1
    s.attr.head.b_var[1] = 2.5;   // positive branch: s+1 = 3.5
    s.attr.head.b_var[2] = -3.0;  // exp(-3) ~ 0.0498
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    auto e = encode_gaussian(s.attr, encode_attributes(s.attr, 0, x), h);
    CHECK(e.var[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e.var[1] == doctest::Approx(3.5).epsilon(1e-15));
    CHECK(e.var[2] == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));

    // Strongly negative pre-activation hits the floor.
    s.attr.head.b_var[2] = -40.0;
    auto f = encode_gaussian(s.attr, encode_attributes(s.attr, 0, x), h);
    CHECK(f.var[2] == doctest::Approx(h.var_floor).epsilon(1e-15));
}

TEST_CASE("identity-like weights pass a non-negative input through") {
    model_hyper h;
    h.embed_dim = 2;
    h.hidden_dim = 2;
    h.first_hidden = 2;
    auto s = init_params(h, {2}, 3, false);
    s.attr.parts[0].w1 = Eigen::MatrixXd::Identity(2, 2);
    s.attr.parts[0].b1.setZero();
    s.attr.parts[0].w2 = Eigen::MatrixXd::Identity(2, 2);
    s.attr.parts[0].b2.setZero();
    s.attr.head.w_mu = Eigen::MatrixXd::Identity(2, 2);
    s.attr.head.b_mu.setZero();
    Eigen::VectorXd x(2);
    x << 0.7, 1.3;
    auto e = encode_gaussian(s.attr, encode_attributes(s.attr, 0, x), h);
    CHECK(e.mu[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(e.mu[1] == doctest::Approx(1.3).epsilon(1e-15));
    // Negative entries are cut by the first relu.
    x << -0.7, 1.3;
    auto f = encode_gaussian(s.attr, encode_attributes(s.attr, 0, x), h);
    CHECK(f.mu[0] == 0.0);
    CHECK(f.mu[1] == doctest::Approx(1.3).epsilon(1e-15));
}

TEST_CASE("variance stays at or above the floor for random params and inputs") {
    auto h = small_hyper();
    auto s = init_params(h, {7}, 11, false);
    rng r(13);
    for (int i = 0; i < 10000; ++i) {
        Eigen::VectorXd x(7);
        for (int j = 0; j < 7; ++j) x[j] = r.normal() * 3.0;
        auto e = encode_gaussian(s.attr, encode_attributes(s.attr, 0, x), h);
        for (int d = 0; d < h.embed_dim; ++d) {
            CHECK(e.var[d] >= h.var_floor);
            CHECK(std::isfinite(e.var[d]));
            CHECK(e.mu[d] >= 0.0); // relu mean head
        }
    }
}

TEST_CASE("mu head without relu can go negative") {
    auto h = small_hyper();
    h.mu_relu = false;
    auto s = init_params(h, {5}, 17, false);
    rng r(29);
    bool saw_negative = false;
    for (int i = 0; i < 200 && !saw_negative; ++i) {
        Eigen::VectorXd x(5);
        for (int j = 0; j < 5; ++j) x[j] = r.normal() * 2.0;
        auto e = encode_gaussian(s.attr, encode_attributes(s.attr, 0, x), h);
        if (e.mu.minCoeff() < 0.0) saw_negative = true;
    }
    CHECK(saw_negative);
}

TEST_CASE("initialization is deterministic and respects fan bounds") {
    auto h = small_hyper();
    auto a = init_params(h, {4, 9}, 42, true);
    auto b = init_params(h, {4, 9}, 42, true);
    CHECK((a.attr.parts[0].w1 - b.attr.parts[0].w1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.attr.head.w_var - b.attr.head.w_var).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.ctx->parts[1].w2 - b.ctx->parts[1].w2).cwiseAbs().maxCoeff() == 0.0);

    auto c = init_params(h, {4, 9}, 43, true);
    CHECK((a.attr.parts[0].w1 - c.attr.parts[0].w1).cwiseAbs().maxCoeff() > 0.0);

    // attr params do not depend on whether a ctx store was requested
    auto d = init_params(h, {4, 9}, 42, false);
    CHECK((a.attr.parts[0].w1 - d.attr.parts[0].w1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.attr.parts[1].w1 - a.ctx->parts[1].w1).cwiseAbs().maxCoeff() > 0.0);

    auto check_bound = [](const Eigen::MatrixXd& m) {
        const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        CHECK(m.cwiseAbs().maxCoeff() <= bound);
        CHECK(m.cwiseAbs().maxCoeff() > 0.0);
    };
    check_bound(a.attr.parts[0].w1);
    check_bound(a.attr.parts[1].w2);
    check_bound(a.attr.head.w_mu);
    CHECK(a.attr.parts[0].b1.norm() == 0.0);
    CHECK(a.attr.head.b_var.norm() == 0.0);
}

TEST_CASE("batched forward matches the single-node reference path") {
    auto h = small_hyper();
    auto s = init_params(h, {6, 3}, 7, false);
    rng r(31);
    for (const int part : {0, 1}) {
        const int d = s.feature_dims[part];
        Eigen::MatrixXd x(d, 9);
        for (int c = 0; c < 9; ++c) {
            for (int row = 0; row < d; ++row) x(row, c) = r.normal();
        }
        auto cache = encode_batch(s.attr, part, x, h);
        for (int c = 0; c < 9; ++c) {
            auto u = encode_attributes(s.attr, part, x.col(c));
            auto e = encode_gaussian(s.attr, u, h);
            CHECK((cache.u.col(c) - u).cwiseAbs().maxCoeff() <= 1e-15);
            CHECK((cache.mu.col(c) - e.mu).cwiseAbs().maxCoeff() <= 1e-15);
            CHECK((cache.var.col(c) - e.var).cwiseAbs().maxCoeff() <= 1e-15);
        }
    }
}

TEST_CASE("encode_node pulls features from the graph and honors roles") {
    auto h = small_hyper();
    multipartite_graph g;
    g.partitions.resize(partition_count);
    for (int p = 0; p < partition_count; ++p) {
        g.partitions[p].name = partition_names[p];
        g.partitions[p].ids = {1, 2};
        g.partitions[p].coords = {{0, 0}, {1, 1}};
        g.partitions[p].attrs = Eigen::MatrixXd::Random(3, 2);
    }
    auto s = init_params(h, {3, 3, 3, 3}, 5, true);
    auto e_attr = encode_node(s, g, {part_school, 1}, encoder_role::attribute);
    auto e_ctx = encode_node(s, g, {part_school, 1}, encoder_role::context);
    CHECK(e_attr.mu.size() == h.embed_dim);
    CHECK((e_attr.mu - e_ctx.mu).cwiseAbs().maxCoeff() > 0.0);

    auto s2 = init_params(h, {3, 3, 3, 3}, 5, false);
    CHECK_THROWS_AS(encode_node(s2, g, {part_school, 1}, encoder_role::context), config_error);
    CHECK_THROWS_AS(encode_node(s, g, {part_school, 9}, encoder_role::attribute), input_error);
}

TEST_CASE("parameter stores serialize bit-exactly") {
    auto h = small_hyper();
    auto s = init_params(h, {5, 2, 3, 4}, 23, true);
    const std::string path = "params_roundtrip.bin";
    {
        bin_writer w(path);
        write_param_store(w, s);
        w.close();
    }
    bin_reader r(path);
    auto t = read_param_store(r);
    CHECK(t.hyper.embed_dim == s.hyper.embed_dim);
    CHECK(t.hyper.var_floor == s.hyper.var_floor);
    CHECK(t.feature_dims == s.feature_dims);
    REQUIRE(t.ctx.has_value());
    for (size_t k = 0; k < s.attr.parts.size(); ++k) {
        CHECK((t.attr.parts[k].w1 - s.attr.parts[k].w1).cwiseAbs().maxCoeff() == 0.0);
        CHECK((t.ctx->parts[k].w2 - s.ctx->parts[k].w2).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((t.attr.head.w_mu - s.attr.head.w_mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK((t.attr.head.b_var - s.attr.head.b_var).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("shape mismatches are rejected") {
    auto h = small_hyper();
    auto s = init_params(h, {4}, 3, false);
    Eigen::VectorXd x(3);
    x.setZero();
    CHECK_THROWS_AS(encode_attributes(s.attr, 0, x), config_error);
    CHECK_THROWS_AS(encode_batch(s.attr, 0, Eigen::MatrixXd::Zero(5, 2), h), config_error);
}
