#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "gsne/errors.hpp"
#include "gsne/objective.hpp"
#include "gsne/rng.hpp"

using namespace gsne;

namespace {

gaussian_embedding make_emb(std::vector<double> mu, std::vector<double> var) {
    gaussian_embedding e;
    e.mu = Eigen::Map<Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    e.var = Eigen::Map<Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(var.size()));
    return e;
}

// Log-density ratio ln p(x) - ln q(x) for diagonal gaussians.
double log_ratio(const gaussian_embedding& p, const gaussian_embedding& q,
                 const Eigen::VectorXd& x) {
    double s = 0;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        const double tp = (x[d] - p.mu[d]) * (x[d] - p.mu[d]) / p.var[d];
        const double tq = (x[d] - q.mu[d]) * (x[d] - q.mu[d]) / q.var[d];
        s += 0.5 * (std::log(q.var[d] / p.var[d]) + tq - tp);
    }
    return s;
}

double mc_kl(const gaussian_embedding& p, const gaussian_embedding& q, int samples,
             std::uint64_t seed) {
    rng r(seed);
    double acc = 0;
    Eigen::VectorXd x(p.mu.size());
    for (int s = 0; s < samples; ++s) {
        for (Eigen::Index d = 0; d < x.size(); ++d) {
            x[d] = p.mu[d] + std::sqrt(p.var[d]) * r.normal();
        }
        acc += log_ratio(p, q, x);
    }
    return acc / samples;
}

// Gauss-Hermite nodes/weights via the Jacobi matrix eigenproblem.
void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(k / 2.0);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    nodes = es.eigenvalues();
    weights.resize(n);
    const double sqrt_pi = std::sqrt(3.14159265358979323846);
    for (int i = 0; i < n; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        weights[i] = sqrt_pi * v0 * v0;
    }
}

// Deterministic quadrature of E_p[ln p - ln q], dimension by dimension.
double quadrature_kl(const gaussian_embedding& p, const gaussian_embedding& q) {
    Eigen::VectorXd t, w;
    gauss_hermite(24, t, w);
    const double inv_sqrt_pi = 1.0 / std::sqrt(3.14159265358979323846);
    double total = 0;
    for (Eigen::Index d = 0; d < p.mu.size(); ++d) {
        double dim_val = 0;
        for (int i = 0; i < t.size(); ++i) {
            const double x = p.mu[d] + std::sqrt(2.0 * p.var[d]) * t[i];
            const double tp = (x - p.mu[d]) * (x - p.mu[d]) / p.var[d];
            const double tq = (x - q.mu[d]) * (x - q.mu[d]) / q.var[d];
            dim_val += w[i] * 0.5 * (std::log(q.var[d] / p.var[d]) + tq - tp);
        }
        total += dim_val * inv_sqrt_pi;
    }
    return total;
}

} // namespace

TEST_CASE("closed-form divergence on pinned cases") {
    // N(0, 4) vs N(0, 1): 0.5 * (4 - 1 + ln(1/4))
    auto p = make_emb({0.0}, {4.0});
    auto q = make_emb({0.0}, {1.0});
    CHECK(kl_diag(p, q) == doctest::Approx(0.8068528194400547).epsilon(1e-14));

    // Identical gaussians diverge by zero.
    CHECK(kl_diag(p, p) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));

    // Unit variances, unit mean gap: 1/2.
    auto a = make_emb({1.0}, {1.0});
    auto b = make_emb({0.0}, {1.0});
    CHECK(kl_diag(a, b) == doctest::Approx(0.5).epsilon(1e-14));

    // Divergence is additive over dimensions.
    auto p8 = make_emb({0, 0}, {4, 4});
    auto q8 = make_emb({0, 0}, {1, 1});
    CHECK(kl_diag(p8, q8) == doctest::Approx(2 * 0.8068528194400547).epsilon(1e-14));
}

TEST_CASE("divergence is asymmetric but the symmetrized form is not") {
    auto a = make_emb({0.3, -0.2}, {0.5, 2.0});
    auto b = make_emb({1.0, 0.4}, {1.5, 0.8});
    auto div_ab = sym_divergence(a, b);
    auto div_ba = sym_divergence(b, a);
    CHECK(div_ab.forward == doctest::Approx(kl_diag(a, b)).epsilon(1e-15));
    CHECK(div_ab.backward == doctest::Approx(kl_diag(b, a)).epsilon(1e-15));
    CHECK(div_ab.forward != doctest::Approx(div_ab.backward).epsilon(1e-6));
    CHECK(div_ab.sym() == doctest::Approx(div_ba.sym()).epsilon(1e-14));
}

TEST_CASE("kl_diag is non-negative over random pairs") {
    rng r(808);
    for (int i = 0; i < 2000; ++i) {
        Eigen::VectorXd mp(4), mq(4), vp(4), vq(4);
        for (int d = 0; d < 4; ++d) {
            mp[d] = r.uniform(-3, 3);
            mq[d] = r.uniform(-3, 3);
            vp[d] = std::exp(r.uniform(std::log(0.25), std::log(4.0)));
            vq[d] = std::exp(r.uniform(std::log(0.25), std::log(4.0)));
        }
        gaussian_embedding p{mp, vp}, q{mq, vq};
        CHECK(kl_diag(p, q) >= -1e-12);
    }
}

TEST_CASE("monte-carlo estimate confirms the stress pair") {
    auto p = make_emb({0.0}, {4.0});
    auto q = make_emb({0.0}, {1.0});
    const double est = mc_kl(p, q, 1000000, 20240601);
    CHECK(std::abs(est - kl_diag(p, q)) < 5e-3);
}

TEST_CASE("deterministic quadrature matches the closed form on harsh pairs") {
    rng r(515151);
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd mp(8), mq(8), vp(8), vq(8);
        for (int d = 0; d < 8; ++d) {
            mp[d] = r.uniform(-2, 2);
            mq[d] = r.uniform(-2, 2);
            vp[d] = std::exp(r.uniform(std::log(0.25), std::log(4.0)));
            vq[d] = std::exp(r.uniform(std::log(0.25), std::log(4.0)));
        }
        gaussian_embedding p{mp, vp}, q{mq, vq};
        CHECK(std::abs(quadrature_kl(p, q) - kl_diag(p, q)) <= 1e-9);
    }
}

TEST_CASE("edge probability from divergence") {
    CHECK(p1_joint(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p1_joint(50.0) == doctest::Approx(std::exp(-50.0)).epsilon(1e-10));
    CHECK(p1_joint(1e4) == 0.0);
    CHECK(p1_joint(1e6) == 0.0);
    CHECK(p1_joint(-1e6) == 1.0);
    // Monotone decreasing in the divergence.
    double prev = 1.1;
    for (double d = -5; d <= 5; d += 0.25) {
        const double v = p1_joint(d);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("softplus stays exact in the far tails") {
    CHECK(stable_softplus(1e4) == 1e4);
    CHECK(stable_softplus(1e6) == 1e6);
    CHECK(stable_softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(stable_softplus(-1e4) == 0.0);
    CHECK(std::isfinite(stable_softplus(-745.0)));
}

namespace {

gradcheck_instance zeroed_instance() {
    auto inst = make_gradcheck_instance(3);
    for (auto* params : {&inst.store.attr, &*inst.store.ctx}) {
        for (auto& lp : params->parts) {
            lp.w1.setZero();
            lp.b1.setZero();
            lp.w2.setZero();
            lp.b2.setZero();
        }
        params->head.w_mu.setZero();
        params->head.b_mu.setZero();
        params->head.w_var.setZero();
        params->head.b_var.setZero();
    }
    return inst;
}

} // namespace

TEST_CASE("identical embeddings cost (N+1) log 2 per directed term") {
    auto inst = zeroed_instance(); // every node embeds to N(0, I)
    for (auto& term : inst.batch.terms) term.negs.resize(3, term.negs[0]);
    for (auto& term : inst.batch.terms) {
        term.negs = {{term.dst.partition, 0}, {term.dst.partition, 1}, {term.dst.partition, 0}};
    }
    const double expect = 4.0 * std::log(2.0); // N = 3
    for (const auto order : {proximity_order::first, proximity_order::second}) {
        CHECK(objective_loss(inst.store, inst.graph, inst.batch, order) ==
              doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("single positive term with no negatives is softplus of the divergence") {
    auto inst = make_gradcheck_instance(11);
    sample_batch batch;
    batch.edge_set = 0;
    batch.terms = {{{part_house, 1}, {part_region, 0}, {}}};
    auto ea = encode_node(inst.store, inst.graph, {part_house, 1}, encoder_role::attribute);
    auto eb = encode_node(inst.store, inst.graph, {part_region, 0}, encoder_role::attribute);
    const double d = sym_divergence(ea, eb).sym();
    CHECK(objective_loss(inst.store, inst.graph, batch, proximity_order::first) ==
          doctest::Approx(stable_softplus(d)).epsilon(1e-13));

    auto ec = encode_node(inst.store, inst.graph, {part_region, 0}, encoder_role::context);
    const double d2 = sym_divergence(ea, ec).sym();
    CHECK(objective_loss(inst.store, inst.graph, batch, proximity_order::second) ==
          doctest::Approx(stable_softplus(d2)).epsilon(1e-13));
}

TEST_CASE("cloning attribute params into the context store reproduces first order") {
    auto inst = make_gradcheck_instance(17);
    inst.store.ctx = inst.store.attr;
    const double first = objective_loss(inst.store, inst.graph, inst.batch, proximity_order::first);
    const double second =
        objective_loss(inst.store, inst.graph, inst.batch, proximity_order::second);
    CHECK(second == doctest::Approx(first).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences on the toy instance") {
    const auto rep = run_gradient_check(0, 1e-4);
    CHECK(rep.params_checked > 200);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("a small gradient step decreases the loss") {
    auto inst = make_gradcheck_instance(29);
    for (const auto order : {proximity_order::first, proximity_order::second}) {
        store_grads grads = store_grads::zeros_like(inst.store);
        const double before =
            objective_loss_grad(inst.store, inst.graph, inst.batch, order, grads);

        param_store stepped = inst.store;
        const double lr = 1e-5;
        auto apply = [lr](encoder_params& p, const encoder_grads& g) {
            for (size_t k = 0; k < p.parts.size(); ++k) {
                p.parts[k].w1 -= lr * g.parts[k].w1;
                p.parts[k].b1 -= lr * g.parts[k].b1;
                p.parts[k].w2 -= lr * g.parts[k].w2;
                p.parts[k].b2 -= lr * g.parts[k].b2;
            }
            p.head.w_mu -= lr * g.head.w_mu;
            p.head.b_mu -= lr * g.head.b_mu;
            p.head.w_var -= lr * g.head.w_var;
            p.head.b_var -= lr * g.head.b_var;
        };
        apply(stepped.attr, grads.attr);
        if (order == proximity_order::second) apply(*stepped.ctx, *grads.ctx);
        const double after = objective_loss(stepped, inst.graph, inst.batch, order);
        CHECK(after < before);
    }
}

TEST_CASE("objective rejects malformed batches") {
    auto inst = make_gradcheck_instance(5);
    sample_batch empty;
    CHECK_THROWS_AS(objective_loss(inst.store, inst.graph, empty, proximity_order::first),
                    input_error);

    sample_batch bad;
    bad.terms = {{{part_house, 0}, {part_region, 9}, {}}};
    CHECK_THROWS_AS(objective_loss(inst.store, inst.graph, bad, proximity_order::first),
                    input_error);

    inst.store.ctx.reset();
    CHECK_THROWS_AS(objective_loss(inst.store, inst.graph, inst.batch, proximity_order::second),
                    config_error);
}
