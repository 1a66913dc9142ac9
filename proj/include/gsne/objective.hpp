#pragma once

#include <optional>
#include <vector>

#include "gsne/encoder.hpp"
#include "gsne/graph.hpp"

namespace gsne {

// Kullback-Leibler divergence between diagonal gaussians, closed form.
double kl_diag(const gaussian_embedding& p, const gaussian_embedding& q);

struct divergence_parts {
    double forward = 0.0;  // KL(a || b)
    double backward = 0.0; // KL(b || a)
    double sym() const { return forward + backward; }
};

divergence_parts sym_divergence(const gaussian_embedding& a, const gaussian_embedding& b);

// First-order joint probability of an edge given the symmetric divergence.
double p1_joint(double d_sym);

// Numerically stable primitives shared by the losses.
double stable_softplus(double x);
double stable_logistic(double x);

// One directed training example: a positive pair plus sampled negatives on
// the destination side. A sampled undirected edge contributes two of these,
// one per direction.
struct batch_term {
    node_ref src;
    node_ref dst;
    std::vector<node_ref> negs;
};

struct sample_batch {
    int edge_set = -1;
    std::vector<batch_term> terms;
};

// first: destination/negative nodes are embedded with the attribute
// encoders; second: with the separate context encoders.
enum class proximity_order { first, second };

struct store_grads {
    encoder_grads attr;
    std::optional<encoder_grads> ctx;

    static store_grads zeros_like(const param_store& s);
    double norm() const;
    void scale(double s);
};

// Mean over directed terms of softplus(d_pos) + sum_n softplus(-d_neg),
// i.e. the negative sampling objective to minimize. Throws numeric_error
// (naming the offending pair) if any term is non-finite.
double objective_loss(const param_store& store, const multipartite_graph& g,
                      const sample_batch& batch, proximity_order order);

// Same value, also accumulating analytic parameter gradients.
double objective_loss_grad(const param_store& store, const multipartite_graph& g,
                           const sample_batch& batch, proximity_order order, store_grads& grads);

// Central finite-difference verification of every parameter's gradient.
struct gradcheck_report {
    double max_rel_err = 0.0;
    int params_checked = 0;
    double loss = 0.0;
};

gradcheck_report finite_difference_check(const param_store& store, const multipartite_graph& g,
                                         const sample_batch& batch, proximity_order order,
                                         double step);

// Self-contained toy instance (6 nodes, 2 active partitions, small dims)
// suitable for finite-difference verification of both objectives.
struct gradcheck_instance {
    multipartite_graph graph;
    param_store store;
    sample_batch batch;
};

gradcheck_instance make_gradcheck_instance(std::uint64_t seed);

// Runs the toy check for both proximity orders; returns the worse report.
gradcheck_report run_gradient_check(std::uint64_t seed, double step);

} // namespace gsne
