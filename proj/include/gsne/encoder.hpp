#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gsne/graph.hpp"

namespace gsne {

class bin_reader;
class bin_writer;

struct model_hyper {
    int embed_dim = 32;    // gaussian dimension
    int hidden_dim = 64;   // encoder output width
    int first_hidden = 128;
    double var_floor = 1e-6;
    bool mu_relu = true;
};

// Two dense layers per partition feeding a gaussian head shared by all
// partitions, so every node family lands in one embedding space.
struct layer_pair {
    Eigen::MatrixXd w1; // first_hidden x D_k
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2; // hidden_dim x first_hidden
    Eigen::VectorXd b2;
};

struct gaussian_head {
    Eigen::MatrixXd w_mu;  // embed_dim x hidden_dim
    Eigen::VectorXd b_mu;
    Eigen::MatrixXd w_var; // embed_dim x hidden_dim
    Eigen::VectorXd b_var;
};

struct encoder_params {
    std::vector<layer_pair> parts;
    gaussian_head head;
};

// attribute encoders embed a node from its own features; context encoders
// produce the auxiliary role a node plays as another node's neighbor.
enum class encoder_role { attribute, context };

struct param_store {
    model_hyper hyper;
    std::vector<int> feature_dims;
    encoder_params attr;
    std::optional<encoder_params> ctx;
};

struct gaussian_embedding {
    Eigen::VectorXd mu;
    Eigen::VectorXd var;
};

// Batched forward pass with everything backward needs retained.
struct encode_cache {
    int partition = 0;
    Eigen::MatrixXd x;       // D_k x B inputs
    Eigen::MatrixXd z;       // first_hidden x B, post-relu
    Eigen::MatrixXd u;       // hidden_dim x B, post-relu
    Eigen::MatrixXd mu;      // embed_dim x B
    Eigen::MatrixXd var_raw; // before the floor clamp
    Eigen::MatrixXd var;     // after the clamp
};

// Gradients with the same shape tree as encoder_params.
struct encoder_grads {
    std::vector<layer_pair> parts;
    gaussian_head head;

    static encoder_grads zeros_like(const encoder_params& p);
    double squared_norm() const;
    void scale(double s);
};

// Fan-balanced uniform init (zero biases); ctx, when requested, comes from
// an independent substream of the same seed. Byte-deterministic per seed.
param_store init_params(const model_hyper& hyper, const std::vector<int>& feature_dims,
                        std::uint64_t seed, bool with_ctx);

// Reference single-node path.
Eigen::VectorXd encode_attributes(const encoder_params& p, int partition,
                                  const Eigen::Ref<const Eigen::VectorXd>& x);
gaussian_embedding encode_gaussian(const encoder_params& p,
                                   const Eigen::Ref<const Eigen::VectorXd>& u,
                                   const model_hyper& hyper);
gaussian_embedding encode_node(const param_store& store, const multipartite_graph& g,
                               node_ref node, encoder_role role);

// Batched path used in training; column j of x is one node's features.
encode_cache encode_batch(const encoder_params& p, int partition, Eigen::MatrixXd x,
                          const model_hyper& hyper);

// Accumulates parameter gradients for d(loss)/d(mu|var) of a forward batch.
void encode_backward(const encoder_params& p, const encode_cache& cache,
                     const Eigen::MatrixXd& gmu, const Eigen::MatrixXd& gvar,
                     const model_hyper& hyper, encoder_grads& grads);

// Raw-bit serialization used inside checkpoints.
void write_encoder_params(bin_writer& w, const encoder_params& p);
encoder_params read_encoder_params(bin_reader& r);
void write_param_store(bin_writer& w, const param_store& s);
param_store read_param_store(bin_reader& r);

} // namespace gsne
