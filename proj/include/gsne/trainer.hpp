#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gsne/alias.hpp"
#include "gsne/config.hpp"
#include "gsne/objective.hpp"

namespace gsne {

struct train_config {
    proximity_mode proximity = proximity_mode::both;
    std::int64_t iterations = 30000;
    int batch_size = 128;
    int negatives = 5;
    optimizer_kind optimizer = optimizer_kind::adam;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 5.0;
    alternation_policy alternation = alternation_policy::iterative;
    std::int64_t checkpoint_every = 0; // 0: only on request
    std::int64_t loss_log_every = 0;   // 0: no progress lines
    std::uint64_t seed = 0;
    model_hyper hyper;
    std::vector<std::string> edge_set_filter; // names; empty = every edge set
};

train_config make_train_config(const run_config& rc);

struct loss_record {
    std::int64_t iteration = 0;
    int edge_set = 0;
    double loss = 0.0;
};

// Optimizer moments mirror the parameter tree shape.
struct optimizer_state {
    encoder_grads m_attr, v_attr;
    std::optional<encoder_grads> m_ctx, v_ctx;
    std::int64_t step = 0;
};

struct model_state {
    param_store params;
    optimizer_state opt;
    std::vector<loss_record> history;
};

// Precomputed sampling machinery, a pure function of the graph.
struct edge_samplers {
    std::vector<alias_table> edge_tables;          // per edge set
    std::vector<std::optional<noise_dist>> side_a; // noise over partition a
    std::vector<std::optional<noise_dist>> side_b; // noise over partition b
    std::vector<int> active_sets;                  // indices with edges, post-filter
};

edge_samplers build_samplers(const multipartite_graph& g,
                             const std::vector<std::string>& filter);

struct train_state {
    train_config cfg;
    std::optional<model_state> first;  // first-order model (attribute store only)
    std::optional<model_state> second; // second-order model (attribute + context)
    std::int64_t iteration = 0;
    rng sampler;

    int export_width() const; // embedding columns per node (L or 2L)
};

// Fresh state with seeded parameters for the configured proximity mode.
train_state init_training(const multipartite_graph& g, const train_config& cfg);

// Which edge set iteration t trains on. The random policy draws from r.
int select_edge_set(alternation_policy policy, std::int64_t t, int n_sets, rng& r);

// One batch: both directions of batch_size sampled edges, each direction
// carrying `negatives` noise draws from its destination side.
sample_batch draw_batch(const multipartite_graph& g, const edge_samplers& samplers,
                        int set_index, int batch_size, int negatives, rng& r);

// Runs until state.iteration == target_iterations. With checkpoint_dir
// non-empty and checkpoint_every > 0, writes periodic checkpoints there.
void train(train_state& state, const multipartite_graph& g, std::int64_t target_iterations,
           const std::string& checkpoint_dir = "");

void save_checkpoint(const train_state& state, const std::string& path);
train_state load_checkpoint(const std::string& path);

// Per-model loss history in CSV form: iteration, edge set name, loss.
void write_loss_history(const train_state& state, const multipartite_graph& g,
                        const std::string& path_first, const std::string& path_second);

// Embedding export: one row per graph node in (partition, local) order,
// then optional extra nodes encoded with the house-partition encoder.
// Columns: id, partition, mu_0.., var_0..; with both models trained, the
// first- and second-order mean (and variance) blocks are concatenated.
void export_embeddings(const train_state& state, const multipartite_graph& g,
                       const Eigen::MatrixXd* extra_attrs,
                       const std::vector<std::int64_t>* extra_ids, const std::string& path);

} // namespace gsne
