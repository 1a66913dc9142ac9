#include "gsne/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gsne/csv.hpp"
#include "gsne/errors.hpp"
#include "gsne/serialize.hpp"

namespace gsne {

train_config make_train_config(const run_config& rc) {
    rc.validate();
    train_config tc;
    tc.proximity = rc.proximity_enum();
    tc.iterations = rc.iterations;
    tc.batch_size = rc.batch_size;
    tc.negatives = rc.negatives;
    tc.optimizer = rc.optimizer_enum();
    tc.learning_rate = rc.learning_rate;
    tc.adam_beta1 = rc.adam_beta1;
    tc.adam_beta2 = rc.adam_beta2;
    tc.adam_eps = rc.adam_eps;
    tc.grad_clip = rc.grad_clip;
    tc.alternation = rc.alternation_enum();
    tc.checkpoint_every = rc.checkpoint_every;
    tc.loss_log_every = rc.loss_log_every;
    tc.seed = rc.seed;
    tc.hyper.embed_dim = rc.embed_dim;
    tc.hyper.hidden_dim = rc.hidden_dim;
    tc.hyper.first_hidden = rc.first_hidden;
    tc.hyper.var_floor = rc.var_floor;
    tc.hyper.mu_relu = rc.mu_relu;
    return tc;
}

edge_samplers build_samplers(const multipartite_graph& g,
                             const std::vector<std::string>& filter) {
    for (const auto& name : filter) {
        if (g.edge_set_index(name) < 0) {
            throw config_error("edge set filter names unknown set '" + name + "'");
        }
    }
    edge_samplers s;
    s.edge_tables.resize(g.edge_sets.size());
    s.side_a.resize(g.edge_sets.size());
    s.side_b.resize(g.edge_sets.size());
    for (size_t i = 0; i < g.edge_sets.size(); ++i) {
        const auto& set = g.edge_sets[i];
        const bool selected =
            filter.empty() || std::find(filter.begin(), filter.end(), set.name) != filter.end();
        if (!selected) continue;
        if (set.edges.empty()) {
            std::fprintf(stderr, "warning: skipping empty edge set '%s'\n", set.name.c_str());
            continue;
        }
        s.edge_tables[i] = build_edge_sampler(set);
        auto [da, db] = edge_set_degrees(set, g.partitions[set.part_a].size(),
                                         g.partitions[set.part_b].size());
        s.side_a[i] = noise_dist::build(da);
        s.side_b[i] = noise_dist::build(db);
        s.active_sets.push_back(static_cast<int>(i));
    }
    if (s.active_sets.empty()) throw config_error("no non-empty edge sets selected for training");
    return s;
}

int train_state::export_width() const {
    const int L = cfg.hyper.embed_dim;
    return (first && second) ? 2 * L : L;
}

train_state init_training(const multipartite_graph& g, const train_config& cfg) {
    if (cfg.batch_size < 1) throw config_error("batch_size must be >= 1");
    if (cfg.negatives < 0) throw config_error("negatives must be >= 0");
    if (cfg.iterations < 0) throw config_error("iterations must be >= 0");

    std::vector<int> dims(partition_count, 1);
    for (int p = 0; p < partition_count; ++p) {
        dims[p] = std::max(1, g.partitions[p].feature_dim());
    }

    train_state st;
    st.cfg = cfg;
    st.sampler = rng(cfg.seed, 100);
    if (cfg.proximity == proximity_mode::first || cfg.proximity == proximity_mode::both) {
        model_state m;
        m.params = init_params(cfg.hyper, dims, cfg.seed, false);
        m.opt.m_attr = encoder_grads::zeros_like(m.params.attr);
        m.opt.v_attr = encoder_grads::zeros_like(m.params.attr);
        st.first = std::move(m);
    }
    if (cfg.proximity == proximity_mode::second || cfg.proximity == proximity_mode::both) {
        model_state m;
        m.params = init_params(cfg.hyper, dims, cfg.seed + 1, true);
        m.opt.m_attr = encoder_grads::zeros_like(m.params.attr);
        m.opt.v_attr = encoder_grads::zeros_like(m.params.attr);
        m.opt.m_ctx = encoder_grads::zeros_like(*m.params.ctx);
        m.opt.v_ctx = encoder_grads::zeros_like(*m.params.ctx);
        st.second = std::move(m);
    }
    return st;
}

int select_edge_set(alternation_policy policy, std::int64_t t, int n_sets, rng& r) {
    if (n_sets < 1) throw config_error("no edge sets to select from");
    switch (policy) {
    case alternation_policy::iterative:
        return static_cast<int>(t % n_sets);
    case alternation_policy::random:
        return static_cast<int>(r.uniform_index(static_cast<std::uint64_t>(n_sets)));
    case alternation_policy::block100:
        return static_cast<int>((t / 100) % n_sets);
    }
    throw config_error("unknown alternation policy");
}

sample_batch draw_batch(const multipartite_graph& g, const edge_samplers& samplers,
                        int set_index, int batch_size, int negatives, rng& r) {
    const auto& set = g.edge_sets.at(set_index);
    const auto& table = samplers.edge_tables.at(set_index);
    const auto& noise_a = samplers.side_a.at(set_index);
    const auto& noise_b = samplers.side_b.at(set_index);
    if (!noise_a || !noise_b) throw config_error("edge set '" + set.name + "' has no sampler");

    sample_batch batch;
    batch.edge_set = set_index;
    batch.terms.reserve(static_cast<size_t>(batch_size) * 2);
    for (int i = 0; i < batch_size; ++i) {
        const auto& e = set.edges[table.draw(r)];
        batch_term fwd;
        fwd.src = {set.part_a, e.a};
        fwd.dst = {set.part_b, e.b};
        fwd.negs.reserve(negatives);
        for (int n = 0; n < negatives; ++n) fwd.negs.push_back({set.part_b, noise_b->draw(r)});
        batch.terms.push_back(std::move(fwd));

        batch_term bwd;
        bwd.src = {set.part_b, e.b};
        bwd.dst = {set.part_a, e.a};
        bwd.negs.reserve(negatives);
        for (int n = 0; n < negatives; ++n) bwd.negs.push_back({set.part_a, noise_a->draw(r)});
        batch.terms.push_back(std::move(bwd));
    }
    return batch;
}

namespace {

// Flat spans over every tensor in a parameter-shaped tree; the same walk
// order is used for params, gradients and optimizer moments.
template <class Tree>
std::vector<std::pair<double*, size_t>> flat_views(Tree& tree) {
    std::vector<std::pair<double*, size_t>> v;
    for (auto& lp : tree.parts) {
        v.push_back({lp.w1.data(), static_cast<size_t>(lp.w1.size())});
        v.push_back({lp.b1.data(), static_cast<size_t>(lp.b1.size())});
        v.push_back({lp.w2.data(), static_cast<size_t>(lp.w2.size())});
        v.push_back({lp.b2.data(), static_cast<size_t>(lp.b2.size())});
    }
    v.push_back({tree.head.w_mu.data(), static_cast<size_t>(tree.head.w_mu.size())});
    v.push_back({tree.head.b_mu.data(), static_cast<size_t>(tree.head.b_mu.size())});
    v.push_back({tree.head.w_var.data(), static_cast<size_t>(tree.head.w_var.size())});
    v.push_back({tree.head.b_var.data(), static_cast<size_t>(tree.head.b_var.size())});
    return v;
}

void adam_update(encoder_params& params, const encoder_grads& grads, encoder_grads& m,
                 encoder_grads& v, const train_config& cfg, double bias1, double bias2) {
    auto pv = flat_views(params);
    auto gv = flat_views(const_cast<encoder_grads&>(grads));
    auto mv = flat_views(m);
    auto vv = flat_views(v);
    for (size_t t = 0; t < pv.size(); ++t) {
        double* p = pv[t].first;
        const double* g = gv[t].first;
        double* mm = mv[t].first;
        double* vm = vv[t].first;
        for (size_t i = 0; i < pv[t].second; ++i) {
            mm[i] = cfg.adam_beta1 * mm[i] + (1.0 - cfg.adam_beta1) * g[i];
            vm[i] = cfg.adam_beta2 * vm[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
            const double mhat = mm[i] / bias1;
            const double vhat = vm[i] / bias2;
            p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

void sgd_update(encoder_params& params, const encoder_grads& grads, double lr) {
    auto pv = flat_views(params);
    auto gv = flat_views(const_cast<encoder_grads&>(grads));
    for (size_t t = 0; t < pv.size(); ++t) {
        for (size_t i = 0; i < pv[t].second; ++i) {
            pv[t].first[i] -= lr * gv[t].first[i];
        }
    }
}

void optimizer_step(model_state& model, store_grads& grads, const train_config& cfg) {
    const double norm = grads.norm();
    if (!std::isfinite(norm)) throw numeric_error("non-finite gradient norm during training");
    if (norm > cfg.grad_clip) grads.scale(cfg.grad_clip / norm);

    if (cfg.optimizer == optimizer_kind::adam) {
        model.opt.step += 1;
        const double bias1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(model.opt.step));
        const double bias2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(model.opt.step));
        adam_update(model.params.attr, grads.attr, model.opt.m_attr, model.opt.v_attr, cfg, bias1,
                    bias2);
        if (model.params.ctx) {
            adam_update(*model.params.ctx, *grads.ctx, *model.opt.m_ctx, *model.opt.v_ctx, cfg,
                        bias1, bias2);
        }
    } else {
        sgd_update(model.params.attr, grads.attr, cfg.learning_rate);
        if (model.params.ctx) sgd_update(*model.params.ctx, *grads.ctx, cfg.learning_rate);
    }
}

} // namespace

void train(train_state& state, const multipartite_graph& g, std::int64_t target_iterations,
           const std::string& checkpoint_dir) {
    if (target_iterations < state.iteration) {
        throw config_error("target iteration count " + std::to_string(target_iterations) +
                           " is below the state's iteration " + std::to_string(state.iteration));
    }
    const edge_samplers samplers = build_samplers(g, state.cfg.edge_set_filter);
    const int n_active = static_cast<int>(samplers.active_sets.size());

    store_grads grads_first, grads_second;
    if (state.first) grads_first = store_grads::zeros_like(state.first->params);
    if (state.second) grads_second = store_grads::zeros_like(state.second->params);

    // Exponentially smoothed losses, for progress lines only; the history
    // keeps raw per-iteration values.
    double ema_first = 0.0, ema_second = 0.0;
    bool ema_ready = false;
    constexpr double ema_decay = 0.99;

    while (state.iteration < target_iterations) {
        const std::int64_t t = state.iteration;
        const int set_index =
            samplers.active_sets[select_edge_set(state.cfg.alternation, t, n_active,
                                                 state.sampler)];
        sample_batch batch = draw_batch(g, samplers, set_index, state.cfg.batch_size,
                                        state.cfg.negatives, state.sampler);
        double loss_first = 0.0, loss_second = 0.0;
        if (state.first) {
            grads_first.scale(0.0);
            loss_first = objective_loss_grad(state.first->params, g, batch,
                                             proximity_order::first, grads_first);
            optimizer_step(*state.first, grads_first, state.cfg);
            state.first->history.push_back({t, set_index, loss_first});
        }
        if (state.second) {
            grads_second.scale(0.0);
            loss_second = objective_loss_grad(state.second->params, g, batch,
                                              proximity_order::second, grads_second);
            optimizer_step(*state.second, grads_second, state.cfg);
            state.second->history.push_back({t, set_index, loss_second});
        }
        if (ema_ready) {
            ema_first = ema_decay * ema_first + (1.0 - ema_decay) * loss_first;
            ema_second = ema_decay * ema_second + (1.0 - ema_decay) * loss_second;
        } else {
            ema_first = loss_first;
            ema_second = loss_second;
            ema_ready = true;
        }
        state.iteration += 1;

        if (state.cfg.loss_log_every > 0 && state.iteration % state.cfg.loss_log_every == 0) {
            std::fprintf(stderr, "iteration %lld/%lld set=%s smoothed_first=%.5f"
                                 " smoothed_second=%.5f\n",
                         static_cast<long long>(state.iteration),
                         static_cast<long long>(target_iterations),
                         g.edge_sets[set_index].name.c_str(), ema_first, ema_second);
        }
        if (!checkpoint_dir.empty() && state.cfg.checkpoint_every > 0 &&
            state.iteration % state.cfg.checkpoint_every == 0 &&
            state.iteration < target_iterations) {
            save_checkpoint(state, checkpoint_dir + "/checkpoint.bin");
        }
    }
}

namespace {

constexpr char ckpt_magic[9] = "GSNECK\x01\x00";
constexpr std::uint32_t ckpt_version = 1;

void write_grad_tree(bin_writer& w, const encoder_grads& tree) {
    auto views = flat_views(const_cast<encoder_grads&>(tree));
    w.u32(static_cast<std::uint32_t>(views.size()));
    for (auto [data, count] : views) {
        w.u64(count);
        for (size_t i = 0; i < count; ++i) w.f64(data[i]);
    }
}

void read_grad_tree(bin_reader& r, encoder_grads& tree) {
    auto views = flat_views(tree);
    if (r.u32() != views.size()) throw load_error("optimizer state tensor count mismatch");
    for (auto [data, count] : views) {
        if (r.u64() != count) throw load_error("optimizer state tensor size mismatch");
        for (size_t i = 0; i < count; ++i) data[i] = r.f64();
    }
}

void write_model(bin_writer& w, const model_state& m) {
    write_param_store(w, m.params);
    w.i64(m.opt.step);
    write_grad_tree(w, m.opt.m_attr);
    write_grad_tree(w, m.opt.v_attr);
    w.u32(m.opt.m_ctx ? 1 : 0);
    if (m.opt.m_ctx) {
        write_grad_tree(w, *m.opt.m_ctx);
        write_grad_tree(w, *m.opt.v_ctx);
    }
    w.u64(m.history.size());
    for (const auto& rec : m.history) {
        w.i64(rec.iteration);
        w.u32(static_cast<std::uint32_t>(rec.edge_set));
        w.f64(rec.loss);
    }
}

model_state read_model(bin_reader& r) {
    model_state m;
    m.params = read_param_store(r);
    m.opt.step = r.i64();
    m.opt.m_attr = encoder_grads::zeros_like(m.params.attr);
    m.opt.v_attr = encoder_grads::zeros_like(m.params.attr);
    read_grad_tree(r, m.opt.m_attr);
    read_grad_tree(r, m.opt.v_attr);
    const bool has_ctx_opt = r.u32() == 1;
    if (has_ctx_opt) {
        if (!m.params.ctx) throw load_error("optimizer context moments without context params");
        m.opt.m_ctx = encoder_grads::zeros_like(*m.params.ctx);
        m.opt.v_ctx = encoder_grads::zeros_like(*m.params.ctx);
        read_grad_tree(r, *m.opt.m_ctx);
        read_grad_tree(r, *m.opt.v_ctx);
    }
    m.history.resize(r.u64());
    for (auto& rec : m.history) {
        rec.iteration = r.i64();
        rec.edge_set = static_cast<int>(r.u32());
        rec.loss = r.f64();
    }
    return m;
}

void write_train_config(bin_writer& w, const train_config& c) {
    w.u32(static_cast<std::uint32_t>(c.proximity));
    w.i64(c.iterations);
    w.u32(static_cast<std::uint32_t>(c.batch_size));
    w.u32(static_cast<std::uint32_t>(c.negatives));
    w.u32(c.optimizer == optimizer_kind::adam ? 0 : 1);
    w.f64(c.learning_rate);
    w.f64(c.adam_beta1);
    w.f64(c.adam_beta2);
    w.f64(c.adam_eps);
    w.f64(c.grad_clip);
    w.u32(static_cast<std::uint32_t>(c.alternation));
    w.i64(c.checkpoint_every);
    w.i64(c.loss_log_every);
    w.u64(c.seed);
    w.u32(static_cast<std::uint32_t>(c.hyper.embed_dim));
    w.u32(static_cast<std::uint32_t>(c.hyper.hidden_dim));
    w.u32(static_cast<std::uint32_t>(c.hyper.first_hidden));
    w.f64(c.hyper.var_floor);
    w.u32(c.hyper.mu_relu ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(c.edge_set_filter.size()));
    for (const auto& name : c.edge_set_filter) w.str(name);
}

train_config read_train_config(bin_reader& r) {
    train_config c;
    c.proximity = static_cast<proximity_mode>(r.u32());
    c.iterations = r.i64();
    c.batch_size = static_cast<int>(r.u32());
    c.negatives = static_cast<int>(r.u32());
    c.optimizer = r.u32() == 0 ? optimizer_kind::adam : optimizer_kind::sgd;
    c.learning_rate = r.f64();
    c.adam_beta1 = r.f64();
    c.adam_beta2 = r.f64();
    c.adam_eps = r.f64();
    c.grad_clip = r.f64();
    c.alternation = static_cast<alternation_policy>(r.u32());
    c.checkpoint_every = r.i64();
    c.loss_log_every = r.i64();
    c.seed = r.u64();
    c.hyper.embed_dim = static_cast<int>(r.u32());
    c.hyper.hidden_dim = static_cast<int>(r.u32());
    c.hyper.first_hidden = static_cast<int>(r.u32());
    c.hyper.var_floor = r.f64();
    c.hyper.mu_relu = r.u32() == 1;
    c.edge_set_filter.resize(r.u32());
    for (auto& name : c.edge_set_filter) name = r.str();
    return c;
}

} // namespace

void save_checkpoint(const train_state& state, const std::string& path) {
    bin_writer w(path);
    w.magic(ckpt_magic);
    w.u32(ckpt_version);
    write_train_config(w, state.cfg);
    w.i64(state.iteration);
    const auto rng_state = state.sampler.save_state();
    for (const auto word : rng_state) w.u64(word);
    w.u32(state.sampler.has_cached_normal() ? 1 : 0);
    w.f64(state.sampler.cached_normal());
    w.u32(state.first ? 1 : 0);
    if (state.first) write_model(w, *state.first);
    w.u32(state.second ? 1 : 0);
    if (state.second) write_model(w, *state.second);
    w.close();
}

train_state load_checkpoint(const std::string& path) {
    bin_reader r(path);
    r.expect_magic(ckpt_magic);
    const auto version = r.u32();
    if (version != ckpt_version) {
        throw load_error(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    train_state st;
    st.cfg = read_train_config(r);
    st.iteration = r.i64();
    std::array<std::uint64_t, 4> words{};
    for (auto& word : words) word = r.u64();
    const bool has_cached = r.u32() == 1;
    const double cached = r.f64();
    st.sampler.restore_state(words, has_cached, cached);
    if (r.u32() == 1) st.first = read_model(r);
    if (r.u32() == 1) st.second = read_model(r);

    const bool needs_first =
        st.cfg.proximity == proximity_mode::first || st.cfg.proximity == proximity_mode::both;
    const bool needs_second =
        st.cfg.proximity == proximity_mode::second || st.cfg.proximity == proximity_mode::both;
    if (needs_first && !st.first) {
        throw load_error(path + ": checkpoint is missing its first-order model section");
    }
    if (needs_second && !st.second) {
        throw load_error(path + ": checkpoint is missing its second-order model section");
    }
    if (st.second && !st.second->params.ctx) {
        throw load_error(path + ": second-order model lacks a context parameter section");
    }
    r.expect_eof();
    return st;
}

void write_loss_history(const train_state& state, const multipartite_graph& g,
                        const std::string& path_first, const std::string& path_second) {
    auto dump = [&](const model_state& m, const std::string& path) {
        std::ostringstream out;
        out << "iteration,edge_set,loss\n";
        for (const auto& rec : m.history) {
            out << rec.iteration << ',' << g.edge_sets.at(rec.edge_set).name << ','
                << format_double(rec.loss) << '\n';
        }
        write_text_file(path, out.str());
    };
    if (state.first && !path_first.empty()) dump(*state.first, path_first);
    if (state.second && !path_second.empty()) dump(*state.second, path_second);
}

void export_embeddings(const train_state& state, const multipartite_graph& g,
                       const Eigen::MatrixXd* extra_attrs,
                       const std::vector<std::int64_t>* extra_ids, const std::string& path) {
    if (!state.first && !state.second) throw config_error("no trained model to export");
    if ((extra_attrs == nullptr) != (extra_ids == nullptr)) {
        throw config_error("extra embedding rows need both attributes and ids");
    }
    if (extra_attrs && extra_attrs->cols() != static_cast<Eigen::Index>(extra_ids->size())) {
        throw config_error("extra embedding attribute/id count mismatch");
    }

    std::vector<const model_state*> models;
    if (state.first) models.push_back(&*state.first);
    if (state.second) models.push_back(&*state.second);
    const int width = state.export_width();

    std::ostringstream out;
    out << "id,partition";
    for (int i = 0; i < width; ++i) out << ",mu_" << i;
    for (int i = 0; i < width; ++i) out << ",var_" << i;
    out << '\n';

    auto emit = [&](std::int64_t id, const std::string& pname,
                    const std::vector<gaussian_embedding>& embs) {
        out << id << ',' << pname;
        for (const auto& e : embs) {
            for (Eigen::Index i = 0; i < e.mu.size(); ++i) out << ',' << format_double(e.mu[i]);
        }
        for (const auto& e : embs) {
            for (Eigen::Index i = 0; i < e.var.size(); ++i) out << ',' << format_double(e.var[i]);
        }
        out << '\n';
    };

    std::vector<gaussian_embedding> embs(models.size());
    for (int p = 0; p < partition_count; ++p) {
        const auto& part = g.partitions[p];
        for (int i = 0; i < part.size(); ++i) {
            for (size_t m = 0; m < models.size(); ++m) {
                embs[m] = encode_node(models[m]->params, g, {p, i}, encoder_role::attribute);
            }
            emit(part.ids[i], part.name, embs);
        }
    }
    if (extra_attrs) {
        for (Eigen::Index c = 0; c < extra_attrs->cols(); ++c) {
            for (size_t m = 0; m < models.size(); ++m) {
                const auto& params = models[m]->params;
                const Eigen::VectorXd u =
                    encode_attributes(params.attr, part_house, extra_attrs->col(c));
                embs[m] = encode_gaussian(params.attr, u, params.hyper);
            }
            emit((*extra_ids)[static_cast<size_t>(c)], partition_names[part_house], embs);
        }
    }
    write_text_file(path, out.str());
}

} // namespace gsne
