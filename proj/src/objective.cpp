#include "gsne/objective.hpp"

#include <array>
#include <cmath>
#include <string>
#include <unordered_map>

#include "gsne/errors.hpp"
#include "gsne/rng.hpp"

namespace gsne {

double kl_diag(const gaussian_embedding& p, const gaussian_embedding& q) {
    if (p.mu.size() != q.mu.size()) throw config_error("kl_diag dimension mismatch");
    const auto vp = p.var.array();
    const auto vq = q.var.array();
    const auto dmu = (q.mu - p.mu).array();
    return 0.5 * (vp / vq + dmu.square() / vq - 1.0 + vq.log() - vp.log()).sum();
}

divergence_parts sym_divergence(const gaussian_embedding& a, const gaussian_embedding& b) {
    return {kl_diag(a, b), kl_diag(b, a)};
}

double stable_softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double p1_joint(double d_sym) { return stable_logistic(-d_sym); }

store_grads store_grads::zeros_like(const param_store& s) {
    store_grads g;
    g.attr = encoder_grads::zeros_like(s.attr);
    if (s.ctx) g.ctx = encoder_grads::zeros_like(*s.ctx);
    return g;
}

double store_grads::norm() const {
    double s = attr.squared_norm();
    if (ctx) s += ctx->squared_norm();
    return std::sqrt(s);
}

void store_grads::scale(double s) {
    attr.scale(s);
    if (ctx) ctx->scale(s);
}

namespace {

// Per-batch grouping of node appearances by (encoder set, partition) so each
// distinct node is encoded once and gradient contributions accumulate.
struct node_group {
    bool use_ctx = false;
    int partition = 0;
    std::vector<int> nodes;
    std::unordered_map<int, int> col_of;
    encode_cache cache;
    Eigen::MatrixXd gmu, gvar;
};

struct pair_ref {
    int group_a = 0;
    int col_a = 0;
    int group_b = 0;
    int col_b = 0;
};

struct batch_plan {
    std::vector<node_group> groups;
    std::vector<pair_ref> pos;               // one per term
    std::vector<std::vector<pair_ref>> negs; // per term
};

class group_index {
public:
    int get(std::vector<node_group>& groups, bool use_ctx, int partition) {
        int& slot = slots_[use_ctx ? 1 : 0][partition];
        if (slot < 0) {
            slot = static_cast<int>(groups.size());
            groups.push_back({use_ctx, partition, {}, {}, {}, {}, {}});
        }
        return slot;
    }

    group_index() {
        slots_[0].fill(-1);
        slots_[1].fill(-1);
    }

private:
    std::array<std::array<int, partition_count>, 2> slots_;
};

int intern(node_group& g, int node) {
    auto [it, fresh] = g.col_of.try_emplace(node, static_cast<int>(g.nodes.size()));
    if (fresh) g.nodes.push_back(node);
    return it->second;
}

batch_plan plan_batch(const param_store& store, const multipartite_graph& g,
                      const sample_batch& batch, proximity_order order) {
    if (batch.terms.empty()) throw input_error("objective called with an empty batch");
    const bool dst_ctx = order == proximity_order::second;
    if (dst_ctx && !store.ctx) {
        throw config_error("second-order objective requires a context parameter store");
    }

    batch_plan plan;
    group_index idx;
    auto check_node = [&](node_ref n) {
        if (n.partition < 0 || n.partition >= static_cast<int>(g.partitions.size()) ||
            n.index < 0 || n.index >= g.partitions[n.partition].size()) {
            throw input_error("batch references node outside the graph");
        }
    };
    for (const auto& term : batch.terms) {
        check_node(term.src);
        check_node(term.dst);
        const int ga = idx.get(plan.groups, false, term.src.partition);
        const int ca = intern(plan.groups[ga], term.src.index);
        const int gb = idx.get(plan.groups, dst_ctx, term.dst.partition);
        const int cb = intern(plan.groups[gb], term.dst.index);
        plan.pos.push_back({ga, ca, gb, cb});
        auto& neg_refs = plan.negs.emplace_back();
        neg_refs.reserve(term.negs.size());
        for (const auto& nref : term.negs) {
            check_node(nref);
            const int gn = idx.get(plan.groups, dst_ctx, nref.partition);
            const int cn = intern(plan.groups[gn], nref.index);
            neg_refs.push_back({ga, ca, gn, cn});
        }
    }

    for (auto& grp : plan.groups) {
        const auto& part = g.partitions[grp.partition];
        Eigen::MatrixXd x(part.feature_dim(), grp.nodes.size());
        for (size_t c = 0; c < grp.nodes.size(); ++c) x.col(c) = part.attrs.col(grp.nodes[c]);
        const encoder_params& params =
            grp.use_ctx ? *store.ctx : store.attr;
        grp.cache = encode_batch(params, grp.partition, std::move(x), store.hyper);
    }
    return plan;
}

// Symmetric divergence between two cached columns; log terms cancel.
double pair_divergence(const batch_plan& plan, const pair_ref& pr) {
    const auto& a = plan.groups[pr.group_a].cache;
    const auto& b = plan.groups[pr.group_b].cache;
    const auto va = a.var.col(pr.col_a).array();
    const auto vb = b.var.col(pr.col_b).array();
    const auto dmu = (a.mu.col(pr.col_a) - b.mu.col(pr.col_b)).array();
    return 0.5 * (va / vb + vb / va + dmu.square() * (1.0 / va + 1.0 / vb) - 2.0).sum();
}

// Adds coeff * d(d_sym)/d(mu,var) of both endpoints into the group buffers.
void pair_backward(batch_plan& plan, const pair_ref& pr, double coeff) {
    auto& ga = plan.groups[pr.group_a];
    auto& gb = plan.groups[pr.group_b];
    const auto va = ga.cache.var.col(pr.col_a).array();
    const auto vb = gb.cache.var.col(pr.col_b).array();
    const Eigen::ArrayXd dmu =
        (ga.cache.mu.col(pr.col_a) - gb.cache.mu.col(pr.col_b)).array();
    const Eigen::ArrayXd gmu = coeff * dmu * (1.0 / va + 1.0 / vb);
    ga.gmu.col(pr.col_a).array() += gmu;
    gb.gmu.col(pr.col_b).array() -= gmu;
    ga.gvar.col(pr.col_a).array() +=
        coeff * 0.5 * (1.0 / vb - (vb + dmu.square()) / va.square());
    gb.gvar.col(pr.col_b).array() +=
        coeff * 0.5 * (1.0 / va - (va + dmu.square()) / vb.square());
}

std::string describe_pair(const multipartite_graph& g, const batch_term& term) {
    const auto& sp = g.partitions[term.src.partition];
    const auto& dp = g.partitions[term.dst.partition];
    return "edge " + sp.name + ":" + std::to_string(sp.ids[term.src.index]) + " -> " + dp.name +
           ":" + std::to_string(dp.ids[term.dst.index]);
}

double loss_impl(const param_store& store, const multipartite_graph& g,
                 const sample_batch& batch, proximity_order order, store_grads* grads) {
    batch_plan plan = plan_batch(store, g, batch, order);
    const double inv_b = 1.0 / static_cast<double>(batch.terms.size());

    if (grads) {
        for (auto& grp : plan.groups) {
            grp.gmu = Eigen::MatrixXd::Zero(grp.cache.mu.rows(), grp.cache.mu.cols());
            grp.gvar = Eigen::MatrixXd::Zero(grp.cache.var.rows(), grp.cache.var.cols());
        }
    }

    double loss = 0.0;
    for (size_t t = 0; t < batch.terms.size(); ++t) {
        const double d_pos = pair_divergence(plan, plan.pos[t]);
        double term_loss = stable_softplus(d_pos);
        if (grads) pair_backward(plan, plan.pos[t], inv_b * stable_logistic(d_pos));
        for (const auto& pr : plan.negs[t]) {
            const double d_neg = pair_divergence(plan, pr);
            term_loss += stable_softplus(-d_neg);
            if (grads) pair_backward(plan, pr, -inv_b * stable_logistic(-d_neg));
        }
        if (!std::isfinite(term_loss)) {
            throw numeric_error("non-finite loss at " + describe_pair(g, batch.terms[t]));
        }
        loss += term_loss;
    }
    loss *= inv_b;

    if (grads) {
        for (auto& grp : plan.groups) {
            const encoder_params& params = grp.use_ctx ? *store.ctx : store.attr;
            encoder_grads& tree = grp.use_ctx ? *grads->ctx : grads->attr;
            encode_backward(params, grp.cache, grp.gmu, grp.gvar, store.hyper, tree);
        }
    }
    return loss;
}

} // namespace

double objective_loss(const param_store& store, const multipartite_graph& g,
                      const sample_batch& batch, proximity_order order) {
    return loss_impl(store, g, batch, order, nullptr);
}

double objective_loss_grad(const param_store& store, const multipartite_graph& g,
                           const sample_batch& batch, proximity_order order, store_grads& grads) {
    if (order == proximity_order::second && store.ctx && !grads.ctx) {
        grads.ctx = encoder_grads::zeros_like(*store.ctx);
    }
    return loss_impl(store, g, batch, order, &grads);
}

namespace {

// Flat view over every parameter scalar of one encoder set.
std::vector<std::pair<double*, size_t>> tensor_views(encoder_params& p) {
    std::vector<std::pair<double*, size_t>> v;
    for (auto& lp : p.parts) {
        v.push_back({lp.w1.data(), static_cast<size_t>(lp.w1.size())});
        v.push_back({lp.b1.data(), static_cast<size_t>(lp.b1.size())});
        v.push_back({lp.w2.data(), static_cast<size_t>(lp.w2.size())});
        v.push_back({lp.b2.data(), static_cast<size_t>(lp.b2.size())});
    }
    v.push_back({p.head.w_mu.data(), static_cast<size_t>(p.head.w_mu.size())});
    v.push_back({p.head.b_mu.data(), static_cast<size_t>(p.head.b_mu.size())});
    v.push_back({p.head.w_var.data(), static_cast<size_t>(p.head.w_var.size())});
    v.push_back({p.head.b_var.data(), static_cast<size_t>(p.head.b_var.size())});
    return v;
}

std::vector<std::pair<const double*, size_t>> tensor_views(const encoder_grads& g) {
    std::vector<std::pair<const double*, size_t>> v;
    for (const auto& lp : g.parts) {
        v.push_back({lp.w1.data(), static_cast<size_t>(lp.w1.size())});
        v.push_back({lp.b1.data(), static_cast<size_t>(lp.b1.size())});
        v.push_back({lp.w2.data(), static_cast<size_t>(lp.w2.size())});
        v.push_back({lp.b2.data(), static_cast<size_t>(lp.b2.size())});
    }
    v.push_back({g.head.w_mu.data(), static_cast<size_t>(g.head.w_mu.size())});
    v.push_back({g.head.b_mu.data(), static_cast<size_t>(g.head.b_mu.size())});
    v.push_back({g.head.w_var.data(), static_cast<size_t>(g.head.w_var.size())});
    v.push_back({g.head.b_var.data(), static_cast<size_t>(g.head.b_var.size())});
    return v;
}

} // namespace

gradcheck_report finite_difference_check(const param_store& store, const multipartite_graph& g,
                                         const sample_batch& batch, proximity_order order,
                                         double step) {
    store_grads grads = store_grads::zeros_like(store);
    gradcheck_report rep;
    rep.loss = objective_loss_grad(store, g, batch, order, grads);

    param_store work = store;
    std::vector<std::pair<double*, size_t>> mutable_views = tensor_views(work.attr);
    std::vector<std::pair<const double*, size_t>> grad_views = tensor_views(grads.attr);
    const bool with_ctx = order == proximity_order::second && work.ctx.has_value();
    if (with_ctx) {
        auto mv = tensor_views(*work.ctx);
        mutable_views.insert(mutable_views.end(), mv.begin(), mv.end());
        auto gv = tensor_views(*grads.ctx);
        grad_views.insert(grad_views.end(), gv.begin(), gv.end());
    }

    for (size_t t = 0; t < mutable_views.size(); ++t) {
        auto [data, count] = mutable_views[t];
        const double* analytic = grad_views[t].first;
        for (size_t i = 0; i < count; ++i) {
            const double saved = data[i];
            data[i] = saved + step;
            const double up = objective_loss(work, g, batch, order);
            data[i] = saved - step;
            const double down = objective_loss(work, g, batch, order);
            data[i] = saved;
            const double fd = (up - down) / (2.0 * step);
            const double a = analytic[i];
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
            if (rel > rep.max_rel_err) rep.max_rel_err = rel;
            ++rep.params_checked;
        }
    }
    return rep;
}

gradcheck_instance make_gradcheck_instance(std::uint64_t seed) {
    gradcheck_instance inst;
    rng r(seed, 7);

    multipartite_graph& g = inst.graph;
    g.partitions.resize(partition_count);
    for (int p = 0; p < partition_count; ++p) g.partitions[p].name = partition_names[p];

    auto& houses = g.partitions[part_house];
    houses.ids = {1, 2, 3, 4};
    houses.coords = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    houses.attrs.resize(3, 4);
    auto& regions = g.partitions[part_region];
    regions.ids = {10, 11};
    regions.coords = {{0.25, 0.25}, {0.75, 0.75}};
    regions.attrs.resize(4, 2);
    for (auto* part : {&houses, &regions}) {
        for (Eigen::Index c = 0; c < part->attrs.cols(); ++c) {
            for (Eigen::Index row = 0; row < part->attrs.rows(); ++row) {
                part->attrs(row, c) = r.normal();
            }
        }
    }
    g.partitions[part_school].attrs.resize(1, 0);
    g.partitions[part_station].attrs.resize(1, 0);

    edge_set set;
    set.name = "house-region";
    set.part_a = part_house;
    set.part_b = part_region;
    for (int h = 0; h < 4; ++h) {
        const int reg = h < 2 ? 0 : 1;
        const double d = distance(houses.coords[h], regions.coords[reg], distance_mode::planar);
        set.edges.push_back({h, reg, edge_weight(d, 0.01), d});
    }
    g.edge_sets.push_back(set);

    model_hyper hyper;
    hyper.embed_dim = 4;
    hyper.hidden_dim = 4;
    hyper.first_hidden = 5;
    hyper.var_floor = 1e-6;
    hyper.mu_relu = true;
    inst.store = init_params(hyper, {3, 4, 1, 1}, seed, true);
    // Nudge biases off zero so no pre-activation sits on a relu kink.
    for (auto* params : {&inst.store.attr, &*inst.store.ctx}) {
        for (auto& lp : params->parts) {
            for (Eigen::Index i = 0; i < lp.b1.size(); ++i) lp.b1[i] = 0.05 + 0.03 * r.uniform();
            for (Eigen::Index i = 0; i < lp.b2.size(); ++i) lp.b2[i] = 0.05 + 0.03 * r.uniform();
        }
        for (Eigen::Index i = 0; i < params->head.b_mu.size(); ++i) {
            params->head.b_mu[i] = 0.05 + 0.05 * r.uniform();
        }
        for (Eigen::Index i = 0; i < params->head.b_var.size(); ++i) {
            params->head.b_var[i] = 0.2 + 0.1 * r.uniform();
        }
    }

    // Both directions of two edges, two negatives each: exercises every
    // partition on both sides.
    inst.batch.edge_set = 0;
    inst.batch.terms = {
        {{part_house, 0}, {part_region, 0}, {{part_region, 1}, {part_region, 0}}},
        {{part_region, 0}, {part_house, 0}, {{part_house, 2}, {part_house, 3}}},
        {{part_house, 3}, {part_region, 1}, {{part_region, 0}, {part_region, 1}}},
        {{part_region, 1}, {part_house, 2}, {{part_house, 1}, {part_house, 0}}},
    };
    return inst;
}

gradcheck_report run_gradient_check(std::uint64_t seed, double step) {
    gradcheck_instance inst = make_gradcheck_instance(seed);
    gradcheck_report worst;
    for (const auto order : {proximity_order::first, proximity_order::second}) {
        auto rep = finite_difference_check(inst.store, inst.graph, inst.batch, order, step);
        if (rep.max_rel_err > worst.max_rel_err) worst.max_rel_err = rep.max_rel_err;
        worst.params_checked += rep.params_checked;
        worst.loss = rep.loss;
    }
    return worst;
}

} // namespace gsne
