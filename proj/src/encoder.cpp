#include "gsne/encoder.hpp"

#include <cmath>

#include "gsne/errors.hpp"
#include "gsne/rng.hpp"
#include "gsne/serialize.hpp"

namespace gsne {

namespace {

void fill_fan_uniform(Eigen::MatrixXd& m, rng& r) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index row = 0; row < m.rows(); ++row) {
            m(row, c) = r.uniform(-bound, bound);
        }
    }
}

encoder_params init_encoder(const model_hyper& hyper, const std::vector<int>& dims, rng& r) {
    encoder_params p;
    p.parts.resize(dims.size());
    for (size_t k = 0; k < dims.size(); ++k) {
        auto& lp = p.parts[k];
        const int d = std::max(dims[k], 1); // empty partitions keep placeholder shapes
        lp.w1.resize(hyper.first_hidden, d);
        lp.b1 = Eigen::VectorXd::Zero(hyper.first_hidden);
        lp.w2.resize(hyper.hidden_dim, hyper.first_hidden);
        lp.b2 = Eigen::VectorXd::Zero(hyper.hidden_dim);
        fill_fan_uniform(lp.w1, r);
        fill_fan_uniform(lp.w2, r);
    }
    p.head.w_mu.resize(hyper.embed_dim, hyper.hidden_dim);
    p.head.w_var.resize(hyper.embed_dim, hyper.hidden_dim);
    p.head.b_mu = Eigen::VectorXd::Zero(hyper.embed_dim);
    p.head.b_var = Eigen::VectorXd::Zero(hyper.embed_dim);
    fill_fan_uniform(p.head.w_mu, r);
    fill_fan_uniform(p.head.w_var, r);
    return p;
}

} // namespace

param_store init_params(const model_hyper& hyper, const std::vector<int>& feature_dims,
                        std::uint64_t seed, bool with_ctx) {
    if (hyper.embed_dim < 1 || hyper.hidden_dim < 1 || hyper.first_hidden < 1) {
        throw config_error("encoder dimensions must be positive");
    }
    if (!(hyper.var_floor > 0)) throw config_error("var_floor must be positive");
    param_store s;
    s.hyper = hyper;
    s.feature_dims = feature_dims;
    rng attr_rng(seed, 0);
    s.attr = init_encoder(hyper, feature_dims, attr_rng);
    if (with_ctx) {
        rng ctx_rng(seed, 1);
        s.ctx = init_encoder(hyper, feature_dims, ctx_rng);
    }
    return s;
}

Eigen::VectorXd encode_attributes(const encoder_params& p, int partition,
                                  const Eigen::Ref<const Eigen::VectorXd>& x) {
    const auto& lp = p.parts.at(partition);
    if (x.size() != lp.w1.cols()) {
        throw config_error("encoder input has " + std::to_string(x.size()) + " features, expected " +
                           std::to_string(lp.w1.cols()));
    }
    Eigen::VectorXd h1 = (lp.w1 * x + lp.b1).cwiseMax(0.0);
    Eigen::VectorXd h2 = (lp.w2 * h1 + lp.b2).cwiseMax(0.0);
    return h2;
}

gaussian_embedding encode_gaussian(const encoder_params& p,
                                   const Eigen::Ref<const Eigen::VectorXd>& u,
                                   const model_hyper& hyper) {
    gaussian_embedding e;
    Eigen::VectorXd mu_pre = p.head.w_mu * u + p.head.b_mu;
    e.mu = hyper.mu_relu ? mu_pre.cwiseMax(0.0).eval() : mu_pre;
    Eigen::VectorXd s = p.head.w_var * u + p.head.b_var;
    e.var.resize(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double raw = s[i] > 0 ? s[i] + 1.0 : std::exp(s[i]);
        e.var[i] = std::max(raw, hyper.var_floor);
    }
    return e;
}

gaussian_embedding encode_node(const param_store& store, const multipartite_graph& g,
                               node_ref node, encoder_role role) {
    const encoder_params* p = &store.attr;
    if (role == encoder_role::context) {
        if (!store.ctx) throw config_error("context encoding requested but no context store exists");
        p = &*store.ctx;
    }
    const auto& part = g.partitions.at(node.partition);
    if (node.index < 0 || node.index >= part.size()) {
        throw input_error("node index " + std::to_string(node.index) + " outside partition '" +
                          part.name + "'");
    }
    const Eigen::VectorXd u = encode_attributes(*p, node.partition, part.attrs.col(node.index));
    return encode_gaussian(*p, u, store.hyper);
}

encode_cache encode_batch(const encoder_params& p, int partition, Eigen::MatrixXd x,
                          const model_hyper& hyper) {
    const auto& lp = p.parts.at(partition);
    if (x.rows() != lp.w1.cols()) {
        throw config_error("encoder batch has " + std::to_string(x.rows()) +
                           " feature rows, expected " + std::to_string(lp.w1.cols()));
    }
    encode_cache c;
    c.partition = partition;
    c.z = ((lp.w1 * x).colwise() + lp.b1).cwiseMax(0.0);
    c.u = ((lp.w2 * c.z).colwise() + lp.b2).cwiseMax(0.0);
    Eigen::MatrixXd mu_pre = (p.head.w_mu * c.u).colwise() + p.head.b_mu;
    c.mu = hyper.mu_relu ? mu_pre.cwiseMax(0.0).eval() : std::move(mu_pre);
    Eigen::MatrixXd s = (p.head.w_var * c.u).colwise() + p.head.b_var;
    c.var_raw = s.unaryExpr([](double v) { return v > 0 ? v + 1.0 : std::exp(v); });
    c.var = c.var_raw.cwiseMax(hyper.var_floor);
    c.x = std::move(x);
    return c;
}

void encode_backward(const encoder_params& p, const encode_cache& cache,
                     const Eigen::MatrixXd& gmu, const Eigen::MatrixXd& gvar,
                     const model_hyper& hyper, encoder_grads& grads) {
    const auto& lp = p.parts.at(cache.partition);
    auto& gp = grads.parts.at(cache.partition);

    // Head. relu'(pre) read off the activations; elu'(s)+0 equals var_raw
    // below one (s < 0 branch) and one above.
    Eigen::MatrixXd gmu_pre = hyper.mu_relu
        ? (cache.mu.array() > 0.0).select(gmu, Eigen::MatrixXd::Zero(gmu.rows(), gmu.cols())).eval()
        : gmu;
    Eigen::ArrayXXd clamp_open = (cache.var_raw.array() > hyper.var_floor).cast<double>();
    Eigen::MatrixXd gs =
        (gvar.array() * clamp_open * cache.var_raw.array().min(1.0)).matrix();

    grads.head.w_mu.noalias() += gmu_pre * cache.u.transpose();
    grads.head.b_mu.noalias() += gmu_pre.rowwise().sum();
    grads.head.w_var.noalias() += gs * cache.u.transpose();
    grads.head.b_var.noalias() += gs.rowwise().sum();

    Eigen::MatrixXd gu = p.head.w_mu.transpose() * gmu_pre;
    gu.noalias() += p.head.w_var.transpose() * gs;
    gu = (cache.u.array() > 0.0).select(gu, Eigen::MatrixXd::Zero(gu.rows(), gu.cols()));

    gp.w2.noalias() += gu * cache.z.transpose();
    gp.b2.noalias() += gu.rowwise().sum();

    Eigen::MatrixXd gz = lp.w2.transpose() * gu;
    gz = (cache.z.array() > 0.0).select(gz, Eigen::MatrixXd::Zero(gz.rows(), gz.cols()));

    gp.w1.noalias() += gz * cache.x.transpose();
    gp.b1.noalias() += gz.rowwise().sum();
}

encoder_grads encoder_grads::zeros_like(const encoder_params& p) {
    encoder_grads g;
    g.parts.resize(p.parts.size());
    for (size_t k = 0; k < p.parts.size(); ++k) {
        g.parts[k].w1 = Eigen::MatrixXd::Zero(p.parts[k].w1.rows(), p.parts[k].w1.cols());
        g.parts[k].b1 = Eigen::VectorXd::Zero(p.parts[k].b1.size());
        g.parts[k].w2 = Eigen::MatrixXd::Zero(p.parts[k].w2.rows(), p.parts[k].w2.cols());
        g.parts[k].b2 = Eigen::VectorXd::Zero(p.parts[k].b2.size());
    }
    g.head.w_mu = Eigen::MatrixXd::Zero(p.head.w_mu.rows(), p.head.w_mu.cols());
    g.head.b_mu = Eigen::VectorXd::Zero(p.head.b_mu.size());
    g.head.w_var = Eigen::MatrixXd::Zero(p.head.w_var.rows(), p.head.w_var.cols());
    g.head.b_var = Eigen::VectorXd::Zero(p.head.b_var.size());
    return g;
}

double encoder_grads::squared_norm() const {
    double s = 0;
    for (const auto& lp : parts) {
        s += lp.w1.squaredNorm() + lp.b1.squaredNorm() + lp.w2.squaredNorm() + lp.b2.squaredNorm();
    }
    s += head.w_mu.squaredNorm() + head.b_mu.squaredNorm();
    s += head.w_var.squaredNorm() + head.b_var.squaredNorm();
    return s;
}

void encoder_grads::scale(double s) {
    for (auto& lp : parts) {
        lp.w1 *= s;
        lp.b1 *= s;
        lp.w2 *= s;
        lp.b2 *= s;
    }
    head.w_mu *= s;
    head.b_mu *= s;
    head.w_var *= s;
    head.b_var *= s;
}

namespace {

void write_matrix(bin_writer& w, const Eigen::MatrixXd& m) { w.matrix(m); }

void write_vector(bin_writer& w, const Eigen::VectorXd& v) {
    w.matrix(Eigen::MatrixXd(v));
}

Eigen::VectorXd read_vector(bin_reader& r) {
    Eigen::MatrixXd m = r.matrix();
    return Eigen::VectorXd(m.col(0));
}

} // namespace

void write_encoder_params(bin_writer& w, const encoder_params& p) {
    w.u32(static_cast<std::uint32_t>(p.parts.size()));
    for (const auto& lp : p.parts) {
        write_matrix(w, lp.w1);
        write_vector(w, lp.b1);
        write_matrix(w, lp.w2);
        write_vector(w, lp.b2);
    }
    write_matrix(w, p.head.w_mu);
    write_vector(w, p.head.b_mu);
    write_matrix(w, p.head.w_var);
    write_vector(w, p.head.b_var);
}

encoder_params read_encoder_params(bin_reader& r) {
    encoder_params p;
    p.parts.resize(r.u32());
    for (auto& lp : p.parts) {
        lp.w1 = r.matrix();
        lp.b1 = read_vector(r);
        lp.w2 = r.matrix();
        lp.b2 = read_vector(r);
    }
    p.head.w_mu = r.matrix();
    p.head.b_mu = read_vector(r);
    p.head.w_var = r.matrix();
    p.head.b_var = read_vector(r);
    return p;
}

void write_param_store(bin_writer& w, const param_store& s) {
    w.u32(static_cast<std::uint32_t>(s.hyper.embed_dim));
    w.u32(static_cast<std::uint32_t>(s.hyper.hidden_dim));
    w.u32(static_cast<std::uint32_t>(s.hyper.first_hidden));
    w.f64(s.hyper.var_floor);
    w.u32(s.hyper.mu_relu ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(s.feature_dims.size()));
    for (const int d : s.feature_dims) w.u32(static_cast<std::uint32_t>(d));
    write_encoder_params(w, s.attr);
    w.u32(s.ctx ? 1 : 0);
    if (s.ctx) write_encoder_params(w, *s.ctx);
}

param_store read_param_store(bin_reader& r) {
    param_store s;
    s.hyper.embed_dim = static_cast<int>(r.u32());
    s.hyper.hidden_dim = static_cast<int>(r.u32());
    s.hyper.first_hidden = static_cast<int>(r.u32());
    s.hyper.var_floor = r.f64();
    s.hyper.mu_relu = r.u32() == 1;
    s.feature_dims.resize(r.u32());
    for (int& d : s.feature_dims) d = static_cast<int>(r.u32());
    s.attr = read_encoder_params(r);
    if (r.u32() == 1) s.ctx = read_encoder_params(r);
    return s;
}

} // namespace gsne
