#include "diffan/neural.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace diffan {

namespace {

inline MatrixXd center_rows(const MatrixXd& m) {
    return m.colwise() - m.rowwise().mean().eval();
}

inline MatrixXd mul_rows(const MatrixXd& m, const VectorXd& rowscale) {
    return m.array().colwise() * rowscale.array();
}

inline MatrixXd div_rows(const MatrixXd& m, const VectorXd& rowscale) {
    return m.array().colwise() / rowscale.array();
}

inline MatrixXd mul_cols(const MatrixXd& m, const VectorXd& colscale) {
    return m.array().rowwise() * colscale.transpose().array();
}

void check_finite(const MatrixXd& m, size_t layer_idx) {
    if (!m.allFinite())
        throw NumericError("forward: non-finite activations after layer " +
                           std::to_string(layer_idx));
}

}  // namespace

Layer Layer::affine(MatrixXd w, VectorXd b) {
    Layer l;
    l.kind = Kind::Affine;
    require(w.rows() == b.size(), "Layer::affine: bias size must match output width");
    l.w = std::move(w);
    l.b = std::move(b);
    return l;
}

Layer Layer::leaky_relu(double slope) {
    Layer l;
    l.kind = Kind::LeakyRelu;
    l.slope = slope;
    return l;
}

Layer Layer::layer_norm(int n) {
    Layer l;
    l.kind = Kind::LayerNorm;
    l.gamma = VectorXd::Ones(n);
    l.beta = VectorXd::Zero(n);
    return l;
}

Layer Layer::dropout(double p) {
    Layer l;
    l.kind = Kind::Dropout;
    require(p >= 0.0 && p < 1.0, "Layer::dropout: need p in [0, 1)");
    l.p = p;
    return l;
}

ScoreNet ScoreNet::make_default(int d, int t_max, std::uint64_t init_seed, int width_small,
                                int width_big) {
    require(d >= 1, "ScoreNet: need d >= 1");
    require(t_max >= 1, "ScoreNet: need t_max >= 1");
    int small = width_small > 0 ? width_small : std::max(128, 3 * d);
    int big = width_big > 0 ? width_big : std::max(1024, 5 * d);

    ScoreNet net;
    net.data_dim = d;
    net.t_max = t_max;
    auto init_affine = [&](int out, int in, int idx) {
        Rng rng = make_rng(mix_seed(init_seed, 0xA11 + idx));
        double a = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-a, a);
        MatrixXd w(out, in);
        VectorXd b(out);
        for (int i = 0; i < out; ++i) {
            for (int j = 0; j < in; ++j) w(i, j) = u(rng);
            b[i] = u(rng);
        }
        return Layer::affine(std::move(w), std::move(b));
    };
    net.layers.push_back(init_affine(small, d + 1, 0));
    net.layers.push_back(Layer::leaky_relu());
    net.layers.push_back(Layer::layer_norm(small));
    net.layers.push_back(Layer::dropout(0.2));
    net.layers.push_back(init_affine(big, small, 1));
    net.layers.push_back(Layer::leaky_relu());
    net.layers.push_back(Layer::layer_norm(big));
    net.layers.push_back(init_affine(big, big, 2));
    net.layers.push_back(Layer::leaky_relu());
    net.layers.push_back(init_affine(big, big, 3));
    net.layers.push_back(Layer::leaky_relu());
    net.layers.push_back(init_affine(d, big, 4));
    net.validate();
    return net;
}

void ScoreNet::validate() const {
    require(data_dim >= 1, "ScoreNet: need data_dim >= 1");
    int width = input_dim();
    for (size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        switch (l.kind) {
            case Layer::Kind::Affine:
                require(l.w.cols() == width, "ScoreNet: affine layer " + std::to_string(i) +
                                                 " input width mismatch");
                width = static_cast<int>(l.w.rows());
                break;
            case Layer::Kind::LayerNorm:
                require(l.gamma.size() == width && l.beta.size() == width,
                        "ScoreNet: layernorm width mismatch at layer " + std::to_string(i));
                break;
            default:
                break;
        }
    }
    require(width == output_dim(), "ScoreNet: output width must equal data_dim");
}

std::vector<int> ScoreNet::widths() const {
    std::vector<int> out;
    for (const Layer& l : layers)
        if (l.kind == Layer::Kind::Affine) out.push_back(static_cast<int>(l.w.rows()));
    return out;
}

ParamGrads ParamGrads::zeros_like(const ScoreNet& net) {
    ParamGrads g;
    size_t n = net.layers.size();
    g.w.resize(n);
    g.b.resize(n);
    g.gamma.resize(n);
    g.beta.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const Layer& l = net.layers[i];
        if (l.kind == Layer::Kind::Affine) {
            g.w[i] = MatrixXd::Zero(l.w.rows(), l.w.cols());
            g.b[i] = VectorXd::Zero(l.b.size());
        } else if (l.kind == Layer::Kind::LayerNorm) {
            g.gamma[i] = VectorXd::Zero(l.gamma.size());
            g.beta[i] = VectorXd::Zero(l.beta.size());
        }
    }
    return g;
}

int param_count(const ScoreNet& net) {
    int n = 0;
    for (const Layer& l : net.layers) {
        if (l.kind == Layer::Kind::Affine) n += static_cast<int>(l.w.size() + l.b.size());
        if (l.kind == Layer::Kind::LayerNorm)
            n += static_cast<int>(l.gamma.size() + l.beta.size());
    }
    return n;
}

VectorXd flatten_params(const ScoreNet& net) {
    VectorXd flat(param_count(net));
    int at = 0;
    for (const Layer& l : net.layers) {
        if (l.kind == Layer::Kind::Affine) {
            for (Eigen::Index i = 0; i < l.w.rows(); ++i)
                for (Eigen::Index j = 0; j < l.w.cols(); ++j) flat[at++] = l.w(i, j);
            for (Eigen::Index i = 0; i < l.b.size(); ++i) flat[at++] = l.b[i];
        } else if (l.kind == Layer::Kind::LayerNorm) {
            for (Eigen::Index i = 0; i < l.gamma.size(); ++i) flat[at++] = l.gamma[i];
            for (Eigen::Index i = 0; i < l.beta.size(); ++i) flat[at++] = l.beta[i];
        }
    }
    return flat;
}

void set_params(ScoreNet& net, const VectorXd& flat) {
    require(flat.size() == param_count(net), "set_params: size mismatch");
    int at = 0;
    for (Layer& l : net.layers) {
        if (l.kind == Layer::Kind::Affine) {
            for (Eigen::Index i = 0; i < l.w.rows(); ++i)
                for (Eigen::Index j = 0; j < l.w.cols(); ++j) l.w(i, j) = flat[at++];
            for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = flat[at++];
        } else if (l.kind == Layer::Kind::LayerNorm) {
            for (Eigen::Index i = 0; i < l.gamma.size(); ++i) l.gamma[i] = flat[at++];
            for (Eigen::Index i = 0; i < l.beta.size(); ++i) l.beta[i] = flat[at++];
        }
    }
}

VectorXd flatten_grads(const ScoreNet& net, const ParamGrads& grads) {
    VectorXd flat(param_count(net));
    int at = 0;
    for (size_t li = 0; li < net.layers.size(); ++li) {
        const Layer& l = net.layers[li];
        if (l.kind == Layer::Kind::Affine) {
            for (Eigen::Index i = 0; i < l.w.rows(); ++i)
                for (Eigen::Index j = 0; j < l.w.cols(); ++j) flat[at++] = grads.w[li](i, j);
            for (Eigen::Index i = 0; i < l.b.size(); ++i) flat[at++] = grads.b[li][i];
        } else if (l.kind == Layer::Kind::LayerNorm) {
            for (Eigen::Index i = 0; i < l.gamma.size(); ++i) flat[at++] = grads.gamma[li][i];
            for (Eigen::Index i = 0; i < l.beta.size(); ++i) flat[at++] = grads.beta[li][i];
        }
    }
    return flat;
}

MatrixXd forward_full(const ScoreNet& net, const MatrixXd& input, RunMode mode,
                      std::uint64_t dropout_seed, Tape* tape) {
    require(input.cols() == net.input_dim(), "forward: input width must be d+1");
    if (!input.allFinite()) throw NumericError("forward: non-finite input");
    MatrixXd cur = input;
    if (tape) {
        tape->input.assign(net.layers.size(), MatrixXd());
        tape->lrelu_m.assign(net.layers.size(), MatrixXd());
        tape->ln_xhat.assign(net.layers.size(), MatrixXd());
        tape->ln_s.assign(net.layers.size(), VectorXd());
        tape->drop_mask.assign(net.layers.size(), MatrixXd());
    }
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& l = net.layers[i];
        if (tape) tape->input[i] = cur;
        switch (l.kind) {
            case Layer::Kind::Affine: {
                MatrixXd out(cur.rows(), l.w.rows());
                out.noalias() = cur * l.w.transpose();
                out.rowwise() += l.b.transpose();
                cur = std::move(out);
                break;
            }
            case Layer::Kind::LeakyRelu: {
                double slope = l.slope;
                MatrixXd m = cur.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
                cur = cur.cwiseProduct(m);
                if (tape) tape->lrelu_m[i] = std::move(m);
                break;
            }
            case Layer::Kind::LayerNorm: {
                MatrixXd c = center_rows(cur);
                VectorXd s =
                    (c.array().square().rowwise().mean() + kLayerNormEps).sqrt().matrix();
                MatrixXd xhat = div_rows(c, s);
                cur = mul_cols(xhat, l.gamma);
                cur.rowwise() += l.beta.transpose();
                if (tape) {
                    tape->ln_xhat[i] = std::move(xhat);
                    tape->ln_s[i] = std::move(s);
                }
                break;
            }
            case Layer::Kind::Dropout: {
                if (mode == RunMode::Train && l.p > 0.0) {
                    Rng rng = make_rng(mix_seed(dropout_seed, 0xD0 + i));
                    std::bernoulli_distribution keep(1.0 - l.p);
                    MatrixXd mask(cur.rows(), cur.cols());
                    double inv = 1.0 / (1.0 - l.p);
                    for (Eigen::Index r = 0; r < mask.rows(); ++r)
                        for (Eigen::Index c2 = 0; c2 < mask.cols(); ++c2)
                            mask(r, c2) = keep(rng) ? inv : 0.0;
                    cur = cur.cwiseProduct(mask);
                    if (tape) tape->drop_mask[i] = std::move(mask);
                }
                break;
            }
        }
        check_finite(cur, i);
    }
    require(cur.cols() == net.output_dim(), "forward: network output width mismatch");
    if (tape) tape->output = cur;
    return cur;
}

namespace {
MatrixXd assemble_input(const ScoreNet& net, const MatrixXd& x, const VectorXd& t) {
    require(x.cols() == net.data_dim, "forward: x must have d columns");
    require(t.size() == x.rows(), "forward: t must have one entry per row");
    for (Eigen::Index i = 0; i < t.size(); ++i)
        require(t[i] >= 0.0 && t[i] <= net.t_max, "forward: t out of [0, T]");
    MatrixXd full(x.rows(), x.cols() + 1);
    full.leftCols(x.cols()) = x;
    full.col(x.cols()) = t / static_cast<double>(net.t_max);
    return full;
}
}  // namespace

MatrixXd forward(const ScoreNet& net, const MatrixXd& x, const VectorXd& t, RunMode mode,
                 std::uint64_t dropout_seed) {
    return forward_full(net, assemble_input(net, x, t), mode, dropout_seed, nullptr);
}

MatrixXd backward_input(const ScoreNet& net, const Tape& tape, const MatrixXd& out_adj) {
    MatrixXd adj = out_adj;
    for (size_t ri = net.layers.size(); ri-- > 0;) {
        const Layer& l = net.layers[ri];
        switch (l.kind) {
            case Layer::Kind::Affine:
                adj = (adj * l.w).eval();
                break;
            case Layer::Kind::LeakyRelu:
                adj = adj.cwiseProduct(tape.lrelu_m[ri]);
                break;
            case Layer::Kind::LayerNorm: {
                const MatrixXd& xhat = tape.ln_xhat[ri];
                const VectorXd& s = tape.ln_s[ri];
                MatrixXd g = mul_cols(adj, l.gamma);
                VectorXd mg = g.rowwise().mean();
                VectorXd mgx = g.cwiseProduct(xhat).rowwise().mean();
                MatrixXd base = (g.colwise() - mg) - mul_rows(xhat, mgx);
                adj = div_rows(base, s);
                break;
            }
            case Layer::Kind::Dropout:
                if (tape.drop_mask[ri].size() > 0) adj = adj.cwiseProduct(tape.drop_mask[ri]);
                break;
        }
    }
    return adj;
}

ParamGrads backward_params(const ScoreNet& net, const Tape& tape, const MatrixXd& out_adj) {
    ParamGrads grads = ParamGrads::zeros_like(net);
    MatrixXd adj = out_adj;
    for (size_t ri = net.layers.size(); ri-- > 0;) {
        const Layer& l = net.layers[ri];
        switch (l.kind) {
            case Layer::Kind::Affine: {
                grads.w[ri].noalias() = adj.transpose() * tape.input[ri];
                grads.b[ri] = adj.colwise().sum().transpose();
                adj = (adj * l.w).eval();
                break;
            }
            case Layer::Kind::LeakyRelu:
                adj = adj.cwiseProduct(tape.lrelu_m[ri]);
                break;
            case Layer::Kind::LayerNorm: {
                const MatrixXd& xhat = tape.ln_xhat[ri];
                const VectorXd& s = tape.ln_s[ri];
                grads.gamma[ri] = adj.cwiseProduct(xhat).colwise().sum().transpose();
                grads.beta[ri] = adj.colwise().sum().transpose();
                MatrixXd g = mul_cols(adj, l.gamma);
                VectorXd mg = g.rowwise().mean();
                VectorXd mgx = g.cwiseProduct(xhat).rowwise().mean();
                MatrixXd base = (g.colwise() - mg) - mul_rows(xhat, mgx);
                adj = div_rows(base, s);
                break;
            }
            case Layer::Kind::Dropout:
                if (tape.drop_mask[ri].size() > 0) adj = adj.cwiseProduct(tape.drop_mask[ri]);
                break;
        }
    }
    return grads;
}

WeightGradResult grad_weights(const ScoreNet& net, const MatrixXd& x, const VectorXd& t,
                              RunMode mode, std::uint64_t dropout_seed, const LossFn& loss) {
    Tape tape;
    MatrixXd out = forward_full(net, assemble_input(net, x, t), mode, dropout_seed, &tape);
    LossEval le = loss(out);
    require(le.grad_out.rows() == out.rows() && le.grad_out.cols() == out.cols(),
            "grad_weights: loss gradient shape mismatch");
    if (!std::isfinite(le.value)) throw NumericError("grad_weights: non-finite loss");
    WeightGradResult res;
    res.loss = le.value;
    res.grads = backward_params(net, tape, le.grad_out);
    return res;
}

std::vector<MatrixXd> input_jacobian(const ScoreNet& net, const MatrixXd& x, const VectorXd& t,
                                     const std::vector<int>& rows) {
    for (int r : rows)
        require(r >= 0 && r < net.output_dim(), "input_jacobian: row index out of range");
    Tape tape;
    forward_full(net, assemble_input(net, x, t), RunMode::Eval, 0, &tape);
    std::vector<MatrixXd> out;
    out.reserve(rows.size());
    for (int r : rows) {
        MatrixXd seed = MatrixXd::Zero(x.rows(), net.output_dim());
        seed.col(r).setOnes();
        MatrixXd adj = backward_input(net, tape, seed);
        out.push_back(adj.leftCols(net.data_dim));
    }
    return out;
}

void forward_dual(const ScoreNet& net, const MatrixXd& input, const MatrixXd& input_tan,
                  Tape& tape, TangentTape& ttape) {
    require(input_tan.rows() == input.rows() && input_tan.cols() == input.cols(),
            "forward_dual: tangent shape mismatch");
    size_t n = net.layers.size();
    tape.input.assign(n, MatrixXd());
    tape.lrelu_m.assign(n, MatrixXd());
    tape.ln_xhat.assign(n, MatrixXd());
    tape.ln_s.assign(n, VectorXd());
    tape.drop_mask.assign(n, MatrixXd());
    ttape.input.assign(n, MatrixXd());
    ttape.ln_xhat.assign(n, MatrixXd());
    ttape.ln_s.assign(n, VectorXd());

    MatrixXd v = input, tn = input_tan;
    for (size_t i = 0; i < n; ++i) {
        const Layer& l = net.layers[i];
        tape.input[i] = v;
        ttape.input[i] = tn;
        switch (l.kind) {
            case Layer::Kind::Affine: {
                MatrixXd nv(v.rows(), l.w.rows()), nt(v.rows(), l.w.rows());
                nv.noalias() = v * l.w.transpose();
                nv.rowwise() += l.b.transpose();
                nt.noalias() = tn * l.w.transpose();
                v = std::move(nv);
                tn = std::move(nt);
                break;
            }
            case Layer::Kind::LeakyRelu: {
                double slope = l.slope;
                MatrixXd m = v.unaryExpr([slope](double u) { return u > 0.0 ? 1.0 : slope; });
                v = v.cwiseProduct(m);
                tn = tn.cwiseProduct(m);
                tape.lrelu_m[i] = std::move(m);
                break;
            }
            case Layer::Kind::LayerNorm: {
                MatrixXd c = center_rows(v);
                VectorXd s =
                    (c.array().square().rowwise().mean() + kLayerNormEps).sqrt().matrix();
                MatrixXd xhat = div_rows(c, s);
                MatrixXd ct = center_rows(tn);
                VectorXd st = c.cwiseProduct(ct).rowwise().mean().cwiseQuotient(s);
                MatrixXd xhat_t = div_rows(ct, s) - mul_rows(xhat, st.cwiseQuotient(s));
                v = mul_cols(xhat, l.gamma);
                v.rowwise() += l.beta.transpose();
                tn = mul_cols(xhat_t, l.gamma);
                tape.ln_xhat[i] = std::move(xhat);
                tape.ln_s[i] = s;
                ttape.ln_xhat[i] = std::move(xhat_t);
                ttape.ln_s[i] = std::move(st);
                break;
            }
            case Layer::Kind::Dropout:
                break;  // eval mode: identity
        }
        check_finite(v, i);
    }
    tape.output = v;
    ttape.output = tn;
}

Jet2 forward_jet2(const ScoreNet& net, const MatrixXd& input, const MatrixXd& tan,
                  const MatrixXd& tan2) {
    MatrixXd v = input, t1 = tan, t2 = tan2;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& l = net.layers[i];
        switch (l.kind) {
            case Layer::Kind::Affine: {
                MatrixXd nv = (v * l.w.transpose()).rowwise() + l.b.transpose();
                t1 = (t1 * l.w.transpose()).eval();
                t2 = (t2 * l.w.transpose()).eval();
                v = std::move(nv);
                break;
            }
            case Layer::Kind::LeakyRelu: {
                double slope = l.slope;
                MatrixXd m = v.unaryExpr([slope](double u) { return u > 0.0 ? 1.0 : slope; });
                v = v.cwiseProduct(m);
                t1 = t1.cwiseProduct(m);
                t2 = t2.cwiseProduct(m);
                break;
            }
            case Layer::Kind::LayerNorm: {
                MatrixXd c = center_rows(v);
                VectorXd s =
                    (c.array().square().rowwise().mean() + kLayerNormEps).sqrt().matrix();
                MatrixXd xhat = div_rows(c, s);
                MatrixXd ct = center_rows(t1);
                MatrixXd cs = center_rows(t2);
                VectorXd st = c.cwiseProduct(ct).rowwise().mean().cwiseQuotient(s);
                VectorXd m2 = ct.cwiseProduct(ct).rowwise().mean() +
                              c.cwiseProduct(cs).rowwise().mean();
                VectorXd ss = (m2 - st.cwiseProduct(st)).cwiseQuotient(s);
                MatrixXd xhat_t = div_rows(ct, s) - mul_rows(xhat, st.cwiseQuotient(s));
                VectorXd st_over_s2 = st.cwiseQuotient(s.cwiseProduct(s));
                MatrixXd xhat_s = div_rows(cs, s) - 2.0 * mul_rows(ct, st_over_s2) -
                                  mul_rows(xhat, ss.cwiseQuotient(s)) +
                                  2.0 * mul_rows(xhat, st_over_s2.cwiseProduct(st));
                v = mul_cols(xhat, l.gamma);
                v.rowwise() += l.beta.transpose();
                t1 = mul_cols(xhat_t, l.gamma);
                t2 = mul_cols(xhat_s, l.gamma);
                break;
            }
            case Layer::Kind::Dropout:
                break;  // eval mode
        }
        check_finite(v, i);
    }
    return {std::move(v), std::move(t1), std::move(t2)};
}

DualAdjoint backward_input_dual(const ScoreNet& net, const Tape& tape, const TangentTape& ttape,
                                const MatrixXd& out_adj, const MatrixXd& out_adj_tan) {
    MatrixXd adj = out_adj, adjt = out_adj_tan;
    for (size_t ri = net.layers.size(); ri-- > 0;) {
        const Layer& l = net.layers[ri];
        switch (l.kind) {
            case Layer::Kind::Affine:
                adj = (adj * l.w).eval();
                adjt = (adjt * l.w).eval();
                break;
            case Layer::Kind::LeakyRelu:
                adj = adj.cwiseProduct(tape.lrelu_m[ri]);
                adjt = adjt.cwiseProduct(tape.lrelu_m[ri]);
                break;
            case Layer::Kind::LayerNorm: {
                const MatrixXd& xhat = tape.ln_xhat[ri];
                const VectorXd& s = tape.ln_s[ri];
                const MatrixXd& xhat_t = ttape.ln_xhat[ri];
                const VectorXd& st = ttape.ln_s[ri];
                MatrixXd g = mul_cols(adj, l.gamma);
                MatrixXd gt = mul_cols(adjt, l.gamma);
                VectorXd mg = g.rowwise().mean();
                VectorXd mgx = g.cwiseProduct(xhat).rowwise().mean();
                MatrixXd base = (g.colwise() - mg) - mul_rows(xhat, mgx);
                VectorXd mgt = gt.rowwise().mean();
                VectorXd mgtx = gt.cwiseProduct(xhat).rowwise().mean() +
                                g.cwiseProduct(xhat_t).rowwise().mean();
                MatrixXd term = (gt.colwise() - mgt) - mul_rows(xhat_t, mgx) -
                                mul_rows(xhat, mgtx);
                adj = div_rows(base, s);
                adjt = div_rows(term - mul_rows(adj, st), s);
                break;
            }
            case Layer::Kind::Dropout:
                break;  // eval mode
        }
    }
    return {std::move(adj), std::move(adjt)};
}

namespace {
constexpr char kNetMagic[] = "DIFFANNET01";

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
void write_vec(std::ostream& os, const VectorXd& v) {
    write_u64(os, static_cast<std::uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}
VectorXd read_vec(std::istream& is) {
    std::uint64_t n = read_u64(is);
    VectorXd v(static_cast<Eigen::Index>(n));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    return v;
}
void write_mat(std::ostream& os, const MatrixXd& m) {
    write_u64(os, static_cast<std::uint64_t>(m.rows()));
    write_u64(os, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        os.write(reinterpret_cast<const char*>(m.row(i).eval().data()),
                 static_cast<std::streamsize>(m.cols() * sizeof(double)));
}
MatrixXd read_mat(std::istream& is) {
    std::uint64_t r = read_u64(is), c = read_u64(is);
    MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    std::vector<double> row(c);
    for (std::uint64_t i = 0; i < r; ++i) {
        is.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(c * sizeof(double)));
        for (std::uint64_t j = 0; j < c; ++j) m(static_cast<Eigen::Index>(i),
                                                static_cast<Eigen::Index>(j)) = row[j];
    }
    return m;
}
}  // namespace

void save_net(const ScoreNet& net, std::ostream& os) {
    os.write(kNetMagic, sizeof(kNetMagic) - 1);
    write_u64(os, static_cast<std::uint64_t>(net.data_dim));
    write_u64(os, static_cast<std::uint64_t>(net.t_max));
    write_u64(os, net.layers.size());
    for (const Layer& l : net.layers) {
        write_u64(os, static_cast<std::uint64_t>(l.kind));
        switch (l.kind) {
            case Layer::Kind::Affine:
                write_mat(os, l.w);
                write_vec(os, l.b);
                break;
            case Layer::Kind::LeakyRelu:
                os.write(reinterpret_cast<const char*>(&l.slope), sizeof(double));
                break;
            case Layer::Kind::LayerNorm:
                write_vec(os, l.gamma);
                write_vec(os, l.beta);
                break;
            case Layer::Kind::Dropout:
                os.write(reinterpret_cast<const char*>(&l.p), sizeof(double));
                break;
        }
    }
}

ScoreNet load_net(std::istream& is) {
    char magic[sizeof(kNetMagic) - 1];
    is.read(magic, sizeof(magic));
    require(is.good() && std::string(magic, sizeof(magic)) == kNetMagic,
            "load_net: bad magic string");
    ScoreNet net;
    net.data_dim = static_cast<int>(read_u64(is));
    net.t_max = static_cast<int>(read_u64(is));
    std::uint64_t nlayers = read_u64(is);
    for (std::uint64_t i = 0; i < nlayers; ++i) {
        auto kind = static_cast<Layer::Kind>(read_u64(is));
        Layer l;
        l.kind = kind;
        switch (kind) {
            case Layer::Kind::Affine:
                l.w = read_mat(is);
                l.b = read_vec(is);
                break;
            case Layer::Kind::LeakyRelu:
                is.read(reinterpret_cast<char*>(&l.slope), sizeof(double));
                break;
            case Layer::Kind::LayerNorm:
                l.gamma = read_vec(is);
                l.beta = read_vec(is);
                break;
            case Layer::Kind::Dropout:
                is.read(reinterpret_cast<char*>(&l.p), sizeof(double));
                break;
        }
        net.layers.push_back(std::move(l));
    }
    require(is.good(), "load_net: truncated stream");
    net.validate();
    return net;
}

}  // namespace diffan
