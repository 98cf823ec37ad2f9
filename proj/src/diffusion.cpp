#include "diffan/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace diffan {

NoiseSchedule NoiseSchedule::linear(int t_max, double beta_min, double beta_max) {
    require(t_max >= 1, "NoiseSchedule: need T >= 1");
    require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0,
            "NoiseSchedule: need 0 < beta_min <= beta_max < 1");
    NoiseSchedule s;
    s.t_max = t_max;
    s.beta.resize(t_max + 1);
    s.alpha_bar.resize(t_max + 1);
    double acc = 1.0;
    for (int t = 0; t <= t_max; ++t) {
        s.beta[t] = beta_min + (beta_max - beta_min) * t / t_max;
        acc *= 1.0 - s.beta[t];
        s.alpha_bar[t] = acc;
    }
    s.validate();
    return s;
}

void NoiseSchedule::validate() const {
    require(beta.size() == t_max + 1 && alpha_bar.size() == t_max + 1,
            "NoiseSchedule: tables must have T+1 entries");
    for (int t = 0; t <= t_max; ++t) {
        require(alpha_bar[t] > 0.0 && alpha_bar[t] <= 1.0,
                "NoiseSchedule: alpha_bar out of (0, 1]");
        if (t > 0)
            require(alpha_bar[t] < alpha_bar[t - 1],
                    "NoiseSchedule: alpha_bar must be strictly decreasing");
    }
}

MatrixXd noisify(const MatrixXd& x0, const VectorXi& t, const MatrixXd& eps,
                 const NoiseSchedule& sched) {
    require(t.size() == x0.rows(), "noisify: t must have one entry per row");
    require(eps.rows() == x0.rows() && eps.cols() == x0.cols(),
            "noisify: eps shape mismatch");
    MatrixXd xt(x0.rows(), x0.cols());
    for (Eigen::Index r = 0; r < x0.rows(); ++r) {
        int ti = t[r];
        require(ti >= 0 && ti <= sched.t_max, "noisify: t out of [0, T]");
        double ab = sched.alpha_bar[ti];
        xt.row(r) = std::sqrt(ab) * x0.row(r) + std::sqrt(1.0 - ab) * eps.row(r);
    }
    return xt;
}

Standardizer Standardizer::fit(const MatrixXd& x) {
    require(x.rows() >= 1, "Standardizer: empty data");
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    MatrixXd c = x.rowwise() - s.mean.transpose();
    s.scale = c.array().square().colwise().mean().sqrt().matrix().transpose();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
        if (s.scale[j] < 1e-12) s.scale[j] = 1.0;  // constant column guard
    return s;
}

MatrixXd Standardizer::apply(const MatrixXd& x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() /
           scale.transpose().array();
}

MatrixXd Standardizer::invert(const MatrixXd& x) const {
    return (x.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
           mean.transpose();
}

void TrainConfig::validate() const {
    require(epochs_max >= 1, "TrainConfig: need epochs_max >= 1");
    require(batch_size >= 1, "TrainConfig: need batch_size >= 1");
    require(learning_rate > 0.0, "TrainConfig: need learning_rate > 0");
    require(early_stop_patience >= 1, "TrainConfig: need early_stop_patience >= 1");
    require(val_fraction > 0.0 && val_fraction <= 0.5,
            "TrainConfig: need val_fraction in (0, 0.5]");
}

namespace {

// Adam with bias correction; state is flat over all parameters.
struct Adam {
    VectorXd m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int step_count = 0;

    explicit Adam(int n) : m(VectorXd::Zero(n)), v(VectorXd::Zero(n)) {}

    void step(VectorXd& params, const VectorXd& grad, double lr) {
        ++step_count;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        double c1 = 1.0 - std::pow(beta1, step_count);
        double c2 = 1.0 - std::pow(beta2, step_count);
        params.array() -=
            lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
};

double batch_loss_and_grad(const MatrixXd& out, const MatrixXd& eps, MatrixXd& grad_out) {
    // Mean over rows of the squared norm (summed over coordinates).
    double k = static_cast<double>(out.rows());
    MatrixXd diff = out - eps;
    grad_out = (2.0 / k) * diff;
    return diff.squaredNorm() / k;
}

}  // namespace

TrainResult train(ScoreNet net, const Dataset& data, const NoiseSchedule& sched,
                  const TrainConfig& cfg) {
    cfg.validate();
    net.validate();
    require(net.data_dim == data.d(), "train: net dimension must match data");
    require(net.t_max == sched.t_max, "train: net and schedule disagree on T");
    int n = data.n();
    require(n >= 4, "train: need at least 4 samples");

    Standardizer std_ = Standardizer::fit(data.x);
    MatrixXd x = std_.apply(data.x);

    Rng rng = make_rng(mix_seed(cfg.seed, 0x7124));
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    int n_val = std::max(1, static_cast<int>(std::lround(cfg.val_fraction * n)));
    int n_train = n - n_val;
    require(n_train >= 1, "train: no training rows left after validation split");
    std::vector<int> val_idx(perm.begin(), perm.begin() + n_val);
    std::vector<int> train_idx(perm.begin() + n_val, perm.end());
    int batch = std::min(cfg.batch_size, n_train);

    // Fixed validation corruption: early stopping compares like with like.
    MatrixXd x_val(n_val, data.d());
    for (int i = 0; i < n_val; ++i) x_val.row(i) = x.row(val_idx[i]);
    VectorXi t_val(n_val);
    MatrixXd eps_val(n_val, data.d());
    {
        Rng vrng = make_rng(mix_seed(cfg.seed, 0x7A1));
        std::uniform_int_distribution<int> tdraw(0, sched.t_max);
        std::normal_distribution<double> ndraw(0.0, 1.0);
        for (int i = 0; i < n_val; ++i) {
            t_val[i] = tdraw(vrng);
            for (int j = 0; j < data.d(); ++j) eps_val(i, j) = ndraw(vrng);
        }
    }
    MatrixXd xt_val = noisify(x_val, t_val, eps_val, sched);
    VectorXd t_val_d = t_val.cast<double>();

    VectorXd params = flatten_params(net);
    Adam adam(static_cast<int>(params.size()));

    TrainResult res;
    res.standardizer = std_;
    VectorXd best_params = params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int stall = 0;
    std::uniform_int_distribution<int> tdraw(0, sched.t_max);
    std::normal_distribution<double> ndraw(0.0, 1.0);
    std::uint64_t step_id = 0;

    auto fail_diverged = [&](const std::string& why) {
        auto last = std::make_shared<TrainResult>();
        set_params(net, best_epoch >= 0 ? best_params : params);
        last->net = net;
        last->standardizer = std_;
        last->train_loss = res.train_loss;
        last->val_loss = res.val_loss;
        last->best_epoch = best_epoch;
        last->best_val_loss = best_val;
        last->epochs_run = static_cast<int>(res.train_loss.size());
        throw TrainDivergenceError("train: " + why, std::move(last));
    };

    for (int epoch = 0; epoch < cfg.epochs_max; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (int at = 0; at + batch <= n_train; at += batch) {
            MatrixXd x0(batch, data.d());
            for (int i = 0; i < batch; ++i) x0.row(i) = x.row(train_idx[at + i]);
            VectorXi t(batch);
            MatrixXd eps(batch, data.d());
            for (int i = 0; i < batch; ++i) {
                t[i] = tdraw(rng);
                for (int j = 0; j < data.d(); ++j) eps(i, j) = ndraw(rng);
            }
            MatrixXd xt = noisify(x0, t, eps, sched);
            VectorXd td = t.cast<double>();
            double loss = 0.0;
            WeightGradResult wg;
            try {
                wg = grad_weights(net, xt, td, RunMode::Train,
                                  mix_seed(cfg.seed, 0xD40000 + step_id),
                                  [&](const MatrixXd& out) {
                                      LossEval le;
                                      le.value = batch_loss_and_grad(out, eps, le.grad_out);
                                      return le;
                                  });
            } catch (const NumericError& e) {
                fail_diverged(std::string("diverged (") + e.what() + ")");
            }
            loss = wg.loss;
            if (!std::isfinite(loss)) fail_diverged("loss is not finite");
            VectorXd grad = flatten_grads(net, wg.grads);
            adam.step(params, grad, cfg.learning_rate);
            set_params(net, params);
            epoch_loss += loss;
            ++n_batches;
            ++step_id;
        }
        res.train_loss.push_back(n_batches ? epoch_loss / n_batches : 0.0);

        MatrixXd val_out = forward(net, xt_val, t_val_d, RunMode::Eval);
        double val_loss = (val_out - eps_val).squaredNorm() / n_val;
        if (!std::isfinite(val_loss)) fail_diverged("validation loss is not finite");
        res.val_loss.push_back(val_loss);

        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = params;
            stall = 0;
        } else if (++stall >= cfg.early_stop_patience) {
            break;
        }
    }

    set_params(net, best_params);
    res.net = std::move(net);
    res.best_epoch = best_epoch;
    res.best_val_loss = best_val;
    res.epochs_run = static_cast<int>(res.train_loss.size());
    return res;
}

double gaussian_denoise_floor(const NoiseSchedule& sched, int t) {
    require(t >= 0 && t <= sched.t_max, "gaussian_denoise_floor: t out of range");
    // For x0 ~ N(0,1): x_t ~ N(0,1); E[eps | x_t] = sqrt(1-abar) x_t, so the
    // optimal residual per coordinate is abar_t.
    return sched.alpha_bar[t];
}

double gaussian_denoise_floor_avg(const NoiseSchedule& sched) {
    double acc = 0.0;
    for (int t = 0; t <= sched.t_max; ++t) acc += gaussian_denoise_floor(sched, t);
    return acc / (sched.t_max + 1);
}

namespace {
constexpr char kCkptMagic[] = "DIFFANCKPT01";

void write_vector(std::ostream& os, const VectorXd& v) {
    std::uint64_t n = static_cast<std::uint64_t>(v.size());
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

VectorXd read_vector(std::istream& is) {
    std::uint64_t n = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    VectorXd v(static_cast<Eigen::Index>(n));
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    return v;
}
}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), "save_checkpoint: cannot open " + path);
    os.write(kCkptMagic, sizeof(kCkptMagic) - 1);
    std::uint64_t t_max = static_cast<std::uint64_t>(ck.sched.t_max);
    os.write(reinterpret_cast<const char*>(&t_max), sizeof(t_max));
    write_vector(os, ck.sched.beta);
    write_vector(os, ck.sched.alpha_bar);
    write_vector(os, ck.standardizer.mean);
    write_vector(os, ck.standardizer.scale);
    save_net(ck.net, os);
    require(os.good(), "save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "load_checkpoint: cannot open " + path);
    char magic[sizeof(kCkptMagic) - 1];
    is.read(magic, sizeof(magic));
    require(is.good() && std::string(magic, sizeof(magic)) == kCkptMagic,
            "load_checkpoint: bad magic string in " + path);
    Checkpoint ck;
    std::uint64_t t_max = 0;
    is.read(reinterpret_cast<char*>(&t_max), sizeof(t_max));
    ck.sched.t_max = static_cast<int>(t_max);
    ck.sched.beta = read_vector(is);
    ck.sched.alpha_bar = read_vector(is);
    ck.standardizer.mean = read_vector(is);
    ck.standardizer.scale = read_vector(is);
    ck.net = load_net(is);
    ck.sched.validate();
    return ck;
}

}  // namespace diffan
