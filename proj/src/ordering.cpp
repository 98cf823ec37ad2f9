#include "diffan/ordering.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace diffan {

std::string to_string(OrderVariant v) {
    switch (v) {
        case OrderVariant::Residue: return "residue";
        case OrderVariant::Masking: return "masking";
        case OrderVariant::Greedy: return "greedy";
    }
    return "residue";
}

OrderVariant order_variant_from_string(const std::string& s) {
    if (s == "residue") return OrderVariant::Residue;
    if (s == "masking") return OrderVariant::Masking;
    if (s == "greedy") return OrderVariant::Greedy;
    throw ValidationError("unknown ordering variant: " + s);
}

void OrderConfig::validate() const {
    require(k >= 2, "OrderConfig: need k >= 2");
    require(n_votes >= 1, "OrderConfig: need n_votes >= 1");
    require(eps_div > 0.0, "OrderConfig: need eps_div > 0");
}

int find_leaf(const ScoreField& field, const MatrixXd& b, double t, VectorXd* variances) {
    const auto& active = field.active();
    require(!active.empty(), "find_leaf: no active nodes");
    ScoreField::Eval he = field.hessian_diag(b, t);
    int n_valid = he.valid_rows();
    if (n_valid == 0) throw NumericError("find_leaf: all batch rows excluded");

    if (variances) {
        variances->resize(field.dim());
        variances->setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    int best = -1;
    double best_var = std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < active.size(); ++a) {
        double mean = 0.0;
        for (Eigen::Index r = 0; r < b.rows(); ++r)
            if (he.row_ok[r]) mean += he.values(r, a);
        mean /= n_valid;
        double var = 0.0;
        for (Eigen::Index r = 0; r < b.rows(); ++r)
            if (he.row_ok[r]) {
                double dv = he.values(r, a) - mean;
                var += dv * dv;
            }
        var = n_valid > 1 ? var / (n_valid - 1) : 0.0;
        if (variances) (*variances)[active[a]] = var;
        if (var < best_var) {  // strict: ties keep the smallest node index
            best_var = var;
            best = active[a];
        }
    }
    return best;
}

namespace {

MatrixXd sample_batch(const MatrixXd& x, int k, Rng& rng) {
    int n = static_cast<int>(x.rows());
    int kk = std::min(k, n);
    auto idx = sample_without_replacement(n, kk, rng);
    MatrixXd b(kk, x.cols());
    for (int i = 0; i < kk; ++i) b.row(i) = x.row(idx[i]);
    return b;
}

// Majority vote; ties resolved by lowest summed variance, then lowest index.
int pick_modal_leaf(const std::vector<VoteDiag>& votes) {
    std::map<int, int> counts;
    for (const auto& v : votes) ++counts[v.leaf];
    int best_count = 0;
    for (const auto& [leaf, c] : counts) best_count = std::max(best_count, c);
    std::vector<int> tied;
    for (const auto& [leaf, c] : counts)
        if (c == best_count) tied.push_back(leaf);
    if (tied.size() == 1) return tied[0];
    int best = -1;
    double best_sum = std::numeric_limits<double>::infinity();
    for (int cand : tied) {  // ascending, so strict < keeps the lowest index
        double sum = 0.0;
        for (const auto& v : votes) {
            double val = v.variance[cand];
            if (std::isfinite(val)) sum += val;
        }
        if (sum < best_sum) {
            best_sum = sum;
            best = cand;
        }
    }
    return best;
}

std::vector<double> vote_grid(int t_max, int n_votes) {
    std::vector<double> ts(n_votes);
    for (int i = 0; i < n_votes; ++i)
        ts[i] = static_cast<double>(t_max) * i / n_votes;  // even over [0, T)
    return ts;
}

}  // namespace

OrderResult order_with_backend(std::shared_ptr<const ScoreBackend> backend, const MatrixXd& x,
                               const OrderConfig& cfg) {
    cfg.validate();
    require(backend != nullptr, "order: null backend");
    require(cfg.variant != OrderVariant::Greedy,
            "order_with_backend: greedy variant needs order_greedy");
    int d = backend->dim();
    require(x.cols() == d, "order: data width must match backend dimension");
    require(x.rows() >= 1, "order: empty data");

    ScoreField::Options fopt;
    fopt.use_residue = cfg.variant == OrderVariant::Residue;
    fopt.apply_mask = cfg.apply_mask;
    fopt.eps_div = cfg.eps_div;
    ScoreField field(backend, fopt);

    Rng rng = make_rng(mix_seed(cfg.seed, 0x08DE));
    std::vector<double> ts = vote_grid(backend->t_max(), cfg.n_votes);

    OrderResult res;
    auto start_all = std::chrono::steady_clock::now();
    for (int iter = 0; iter < d; ++iter) {
        auto start = std::chrono::steady_clock::now();
        IterationDiag diag;
        diag.iteration = iter;
        MatrixXd b = sample_batch(x, cfg.k, rng);
        std::vector<VoteDiag> votes(ts.size());
        if (cfg.resample_per_vote) {
            for (size_t vi = 0; vi < ts.size(); ++vi) {
                VoteDiag& v = votes[vi];
                v.t = ts[vi];
                MatrixXd bv = sample_batch(x, cfg.k, rng);
                v.leaf = find_leaf(field, bv, v.t, &v.variance);
            }
        } else {
            // Votes share the iteration batch and a frozen field: parallel-safe.
            parallel_for(static_cast<int>(ts.size()), [&](int vi) {
                VoteDiag& v = votes[vi];
                v.t = ts[vi];
                v.leaf = find_leaf(field, b, v.t, &v.variance);
            });
        }
        int leaf = pick_modal_leaf(votes);
        field.remove_leaf(leaf);
        diag.leaf = leaf;
        diag.votes = std::move(votes);
        diag.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.diags.push_back(std::move(diag));
        res.leaf_first.push_back(leaf);
    }
    res.ordering_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_all).count();
    res.order = reverse_to_root_order(res.leaf_first);
    return res;
}

OrderResult order(const ScoreNet& net, const MatrixXd& x_std, const OrderConfig& cfg) {
    auto net_copy = std::make_shared<const ScoreNet>(net);
    return order_with_backend(std::make_shared<NetBackend>(net_copy), x_std, cfg);
}

OrderResult order_greedy(const Dataset& data, const NoiseSchedule& sched,
                         const TrainConfig& tcfg, const OrderConfig& cfg, int width_small,
                         int width_big) {
    cfg.validate();
    int d = data.d();
    std::vector<int> active(d);
    for (int i = 0; i < d; ++i) active[i] = i;
    std::vector<int> leaf_first;
    Rng rng = make_rng(mix_seed(cfg.seed, 0x96DE));
    std::vector<double> ts = vote_grid(sched.t_max, cfg.n_votes);

    OrderResult res;
    auto start_all = std::chrono::steady_clock::now();
    for (int iter = 0; iter < d; ++iter) {
        auto start = std::chrono::steady_clock::now();
        if (active.size() == 1) {
            IterationDiag diag;
            diag.iteration = iter;
            diag.leaf = active[0];
            diag.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                         start)
                               .count();
            res.diags.push_back(std::move(diag));
            leaf_first.push_back(active[0]);
            break;
        }
        Dataset sub;
        sub.x.resize(data.n(), active.size());
        sub.labels.resize(active.size());
        for (size_t c = 0; c < active.size(); ++c) {
            sub.x.col(c) = data.x.col(active[c]);
            sub.labels[c] = data.labels[active[c]];
        }
        TrainConfig iter_cfg = tcfg;
        iter_cfg.seed = mix_seed(tcfg.seed, 0x9EED + iter);
        TrainResult tr;
        try {
            ScoreNet net = ScoreNet::make_default(static_cast<int>(active.size()), sched.t_max,
                                                  mix_seed(iter_cfg.seed, 0x11), width_small,
                                                  width_big);
            tr = train(std::move(net), sub, sched, iter_cfg);
        } catch (const NumericError& e) {
            throw GreedyTrainError(std::string("greedy retraining failed at iteration ") +
                                       std::to_string(iter) + ": " + e.what(),
                                   leaf_first);
        }
        MatrixXd x_std = tr.standardizer.apply(sub.x);

        auto backend = std::make_shared<NetBackend>(
            std::make_shared<const ScoreNet>(std::move(tr.net)));
        ScoreField::Options fopt;
        fopt.use_residue = false;
        fopt.apply_mask = false;  // columns are actually removed
        ScoreField field(backend, fopt);

        IterationDiag diag;
        diag.iteration = iter;
        MatrixXd b = sample_batch(x_std, cfg.k, rng);
        std::vector<VoteDiag> votes(ts.size());
        for (size_t vi = 0; vi < ts.size(); ++vi) {
            VoteDiag& v = votes[vi];
            v.t = ts[vi];
            VectorXd local_var;
            int local_leaf = find_leaf(field, b, v.t, &local_var);
            // Map column-compressed indices back to global node ids.
            v.leaf = active[local_leaf];
            v.variance.resize(d);
            v.variance.setConstant(std::numeric_limits<double>::quiet_NaN());
            for (size_t c = 0; c < active.size(); ++c) v.variance[active[c]] = local_var[c];
        }
        int leaf = pick_modal_leaf(votes);
        active.erase(std::find(active.begin(), active.end(), leaf));
        diag.leaf = leaf;
        diag.votes = std::move(votes);
        diag.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.diags.push_back(std::move(diag));
        leaf_first.push_back(leaf);
    }
    res.ordering_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_all).count();
    res.leaf_first = std::move(leaf_first);
    res.order = reverse_to_root_order(res.leaf_first);
    return res;
}

Ordering reverse_to_root_order(const std::vector<int>& pi_leaf_first) {
    Ordering o;
    o.pi.assign(pi_leaf_first.rbegin(), pi_leaf_first.rend());
    require(is_permutation_of_range(o.pi, static_cast<int>(o.pi.size())),
            "reverse_to_root_order: input is not a permutation");
    return o;
}

void write_diagnostics_csv(const OrderResult& res, const std::vector<std::string>& labels,
                           std::ostream& os) {
    os << "iteration,leaf,vote,t,node,variance,iteration_seconds\n";
    char buf[40];
    for (const auto& diag : res.diags) {
        for (size_t vi = 0; vi < diag.votes.size(); ++vi) {
            const auto& v = diag.votes[vi];
            for (Eigen::Index node = 0; node < v.variance.size(); ++node) {
                if (!std::isfinite(v.variance[node])) continue;
                std::snprintf(buf, sizeof(buf), "%.17g", v.variance[node]);
                os << diag.iteration << "," << labels[diag.leaf] << "," << vi << "," << v.t
                   << "," << labels[node] << "," << buf << "," << diag.seconds << "\n";
            }
        }
        if (diag.votes.empty())
            os << diag.iteration << "," << labels[diag.leaf] << ",,,,," << diag.seconds << "\n";
    }
}

void write_diagnostics_csv(const OrderResult& res, const std::vector<std::string>& labels,
                           const std::string& path) {
    std::ofstream os(path);
    require(os.good(), "write_diagnostics_csv: cannot open " + path);
    write_diagnostics_csv(res, labels, os);
}

}  // namespace diffan
