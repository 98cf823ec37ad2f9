#include "diffan/pruning.hpp"

#include <boost/math/distributions/fisher_f.hpp>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <iostream>

namespace diffan {

void PruneConfig::validate() const {
    require(alpha > 0.0 && alpha < 1.0, "PruneConfig: need alpha in (0, 1)");
    require(degree >= 1, "PruneConfig: need degree >= 1");
    require(spline_df >= 3, "PruneConfig: need spline_df >= 3");
    require(max_parents >= 0, "PruneConfig: need max_parents >= 0");
}

std::string to_string(PruneConfig::Basis b) {
    return b == PruneConfig::Basis::Polynomial ? "polynomial" : "spline";
}

PruneConfig::Basis prune_basis_from_string(const std::string& s) {
    if (s == "polynomial") return PruneConfig::Basis::Polynomial;
    if (s == "spline") return PruneConfig::Basis::Spline;
    throw ValidationError("unknown pruning basis: " + s);
}

namespace {

// Basis expansion of one standardized column; no intercept column here.
MatrixXd expand_column(const VectorXd& z, const PruneConfig& cfg) {
    int n = static_cast<int>(z.size());
    if (cfg.basis == PruneConfig::Basis::Polynomial) {
        MatrixXd out(n, cfg.degree);
        VectorXd cur = z;
        for (int p = 0; p < cfg.degree; ++p) {
            out.col(p) = cur;
            cur = cur.cwiseProduct(z);
        }
        return out;
    }
    // Cubic truncated-power basis: z, z^2, z^3, (z - knot_q)^3_+ at quantile knots.
    int n_knots = cfg.spline_df - 3;
    MatrixXd out(n, cfg.spline_df);
    out.col(0) = z;
    out.col(1) = z.cwiseProduct(z);
    out.col(2) = out.col(1).cwiseProduct(z);
    if (n_knots > 0) {
        VectorXd sorted = z;
        std::sort(sorted.data(), sorted.data() + sorted.size());
        for (int q = 0; q < n_knots; ++q) {
            double frac = static_cast<double>(q + 1) / (n_knots + 1);
            double knot = sorted[static_cast<int>(frac * (n - 1))];
            out.col(3 + q) =
                (z.array() - knot).max(0.0).pow(3).matrix();
        }
    }
    return out;
}

struct FitResult {
    double rss = 0.0;
    bool ridge_fallback = false;
};

FitResult least_squares_rss(const MatrixXd& design, const VectorXd& y) {
    FitResult res;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
    if (qr.rank() < design.cols()) {
        // Singular design: ridge fallback.
        res.ridge_fallback = true;
        MatrixXd gram = design.transpose() * design;
        gram.diagonal().array() += 1e-6;
        VectorXd beta = gram.ldlt().solve(design.transpose() * y);
        res.rss = (y - design * beta).squaredNorm();
        return res;
    }
    VectorXd beta = qr.solve(y);
    res.rss = (y - design * beta).squaredNorm();
    return res;
}

}  // namespace

Dag prune(const Dataset& data, const Ordering& order, const PruneConfig& cfg) {
    cfg.validate();
    int d = data.d();
    require(is_permutation_of_range(order.pi, d), "prune: order must cover all columns");
    int n = data.n();
    int per_pred = cfg.basis == PruneConfig::Basis::Polynomial ? cfg.degree : cfg.spline_df;

    // Standardize once; polynomial/spline spans are affine-invariant enough
    // for the F-test and conditioning improves.
    VectorXd mean = data.x.colwise().mean().transpose();
    MatrixXd c = data.x.rowwise() - mean.transpose();
    VectorXd sd = c.array().square().colwise().mean().sqrt().matrix().transpose();
    for (int j = 0; j < d; ++j)
        if (sd[j] < 1e-12) sd[j] = 1.0;
    MatrixXd z = c.array().rowwise() / sd.transpose().array();

    AdjMatrix adj = AdjMatrix::Zero(d, d);
    bool warned_ridge = false;

    for (int pos = 1; pos < d; ++pos) {
        int node = order.pi[pos];
        std::vector<int> preds(order.pi.begin(), order.pi.begin() + pos);
        int p_full = 1 + per_pred * static_cast<int>(preds.size());
        require(n > p_full + 1, "prune: need n > " + std::to_string(p_full + 1) +
                                    " samples for node " + data.labels[node]);

        MatrixXd design(n, p_full);
        design.col(0).setOnes();
        for (size_t j = 0; j < preds.size(); ++j)
            design.middleCols(1 + per_pred * static_cast<int>(j), per_pred) =
                expand_column(z.col(preds[j]), cfg);
        VectorXd y = z.col(node);

        FitResult full = least_squares_rss(design, y);
        if (full.ridge_fallback && !warned_ridge) {
            std::cerr << "prune: singular design, using ridge fallback (lambda=1e-6)\n";
            warned_ridge = true;
        }
        double denom_df = n - p_full;
        boost::math::fisher_f fdist(per_pred, denom_df);

        std::vector<std::pair<double, int>> significant;  // (pvalue, pred)
        for (size_t j = 0; j < preds.size(); ++j) {
            MatrixXd reduced(n, p_full - per_pred);
            reduced.col(0).setOnes();
            int at = 1;
            for (size_t o = 0; o < preds.size(); ++o) {
                if (o == j) continue;
                reduced.middleCols(at, per_pred) =
                    design.middleCols(1 + per_pred * static_cast<int>(o), per_pred);
                at += per_pred;
            }
            FitResult red = least_squares_rss(reduced, y);
            double num = std::max(0.0, red.rss - full.rss) / per_pred;
            double den = full.rss / denom_df;
            double pval;
            if (den <= 0.0) {
                pval = num > 0.0 ? 0.0 : 1.0;  // perfect fit
            } else {
                double f = num / den;
                pval = boost::math::cdf(boost::math::complement(fdist, f));
            }
            if (pval < cfg.alpha) significant.emplace_back(pval, preds[j]);
        }
        int cap = cfg.max_parents > 0 ? cfg.max_parents : d - 1;
        if (static_cast<int>(significant.size()) > cap) {
            std::sort(significant.begin(), significant.end());
            significant.resize(cap);
        }
        for (const auto& [pv, pred] : significant) adj(pred, node) = 1;
    }
    return Dag(std::move(adj), data.labels);
}

}  // namespace diffan
