#include "diffan/oracle.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace diffan {

namespace {
constexpr double kMechFdStep = 1e-4;
}

MatrixXd analytic_score_gaussian_anm(const RealizedAnm& anm, const MatrixXd& x) {
    require(anm.noise_family == NoiseFamily::Gaussian,
            "analytic_score_gaussian_anm: Gaussian noise only");
    int d = anm.graph.d;
    require(x.cols() == d, "analytic_score_gaussian_anm: x width mismatch");
    MatrixXd score = MatrixXd::Zero(x.rows(), d);
    for (int i = 0; i < d; ++i) {
        double inv_var = 1.0 / (anm.noise_scale[i] * anm.noise_scale[i]);
        const auto& pa = anm.parents[i];
        if (pa.empty()) {
            score.col(i) -= x.col(i) * inv_var;
            continue;
        }
        MatrixXd pv(x.rows(), pa.size());
        for (size_t c = 0; c < pa.size(); ++c) pv.col(c) = x.col(pa[c]);
        VectorXd fi = anm.mechanisms[i]->eval(pv);
        VectorXd resid = (x.col(i) - fi) * inv_var;  // (x_i - f_i)/sigma_i^2
        score.col(i) -= resid;
        // Children terms: +(df_i/dx_j) * resid for each parent j of i.
        for (size_t c = 0; c < pa.size(); ++c) {
            MatrixXd up = pv, dn = pv;
            up.col(c).array() += kMechFdStep;
            dn.col(c).array() -= kMechFdStep;
            VectorXd dfi =
                (anm.mechanisms[i]->eval(up) - anm.mechanisms[i]->eval(dn)) / (2.0 * kMechFdStep);
            score.col(pa[c]) += dfi.cwiseProduct(resid);
        }
    }
    return score;
}

MatrixXd linear_gaussian_score(const MatrixXd& precision, const MatrixXd& x) {
    require(precision.rows() == precision.cols(), "linear_gaussian_score: precision not square");
    require(x.cols() == precision.rows(), "linear_gaussian_score: x width mismatch");
    return -(x * precision);  // symmetric precision: row-form of -precision * x
}

MatrixXd marginal_precision(const MatrixXd& precision, int drop) {
    int d = static_cast<int>(precision.rows());
    require(drop >= 0 && drop < d, "marginal_precision: drop index out of range");
    require(precision.rows() == precision.cols(), "marginal_precision: not square");
    require(std::abs(precision(drop, drop)) > 0.0, "marginal_precision: zero pivot");
    std::vector<int> keep;
    for (int i = 0; i < d; ++i)
        if (i != drop) keep.push_back(i);
    MatrixXd out(d - 1, d - 1);
    for (int a = 0; a < d - 1; ++a)
        for (int b = 0; b < d - 1; ++b)
            out(a, b) = precision(keep[a], keep[b]) -
                        precision(keep[a], drop) * precision(drop, keep[b]) /
                            precision(drop, drop);
    return out;
}

VectorXd linear_gaussian_logpdf_unnorm(const MatrixXd& precision, const MatrixXd& x) {
    VectorXd out(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        out[r] = -0.5 * x.row(r) * precision * x.row(r).transpose();
    return out;
}

std::vector<MatrixXd> FdScoreBackend::jac_rows(const MatrixXd& b, double t,
                                               const std::vector<int>& rows) const {
    int d = dim();
    // Column-wise central differences give the full Jacobian in 2d evals.
    std::vector<MatrixXd> cols(d);
    for (int j = 0; j < d; ++j) {
        MatrixXd up = b, dn = b;
        up.col(j).array() += fd_h_;
        dn.col(j).array() -= fd_h_;
        cols[j] = (eval(up, t) - eval(dn, t)) / (2.0 * fd_h_);  // k x d: d out_r / d x_j
    }
    std::vector<MatrixXd> out;
    out.reserve(rows.size());
    for (int r : rows) {
        MatrixXd jr(b.rows(), d);
        for (int j = 0; j < d; ++j) jr.col(j) = cols[j].col(r);
        out.push_back(std::move(jr));
    }
    return out;
}

MatrixXd FdScoreBackend::second_diag_along(const MatrixXd& b, double t, int i) const {
    MatrixXd up = b, dn = b;
    up.col(i).array() += fd_h_;
    dn.col(i).array() -= fd_h_;
    return (eval(up, t) - 2.0 * eval(b, t) + eval(dn, t)) / (fd_h_ * fd_h_);
}

MatrixXd FdScoreBackend::jac_row_tangent(const MatrixXd& b, double t, int l) const {
    MatrixXd up = b, dn = b;
    up.col(l).array() += fd_h_outer_;
    dn.col(l).array() -= fd_h_outer_;
    MatrixXd ju = jac_rows(up, t, {l})[0];
    MatrixXd jd = jac_rows(dn, t, {l})[0];
    return (ju - jd) / (2.0 * fd_h_outer_);
}

GaussianAnmBackend::GaussianAnmBackend(RealizedAnm anm) : anm_(std::move(anm)) {
    require(anm_.noise_family == NoiseFamily::Gaussian,
            "GaussianAnmBackend: Gaussian noise only");
}

MatrixXd GaussianAnmBackend::eval(const MatrixXd& b, double) const {
    return analytic_score_gaussian_anm(anm_, b);
}

LinearGaussianBackend::LinearGaussianBackend(MatrixXd precision)
    : precision_(std::move(precision)) {
    require(precision_.rows() == precision_.cols(), "LinearGaussianBackend: not square");
    require(precision_.isApprox(precision_.transpose(), 1e-10),
            "LinearGaussianBackend: precision must be symmetric");
    Eigen::LLT<MatrixXd> llt(precision_);
    require(llt.info() == Eigen::Success, "LinearGaussianBackend: precision must be SPD");
}

MatrixXd LinearGaussianBackend::eval(const MatrixXd& b, double) const {
    return linear_gaussian_score(precision_, b);
}

std::vector<MatrixXd> LinearGaussianBackend::jac_rows(const MatrixXd& b, double,
                                                      const std::vector<int>& rows) const {
    std::vector<MatrixXd> out;
    out.reserve(rows.size());
    for (int r : rows) {
        MatrixXd jr = (-precision_.row(r)).replicate(b.rows(), 1);
        out.push_back(std::move(jr));
    }
    return out;
}

MatrixXd LinearGaussianBackend::second_diag_along(const MatrixXd& b, double, int) const {
    return MatrixXd::Zero(b.rows(), dim());
}

MatrixXd LinearGaussianBackend::jac_row_tangent(const MatrixXd& b, double, int) const {
    return MatrixXd::Zero(b.rows(), dim());
}

}  // namespace diffan
