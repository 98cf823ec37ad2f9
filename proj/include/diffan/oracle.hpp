#pragma once

#include "diffan/scm.hpp"
#include "diffan/scorefield.hpp"

#include <memory>

namespace diffan {

/// Exact score of a nonlinear ANM with Gaussian noise:
///   score_j(x) = -(x_j - f_j)/sigma_j^2
///                + sum_{i in children(j)} (df_i/dx_j) (x_i - f_i)/sigma_i^2.
/// Mechanism derivatives come from central differences of the stored
/// evaluators (h = 1e-4).
MatrixXd analytic_score_gaussian_anm(const RealizedAnm& anm, const MatrixXd& x);

/// Score of N(0, precision^-1): score(x) = -precision * x, row-batched.
MatrixXd linear_gaussian_score(const MatrixXd& precision, const MatrixXd& x);

/// Precision of the marginal after integrating out one coordinate:
/// Schur complement removing row/col `drop`.
MatrixXd marginal_precision(const MatrixXd& precision, int drop);

/// Log density of N(0, precision^-1) up to the normalizing constant.
VectorXd linear_gaussian_logpdf_unnorm(const MatrixXd& precision, const MatrixXd& x);

/// Backend whose derivative queries fall back to central differences of
/// eval(); concrete oracles override eval only (or everything, if exact).
class FdScoreBackend : public ScoreBackend {
  public:
    std::vector<MatrixXd> jac_rows(const MatrixXd& b, double t,
                                   const std::vector<int>& rows) const override;
    MatrixXd second_diag_along(const MatrixXd& b, double t, int i) const override;
    MatrixXd jac_row_tangent(const MatrixXd& b, double t, int l) const override;

  protected:
    double fd_h_ = 1e-4;
    double fd_h_outer_ = 1e-3;
};

class GaussianAnmBackend : public FdScoreBackend {
  public:
    explicit GaussianAnmBackend(RealizedAnm anm);
    int dim() const override { return anm_.graph.d; }
    MatrixXd eval(const MatrixXd& b, double t) const override;
    const RealizedAnm& anm() const { return anm_; }

  private:
    RealizedAnm anm_;
};

class LinearGaussianBackend : public ScoreBackend {
  public:
    explicit LinearGaussianBackend(MatrixXd precision);
    int dim() const override { return static_cast<int>(precision_.rows()); }
    MatrixXd eval(const MatrixXd& b, double t) const override;
    std::vector<MatrixXd> jac_rows(const MatrixXd& b, double t,
                                   const std::vector<int>& rows) const override;
    MatrixXd second_diag_along(const MatrixXd& b, double t, int i) const override;
    MatrixXd jac_row_tangent(const MatrixXd& b, double t, int l) const override;
    const MatrixXd& precision() const { return precision_; }

  private:
    MatrixXd precision_;
};

/// Wraps a backend, multiplying all values (and hence all derivatives) by a
/// positive constant; used by scale-invariance tests.
class ScaledBackend : public ScoreBackend {
  public:
    ScaledBackend(std::shared_ptr<const ScoreBackend> inner, double c)
        : inner_(std::move(inner)), c_(c) {}
    int dim() const override { return inner_->dim(); }
    int t_max() const override { return inner_->t_max(); }
    MatrixXd eval(const MatrixXd& b, double t) const override {
        return c_ * inner_->eval(b, t);
    }
    std::vector<MatrixXd> jac_rows(const MatrixXd& b, double t,
                                   const std::vector<int>& rows) const override {
        auto out = inner_->jac_rows(b, t, rows);
        for (auto& m : out) m *= c_;
        return out;
    }
    MatrixXd second_diag_along(const MatrixXd& b, double t, int i) const override {
        return c_ * inner_->second_diag_along(b, t, i);
    }
    MatrixXd jac_row_tangent(const MatrixXd& b, double t, int l) const override {
        return c_ * inner_->jac_row_tangent(b, t, l);
    }

  private:
    std::shared_ptr<const ScoreBackend> inner_;
    double c_;
};

}  // namespace diffan
