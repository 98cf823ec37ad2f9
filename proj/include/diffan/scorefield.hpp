#pragma once

#include "diffan/neural.hpp"

#include <memory>
#include <vector>

namespace diffan {

/// Anything that evaluates a d-dimensional score-like field and its input
/// derivatives on a batch. Implemented by the trained denoiser and by the
/// closed-form test oracles.
class ScoreBackend {
  public:
    virtual ~ScoreBackend() = default;

    virtual int dim() const = 0;
    virtual int t_max() const { return 1; }

    /// Field values, k x d.
    virtual MatrixXd eval(const MatrixXd& b, double t) const = 0;

    /// Input-Jacobian rows for the requested output indices; each k x d.
    virtual std::vector<MatrixXd> jac_rows(const MatrixXd& b, double t,
                                           const std::vector<int>& rows) const = 0;

    /// d^2 out_j / d x_i^2 for all j, as k x d.
    virtual MatrixXd second_diag_along(const MatrixXd& b, double t, int i) const = 0;

    /// d(Jacobian row l)/d x_l, i.e. d^2 out_l / (d x_j d x_l) for all j, k x d.
    virtual MatrixXd jac_row_tangent(const MatrixXd& b, double t, int l) const = 0;
};

/// Backend over a trained denoiser network.
class NetBackend : public ScoreBackend {
  public:
    explicit NetBackend(std::shared_ptr<const ScoreNet> net) : net_(std::move(net)) {}

    int dim() const override { return net_->data_dim; }
    int t_max() const override { return net_->t_max; }
    MatrixXd eval(const MatrixXd& b, double t) const override;
    std::vector<MatrixXd> jac_rows(const MatrixXd& b, double t,
                                   const std::vector<int>& rows) const override;
    MatrixXd second_diag_along(const MatrixXd& b, double t, int i) const override;
    MatrixXd jac_row_tangent(const MatrixXd& b, double t, int l) const override;

  private:
    MatrixXd with_time(const MatrixXd& b, double t) const;
    std::shared_ptr<const ScoreNet> net_;
};

/// Score field with iterative leaf removal. Removed leaves contribute additive
/// residue corrections, each computed from the raw backend at the current
/// batch (one correction per removed leaf), and masked columns are zeroed.
class ScoreField {
  public:
    struct Options {
        bool use_residue = true;  // false: masking-only variant
        bool apply_mask = true;
        double eps_div = 1e-8;  // |H_ll| guard for the residue denominator
    };

    explicit ScoreField(std::shared_ptr<const ScoreBackend> backend, Options opt = {});

    int dim() const { return backend_->dim(); }
    int t_max() const { return backend_->t_max(); }
    const std::vector<int>& active() const { return active_; }
    const std::vector<int>& removed() const { return removed_; }
    const Options& options() const { return opt_; }
    const ScoreBackend& backend() const { return *backend_; }

    /// Columns follow active() order. row_ok marks batch rows that survived
    /// the residue denominator guard and may enter variance statistics.
    struct Eval {
        MatrixXd values;
        std::vector<char> row_ok;
        int valid_rows() const;
    };

    /// Raw field restricted to active outputs plus accumulated residues.
    Eval score_eval(const MatrixXd& b, double t) const;

    /// Per-sample d(score_eval col i)/d x_i including the residues'
    /// dependence on the inputs.
    Eval hessian_diag(const MatrixXd& b, double t) const;

    /// Residue that removing leaf l would add, evaluated at (b, t). Columns
    /// follow active() order; the column for l itself is zero.
    Eval deciduous_residue(const MatrixXd& b, double t, int l) const;

    void remove_leaf(int l);

    /// Zeroes columns of removed nodes when masking is enabled.
    MatrixXd masked(const MatrixXd& b) const;

  private:
    struct ResidueTerms {
        VectorXd value_l;         // field value at output l
        MatrixXd jac_l;           // Jacobian row l, k x d
        VectorXd denom;           // J_ll
        std::vector<char> ok;     // |J_ll| >= eps_div
    };
    ResidueTerms residue_terms(const MatrixXd& bm, double t, int l,
                               const MatrixXd* precomputed_eval,
                               const MatrixXd* precomputed_row) const;
    void check_flagged(const std::vector<char>& ok, int l) const;

    std::shared_ptr<const ScoreBackend> backend_;
    Options opt_;
    std::vector<int> active_;   // ascending node ids
    std::vector<int> removed_;  // removal order
};

}  // namespace diffan
