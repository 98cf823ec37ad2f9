#include "diffan/scorefield.hpp"

#include <algorithm>
#include <cmath>

namespace diffan {

MatrixXd NetBackend::with_time(const MatrixXd& b, double t) const {
    MatrixXd full(b.rows(), b.cols() + 1);
    full.leftCols(b.cols()) = b;
    full.col(b.cols()).setConstant(t / static_cast<double>(net_->t_max));
    return full;
}

MatrixXd NetBackend::eval(const MatrixXd& b, double t) const {
    return forward_full(*net_, with_time(b, t), RunMode::Eval, 0, nullptr);
}

std::vector<MatrixXd> NetBackend::jac_rows(const MatrixXd& b, double t,
                                           const std::vector<int>& rows) const {
    Tape tape;
    forward_full(*net_, with_time(b, t), RunMode::Eval, 0, &tape);
    std::vector<MatrixXd> out;
    out.reserve(rows.size());
    for (int r : rows) {
        require(r >= 0 && r < net_->output_dim(), "jac_rows: row out of range");
        MatrixXd seed = MatrixXd::Zero(b.rows(), net_->output_dim());
        seed.col(r).setOnes();
        out.push_back(backward_input(*net_, tape, seed).leftCols(net_->data_dim));
    }
    return out;
}

MatrixXd NetBackend::second_diag_along(const MatrixXd& b, double t, int i) const {
    MatrixXd full = with_time(b, t);
    MatrixXd tan = MatrixXd::Zero(full.rows(), full.cols());
    tan.col(i).setOnes();
    MatrixXd tan2 = MatrixXd::Zero(full.rows(), full.cols());
    Jet2 jet = forward_jet2(*net_, full, tan, tan2);
    return jet.t2;
}

MatrixXd NetBackend::jac_row_tangent(const MatrixXd& b, double t, int l) const {
    MatrixXd full = with_time(b, t);
    MatrixXd tan = MatrixXd::Zero(full.rows(), full.cols());
    tan.col(l).setOnes();
    Tape tape;
    TangentTape ttape;
    forward_dual(*net_, full, tan, tape, ttape);
    MatrixXd seed = MatrixXd::Zero(b.rows(), net_->output_dim());
    seed.col(l).setOnes();
    MatrixXd seed_tan = MatrixXd::Zero(b.rows(), net_->output_dim());
    DualAdjoint da = backward_input_dual(*net_, tape, ttape, seed, seed_tan);
    return da.adj_tan.leftCols(net_->data_dim);
}

ScoreField::ScoreField(std::shared_ptr<const ScoreBackend> backend, Options opt)
    : backend_(std::move(backend)), opt_(opt) {
    require(backend_ != nullptr, "ScoreField: null backend");
    active_.resize(backend_->dim());
    for (int i = 0; i < backend_->dim(); ++i) active_[i] = i;
}

int ScoreField::Eval::valid_rows() const {
    int n = 0;
    for (char c : row_ok) n += c != 0;
    return n;
}

MatrixXd ScoreField::masked(const MatrixXd& b) const {
    require(b.cols() == backend_->dim(), "ScoreField: batch width mismatch");
    if (!opt_.apply_mask || removed_.empty()) return b;
    MatrixXd out = b;
    for (int l : removed_) out.col(l).setZero();
    return out;
}

ScoreField::ResidueTerms ScoreField::residue_terms(const MatrixXd& bm, double t, int l,
                                                   const MatrixXd* precomputed_eval,
                                                   const MatrixXd* precomputed_row) const {
    ResidueTerms rt;
    if (precomputed_eval) {
        rt.value_l = precomputed_eval->col(l);
    } else {
        rt.value_l = backend_->eval(bm, t).col(l);
    }
    if (precomputed_row) {
        rt.jac_l = *precomputed_row;
    } else {
        rt.jac_l = backend_->jac_rows(bm, t, {l})[0];
    }
    rt.denom = rt.jac_l.col(l);
    rt.ok.assign(bm.rows(), 1);
    for (Eigen::Index r = 0; r < bm.rows(); ++r)
        if (std::abs(rt.denom[r]) < opt_.eps_div) rt.ok[r] = 0;
    return rt;
}

void ScoreField::check_flagged(const std::vector<char>& ok, int l) const {
    int flagged = 0;
    for (char c : ok) flagged += c == 0;
    if (flagged * 2 > static_cast<int>(ok.size()))
        throw NumericError("deciduous residue: |H_ll| < eps_div for " +
                           std::to_string(flagged) + "/" + std::to_string(ok.size()) +
                           " samples at leaf " + std::to_string(l));
}

ScoreField::Eval ScoreField::score_eval(const MatrixXd& b, double t) const {
    MatrixXd bm = masked(b);
    MatrixXd raw = backend_->eval(bm, t);
    Eval ev;
    ev.values.resize(b.rows(), active_.size());
    for (size_t a = 0; a < active_.size(); ++a) ev.values.col(a) = raw.col(active_[a]);
    ev.row_ok.assign(b.rows(), 1);
    if (!opt_.use_residue || removed_.empty()) return ev;

    auto rows = backend_->jac_rows(bm, t, removed_);
    for (size_t m = 0; m < removed_.size(); ++m) {
        int l = removed_[m];
        ResidueTerms rt = residue_terms(bm, t, l, &raw, &rows[m]);
        check_flagged(rt.ok, l);
        for (Eigen::Index r = 0; r < b.rows(); ++r) {
            if (!rt.ok[r]) {
                ev.row_ok[r] = 0;
                continue;
            }
            double scale = rt.value_l[r] / rt.denom[r];
            for (size_t a = 0; a < active_.size(); ++a)
                ev.values(r, a) -= rt.jac_l(r, active_[a]) * scale;
        }
    }
    return ev;
}

ScoreField::Eval ScoreField::hessian_diag(const MatrixXd& b, double t) const {
    MatrixXd bm = masked(b);
    Eval ev;
    ev.values.resize(b.rows(), active_.size());
    ev.row_ok.assign(b.rows(), 1);

    bool with_residue = opt_.use_residue && !removed_.empty();
    if (!with_residue) {
        auto rows = backend_->jac_rows(bm, t, active_);
        for (size_t a = 0; a < active_.size(); ++a)
            ev.values.col(a) = rows[a].col(active_[a]);
        return ev;
    }

    // One combined Jacobian pass: active rows then removed rows.
    std::vector<int> all_rows = active_;
    all_rows.insert(all_rows.end(), removed_.begin(), removed_.end());
    auto rows = backend_->jac_rows(bm, t, all_rows);
    MatrixXd raw = backend_->eval(bm, t);

    std::vector<ResidueTerms> terms;
    terms.reserve(removed_.size());
    for (size_t m = 0; m < removed_.size(); ++m) {
        int l = removed_[m];
        terms.push_back(residue_terms(bm, t, l, &raw, &rows[active_.size() + m]));
        check_flagged(terms.back().ok, l);
        for (Eigen::Index r = 0; r < b.rows(); ++r)
            if (!terms.back().ok[r]) ev.row_ok[r] = 0;
    }
    // d(J row l)/d x_l, one per removed leaf.
    std::vector<MatrixXd> cross;
    cross.reserve(removed_.size());
    for (int l : removed_) cross.push_back(backend_->jac_row_tangent(bm, t, l));

    for (size_t a = 0; a < active_.size(); ++a) {
        int i = active_[a];
        ev.values.col(a) = rows[a].col(i);  // d eps_i / d x_i
        // Second-derivative column d^2 eps_j / d x_i^2 for every output j.
        MatrixXd sd = backend_->second_diag_along(bm, t, i);
        for (size_t m = 0; m < removed_.size(); ++m) {
            int l = removed_[m];
            const ResidueTerms& rt = terms[m];
            for (Eigen::Index r = 0; r < b.rows(); ++r) {
                if (!rt.ok[r]) continue;
                double jli = rt.jac_l(r, i);
                double d_den = cross[m](r, i);  // d J_ll / d x_i
                double num = sd(r, l) * rt.value_l[r] + jli * jli;
                ev.values(r, a) +=
                    -num / rt.denom[r] + jli * rt.value_l[r] * d_den / (rt.denom[r] * rt.denom[r]);
            }
        }
    }
    return ev;
}

ScoreField::Eval ScoreField::deciduous_residue(const MatrixXd& b, double t, int l) const {
    require(std::find(active_.begin(), active_.end(), l) != active_.end(),
            "deciduous_residue: leaf must be active");
    MatrixXd bm = masked(b);
    ResidueTerms rt = residue_terms(bm, t, l, nullptr, nullptr);
    check_flagged(rt.ok, l);
    Eval ev;
    ev.values = MatrixXd::Zero(b.rows(), active_.size());
    ev.row_ok = rt.ok;
    for (Eigen::Index r = 0; r < b.rows(); ++r) {
        if (!rt.ok[r]) continue;
        double scale = rt.value_l[r] / rt.denom[r];
        for (size_t a = 0; a < active_.size(); ++a) {
            if (active_[a] == l) continue;  // entry for l itself discarded
            ev.values(r, a) = -rt.jac_l(r, active_[a]) * scale;
        }
    }
    return ev;
}

void ScoreField::remove_leaf(int l) {
    auto it = std::find(active_.begin(), active_.end(), l);
    require(it != active_.end(), "remove_leaf: node not active");
    active_.erase(it);
    removed_.push_back(l);
}

}  // namespace diffan
