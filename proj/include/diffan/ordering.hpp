#pragma once

#include "diffan/diffusion.hpp"
#include "diffan/scorefield.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace diffan {

enum class OrderVariant { Residue, Masking, Greedy };

std::string to_string(OrderVariant v);
OrderVariant order_variant_from_string(const std::string& s);

struct OrderConfig {
    OrderVariant variant = OrderVariant::Residue;
    int k = 64;        // ordering batch size
    int n_votes = 10;  // t-grid size for majority voting
    std::uint64_t seed = 0;
    bool apply_mask = true;          // zero removed columns (ablation flag)
    bool resample_per_vote = false;  // default: one batch per iteration, shared
    double eps_div = 1e-8;

    void validate() const;
};

struct VoteDiag {
    double t = 0.0;
    int leaf = -1;
    VectorXd variance;  // size d; NaN for inactive nodes
};

struct IterationDiag {
    int iteration = 0;
    int leaf = -1;
    double seconds = 0.0;
    std::vector<VoteDiag> votes;
};

struct OrderResult {
    Ordering order;               // root-first
    std::vector<int> leaf_first;  // removal sequence
    std::vector<IterationDiag> diags;
    double ordering_seconds = 0.0;
};

/// Argmin over active nodes of the per-node variance of the Hessian diagonal
/// across batch rows; ties break to the smallest node index. If `variances`
/// is given it is filled with per-node variance (NaN for inactive).
int find_leaf(const ScoreField& field, const MatrixXd& b, double t,
              VectorXd* variances = nullptr);

/// Algorithm-1 loop over an arbitrary score backend (residue and masking
/// variants). x must be in the space the backend was calibrated on.
OrderResult order_with_backend(std::shared_ptr<const ScoreBackend> backend,
                               const MatrixXd& x, const OrderConfig& cfg);

/// Ordering with a trained denoiser; x_std must use the training standardizer.
OrderResult order(const ScoreNet& net, const MatrixXd& x_std, const OrderConfig& cfg);

/// Greedy variant: retrains the denoiser on the remaining columns after each
/// leaf removal. Throws GreedyTrainError with the partial order on failure.
OrderResult order_greedy(const Dataset& data, const NoiseSchedule& sched,
                         const TrainConfig& tcfg, const OrderConfig& cfg,
                         int width_small = 0, int width_big = 0);

struct GreedyTrainError : NumericError {
    GreedyTrainError(const std::string& msg, std::vector<int> partial)
        : NumericError(msg), partial_leaf_first(std::move(partial)) {}
    std::vector<int> partial_leaf_first;
};

/// Reverses a leaf-first removal list into a root-first ordering.
Ordering reverse_to_root_order(const std::vector<int>& pi_leaf_first);

/// Long-form diagnostics CSV:
/// iteration,leaf,vote,t,node,variance,iteration_seconds
void write_diagnostics_csv(const OrderResult& res, const std::vector<std::string>& labels,
                           std::ostream& os);
void write_diagnostics_csv(const OrderResult& res, const std::vector<std::string>& labels,
                           const std::string& path);

}  // namespace diffan
