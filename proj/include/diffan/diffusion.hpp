#pragma once

#include "diffan/neural.hpp"
#include "diffan/scm.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace diffan {

/// Discrete forward-diffusion schedule; tables indexed by t in [0, T].
struct NoiseSchedule {
    int t_max = 100;
    VectorXd beta;       // T+1 values, linear in [beta_min, beta_max]
    VectorXd alpha_bar;  // cumulative product of (1 - beta_j), j = 0..t

    static NoiseSchedule linear(int t_max = 100, double beta_min = 1e-4,
                                double beta_max = 0.02);
    void validate() const;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, elementwise per row.
MatrixXd noisify(const MatrixXd& x0, const VectorXi& t, const MatrixXd& eps,
                 const NoiseSchedule& sched);

/// Per-column affine map to zero mean / unit variance.
struct Standardizer {
    VectorXd mean, scale;

    static Standardizer fit(const MatrixXd& x);
    MatrixXd apply(const MatrixXd& x) const;
    MatrixXd invert(const MatrixXd& x) const;
};

struct TrainConfig {
    int epochs_max = 2000;
    int batch_size = 256;
    double learning_rate = 1e-3;
    int early_stop_patience = 30;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    ScoreNet net;
    Standardizer standardizer;
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;    // per epoch
    int best_epoch = -1;
    double best_val_loss = 0.0;
    int epochs_run = 0;
};

/// Divergence during training; carries the last good state.
struct TrainDivergenceError : NumericError {
    TrainDivergenceError(const std::string& msg, std::shared_ptr<TrainResult> last_good_)
        : NumericError(msg), last_good(std::move(last_good_)) {}
    std::shared_ptr<TrainResult> last_good;
};

/// Denoising-diffusion training of the score net on (standardized) data.
/// The simple unweighted objective: mean over rows of |eps_theta(x_t, t) - eps|^2
/// with t uniform on {0..T}. Early stopping on a fixed validation split;
/// the best-validation weights are restored on exit.
TrainResult train(ScoreNet net, const Dataset& data, const NoiseSchedule& sched,
                  const TrainConfig& cfg);

/// Expected per-coordinate optimal denoising loss for standard normal data at
/// time t: the conditional-expectation residual floor.
double gaussian_denoise_floor(const NoiseSchedule& sched, int t);
/// Same, averaged over t uniform on {0..T}.
double gaussian_denoise_floor_avg(const NoiseSchedule& sched);

/// Checkpoint = net + schedule + standardizer, binary, versioned magic.
struct Checkpoint {
    ScoreNet net;
    NoiseSchedule sched;
    Standardizer standardizer;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace diffan
