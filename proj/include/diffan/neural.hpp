#pragma once

#include "diffan/common.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace diffan {

/// One stage of the MLP stack. A plain tagged struct keeps dispatch and
/// serialization simple.
struct Layer {
    enum class Kind { Affine, LeakyRelu, LayerNorm, Dropout };
    Kind kind = Kind::Affine;

    MatrixXd w;           // affine: out x in
    VectorXd b;           // affine: out
    VectorXd gamma, beta;  // layernorm
    double slope = 0.01;  // leakyrelu
    double p = 0.2;       // dropout

    static Layer affine(MatrixXd w, VectorXd b);
    static Layer leaky_relu(double slope = 0.01);
    static Layer layer_norm(int n);
    static Layer dropout(double p = 0.2);
};

constexpr double kLayerNormEps = 1e-5;

/// MLP score network. Inputs are the d data columns plus normalized time t/T;
/// outputs are d denoiser values.
struct ScoreNet {
    int data_dim = 0;
    int t_max = 100;
    std::vector<Layer> layers;

    int input_dim() const { return data_dim + 1; }
    int output_dim() const { return data_dim; }

    /// Default 5-layer stack; widths 0 mean small = max(128, 3d),
    /// big = max(1024, 5d).
    static ScoreNet make_default(int d, int t_max, std::uint64_t init_seed,
                                 int width_small = 0, int width_big = 0);

    void validate() const;
    std::vector<int> widths() const;  // hidden affine output widths
};

enum class RunMode { Eval, Train };

/// Recorded per-layer state from one forward pass; enough to run reverse
/// sweeps w.r.t. weights or inputs.
struct Tape {
    std::vector<MatrixXd> input;      // value entering each layer
    std::vector<MatrixXd> lrelu_m;    // leakyrelu: elementwise slopes
    std::vector<MatrixXd> ln_xhat;    // layernorm: normalized activations
    std::vector<VectorXd> ln_s;       // layernorm: per-row scale
    std::vector<MatrixXd> drop_mask;  // dropout: applied mask (train mode)
    MatrixXd output;
};

/// Directional-derivative companion to Tape (one tangent direction).
struct TangentTape {
    std::vector<MatrixXd> input;    // tangent entering each layer
    std::vector<MatrixXd> ln_xhat;  // tangent of normalized activations
    std::vector<VectorXd> ln_s;     // tangent of per-row scale
    MatrixXd output;
};

/// Gradient structure mirroring the trainable weights.
struct ParamGrads {
    std::vector<MatrixXd> w;      // per layer; empty where not applicable
    std::vector<VectorXd> b;
    std::vector<VectorXd> gamma;
    std::vector<VectorXd> beta;

    static ParamGrads zeros_like(const ScoreNet& net);
};

int param_count(const ScoreNet& net);
VectorXd flatten_params(const ScoreNet& net);
void set_params(ScoreNet& net, const VectorXd& flat);
VectorXd flatten_grads(const ScoreNet& net, const ParamGrads& grads);

/// Batched forward pass on raw (d+1)-wide input rows.
MatrixXd forward_full(const ScoreNet& net, const MatrixXd& input, RunMode mode,
                      std::uint64_t dropout_seed, Tape* tape);

/// Batched forward on data columns x (k x d) and times t (k); appends t/T.
MatrixXd forward(const ScoreNet& net, const MatrixXd& x, const VectorXd& t, RunMode mode,
                 std::uint64_t dropout_seed = 0);

/// Adjoint of the input given adjoint of the output (k x out) -> (k x in).
MatrixXd backward_input(const ScoreNet& net, const Tape& tape, const MatrixXd& out_adj);

/// Accumulates dLoss/dparams given adjoint of the output.
ParamGrads backward_params(const ScoreNet& net, const Tape& tape, const MatrixXd& out_adj);

/// Loss adapter for grad_weights: maps batch output to (loss, dLoss/doutput).
struct LossEval {
    double value = 0.0;
    MatrixXd grad_out;
};
using LossFn = std::function<LossEval(const MatrixXd& output)>;

struct WeightGradResult {
    double loss = 0.0;
    ParamGrads grads;
};

WeightGradResult grad_weights(const ScoreNet& net, const MatrixXd& x, const VectorXd& t,
                              RunMode mode, std::uint64_t dropout_seed, const LossFn& loss);

/// J[r](s, j) = d output_row[r] / d input_j at sample s; data columns only.
/// One reverse sweep per requested row. Eval mode.
std::vector<MatrixXd> input_jacobian(const ScoreNet& net, const MatrixXd& x, const VectorXd& t,
                                     const std::vector<int>& rows);

/// Forward with a tangent direction (eval mode); fills both tapes.
void forward_dual(const ScoreNet& net, const MatrixXd& input, const MatrixXd& input_tan,
                  Tape& tape, TangentTape& ttape);

/// Second-order univariate jet (eval mode): value, first and second
/// directional derivative of the output along one input direction.
struct Jet2 {
    MatrixXd v, t1, t2;
};
Jet2 forward_jet2(const ScoreNet& net, const MatrixXd& input, const MatrixXd& tan,
                  const MatrixXd& tan2);

/// Reverse sweep carrying a forward tangent: returns input adjoint and its
/// directional derivative along the tangent used in forward_dual.
struct DualAdjoint {
    MatrixXd adj, adj_tan;
};
DualAdjoint backward_input_dual(const ScoreNet& net, const Tape& tape, const TangentTape& ttape,
                                const MatrixXd& out_adj, const MatrixXd& out_adj_tan);

/// Net-only serialization (used inside checkpoints).
void save_net(const ScoreNet& net, std::ostream& os);
ScoreNet load_net(std::istream& is);

}  // namespace diffan
