#pragma once

#include "diffan/graphs.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace diffan {

enum class NoiseFamily { Gaussian, Exponential, Laplace };

std::string to_string(NoiseFamily f);
NoiseFamily noise_family_from_string(const std::string& s);

/// Synthetic nonlinear-ANM specification: graph + mechanism/noise recipe.
struct AnmSpec {
    Dag graph;
    std::uint64_t mech_seed = 0;
    NoiseFamily noise_family = NoiseFamily::Gaussian;
    double noise_scale_lo = 1.0;
    double noise_scale_hi = 1.0;
    double gp_bandwidth = 1.0;

    void validate() const;
};

struct Dataset {
    MatrixXd x;  // n x d
    std::vector<std::string> labels;

    int n() const { return static_cast<int>(x.rows()); }
    int d() const { return static_cast<int>(x.cols()); }
};

/// One joint draw of a GP function with RBF kernel
/// k(u, v) = exp(-|u - v|^2 / (2 bandwidth^2)) at the given input rows.
/// Exact (Cholesky) for m <= 3000 unique rows, random Fourier features above.
VectorXd gp_draw(const MatrixXd& parent_values, double bandwidth, std::uint64_t seed);

/// A mechanism f_i usable both for data generation and for the analytic-score
/// oracle: evaluable at arbitrary points of the parent space.
class Mechanism {
  public:
    virtual ~Mechanism() = default;
    virtual VectorXd eval(const MatrixXd& parent_values) const = 0;
    virtual int arity() const = 0;
};

/// GP sample realized as an RBF interpolant through its own support points.
class GpInterpolantMechanism : public Mechanism {
  public:
    GpInterpolantMechanism(MatrixXd support, VectorXd weights, double bandwidth);
    VectorXd eval(const MatrixXd& parent_values) const override;
    int arity() const override { return static_cast<int>(support_.cols()); }

  private:
    MatrixXd support_;  // m x p
    VectorXd weights_;  // m
    double bandwidth_;
};

/// GP sample realized with random Fourier features (large-n path).
class RffMechanism : public Mechanism {
  public:
    RffMechanism(MatrixXd omega, VectorXd phase, VectorXd weights);
    VectorXd eval(const MatrixXd& parent_values) const override;
    int arity() const override { return static_cast<int>(omega_.rows()); }

  private:
    MatrixXd omega_;    // p x R
    VectorXd phase_;    // R
    VectorXd weights_;  // R
};

/// Linear mechanism; used by oracle tests with hand-computable derivatives.
class LinearMechanism : public Mechanism {
  public:
    explicit LinearMechanism(VectorXd coeffs) : coeffs_(std::move(coeffs)) {}
    VectorXd eval(const MatrixXd& parent_values) const override {
        return parent_values * coeffs_;
    }
    int arity() const override { return static_cast<int>(coeffs_.size()); }

  private:
    VectorXd coeffs_;
};

/// ANM with concrete per-node mechanisms and noise scales; what the
/// analytic-score oracle consumes.
struct RealizedAnm {
    Dag graph;
    NoiseFamily noise_family = NoiseFamily::Gaussian;
    std::vector<double> noise_scale;                     // per node
    std::vector<std::vector<int>> parents;               // per node
    std::vector<std::shared_ptr<Mechanism>> mechanisms;  // null for roots

    /// f_i at arbitrary points x (k x d); roots give 0.
    VectorXd mech_value(int node, const MatrixXd& x) const;
};

struct GeneratedData {
    Dataset data;
    RealizedAnm anm;
};

/// Draws noise scales and mechanisms (mech_seed), then samples n rows (seed).
/// Columns are generated in topological order; roots are pure noise.
GeneratedData generate_dataset(const AnmSpec& spec, int n, std::uint64_t seed);

/// Convenience wrapper returning only the observations.
Dataset sample_dataset(const AnmSpec& spec, int n, std::uint64_t seed);

/// Dataset CSV: header row of labels, then n rows of %.17g doubles.
void write_dataset_csv(const Dataset& ds, std::ostream& os);
void write_dataset_csv(const Dataset& ds, const std::string& path);
Dataset read_dataset_csv(std::istream& is);
Dataset read_dataset_csv(const std::string& path);

}  // namespace diffan
