#include "diffan/scm.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace diffan {

std::string to_string(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::Gaussian: return "gaussian";
        case NoiseFamily::Exponential: return "exponential";
        case NoiseFamily::Laplace: return "laplace";
    }
    return "gaussian";
}

NoiseFamily noise_family_from_string(const std::string& s) {
    if (s == "gaussian") return NoiseFamily::Gaussian;
    if (s == "exponential") return NoiseFamily::Exponential;
    if (s == "laplace") return NoiseFamily::Laplace;
    throw ValidationError("unknown noise family: " + s);
}

void AnmSpec::validate() const {
    require(graph.d >= 1, "AnmSpec: graph is empty");
    require(noise_scale_lo > 0.0 && noise_scale_lo <= noise_scale_hi,
            "AnmSpec: need 0 < noise_scale_lo <= noise_scale_hi");
    require(gp_bandwidth > 0.0, "AnmSpec: need gp_bandwidth > 0");
}

namespace {

constexpr int kExactGpLimit = 3000;
constexpr int kRffFeatures = 256;

MatrixXd rbf_kernel(const MatrixXd& a, const MatrixXd& b, double bandwidth) {
    // k(u, v) = exp(-|u-v|^2 / (2 bw^2))
    MatrixXd k(a.rows(), b.rows());
    double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j)
            k(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
    return k;
}

struct UniqueRows {
    MatrixXd rows;            // m_unique x p
    std::vector<int> lookup;  // original row -> unique row
};

UniqueRows dedupe_rows(const MatrixXd& x) {
    std::map<std::vector<double>, int> seen;
    UniqueRows out;
    out.lookup.resize(x.rows());
    std::vector<Eigen::Index> order;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::vector<double> key(x.row(i).begin(), x.row(i).end());
        auto [it, inserted] = seen.emplace(std::move(key), static_cast<int>(order.size()));
        if (inserted) order.push_back(i);
        out.lookup[i] = it->second;
    }
    out.rows.resize(order.size(), x.cols());
    for (size_t r = 0; r < order.size(); ++r) out.rows.row(r) = x.row(order[r]);
    return out;
}

struct GpRealization {
    VectorXd values;  // at the requested rows
    std::shared_ptr<Mechanism> mech;
};

GpRealization draw_gp(const MatrixXd& parent_values, double bandwidth, std::uint64_t seed) {
    require(parent_values.rows() >= 1 && parent_values.cols() >= 1,
            "gp_draw: need m >= 1 and p >= 1");
    require(bandwidth > 0.0, "gp_draw: need bandwidth > 0");
    Rng rng = make_rng(mix_seed(seed, 0x69D));
    std::normal_distribution<double> normal(0.0, 1.0);
    GpRealization out;

    if (parent_values.rows() <= kExactGpLimit) {
        UniqueRows uq = dedupe_rows(parent_values);
        Eigen::Index m = uq.rows.rows();
        MatrixXd kmat = rbf_kernel(uq.rows, uq.rows, bandwidth);
        VectorXd z(m);
        for (Eigen::Index i = 0; i < m; ++i) z[i] = normal(rng);

        double jitter = 1e-6;
        Eigen::LLT<MatrixXd> llt;
        for (;;) {
            MatrixXd kj = kmat + jitter * MatrixXd::Identity(m, m);
            llt.compute(kj);
            if (llt.info() == Eigen::Success) break;
            jitter *= 2.0;
            if (jitter > 1e-3)
                throw NumericError("gp_draw: kernel matrix not positive definite after jitter");
        }
        VectorXd draw = llt.matrixL() * z;
        VectorXd alpha = llt.solve(draw);
        // The realized mechanism is the interpolant through the support; its
        // values at the support rows are what the dataset uses, so mechanism
        // and data agree exactly.
        auto mech = std::make_shared<GpInterpolantMechanism>(uq.rows, alpha, bandwidth);
        VectorXd at_support = mech->eval(uq.rows);
        out.values.resize(parent_values.rows());
        for (Eigen::Index i = 0; i < parent_values.rows(); ++i)
            out.values[i] = at_support[uq.lookup[i]];
        out.mech = std::move(mech);
    } else {
        Eigen::Index p = parent_values.cols();
        MatrixXd omega(p, kRffFeatures);
        VectorXd phase(kRffFeatures), w(kRffFeatures);
        for (Eigen::Index j = 0; j < kRffFeatures; ++j) {
            for (Eigen::Index i = 0; i < p; ++i) omega(i, j) = normal(rng) / bandwidth;
            w[j] = normal(rng);
        }
        std::uniform_real_distribution<double> unif(0.0, 2.0 * M_PI);
        for (Eigen::Index j = 0; j < kRffFeatures; ++j) phase[j] = unif(rng);
        auto mech = std::make_shared<RffMechanism>(omega, phase, w);
        out.values = mech->eval(parent_values);
        out.mech = std::move(mech);
    }
    for (Eigen::Index i = 0; i < out.values.size(); ++i)
        if (!std::isfinite(out.values[i]))
            throw NumericError("gp_draw: non-finite function value");
    return out;
}

double sample_noise(NoiseFamily family, double scale, Rng& rng) {
    switch (family) {
        case NoiseFamily::Gaussian: {
            std::normal_distribution<double> n(0.0, scale);
            return n(rng);
        }
        case NoiseFamily::Exponential: {
            // Centered so all families have zero-mean noise.
            std::exponential_distribution<double> e(1.0 / scale);
            return e(rng) - scale;
        }
        case NoiseFamily::Laplace: {
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            double v = u(rng);
            return -scale * (v < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(v));
        }
    }
    return 0.0;
}

}  // namespace

GpInterpolantMechanism::GpInterpolantMechanism(MatrixXd support, VectorXd weights,
                                               double bandwidth)
    : support_(std::move(support)), weights_(std::move(weights)), bandwidth_(bandwidth) {}

VectorXd GpInterpolantMechanism::eval(const MatrixXd& parent_values) const {
    require(parent_values.cols() == support_.cols(),
            "GpInterpolantMechanism: parent dimension mismatch");
    return rbf_kernel(parent_values, support_, bandwidth_) * weights_;
}

RffMechanism::RffMechanism(MatrixXd omega, VectorXd phase, VectorXd weights)
    : omega_(std::move(omega)), phase_(std::move(phase)), weights_(std::move(weights)) {}

VectorXd RffMechanism::eval(const MatrixXd& parent_values) const {
    require(parent_values.cols() == omega_.rows(), "RffMechanism: parent dimension mismatch");
    int r = static_cast<int>(omega_.cols());
    MatrixXd proj = parent_values * omega_;  // k x R
    proj.rowwise() += phase_.transpose();
    double norm = std::sqrt(2.0 / r);
    return norm * (proj.array().cos().matrix() * weights_);
}

VectorXd RealizedAnm::mech_value(int node, const MatrixXd& x) const {
    require(node >= 0 && node < graph.d, "RealizedAnm: node out of range");
    if (!mechanisms[node]) return VectorXd::Zero(x.rows());
    const auto& pa = parents[node];
    MatrixXd pv(x.rows(), pa.size());
    for (size_t c = 0; c < pa.size(); ++c) pv.col(c) = x.col(pa[c]);
    return mechanisms[node]->eval(pv);
}

VectorXd gp_draw(const MatrixXd& parent_values, double bandwidth, std::uint64_t seed) {
    return draw_gp(parent_values, bandwidth, seed).values;
}

GeneratedData generate_dataset(const AnmSpec& spec, int n, std::uint64_t seed) {
    spec.validate();
    require(n >= 1, "generate_dataset: need n >= 1");
    int d = spec.graph.d;

    RealizedAnm anm;
    anm.graph = spec.graph;
    anm.noise_family = spec.noise_family;
    anm.noise_scale.resize(d);
    anm.parents.resize(d);
    anm.mechanisms.assign(d, nullptr);

    Rng mech_rng = make_rng(mix_seed(spec.mech_seed, 0x3C3));
    std::uniform_real_distribution<double> scale_draw(spec.noise_scale_lo, spec.noise_scale_hi);
    std::vector<std::uint64_t> node_mech_seed(d);
    for (int i = 0; i < d; ++i) {
        anm.noise_scale[i] = scale_draw(mech_rng);
        anm.parents[i] = spec.graph.parents(i);
        node_mech_seed[i] = mech_rng();
    }

    // Noise drawn per node in index order so results do not depend on the
    // tie-breaking of the topological sort.
    Rng noise_rng = make_rng(mix_seed(seed, 0xDA7A));
    MatrixXd eps(n, d);
    for (int i = 0; i < d; ++i)
        for (int r = 0; r < n; ++r)
            eps(r, i) = sample_noise(spec.noise_family, anm.noise_scale[i], noise_rng);

    Dataset ds;
    ds.x.resize(n, d);
    ds.labels = spec.graph.labels;
    Ordering topo = topological_sort(spec.graph);
    for (int node : topo.pi) {
        const auto& pa = anm.parents[node];
        if (pa.empty()) {
            ds.x.col(node) = eps.col(node);
            continue;
        }
        MatrixXd pv(n, pa.size());
        for (size_t c = 0; c < pa.size(); ++c) pv.col(c) = ds.x.col(pa[c]);
        GpRealization gp = draw_gp(pv, spec.gp_bandwidth, node_mech_seed[node]);
        anm.mechanisms[node] = gp.mech;
        ds.x.col(node) = gp.values + eps.col(node);
    }
    return {std::move(ds), std::move(anm)};
}

Dataset sample_dataset(const AnmSpec& spec, int n, std::uint64_t seed) {
    return generate_dataset(spec, n, seed).data;
}

void write_dataset_csv(const Dataset& ds, std::ostream& os) {
    for (int j = 0; j < ds.d(); ++j) os << (j ? "," : "") << ds.labels[j];
    os << "\n";
    char buf[40];
    for (int i = 0; i < ds.n(); ++i) {
        for (int j = 0; j < ds.d(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.x(i, j));
            os << (j ? "," : "") << buf;
        }
        os << "\n";
    }
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream os(path);
    require(os.good(), "write_dataset_csv: cannot open " + path);
    write_dataset_csv(ds, os);
}

Dataset read_dataset_csv(std::istream& is) {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), "read_dataset_csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> labels;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) labels.push_back(cell);
    }
    int d = static_cast<int>(labels.size());
    require(d >= 1, "read_dataset_csv: no columns");
    std::vector<double> values;
    int n = 0;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0' || !std::isfinite(v))
                throw ValidationError("read_dataset_csv: non-numeric value in column " +
                                      std::to_string(col) + " (" + labels[std::min(col, d - 1)] +
                                      "), row " + std::to_string(n + 1));
            values.push_back(v);
            ++col;
        }
        require(col == d, "read_dataset_csv: row " + std::to_string(n + 1) + " has wrong width");
        ++n;
    }
    require(n >= 1, "read_dataset_csv: no data rows");
    Dataset ds;
    ds.labels = std::move(labels);
    ds.x.resize(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) ds.x(i, j) = values[static_cast<size_t>(i) * d + j];
    return ds;
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "read_dataset_csv: cannot open " + path);
    return read_dataset_csv(is);
}

}  // namespace diffan
