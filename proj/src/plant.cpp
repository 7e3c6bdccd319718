#include "koopctl/plant.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "koopctl/errors.hpp"
#include "koopctl/json_io.hpp"

namespace koopctl {

Vec vdp_vector_field(const Vec& x, double u, double mu) {
    Vec dx(2);
    dx(0) = x(1);
    dx(1) = mu * (1.0 - x(0) * x(0)) * x(1) - x(0) + u;
    return dx;
}

NonlinearPlant make_vdp_plant(double mu) {
    NonlinearPlant p;
    p.state_dim = 2;
    p.input_dim = 1;
    p.vector_field = [mu](const Vec& x, const Vec& u) { return vdp_vector_field(x, u(0), mu); };
    p.output_map = [](const Vec& x) { return x; };
    return p;
}

Vec rk4_step(const NonlinearPlant& plant, const Vec& x, const Vec& u, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("rk4_step: dt must be positive");
    const auto& f = plant.vector_field;
    Vec k1 = f(x, u);
    Vec k2 = f(x + 0.5 * dt * k1, u);
    Vec k3 = f(x + 0.5 * dt * k2, u);
    Vec k4 = f(x + dt * k3, u);
    Vec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw NumericError("rk4_step: non-finite field evaluation");
    return next;
}

SnapshotData generate_snapshots(const NonlinearPlant& plant, const SnapshotOptions& opts) {
    if (opts.n_pairs <= 0) throw std::invalid_argument("generate_snapshots: empty data request");
    if (opts.n_pairs < plant.state_dim + plant.input_dim)
        throw std::invalid_argument("generate_snapshots: need at least state_dim+input_dim pairs");
    if (opts.x0_range.lo > opts.x0_range.hi || opts.u_range.lo > opts.u_range.hi)
        throw std::invalid_argument("generate_snapshots: empty range");
    if (opts.segment_length <= 0)
        throw std::invalid_argument("generate_snapshots: segment_length must be positive");

    const int n = plant.state_dim;
    const int m = plant.input_dim;
    const int N = opts.n_pairs;
    const int p = static_cast<int>(plant.output_map(Vec::Zero(n)).size());

    SnapshotData data;
    data.X1.resize(n, N);
    data.X2.resize(n, N);
    data.U.resize(m, N);
    data.Y.resize(p, N);
    data.dt = opts.dt;
    data.seed = opts.seed;

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> x0_dist(opts.x0_range.lo, opts.x0_range.hi);
    std::uniform_real_distribution<double> u_dist(opts.u_range.lo, opts.u_range.hi);

    int k = 0;
    while (k < N) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x(i) = x0_dist(rng);
        for (int s = 0; s < opts.segment_length && k < N; ++s, ++k) {
            Vec u(m);
            for (int i = 0; i < m; ++i) u(i) = u_dist(rng);
            Vec xn = rk4_step(plant, x, u, opts.dt);
            data.X1.col(k) = x;
            data.X2.col(k) = xn;
            data.U.col(k) = u;
            data.Y.col(k) = plant.output_map(xn);
            x = xn;
        }
    }
    return data;
}

SnapshotData add_measurement_noise(const SnapshotData& data, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("add_measurement_noise: sigma must be >= 0");
    SnapshotData noisy = data;
    if (sigma == 0.0) return noisy;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    auto perturb = [&](Mat& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) += gauss(rng);
    };
    perturb(noisy.X1);
    perturb(noisy.X2);
    perturb(noisy.Y);
    return noisy;
}

void write_trajectory_csv(const std::string& path, const Vec& t, const Mat& X, const Mat& U,
                          const Mat& Y) {
    const Eigen::Index N = t.size();
    if (X.cols() != N || U.cols() != N || Y.cols() != N)
        throw std::invalid_argument("write_trajectory_csv: column count mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "t";
    for (Eigen::Index i = 0; i < X.rows(); ++i) out << ",x" << (i + 1);
    for (Eigen::Index i = 0; i < U.rows(); ++i) out << ",u" << (i + 1);
    for (Eigen::Index i = 0; i < Y.rows(); ++i) out << ",y" << (i + 1);
    out << '\n';
    for (Eigen::Index k = 0; k < N; ++k) {
        out << format_double(t(k));
        for (Eigen::Index i = 0; i < X.rows(); ++i) out << ',' << format_double(X(i, k));
        for (Eigen::Index i = 0; i < U.rows(); ++i) out << ',' << format_double(U(i, k));
        for (Eigen::Index i = 0; i < Y.rows(); ++i) out << ',' << format_double(Y(i, k));
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace koopctl
