#include "koopctl/runtime.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "koopctl/errors.hpp"
#include "koopctl/json_io.hpp"

namespace koopctl {

StepResult controller_step(const DualLoopController& ctrl, const ControllerState& state,
                           const Vec& y) {
    if (!state.xhat.allFinite() || !state.xQ.allFinite())
        throw NumericError("controller_step: non-finite controller state");
    StepResult r;
    const Vec yhat = ctrl.C2 * state.xhat;
    r.f = yhat - y;
    r.uk = ctrl.gains.K * state.xhat;
    if (ctrl.enabled_robust_loop) {
        r.uf = ctrl.qfilter.CQ * state.xQ;
    } else {
        r.uf = Vec::Zero(r.uk.size());
    }
    r.u = r.uk + r.uf;
    r.next.xhat = ctrl.model.A * state.xhat + ctrl.model.B2 * r.u + ctrl.gains.L * r.f;
    if (ctrl.enabled_robust_loop) {
        r.next.xQ = ctrl.qfilter.AQ * state.xQ + ctrl.qfilter.BQ * r.f;
    } else {
        r.next.xQ = state.xQ;
    }
    return r;
}

Vec measure_output(const Vec& plant_state, const BasisLibrary& basis, double sigma,
                   std::uint64_t seed, std::int64_t step, bool lifted) {
    Vec noisy = plant_state;
    if (sigma > 0.0) {
        // splitmix-style mix so each (seed, step) pair owns its own stream
        std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(step));
        s ^= s >> 30;
        s *= 0xbf58476d1ce4e5b9ULL;
        s ^= s >> 27;
        std::mt19937_64 rng(s);
        std::normal_distribution<double> gauss(0.0, sigma);
        for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy(i) += gauss(rng);
    }
    return lifted ? basis.lift(noisy) : noisy;
}

namespace {

Trajectory run_loop(const DualLoopController& ctrl, const Vec& x0_physical,
                    const SimulationOptions& opts,
                    const std::function<Vec(const Vec&, const Vec&)>& advance,
                    const std::function<Vec(const Vec&, std::int64_t)>& measure,
                    const Vec& plant_x0) {
    const double dt = ctrl.model.dt;
    if (dt <= 0.0) throw std::invalid_argument("simulate: model dt must be positive");
    const auto T = static_cast<Eigen::Index>(std::llround(opts.horizon / dt));
    const int n = ctrl.model.basis.state_dim();
    const int m = static_cast<int>(ctrl.model.B2.cols());
    const int M = ctrl.model.basis.lifted_dim();

    Mat C1, D12;
    if (opts.C1 && opts.D12) {
        C1 = *opts.C1;
        D12 = *opts.D12;
    } else {
        PerformanceChannel ch = default_performance_channel(M, n, m);
        C1 = ch.C1;
        D12 = ch.D12;
    }

    Trajectory traj;
    traj.t.resize(T + 1);
    traj.X.resize(n, T + 1);
    traj.Xhat.resize(n, T);
    traj.U.resize(m, T);
    traj.Uk.resize(m, T);
    traj.Uf.resize(m, T);
    traj.f_norm.resize(T);
    traj.Z.resize(C1.rows(), T);

    Vec xp = plant_x0;  // plant state (physical or lifted, depending on the loop)
    traj.X.col(0) = x0_physical;

    ControllerState state;
    const Vec y0 = measure(xp, 0);
    if (opts.observer_from_first_measurement) {
        state.xhat = ctrl.lifted_feedback ? y0 : ctrl.model.basis.lift(y0);
    } else {
        state.xhat = Vec::Zero(M);
    }
    state.xQ = Vec::Zero(ctrl.qfilter.AQ.rows() > 0 ? ctrl.qfilter.AQ.rows() : 2 * M);

    for (Eigen::Index k = 0; k < T; ++k) {
        traj.t(k) = static_cast<double>(k) * dt;
        const Vec y = k == 0 ? y0 : measure(xp, k);
        StepResult step = controller_step(ctrl, state, y);
        traj.Xhat.col(k) = state.xhat.head(n);
        traj.U.col(k) = step.u;
        traj.Uk.col(k) = step.uk;
        traj.Uf.col(k) = step.uf;
        traj.f_norm(k) = step.f.norm();
        traj.Z.col(k) = C1 * ctrl.model.basis.lift(traj.X.col(k)) + D12 * step.u;
        state = step.next;

        xp = advance(xp, step.u);
        traj.X.col(k + 1) = xp.head(n);
        if (traj.X.col(k + 1).norm() > opts.divergence_guard || !xp.allFinite())
            throw NumericError("simulate: state diverged at step " + std::to_string(k + 1));
    }
    traj.t(T) = static_cast<double>(T) * dt;
    return traj;
}

}  // namespace

Trajectory simulate_closed_loop(const NonlinearPlant& plant, const DualLoopController& ctrl,
                                const Vec& x0, const SimulationOptions& opts) {
    const double dt = ctrl.model.dt;
    auto advance = [&](const Vec& x, const Vec& u) { return rk4_step(plant, x, u, dt); };
    auto measure = [&](const Vec& x, std::int64_t step) {
        return measure_output(x, ctrl.model.basis, opts.sigma, opts.seed, step,
                              ctrl.lifted_feedback);
    };
    return run_loop(ctrl, x0, opts, advance, measure, x0);
}

Trajectory simulate_model_loop(const DualLoopController& ctrl, const Vec& x0,
                               const SimulationOptions& opts) {
    const Mat& A = ctrl.model.A;
    const Mat& B2 = ctrl.model.B2;
    auto advance = [&](const Vec& z, const Vec& u) -> Vec { return A * z + B2 * u; };
    auto measure = [&](const Vec& z, std::int64_t step) -> Vec {
        if (opts.sigma == 0.0) return ctrl.lifted_feedback ? z : Vec(z.head(ctrl.C2.rows()));
        // noise acts on the physical read-back before re-lifting
        Vec x = z.head(ctrl.model.basis.state_dim());
        return measure_output(x, ctrl.model.basis, opts.sigma, opts.seed, step,
                              ctrl.lifted_feedback);
    };
    Vec z0 = ctrl.model.basis.lift(x0);
    return run_loop(ctrl, x0, opts, advance, measure, z0);
}

ResidualMetrics residual_metrics(const Trajectory& traj, double settle_threshold) {
    if (traj.f_norm.size() == 0) throw std::invalid_argument("residual_metrics: empty trajectory");
    ResidualMetrics m;
    m.rms_f = std::sqrt(traj.f_norm.squaredNorm() / static_cast<double>(traj.f_norm.size()));
    m.final_f_norm = traj.f_norm(traj.f_norm.size() - 1);
    m.peak_f_norm = traj.f_norm.maxCoeff();
    m.final_state_norm = traj.X.col(traj.X.cols() - 1).norm();
    m.settling_time = -1.0;
    for (Eigen::Index k = 0; k < traj.X.cols(); ++k) {
        if (traj.X.col(k).norm() < settle_threshold) {
            bool stays = true;
            for (Eigen::Index j = k; j < traj.X.cols(); ++j) {
                if (traj.X.col(j).norm() >= settle_threshold) {
                    stays = false;
                    break;
                }
            }
            if (stays) {
                m.settling_time = traj.t(k);
                break;
            }
        }
    }
    return m;
}

void write_run_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    const Eigen::Index n = traj.X.rows();
    const Eigen::Index m = traj.U.rows();
    auto input_header = [&](const std::string& base) {
        std::string h;
        for (Eigen::Index i = 0; i < m; ++i) {
            h += ',' + base;
            if (m > 1) h += std::to_string(i + 1);
        }
        return h;
    };
    out << 't';
    for (Eigen::Index i = 0; i < n; ++i) out << ",x" << (i + 1);
    out << input_header("u") << input_header("uk") << input_header("uf") << ",fnorm";
    for (Eigen::Index i = 0; i < n; ++i) out << ",xhat" << (i + 1);
    out << '\n';
    const Eigen::Index T = traj.U.cols();
    for (Eigen::Index k = 0; k < T; ++k) {
        out << format_double(traj.t(k));
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(traj.X(i, k));
        for (Eigen::Index i = 0; i < m; ++i) out << ',' << format_double(traj.U(i, k));
        for (Eigen::Index i = 0; i < m; ++i) out << ',' << format_double(traj.Uk(i, k));
        for (Eigen::Index i = 0; i < m; ++i) out << ',' << format_double(traj.Uf(i, k));
        out << ',' << format_double(traj.f_norm(k));
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(traj.Xhat(i, k));
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace koopctl
