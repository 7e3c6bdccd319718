#include "koopctl/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "koopctl/bounds.hpp"
#include "koopctl/errors.hpp"
#include "koopctl/riccati.hpp"
#include "koopctl/runtime.hpp"

namespace koopctl {

namespace fs = std::filesystem;

namespace {

std::uint64_t noise_seed(std::uint64_t base, size_t idx) {
    return base * 1000003ULL + 7919ULL * (idx + 1);
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

int thread_budget() {
    if (const char* env = std::getenv("KOOPCTL_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

struct FreeRunMetrics {
    double decay_rate = 0.0;
    double spectral_radius_A = 0.0;
};

FreeRunMetrics free_run_metrics(const KoopmanModel& model, const Vec& x0, double horizon) {
    FreeRunMetrics fr;
    fr.spectral_radius_A = spectral_radius(model.A);
    const auto T = static_cast<size_t>(std::llround(horizon / model.dt));
    std::vector<Vec> u(T, Vec::Zero(model.B2.cols()));
    Prediction pred = koopman_predict(model, x0, u);
    const double n0 = pred.states.col(0).norm();
    const double nT = std::max(pred.states.col(pred.states.cols() - 1).norm(), 1e-12);
    fr.decay_rate = std::log(n0 / nT) / horizon;
    return fr;
}

}  // namespace

std::string data_path(const ExperimentConfig& cfg, double sigma) {
    return join(cfg.output_dir, "data_sigma_" + sigma_tag(sigma) + ".json");
}
std::string snapshots_csv_path(const ExperimentConfig& cfg, double sigma) {
    return join(cfg.output_dir, "snapshots_sigma_" + sigma_tag(sigma) + ".csv");
}
std::string model_path(const ExperimentConfig& cfg, double sigma) {
    return join(cfg.output_dir, "model_sigma_" + sigma_tag(sigma) + ".json");
}
std::string fit_report_path(const ExperimentConfig& cfg, double sigma) {
    return join(cfg.output_dir, "fit_report_sigma_" + sigma_tag(sigma) + ".json");
}
std::string bounds_path(const ExperimentConfig& cfg, double sigma) {
    return join(cfg.output_dir, "bounds_sigma_" + sigma_tag(sigma) + ".json");
}
std::string gains_path(const ExperimentConfig& cfg, double sigma) {
    return join(cfg.output_dir, "gains_sigma_" + sigma_tag(sigma) + ".json");
}
std::string controller_path(const ExperimentConfig& cfg, double sigma) {
    return join(cfg.output_dir, "controller_sigma_" + sigma_tag(sigma) + ".json");
}
std::string synthesis_report_path(const ExperimentConfig& cfg, double sigma) {
    return join(cfg.output_dir, "synthesis_report_sigma_" + sigma_tag(sigma) + ".json");
}
std::string run_csv_path(const ExperimentConfig& cfg, double sigma, std::uint64_t seed,
                         const std::string& controller) {
    return join(cfg.output_dir, "vdp_" + sigma_tag(sigma) + "_" + std::to_string(seed) + "_" +
                                    controller + ".csv");
}
std::string metrics_path(const ExperimentConfig& cfg) {
    return join(cfg.output_dir, "metrics.json");
}

json snapshot_to_json(const SnapshotData& data) {
    json j;
    j["dt"] = data.dt;
    j["seed"] = data.seed;
    j["X1"] = mat_to_json(data.X1);
    j["X2"] = mat_to_json(data.X2);
    j["U"] = mat_to_json(data.U);
    j["Y"] = mat_to_json(data.Y);
    return j;
}

SnapshotData snapshot_from_json(const json& j) {
    SnapshotData d;
    d.dt = j.at("dt").get<double>();
    d.seed = j.at("seed").get<std::uint64_t>();
    d.X1 = json_to_mat(j.at("X1"));
    d.X2 = json_to_mat(j.at("X2"));
    d.U = json_to_mat(j.at("U"));
    d.Y = json_to_mat(j.at("Y"));
    if (d.X1.cols() != d.X2.cols() || d.X1.cols() != d.U.cols() || d.X1.cols() != d.Y.cols())
        throw IoError("snapshot JSON: column counts differ");
    return d;
}

ExperimentConfig apply_overrides(ExperimentConfig cfg, const std::optional<std::string>& out,
                                 const std::optional<std::uint64_t>& seed) {
    if (out) cfg.output_dir = *out;
    if (seed) cfg.data.seed = *seed;
    return cfg;
}

void cmd_generate(const ExperimentConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.output_dir);

    NonlinearPlant plant = make_vdp_plant(cfg.mu);
    SnapshotData base = generate_snapshots(plant, cfg.data);
    for (size_t i = 0; i < cfg.sigmas.size(); ++i) {
        const double sigma = cfg.sigmas[i];
        SnapshotData noisy = add_measurement_noise(base, sigma, noise_seed(cfg.data.seed, i));
        json j = snapshot_to_json(noisy);
        j["sigma"] = sigma;
        save_json(data_path(cfg, sigma), j);

        Vec t(noisy.X1.cols());
        for (Eigen::Index k = 0; k < t.size(); ++k) t(k) = static_cast<double>(k) * noisy.dt;
        write_trajectory_csv(snapshots_csv_path(cfg, sigma), t, noisy.X1, noisy.U, noisy.Y);
    }
}

void cmd_identify(const ExperimentConfig& cfg) {
    BasisLibrary basis = make_basis(cfg);
    NonlinearPlant plant = make_vdp_plant(cfg.mu);

    // fresh trajectories for the held-out one-step check
    SnapshotOptions held = cfg.data;
    held.seed = cfg.data.seed + 1;
    SnapshotData heldout = generate_snapshots(plant, held);

    for (double sigma : cfg.sigmas) {
        SnapshotData data = snapshot_from_json(load_json(data_path(cfg, sigma)));
        EdmdFit fit = edmd_fit(data, basis);
        save_json(model_path(cfg, sigma), model_to_json(fit.model));

        double se = 0.0;
        for (Eigen::Index k = 0; k < heldout.X1.cols(); ++k) {
            Vec z = fit.model.A * basis.lift(heldout.X1.col(k)) +
                    fit.model.B2 * heldout.U.col(k);
            se += (z.head(2) - heldout.X2.col(k)).squaredNorm();
        }
        const double rms =
            std::sqrt(se / (static_cast<double>(heldout.X1.cols()) * 2.0));
        FreeRunMetrics fr = free_run_metrics(fit.model, cfg.simulation.x0, 5.0);

        json rep;
        rep["sigma"] = sigma;
        rep["state_residual"] = fit.state_residual;
        rep["output_residual"] = fit.output_residual;
        rep["regressor_rank"] = fit.regressor_rank;
        rep["rank_deficient"] = fit.rank_deficient;
        rep["rms_one_step_heldout"] = rms;
        rep["free_run_decay_rate"] = fr.decay_rate;
        rep["spectral_radius_A"] = fr.spectral_radius_A;
        save_json(fit_report_path(cfg, sigma), rep);
    }
}

namespace {

// Data-driven sector estimate: the spread between fits on disjoint halves of
// the data set measures how strongly this noise level moves the regression.
double empirical_sector_bound(const SnapshotData& data, const BasisLibrary& basis) {
    const Eigen::Index N = data.X1.cols();
    const Eigen::Index half = N / 2;
    auto slice = [&](Eigen::Index start, Eigen::Index len) {
        SnapshotData s;
        s.X1 = data.X1.middleCols(start, len);
        s.X2 = data.X2.middleCols(start, len);
        s.U = data.U.middleCols(start, len);
        s.Y = data.Y.middleCols(start, len);
        s.dt = data.dt;
        s.seed = data.seed;
        return s;
    };
    EdmdFit f1 = edmd_fit(slice(0, half), basis);
    EdmdFit f2 = edmd_fit(slice(half, N - half), basis);
    Mat diff(f1.model.A.rows(), f1.model.A.cols() + f1.model.B2.cols());
    diff << f1.model.A - f2.model.A, f1.model.B2 - f2.model.B2;
    return spectral_norm(diff);
}

}  // namespace

void cmd_synthesize(const ExperimentConfig& cfg) {
    const double sigma = cfg.synthesis.sigma;
    BasisLibrary basis = make_basis(cfg);
    KoopmanModel model = model_from_json(load_json(model_path(cfg, sigma)));
    SnapshotData data = snapshot_from_json(load_json(data_path(cfg, sigma)));

    const int M = basis.lifted_dim();
    const int m = static_cast<int>(model.B2.cols());
    const Mat C2 = Mat::Identity(M, M);  // lifted-state feedback

    NoiseParams np;
    np.sigma = sigma;
    np.sigma_y = sigma;
    np.confidence = cfg.confidence;
    MismatchBounds bounds = compute_mismatch_bounds(data, basis, m, np);

    double sector_U = bounds.U;
    double sector_V = 0.0;  // identity output map: no dC channel in this mode
    std::string sector_source;
    switch (cfg.synthesis.sector_source) {
        case SectorSource::Bounds:
            sector_source = "bounds";
            break;
        case SectorSource::ScaledBounds:
            sector_U = bounds.U * cfg.synthesis.sector_scale;
            sector_source = "scaled-bounds";
            break;
        case SectorSource::Empirical:
            sector_U = empirical_sector_bound(data, basis) * cfg.synthesis.sector_scale;
            sector_source = "empirical";
            break;
        case SectorSource::Fixed:
            sector_U = cfg.synthesis.fixed_U;
            sector_V = cfg.synthesis.fixed_V;
            sector_source = "fixed";
            break;
    }

    LqgWeights weights = cfg.lqg;
    weights.vn = std::max(sigma * sigma, cfg.vn_floor);
    NominalGains gains = lqg_design(model, C2, weights);
    PerformanceChannel channel = default_performance_channel(M, 2, m, cfg.d12_weight);

    MismatchBounds used = bounds;
    used.U = sector_U;
    used.V = sector_V;
    SectorMatrices sm = sector_matrices(sector_U, sector_V, M, m);
    used.U1 = sm.U1;
    used.U2 = sm.U2;
    used.V1 = sm.V1;

    AugmentedPlant aug = build_augmented(model, C2, gains, channel, used);

    GammaSearchOptions opts;
    opts.lambda_grid = cfg.synthesis.lambda_grid;
    opts.gamma_min = cfg.synthesis.gamma_min;
    opts.gamma_max = cfg.synthesis.gamma_max;
    opts.gamma_rel_tol = cfg.synthesis.gamma_rel_tol;
    SynthesisResult result = search_gamma_lambda(aug, opts);

    json jb = bounds_to_json(bounds);
    jb["sector_source"] = sector_source;
    jb["sector_U_used"] = sector_U;
    jb["sector_V_used"] = sector_V;
    save_json(bounds_path(cfg, sigma), jb);
    save_json(gains_path(cfg, sigma), gains_to_json(gains));

    AnalysisResult verification;
    if (result.feasible)
        verification = verify_closed_loop(aug, result.qfilter, result.lambda, result.gamma);
    save_json(synthesis_report_path(cfg, sigma), synthesis_report_to_json(result, verification));

    if (!result.feasible)
        throw NumericError("synthesis infeasible over the whole (lambda, gamma) grid; see " +
                           synthesis_report_path(cfg, sigma));

    json jc;
    jc["sigma"] = sigma;
    jc["lifted_feedback"] = true;
    jc["lambda"] = result.lambda;
    jc["gamma"] = result.gamma;
    jc["K"] = mat_to_json(gains.K);
    jc["L"] = mat_to_json(gains.L);
    jc["qfilter"] = qfilter_to_json(result.qfilter);
    jc["verification_pass"] = verification.status == LMIStatus::Feasible;
    save_json(controller_path(cfg, sigma), jc);
}

namespace {

struct RunSpec {
    double sigma = 0.0;
    std::uint64_t seed = 0;
    bool dual = false;
};

json run_one(const ExperimentConfig& cfg, const NonlinearPlant& plant,
             const DualLoopController& base, const RunSpec& spec) {
    DualLoopController ctrl = base;
    ctrl.enabled_robust_loop = spec.dual;
    SimulationOptions opts;
    opts.horizon = cfg.simulation.horizon;
    opts.sigma = spec.sigma;
    opts.seed = spec.seed;

    const std::string name = spec.dual ? "dual" : "lqg";
    json entry;
    entry["sigma"] = spec.sigma;
    entry["seed"] = spec.seed;
    entry["controller"] = name;
    try {
        Trajectory traj = simulate_closed_loop(plant, ctrl, cfg.simulation.x0, opts);
        write_run_csv(run_csv_path(cfg, spec.sigma, spec.seed, name), traj);
        ResidualMetrics m = residual_metrics(traj, cfg.simulation.settle_threshold);
        entry["final_state_norm"] = m.final_state_norm;
        entry["settling_time"] = m.settling_time;
        entry["rms_f"] = m.rms_f;
        entry["final_f_norm"] = m.final_f_norm;
        entry["peak_f_norm"] = m.peak_f_norm;
        entry["diverged"] = false;
    } catch (const NumericError& e) {
        entry["diverged"] = true;
        entry["error"] = e.what();
    }
    return entry;
}

}  // namespace

void cmd_simulate(const ExperimentConfig& cfg) {
    NonlinearPlant plant = make_vdp_plant(cfg.mu);

    json all = json::array();
    json table = json::array();
    for (double sigma : cfg.sigmas) {
        if (!fs::exists(controller_path(cfg, sigma))) {
            std::cerr << "koopctl: no controller for sigma=" << sigma << ", skipping\n";
            continue;
        }
        json jc = load_json(controller_path(cfg, sigma));
        KoopmanModel model = model_from_json(load_json(model_path(cfg, sigma)));
        DualLoopController base;
        base.model = model;
        base.C2 = Mat::Identity(model.A.rows(), model.A.cols());
        base.gains.K = json_to_mat(jc.at("K"));
        base.gains.L = json_to_mat(jc.at("L"));
        base.qfilter = qfilter_from_json(jc.at("qfilter"));
        base.lifted_feedback = jc.at("lifted_feedback").get<bool>();

        std::vector<RunSpec> specs;
        for (std::uint64_t seed : cfg.simulation.seeds)
            for (bool dual : {false, true}) specs.push_back(RunSpec{sigma, seed, dual});

        std::vector<json> results(specs.size());
        std::atomic<size_t> next{0};
        const int nthreads =
            std::max(1, std::min<int>(thread_budget(), static_cast<int>(specs.size())));
        auto worker = [&]() {
            for (size_t i = next.fetch_add(1); i < specs.size(); i = next.fetch_add(1))
                results[i] = run_one(cfg, plant, base, specs[i]);
        };
        std::vector<std::thread> pool;
        for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();

        int dual_converged = 0, lqg_stuck = 0;
        for (size_t i = 0; i < specs.size(); ++i) {
            all.push_back(results[i]);
            if (results[i].value("diverged", true)) {
                if (!specs[i].dual) ++lqg_stuck;  // divergence is a failure to regulate
                continue;
            }
            const double fin = results[i].at("final_state_norm").get<double>();
            if (specs[i].dual && fin < cfg.simulation.settle_threshold) ++dual_converged;
            if (!specs[i].dual && fin > cfg.simulation.settle_threshold) ++lqg_stuck;
        }
        table.push_back({{"sigma", sigma},
                         {"n_seeds", cfg.simulation.seeds.size()},
                         {"dual_converged", dual_converged},
                         {"lqg_not_converged", lqg_stuck}});
    }
    json out;
    out["runs"] = std::move(all);
    out["comparison"] = std::move(table);
    save_json(metrics_path(cfg), out);
}

void cmd_report(const ExperimentConfig& cfg) {
    std::vector<std::string> warnings;
    std::vector<std::string> produced;

    auto write_long_csv = [&](const std::string& name,
                              const std::vector<std::tuple<std::string, double, double>>& rows) {
        const std::string path = join(cfg.output_dir, name);
        std::ofstream out(path);
        if (!out) throw IoError("cannot open for writing: " + path);
        out << "figure,series,t,value\n";
        const std::string fig = name.substr(0, name.find('.'));
        for (const auto& [series, t, v] : rows)
            out << fig << ',' << series << ',' << format_double(t) << ',' << format_double(v)
                << '\n';
        produced.push_back(name);
    };

    // free-run comparison: identified models vs the true plant
    {
        std::vector<std::tuple<std::string, double, double>> rows;
        NonlinearPlant plant = make_vdp_plant(cfg.mu);
        const double horizon = 10.0;
        const auto T = static_cast<Eigen::Index>(std::llround(horizon / cfg.data.dt));
        Vec x = cfg.simulation.x0;
        Vec u0 = Vec::Zero(1);
        for (Eigen::Index k = 0; k <= T; ++k) {
            rows.emplace_back("truth_x1", k * cfg.data.dt, x(0));
            rows.emplace_back("truth_x2", k * cfg.data.dt, x(1));
            x = rk4_step(plant, x, u0, cfg.data.dt);
        }
        bool any = false;
        for (double sigma : cfg.sigmas) {
            if (!fs::exists(model_path(cfg, sigma))) {
                warnings.push_back("missing model for sigma=" + sigma_tag(sigma));
                continue;
            }
            any = true;
            KoopmanModel model = model_from_json(load_json(model_path(cfg, sigma)));
            std::vector<Vec> useq(static_cast<size_t>(T), Vec::Zero(model.B2.cols()));
            Prediction pred = koopman_predict(model, cfg.simulation.x0, useq);
            for (Eigen::Index k = 0; k <= T; ++k) {
                rows.emplace_back("model_" + sigma_tag(sigma) + "_x1", k * cfg.data.dt,
                                  pred.states(0, k));
                rows.emplace_back("model_" + sigma_tag(sigma) + "_x2", k * cfg.data.dt,
                                  pred.states(1, k));
            }
        }
        if (any) write_long_csv("fig2.csv", rows);
    }

    // closed-loop comparison and residual decay for the synthesized noise level
    const double sigma = cfg.synthesis.sigma;
    if (!cfg.simulation.seeds.empty()) {
        const std::uint64_t seed = cfg.simulation.seeds.front();
        std::vector<std::tuple<std::string, double, double>> fig3;
        std::vector<std::tuple<std::string, double, double>> fig4;
        for (const std::string name : {"lqg", "dual"}) {
            const std::string path = run_csv_path(cfg, sigma, seed, name);
            std::ifstream in(path);
            if (!in) {
                warnings.push_back("missing run " + path);
                continue;
            }
            std::string line;
            std::getline(in, line);  // header: t,x1,x2,u,uk,uf,fnorm,xhat1,xhat2
            while (std::getline(in, line)) {
                std::vector<double> vals;
                size_t pos = 0;
                while (pos != std::string::npos) {
                    size_t comma = line.find(',', pos);
                    vals.push_back(std::stod(
                        line.substr(pos, comma == std::string::npos ? comma : comma - pos)));
                    pos = comma == std::string::npos ? comma : comma + 1;
                }
                if (vals.size() < 7) continue;
                fig3.emplace_back(name + "_x1", vals[0], vals[1]);
                fig3.emplace_back(name + "_x2", vals[0], vals[2]);
                fig3.emplace_back(name + "_u", vals[0], vals[3]);
                if (name == "dual") fig4.emplace_back("fnorm", vals[0], vals[6]);
            }
        }
        if (!fig3.empty()) write_long_csv("fig3.csv", fig3);
        if (!fig4.empty()) write_long_csv("fig4.csv", fig4);
    }

    json manifest;
    manifest["files"] = produced;
    manifest["warnings"] = warnings;
    save_json(join(cfg.output_dir, "report_manifest.json"), manifest);
    for (const auto& w : warnings) std::cerr << "koopctl: warning: " << w << "\n";
}

}  // namespace koopctl
