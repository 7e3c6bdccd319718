#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "koopctl/basis.hpp"
#include "koopctl/json_io.hpp"
#include "koopctl/nominal.hpp"
#include "koopctl/plant.hpp"
#include "koopctl/types.hpp"

namespace koopctl {

// Where the sector fed to the robust synthesis comes from. The first-order
// confidence bounds are reported alongside either way; for rich dictionaries
// they are far too conservative to admit any controller, so the pipeline can
// fall back to a data-driven split estimate or an explicit value.
enum class SectorSource { Bounds, ScaledBounds, Empirical, Fixed };

struct SynthesisConfig {
    double sigma = 0.01;  // noise level whose model is synthesized for
    SectorSource sector_source = SectorSource::Empirical;
    double sector_scale = 1.0;  // for ScaledBounds / Empirical
    double fixed_U = 0.0;
    double fixed_V = 0.0;
    std::vector<double> lambda_grid{1.0};
    double gamma_min = 1e-2;
    double gamma_max = 1e5;
    double gamma_rel_tol = 0.05;
};

struct SimulationConfig {
    Vec x0;
    double horizon = 20.0;
    double sigma = 0.01;
    std::vector<std::uint64_t> seeds;
    double settle_threshold = 0.05;
};

struct ExperimentConfig {
    double mu = 1.0;
    SnapshotOptions data;
    BasisKind basis_kind = BasisKind::Monomial;
    int basis_degree = 5;
    Mat rbf_centers;
    double rbf_width = 1.0;
    std::vector<double> sigmas{0.0, 0.01, 0.05};
    double confidence = 0.997;
    LqgWeights lqg;
    double vn_floor = 1e-6;
    double d12_weight = 0.1;
    SynthesisConfig synthesis;
    SimulationConfig simulation;
    std::string output_dir = "out";
};

// Strict parsing: unknown keys anywhere are a configuration error, and all
// referenced dimensions must be mutually consistent.
ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::string& path);
json config_to_json(const ExperimentConfig& cfg);

ExperimentConfig default_vdp_config();

BasisLibrary make_basis(const ExperimentConfig& cfg);

// "0.01" -> filename-friendly tag
std::string sigma_tag(double sigma);

}  // namespace koopctl
