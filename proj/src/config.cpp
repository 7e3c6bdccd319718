#include "koopctl/config.hpp"

#include <set>

#include "koopctl/errors.hpp"

namespace koopctl {

namespace {

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

double get_num(const json& j, const std::string& where, const std::string& key, double dflt,
               bool required = false) {
    if (!j.contains(key)) {
        if (required) throw ConfigError(where + ": missing key '" + key + "'");
        return dflt;
    }
    if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return j.at(key).get<double>();
}

Interval get_interval(const json& j, const std::string& where, const std::string& key,
                      Interval dflt) {
    if (!j.contains(key)) return dflt;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2)
        throw ConfigError(where + "." + key + ": expected [lo, hi]");
    Interval iv{a.at(0).get<double>(), a.at(1).get<double>()};
    if (iv.lo > iv.hi) throw ConfigError(where + "." + key + ": lo > hi");
    return iv;
}

SectorSource sector_source_from_string(const std::string& s) {
    if (s == "bounds") return SectorSource::Bounds;
    if (s == "scaled-bounds") return SectorSource::ScaledBounds;
    if (s == "empirical") return SectorSource::Empirical;
    if (s == "fixed") return SectorSource::Fixed;
    throw ConfigError("synthesis.sector.source: unknown value '" + s + "'");
}

std::string sector_source_to_string(SectorSource s) {
    switch (s) {
        case SectorSource::Bounds: return "bounds";
        case SectorSource::ScaledBounds: return "scaled-bounds";
        case SectorSource::Empirical: return "empirical";
        case SectorSource::Fixed: return "fixed";
    }
    return "bounds";
}

}  // namespace

ExperimentConfig default_vdp_config() {
    ExperimentConfig cfg;
    cfg.simulation.x0 = Vec(2);
    cfg.simulation.x0 << 0.5, 0.5;
    cfg.simulation.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    return cfg;
}

ExperimentConfig config_from_json(const json& j) {
    require_keys(j, "config",
                 {"schema_version", "plant", "data", "basis", "noise", "lqg", "performance",
                  "synthesis", "simulation", "output_dir"});
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
        throw ConfigError("config: schema_version must be 1");

    ExperimentConfig cfg = default_vdp_config();

    if (j.contains("plant")) {
        const auto& jp = j.at("plant");
        require_keys(jp, "plant", {"mu"});
        cfg.mu = get_num(jp, "plant", "mu", cfg.mu);
    }
    if (j.contains("data")) {
        const auto& jd = j.at("data");
        require_keys(jd, "data", {"n_pairs", "dt", "segment_length", "x0_range", "u_range",
                                  "seed"});
        cfg.data.n_pairs = static_cast<int>(get_num(jd, "data", "n_pairs", cfg.data.n_pairs));
        cfg.data.dt = get_num(jd, "data", "dt", cfg.data.dt);
        cfg.data.segment_length =
            static_cast<int>(get_num(jd, "data", "segment_length", cfg.data.segment_length));
        cfg.data.x0_range = get_interval(jd, "data", "x0_range", cfg.data.x0_range);
        cfg.data.u_range = get_interval(jd, "data", "u_range", cfg.data.u_range);
        cfg.data.seed = static_cast<std::uint64_t>(get_num(jd, "data", "seed", 0.0));
        if (cfg.data.n_pairs <= 0 || cfg.data.dt <= 0.0 || cfg.data.segment_length <= 0)
            throw ConfigError("data: n_pairs, dt and segment_length must be positive");
    }
    if (j.contains("basis")) {
        const auto& jb = j.at("basis");
        require_keys(jb, "basis", {"kind", "degree", "centers", "width"});
        cfg.basis_kind = basis_kind_from_string(
            jb.contains("kind") ? jb.at("kind").get<std::string>() : "monomial");
        cfg.basis_degree = static_cast<int>(get_num(jb, "basis", "degree", cfg.basis_degree));
        if (cfg.basis_kind == BasisKind::RadialBasis) {
            if (!jb.contains("centers")) throw ConfigError("basis: rbf requires centers");
            cfg.rbf_centers = json_to_mat(jb.at("centers"));
            cfg.rbf_width = get_num(jb, "basis", "width", 1.0, true);
        }
    }
    if (j.contains("noise")) {
        const auto& jn = j.at("noise");
        require_keys(jn, "noise", {"sigmas", "confidence"});
        if (jn.contains("sigmas")) {
            cfg.sigmas.clear();
            for (const auto& s : jn.at("sigmas")) {
                const double v = s.get<double>();
                if (v < 0.0) throw ConfigError("noise.sigmas: must be nonnegative");
                cfg.sigmas.push_back(v);
            }
            if (cfg.sigmas.empty()) throw ConfigError("noise.sigmas: empty");
        }
        cfg.confidence = get_num(jn, "noise", "confidence", cfg.confidence);
        if (cfg.confidence <= 0.0 || cfg.confidence >= 1.0)
            throw ConfigError("noise.confidence: must be in (0,1)");
    }
    if (j.contains("lqg")) {
        const auto& jl = j.at("lqg");
        require_keys(jl, "lqg", {"q_physical", "q_lifted", "r", "wn", "vn_floor"});
        cfg.lqg.q_physical = get_num(jl, "lqg", "q_physical", cfg.lqg.q_physical);
        cfg.lqg.q_lifted = get_num(jl, "lqg", "q_lifted", cfg.lqg.q_lifted);
        cfg.lqg.r = get_num(jl, "lqg", "r", cfg.lqg.r);
        cfg.lqg.wn = get_num(jl, "lqg", "wn", cfg.lqg.wn);
        cfg.vn_floor = get_num(jl, "lqg", "vn_floor", cfg.vn_floor);
    }
    if (j.contains("performance")) {
        const auto& jp = j.at("performance");
        require_keys(jp, "performance", {"d12_weight"});
        cfg.d12_weight = get_num(jp, "performance", "d12_weight", cfg.d12_weight);
    }
    if (j.contains("synthesis")) {
        const auto& js = j.at("synthesis");
        require_keys(js, "synthesis",
                     {"sigma", "sector", "lambda_grid", "gamma_min", "gamma_max",
                      "gamma_rel_tol"});
        cfg.synthesis.sigma = get_num(js, "synthesis", "sigma", cfg.synthesis.sigma);
        if (js.contains("sector")) {
            const auto& js2 = js.at("sector");
            require_keys(js2, "synthesis.sector", {"source", "scale", "U", "V"});
            if (js2.contains("source"))
                cfg.synthesis.sector_source =
                    sector_source_from_string(js2.at("source").get<std::string>());
            cfg.synthesis.sector_scale =
                get_num(js2, "synthesis.sector", "scale", cfg.synthesis.sector_scale);
            cfg.synthesis.fixed_U = get_num(js2, "synthesis.sector", "U", 0.0);
            cfg.synthesis.fixed_V = get_num(js2, "synthesis.sector", "V", 0.0);
        }
        if (js.contains("lambda_grid")) {
            cfg.synthesis.lambda_grid.clear();
            for (const auto& v : js.at("lambda_grid")) {
                const double lv = v.get<double>();
                if (lv <= 0.0) throw ConfigError("synthesis.lambda_grid: must be positive");
                cfg.synthesis.lambda_grid.push_back(lv);
            }
            if (cfg.synthesis.lambda_grid.empty())
                throw ConfigError("synthesis.lambda_grid: empty");
        }
        cfg.synthesis.gamma_min = get_num(js, "synthesis", "gamma_min", cfg.synthesis.gamma_min);
        cfg.synthesis.gamma_max = get_num(js, "synthesis", "gamma_max", cfg.synthesis.gamma_max);
        cfg.synthesis.gamma_rel_tol =
            get_num(js, "synthesis", "gamma_rel_tol", cfg.synthesis.gamma_rel_tol);
        if (cfg.synthesis.gamma_min <= 0.0 ||
            cfg.synthesis.gamma_max <= cfg.synthesis.gamma_min)
            throw ConfigError("synthesis: bad gamma range");
    }
    if (j.contains("simulation")) {
        const auto& js = j.at("simulation");
        require_keys(js, "simulation",
                     {"x0", "horizon", "sigma", "seeds", "settle_threshold"});
        if (js.contains("x0")) cfg.simulation.x0 = json_to_vec(js.at("x0"));
        cfg.simulation.horizon = get_num(js, "simulation", "horizon", cfg.simulation.horizon);
        cfg.simulation.sigma = get_num(js, "simulation", "sigma", cfg.simulation.sigma);
        if (js.contains("seeds")) {
            cfg.simulation.seeds.clear();
            for (const auto& s : js.at("seeds"))
                cfg.simulation.seeds.push_back(s.get<std::uint64_t>());
            if (cfg.simulation.seeds.empty()) throw ConfigError("simulation.seeds: empty");
        }
        cfg.simulation.settle_threshold =
            get_num(js, "simulation", "settle_threshold", cfg.simulation.settle_threshold);
        if (cfg.simulation.horizon <= 0.0) throw ConfigError("simulation.horizon: must be > 0");
    }
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

    if (cfg.simulation.x0.size() != 2)
        throw ConfigError("simulation.x0: the built-in plant has two states");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_json(load_json(path));
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["schema_version"] = 1;
    j["plant"] = {{"mu", cfg.mu}};
    j["data"] = {{"n_pairs", cfg.data.n_pairs},
                 {"dt", cfg.data.dt},
                 {"segment_length", cfg.data.segment_length},
                 {"x0_range", {cfg.data.x0_range.lo, cfg.data.x0_range.hi}},
                 {"u_range", {cfg.data.u_range.lo, cfg.data.u_range.hi}},
                 {"seed", cfg.data.seed}};
    j["basis"] = {{"kind", to_string(cfg.basis_kind)}, {"degree", cfg.basis_degree}};
    if (cfg.basis_kind == BasisKind::RadialBasis) {
        j["basis"]["centers"] = mat_to_json(cfg.rbf_centers);
        j["basis"]["width"] = cfg.rbf_width;
    }
    j["noise"] = {{"sigmas", cfg.sigmas}, {"confidence", cfg.confidence}};
    j["lqg"] = {{"q_physical", cfg.lqg.q_physical},
                {"q_lifted", cfg.lqg.q_lifted},
                {"r", cfg.lqg.r},
                {"wn", cfg.lqg.wn},
                {"vn_floor", cfg.vn_floor}};
    j["performance"] = {{"d12_weight", cfg.d12_weight}};
    j["synthesis"] = {{"sigma", cfg.synthesis.sigma},
                      {"sector",
                       {{"source", sector_source_to_string(cfg.synthesis.sector_source)},
                        {"scale", cfg.synthesis.sector_scale},
                        {"U", cfg.synthesis.fixed_U},
                        {"V", cfg.synthesis.fixed_V}}},
                      {"lambda_grid", cfg.synthesis.lambda_grid},
                      {"gamma_min", cfg.synthesis.gamma_min},
                      {"gamma_max", cfg.synthesis.gamma_max},
                      {"gamma_rel_tol", cfg.synthesis.gamma_rel_tol}};
    std::vector<double> x0(cfg.simulation.x0.data(),
                           cfg.simulation.x0.data() + cfg.simulation.x0.size());
    j["simulation"] = {{"x0", x0},
                       {"horizon", cfg.simulation.horizon},
                       {"sigma", cfg.simulation.sigma},
                       {"seeds", cfg.simulation.seeds},
                       {"settle_threshold", cfg.simulation.settle_threshold}};
    j["output_dir"] = cfg.output_dir;
    return j;
}

BasisLibrary make_basis(const ExperimentConfig& cfg) {
    if (cfg.basis_kind == BasisKind::Monomial)
        return BasisLibrary::monomial(2, cfg.basis_degree);
    return BasisLibrary::radial(2, cfg.rbf_centers, cfg.rbf_width);
}

std::string sigma_tag(double sigma) {
    std::string s = format_double(sigma);
    for (auto& c : s)
        if (c == '.') c = 'p';
    return s;
}

}  // namespace koopctl
