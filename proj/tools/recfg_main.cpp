#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "recfg/errors.hpp"
#include "recfg/io.hpp"
#include "recfg/lookup.hpp"
#include "recfg/metrics.hpp"
#include "recfg/samplers.hpp"
#include "recfg/shift.hpp"
#include "recfg/verify.hpp"
#include "recfg/world.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace recfg;

namespace {

// Flat run configuration: defaults here, overridden by the config file,
// overridden again by --set key=value flags.
struct RunConfig {
    std::size_t dim = 1;
    Vec cond_var{1.0};
    Vec prior_mean{0.0};
    Vec prior_var{1.0};
    std::string schedule = "ve";
    double beta_min = 0.1;
    double beta_max = 20.0;
    double T = 99.0;
    int nfe = 512;
    std::string grid = "uniform-sigma";
    double t_min = 1e-3;
    std::string method = "ddim";
    std::string guidance = "cfg";
    double gamma = 2.0;
    Vec gamma1{2.0};
    std::optional<Vec> forced_gamma0;
    std::string clamp = "strict";
    bool allow_avg_fallback = true;
    std::string oracle = "exact";
    Vec bias{0.1};
    Vec scale{1.0};
    std::string table_path;
    std::string cache_path;
    std::string model_id = "analytic-toy";
    std::size_t batch = 10000;
    std::size_t n_per_condition = 100000;
    std::vector<Vec> conditions{{1.0}};
    Vec condition{1.0};
    std::uint64_t seed = 0;
    std::vector<double> gamma_list{1.5, 2.0, 2.5};
    std::vector<double> gamma_grid{1.0, 1.5, 2.0, 2.5, 3.0};
    std::string out_root = "out";
    int workers = 1;
};

double as_double(const json& v, const std::string& key) {
    if (!v.is_number()) fail_validation("config key '" + key + "' must be a number");
    return v.get<double>();
}

std::int64_t as_int(const json& v, const std::string& key) {
    if (!v.is_number_integer()) fail_validation("config key '" + key + "' must be an integer");
    return v.get<std::int64_t>();
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) fail_validation("config key '" + key + "' must be a string");
    return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) fail_validation("config key '" + key + "' must be a boolean");
    return v.get<bool>();
}

// A vector-valued key accepts a scalar (broadcast later) or an array.
Vec as_vec(const json& v, const std::string& key) {
    if (v.is_number()) return Vec{v.get<double>()};
    if (v.is_array()) {
        Vec out;
        for (const auto& e : v) {
            if (!e.is_number())
                fail_validation("config key '" + key + "' must contain only numbers");
            out.push_back(e.get<double>());
        }
        if (out.empty()) fail_validation("config key '" + key + "' must not be empty");
        return out;
    }
    fail_validation("config key '" + key + "' must be a number or an array of numbers");
}

std::vector<double> as_list(const json& v, const std::string& key) {
    return as_vec(v, key);
}

void apply_key(RunConfig& cfg, const std::string& key, const json& v) {
    if (key == "dim") {
        const auto n = as_int(v, key);
        if (n < 1) fail_validation("config key 'dim' must be >= 1");
        cfg.dim = std::size_t(n);
    } else if (key == "cond_var") {
        cfg.cond_var = as_vec(v, key);
    } else if (key == "prior_mean") {
        cfg.prior_mean = as_vec(v, key);
    } else if (key == "prior_var") {
        cfg.prior_var = as_vec(v, key);
    } else if (key == "schedule") {
        cfg.schedule = as_string(v, key);
    } else if (key == "beta_min") {
        cfg.beta_min = as_double(v, key);
    } else if (key == "beta_max") {
        cfg.beta_max = as_double(v, key);
    } else if (key == "T") {
        cfg.T = as_double(v, key);
    } else if (key == "nfe") {
        const auto n = as_int(v, key);
        if (n < 1) fail_validation("config key 'nfe' must be >= 1");
        cfg.nfe = int(n);
    } else if (key == "grid") {
        cfg.grid = as_string(v, key);
    } else if (key == "t_min") {
        cfg.t_min = as_double(v, key);
    } else if (key == "method") {
        cfg.method = as_string(v, key);
    } else if (key == "guidance") {
        cfg.guidance = as_string(v, key);
    } else if (key == "gamma") {
        cfg.gamma = as_double(v, key);
    } else if (key == "gamma1") {
        cfg.gamma1 = as_vec(v, key);
    } else if (key == "forced_gamma0") {
        if (v.is_null()) {
            cfg.forced_gamma0.reset();
        } else {
            cfg.forced_gamma0 = as_vec(v, key);
        }
    } else if (key == "clamp") {
        cfg.clamp = as_string(v, key);
    } else if (key == "allow_avg_fallback") {
        cfg.allow_avg_fallback = as_bool(v, key);
    } else if (key == "oracle") {
        cfg.oracle = as_string(v, key);
    } else if (key == "bias") {
        cfg.bias = as_vec(v, key);
    } else if (key == "scale") {
        cfg.scale = as_vec(v, key);
    } else if (key == "table_path") {
        cfg.table_path = as_string(v, key);
    } else if (key == "cache_path") {
        cfg.cache_path = as_string(v, key);
    } else if (key == "model_id") {
        cfg.model_id = as_string(v, key);
    } else if (key == "batch") {
        const auto n = as_int(v, key);
        if (n < 1) fail_validation("config key 'batch' must be >= 1");
        cfg.batch = std::size_t(n);
    } else if (key == "n_per_condition") {
        const auto n = as_int(v, key);
        if (n < 2) fail_validation("config key 'n_per_condition' must be >= 2");
        cfg.n_per_condition = std::size_t(n);
    } else if (key == "conditions") {
        if (!v.is_array() || v.empty())
            fail_validation("config key 'conditions' must be a non-empty array");
        cfg.conditions.clear();
        for (const auto& e : v) cfg.conditions.push_back(as_vec(e, key));
    } else if (key == "condition") {
        cfg.condition = as_vec(v, key);
    } else if (key == "seed") {
        if (!v.is_number_integer() && !v.is_number_unsigned())
            fail_validation("config key 'seed' must be an integer");
        cfg.seed = v.get<std::uint64_t>();
    } else if (key == "gamma_list") {
        cfg.gamma_list = as_list(v, key);
    } else if (key == "gamma_grid") {
        cfg.gamma_grid = as_list(v, key);
    } else if (key == "out_root") {
        cfg.out_root = as_string(v, key);
    } else if (key == "workers") {
        const auto n = as_int(v, key);
        if (n < 1) fail_validation("config key 'workers' must be >= 1");
        cfg.workers = int(n);
    } else {
        fail_validation("unknown config key '" + key + "'");
    }
}

Vec broadcast(Vec v, std::size_t dim, const std::string& key) {
    if (v.size() == 1 && dim > 1) return Vec(dim, v[0]);
    if (v.size() != dim)
        fail_validation("config key '" + key + "' has " + std::to_string(v.size()) +
                        " entries but dim is " + std::to_string(dim));
    return v;
}

// Concrete objects assembled from a validated RunConfig.
struct Setup {
    AnalyticWorld world;
    NoiseSchedule sched;
    TimeGrid grid;
    std::unique_ptr<ScoreOracle> oracle;
    ClampMode clamp = ClampMode::strict;
};

Setup make_setup(RunConfig& cfg) {
    cfg.cond_var = broadcast(std::move(cfg.cond_var), cfg.dim, "cond_var");
    cfg.prior_mean = broadcast(std::move(cfg.prior_mean), cfg.dim, "prior_mean");
    cfg.prior_var = broadcast(std::move(cfg.prior_var), cfg.dim, "prior_var");
    cfg.gamma1 = broadcast(std::move(cfg.gamma1), cfg.dim, "gamma1");
    cfg.bias = broadcast(std::move(cfg.bias), cfg.dim, "bias");
    cfg.scale = broadcast(std::move(cfg.scale), cfg.dim, "scale");
    cfg.condition = broadcast(std::move(cfg.condition), cfg.dim, "condition");
    if (cfg.forced_gamma0)
        cfg.forced_gamma0 = broadcast(std::move(*cfg.forced_gamma0), cfg.dim, "forced_gamma0");
    for (auto& c : cfg.conditions) c = broadcast(std::move(c), cfg.dim, "conditions");

    Setup s;
    s.world = AnalyticWorld::make(cfg.cond_var, cfg.prior_mean, cfg.prior_var);

    if (cfg.schedule == "ve") {
        s.sched = NoiseSchedule::ve();
    } else if (cfg.schedule == "vp") {
        s.sched = NoiseSchedule::vp(cfg.beta_min, cfg.beta_max);
    } else {
        fail_validation("config key 'schedule' must be 've' or 'vp', got '" + cfg.schedule + "'");
    }

    if (cfg.grid == "uniform-sigma") {
        s.grid = TimeGrid::uniform_sigma(s.sched, cfg.T, cfg.nfe, cfg.t_min);
    } else if (cfg.grid == "uniform-t") {
        s.grid = TimeGrid::uniform_t(s.sched, cfg.T, cfg.nfe, cfg.t_min);
    } else {
        fail_validation("config key 'grid' must be 'uniform-sigma' or 'uniform-t', got '" +
                        cfg.grid + "'");
    }

    if (cfg.oracle == "exact") {
        s.oracle = std::make_unique<ExactOracle>(s.world, s.sched);
    } else if (cfg.oracle == "perturbed") {
        s.oracle = std::make_unique<PerturbedOracle>(ExactOracle(s.world, s.sched), cfg.bias,
                                                     cfg.scale);
    } else {
        fail_validation("config key 'oracle' must be 'exact' or 'perturbed', got '" + cfg.oracle +
                        "'");
    }

    if (cfg.clamp == "strict") {
        s.clamp = ClampMode::strict;
    } else if (cfg.clamp == "loose") {
        s.clamp = ClampMode::loose;
    } else if (cfg.clamp == "off") {
        s.clamp = ClampMode::off;
    } else {
        fail_validation("config key 'clamp' must be 'strict', 'loose', or 'off', got '" +
                        cfg.clamp + "'");
    }
    return s;
}

SamplerConfig sampler_config(const RunConfig& cfg, const Setup& s) {
    SamplerConfig sc;
    if (cfg.method == "ddim" || cfg.method == "ode-rk4" || cfg.method == "ode-euler") {
        sc.method = cfg.method == "ode-rk4"
                        ? SamplerMethod::ODE_RK4
                        : (cfg.method == "ode-euler" ? SamplerMethod::ODE_EULER
                                                     : SamplerMethod::DDIM);
    } else {
        fail_validation("config key 'method' must be 'ddim', 'ode-rk4', or 'ode-euler', got '" +
                        cfg.method + "'");
    }
    sc.sched = s.sched;
    sc.grid = s.grid;
    sc.batch = cfg.batch;
    sc.seed = cfg.seed;
    sc.workers = cfg.workers;
    return sc;
}

SampleBatch run_sampler(const Setup& s, const Vec& c, const GuidanceRule& rule,
                        const SamplerConfig& sc, const Gamma0Source* src) {
    if (sc.method == SamplerMethod::DDIM) return ddim_run(*s.oracle, s.world, c, rule, sc, src);
    return ode_run(*s.oracle, s.world, c, rule, sc, src);
}

std::string source_name(ShiftSource src) {
    switch (src) {
        case ShiftSource::quadrature: return "quadrature";
        case ShiftSource::closed_form: return "closed-form";
        case ShiftSource::recurrence: return "recurrence";
    }
    return "unknown";
}

fs::path ensure_dir(const std::string& out_root, const std::string& command) {
    const fs::path dir = fs::path(out_root) / command;
    fs::create_directories(dir);
    return dir;
}

void emit(const fs::path& path, const std::string& content) {
    write_text_file(path.string(), content);
    std::cout << "wrote " << path.string() << "\n";
}

// Limit of the terminal mean coefficient, exact for integer strengths.
double limit_mean_coeff(double gamma) {
    const double rounded = std::round(gamma);
    if (std::abs(gamma - rounded) < 1e-12 && rounded >= 1.0) {
        const int gi = int(rounded);
        if (gi % 2 == 1) return phi_closed_odd((gi - 1) / 2);
        return phi_closed_even(gi / 2);
    }
    return phi_limit(gamma);
}

int cmd_shift_analyze(const RunConfig& cfg) {
    const auto dir = ensure_dir(cfg.out_root, "shift-analyze");
    std::string csv = "gamma1,gamma0,T,mean_coeff,variance,source\n";
    for (double g : cfg.gamma_grid) {
        const auto finite = cfg_toy_distribution(g, cfg.T);
        csv += format_g17(g) + "," + format_g17(1.0 - g) + "," + format_g17(cfg.T) + "," +
               format_g17(finite.mean_coeff) + "," + format_g17(finite.variance) + "," +
               source_name(finite.source) + "\n";
        // Long-horizon limit: variance collapses to 2^{1-gamma}.
        csv += format_g17(g) + "," + format_g17(1.0 - g) + ",inf," +
               format_g17(limit_mean_coeff(g)) + "," + format_g17(std::pow(2.0, 1.0 - g)) +
               ",closed-form\n";
        // Rectified counterpart with the exact-model coefficient gamma0 = 0.
        csv += format_g17(g) + ",0," + format_g17(cfg.T) + ",1," +
               format_g17(recfg_variance(g, 0.0, cfg.T)) + ",closed-form\n";
    }
    emit(dir / "shift_reports.csv", csv);
    return 0;
}

int cmd_build_table(RunConfig& cfg) {
    auto s = make_setup(cfg);
    const auto dir = ensure_dir(cfg.out_root, "build-table");

    LookupTable table;
    if (!cfg.cache_path.empty()) {
        const auto records = parse_cache_csv(read_text_file(cfg.cache_path));
        TableMeta meta;
        meta.model_id = cfg.model_id;
        meta.grid = s.grid;
        meta.dim = cfg.dim;
        table = ingest_cache(records, meta);
    } else {
        table = build_from_oracle(*s.oracle, s.world, s.sched, s.grid, cfg.n_per_condition,
                                  cfg.conditions, cfg.seed, cfg.workers, cfg.model_id);
    }

    for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
    save_table(table, (dir / "table.json").string());
    std::cout << "wrote " << (dir / "table.json").string() << "\n";

    // Ratio heatmap over the cross-condition average tensor.
    std::string heat = "t_index,dim,ratio\n";
    for (int k = 0; k < table.nfe(); ++k) {
        for (std::size_t d = 0; d < table.dim; ++d) {
            heat += std::to_string(k) + "," + std::to_string(d) + "," +
                    format_g17(table.avg[std::size_t(k)][d]) + "\n";
        }
    }
    emit(dir / "heatmap.csv", heat);
    return 0;
}

GuidanceRule make_rule(const RunConfig& cfg, const Setup& s, std::optional<LookupTable>& table,
                       std::optional<Gamma0Source>& src) {
    if (cfg.guidance == "none") return GuidanceRule::none_rule();
    if (cfg.guidance == "cfg") return GuidanceRule::cfg_rule(cfg.gamma);
    if (cfg.guidance == "recfg") {
        if (cfg.forced_gamma0) return GuidanceRule::recfg_forced(cfg.gamma1, *cfg.forced_gamma0);
        if (cfg.table_path.empty())
            fail_validation(
                "rectified guidance needs 'table_path' or 'forced_gamma0' in the config");
        table = load_table(cfg.table_path);
        src = table_gamma0_source(*table, cfg.gamma1, s.grid, s.clamp, cfg.allow_avg_fallback);
        for (const auto& w : src->warnings) std::cerr << "warning: " << w << "\n";
        return GuidanceRule::recfg_rule(cfg.gamma1);
    }
    fail_validation("config key 'guidance' must be 'none', 'cfg', or 'recfg', got '" +
                    cfg.guidance + "'");
}

int cmd_sample(RunConfig& cfg) {
    auto s = make_setup(cfg);
    const auto dir = ensure_dir(cfg.out_root, "sample");
    std::optional<LookupTable> table;
    std::optional<Gamma0Source> src;
    const auto rule = make_rule(cfg, s, table, src);
    const auto sc = sampler_config(cfg, s);
    const auto batch =
        run_sampler(s, cfg.condition, rule, sc, src ? &*src : nullptr);
    emit(dir / "samples.csv", samples_to_csv(batch));
    return 0;
}

int cmd_simulate(RunConfig& cfg) {
    auto s = make_setup(cfg);
    const bool reference_world = cfg.dim == 1 && cfg.schedule == "ve" && cfg.cond_var[0] == 1.0 &&
                                 cfg.prior_mean[0] == 0.0 && cfg.prior_var[0] == 1.0;
    if (!reference_world)
        fail_validation(
            "simulate draws its theory curves in the reference world; keep dim=1, schedule="
            "'ve', cond_var=1, prior_mean=0, prior_var=1");
    const auto dir = ensure_dir(cfg.out_root, "simulate");
    const double c = cfg.condition[0];

    LookupTable table;
    if (!cfg.table_path.empty()) {
        table = load_table(cfg.table_path);
    } else {
        table = build_from_oracle(*s.oracle, s.world, s.sched, s.grid, cfg.n_per_condition,
                                  {cfg.condition}, cfg.seed + 1, cfg.workers, cfg.model_id);
    }

    std::vector<KsSummary> summaries;
    std::string realized = "gamma,realized_gamma0\n";
    for (double g : cfg.gamma_list) {
        auto sc = sampler_config(cfg, s);
        const auto plain = run_sampler(s, cfg.condition, GuidanceRule::cfg_rule(g), sc, nullptr);

        const Vec gamma1(cfg.dim, g);
        auto src = table_gamma0_source(table, gamma1, s.grid, s.clamp, cfg.allow_avg_fallback);
        for (const auto& w : src.warnings) std::cerr << "warning: " << w << "\n";
        const auto rect = run_sampler(s, cfg.condition, GuidanceRule::recfg_rule(gamma1), sc, &src);

        // Realized gamma0: per-step resolved values averaged with the weights
        // of the variance integral, ln((2+t_k)/(2+t_{k+1})).
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k + 1 < s.grid.times.size(); ++k) {
            const double t0 = s.grid.times[k];
            const double t1 = s.grid.times[k + 1];
            const double w = std::log((2.0 + t0) / (2.0 + t1));
            num += w * src.resolve(plain.cond_id, int(k), t0)[0];
            den += w;
        }
        const double realized_g0 = num / den;
        realized += format_g17(g) + "," + format_g17(realized_g0) + "\n";

        const std::string csv =
            comparison_csv(g, cfg.T, c, realized_g0, column(plain), column(rect));
        char name[64];
        std::snprintf(name, sizeof(name), "distribution_gamma%g.csv", g);
        emit(dir / name, csv);

        const auto plain_law = cfg_toy_distribution(g, cfg.T);
        summaries.push_back(ks_summary("plain-gamma-" + std::to_string(g).substr(0, 4),
                                       column(plain), plain_law.mean_coeff * c,
                                       plain_law.variance));
        summaries.push_back(ks_summary("rectified-gamma-" + std::to_string(g).substr(0, 4),
                                       column(rect), c, recfg_variance(g, realized_g0, cfg.T)));
    }
    emit(dir / "ks_summary.csv", ks_summary_csv(summaries));
    emit(dir / "realized_gamma0.csv", realized);
    return 0;
}

int cmd_verify(const RunConfig& cfg) {
    const auto dir = ensure_dir(cfg.out_root, "verify");
    const auto results = verify_suite(cfg.workers);
    std::cout << render_report(results);
    emit(dir / "report.csv", report_csv(results));
    if (!all_passed(results)) fail(ErrorKind::invariant, "verification suite reported failures");
    return 0;
}

int cmd_plot_data(const RunConfig& cfg) {
    const auto dir = ensure_dir(cfg.out_root, "plot-data");
    const fs::path sim = fs::path(cfg.out_root) / "simulate";
    const fs::path shift = fs::path(cfg.out_root) / "shift-analyze" / "shift_reports.csv";

    std::vector<fs::path> figs;
    if (fs::exists(sim)) {
        for (const auto& entry : fs::directory_iterator(sim)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("distribution_gamma", 0) == 0 && name.size() > 22)
                figs.push_back(entry.path());
        }
    }
    std::sort(figs.begin(), figs.end());
    if (figs.empty() && !fs::exists(shift))
        fail_validation("nothing to bundle: run 'simulate' or 'shift-analyze' under out root '" +
                        cfg.out_root + "' first");

    if (!figs.empty()) {
        std::string bundle = "gamma,label,kind,left,right,value\n";
        for (const auto& path : figs) {
            const std::string name = path.filename().string();
            const std::string g = name.substr(18, name.size() - 22);  // distribution_gamma<g>.csv
            const std::string text = read_text_file(path.string());
            std::size_t pos = text.find('\n');  // skip the per-file header
            while (pos != std::string::npos && pos + 1 < text.size()) {
                const std::size_t next = text.find('\n', pos + 1);
                const std::string line = text.substr(pos + 1, next == std::string::npos
                                                                  ? std::string::npos
                                                                  : next - pos - 1);
                if (!line.empty()) bundle += g + "," + line + "\n";
                pos = next;
            }
        }
        emit(dir / "distribution_bundle.csv", bundle);
        const fs::path ks = sim / "ks_summary.csv";
        if (fs::exists(ks)) emit(dir / "ks_summary.csv", read_text_file(ks.string()));
    }
    if (fs::exists(shift)) {
        emit(dir / "shift_bundle.csv", read_text_file(shift.string()));
    }
    return 0;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::validation:
        case ErrorKind::lookup:
        case ErrorKind::schema:
        case ErrorKind::incomplete:
            return 1;
        case ErrorKind::numeric:
            return 2;
        case ErrorKind::invariant:
            return 3;
    }
    return 1;
}

std::string kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::validation: return "validation";
        case ErrorKind::lookup: return "lookup";
        case ErrorKind::schema: return "schema";
        case ErrorKind::incomplete: return "incomplete";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::invariant: return "invariant";
    }
    return "unknown";
}

void write_error_report(const std::string& out_root, const std::string& command,
                        const std::string& kind, int code, const std::string& message) {
    try {
        fs::create_directories(out_root);
        json report;
        report["command"] = command;
        report["error_kind"] = kind;
        report["exit_code"] = code;
        report["message"] = message;
        write_text_file((fs::path(out_root) / "error.json").string(), report.dump(1) + "\n");
    } catch (...) {
        // The report is best-effort; the exit code still carries the outcome.
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Guidance-rectification toolkit for the analytic reference world"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string out_flag;
    int workers_flag = 0;
    std::uint64_t seed_flag = 0;
    bool seed_given = false;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--set", sets, "key=value override (value in JSON syntax); repeatable");
    app.add_option("--out", out_flag, "output root directory");
    app.add_option("--workers", workers_flag, "worker threads");
    app.add_option("--seed", seed_flag, "base RNG seed")->each([&](const std::string&) {
        seed_given = true;
    });

    const std::vector<std::string> commands = {"shift-analyze", "simulate", "build-table",
                                               "sample",        "verify",   "plot-data"};
    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name);
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    RunConfig cfg;
    if (const char* env_root = std::getenv("RECFG_OUT_ROOT")) cfg.out_root = env_root;

    try {
        if (!config_path.empty()) {
            json doc;
            try {
                doc = json::parse(read_text_file(config_path));
            } catch (const json::parse_error& e) {
                fail_validation(std::string("config file is not valid JSON: ") + e.what());
            }
            if (!doc.is_object()) fail_validation("config file must hold a JSON object");
            for (const auto& [key, value] : doc.items()) apply_key(cfg, key, value);
        }
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                fail_validation("--set expects key=value, got '" + kv + "'");
            const std::string key = kv.substr(0, eq);
            const std::string raw = kv.substr(eq + 1);
            json value = json::parse(raw, nullptr, false);
            if (value.is_discarded()) value = raw;  // unquoted strings stay strings
            apply_key(cfg, key, value);
        }
        if (!out_flag.empty()) cfg.out_root = out_flag;
        if (workers_flag > 0) cfg.workers = workers_flag;
        if (seed_given) cfg.seed = seed_flag;

        if (command == "shift-analyze") return cmd_shift_analyze(cfg);
        if (command == "simulate") return cmd_simulate(cfg);
        if (command == "build-table") return cmd_build_table(cfg);
        if (command == "sample") return cmd_sample(cfg);
        if (command == "verify") return cmd_verify(cfg);
        if (command == "plot-data") return cmd_plot_data(cfg);
        fail_validation("unknown command '" + command + "'");
    } catch (const Error& e) {
        const int code = exit_code_for(e.kind());
        std::cerr << "error (" << kind_name(e.kind()) << "): " << e.what() << "\n";
        write_error_report(cfg.out_root, command, kind_name(e.kind()), code, e.what());
        return code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        write_error_report(cfg.out_root, command, "internal", 1, e.what());
        return 1;
    }
}
