// Python bindings for the core operations: terminal-mean coefficients, the
// closed-form guided laws, deterministic sampling runs, and lookup-table
// construction with JSON persistence. The surface mirrors the C++ API with
// plain scalars, lists, and JSON strings so no array library is required.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "recfg/lookup.hpp"
#include "recfg/samplers.hpp"
#include "recfg/shift.hpp"

namespace py = pybind11;
using namespace recfg;

namespace {

ClampMode clamp_from_name(const std::string& name) {
    if (name == "strict") return ClampMode::strict;
    if (name == "off") return ClampMode::off;
    throw std::invalid_argument("clamp mode must be 'strict' or 'off', got '" + name + "'");
}

// One guided denoising run in the reference world; returns the first
// component of every terminal sample.
std::vector<double> ddim_sample(double gamma, int nfe, std::size_t batch, std::uint64_t seed,
                                double T, double condition, int workers) {
    const auto world = AnalyticWorld::toy();
    const auto sched = NoiseSchedule::ve();
    const ExactOracle oracle(world, sched);
    SamplerConfig cfg;
    cfg.sched = sched;
    cfg.grid = TimeGrid::uniform_sigma(sched, T, nfe, 1e-3);
    cfg.batch = batch;
    cfg.seed = seed;
    cfg.workers = workers;
    const auto rule = gamma == 1.0 ? GuidanceRule::none_rule() : GuidanceRule::cfg_rule(gamma);
    const auto out = ddim_run(oracle, world, Vec{condition}, rule, cfg);
    std::vector<double> xs(out.x0.size());
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = out.x0[i][0];
    return xs;
}

std::string build_table_json(double T, int nfe, std::size_t n_per_condition, std::uint64_t seed,
                             const std::vector<double>& conditions, int workers) {
    const auto world = AnalyticWorld::toy();
    const auto sched = NoiseSchedule::ve();
    const ExactOracle oracle(world, sched);
    const auto grid = TimeGrid::uniform_sigma(sched, T, nfe, 1e-3);
    std::vector<Vec> conds;
    conds.reserve(conditions.size());
    for (double c : conditions) conds.push_back(Vec{c});
    return table_to_json(
        build_from_oracle(oracle, world, sched, grid, n_per_condition, conds, seed, workers));
}

bool table_roundtrip_ok(const std::string& json) {
    const auto table = table_from_json(json);
    return table_from_json(table_to_json(table)) == table;
}

double gamma0_at(const std::string& json, double gamma1, const std::string& cond_id, int t_index,
                 const std::string& clamp) {
    const auto table = table_from_json(json);
    return gamma0_for(table, Vec{gamma1}, cond_id, t_index, clamp_from_name(clamp))[0];
}

}  // namespace

PYBIND11_MODULE(_recfg, m) {
    m.doc() = "Guided-diffusion reference world: mean-shift theory, sampling, lookup tables";

    m.def("phi_limit", &phi_limit, py::arg("gamma"),
          "Long-horizon terminal mean coefficient of plain guidance");
    m.def("phi_finite", &phi_finite, py::arg("gamma"), py::arg("T"),
          "Finite-horizon terminal mean coefficient");
    m.def("phi_closed_odd", &phi_closed_odd, py::arg("n"),
          "Closed form of the limit coefficient at odd integer weights 2n+1");
    m.def("phi_closed_even", &phi_closed_even, py::arg("n"),
          "Closed form of the limit coefficient at even integer weights 2n");
    m.def("phi_recurrence_residual", &phi_recurrence_residual, py::arg("gamma"),
          "Residual of the two-step recurrence satisfied by the limit coefficient");
    m.def("phi_bounds_check", &phi_bounds_check, py::arg("gamma"),
          "Whether the analytic envelope bounds hold at this weight");
    m.def("recfg_variance", &recfg_variance, py::arg("gamma1"), py::arg("gamma0"), py::arg("T"),
          "Terminal variance of rectified guidance in the reference world");
    m.def(
        "cfg_toy_distribution",
        [](double gamma, double T) {
            const auto r = cfg_toy_distribution(gamma, T);
            py::dict d;
            d["mean_coeff"] = r.mean_coeff;
            d["variance"] = r.variance;
            return d;
        },
        py::arg("gamma"), py::arg("T"),
        "Terminal law of plain guidance: mean coefficient on the condition and variance");

    m.def("ddim_sample", &ddim_sample, py::arg("gamma"), py::arg("nfe"), py::arg("batch"),
          py::arg("seed"), py::arg("T") = 99.0, py::arg("condition") = 1.0,
          py::arg("workers") = 1,
          "Deterministic guided denoising run; returns the terminal samples");
    m.def("build_table_json", &build_table_json, py::arg("T"), py::arg("nfe"),
          py::arg("n_per_condition"), py::arg("seed"),
          py::arg("conditions") = std::vector<double>{1.0}, py::arg("workers") = 1,
          "Builds a branch-expectation ratio table and returns its JSON form");
    m.def("table_roundtrip_ok", &table_roundtrip_ok, py::arg("json"),
          "Whether JSON persistence reproduces the table exactly");
    m.def("gamma0_at", &gamma0_at, py::arg("json"), py::arg("gamma1"), py::arg("cond_id"),
          py::arg("t_index"), py::arg("clamp") = "strict",
          "Resolves the complementary weight from a table at one step");
}
