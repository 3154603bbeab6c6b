#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "recfg/guidance.hpp"
#include "recfg/schedule.hpp"
#include "recfg/vec.hpp"
#include "recfg/world.hpp"

namespace recfg {

// Canonical string key for a condition vector: components rendered with 17
// significant digits and joined by ';' (CSV-safe, round-trips exactly).
std::string condition_id(const Vec& c);

// Per-cell first and raw second moments of the two prediction branches,
// gathered during an oracle build. They let callers attach delta-method
// standard errors to each ratio cell; ingested tables have none.
struct CellStats {
    std::vector<Vec> mean_cond;    // [NFE][D]
    std::vector<Vec> mean_uncond;  // [NFE][D]
    std::vector<Vec> m2_cond;      // E[eps_cond^2]
    std::vector<Vec> m2_uncond;    // E[eps_uncond^2]
    std::vector<Vec> m_cross;      // E[eps_cond * eps_uncond]

    bool operator==(const CellStats&) const = default;
};

// Expectation-ratio table: per condition, the per-step per-dimension ratio
// mean[eps_cond] / mean[eps_uncond] estimated under the forward marginal at
// each grid evaluation time, plus the across-condition average used as a
// fallback for unseen conditions.
struct LookupTable {
    int schema_version = 1;
    std::string model_id;
    TimeGrid grid;
    std::size_t dim = 0;
    std::vector<std::string> cond_order;              // insertion order; fixes avg reduction order
    std::map<std::string, std::vector<Vec>> ratios;   // condition id -> [NFE][D]
    std::map<std::string, std::int64_t> counts;       // condition id -> samples per cell
    std::vector<Vec> avg;                             // [NFE][D]
    std::uint64_t build_seed = 0;
    std::vector<std::string> warnings;                // degenerate-cell log
    std::map<std::string, CellStats> stats;           // present for oracle builds only

    int nfe() const { return grid.nfe(); }

    // Arithmetic mean of the condition tensors in cond_order (compensated,
    // fixed order); the stored avg must reproduce this bit-for-bit.
    std::vector<Vec> recompute_avg() const;

    // Per-cell mean and standard deviation of the ratio across conditions,
    // the spread diagnostic that justifies the averaged fallback.
    struct CrossConditionStats {
        std::vector<Vec> mean;  // [NFE][D]
        std::vector<Vec> sd;    // [NFE][D], unbiased; 0 when only one condition
    };
    CrossConditionStats cross_condition_stats() const;

    bool operator==(const LookupTable&) const = default;
};

// One row of the prediction cache: partial sums of the two branches for one
// (condition, step, dimension) cell. Rows with equal keys merge by summation.
struct PredictionCacheRecord {
    std::string cond_id;
    int t_index = 0;
    int dim = 0;
    double sum_cond = 0.0;
    double sum_uncond = 0.0;
    std::int64_t count = 0;
};

struct TableMeta {
    std::string model_id;
    TimeGrid grid;
    std::size_t dim = 0;
};

// Estimates the per-cell branch means by Monte Carlo under the forward
// marginal q_t(x_t | c) and stores the elementwise ratio. Deterministic for
// fixed (seed, inputs) regardless of worker count: every (condition, step)
// cell is a pure function of the seed and is reduced in a fixed order.
LookupTable build_from_oracle(const ScoreOracle& oracle, const AnalyticWorld& world,
                              const NoiseSchedule& sched, const TimeGrid& grid,
                              std::size_t n_per_condition, const std::vector<Vec>& condition_set,
                              std::uint64_t seed, int workers = 1,
                              const std::string& model_id = "analytic-toy");

// Builds a table from externally computed branch sums. Every (condition,
// step, dimension) cell must be covered at least once; gaps raise an
// incomplete-table error that lists them.
LookupTable ingest_cache(const std::vector<PredictionCacheRecord>& records, const TableMeta& meta);

// CSV round-trip for the prediction cache. Header:
//   cond_id,t_index,dim,sum_cond,sum_uncond,count
std::vector<PredictionCacheRecord> parse_cache_csv(const std::string& text);
std::string cache_to_csv(const std::vector<PredictionCacheRecord>& records);

// Resolves gamma0 = (1 - gamma1) (x) ratio for one step, then applies the
// clamp. Unknown condition ids fall back to the averaged tensor unless the
// fallback is disabled, in which case the miss is an error.
Vec gamma0_for(const LookupTable& table, const Vec& gamma1, const std::string& cond_id,
               int t_index, ClampMode clamp_mode, bool allow_avg_fallback = true);

struct ObjectiveEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t samples = 0;
};

// Monte Carlo estimate of the mean squared residual prediction
// E[ || (gamma1 - 1) (x) eps_cond + gamma0 (x) eps_uncond ||^2 ]
// under x0 ~ q0(. | c) and a uniform draw over the grid's evaluation steps.
// The per-step coefficients come from coeffs_at(step).
ObjectiveEstimate objective_L(const ScoreOracle& oracle, const AnalyticWorld& world,
                              const NoiseSchedule& sched, const TimeGrid& grid, const Vec& c,
                              const std::function<GuidanceCoefficients(int)>& coeffs_at,
                              std::size_t mc_samples, std::uint64_t seed);

// Fixed-coefficient convenience overload.
ObjectiveEstimate objective_L(const ScoreOracle& oracle, const AnalyticWorld& world,
                              const NoiseSchedule& sched, const TimeGrid& grid, const Vec& c,
                              const GuidanceCoefficients& coeffs, std::size_t mc_samples,
                              std::uint64_t seed);

// Versioned JSON persistence; tensors are base64-embedded little-endian
// 64-bit floats, so load(save(T)) == T holds exactly.
std::string table_to_json(const LookupTable& table);
LookupTable table_from_json(const std::string& text);
void save_table(const LookupTable& table, const std::string& path);
LookupTable load_table(const std::string& path);

}  // namespace recfg
