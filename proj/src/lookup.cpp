#include "recfg/lookup.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "recfg/errors.hpp"
#include "recfg/io.hpp"

namespace recfg {

using nlohmann::json;

std::string condition_id(const Vec& c) {
    require_valid(!c.empty(), "condition_id needs a non-empty vector");
    std::string out;
    for (std::size_t d = 0; d < c.size(); ++d) {
        if (d) out += ';';
        out += format_g17(c[d]);
    }
    return out;
}

std::vector<Vec> LookupTable::recompute_avg() const {
    const int K = nfe();
    const std::size_t rows = std::size_t(K);
    std::vector<Vec> out(rows, Vec(dim, 0.0));
    if (cond_order.empty()) return out;
    std::vector<std::vector<Accumulator>> acc(rows, std::vector<Accumulator>(dim));
    for (const std::string& id : cond_order) {
        const auto it = ratios.find(id);
        require(it != ratios.end(), ErrorKind::invariant,
                "cond_order lists '" + id + "' but the table holds no tensor for it");
        for (int k = 0; k < K; ++k) {
            for (std::size_t d = 0; d < dim; ++d) acc[k][d].add(it->second[k][d]);
        }
    }
    const double inv_n = 1.0 / double(cond_order.size());
    for (int k = 0; k < K; ++k) {
        for (std::size_t d = 0; d < dim; ++d) out[k][d] = acc[k][d].value() * inv_n;
    }
    return out;
}

LookupTable::CrossConditionStats LookupTable::cross_condition_stats() const {
    const int K = nfe();
    CrossConditionStats out;
    out.mean = recompute_avg();
    out.sd.assign(std::size_t(K), Vec(dim, 0.0));
    const std::size_t n = cond_order.size();
    if (n < 2) return out;
    for (int k = 0; k < K; ++k) {
        for (std::size_t d = 0; d < dim; ++d) {
            Accumulator sq;
            for (const std::string& id : cond_order) {
                const double dev = ratios.at(id)[k][d] - out.mean[k][d];
                sq.add(dev * dev);
            }
            out.sd[k][d] = std::sqrt(sq.value() / double(n - 1));
        }
    }
    return out;
}

namespace {

void require_evaluation_sigmas(const NoiseSchedule& sched, const TimeGrid& grid) {
    for (int k = 0; k < grid.nfe(); ++k) {
        require_valid(sched.sigma(grid.times[std::size_t(k)]) > 0.0,
                      "grid evaluation time " + std::to_string(grid.times[std::size_t(k)]) +
                          " has sigma = 0");
    }
}

void require_finite_tensor(const std::vector<Vec>& tensor, const std::string& what) {
    for (const Vec& row : tensor) {
        for (double v : row) {
            require(std::isfinite(v), ErrorKind::invariant,
                    what + " contains a non-finite value");
        }
    }
}

std::string degenerate_warning(const std::string& cond, int k, std::size_t d) {
    return "degenerate unconditional mean: cond=" + cond + " t_index=" + std::to_string(k) +
           " dim=" + std::to_string(d) + "; ratio set to 1 so guidance reduces to the plain form";
}

}  // namespace

LookupTable build_from_oracle(const ScoreOracle& oracle, const AnalyticWorld& world,
                              const NoiseSchedule& sched, const TimeGrid& grid,
                              std::size_t n_per_condition, const std::vector<Vec>& condition_set,
                              std::uint64_t seed, int workers, const std::string& model_id) {
    require_valid(n_per_condition >= 2, "table build needs n_per_condition >= 2");
    require_valid(!condition_set.empty(), "table build needs at least one condition");
    require_valid(workers >= 1, "workers must be >= 1");
    require_valid(oracle.dim() == world.dim, "oracle and world dimension mismatch");
    validate_grid(sched, grid);
    require_evaluation_sigmas(sched, grid);

    const std::size_t D = world.dim;
    const int K = grid.nfe();
    const std::size_t n_cond = condition_set.size();

    LookupTable table;
    table.model_id = model_id;
    table.grid = grid;
    table.dim = D;
    table.build_seed = seed;

    for (const Vec& c : condition_set) {
        require_dim(c, D, "table condition");
        const std::string id = condition_id(c);
        require_valid(table.ratios.count(id) == 0, "duplicate condition id '" + id + "'");
        table.cond_order.push_back(id);
        table.ratios[id].assign(std::size_t(K), Vec(D, 0.0));
        table.counts[id] = std::int64_t(n_per_condition);
        CellStats& st = table.stats[id];
        st.mean_cond.assign(std::size_t(K), Vec(D, 0.0));
        st.mean_uncond.assign(std::size_t(K), Vec(D, 0.0));
        st.m2_cond.assign(std::size_t(K), Vec(D, 0.0));
        st.m2_uncond.assign(std::size_t(K), Vec(D, 0.0));
        st.m_cross.assign(std::size_t(K), Vec(D, 0.0));
    }

    // degenerate[ci][k*D + d] flags cells whose unconditional mean vanished.
    std::vector<std::vector<std::uint8_t>> degenerate(n_cond,
                                                      std::vector<std::uint8_t>(std::size_t(K) * D, 0));

    const Rng root(seed);
    Vec sqrt_v1(D);
    for (std::size_t d = 0; d < D; ++d) sqrt_v1[d] = std::sqrt(world.cond_var[d]);

    // One task estimates one (condition, step) row of cells. Each task is a
    // pure function of the seed and writes only its own slots, so the result
    // is bit-identical however the tasks land on threads. The draw counters
    // are keyed by (sample, step, dimension) for both the clean state and the
    // perturbation, so no two cells share forward draws: cell estimates are
    // mutually independent and the per-cell moment statistics fully describe
    // their uncertainty.
    auto run_task = [&](std::size_t ci, int k) {
        const Vec& c = condition_set[ci];
        const std::string& id = table.cond_order[ci];
        const Rng x0s = root.child(2 * std::uint64_t(ci));
        const Rng eps = root.child(2 * std::uint64_t(ci) + 1);
        const double t = grid.times[std::size_t(k)];
        const double a = sched.alpha(t);
        const double sig = sched.sigma(t);

        std::vector<Accumulator> sc(D), su(D), scc(D), suu(D), scu(D);
        Vec x0(D), xt(D), ec, eu;
        for (std::size_t i = 0; i < n_per_condition; ++i) {
            for (std::size_t d = 0; d < D; ++d) {
                const std::uint64_t ctr = (std::uint64_t(i) * std::uint64_t(K) + std::uint64_t(k)) * D + d;
                x0[d] = c[d] + sqrt_v1[d] * x0s.normal(ctr);
                xt[d] = a * x0[d] + sig * eps.normal(ctr);
            }
            oracle.eps_pair_into(ec, eu, xt, c, t);
            for (std::size_t d = 0; d < D; ++d) {
                sc[d].add(ec[d]);
                su[d].add(eu[d]);
                scc[d].add(ec[d] * ec[d]);
                suu[d].add(eu[d] * eu[d]);
                scu[d].add(ec[d] * eu[d]);
            }
        }

        const double inv_n = 1.0 / double(n_per_condition);
        CellStats& st = table.stats[id];
        for (std::size_t d = 0; d < D; ++d) {
            const double mean_c = sc[d].value() * inv_n;
            const double mean_u = su[d].value() * inv_n;
            const double m2_u = suu[d].value() * inv_n;
            st.mean_cond[std::size_t(k)][d] = mean_c;
            st.mean_uncond[std::size_t(k)][d] = mean_u;
            st.m2_cond[std::size_t(k)][d] = scc[d].value() * inv_n;
            st.m2_uncond[std::size_t(k)][d] = m2_u;
            st.m_cross[std::size_t(k)][d] = scu[d].value() * inv_n;
            // A vanishing denominator makes the ratio meaningless; fall back
            // to ratio 1, which turns the rectified combination back into
            // the plain one at this cell.
            const double floor = 1e-8 * std::sqrt(m2_u);
            if (std::abs(mean_u) < floor || mean_u == 0.0) {
                table.ratios[id][std::size_t(k)][d] = 1.0;
                degenerate[ci][std::size_t(k) * D + d] = 1;
            } else {
                table.ratios[id][std::size_t(k)][d] = mean_c / mean_u;
            }
        }
    };

    const std::size_t n_tasks = n_cond * std::size_t(K);
    const std::size_t n_threads = std::min<std::size_t>(std::size_t(workers), n_tasks);
    if (n_threads <= 1) {
        for (std::size_t task = 0; task < n_tasks; ++task) {
            run_task(task / std::size_t(K), int(task % std::size_t(K)));
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto drain = [&]() {
            try {
                while (true) {
                    const std::size_t task = next.fetch_add(1);
                    if (task >= n_tasks) break;
                    run_task(task / std::size_t(K), int(task % std::size_t(K)));
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(drain);
        for (std::thread& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    for (std::size_t ci = 0; ci < n_cond; ++ci) {
        for (int k = 0; k < K; ++k) {
            for (std::size_t d = 0; d < D; ++d) {
                if (degenerate[ci][std::size_t(k) * D + d]) {
                    table.warnings.push_back(degenerate_warning(table.cond_order[ci], k, d));
                }
            }
        }
    }

    table.avg = table.recompute_avg();
    for (const auto& [id, tensor] : table.ratios) require_finite_tensor(tensor, "ratio tensor " + id);
    require_finite_tensor(table.avg, "averaged tensor");
    return table;
}

LookupTable ingest_cache(const std::vector<PredictionCacheRecord>& records, const TableMeta& meta) {
    require_valid(!records.empty(), "prediction cache holds no records");
    require_valid(meta.dim >= 1, "table meta needs dim >= 1");
    require_valid(meta.grid.times.size() >= 2, "table meta needs a grid with at least one step");
    const int K = meta.grid.nfe();
    const std::size_t D = meta.dim;

    struct CellSums {
        Accumulator sum_cond;
        Accumulator sum_uncond;
        std::int64_t count = 0;
    };
    std::map<std::tuple<std::string, int, int>, CellSums> cells;
    std::vector<std::string> cond_order;

    for (std::size_t r = 0; r < records.size(); ++r) {
        const PredictionCacheRecord& rec = records[r];
        const std::string where = " (record " + std::to_string(r + 1) + ")";
        require_valid(rec.count >= 1, "cache record count must be >= 1, got " +
                                          std::to_string(rec.count) + where);
        require_valid(std::isfinite(rec.sum_cond) && std::isfinite(rec.sum_uncond),
                      "cache record sums must be finite" + where);
        require_valid(rec.t_index >= 0 && rec.t_index < K,
                      "cache record t_index " + std::to_string(rec.t_index) +
                          " outside grid with " + std::to_string(K) + " steps" + where);
        require_valid(rec.dim >= 0 && std::size_t(rec.dim) < D,
                      "cache record dim " + std::to_string(rec.dim) + " outside dimension " +
                          std::to_string(D) + where);
        const auto key = std::make_tuple(rec.cond_id, rec.t_index, rec.dim);
        auto it = cells.find(key);
        if (it == cells.end()) it = cells.emplace(key, CellSums{}).first;
        it->second.sum_cond.add(rec.sum_cond);
        it->second.sum_uncond.add(rec.sum_uncond);
        it->second.count += rec.count;
        bool seen = false;
        for (const std::string& id : cond_order) seen = seen || id == rec.cond_id;
        if (!seen) cond_order.push_back(rec.cond_id);
    }

    // Every (condition, step, dimension) cell must be covered before ratios
    // can be formed; report the gaps rather than silently zero-filling.
    std::vector<std::string> gaps;
    for (const std::string& id : cond_order) {
        for (int k = 0; k < K; ++k) {
            for (std::size_t d = 0; d < D; ++d) {
                if (!cells.count(std::make_tuple(id, k, int(d)))) {
                    gaps.push_back("cond=" + id + " t_index=" + std::to_string(k) +
                                   " dim=" + std::to_string(d));
                }
            }
        }
    }
    if (!gaps.empty()) {
        std::string msg = "prediction cache is missing " + std::to_string(gaps.size()) +
                          " cell(s): ";
        const std::size_t shown = std::min<std::size_t>(gaps.size(), 20);
        for (std::size_t g = 0; g < shown; ++g) {
            if (g) msg += "; ";
            msg += gaps[g];
        }
        if (gaps.size() > shown) msg += "; ... and " + std::to_string(gaps.size() - shown) + " more";
        fail(ErrorKind::incomplete, msg);
    }

    LookupTable table;
    table.model_id = meta.model_id;
    table.grid = meta.grid;
    table.dim = D;
    table.cond_order = cond_order;
    for (const std::string& id : cond_order) {
        std::vector<Vec>& tensor = table.ratios[id];
        tensor.assign(std::size_t(K), Vec(D, 0.0));
        std::int64_t min_count = 0;
        bool first = true;
        for (int k = 0; k < K; ++k) {
            for (std::size_t d = 0; d < D; ++d) {
                const CellSums& cs = cells.at(std::make_tuple(id, k, int(d)));
                const double mean_c = cs.sum_cond.value() / double(cs.count);
                const double mean_u = cs.sum_uncond.value() / double(cs.count);
                if (mean_u == 0.0) {
                    tensor[std::size_t(k)][d] = 1.0;
                    table.warnings.push_back(degenerate_warning(id, k, d));
                } else {
                    tensor[std::size_t(k)][d] = mean_c / mean_u;
                }
                if (first || cs.count < min_count) min_count = cs.count;
                first = false;
            }
        }
        table.counts[id] = min_count;
    }
    table.avg = table.recompute_avg();
    for (const auto& [id, tensor] : table.ratios) require_finite_tensor(tensor, "ratio tensor " + id);
    require_finite_tensor(table.avg, "averaged tensor");
    return table;
}

namespace {

constexpr const char* kCacheHeader = "cond_id,t_index,dim,sum_cond,sum_uncond,count";

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

long long parse_int_field(const std::string& field, const std::string& what, std::size_t line_no) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(field, &used);
    } catch (const std::exception&) {
        fail_validation("cannot parse " + what + " '" + field + "' on cache line " +
                        std::to_string(line_no));
    }
    require_valid(used == field.size(), "trailing characters in " + what + " '" + field +
                                            "' on cache line " + std::to_string(line_no));
    return v;
}

double parse_real_field(const std::string& field, const std::string& what, std::size_t line_no) {
    require_valid(!field.empty(), "empty " + what + " on cache line " + std::to_string(line_no));
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    require_valid(end == field.c_str() + field.size(),
                  "cannot parse " + what + " '" + field + "' on cache line " +
                      std::to_string(line_no));
    return v;
}

}  // namespace

std::vector<PredictionCacheRecord> parse_cache_csv(const std::string& text) {
    std::vector<PredictionCacheRecord> out;
    std::size_t start = 0;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        start = end + 1;
        ++line_no;
        if (line.empty()) {
            if (start > text.size()) break;
            continue;
        }
        if (!saw_header) {
            require_valid(line == kCacheHeader,
                          "prediction cache must start with header '" + std::string(kCacheHeader) +
                              "', got '" + line + "'");
            saw_header = true;
            continue;
        }
        const std::vector<std::string> f = split_fields(line);
        require_valid(f.size() == 6, "cache line " + std::to_string(line_no) + " has " +
                                         std::to_string(f.size()) + " fields, expected 6");
        PredictionCacheRecord rec;
        rec.cond_id = f[0];
        require_valid(!rec.cond_id.empty(), "empty cond_id on cache line " + std::to_string(line_no));
        rec.t_index = int(parse_int_field(f[1], "t_index", line_no));
        rec.dim = int(parse_int_field(f[2], "dim", line_no));
        rec.sum_cond = parse_real_field(f[3], "sum_cond", line_no);
        rec.sum_uncond = parse_real_field(f[4], "sum_uncond", line_no);
        rec.count = parse_int_field(f[5], "count", line_no);
        out.push_back(std::move(rec));
    }
    require_valid(saw_header, "prediction cache is empty");
    return out;
}

std::string cache_to_csv(const std::vector<PredictionCacheRecord>& records) {
    std::string out = kCacheHeader;
    out += '\n';
    for (const PredictionCacheRecord& rec : records) {
        out += rec.cond_id;
        out += ',' + std::to_string(rec.t_index);
        out += ',' + std::to_string(rec.dim);
        out += ',' + format_g17(rec.sum_cond);
        out += ',' + format_g17(rec.sum_uncond);
        out += ',' + std::to_string(rec.count);
        out += '\n';
    }
    return out;
}

Vec gamma0_for(const LookupTable& table, const Vec& gamma1, const std::string& cond_id,
               int t_index, ClampMode clamp_mode, bool allow_avg_fallback) {
    require_valid(t_index >= 0 && t_index < table.nfe(),
                  "t_index " + std::to_string(t_index) + " outside table grid with " +
                      std::to_string(table.nfe()) + " steps");
    require_valid(gamma1.size() == 1 || gamma1.size() == table.dim,
                  "gamma1 must be scalar or match table dimension");

    const std::vector<Vec>* tensor = nullptr;
    const auto it = table.ratios.find(cond_id);
    if (it != table.ratios.end()) {
        tensor = &it->second;
    } else if (allow_avg_fallback) {
        require(!table.avg.empty(), ErrorKind::lookup,
                "condition '" + cond_id + "' not in table and no averaged tensor is stored");
        tensor = &table.avg;
    } else {
        fail(ErrorKind::lookup,
             "condition '" + cond_id + "' not in table and averaged fallback is disabled");
    }

    const Vec& ratio = (*tensor)[std::size_t(t_index)];
    Vec g0(ratio.size());
    for (std::size_t d = 0; d < ratio.size(); ++d) {
        const double g1 = gamma1.size() == 1 ? gamma1[0] : gamma1[d];
        g0[d] = (1.0 - g1) * ratio[d];
    }
    return clamp_coeffs(GuidanceCoefficients{gamma1, std::move(g0), clamp_mode}).gamma0;
}

ObjectiveEstimate objective_L(const ScoreOracle& oracle, const AnalyticWorld& world,
                              const NoiseSchedule& sched, const TimeGrid& grid, const Vec& c,
                              const std::function<GuidanceCoefficients(int)>& coeffs_at,
                              std::size_t mc_samples, std::uint64_t seed) {
    require_valid(mc_samples >= 2, "objective estimate needs mc_samples >= 2");
    require_dim(c, world.dim, "objective condition");
    validate_grid(sched, grid);
    require_evaluation_sigmas(sched, grid);

    const std::size_t D = world.dim;
    const int K = grid.nfe();
    const Rng root(seed);
    const Rng x0s = root.child(0);
    const Rng eps = root.child(1);
    Vec sqrt_v1(D);
    for (std::size_t d = 0; d < D; ++d) sqrt_v1[d] = std::sqrt(world.cond_var[d]);

    std::vector<GuidanceCoefficients> coeffs;
    coeffs.reserve(std::size_t(K));
    for (int k = 0; k < K; ++k) coeffs.push_back(coeffs_at(k));

    // Per-draw value: squared residual averaged over the grid steps that
    // share the draw's x0. The per-draw values are i.i.d., so their spread
    // gives the standard error directly.
    Accumulator total;
    std::vector<double> per_draw(mc_samples);
    Vec x0(D), xt(D);
    for (std::size_t i = 0; i < mc_samples; ++i) {
        for (std::size_t d = 0; d < D; ++d) {
            x0[d] = c[d] + sqrt_v1[d] * x0s.normal(std::uint64_t(i) * D + d);
        }
        Accumulator over_steps;
        for (int k = 0; k < K; ++k) {
            const double t = grid.times[std::size_t(k)];
            const double a = sched.alpha(t);
            const double sig = sched.sigma(t);
            for (std::size_t d = 0; d < D; ++d) {
                const std::uint64_t ctr =
                    (std::uint64_t(i) * std::uint64_t(K) + std::uint64_t(k)) * D + d;
                xt[d] = a * x0[d] + sig * eps.normal(ctr);
            }
            const auto [ec, eu] = oracle.eps_pair(xt, c, t);
            const Vec res = residual_eps(ec, eu, coeffs[std::size_t(k)]);
            double sq = 0.0;
            for (double v : res) sq += v * v;
            over_steps.add(sq);
        }
        per_draw[i] = over_steps.value() / double(K);
        total.add(per_draw[i]);
    }

    ObjectiveEstimate out;
    out.samples = mc_samples;
    out.value = total.value() / double(mc_samples);
    Accumulator sqdev;
    for (double v : per_draw) {
        const double dev = v - out.value;
        sqdev.add(dev * dev);
    }
    out.se = std::sqrt(sqdev.value() / double(mc_samples - 1) / double(mc_samples));
    return out;
}

ObjectiveEstimate objective_L(const ScoreOracle& oracle, const AnalyticWorld& world,
                              const NoiseSchedule& sched, const TimeGrid& grid, const Vec& c,
                              const GuidanceCoefficients& coeffs, std::size_t mc_samples,
                              std::uint64_t seed) {
    return objective_L(oracle, world, sched, grid, c,
                       [&](int) { return coeffs; }, mc_samples, seed);
}

namespace {

json stats_to_json(const CellStats& st) {
    json j;
    j["mean_cond"] = encode_f64_tensor(st.mean_cond);
    j["mean_uncond"] = encode_f64_tensor(st.mean_uncond);
    j["m2_cond"] = encode_f64_tensor(st.m2_cond);
    j["m2_uncond"] = encode_f64_tensor(st.m2_uncond);
    j["m_cross"] = encode_f64_tensor(st.m_cross);
    return j;
}

CellStats stats_from_json(const json& j, std::size_t rows, std::size_t cols) {
    CellStats st;
    st.mean_cond = decode_f64_tensor(j.at("mean_cond").get<std::string>(), rows, cols);
    st.mean_uncond = decode_f64_tensor(j.at("mean_uncond").get<std::string>(), rows, cols);
    st.m2_cond = decode_f64_tensor(j.at("m2_cond").get<std::string>(), rows, cols);
    st.m2_uncond = decode_f64_tensor(j.at("m2_uncond").get<std::string>(), rows, cols);
    st.m_cross = decode_f64_tensor(j.at("m_cross").get<std::string>(), rows, cols);
    return st;
}

}  // namespace

std::string table_to_json(const LookupTable& table) {
    json j;
    j["schema_version"] = table.schema_version;
    j["model_id"] = table.model_id;
    j["build_seed"] = table.build_seed;
    j["dim"] = table.dim;
    j["grid"] = {{"T", table.grid.T}, {"times", table.grid.times}};
    j["cond_order"] = table.cond_order;
    json conds = json::object();
    for (const std::string& id : table.cond_order) {
        json entry;
        entry["ratio"] = encode_f64_tensor(table.ratios.at(id));
        entry["count"] = table.counts.at(id);
        const auto st = table.stats.find(id);
        if (st != table.stats.end()) entry["stats"] = stats_to_json(st->second);
        conds[id] = std::move(entry);
    }
    j["conditions"] = std::move(conds);
    j["avg"] = encode_f64_tensor(table.avg);
    j["warnings"] = table.warnings;
    return j.dump(1);
}

LookupTable table_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::schema,
             "table parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }

    // Version gate first, so old files get a clear upgrade message rather
    // than a missing-field one.
    int version = -1;
    try {
        const json& v = j.at("schema_version");
        if (v.is_string()) {
            version = std::stoi(v.get<std::string>());
        } else {
            version = v.get<int>();
        }
    } catch (const std::exception&) {
        fail(ErrorKind::schema, "table file lacks a readable schema_version field");
    }
    if (version != LookupTable{}.schema_version) {
        fail(ErrorKind::schema, "table schema version " + std::to_string(version) +
                                    " needs an upgrade; this build reads version " +
                                    std::to_string(LookupTable{}.schema_version));
    }

    LookupTable table;
    try {
        table.model_id = j.at("model_id").get<std::string>();
        table.build_seed = j.at("build_seed").get<std::uint64_t>();
        table.dim = j.at("dim").get<std::size_t>();
        table.grid.T = j.at("grid").at("T").get<double>();
        table.grid.times = j.at("grid").at("times").get<std::vector<double>>();
        table.cond_order = j.at("cond_order").get<std::vector<std::string>>();
        const std::size_t rows = table.grid.times.size() - 1;
        const json& conds = j.at("conditions");
        for (const std::string& id : table.cond_order) {
            const json& entry = conds.at(id);
            table.ratios[id] = decode_f64_tensor(entry.at("ratio").get<std::string>(), rows,
                                                 table.dim);
            table.counts[id] = entry.at("count").get<std::int64_t>();
            if (entry.contains("stats")) {
                table.stats[id] = stats_from_json(entry.at("stats"), rows, table.dim);
            }
        }
        table.avg = decode_f64_tensor(j.at("avg").get<std::string>(), rows, table.dim);
        table.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::schema, std::string("malformed table file: ") + e.what());
    }

    require(table.grid.times.size() >= 2, ErrorKind::schema,
            "table grid needs at least two time entries");
    for (const auto& [id, tensor] : table.ratios) require_finite_tensor(tensor, "ratio tensor " + id);
    require_finite_tensor(table.avg, "averaged tensor");
    return table;
}

void save_table(const LookupTable& table, const std::string& path) {
    write_text_file(path, table_to_json(table));
}

LookupTable load_table(const std::string& path) { return table_from_json(read_text_file(path)); }

}  // namespace recfg
