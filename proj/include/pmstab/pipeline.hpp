#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmstab/core_model.hpp"
#include "pmstab/csv.hpp"
#include "pmstab/decision.hpp"
#include "pmstab/errors.hpp"
#include "pmstab/fisher_info.hpp"
#include "pmstab/instability.hpp"
#include "pmstab/minss.hpp"
#include "pmstab/oracle.hpp"
#include "pmstab/population.hpp"
#include "pmstab/precision.hpp"
#include "pmstab/report.hpp"
#include "pmstab/summary.hpp"

namespace pmstab {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ThresholdConfig {
    double default_threshold = 0.0;
    std::string by;                         // optional grouping variable
    std::map<std::string, double> levels;   // per-level overrides
};

struct RunConfig {
    int schema_version = 1;

    // population: exactly one of the two sources
    std::optional<std::string> csv_path;
    std::vector<VariableSpec> csv_schema;
    std::optional<JointCellTable> sim_cells;
    std::vector<VariableSpec> sim_continuous;
    std::optional<num::SymMatrix> sim_corr;
    std::size_t sim_n = 0;
    std::optional<std::uint64_t> sim_seed;

    std::vector<std::string> standardize_vars;

    // core model: explicit parameters or a calibration target
    std::vector<double> betas;
    std::vector<std::string> predictor_names;
    std::optional<double> alpha;
    std::optional<double> delta;
    std::optional<CalibrationTarget> target;

    std::vector<std::size_t> sample_sizes;
    std::vector<std::pair<double, double>> bands; // (risk, max_width)
    std::optional<double> uniform_width;
    std::optional<ThresholdConfig> threshold;
    std::vector<std::string> group_vars;
    int mape_draws = 1000;
    std::optional<MinSampleSpec> minss;

    std::optional<std::uint64_t> seed;
    std::string output_dir;

    bool needs_simulation() const { return sim_cells.has_value() || !sim_continuous.empty(); }
    bool has_analysis() const { return !sample_sizes.empty() || !bands.empty() || uniform_width || minss; }
};

namespace cfg {

inline void require_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError(where + "/" + it.key() + ": unknown key");
        }
    }
}

inline const json& need(const json& obj, const std::string& where, const std::string& key) {
    if (!obj.contains(key)) throw ConfigError(where + "/" + key + ": missing");
    return obj.at(key);
}

inline double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    return v.get<double>();
}

inline std::vector<VariableSpec> parse_schema(const json& arr, const std::string& where) {
    if (!arr.is_array()) throw ConfigError(where + ": expected an array of variable specs");
    std::vector<VariableSpec> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string here = where + "/" + std::to_string(i);
        const json& v = arr.at(i);
        require_keys(v, here, {"name", "kind", "levels", "mean", "sd"});
        const std::string name = need(v, here, "name").get<std::string>();
        const std::string kind = need(v, here, "kind").get<std::string>();
        if (kind == "binary") {
            out.push_back(VariableSpec::binary(name));
        } else if (kind == "continuous") {
            out.push_back(VariableSpec::continuous(name, v.value("mean", 0.0), v.value("sd", 1.0)));
        } else if (kind == "categorical") {
            const json& levels = need(v, here, "levels");
            out.push_back(VariableSpec::categorical(name, levels.get<std::vector<std::string>>()));
        } else {
            throw ConfigError(here + "/kind: must be binary, continuous or categorical");
        }
    }
    return out;
}

inline std::vector<std::string> split_combination(const std::string& key) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : key) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

} // namespace cfg

inline RunConfig parse_config(const json& root) {
    using namespace cfg;
    RunConfig c;
    require_keys(root, "", {"schema_version", "seed", "output_dir", "population", "standardize",
                            "core_model", "sample_sizes", "bands", "threshold", "group_vars",
                            "mape_draws", "minss"});
    c.schema_version = need(root, "", "schema_version").get<int>();
    if (c.schema_version != 1) throw ConfigError("/schema_version: only version 1 is supported");
    if (root.contains("seed")) c.seed = root.at("seed").get<std::uint64_t>();
    if (root.contains("output_dir")) c.output_dir = root.at("output_dir").get<std::string>();

    const json& pop = need(root, "", "population");
    require_keys(pop, "/population", {"csv", "simulate"});
    if (pop.contains("csv") == pop.contains("simulate")) {
        throw ConfigError("/population: exactly one of csv or simulate is required");
    }
    if (pop.contains("csv")) {
        const json& f = pop.at("csv");
        require_keys(f, "/population/csv", {"path", "schema"});
        c.csv_path = need(f, "/population/csv", "path").get<std::string>();
        c.csv_schema = parse_schema(need(f, "/population/csv", "schema"), "/population/csv/schema");
    } else {
        const json& s = pop.at("simulate");
        require_keys(s, "/population/simulate", {"variables", "cells", "continuous", "corr", "n", "seed"});
        c.sim_n = need(s, "/population/simulate", "n").get<std::size_t>();
        if (s.contains("seed")) c.sim_seed = s.at("seed").get<std::uint64_t>();
        if (s.contains("cells")) {
            JointCellTable table;
            table.variables = need(s, "/population/simulate", "variables").get<std::vector<std::string>>();
            const json& cells = s.at("cells");
            if (!cells.is_object() || cells.empty()) {
                throw ConfigError("/population/simulate/cells: expected combination -> weight pairs");
            }
            for (auto it = cells.begin(); it != cells.end(); ++it) {
                JointCellTable::Cell cell;
                cell.values = split_combination(it.key());
                if (cell.values.size() != table.variables.size()) {
                    throw ConfigError("/population/simulate/cells/" + it.key() + ": expected " +
                                      std::to_string(table.variables.size()) + " comma-separated values");
                }
                cell.probability = as_number(it.value(), "/population/simulate/cells/" + it.key());
                table.cells.push_back(cell);
            }
            // weights are normalised: published tables often total ~100% only
            c.sim_cells = JointCellTable::normalized(table);
        } else if (s.contains("variables")) {
            throw ConfigError("/population/simulate/variables: given without cells");
        }
        if (s.contains("continuous")) {
            const json& cont = s.at("continuous");
            if (!cont.is_object()) throw ConfigError("/population/simulate/continuous: expected name -> {mean, sd}");
            for (auto it = cont.begin(); it != cont.end(); ++it) {
                const std::string here = "/population/simulate/continuous/" + it.key();
                require_keys(it.value(), here, {"mean", "sd"});
                c.sim_continuous.push_back(VariableSpec::continuous(
                    it.key(), as_number(need(it.value(), here, "mean"), here + "/mean"),
                    as_number(need(it.value(), here, "sd"), here + "/sd")));
            }
        }
        if (s.contains("corr")) {
            const json& corr = s.at("corr");
            const std::size_t d = c.sim_continuous.size();
            if (!corr.is_array() || corr.size() != d) {
                throw ConfigError("/population/simulate/corr: expected a " + std::to_string(d) + "x" +
                                  std::to_string(d) + " matrix");
            }
            num::SymMatrix m(static_cast<int>(d));
            for (std::size_t i = 0; i < d; ++i) {
                if (!corr.at(i).is_array() || corr.at(i).size() != d) {
                    throw ConfigError("/population/simulate/corr/" + std::to_string(i) + ": wrong row length");
                }
                for (std::size_t j = 0; j < d; ++j) {
                    m.set(static_cast<int>(i), static_cast<int>(j),
                          as_number(corr.at(i).at(j), "/population/simulate/corr"));
                }
            }
            c.sim_corr = m;
        }
        if (!c.sim_cells && c.sim_continuous.empty()) {
            throw ConfigError("/population/simulate: needs cells and/or continuous variables");
        }
        if (c.sim_n < 1) throw ConfigError("/population/simulate/n: must be >= 1");
    }

    if (root.contains("standardize")) {
        c.standardize_vars = root.at("standardize").get<std::vector<std::string>>();
    }

    const json& cm = need(root, "", "core_model");
    require_keys(cm, "/core_model", {"betas", "predictors", "alpha", "delta", "target"});
    c.betas = need(cm, "/core_model", "betas").get<std::vector<double>>();
    if (cm.contains("predictors")) c.predictor_names = cm.at("predictors").get<std::vector<std::string>>();
    if (cm.contains("alpha")) c.alpha = as_number(cm.at("alpha"), "/core_model/alpha");
    if (cm.contains("delta")) c.delta = as_number(cm.at("delta"), "/core_model/delta");
    if (cm.contains("target")) {
        const json& t = cm.at("target");
        require_keys(t, "/core_model/target", {"overall_risk", "c_statistic", "tol_risk", "tol_c"});
        CalibrationTarget target;
        target.overall_risk = as_number(need(t, "/core_model/target", "overall_risk"), "/core_model/target/overall_risk");
        target.c_statistic = as_number(need(t, "/core_model/target", "c_statistic"), "/core_model/target/c_statistic");
        target.tol_risk = t.value("tol_risk", 1e-3);
        target.tol_c = t.value("tol_c", 1e-3);
        c.target = target;
    }
    if (c.target.has_value() == c.alpha.has_value()) {
        throw ConfigError("/core_model: give either alpha (+ optional delta) or target, not both");
    }

    if (root.contains("sample_sizes")) {
        c.sample_sizes = root.at("sample_sizes").get<std::vector<std::size_t>>();
        for (std::size_t n : c.sample_sizes) {
            if (n < 1) throw ConfigError("/sample_sizes: entries must be >= 1");
        }
    }
    if (root.contains("bands")) {
        const json& b = root.at("bands");
        if (b.is_object()) {
            require_keys(b, "/bands", {"uniform_width"});
            c.uniform_width = as_number(need(b, "/bands", "uniform_width"), "/bands/uniform_width");
        } else if (b.is_array()) {
            for (std::size_t i = 0; i < b.size(); ++i) {
                const std::string here = "/bands/" + std::to_string(i);
                require_keys(b.at(i), here, {"risk", "max_width"});
                c.bands.emplace_back(as_number(need(b.at(i), here, "risk"), here + "/risk"),
                                     as_number(need(b.at(i), here, "max_width"), here + "/max_width"));
            }
        } else {
            throw ConfigError("/bands: expected an array of bands or {uniform_width}");
        }
    }
    if (root.contains("threshold")) {
        const json& t = root.at("threshold");
        ThresholdConfig tc;
        if (t.is_number()) {
            tc.default_threshold = t.get<double>();
        } else {
            require_keys(t, "/threshold", {"default", "by", "levels"});
            tc.default_threshold = as_number(need(t, "/threshold", "default"), "/threshold/default");
            tc.by = need(t, "/threshold", "by").get<std::string>();
            const json& levels = need(t, "/threshold", "levels");
            for (auto it = levels.begin(); it != levels.end(); ++it) {
                tc.levels[it.key()] = as_number(it.value(), "/threshold/levels/" + it.key());
            }
        }
        if (!(tc.default_threshold > 0.0 && tc.default_threshold < 1.0)) {
            throw ConfigError("/threshold: must lie in (0,1)");
        }
        c.threshold = tc;
    }
    if (root.contains("group_vars")) c.group_vars = root.at("group_vars").get<std::vector<std::string>>();
    if (root.contains("mape_draws")) {
        c.mape_draws = root.at("mape_draws").get<int>();
        if (c.mape_draws < 1) throw ConfigError("/mape_draws: must be >= 1");
    }
    if (root.contains("minss")) {
        const json& m = root.at("minss");
        require_keys(m, "/minss", {"p_params", "overall_risk", "r2_cs", "shrinkage", "margin_risk", "optimism"});
        MinSampleSpec spec;
        spec.p_params = need(m, "/minss", "p_params").get<int>();
        spec.overall_risk = as_number(need(m, "/minss", "overall_risk"), "/minss/overall_risk");
        spec.r2_cs = as_number(need(m, "/minss", "r2_cs"), "/minss/r2_cs");
        spec.shrinkage = m.value("shrinkage", 0.9);
        spec.margin_risk = m.value("margin_risk", 0.05);
        spec.optimism = m.value("optimism", 0.05);
        c.minss = spec;
    }

    if (!c.has_analysis()) {
        throw ConfigError("/: no analysis requested; add sample_sizes, bands or minss");
    }
    // MAPE draws make every option A run stochastic, hence the seed rule.
    if ((c.needs_simulation() || !c.sample_sizes.empty()) && !c.seed && !c.sim_seed) {
        throw ConfigError("/seed: required when simulation or sampling is requested");
    }
    return c;
}

// The PMSTAB_SEED fallback is injected before parsing, so the digest covers
// the seed that actually ran.
inline json load_config_json(const std::string& path, std::optional<std::uint64_t> fallback_seed = {}) {
    json root;
    try {
        root = json::parse(csv::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (root.is_object() && !root.contains("seed") && fallback_seed) {
        root["seed"] = *fallback_seed;
    }
    return root;
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

inline std::string fnv1a_hex(const std::string& bytes) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(num::RngStream::fnv1a(bytes)));
    return buf;
}

// Digest of the configuration with output_dir removed, so runs into different
// directories stay byte-identical.
inline std::string config_digest(const json& root) {
    json stripped = root;
    stripped.erase("output_dir");
    return fnv1a_hex(stripped.dump());
}

// ---------------------------------------------------------------------------
// Staged execution. Every stage reads its inputs from the run directory and
// writes its outputs back there, so single-stage subcommands and the one-shot
// pipeline produce identical files.
// ---------------------------------------------------------------------------

struct RunContext {
    RunConfig cfg;
    json raw;
    std::filesystem::path dir;
    std::string runid;

    static RunContext make(json raw_config, const std::string& output_dir_override = "") {
        RunContext ctx;
        ctx.cfg = parse_config(raw_config);
        ctx.raw = std::move(raw_config);
        const std::string dir = !output_dir_override.empty() ? output_dir_override : ctx.cfg.output_dir;
        if (dir.empty()) throw ConfigError("/output_dir: missing (and no --out given)");
        ctx.dir = dir;
        ctx.runid = config_digest(ctx.raw).substr(0, 12);
        std::filesystem::create_directories(ctx.dir);
        return ctx;
    }

    std::uint64_t seed() const {
        if (cfg.seed) return *cfg.seed;
        if (cfg.sim_seed) return *cfg.sim_seed;
        throw ConfigError("/seed: missing");
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    void write(std::vector<std::string>& written, const std::string& name, const std::string& content) const {
        csv::write_file(path(name), content);
        written.push_back(name);
    }

    std::string read(const std::string& name) const {
        if (!std::filesystem::exists(dir / name)) {
            throw StageMissing(name + " not found in " + dir.string() + "; run the earlier stage first");
        }
        return csv::read_file(path(name));
    }
};

namespace stage {

inline json variable_to_json(const VariableSpec& v) {
    json j;
    j["name"] = v.name;
    switch (v.kind) {
        case VarKind::binary: j["kind"] = "binary"; break;
        case VarKind::continuous: j["kind"] = "continuous"; break;
        case VarKind::categorical:
            j["kind"] = "categorical";
            j["levels"] = v.levels;
            break;
    }
    return j;
}

inline VariableSpec variable_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "binary") return VariableSpec::binary(j.at("name").get<std::string>());
    if (kind == "continuous") return VariableSpec::continuous(j.at("name").get<std::string>(), 0.0, 1.0);
    return VariableSpec::categorical(j.at("name").get<std::string>(),
                                     j.at("levels").get<std::vector<std::string>>());
}

// Step 2: obtain the population (simulate or ingest), then standardize.
inline std::vector<std::string> run_population(const RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    Dataset ds = [&] {
        if (cfg.csv_path) return load_csv(*cfg.csv_path, cfg.csv_schema);
        const std::uint64_t seed = cfg.sim_seed ? *cfg.sim_seed : ctx.seed();
        return simulate_joint(cfg.sim_cells ? *cfg.sim_cells : JointCellTable{}, cfg.sim_continuous,
                              cfg.sim_corr, cfg.sim_n, num::RngStream(seed, "simulate"));
    }();
    if (!cfg.standardize_vars.empty()) ds = standardize(ds, cfg.standardize_vars);

    json meta;
    meta["n"] = ds.n();
    meta["variables"] = json::array();
    for (const auto& v : ds.variables()) meta["variables"].push_back(variable_to_json(v));
    meta["standardization"] = json::array();
    for (const auto& s : ds.standardization()) {
        meta["standardization"].push_back(json{{"variable", s.variable}, {"mean", s.mean}, {"sd", s.sd}});
    }

    std::vector<std::string> written;
    ctx.write(written, "population.csv", to_csv(ds));
    ctx.write(written, "population_meta.json", meta.dump(2) + "\n");
    return written;
}

inline Dataset read_population(const RunContext& ctx) {
    const json meta = json::parse(ctx.read("population_meta.json"));
    std::vector<VariableSpec> vars;
    for (const auto& v : meta.at("variables")) vars.push_back(variable_from_json(v));
    const auto rows = csv::parse(ctx.read("population.csv"));
    const std::size_t n = meta.at("n").get<std::size_t>();
    if (rows.size() != n + 1) throw ParseError("population.csv row count does not match metadata");
    Dataset ds(vars, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i + 1];
        if (static_cast<int>(row.size()) != ds.n_columns()) throw ParseError("population.csv column mismatch");
        for (int c = 0; c < ds.n_columns(); ++c) {
            ds.set_value(i, c, std::strtod(row[static_cast<std::size_t>(c)].c_str(), nullptr));
        }
    }
    std::vector<Standardization> std_info;
    for (const auto& s : meta.at("standardization")) {
        std_info.push_back({s.at("variable").get<std::string>(), s.at("mean").get<double>(),
                            s.at("sd").get<double>()});
    }
    ds.set_standardization(std_info);
    return ds;
}

// Step 3: resolve the core model, by calibration when a target is given.
inline std::vector<std::string> run_model(const RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const Dataset ds = read_population(ctx);
    CoreModel model;
    if (cfg.alpha) {
        model = CoreModel{*cfg.alpha, cfg.delta.value_or(1.0), cfg.betas, cfg.predictor_names};
    } else {
        model = calibrate(ds, cfg.betas, *cfg.target, cfg.predictor_names);
    }
    if (static_cast<int>(model.betas.size()) != ds.n_columns()) {
        throw DimensionMismatch("core model has " + std::to_string(model.betas.size()) +
                                " weights but the population has " + std::to_string(ds.n_columns()) +
                                " columns");
    }

    json j;
    j["alpha"] = model.alpha;
    j["delta"] = model.delta;
    j["betas"] = model.betas;
    j["predictors"] = model.predictor_names.empty() ? ds.column_names() : model.predictor_names;
    j["achieved"] = {{"mean_risk", mean_risk(model, ds)},
                     {"c_statistic", model_c_statistic(model, ds)},
                     {"cox_snell_r2", cox_snell_r2(model, ds)}};
    std::vector<std::string> written;
    ctx.write(written, "model.json", j.dump(2) + "\n");
    return written;
}

inline CoreModel read_model(const RunContext& ctx) {
    const json j = json::parse(ctx.read("model.json"));
    CoreModel m;
    m.alpha = j.at("alpha").get<double>();
    m.delta = j.at("delta").get<double>();
    m.betas = j.at("betas").get<std::vector<double>>();
    m.predictor_names = j.at("predictors").get<std::vector<std::string>>();
    return m;
}

inline std::string size_tag(std::size_t n) { return "n" + std::to_string(n); }

// Steps 4 + 5: unit information, option A per requested n, option B bands.
inline std::vector<std::string> run_precision(const RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const Dataset ds = read_population(ctx);
    const CoreModel model = read_model(ctx);
    const UnitInformation info = unit_information(model, ds);

    std::vector<std::string> written;
    ctx.write(written, "unit_information.csv", to_csv(info));

    for (std::size_t n : cfg.sample_sizes) {
        const OptionAResult res = option_a(model, ds, info, n);
        ctx.write(written, "precision_" + size_tag(n) + ".csv", to_csv(res.records));
    }

    if (cfg.uniform_width || !cfg.bands.empty()) {
        OptionBResult res;
        std::vector<BandTarget> bands;
        if (cfg.uniform_width) {
            res = option_b_uniform_width(model, ds, info, *cfg.uniform_width);
        } else {
            for (const auto& [risk, width] : cfg.bands) bands.push_back(make_band(risk, width));
            res = option_b(model, ds, info, bands);
        }
        std::string rows = "row_index,true_risk,band,required_n\n";
        for (std::size_t i = 0; i < res.per_row_n.size(); ++i) {
            rows += std::to_string(i) + ',' + csv::format_double(risk(model, ds.row(i))) + ',' +
                    std::to_string(res.band_of_row[i]) + ',' + std::to_string(res.per_row_n[i]) + '\n';
        }
        ctx.write(written, "sample_size.csv", rows);

        std::string summary = "band,risk,max_width,max_var,rows,max_required_n\n";
        const std::size_t n_bands = cfg.uniform_width ? 1 : bands.size();
        for (std::size_t b = 0; b < n_bands; ++b) {
            long long worst = 0;
            std::size_t count = 0;
            for (std::size_t i = 0; i < res.per_row_n.size(); ++i) {
                if (res.band_of_row[i] == b) {
                    worst = std::max(worst, res.per_row_n[i]);
                    ++count;
                }
            }
            if (cfg.uniform_width) {
                summary += "uniform,," + csv::format_double(*cfg.uniform_width) + ",," +
                           std::to_string(count) + ',' + std::to_string(worst) + '\n';
            } else {
                summary += std::to_string(b) + ',' + csv::format_double(bands[b].risk) + ',' +
                           csv::format_double(bands[b].max_width) + ',' +
                           csv::format_double(bands[b].max_var) + ',' + std::to_string(count) + ',' +
                           std::to_string(worst) + '\n';
            }
        }
        summary += "required,,,,," + std::to_string(res.required_n) + '\n';
        ctx.write(written, "sample_size_summary.csv", summary);
    }
    return written;
}

inline std::vector<PrecisionRecord> read_precision(const RunContext& ctx, std::size_t n) {
    const auto rows = csv::parse(ctx.read("precision_" + size_tag(n) + ".csv"));
    std::vector<PrecisionRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 6) throw ParseError("precision csv: bad row " + std::to_string(i));
        PrecisionRecord rec;
        rec.row_index = static_cast<std::size_t>(std::stoull(r[0]));
        rec.true_risk = std::strtod(r[1].c_str(), nullptr);
        rec.var_logit = std::strtod(r[2].c_str(), nullptr);
        rec.lower = std::strtod(r[3].c_str(), nullptr);
        rec.upper = std::strtod(r[4].c_str(), nullptr);
        rec.width = std::strtod(r[5].c_str(), nullptr);
        out.push_back(rec);
    }
    return out;
}

inline std::vector<std::optional<double>> per_row_thresholds(const RunConfig& cfg, const Dataset& ds) {
    std::vector<std::optional<double>> out(ds.n());
    if (!cfg.threshold) return out;
    const ThresholdConfig& tc = *cfg.threshold;
    int vi = -1;
    if (!tc.by.empty()) {
        vi = ds.variable_index(tc.by);
        if (vi < 0) throw UnknownVariable("/threshold/by: no variable named '" + tc.by + "'");
    }
    for (std::size_t i = 0; i < ds.n(); ++i) {
        double t = tc.default_threshold;
        if (vi >= 0) {
            auto it = tc.levels.find(ds.level_of(i, vi));
            if (it != tc.levels.end()) t = it->second;
        }
        out[i] = t;
    }
    return out;
}

// 3.2-style metrics and summary tables, overall and per subgroup.
inline std::vector<std::string> run_instability(const RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const Dataset ds = read_population(ctx);
    const num::RngStream rng(ctx.seed(), "instability");

    std::vector<std::string> written;
    for (std::size_t n : cfg.sample_sizes) {
        const std::vector<PrecisionRecord> precision = read_precision(ctx, n);
        const auto thresholds = per_row_thresholds(cfg, ds);
        const auto inst = compute_instability(precision, thresholds, cfg.mape_draws,
                                              rng.derive(size_tag(n)));
        ctx.write(written, "instability_" + size_tag(n) + ".csv", to_csv(inst));

        std::vector<VariableSpec> vars = ds.variables();
        // an "all" pseudo-group gives the overall row through the same code path
        std::vector<SummaryTable> overall;
        {
            std::vector<double> widths, mapes, mis;
            for (std::size_t i = 0; i < precision.size(); ++i) {
                widths.push_back(precision[i].width);
                mapes.push_back(inst[i].mape);
                if (inst[i].misclass_prob) mis.push_back(*inst[i].misclass_prob);
            }
            SummaryTable t;
            t.group_label = "Overall";
            t.group_n = precision.size();
            t.width = summarize(widths);
            t.mape = summarize(mapes);
            if (!mis.empty()) t.misclass = summarize(mis);
            overall.push_back(t);
        }
        ctx.write(written, "summary_" + size_tag(n) + ".csv", summary_to_csv(overall));
        ctx.write(written, "summary_" + size_tag(n) + ".txt", summary_to_text(overall));

        for (const auto& var : cfg.group_vars) {
            const auto tables = group_summary(precision, inst, ds, var);
            ctx.write(written, "summary_" + size_tag(n) + "_by_" + var + ".csv", summary_to_csv(tables));
            ctx.write(written, "summary_" + size_tag(n) + "_by_" + var + ".txt", summary_to_text(tables));
        }
    }
    return written;
}

inline std::vector<InstabilityRecord> read_instability(const RunContext& ctx, std::size_t n) {
    const auto rows = csv::parse(ctx.read("instability_" + size_tag(n) + ".csv"));
    std::vector<InstabilityRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 4) throw ParseError("instability csv: bad row " + std::to_string(i));
        InstabilityRecord rec;
        rec.row_index = static_cast<std::size_t>(std::stoull(r[0]));
        rec.true_risk = std::strtod(r[1].c_str(), nullptr);
        if (!r[2].empty()) rec.misclass_prob = std::strtod(r[2].c_str(), nullptr);
        rec.mape = std::strtod(r[3].c_str(), nullptr);
        out.push_back(rec);
    }
    return out;
}

// Figures: prediction instability per n, classification instability when a
// threshold is configured.
inline std::vector<std::string> run_report(const RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    std::vector<std::string> written;
    for (std::size_t n : cfg.sample_sizes) {
        const auto precision = read_precision(ctx, n);
        const PlotOutput pred = prediction_instability_plot(
            precision, true, "Prediction instability (n = " + std::to_string(n) + ")");
        const std::string stem = ctx.runid + "_" + size_tag(n);
        ctx.write(written, stem + "_prediction_instability.svg", pred.svg);
        ctx.write(written, stem + "_prediction_instability.csv", pred.csv);

        if (cfg.threshold) {
            const auto inst = read_instability(ctx, n);
            const double t = cfg.threshold->default_threshold;
            const PlotOutput cls = classification_instability_plot(
                inst, t,
                "Classification instability (n = " + std::to_string(n) + ", t = " + csv::format_double(t) + ")");
            ctx.write(written, stem + "_classification_instability.svg", cls.svg);
            ctx.write(written, stem + "_classification_instability.csv", cls.csv);
        }
    }
    return written;
}

inline std::vector<std::string> run_minss(const RunContext& ctx) {
    if (!ctx.cfg.minss) return {};
    const MinSampleResult r = min_sample_size(*ctx.cfg.minss);
    std::string table = "name,value\n";
    table += "n1_overall_risk," + std::to_string(r.n1) + '\n';
    table += "n2_shrinkage," + std::to_string(r.n2) + '\n';
    table += "n3_optimism," + std::to_string(r.n3) + '\n';
    table += "n_final," + std::to_string(r.n_final) + '\n';
    table += "events," + std::to_string(r.events) + '\n';
    table += "events_per_parameter," + csv::format_double(r.epp) + '\n';
    table += "shrinkage_for_optimism," + csv::format_double(r.s_required) + '\n';
    std::vector<std::string> written;
    ctx.write(written, "minss.csv", table);
    return written;
}

// Supplement-style validation: empirical spread of refitted predictions
// against the closed-form decomposition, per distinct covariate pattern.
inline std::vector<std::string> run_oracle(const RunContext& ctx, std::size_t n, int reps) {
    const Dataset ds = read_population(ctx);
    const CoreModel model = read_model(ctx);
    const UnitInformation info = unit_information(model, ds);

    // evaluation set: distinct covariate patterns, capped
    constexpr std::size_t kMaxPatterns = 256;
    std::map<std::vector<double>, std::size_t> seen;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.n() && rows.size() < kMaxPatterns; ++i) {
        std::vector<double> key(ds.row(i).begin(), ds.row(i).end());
        if (seen.emplace(std::move(key), i).second) rows.push_back(i);
    }
    Dataset eval(ds.variables(), rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < ds.n_columns(); ++c) eval.set_value(r, c, ds.value(rows[r], c));
    }

    const StabilityResult stab =
        empirical_stability(model, ds, n, reps, num::RngStream(ctx.seed(), "oracle-root"), &eval);
    std::vector<double> closed(eval.n());
    for (std::size_t i = 0; i < eval.n(); ++i) closed[i] = std::sqrt(var_logit(info, n, eval.row(i)));
    const RatioTable ratios = compare_to_closed_form(stab.logit_sd, closed);

    std::string out = "pattern,true_risk,empirical_sd,closed_form_se,ratio,lower,upper\n";
    for (std::size_t i = 0; i < eval.n(); ++i) {
        out += std::to_string(i) + ',' + csv::format_double(risk(model, eval.row(i))) + ',' +
               csv::format_double(stab.logit_sd[i]) + ',' + csv::format_double(closed[i]) + ',' +
               csv::format_double(ratios.ratio[i]) + ',' + csv::format_double(stab.lower[i]) + ',' +
               csv::format_double(stab.upper[i]) + '\n';
    }
    out += "summary,,,,mean_abs_log_ratio," + csv::format_double(ratios.mean_abs_log_ratio) + ",\n";
    out += "summary,,,,max_abs_log_ratio," + csv::format_double(ratios.max_abs_log_ratio) + ",\n";
    std::vector<std::string> written;
    ctx.write(written, "oracle_" + size_tag(n) + ".csv", out);
    return written;
}

} // namespace stage

// One-shot pipeline: steps 1-5 plus the run manifest. Returns the manifest.
inline json run_pipeline(const RunContext& ctx) {
    std::vector<std::string> written;
    auto append = [&](std::vector<std::string> more) {
        written.insert(written.end(), more.begin(), more.end());
    };
    append(stage::run_population(ctx));
    append(stage::run_model(ctx));
    append(stage::run_precision(ctx));
    if (!ctx.cfg.sample_sizes.empty()) append(stage::run_instability(ctx));
    append(stage::run_report(ctx));
    append(stage::run_minss(ctx));

    json manifest;
    manifest["schema_version"] = 1;
    manifest["config_digest"] = config_digest(ctx.raw);
    manifest["seed"] = ctx.seed();
    std::map<std::string, std::string> hashes;
    for (const auto& name : written) {
        hashes[name] = "fnv1a64:" + fnv1a_hex(csv::read_file(ctx.path(name)));
    }
    manifest["outputs"] = hashes;
    csv::write_file(ctx.path("run.json"), manifest.dump(2) + "\n");
    return manifest;
}

} // namespace pmstab
