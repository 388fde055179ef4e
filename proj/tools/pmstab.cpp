// pmstab: sample-size planning for precise and fair individual risk
// predictions from a logistic core model.
//
//   pmstab run --config cfg.json [--out dir]     five-step pipeline
//   pmstab simulate|calibrate|precision|instability|report --config cfg.json
//   pmstab minss --p 3 --risk 0.059 --r2 0.0577  minimum sample size criteria
//   pmstab threshold --u 100 5 0 10              utility-based risk threshold
//   pmstab oracle --config cfg.json --n 1224     refit-based validation

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmstab/pipeline.hpp"

namespace {

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("PMSTAB_SEED");
    if (!s || !*s) return std::nullopt;
    return std::strtoull(s, nullptr, 10);
}

pmstab::RunContext make_context(const std::string& config_path, const std::string& out_override) {
    return pmstab::RunContext::make(pmstab::load_config_json(config_path, env_seed()), out_override);
}

void print_minss(const pmstab::MinSampleSpec& spec) {
    const pmstab::MinSampleResult r = pmstab::min_sample_size(spec);
    auto line = [&](const char* label, long long n, bool binding) {
        std::printf("%-42s %8lld%s\n", label, n, binding ? "  <- binding" : "");
    };
    std::printf("minimum sample size criteria (P = %d, overall risk = %g, R2_cs = %g)\n",
                spec.p_params, spec.overall_risk, spec.r2_cs);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "(i)   precise overall risk (+/- %.3f)", spec.margin_risk);
    line(buf, r.n1, r.n_final == r.n1);
    std::snprintf(buf, sizeof(buf), "(ii)  shrinkage S >= %.3f", spec.shrinkage);
    line(buf, r.n2, r.n_final == r.n2);
    std::snprintf(buf, sizeof(buf), "(iii) optimism <= %.3f (S = %.3f)", spec.optimism, r.s_required);
    line(buf, r.n3, r.n_final == r.n3);
    std::printf("%-42s %8lld\n", "minimum sample size", r.n_final);
    std::printf("%-42s %8lld\n", "expected events", r.events);
    std::printf("%-42s %8.2f\n", "events per parameter", r.epp);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sample-size planning for stable individual-level risk prediction"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    auto add_config = [&](CLI::App* cmd, bool out_required = false) {
        cmd->add_option("--config", config_path, "run configuration (JSON)")->required();
        auto* opt = cmd->add_option("--out", out_dir, "output directory (overrides config)");
        if (out_required) opt->required();
    };

    auto* cmd_run = app.add_subcommand("run", "execute the full five-step pipeline");
    add_config(cmd_run);
    auto* cmd_sim = app.add_subcommand("simulate", "step 2: build the population");
    add_config(cmd_sim);
    auto* cmd_cal = app.add_subcommand("calibrate", "step 3: resolve or calibrate the core model");
    add_config(cmd_cal);
    auto* cmd_pre = app.add_subcommand("precision", "steps 4-5: unit information, option A/B");
    add_config(cmd_pre);
    auto* cmd_ins = app.add_subcommand("instability", "classification instability, MAPE, summaries");
    add_config(cmd_ins);
    auto* cmd_rep = app.add_subcommand("report", "prediction/classification instability plots");
    add_config(cmd_rep);

    auto* cmd_oracle = app.add_subcommand("oracle", "empirical refit validation of the closed form");
    add_config(cmd_oracle);
    std::size_t oracle_n = 0;
    int oracle_reps = 500;
    cmd_oracle->add_option("--n", oracle_n, "development sample size per replicate");
    cmd_oracle->add_option("--reps", oracle_reps, "number of replicates");

    auto* cmd_minss = app.add_subcommand("minss", "minimum sample size criteria (i)-(iii)");
    pmstab::MinSampleSpec minss_spec;
    std::string minss_config;
    cmd_minss->add_option("--p", minss_spec.p_params, "candidate predictor parameters");
    cmd_minss->add_option("--risk", minss_spec.overall_risk, "anticipated overall outcome risk");
    cmd_minss->add_option("--r2", minss_spec.r2_cs, "anticipated Cox-Snell R^2");
    cmd_minss->add_option("--shrinkage", minss_spec.shrinkage, "target uniform shrinkage (default 0.9)");
    cmd_minss->add_option("--margin", minss_spec.margin_risk, "risk margin for criterion (i) (default 0.05)");
    cmd_minss->add_option("--optimism", minss_spec.optimism, "optimism for criterion (iii) (default 0.05)");
    cmd_minss->add_option("--config", minss_config, "take the minss block from a run configuration");
    cmd_minss->add_option("--out", out_dir, "also write minss.csv into this run directory");

    auto* cmd_thresh = app.add_subcommand("threshold", "utility-based decision threshold");
    std::vector<double> utilities;
    double thresh_p = -1.0;
    cmd_thresh->add_option("--u", utilities, "utilities: act/present act/absent no-act/present no-act/absent")
        ->expected(4)
        ->required();
    cmd_thresh->add_option("--risk", thresh_p, "also report expected utilities at this risk");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            const auto ctx = make_context(config_path, out_dir);
            const pmstab::json manifest = pmstab::run_pipeline(ctx);
            std::printf("run %s complete: %zu artifacts in %s\n",
                        manifest.at("config_digest").get<std::string>().c_str(),
                        manifest.at("outputs").size(), ctx.dir.string().c_str());
        } else if (cmd_sim->parsed()) {
            for (const auto& f : pmstab::stage::run_population(make_context(config_path, out_dir))) {
                std::printf("wrote %s\n", f.c_str());
            }
        } else if (cmd_cal->parsed()) {
            const auto ctx = make_context(config_path, out_dir);
            for (const auto& f : pmstab::stage::run_model(ctx)) std::printf("wrote %s\n", f.c_str());
            const pmstab::json j = pmstab::json::parse(pmstab::csv::read_file(ctx.path("model.json")));
            std::printf("alpha = %.6g, delta = %.6g, mean risk = %.6g, C = %.6g\n",
                        j.at("alpha").get<double>(), j.at("delta").get<double>(),
                        j.at("achieved").at("mean_risk").get<double>(),
                        j.at("achieved").at("c_statistic").get<double>());
        } else if (cmd_pre->parsed()) {
            for (const auto& f : pmstab::stage::run_precision(make_context(config_path, out_dir))) {
                std::printf("wrote %s\n", f.c_str());
            }
        } else if (cmd_ins->parsed()) {
            for (const auto& f : pmstab::stage::run_instability(make_context(config_path, out_dir))) {
                std::printf("wrote %s\n", f.c_str());
            }
        } else if (cmd_rep->parsed()) {
            for (const auto& f : pmstab::stage::run_report(make_context(config_path, out_dir))) {
                std::printf("wrote %s\n", f.c_str());
            }
        } else if (cmd_oracle->parsed()) {
            const auto ctx = make_context(config_path, out_dir);
            std::size_t n = oracle_n;
            if (n == 0) {
                if (ctx.cfg.sample_sizes.empty()) {
                    throw pmstab::ConfigError("oracle needs --n or a sample_sizes entry in the config");
                }
                n = ctx.cfg.sample_sizes.front();
            }
            for (const auto& f : pmstab::stage::run_oracle(ctx, n, oracle_reps)) {
                std::printf("wrote %s\n", f.c_str());
            }
        } else if (cmd_minss->parsed()) {
            if (!minss_config.empty()) {
                const pmstab::json raw = pmstab::load_config_json(minss_config, env_seed());
                const auto cfg = pmstab::parse_config(raw);
                if (!cfg.minss) throw pmstab::ConfigError("/minss: block missing from " + minss_config);
                minss_spec = *cfg.minss;
                if (!out_dir.empty() || !cfg.output_dir.empty()) {
                    const auto ctx = pmstab::RunContext::make(raw, out_dir);
                    for (const auto& f : pmstab::stage::run_minss(ctx)) std::printf("wrote %s\n", f.c_str());
                }
            }
            print_minss(minss_spec);
        } else if (cmd_thresh->parsed()) {
            const pmstab::UtilitySpec u{utilities[0], utilities[1], utilities[2], utilities[3]};
            const double t = pmstab::risk_threshold(u);
            std::printf("risk threshold: %.3f (%.9f)\n", t, t);
            std::printf("indifference check at threshold: act = %.6f, no-act = %.6f\n",
                        pmstab::expected_utility(t, u, true), pmstab::expected_utility(t, u, false));
            if (thresh_p >= 0.0) {
                const double act = pmstab::expected_utility(thresh_p, u, true);
                const double no_act = pmstab::expected_utility(thresh_p, u, false);
                std::printf("at risk %.4f: act = %.6f, no-act = %.6f -> %s\n", thresh_p, act, no_act,
                            act > no_act ? "act" : "do not act");
            }
        }
    } catch (const pmstab::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return pmstab::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
