#include "afrelay/cli.hpp"

#include "afrelay/config.hpp"
#include "afrelay/errors.hpp"
#include "afrelay/multipliers.hpp"
#include "afrelay/simkit.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace afrelay::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config_path;
    std::string out_path;
    std::map<std::string, std::string> overrides;
};

void add_common(CLI::App& sub, Common& c, bool out_required)
{
    sub.add_option("--config", c.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    auto* out = sub.add_option("--out", c.out_path, "output file");
    if (out_required) out->required();
    for (const auto& key : config_keys()) {
        std::string names = "--" + key;
        std::string dashed = key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        if (dashed != key) names += ",--" + dashed;
        sub.add_option_function<std::string>(
            names, [&c, key](const std::string& v) { c.overrides[key] = v; }, "override config key '" + key + "'");
    }
}

SystemConfig resolve(const Common& c)
{
    SystemConfig cfg = c.config_path.empty() ? SystemConfig{} : load_config(c.config_path);
    for (const auto& key : config_keys())
        if (auto it = c.overrides.find(key); it != c.overrides.end()) apply_setting(cfg, key, it->second);
    cfg.validate();
    return cfg;
}

fs::path prepare_output(const std::string& out_path)
{
    const fs::path p(out_path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw ConfigError("cannot create output directory '" + p.parent_path().string() + "': " + ec.message());
    }
    return p;
}

std::ofstream open_out(const fs::path& p)
{
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot open '" + p.string() + "' for writing");
    return f;
}

void write_sidecar(const fs::path& out, const SystemConfig& cfg)
{
    auto side = out.parent_path() / (out.stem().string() + ".resolved.cfg");
    auto f = open_out(side);
    f << "# effective configuration\n" << format_config(cfg);
}

std::vector<CalibratedMultipliers> calibrate(const SystemConfig& cfg)
{
    if (cfg.direct_snr_db.size() != 1) throw ConfigError("calibrate takes a single gamma0_db value");
    if (cfg.schemes.size() != 1) throw ConfigError("calibrate takes a single scheme");
    if (!is_long_term(cfg.constraint)) throw ConfigError("STPC allocations are solved per realization; nothing to calibrate");
    const Scheme s = cfg.schemes.front();
    if (s == Scheme::epa) throw ConfigError("EPA has no multipliers to calibrate");
    const auto budget = build_link_budget(cfg, db_to_linear(cfg.direct_snr_db.front()));
    const simkit::SchemeRunner runner(cfg, s, budget, schemes::options_from(cfg));
    if (runner.asy_multipliers()) return {*runner.asy_multipliers()};
    return runner.policy()->multiplier_sets();
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Power allocation and Monte-Carlo simulation for multi-hop OFDM AF relay chains", "afrelay"};
    app.require_subcommand(1);

    Common sweep_c, outage_c, conv_c, val_c, cal_c;
    std::string trace_path;
    bool quick = false;

    auto* sweep = app.add_subcommand("sweep", "mean rate versus Gamma_0 per scheme");
    add_common(*sweep, sweep_c, true);
    auto* outage = app.add_subcommand("outage", "outage probability versus Gamma_0 per scheme");
    add_common(*outage, outage_c, true);
    auto* conv = app.add_subcommand("converge", "mean rate per iteration of the iterative schemes");
    add_common(*conv, conv_c, true);
    conv->add_option("--trace", trace_path, "per-trial trace CSV");
    auto* val = app.add_subcommand("validate", "grid-oracle and property checks");
    add_common(*val, val_c, false);
    val->add_flag("--quick", quick, "N=2, N_F=2, 100 oracle draws");
    auto* cal = app.add_subcommand("calibrate", "write calibrated multipliers as CSV");
    add_common(*cal, cal_c, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return exit_config;
    }

    try {
        if (sweep->parsed() || outage->parsed()) {
            const auto& c = sweep->parsed() ? sweep_c : outage_c;
            const auto cfg = resolve(c);
            const auto path = prepare_output(c.out_path);
            const auto result = sweep->parsed() ? simkit::run_sweep(cfg) : simkit::run_outage(cfg);
            auto f = open_out(path);
            simkit::write_csv(f, result);
            write_sidecar(path, cfg);
        } else if (conv->parsed()) {
            const auto cfg = resolve(conv_c);
            const auto path = prepare_output(conv_c.out_path);
            std::optional<std::ofstream> trace;
            if (!trace_path.empty()) trace.emplace(open_out(prepare_output(trace_path)));
            const auto result = simkit::run_convergence(cfg, trace ? &*trace : nullptr);
            auto f = open_out(path);
            simkit::write_csv(f, result);
            write_sidecar(path, cfg);
        } else if (cal->parsed()) {
            const auto cfg = resolve(cal_c);
            const auto path = prepare_output(cal_c.out_path);
            const auto sets = calibrate(cfg);
            auto f = open_out(path);
            write_multipliers_csv(f, sets);
            write_sidecar(path, cfg);
        } else if (val->parsed()) {
            auto cfg = resolve(val_c);
            int oracle_trials = cfg.trials;
            if (quick) {
                cfg.hops = 2;
                cfg.subcarriers = 2;
                if (cfg.topology == Topology::explicit_matrix) cfg.topology = Topology::balanced;
                cfg.explicit_gain.reset();
                oracle_trials = 100;
            }
            const auto checks = simkit::run_validation(cfg, oracle_trials, 1e-3);
            std::ostringstream report;
            bool ok = true;
            for (const auto& ch : checks) {
                report << (ch.passed ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << '\n';
                ok = ok && ch.passed;
            }
            out << report.str();
            if (!val_c.out_path.empty()) {
                const auto path = prepare_output(val_c.out_path);
                auto f = open_out(path);
                f << report.str();
                write_sidecar(path, cfg);
            }
            return ok ? exit_ok : exit_validation;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << '\n';
        return exit_solver;
    } catch (const std::logic_error& e) {
        // domain, usage and size errors stem from the inputs
        err << "error: " << e.what() << '\n';
        return exit_config;
    }
    return exit_ok;
}

} // namespace afrelay::cli
