#include "afrelay/cli.hpp"
#include "afrelay/config.hpp"
#include "afrelay/errors.hpp"
#include "afrelay/ratecore.hpp"
#include "afrelay/schemes.hpp"
#include "afrelay/simkit.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace afrelay;

namespace {

SystemConfig config_from(const py::dict& settings)
{
    SystemConfig c;
    for (auto [k, v] : settings) apply_setting(c, py::str(k).cast<std::string>(), py::str(v).cast<std::string>());
    c.validate();
    return c;
}

py::list rows_of(const simkit::ExperimentResult& r)
{
    py::list out;
    for (const auto& row : r.rows) {
        py::dict d;
        d["experiment"] = row.experiment;
        d["scheme"] = to_string(row.scheme);
        d["constraint"] = to_string(row.constraint);
        d["N"] = row.hops;
        d["N_F"] = row.subcarriers;
        d["topology"] = to_string(row.topology);
        d["gamma0_db"] = row.gamma0_db;
        d["metric"] = row.metric;
        d["value"] = row.value;
        d["stderr"] = row.stderr_value;
        d["trials"] = row.trials;
        d["seed"] = row.seed;
        out.append(d);
    }
    return out;
}

Allocation allocation_of(const Vector& mu, const Matrix& beta) { return Allocation{mu, beta}; }

} // namespace

PYBIND11_MODULE(_afrelay, m)
{
    m.doc() = "Power allocation for multi-hop OFDM amplify-and-forward relay chains";

    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_RuntimeError);

    m.def("end_to_end_snr", [](const std::vector<double>& g) { return end_to_end_snr(g); }, py::arg("hop_snrs"));
    m.def("cascade_snr", [](const std::vector<double>& g) { return cascade_snr(g); }, py::arg("hop_snrs"));
    m.def(
        "a_coefficients",
        [](const std::vector<double>& beta, const std::vector<double>& gamma) { return a_coefficients(beta, gamma); },
        py::arg("beta"), py::arg("gamma"));

    m.def(
        "rate",
        [](const Matrix& gamma, const Vector& mu, const Matrix& beta) {
            const auto r = instantaneous_rate(ChannelRealization{gamma}, allocation_of(mu, beta));
            return py::make_tuple(r.rate, Vector(r.snr));
        },
        py::arg("gamma"), py::arg("mu"), py::arg("beta"), "Rate in bit/s/Hz and the end-to-end SNR per subcarrier.");

    m.def(
        "epa",
        [](int hops, int subcarriers) {
            const auto a = schemes::epa(hops, subcarriers);
            return py::make_tuple(a.mu, a.beta);
        },
        py::arg("hops"), py::arg("subcarriers"));

    m.def(
        "iterate_stpc",
        [](const Matrix& gamma, const std::string& mode, double epsilon, int max_iterations) {
            if (mode != "exact" && mode != "asy") throw ConfigError("mode must be 'exact' or 'asy'");
            schemes::IterateOptions opt;
            opt.epsilon = epsilon;
            opt.max_iterations = max_iterations;
            const ChannelRealization r{gamma};
            const auto res = schemes::iterate(mode == "asy" ? schemes::Mode::asy : schemes::Mode::exact, Constraint::stpc, r,
                                              LinkBudget(gamma), opt);
            return py::make_tuple(res.allocation.mu, res.allocation.beta, res.trace.rates);
        },
        py::arg("gamma"), py::arg("mode") = "exact", py::arg("epsilon") = 1e-4, py::arg("max_iterations") = 20,
        "Alternating allocation for one realization under the short-term total power constraint.\n"
        "Returns (mu, beta, rate per iteration).");

    m.def(
        "asy_stpc",
        [](const Matrix& gamma) {
            const auto a = schemes::asy_noniterative(Constraint::stpc, ChannelRealization{gamma}, LinkBudget(gamma));
            return py::make_tuple(a.mu, a.beta);
        },
        py::arg("gamma"));

    m.def(
        "oracle_grid_search",
        [](const Matrix& gamma, double h) {
            const auto o = simkit::oracle_grid_search(ChannelRealization{gamma}, h);
            return py::make_tuple(o.rate, o.allocation.mu, o.allocation.beta);
        },
        py::arg("gamma"), py::arg("h") = 1e-2);

    m.attr("csv_header") = simkit::csv_header;
    m.def("config_keys", &config_keys);
    m.def(
        "resolve_config", [](const py::dict& settings) { return format_config(config_from(settings)); },
        py::arg("settings"), "Effective configuration after applying the given key/value overrides.");
    m.def(
        "sweep",
        [](const py::dict& settings) {
            const auto c = config_from(settings);
            simkit::ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = simkit::run_sweep(c);
            }
            return rows_of(r);
        },
        py::arg("settings") = py::dict());
    m.def(
        "outage",
        [](const py::dict& settings) {
            const auto c = config_from(settings);
            simkit::ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = simkit::run_outage(c);
            }
            return rows_of(r);
        },
        py::arg("settings") = py::dict());

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<std::string> store{"afrelay"};
            store.insert(store.end(), args.begin(), args.end());
            std::vector<const char*> argv;
            for (const auto& a : store) argv.push_back(a.c_str());
            std::ostringstream out, err;
            const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
