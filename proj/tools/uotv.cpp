// uotv: score precipitation-like fields with the debiased unbalanced
// Sinkhorn divergence.
//
//   uotv gen C1 -o c1.txt
//   uotv score obs.txt fcst.txt --penalty tv --rho 1
//   uotv sweep obs.txt fcst.txt --rhos 2^-6,2^-5,1 > sweep.csv

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uotv/uotv.hpp"

namespace {

using json = nlohmann::ordered_json;

constexpr int exit_usage = 2;
constexpr int exit_no_mass = 3;
constexpr const char* report_schema = "uotv.score";
constexpr int report_version = 1;

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Inputs {
    std::string obs_path, fcst_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> penalties;
    double rho = 1.0;
    std::string epsilon = "auto";
    double tol = 1e-12;
    std::optional<double> length, mass;
};

/// A path, or `case:<id>` for a generated idealised case.
uotv::DensityField read_field(const std::string& spec, std::optional<std::uint64_t> seed) {
    if (spec.rfind("case:", 0) == 0) {
        try {
            return uotv::generate_case(uotv::CaseSpec{spec.substr(5), seed});
        } catch (const std::invalid_argument& e) {
            throw usage_error(e.what());
        }
    }
    return uotv::load_field(spec);
}

json finite_or_marker(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "infinity" : "-infinity";
}

double parse_real(const std::string& s) {
    // Accept powers of two written as 2^k, the natural unit for reach sweeps.
    if (s.rfind("2^", 0) == 0) return std::ldexp(1.0, std::stoi(s.substr(2)));
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw usage_error("malformed number '" + s + "'");
    return v;
}

uotv::SolveParams make_params(const Inputs& in, uotv::DivergenceKind kind, const uotv::DensityField& a,
                              const uotv::DensityField& b) {
    uotv::SolveParams p;
    p.kind = kind;
    p.rho = in.rho;
    p.tolerance = in.tol;
    p.epsilon = in.epsilon == "auto" ? uotv::auto_epsilon(std::max(a.size(), b.size())) : parse_real(in.epsilon);
    p.validate();
    return p;
}

uotv::ScalingContext make_context(const Inputs& in, const uotv::DensityField& a, const uotv::DensityField& b) {
    const double L = in.length.value_or(std::max(uotv::default_length(a.grid()), uotv::default_length(b.grid())));
    if (in.mass) {
        uotv::ScalingContext s{L, *in.mass};
        s.validate();
        return s;
    }
    return uotv::make_scaling(a, b, L);
}

json convergence_json(const uotv::GridSolution& s) {
    return {{"iterations", s.iterations}, {"final_delta", finite_or_marker(s.final_delta)}, {"converged", s.converged}};
}

json summary_json(const uotv::VectorField& vf) {
    if (vf.empty()) return "no_transport";
    json out;
    for (auto [avg, name] : {std::pair{uotv::Averaging::mean, "mean"}, std::pair{uotv::Averaging::median, "median"}}) {
        const auto s = uotv::atm_atd(vf, avg);
        out[name] = {{"atm", s.atm}, {"atd", s.atd}};
    }
    return out;
}

std::string with_flavor(const std::string& path, const std::string& flavor, bool tag) {
    if (!tag) return path;
    const auto dot = path.find_last_of('.');
    const auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + "." + flavor;
    return path.substr(0, dot) + "." + flavor + path.substr(dot);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

struct ScoreOutputs {
    bool median = false;
    std::string vectors, hist, marginals, report;
    std::size_t hist_mag_bins = 40, hist_dir_bins = 72;
};

int cmd_score(const Inputs& in, const ScoreOutputs& out) {
    const auto a = read_field(in.obs_path, in.seed);
    const auto b = read_field(in.fcst_path, in.seed);
    const double ma = uotv::total_mass(a), mb = uotv::total_mass(b);
    if (ma == 0.0 && mb == 0.0) throw uotv::no_mass_error();
    const auto sc = make_context(in, a, b);

    json report;
    report["schema"] = report_schema;
    report["version"] = report_version;
    report["inputs"] = {{"obs", {{"path", in.obs_path}, {"mass", ma}, {"nx", a.grid().nx}, {"ny", a.grid().ny}}},
                        {"fcst", {{"path", in.fcst_path}, {"mass", mb}, {"nx", b.grid().nx}, {"ny", b.grid().ny}}},
                        {"L", sc.L},
                        {"M", sc.M}};
    if (in.seed) report["inputs"]["seed"] = *in.seed;
    report["results"] = json::array();
    const bool tag = in.penalties.size() > 1;
    for (const auto& name : in.penalties) {
        const auto kind = uotv::parse_divergence(name);
        const auto p = make_params(in, kind, a, b);
        const auto r = uotv::sinkhorn_divergence(a, b, sc, p);
        json res;
        res["penalty"] = std::string(uotv::to_string(kind));
        res["params"] = {{"kind", std::string(uotv::to_string(kind))},
                         {"rho", p.rho},
                         {"epsilon", p.epsilon},
                         {"tolerance", p.tolerance}};
        res["null_case"] = r.null_case;
        res["scores"] = {{"sink", r.sink}, {"uot", r.uot}};
        if (!r.null_case)
            res["scores"].update({{"uot_obs", r.uot_obs}, {"uot_fcst", r.uot_fcst}, {"mass_term", r.mass_term}});
        res["breakdown"] = {{"transport", r.breakdown.transport},
                            {"entropy", r.breakdown.entropy},
                            {"d0", r.breakdown.d0},
                            {"d1", r.breakdown.d1},
                            {"objective", r.breakdown.objective}};
        res["imbalance_ratio"] = finite_or_marker(uotv::marginal_imbalance_ratio(r.breakdown));
        const auto [pi0, pi1] = uotv::plan_marginals(r.cross);
        res["mass_retained"] = {{"obs", ma > 0 ? json(uotv::total_mass(pi0) / ma) : json("null_case")},
                                {"fcst", mb > 0 ? json(uotv::total_mass(pi1) / mb) : json("null_case")}};
        res["convergence"] = {{"cross", convergence_json(r.cross)}};
        if (r.null_case) {
            res["atm_atd"] = "null_case";
            res["headline"] = "null_case";
        } else {
            res["convergence"]["self_obs"] = convergence_json(r.self_obs);
            res["convergence"]["self_fcst"] = convergence_json(r.self_fcst);
            const auto fwd = uotv::debiased_vectors(r.cross, r.self_obs, uotv::Direction::forward);
            const auto inv = uotv::debiased_vectors(r.cross, r.self_fcst, uotv::Direction::inverse);
            res["atm_atd"] = {{"forward", summary_json(fwd)}, {"inverse", summary_json(inv)}};
            if (fwd.empty()) {
                res["headline"] = "no_transport";
            } else {
                const auto avg = out.median ? uotv::Averaging::median : uotv::Averaging::mean;
                const auto s = uotv::atm_atd(fwd, avg);
                res["headline"] = {{"atm", s.atm}, {"atd", s.atd}, {"averaging", out.median ? "median" : "mean"}};
            }
            if (!out.vectors.empty()) {
                std::ostringstream os;
                uotv::write_vectors_csv(os, fwd);
                write_file(with_flavor(out.vectors, name, tag), os.str());
            }
            if (!out.hist.empty() && !fwd.empty()) {
                std::ostringstream os;
                uotv::write_histogram_csv(os, uotv::transport_histogram(fwd, out.hist_mag_bins, out.hist_dir_bins));
                write_file(with_flavor(out.hist, name, tag), os.str());
            }
        }
        if (!out.marginals.empty()) {
            uotv::save_field(out.marginals + "pi0." + name + ".txt", pi0);
            uotv::save_field(out.marginals + "pi1." + name + ".txt", pi1);
        }
        if (!r.converged)
            std::cerr << "warning: " << name << " solve did not reach tolerance " << p.tolerance << "; score is flagged\n";
        res["converged"] = r.converged;
        report["results"].push_back(std::move(res));
    }
    const std::string text = report.dump(2) + "\n";
    if (out.report.empty())
        std::cout << text;
    else
        write_file(out.report, text);
    return 0;
}

int cmd_sweep(const Inputs& in, const std::vector<std::string>& rhos, const std::string& csv_path) {
    if (rhos.empty()) throw usage_error("sweep needs at least one rho");
    if (in.penalties.size() != 1) throw usage_error("sweep takes a single --penalty");
    const auto a = read_field(in.obs_path, in.seed);
    const auto b = read_field(in.fcst_path, in.seed);
    const double mb = uotv::total_mass(b);
    if (uotv::total_mass(a) == 0.0 && mb == 0.0) throw uotv::no_mass_error();
    const auto sc = make_context(in, a, b);
    const auto kind = uotv::parse_divergence(in.penalties.front());
    std::ostringstream os;
    os << "rho,sink,transport,d0,d1,atm,mass_retained\n";
    auto cell = [](double v) {
        if (std::isfinite(v)) return uotv::detail::format_double(v);
        return std::string(std::isnan(v) ? "nan" : "inf");
    };
    for (const auto& rs : rhos) {
        Inputs run = in;
        run.rho = parse_real(rs);
        const auto p = make_params(run, kind, a, b);
        const auto r = uotv::sinkhorn_divergence(a, b, sc, p);
        double atm = std::numeric_limits<double>::quiet_NaN();
        if (!r.null_case) {
            const auto fwd = uotv::debiased_vectors(r.cross, r.self_obs, uotv::Direction::forward);
            if (!fwd.empty()) atm = uotv::atm_atd(fwd).atm;
        }
        const auto [pi0, pi1] = uotv::plan_marginals(r.cross);
        const double kept = mb > 0 ? uotv::total_mass(pi1) / mb : std::numeric_limits<double>::quiet_NaN();
        if (!r.converged) std::cerr << "warning: rho=" << rs << " solve did not converge\n";
        os << cell(p.rho) << ',' << cell(r.sink) << ',' << cell(r.breakdown.transport) << ',' << cell(r.breakdown.d0) << ','
           << cell(r.breakdown.d1) << ',' << cell(atm) << ',' << cell(kept) << '\n';
    }
    if (csv_path.empty())
        std::cout << os.str();
    else
        write_file(csv_path, os.str());
    return 0;
}

/// Dense against separable backend on the positive-mass points.
int cmd_oracle(const Inputs& in) {
    const auto a = read_field(in.obs_path, in.seed);
    const auto b = read_field(in.fcst_path, in.seed);
    const auto sc = make_context(in, a, b);
    json out = json::array();
    for (const auto& name : in.penalties) {
        const auto p = make_params(in, uotv::parse_divergence(name), a, b);
        const auto t = uotv::solve_uot(a, b, sc, p);
        const auto d = uotv::dense_uot(a, b, sc, p);
        auto sup_diff = [](const uotv::GridSupport& gs, const std::vector<double>& gp, const std::vector<double>& dp) {
            double m = 0.0;
            std::size_t k = 0;
            for (std::size_t i = 0; i < gs.size(); ++i)
                if (gs.weights[i] > 0.0) m = std::max(m, std::abs(gp[i] - dp[k++]));
            return m;
        };
        out.push_back({{"penalty", name},
                       {"objective_separable", uotv::dual_objective(t)},
                       {"objective_dense", uotv::dual_objective(d)},
                       {"sup_f", t.null_case ? 0.0 : sup_diff(*t.obs, t.f, d.f)},
                       {"sup_g", t.null_case ? 0.0 : sup_diff(*t.fcst, t.g, d.g)}});
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_gen(const std::string& id, std::optional<std::uint64_t> seed, std::string path) {
    uotv::DensityField f;
    try {
        f = uotv::generate_case(uotv::CaseSpec{id, seed});
    } catch (const std::invalid_argument& e) {
        throw usage_error(e.what());
    }
    if (path.empty()) path = id + ".txt";
    uotv::save_field(path, f);
    std::cout << "mass=" << uotv::detail::format_double(uotv::total_mass(f)) << "\n";
    return 0;
}

void add_common(CLI::App* sub, Inputs& in, bool multi_penalty) {
    sub->add_option("obs", in.obs_path, "Observation field (uotfield v1 path or case:<id>)")->required();
    sub->add_option("fcst", in.fcst_path, "Forecast field (uotfield v1 path or case:<id>)")->required();
    if (multi_penalty)
        sub->add_option("--penalty", in.penalties, "Marginal penalty: kl, tv or both")
            ->default_str("both")
            ->check(CLI::IsMember({"kl", "tv", "both"}));
    else
        sub->add_option("--penalty", in.penalties, "Marginal penalty: kl or tv")->default_str("tv")->check(CLI::IsMember({"kl", "tv"}));
    sub->add_option("--rho", in.rho, "Reach parameter in units of L^2")->capture_default_str();
    sub->add_option("--epsilon", in.epsilon, "Entropic blur in units of L^2, or auto")->capture_default_str();
    sub->add_option("--tol", in.tol, "Convergence tolerance on the potentials")->capture_default_str();
    sub->add_option("--length", in.length, "Length scale L (default: largest grid extent)");
    sub->add_option("--mass", in.mass, "Mass scale M (default: mean input mass)");
    sub->add_option("--seed", in.seed, "Seed for stochastic case:<id> inputs");
}

void normalize_penalties(Inputs& in, const char* fallback) {
    if (in.penalties.empty()) in.penalties = {fallback};
    if (in.penalties.size() == 1 && in.penalties.front() == "both") in.penalties = {"kl", "tv"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Debiased unbalanced optimal transport scores for gridded fields"};
    app.require_subcommand(1);

    std::string gen_id, gen_out;
    std::optional<std::uint64_t> gen_seed;
    auto* gen = app.add_subcommand("gen", "Write an idealised case as a uotfield v1 file");
    gen->add_option("case", gen_id, "Case id, e.g. C1, E2, P5, S1")->required();
    gen->add_option("-o,--out", gen_out, "Output path (default: <case>.txt)");
    gen->add_option("--seed", gen_seed, "Seed, required for S and N1/N2 cases");

    Inputs score_in;
    ScoreOutputs score_out;
    std::string hist_bins = "40x72";
    auto* score = app.add_subcommand("score", "Score a forecast against an observation, JSON report");
    add_common(score, score_in, true);
    score->add_flag("--median", score_out.median, "Headline ATM/ATD from the componentwise median vector");
    score->add_option("--vectors", score_out.vectors, "CSV of debiased forward transport vectors");
    score->add_option("--hist", score_out.hist, "CSV of the magnitude/direction histogram");
    score->add_option("--hist-bins", hist_bins, "Histogram bins as MAGxDIR")->capture_default_str();
    score->add_option("--marginals", score_out.marginals, "Path prefix for plan marginal fields");
    score->add_option("-o,--out", score_out.report, "Report path (default: stdout)");

    Inputs sweep_in;
    std::vector<std::string> rhos = {"2^-6", "2^-5", "2^-4", "2^-3", "2^-2", "2^-1", "2^0", "2^1"};
    std::string sweep_out;
    auto* sweep = app.add_subcommand("sweep", "Sweep the reach parameter, CSV on stdout");
    add_common(sweep, sweep_in, false);
    sweep->add_option("--rhos", rhos, "Comma separated rho values (units of L^2, 2^k accepted)")->delimiter(',');
    sweep->add_option("-o,--out", sweep_out, "CSV path (default: stdout)");

    Inputs oracle_in;
    auto* oracle = app.add_subcommand("oracle", "");
    oracle->group("");
    add_common(oracle, oracle_in, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_usage;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_id, gen_seed, gen_out);
        if (score->parsed()) {
            normalize_penalties(score_in, "both");
            const auto x = hist_bins.find('x');
            if (x == std::string::npos) throw usage_error("--hist-bins expects MAGxDIR");
            score_out.hist_mag_bins = std::stoul(hist_bins.substr(0, x));
            score_out.hist_dir_bins = std::stoul(hist_bins.substr(x + 1));
            return cmd_score(score_in, score_out);
        }
        if (sweep->parsed()) {
            normalize_penalties(sweep_in, "tv");
            return cmd_sweep(sweep_in, rhos, sweep_out);
        }
        if (oracle->parsed()) {
            normalize_penalties(oracle_in, "both");
            return cmd_oracle(oracle_in);
        }
    } catch (const uotv::no_mass_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_no_mass;
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const uotv::field_parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_usage;
}
