// arw: command-line driver for the site-wise ARW simulator, the carpet-hole
// procedure, the single-block statistics and the acceptance suite.
//
// Exit codes: 0 success, 2 usage or parameter error, 3 invariant violation
// (including a failed replay or acceptance criterion), 4 topple budget
// exceeded.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "arw/acceptance.hpp"
#include "arw/block_stats.hpp"
#include "arw/carpet_hole.hpp"
#include "arw/ensemble.hpp"
#include "arw/errors.hpp"
#include "arw/record_io.hpp"

namespace fs = std::filesystem;
using namespace arw;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitBudget = 4;

struct Common {
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string out_dir = ".";
    std::string prefix;
};

void add_seed(CLI::App* sub, Common& c)
{
    sub->add_option("--seed", c.seed, "master seed")->envname("ARW_SEED")->capture_default_str();
}

void add_outputs(CLI::App* sub, Common& c, const std::string& prefix)
{
    c.prefix = prefix;
    sub->add_option("--threads", c.threads, "worker threads (results do not depend on it)")
        ->capture_default_str();
    sub->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
    sub->add_option("--prefix", c.prefix, "output file prefix")->capture_default_str();
}

// Parameters recorded in output headers: every option of the subcommand
// except the ones that cannot change results.
OutputMeta meta_of(const CLI::App* sub, std::uint64_t seed)
{
    OutputMeta m;
    m.command = sub->get_name();
    m.master_seed = seed;
    for (const auto* opt : sub->get_options()) {
        const auto name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "threads" || name == "out-dir" ||
            name == "prefix" || name == "seed") {
            continue;
        }
        std::string value;
        if (opt->count() > 0) {
            for (const auto& r : opt->results()) {
                value += (value.empty() ? "" : ",") + r;
            }
        } else {
            value = opt->get_default_str();
            if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
                value = value.substr(1, value.size() - 2);
            }
        }
        m.params.emplace_back(name, value);
    }
    return m;
}

std::string path_in(const Common& c, const std::string& suffix)
{
    fs::create_directories(c.out_dir);
    return (fs::path(c.out_dir) / (c.prefix + suffix)).string();
}

CheckMode parse_check(const std::string& s)
{
    if (s == "auto") {
        return CheckMode::automatic;
    }
    return s == "on" ? CheckMode::on : CheckMode::off;
}

int report_cells(const EnsembleResult& res)
{
    bool aborted = false;
    std::uint64_t budget = 0;
    for (const auto& c : res.cells) {
        if (c.aborted) {
            aborted = true;
            std::cerr << "cell " << c.index << " aborted: " << c.diagnostic << '\n';
        }
        budget += c.budget_exceeded;
    }
    if (aborted) {
        return kExitInvariant;
    }
    if (budget > 0) {
        std::cerr << budget << " trials exceeded the topple budget\n";
        return kExitBudget;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Activated random walk simulator: site-wise stabilization, carpet-hole "
                 "procedure, block statistics"};
    app.set_config("--config", "", "INI/TOML config file; sections name subcommands");
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    // simulate -----------------------------------------------------------
    Common sim_c;
    std::vector<double> sim_lambda{1.0}, sim_zeta{0.5};
    std::vector<std::int64_t> sim_L{100};
    std::vector<std::uint64_t> sim_k{10};
    std::uint64_t sim_trials = 100;
    std::string sim_sampler = "bernoulli";
    std::int64_t sim_neat_K = 3;
    std::uint64_t sim_budget = kDefaultToppleBudget;
    auto* sim = app.add_subcommand("simulate", "odometer at the origin after stabilizing [-L, L]");
    sim->add_option("--lambda", sim_lambda, "sleep rates")->delimiter(',')->capture_default_str();
    sim->add_option("--zeta", sim_zeta, "initial densities in [0, 2]")->delimiter(',')->capture_default_str();
    sim->add_option("--L", sim_L, "half-widths")->delimiter(',')->capture_default_str();
    sim->add_option("--k", sim_k, "activity thresholds for P(m(0) >= k)")->delimiter(',')->capture_default_str();
    sim->add_option("--trials", sim_trials)->capture_default_str();
    sim->add_option("--sampler", sim_sampler)->check(CLI::IsMember({"bernoulli", "neat"}))->capture_default_str();
    sim->add_option("--neat-K", sim_neat_K, "K of the neat sampler")->capture_default_str();
    sim->add_option("--budget", sim_budget, "topple budget per trial")->capture_default_str();
    add_seed(sim, sim_c);
    add_outputs(sim, sim_c, "simulate");

    // carpet -------------------------------------------------------------
    Common car_c;
    std::vector<double> car_lambda{1.0};
    std::vector<std::int64_t> car_a{6}, car_K{36};
    std::vector<int> car_n{8};
    std::int64_t car_m = 0;
    std::uint64_t car_trials = 10;
    std::string car_check = "auto";
    bool car_no_trace = false;
    std::vector<double> car_theta;
    double car_block_theta = 1.0;
    auto* car = app.add_subcommand("carpet", "carpet-hole procedure on D_n");
    car->add_option("--lambda", car_lambda)->delimiter(',')->capture_default_str();
    car->add_option("--a", car_a, "block half-widths (paired with --K)")->delimiter(',')->capture_default_str();
    car->add_option("--K", car_K, "block spacings")->delimiter(',')->capture_default_str();
    car->add_option("--n", car_n, "block counts (even)")->delimiter(',')->capture_default_str();
    car->add_option("--m-boundary", car_m, "extra particles at nK + a")->capture_default_str();
    car->add_option("--trials", car_trials)->capture_default_str();
    car->add_option("--check", car_check, "property checks after each attempt")
        ->check(CLI::IsMember({"auto", "on", "off"}))
        ->capture_default_str();
    car->add_flag("--no-trace", car_no_trace, "omit attempt traces from the raw records");
    car->add_option("--moments", car_theta, "theta values for E exp(theta Frozen)")->delimiter(',');
    car->add_option("--block-theta", car_block_theta, "theta for the per-block sums")->capture_default_str();
    add_seed(car, car_c);
    add_outputs(car, car_c, "carpet");

    // replay-check ---------------------------------------------------------
    Common rep_c;
    double rep_lambda = 1.0;
    std::int64_t rep_a = 4, rep_K = 16;
    int rep_n = 8;
    auto* rep = app.add_subcommand("replay-check", "mass-balance replay of one run");
    rep->add_option("--lambda", rep_lambda)->capture_default_str();
    rep->add_option("--a", rep_a)->capture_default_str();
    rep->add_option("--K", rep_K)->capture_default_str();
    rep->add_option("--n", rep_n)->capture_default_str();
    add_seed(rep, rep_c);

    // block-stats ----------------------------------------------------------
    Common bs_c;
    double bs_lambda = 1.0;
    std::int64_t bs_a = 6, bs_K = 36, bs_v = -1;
    bool bs_large = false;
    std::vector<double> bs_hoeffding;
    std::uint64_t bs_runs = 0;
    int bs_n = 16;
    std::string bs_json;
    auto* bs = app.add_subcommand("block-stats", "jump laws, drifts, Hoeffding tails, hole statistics");
    bs->add_option("--lambda", bs_lambda)->capture_default_str();
    bs->add_option("--a", bs_a)->capture_default_str();
    bs->add_option("--K", bs_K)->capture_default_str();
    bs->add_option("--v", bs_v, "hole offset (default ceil(a/3))");
    bs->add_flag("--large-scale", bs_large, "bound chain at a = 12 ceil(e^{100(lambda+1)}), K = a^2");
    bs->add_option("--hoeffding", bs_hoeffding, "b,gamma,nu")->delimiter(',')->expected(3);
    bs->add_option("--runs", bs_runs, "carpet-hole runs for hole statistics")->capture_default_str();
    bs->add_option("--n", bs_n, "block count for --runs")->capture_default_str();
    bs->add_option("--json", bs_json, "write the report as JSON");
    add_seed(bs, bs_c);

    // sweep ----------------------------------------------------------------
    Common sw_c;
    std::vector<double> sw_lambda{0.2, 2.0}, sw_zeta{0.1, 0.3, 0.5, 0.7, 0.9};
    std::int64_t sw_L = 100;
    std::uint64_t sw_k = 10, sw_trials = 100;
    auto* sw = app.add_subcommand("sweep", "activity grid P(m(0) >= k) over (lambda, zeta)");
    sw->add_option("--lambda", sw_lambda)->delimiter(',')->capture_default_str();
    sw->add_option("--zeta", sw_zeta)->delimiter(',')->capture_default_str();
    sw->add_option("--L", sw_L)->capture_default_str();
    sw->add_option("--k", sw_k)->capture_default_str();
    sw->add_option("--trials", sw_trials)->capture_default_str();
    add_seed(sw, sw_c);
    add_outputs(sw, sw_c, "sweep");

    // verify ---------------------------------------------------------------
    bool v_quick = false;
    unsigned v_threads = 1;
    std::vector<int> v_only;
    auto* ver = app.add_subcommand("verify", "run the acceptance suite");
    ver->add_flag("--quick", v_quick, "smaller ensembles, same tolerances");
    ver->add_option("--threads", v_threads)->capture_default_str();
    ver->add_option("--only", v_only, "criterion ids")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*sim) {
            EnsembleSpec spec;
            spec.kind = ExperimentKind::stabilize_origin;
            spec.lambdas = sim_lambda;
            spec.zetas = sim_zeta;
            spec.Ls = sim_L;
            spec.ks = sim_k;
            spec.trials = sim_trials;
            spec.sampler = sim_sampler;
            spec.neat_K = sim_neat_K;
            spec.budget = sim_budget;
            spec.master_seed = sim_c.seed;
            spec.threads = sim_c.threads;
            spec.keep_records = true;
            const auto res = run_ensemble(spec);
            const auto meta = meta_of(sim, sim_c.seed);
            std::ostringstream csv, raw;
            write_summary_csv(csv, res, meta);
            write_raw_jsonl(raw, res, meta, true);
            write_file(path_in(sim_c, "_summary.csv"), csv.str());
            write_file(path_in(sim_c, "_raw.jsonl"), raw.str());
            std::cout << csv.str();
            return report_cells(res);
        }

        if (*car) {
            if (car_a.size() != car_K.size()) {
                throw ParameterError("--a and --K need the same number of values");
            }
            EnsembleSpec spec;
            spec.kind = ExperimentKind::carpet_hole;
            spec.lambdas = car_lambda;
            spec.sizes.clear();
            for (std::size_t i = 0; i < car_a.size(); ++i) {
                spec.sizes.push_back(BlockSize{car_a[i], car_K[i]});
            }
            spec.ns = car_n;
            spec.m_boundary = car_m;
            spec.trials = car_trials;
            spec.check = parse_check(car_check);
            spec.trace = !car_no_trace;
            spec.keep_records = true;
            spec.master_seed = car_c.seed;
            spec.threads = car_c.threads;
            const auto res = run_ensemble(spec);
            const auto meta = meta_of(car, car_c.seed);
            std::ostringstream csv, raw;
            write_summary_csv(csv, res, meta);
            write_raw_jsonl(raw, res, meta, spec.trace);
            write_file(path_in(car_c, "_summary.csv"), csv.str());
            write_file(path_in(car_c, "_raw.jsonl"), raw.str());
            std::cout << csv.str();
            if (!car_theta.empty()) {
                nlohmann::json out{{"meta", to_json(meta)}, {"cells", nlohmann::json::array()}};
                for (std::size_t c = 0; c < res.records.size(); ++c) {
                    auto j = to_json(exponential_moment_probe(res.records[c], car_theta, car_block_theta));
                    j["cell"] = c;
                    out["cells"].push_back(j);
                }
                write_file(path_in(car_c, "_moments.json"), out.dump(2) + "\n");
                std::cout << "moments written to " << path_in(car_c, "_moments.json") << '\n';
            }
            return report_cells(res);
        }

        if (*rep) {
            const auto report = mass_balance_replay(CarpetParams{rep_lambda, rep_n, rep_K, rep_a, 0},
                                                    rep_c.seed);
            std::cout << report.describe() << '\n';
            return report.ok() ? 0 : kExitInvariant;
        }

        if (*bs) {
            nlohmann::json out{{"meta", to_json(meta_of(bs, bs_c.seed))}};
            if (bs_large) {
                const double log_a = large_scale_log_a(bs_lambda);
                const auto d = large_scale_drift(bs_lambda, log_a);
                std::printf("lambda = %g, log a = %.6f (a = 12 ceil(e^{100(lambda+1)}), K = a^2)\n",
                            bs_lambda, log_a);
                std::printf("E[Y_v]  <= %.6f for v >= a/3\n", d.bound_Y);
                std::printf("E[Y~_v] <= %.6f for v >= a/3\n", d.bound_Ytilde);
                const bool ok = d.bound_Y <= -40.0 && d.bound_Ytilde <= -40.0;
                std::printf("drift bound <= -40: %s\n", ok ? "yes" : "no");
                out["large_scale"] = {{"lambda", bs_lambda},
                                      {"log_a", log_a},
                                      {"bound_Y", d.bound_Y},
                                      {"bound_Ytilde", d.bound_Ytilde}};
            } else {
                const auto v = bs_v >= 0 ? bs_v : (bs_a + 2) / 3;
                const auto spec = JumpLawSpec::make(bs_lambda, bs_a, bs_K, v);
                const auto d = drift(spec);
                std::printf("lambda = %g, a = %lld, K = %lld, v = %lld, delta = %s\n", bs_lambda,
                            static_cast<long long>(bs_a), static_cast<long long>(bs_K),
                            static_cast<long long>(v), spec.delta().str().c_str());
                std::printf("E[Y_v]  = %s = %.10f\n", d.E_Y.str().c_str(), to_double(d.E_Y));
                std::printf("E[Y~_v] = %s = %.10f\n", d.E_Ytilde.str().c_str(), to_double(d.E_Ytilde));
                std::printf("%6s %14s %14s\n", "x", "P(Y_v=x)", "P(Y~_v=x)");
                const auto y = y_law(spec), yt = y_tilde_law(spec);
                nlohmann::json atoms = nlohmann::json::array();
                for (const auto& at : yt.atoms()) {
                    Rational py = 0;
                    for (const auto& b : y.atoms()) {
                        if (b.value == at.value) {
                            py = b.mass;
                        }
                    }
                    std::printf("%6lld %14.10f %14.10f\n", static_cast<long long>(at.value),
                                to_double(py), to_double(at.mass));
                    atoms.push_back({at.value, to_double(py), to_double(at.mass)});
                }
                out["laws"] = {{"lambda", bs_lambda}, {"a", bs_a}, {"K", bs_K}, {"v", v},
                               {"delta", spec.delta().str()}, {"E_Y", d.E_Y.str()},
                               {"E_Ytilde", d.E_Ytilde.str()}, {"atoms", atoms}};
            }
            if (!bs_hoeffding.empty()) {
                const double t = hoeffding_tail(bs_hoeffding[0], bs_hoeffding[1], bs_hoeffding[2]);
                const double lt = log_hoeffding_tail(bs_hoeffding[0], bs_hoeffding[1], bs_hoeffding[2]);
                std::printf("hoeffding_tail(b=%g, gamma=%g, nu=%g) = %.6e (log %.6f)\n",
                            bs_hoeffding[0], bs_hoeffding[1], bs_hoeffding[2], t, lt);
                out["hoeffding"] = {{"b", bs_hoeffding[0]}, {"gamma", bs_hoeffding[1]},
                                    {"nu", bs_hoeffding[2]}, {"log_tail", lt}};
            }
            if (bs_runs > 0) {
                std::vector<RunRecord> runs;
                RunOptions opt;
                opt.check = CheckMode::off;
                opt.hole_steps = true;
                for (std::uint64_t s = 0; s < bs_runs; ++s) {
                    runs.push_back(run_carpet_hole(CarpetParams{bs_lambda, bs_n, bs_K, bs_a, 0},
                                                   trial_seed(bs_c.seed, s), opt));
                }
                const auto stats = hole_lemma_stats(runs);
                std::cout << format_table(stats);
                const auto dom = dominance_check(runs);
                std::size_t bad = 0;
                nlohmann::json dj = nlohmann::json::array();
                for (const auto& p : dom) {
                    bad += p.ok ? 0 : 1;
                    dj.push_back({{"v", p.v}, {"x", p.x}, {"samples", p.samples},
                                  {"cdf_tilde", p.cdf_tilde}, {"cdf_empirical", p.cdf_empirical},
                                  {"se", p.se}, {"ok", p.ok}});
                }
                std::printf("dominance points: %zu, outside 3 SE: %zu\n", dom.size(), bad);
                out["hole_stats"] = to_json(stats);
                out["dominance"] = dj;
                if (stats.frozen_iff_edge_violations > 0 || stats.tau_order_violations > 0) {
                    return kExitInvariant;
                }
            }
            if (!bs_json.empty()) {
                write_file(bs_json, out.dump(2) + "\n");
            }
            return 0;
        }

        if (*sw) {
            const auto g = sweep_phase(sw_lambda, sw_zeta, sw_L, sw_k, sw_trials, sw_c.seed, sw_c.threads);
            std::ostringstream csv;
            write_phase_csv(csv, g, meta_of(sw, sw_c.seed));
            write_file(path_in(sw_c, "_phase.csv"), csv.str());
            std::cout << csv.str();
            return 0;
        }

        if (*ver) {
            AcceptanceOptions opt;
            opt.quick = v_quick;
            opt.threads = v_threads;
            int failed = 0;
            auto print = [&](const CriterionResult& r) {
                std::cout << format_result(r) << std::endl;
                failed += r.pass ? 0 : 1;
            };
            if (v_only.empty()) {
                run_acceptance(opt, print);
            } else {
                for (int id : v_only) {
                    if (id < 1 || id > acceptance_criteria_count()) {
                        throw ParameterError("no criterion " + std::to_string(id));
                    }
                    print(run_criterion(id, opt));
                }
            }
            std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " failed")
                      << (v_quick ? " (quick)" : "") << '\n';
            return failed == 0 ? 0 : kExitInvariant;
        }
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const BudgetExceeded& e) {
        std::cerr << "budget exceeded: " << e.what() << '\n';
        return kExitBudget;
    } catch (const std::logic_error& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
