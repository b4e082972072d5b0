#include "arw/record_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "arw/errors.hpp"

namespace arw {

using nlohmann::json;

std::string format_double(double x)
{
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

Outcome parse_outcome(const std::string& s)
{
    for (auto o : {Outcome::emit_left, Outcome::emit_right, Outcome::failure}) {
        if (s == to_string(o)) {
            return o;
        }
    }
    throw ParameterError("unknown outcome '" + s + "'");
}

}  // namespace

json to_json(const RunRecord& r, bool trace)
{
    json j;
    j["schema"] = kRecordSchema;
    j["params"] = {{"lambda", r.params.lambda},
                   {"n", r.params.n},
                   {"K", r.params.K},
                   {"a", r.params.a},
                   {"m_boundary", r.params.m_boundary}};
    j["seed"] = r.seed;
    j["frozen"] = r.frozen;
    j["exit"] = r.exit;
    j["M"] = r.M;
    j["L"] = r.L;
    j["S"] = r.S;
    j["topplings"] = r.topplings;
    j["property_violations"] = r.property_violations;
    j["trace"] = trace;
    json attempts = json::array();
    json steps = json::array();
    json snaps = json::array();
    if (trace) {
        for (const auto& a : r.attempts) {
            attempts.push_back({{"block", a.block},
                                {"outcome", to_string(a.outcome)},
                                {"case", a.case_kind},
                                {"hot_start", a.hot_start},
                                {"hole_before", a.hole_before},
                                {"hole_after", a.hole_after},
                                {"steps", a.steps},
                                {"left_total", a.left_total},
                                {"frozen_after", a.frozen_after},
                                {"topplings", a.topplings}});
        }
        for (const auto& s : r.hole_steps) {
            steps.push_back({s.block, s.hole_before, s.delta, s.emitted});
        }
    }
    for (const auto& s : r.boundary_snapshots) {
        snaps.push_back({s.m, s.left_emissions, s.frozen});
    }
    j["attempts"] = std::move(attempts);
    j["hole_steps"] = std::move(steps);
    j["boundary_snapshots"] = std::move(snaps);
    return j;
}

RunRecord run_record_from_json(const json& j)
{
    if (j.value("schema", "") != kRecordSchema) {
        throw ParameterError("unsupported run-record schema");
    }
    RunRecord r;
    const auto& p = j.at("params");
    r.params = CarpetParams{p.at("lambda").get<double>(), p.at("n").get<int>(),
                            p.at("K").get<std::int64_t>(), p.at("a").get<std::int64_t>(),
                            p.at("m_boundary").get<std::int64_t>()};
    r.seed = j.at("seed").get<std::uint64_t>();
    r.frozen = j.at("frozen").get<std::uint64_t>();
    r.exit = j.at("exit").get<std::uint64_t>();
    r.M = j.at("M").get<std::vector<std::uint64_t>>();
    r.L = j.at("L").get<std::vector<std::uint64_t>>();
    r.S = j.at("S").get<std::vector<std::uint64_t>>();
    r.topplings = j.at("topplings").get<std::uint64_t>();
    r.property_violations = j.at("property_violations").get<std::vector<std::string>>();
    for (const auto& a : j.at("attempts")) {
        AttemptRecord rec;
        rec.block = a.at("block").get<int>();
        rec.outcome = parse_outcome(a.at("outcome").get<std::string>());
        rec.case_kind = a.at("case").get<int>();
        rec.hot_start = a.at("hot_start").get<std::int64_t>();
        rec.hole_before = a.at("hole_before").get<std::int64_t>();
        rec.hole_after = a.at("hole_after").get<std::int64_t>();
        rec.steps = a.at("steps").get<std::uint64_t>();
        rec.left_total = a.at("left_total").get<std::uint64_t>();
        rec.frozen_after = a.at("frozen_after").get<int>();
        rec.topplings = a.at("topplings").get<std::uint64_t>();
        r.attempts.push_back(rec);
    }
    for (const auto& s : j.at("hole_steps")) {
        r.hole_steps.push_back(HoleStep{s.at(0).get<int>(), s.at(1).get<std::int64_t>(),
                                        s.at(2).get<std::int64_t>(), s.at(3).get<bool>()});
    }
    for (const auto& s : j.at("boundary_snapshots")) {
        r.boundary_snapshots.push_back(BoundarySnapshot{
            s.at(0).get<std::int64_t>(), s.at(1).get<std::uint64_t>(), s.at(2).get<int>()});
    }
    return r;
}

json to_json(const OutputMeta& meta)
{
    json params = json::object();
    for (const auto& [k, v] : meta.params) {
        params[k] = v;
    }
    return {{"tool", "arw"},
            {"version", kToolVersion},
            {"command", meta.command},
            {"master_seed", meta.master_seed},
            {"params", params}};
}

void write_meta_comment(std::ostream& os, const OutputMeta& meta)
{
    os << "# arw " << kToolVersion << '\n';
    os << "# command: " << meta.command << '\n';
    os << "# master_seed: " << meta.master_seed << '\n';
    for (const auto& [k, v] : meta.params) {
        os << "# " << k << ": " << v << '\n';
    }
}

void write_summary_csv(std::ostream& os, const EnsembleResult& res, const OutputMeta& meta)
{
    write_meta_comment(os, meta);
    os << "# schema: " << kSummarySchema << '\n';
    os << "cell,kind,lambda,a,K,n,zeta,L,trials,completed,"
          "p_frozen_ge_quarter,se_p_frozen_ge_quarter,mean_frozen_frac,se_frozen_frac,"
          "mean_exit_frac,se_exit_frac,identity_violations,property_violations,"
          "mean_odometer,se_odometer,budget_exceeded,status";
    for (auto k : res.spec.ks) {
        if (res.spec.kind == ExperimentKind::stabilize_origin) {
            os << ",p_m0_ge_" << k << ",se_m0_ge_" << k;
        }
    }
    os << '\n';
    for (const auto& c : res.cells) {
        const auto& p = c.params;
        const bool carpet = p.kind == ExperimentKind::carpet_hole;
        auto num = [&](bool on, double x) { return on ? format_double(x) : std::string(); };
        os << c.index << ',' << to_string(p.kind) << ',' << format_double(p.lambda) << ','
           << (carpet ? std::to_string(p.a) : "") << ',' << (carpet ? std::to_string(p.K) : "")
           << ',' << (carpet ? std::to_string(p.n) : "") << ',' << num(!carpet, p.zeta) << ','
           << (carpet ? "" : std::to_string(p.L)) << ',' << c.trials << ',' << c.completed
           << ',' << num(carpet, c.p_frozen_quarter.value) << ','
           << num(carpet, c.p_frozen_quarter.se) << ',' << num(carpet, c.frozen_fraction.value)
           << ',' << num(carpet, c.frozen_fraction.se) << ','
           << num(carpet, c.exit_fraction.value) << ',' << num(carpet, c.exit_fraction.se)
           << ',' << (carpet ? std::to_string(c.identity_violations) : "") << ','
           << (carpet ? std::to_string(c.property_violations) : "") << ','
           << num(!carpet, c.odometer.value) << ',' << num(!carpet, c.odometer.se) << ','
           << (carpet ? "" : std::to_string(c.budget_exceeded)) << ','
           << (c.aborted ? "aborted" : "ok");
        for (const auto& a : c.activity) {
            os << ',' << format_double(a.value) << ',' << format_double(a.se);
        }
        os << '\n';
    }
}

void write_raw_jsonl(std::ostream& os, const EnsembleResult& res, const OutputMeta& meta,
                     bool trace)
{
    os << json{{"meta", to_json(meta)}}.dump() << '\n';
    for (std::size_t c = 0; c < res.records.size(); ++c) {
        for (const auto& r : res.records[c]) {
            auto j = to_json(r, trace);
            j["cell"] = c;
            os << j.dump() << '\n';
        }
    }
    for (std::size_t c = 0; c < res.odometers.size(); ++c) {
        const auto& p = res.cells[c].params;
        for (std::size_t t = 0; t < res.odometers[c].size(); ++t) {
            os << json{{"cell", c},
                       {"trial", t},
                       {"lambda", p.lambda},
                       {"zeta", p.zeta},
                       {"L", p.L},
                       {"seed", trial_seed(cell_seed(res.spec.master_seed, c), t)},
                       {"odometer_origin", res.odometers[c][t]}}
                      .dump()
               << '\n';
        }
    }
}

void write_phase_csv(std::ostream& os, const PhaseGrid& grid, const OutputMeta& meta)
{
    write_meta_comment(os, meta);
    os << "lambda,zeta,L,k,trials,p_active,se_p_active\n";
    for (std::size_t i = 0; i < grid.lambdas.size(); ++i) {
        for (std::size_t j = 0; j < grid.zetas.size(); ++j) {
            const auto& e = grid.estimates[i][j];
            os << format_double(grid.lambdas[i]) << ',' << format_double(grid.zetas[j]) << ','
               << grid.L << ',' << grid.k << ',' << grid.trials << ',' << format_double(e.value)
               << ',' << format_double(e.se) << '\n';
        }
    }
}

json to_json(const Estimate& e)
{
    json j{{"name", e.name},         {"trials", e.trials}, {"hits", e.hits},
           {"estimate", e.estimate}, {"se", e.se},         {"wide_ci", e.wide_ci}};
    if (!e.reference_kind.empty() || e.reference != 0.0) {
        j["reference"] = e.reference;
        j["reference_kind"] = e.reference_kind.empty() ? "report" : e.reference_kind;
    }
    return j;
}

json to_json(const HoleProcessStats& s)
{
    json est = json::array();
    for (const auto& e : s.estimates) {
        est.push_back(to_json(e));
    }
    return {{"lambda", s.lambda},
            {"a", s.a},
            {"K", s.K},
            {"estimates", est},
            {"frozen_iff_edge_violations", s.frozen_iff_edge_violations},
            {"tau_order_violations", s.tau_order_violations}};
}

json to_json(const MomentReport& m)
{
    json fm = json::array();
    for (const auto& e : m.frozen_moments) {
        fm.push_back({{"theta", e.theta}, {"log_mean", e.log_mean}, {"log_se", e.log_se}});
    }
    json bs = json::array();
    for (const auto& r : m.block_sums) {
        bs.push_back({{"ell", r.ell}, {"runs", r.runs}, {"mean", r.mean}, {"se", r.se}});
    }
    return {{"frozen_moments", fm},
            {"block_theta", m.block_theta},
            {"block_sums", bs},
            {"reference", m.reference}};
}

std::string format_table(const HoleProcessStats& s)
{
    std::ostringstream os;
    os << "lambda=" << format_double(s.lambda) << " a=" << s.a << " K=" << s.K << '\n';
    os << std::left << std::setw(28) << "statistic" << std::right << std::setw(10) << "trials"
       << std::setw(12) << "estimate" << std::setw(12) << "se" << std::setw(14) << "reference"
       << "  kind\n";
    os << std::setprecision(5);
    for (const auto& e : s.estimates) {
        os << std::left << std::setw(28) << e.name << std::right << std::setw(10) << e.trials
           << std::setw(12) << e.estimate << std::setw(12) << e.se << std::setw(14)
           << e.reference << "  " << (e.reference_kind.empty() ? "report" : e.reference_kind)
           << (e.wide_ci ? " (wide CI)" : "") << '\n';
    }
    os << "frozen-iff-edge violations: " << s.frozen_iff_edge_violations << '\n';
    os << "left-emission counter violations: " << s.tau_order_violations << '\n';
    return os.str();
}

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    f << content;
    if (!f) {
        throw std::runtime_error("write to " + path + " failed");
    }
}

}  // namespace arw
