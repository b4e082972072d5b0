#pragma once

// Serialization of run records, ensemble summaries and phase grids.
//
// Every output file starts with a metadata block (tool version, command,
// parameters, master seed). CSV files carry it as '#'-prefixed lines, JSON
// lines files as a first object with a "meta" key.
//
// Summary CSV columns, in order:
//   cell, kind, lambda, a, K, n, zeta, L, trials, completed,
//   p_frozen_ge_quarter, se_p_frozen_ge_quarter, mean_frozen_frac,
//   se_frozen_frac, mean_exit_frac, se_exit_frac, identity_violations,
//   property_violations, mean_odometer, se_odometer, budget_exceeded, status,
//   then one (p_m0_ge_<k>, se_m0_ge_<k>) pair per configured k.
// Columns that do not apply to the experiment kind are left empty.
//
// Phase CSV columns: lambda, zeta, L, k, trials, p_active, se_p_active.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "arw/block_stats.hpp"
#include "arw/carpet_hole.hpp"
#include "arw/ensemble.hpp"

namespace arw {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kRecordSchema = "arw.run-record/1";
inline constexpr const char* kSummarySchema = "arw.summary-csv/1";

struct OutputMeta {
    std::string command;
    std::vector<std::pair<std::string, std::string>> params;
    std::uint64_t master_seed = 0;
};

/// Shortest decimal string that round-trips the value.
std::string format_double(double x);

nlohmann::json to_json(const RunRecord& r, bool trace = true);
RunRecord run_record_from_json(const nlohmann::json& j);

nlohmann::json to_json(const OutputMeta& meta);
void write_meta_comment(std::ostream& os, const OutputMeta& meta);

void write_summary_csv(std::ostream& os, const EnsembleResult& res, const OutputMeta& meta);
/// One meta line, then one record per retained trial in (cell, trial) order.
void write_raw_jsonl(std::ostream& os, const EnsembleResult& res, const OutputMeta& meta,
                     bool trace);
void write_phase_csv(std::ostream& os, const PhaseGrid& grid, const OutputMeta& meta);

nlohmann::json to_json(const Estimate& e);
nlohmann::json to_json(const HoleProcessStats& s);
nlohmann::json to_json(const MomentReport& m);
/// Aligned text table: name, trials, estimate, se, reference.
std::string format_table(const HoleProcessStats& s);

/// Writes `content` to `path` atomically enough for desk use (truncate).
void write_file(const std::string& path, const std::string& content);

}  // namespace arw
