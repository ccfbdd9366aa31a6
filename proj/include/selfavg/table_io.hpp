#pragma once
// File formats. JSON dump: {kernel, n_max, precision_bits, values[],
// residuals[], residual_max, ...}; CSV: columns n,p,residual. The native
// format is the JSON dump plus exact hex-float values and is the only format
// accepted for resume (17-digit decimal exports cannot restore full
// precision).

#include "selfavg/envelope.hpp"
#include "selfavg/recursion.hpp"
#include "selfavg/simulator.hpp"

#include <string>

namespace selfavg {

enum class TableFormat { json, csv, native };

TableFormat format_from_name(const std::string& name);

void save_table(const SequenceTable& table, const std::string& path, TableFormat format);
// Accepts json and native dumps; full_precision_required rejects tables
// without exact values (e.g. when resuming a build).
SequenceTable load_table(const std::string& path, bool full_precision_required = false);

void save_envelope_csv(const std::vector<EnvelopeResult>& rows, const std::string& path);
void save_envelope_json(const std::vector<EnvelopeResult>& rows, const std::string& path);

void save_scan_json(const PeriodScanResult& scan, const std::string& path);
void save_scan_csv(const PeriodScanResult& scan, const std::string& path);

void save_estimate_json(const EstimateResult& est, const std::string& path);
void save_histograms_csv(const EstimateResult& est, const std::string& path);

// %.17g: round-trips doubles exactly.
std::string format_double(double v);

} // namespace selfavg
