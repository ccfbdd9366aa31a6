#include "selfavg/table_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace selfavg {

using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

TableFormat format_from_name(const std::string& name) {
    if (name == "json") return TableFormat::json;
    if (name == "csv") return TableFormat::csv;
    if (name == "native") return TableFormat::native;
    throw std::invalid_argument("unknown format: " + name + " (expected json, csv or native)");
}

namespace {

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

json table_to_json(const SequenceTable& t, bool with_hex) {
    json j;
    j["kernel"] = t.kernel_name;
    j["n_max"] = t.n_max;
    j["precision_bits"] = t.precision_bits;
    j["support_violation"] = t.support_violation;
    j["residual_max"] = t.residual_max();
    json values = json::array();
    for (const auto& v : t.values) values.push_back(v.to_double());
    j["values"] = std::move(values);
    j["residuals"] = t.residuals;
    j["row_bits"] = t.row_bits;
    if (with_hex) {
        json hex = json::array();
        for (const auto& v : t.values) hex.push_back(v.to_hex());
        j["values_hex"] = std::move(hex);
    }
    return j;
}

} // namespace

void save_table(const SequenceTable& table, const std::string& path, TableFormat format) {
    if (format == TableFormat::csv) {
        std::string out = "n,p,residual\n";
        for (long n = 0; n <= table.n_max; ++n) {
            out += std::to_string(n);
            out += ',';
            out += format_double(table.value(n));
            out += ',';
            out += format_double(table.residuals[static_cast<size_t>(n)]);
            out += '\n';
        }
        write_file_atomic(path, out);
        return;
    }
    const json j = table_to_json(table, format == TableFormat::native);
    write_file_atomic(path, j.dump(1, '\t') + "\n");
}

SequenceTable load_table(const std::string& path, bool full_precision_required) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open table file: " + path);
    json j;
    in >> j;

    SequenceTable t;
    t.kernel_name = j.at("kernel").get<std::string>();
    t.n_max = j.at("n_max").get<long>();
    t.precision_bits = j.at("precision_bits").get<long>();
    t.support_violation = j.value("support_violation", false);
    const size_t count = static_cast<size_t>(t.n_max) + 1;

    const bool have_hex = j.contains("values_hex");
    if (full_precision_required && !have_hex)
        throw std::runtime_error("table file lacks exact values (native format required): " + path);

    t.values.assign(count, BigFloat(static_cast<mpfr_prec_t>(t.precision_bits)));
    if (have_hex) {
        const auto& hex = j.at("values_hex");
        if (hex.size() != count) throw std::runtime_error("table file corrupt (values_hex size)");
        for (size_t i = 0; i < count; ++i)
            t.values[i] = BigFloat::from_hex(hex[i].get<std::string>(),
                                             static_cast<mpfr_prec_t>(t.precision_bits));
    } else {
        const auto& vals = j.at("values");
        if (vals.size() != count) throw std::runtime_error("table file corrupt (values size)");
        for (size_t i = 0; i < count; ++i) t.values[i] = vals[i].get<double>();
    }
    t.residuals = j.value("residuals", std::vector<double>(count, 0.0));
    t.row_bits = j.value("row_bits", std::vector<long>(count, 0));
    if (t.residuals.size() != count || t.row_bits.size() != count)
        throw std::runtime_error("table file corrupt (residuals/row_bits size)");
    return t;
}

void save_envelope_csv(const std::vector<EnvelopeResult>& rows, const std::string& path) {
    std::string out = "x,t,M,l,u\n";
    for (const auto& r : rows) {
        out += format_double(r.x);
        out += ',';
        out += format_double(r.t);
        out += ',';
        out += std::to_string(r.M);
        out += ',';
        out += format_double(r.lower);
        out += ',';
        out += format_double(r.upper);
        out += '\n';
    }
    write_file_atomic(path, out);
}

void save_envelope_json(const std::vector<EnvelopeResult>& rows, const std::string& path) {
    json arr = json::array();
    for (const auto& r : rows) {
        json j;
        j["x"] = r.x;
        j["tau"] = r.tau;
        j["t"] = r.t;
        j["M"] = r.M;
        j["l"] = r.lower;
        j["u"] = r.upper;
        j["tail_mass"] = r.tail_mass;
        if (!r.weights.empty()) j["weights"] = r.weights;
        arr.push_back(std::move(j));
    }
    write_file_atomic(path, arr.dump(1, '\t') + "\n");
}

namespace {
json scan_to_json(const PeriodScanResult& s) {
    json j;
    j["x0"] = s.x0;
    j["grid_step"] = s.grid_step;
    j["liminf_lower"] = s.liminf_lower;
    j["liminf_upper"] = s.liminf_upper;
    j["limsup_lower"] = s.limsup_lower;
    j["limsup_upper"] = s.limsup_upper;
    j["argmax_l"] = s.argmax_l;
    j["argmin_u"] = s.argmin_u;
    j["evaluations"] = s.evaluations;
    j["gap"] = s.gap;
    j["certified_nonconvergent"] = s.certified_nonconvergent;
    return j;
}
} // namespace

void save_scan_json(const PeriodScanResult& scan, const std::string& path) {
    write_file_atomic(path, scan_to_json(scan).dump(1, '\t') + "\n");
}

void save_scan_csv(const PeriodScanResult& scan, const std::string& path) {
    std::string out =
        "x0,grid_step,liminf_lower,liminf_upper,limsup_lower,limsup_upper,gap,certified\n";
    out += format_double(scan.x0) + ',' + format_double(scan.grid_step) + ',' +
           format_double(scan.liminf_lower) + ',' + format_double(scan.liminf_upper) + ',' +
           format_double(scan.limsup_lower) + ',' + format_double(scan.limsup_upper) + ',' +
           format_double(scan.gap) + ',' + (scan.certified_nonconvergent ? "1" : "0") + '\n';
    write_file_atomic(path, out);
}

void save_estimate_json(const EstimateResult& est, const std::string& path) {
    json j;
    j["kernel"] = est.kernel_name;
    j["n"] = est.n_start;
    j["trials"] = est.trials;
    j["seed"] = est.seed;
    j["p_hat"] = est.p_hat;
    j["stderr"] = est.std_error;
    write_file_atomic(path, j.dump(1, '\t') + "\n");
}

void save_histograms_csv(const EstimateResult& est, const std::string& path) {
    std::string out = "kind,value,count\n";
    for (const auto& [state, count] : est.absorption_histogram)
        out += "absorption," + std::to_string(state) + ',' + std::to_string(count) + '\n';
    for (const auto& [rounds, count] : est.rounds_histogram)
        out += "rounds," + std::to_string(rounds) + ',' + std::to_string(count) + '\n';
    write_file_atomic(path, out);
}

} // namespace selfavg
