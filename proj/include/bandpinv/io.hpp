#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "bandpinv/block_matrix.hpp"
#include "bandpinv/metric.hpp"
#include "bandpinv/ocp.hpp"

namespace bandpinv {

/// Documented column schemas of every CSV the tools emit. Tests pin the
/// emitted headers to these, so renames are deliberate.
namespace schema {
inline const std::vector<std::string> approx_report{
    "instance", "kind", "kappa", "kappa_bar", "mode", "n_used", "a", "b",
    "error", "bound_f", "bound_test", "bound_demko", "bound_shin"};
inline const std::vector<std::string> bounds_table{"omega", "f1", "f2", "demko", "shin"};
inline const std::vector<std::string> offdiag_decay{"instance", "kind", "distance", "measured",
                                                    "bound"};
inline const std::vector<std::string> saddle_table{
    "instance", "n", "m", "theta1", "theta2", "theta3", "theta4", "lo", "hi",
    "sigma_min_actual", "sigma_max_actual"};
inline const std::vector<std::string> trajectory{"t", "s_norm", "u_norm", "lambda_norm"};
inline const std::vector<std::string> stability{"N",      "h",           "sigma_min",
                                                "norm_Hinv", "dtilde", "within_2dtilde"};
inline const std::vector<std::string> consistency{"N", "h", "residual_hnorm"};
inline const std::vector<std::string> decay_response{"label", "lo", "hi", "response", "bound"};
inline const std::vector<std::string> decay_fit{"case", "N", "window_lo", "window_hi", "rate",
                                                "points"};
} // namespace schema

/// Shortest round-trip decimal form of a double (17 significant digits).
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

using CsvValue = std::variant<double, std::int64_t, std::string>;

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<CsvValue>> rows;
};

namespace detail {

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string csv_cell(const CsvValue& v) {
    if (std::holds_alternative<double>(v)) return fmt_double(std::get<double>(v));
    if (std::holds_alternative<std::int64_t>(v)) return std::to_string(std::get<std::int64_t>(v));
    return csv_escape(std::get<std::string>(v));
}

/// strtod without the out-of-range throw of std::stod: subnormal cells
/// parse to their (denormal) values instead of failing.
inline double parse_double(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw std::invalid_argument("parse_double: not a number: \"" + s + "\"");
    return v;
}

} // namespace detail

/// Serialize a table; every row must match the header width. An empty
/// row set still emits the header line, so schemas stay discoverable.
inline std::string to_csv(const CsvTable& table) {
    std::string out;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c) out += ',';
        out += detail::csv_escape(table.header[c]);
    }
    out += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw std::invalid_argument("to_csv: row width " + std::to_string(row.size()) +
                                        " != header width " + std::to_string(table.header.size()));
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += detail::csv_cell(row[c]);
        }
        out += '\n';
    }
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_file: cannot open " + path.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write_file: failed writing " + path.string());
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    write_file(path, to_csv(table));
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_file: cannot open " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("malformed JSON in " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// metric ingestion

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.empty())
        throw std::invalid_argument(std::string(what) + ": expected a nonempty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw std::invalid_argument(std::string(what) + ": ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c)
            M(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return M;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw std::invalid_argument(std::string(what) + ": expected an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

/**
 * Metric-space ingestion. Two accepted shapes:
 *   {"nodes": [ids...], "edges": [[i,j], ...]}  -> geodesic metric
 *   {"nodes": [ids...], "dist": [[...], ...]}   -> explicit table (validated)
 */
inline MetricSpace metric_from_json(const nlohmann::json& j, const ValidateOptions& opt = {}) {
    if (!j.is_object() || !j.contains("nodes"))
        throw std::invalid_argument("metric JSON: missing \"nodes\"");
    std::vector<NodeId> nodes;
    for (const auto& v : j.at("nodes")) nodes.push_back(v.get<NodeId>());
    if (j.contains("edges")) {
        Graph g;
        g.nodes = std::move(nodes);
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2)
                throw std::invalid_argument("metric JSON: each edge must be a pair");
            g.edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
        }
        return graph_geodesic(g, opt);
    }
    if (j.contains("dist"))
        return make_metric_space(std::move(nodes), matrix_from_json(j.at("dist"), "metric dist"), opt);
    throw std::invalid_argument("metric JSON: need \"edges\" or \"dist\"");
}

inline nlohmann::json violations_to_json(const std::vector<MetricViolation>& vs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : vs) {
        nlohmann::json item;
        switch (v.axiom) {
            case MetricAxiom::nonnegativity: item["axiom"] = "nonnegativity"; break;
            case MetricAxiom::identity: item["axiom"] = "identity"; break;
            case MetricAxiom::symmetry: item["axiom"] = "symmetry"; break;
            case MetricAxiom::triangle: item["axiom"] = "triangle"; break;
        }
        item["witness"] = v.axiom == MetricAxiom::triangle
                              ? nlohmann::json::array({v.i, v.j, v.k})
                              : nlohmann::json::array({v.i, v.j});
        item["detail"] = v.detail;
        arr.push_back(std::move(item));
    }
    return arr;
}

// ---------------------------------------------------------------------------
// banded-matrix egress: dense entries as CSV plus a JSON sidecar tying
// index ranges back to metric nodes.

inline void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& M) {
    std::string out;
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            if (c) out += ',';
            out += fmt_double(M(r, c));
        }
        out += '\n';
    }
    write_file(path, out);
}

inline Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::vector<std::vector<double>> rows;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(detail::parse_double(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("read_matrix_csv: empty file");
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows[0].size()));
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != M.cols())
            throw std::invalid_argument("read_matrix_csv: ragged rows");
        for (Eigen::Index c = 0; c < M.cols(); ++c)
            M(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    return M;
}

/// Sidecar block map: 1-based inclusive index ranges per node, for both
/// axes, plus a caller-supplied reference to the metric description.
inline nlohmann::json partition_sidecar(const BandedBlockMatrix& A, const std::string& metric_ref) {
    nlohmann::json side;
    auto ranges = [](const BlockPartition& part) {
        nlohmann::json out = nlohmann::json::object();
        for (std::size_t p = 0; p < part.block_count(); ++p) {
            const NodeId node = part.space().nodes()[p];
            out[std::to_string(node)] =
                nlohmann::json::array({part.offset(p) + 1, part.offset(p) + part.size(p)});
        }
        return out;
    };
    side["row_blocks"] = ranges(A.rows);
    side["col_blocks"] = ranges(A.cols);
    side["metric"] = metric_ref;
    if (A.certified_bandwidth) side["certified_bandwidth"] = *A.certified_bandwidth;
    return side;
}

// ---------------------------------------------------------------------------
// scenario ingestion

inline TimeSignal signal_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_object() || !j.contains("kind"))
        throw std::invalid_argument(std::string(what) + ": signal needs a \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    TimeSignal sig;
    if (kind == "zero") {
        sig.kind = TimeSignal::Kind::zero;
    } else if (kind == "constant") {
        sig.kind = TimeSignal::Kind::constant;
        if (j.contains("value")) sig.value = vector_from_json(j.at("value"), what);
    } else if (kind == "indicator") {
        sig.kind = TimeSignal::Kind::indicator;
        if (!j.contains("lo") || !j.contains("hi"))
            throw std::invalid_argument(std::string(what) + ": indicator needs lo and hi");
        sig.lo = j.at("lo").get<double>();
        sig.hi = j.at("hi").get<double>();
        if (j.contains("value")) sig.value = vector_from_json(j.at("value"), what);
        if (!(sig.lo <= sig.hi))
            throw std::invalid_argument(std::string(what) + ": indicator needs lo <= hi");
    } else {
        throw std::invalid_argument(std::string(what) + ": unknown signal kind \"" + kind + "\"");
    }
    return sig;
}

inline OcpScenario scenario_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("scenario: expected a JSON object");
    for (const char* key : {"Lambda", "B", "C", "T", "sbar", "lambdabar", "q", "r", "d"})
        if (!j.contains(key))
            throw std::invalid_argument(std::string("scenario: missing \"") + key + "\"");
    OcpScenario sc;
    sc.Lambda = matrix_from_json(j.at("Lambda"), "scenario Lambda");
    sc.B = matrix_from_json(j.at("B"), "scenario B");
    sc.C = matrix_from_json(j.at("C"), "scenario C");
    sc.T = j.at("T").get<double>();
    sc.sbar = vector_from_json(j.at("sbar"), "scenario sbar");
    sc.lambdabar = vector_from_json(j.at("lambdabar"), "scenario lambdabar");
    sc.q = signal_from_json(j.at("q"), "scenario q");
    sc.r = signal_from_json(j.at("r"), "scenario r");
    sc.d = signal_from_json(j.at("d"), "scenario d");
    if (j.contains("cert")) {
        const auto& c = j.at("cert");
        StabilityCert ct;
        ct.K_stab = matrix_from_json(c.at("K_stab"), "cert K_stab");
        ct.K_det = matrix_from_json(c.at("K_det"), "cert K_det");
        ct.L = c.at("L").get<double>();
        ct.alpha = c.at("alpha").get<double>();
        sc.cert = std::move(ct);
    }
    sc.validate();
    return sc;
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline nlohmann::json signal_to_json(const TimeSignal& sig) {
    nlohmann::json j;
    switch (sig.kind) {
        case TimeSignal::Kind::zero: j["kind"] = "zero"; break;
        case TimeSignal::Kind::constant: j["kind"] = "constant"; break;
        case TimeSignal::Kind::indicator:
            j["kind"] = "indicator";
            j["lo"] = sig.lo;
            j["hi"] = sig.hi;
            break;
    }
    if (sig.value.size() > 0) j["value"] = vector_to_json(sig.value);
    return j;
}

inline nlohmann::json scenario_to_json(const OcpScenario& sc) {
    nlohmann::json j;
    j["Lambda"] = matrix_to_json(sc.Lambda);
    j["B"] = matrix_to_json(sc.B);
    j["C"] = matrix_to_json(sc.C);
    j["T"] = sc.T;
    j["sbar"] = vector_to_json(sc.sbar);
    j["lambdabar"] = vector_to_json(sc.lambdabar);
    j["q"] = signal_to_json(sc.q);
    j["r"] = signal_to_json(sc.r);
    j["d"] = signal_to_json(sc.d);
    if (sc.cert) {
        nlohmann::json c;
        c["K_stab"] = matrix_to_json(sc.cert->K_stab);
        c["K_det"] = matrix_to_json(sc.cert->K_det);
        c["L"] = sc.cert->L;
        c["alpha"] = sc.cert->alpha;
        j["cert"] = std::move(c);
    }
    return j;
}

} // namespace bandpinv
