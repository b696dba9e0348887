#include "dershap/report.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "dershap/errors.hpp"

namespace dershap::report {

namespace {

using nlohmann::ordered_json;

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t parse_hex16(const std::string& s) {
    if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos) {
        throw ConfigError("malformed artifact: bad digest string '" + s + "'");
    }
    return std::stoull(s, nullptr, 16);
}

std::string fmt_g12(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

ordered_json estimator_json(const RunResult& r) {
    ordered_json e;
    e["kind"] = r.estimator;
    if (r.estimator == "monte_carlo") {
        e["samples"] = r.samples;
        e["seed"] = r.seed;
    } else {
        e["points_per_dim"] = r.points_per_dim;
        e["nodes"] = r.nodes;
    }
    e["workers"] = r.workers;
    return e;
}

}  // namespace

ordered_json inputs_to_json(const inputs::InputSpec& spec) {
    ordered_json j;
    if (spec.independent_marginals()) {
        j["kind"] = "independent";
        j["digest"] = hex16(spec.digest());
        ordered_json ms = ordered_json::array();
        for (const inputs::Marginal& m : spec.marginals()) {
            ordered_json mj;
            if (m.is_uniform()) {
                mj["kind"] = "uniform";
                mj["lower"] = m.p0;
                mj["upper"] = m.p1;
            } else {
                mj["kind"] = "normal";
                mj["mean"] = m.p0;
                mj["stddev"] = m.p1;
            }
            ms.push_back(std::move(mj));
        }
        j["marginals"] = std::move(ms);
    } else {
        j["kind"] = "correlated_normal";
        j["digest"] = hex16(spec.digest());
        j["mean"] = spec.mean();
        ordered_json rows = ordered_json::array();
        const Matrix& cov = spec.covariance();
        for (std::size_t i = 0; i < cov.rows(); ++i) {
            ordered_json row = ordered_json::array();
            for (std::size_t k = 0; k < cov.cols(); ++k) row.push_back(cov(i, k));
            rows.push_back(std::move(row));
        }
        j["covariance"] = std::move(rows);
    }
    return j;
}

ordered_json to_json(const RunResult& r) {
    ordered_json j;
    j["schema"] = "dershap-report-v1";
    j["model"] = {{"id", r.model_id}, {"dimension", r.dimension}, {"variables", r.variables}};
    j["inputs"] = r.inputs;
    j["estimator"] = estimator_json(r);
    ordered_json gb;
    gb["kind"] = r.gradient_backend;
    if (r.gradient_backend != "ad") gb["fd_increment"] = r.fd_increment;
    j["gradient_backend"] = std::move(gb);
    ordered_json methods = ordered_json::array();
    for (const MethodResult& m : r.methods) {
        ordered_json mj;
        mj["method"] = m.method;
        mj["column"] = m.column;
        mj["params"] = m.params;
        mj["raw"] = m.raw;
        mj["normalized"] = m.normalized;
        mj["degenerate"] = m.degenerate;
        mj["clamped"] = m.clamped;
        methods.push_back(std::move(mj));
    }
    j["methods"] = std::move(methods);
    j["evaluation_counts"] = {{"model", r.model_evaluations},
                              {"gradient", r.gradient_evaluations}};
    j["elapsed_seconds"] = r.elapsed_seconds;
    return j;
}

std::string to_csv(const RunResult& r) {
    std::string out = "input";
    for (const MethodResult& m : r.methods) {
        out += ',';
        out += csv_escape(m.column);
    }
    out += '\n';
    for (std::size_t i = 0; i < r.dimension; ++i) {
        out += csv_escape(i < r.variables.size() ? r.variables[i] : "x" + std::to_string(i));
        for (const MethodResult& m : r.methods) {
            out += ',';
            out += fmt_g12(i < m.normalized.size() ? m.normalized[i] : 0.0);
        }
        out += '\n';
    }
    return out;
}

std::string to_svg(const RunResult& r) {
    static const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f",
                                     "#e15759", "#b07aa1", "#76b7b2"};
    constexpr std::size_t kPaletteSize = 6;
    constexpr double kLeft = 46.0, kRight = 792.0, kBase = 344.0, kBarMax = 280.0;

    const std::size_t d = r.dimension;
    const std::size_t nm = r.methods.size();
    double ymax = 0.0;
    for (const MethodResult& m : r.methods) {
        for (double v : m.normalized) ymax = std::max(ymax, v);
    }
    if (ymax <= 0.0) ymax = 1.0;

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\" "
         "viewBox=\"0 0 800 400\" font-family=\"sans-serif\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"400\" fill=\"#ffffff\"/>\n";
    s += "<text x=\"10\" y=\"20\" font-size=\"13\" fill=\"#222\">" + xml_escape(r.model_id) +
         "</text>\n";

    // Legend, one swatch + label per method, laid out left to right.
    double lx = 10.0 + 7.5 * static_cast<double>(r.model_id.size()) + 28.0;
    for (std::size_t m = 0; m < nm; ++m) {
        const std::string& label = r.methods[m].column;
        s += "<rect x=\"" + fmt2(lx) + "\" y=\"9\" width=\"12\" height=\"12\" fill=\"" +
             kPalette[m % kPaletteSize] + "\"/>\n";
        s += "<text x=\"" + fmt2(lx + 16.0) + "\" y=\"19\" font-size=\"11\" fill=\"#222\">" +
             xml_escape(label) + "</text>\n";
        lx += 16.0 + 6.8 * static_cast<double>(label.size()) + 18.0;
    }

    // Gridlines with tick labels; the top line marks ymax.
    for (int t = 1; t <= 4; ++t) {
        double y = kBase - kBarMax * t / 4.0;
        s += "<line x1=\"" + fmt2(kLeft) + "\" y1=\"" + fmt2(y) + "\" x2=\"" + fmt2(kRight) +
             "\" y2=\"" + fmt2(y) + "\" stroke=\"#dddddd\"/>\n";
        s += "<text x=\"" + fmt2(kLeft - 4.0) + "\" y=\"" + fmt2(y + 3.0) +
             "\" font-size=\"9\" text-anchor=\"end\" fill=\"#555\">" + fmt2(ymax * t / 4.0) +
             "</text>\n";
    }
    s += "<line x1=\"" + fmt2(kLeft) + "\" y1=\"40.00\" x2=\"" + fmt2(kLeft) + "\" y2=\"" +
         fmt2(kBase) + "\" stroke=\"#333333\"/>\n";
    s += "<line x1=\"" + fmt2(kLeft) + "\" y1=\"" + fmt2(kBase) + "\" x2=\"" + fmt2(kRight) +
         "\" y2=\"" + fmt2(kBase) + "\" stroke=\"#333333\"/>\n";

    const double group_w = (kRight - kLeft) / static_cast<double>(d == 0 ? 1 : d);
    const double slot_w = group_w * 0.72 / static_cast<double>(nm == 0 ? 1 : nm);
    for (std::size_t g = 0; g < d; ++g) {
        const double gx = kLeft + group_w * static_cast<double>(g);
        for (std::size_t m = 0; m < nm; ++m) {
            const MethodResult& mr = r.methods[m];
            const double v = g < mr.normalized.size() ? mr.normalized[g] : 0.0;
            const double h = std::max(v, 0.0) / ymax * kBarMax;
            const double bx = gx + group_w * 0.14 + slot_w * static_cast<double>(m);
            const double bw = slot_w > 3.0 ? slot_w - 1.0 : slot_w;
            const std::string name =
                g < r.variables.size() ? r.variables[g] : "x" + std::to_string(g);
            s += "<rect class=\"bar\" data-method=\"" + xml_escape(mr.column) + "\" x=\"" +
                 fmt2(bx) + "\" y=\"" + fmt2(kBase - h) + "\" width=\"" + fmt2(bw) +
                 "\" height=\"" + fmt2(h) + "\" fill=\"" + kPalette[m % kPaletteSize] +
                 "\"><title>" + xml_escape(name) + " " + xml_escape(mr.column) + " = " +
                 fmt3(v) + "</title></rect>\n";
            s += "<text x=\"" + fmt2(bx + bw / 2.0) + "\" y=\"" + fmt2(kBase - h - 3.0) +
                 "\" font-size=\"8\" text-anchor=\"middle\" fill=\"#333\">" + fmt3(v) +
                 "</text>\n";
        }
        const std::string name = g < r.variables.size() ? r.variables[g] : "x" + std::to_string(g);
        s += "<text x=\"" + fmt2(gx + group_w / 2.0) + "\" y=\"362.00\" font-size=\"10\" "
             "text-anchor=\"middle\" fill=\"#222\">" + xml_escape(name) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

void write_file_atomic(const std::string& path, std::string_view content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("could not open '" + tmp + "' for writing: " + std::strerror(errno));
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw Error("could not write '" + tmp + "': " + std::strerror(errno));
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::string why = std::strerror(errno);
        std::remove(tmp.c_str());
        throw Error("could not move '" + tmp + "' into place: " + why);
    }
}

ordered_json cmatrix_to_json(const spectral::CMatrix& c, std::uint64_t model_digest) {
    const std::size_t d = c.dim();
    ordered_json j;
    j["schema"] = "dershap-cmatrix-v1";
    j["dimension"] = d;
    j["model_id"] = c.meta.model_id;
    j["model_digest"] = hex16(model_digest);
    j["spec_digest"] = hex16(c.meta.spec_digest);
    ordered_json e;
    e["kind"] = c.meta.estimator;
    if (c.meta.estimator == "monte_carlo") {
        e["samples"] = c.meta.samples;
        e["seed"] = c.meta.seed;
    } else {
        e["points_per_dim"] = c.meta.points_per_dim;
        e["nodes"] = c.meta.nodes;
    }
    j["estimator"] = std::move(e);
    j["workers"] = c.meta.workers;
    j["evaluation_counts"] = {{"model", c.meta.model_evaluations},
                              {"gradient", c.meta.gradient_evaluations}};
    ordered_json entries = ordered_json::array();
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t k = 0; k < d; ++k) entries.push_back(c.entries(i, k));
    }
    j["entries"] = std::move(entries);
    return j;
}

spectral::CMatrix cmatrix_from_json(const ordered_json& j,
                                    std::uint64_t expected_model_digest,
                                    std::uint64_t expected_spec_digest) {
    try {
        if (j.at("schema").get<std::string>() != "dershap-cmatrix-v1") {
            throw ConfigError("malformed artifact: unsupported schema '" +
                              j.at("schema").get<std::string>() + "'");
        }
        const auto d = j.at("dimension").get<std::size_t>();
        if (d < 1 || d > 4096) throw ConfigError("malformed artifact: bad dimension");

        const std::uint64_t model_digest = parse_hex16(j.at("model_digest").get<std::string>());
        if (model_digest != expected_model_digest) {
            throw ConfigError("cache artifact was computed for a different model "
                              "(digest mismatch)");
        }
        const std::uint64_t spec_digest = parse_hex16(j.at("spec_digest").get<std::string>());
        if (spec_digest != expected_spec_digest) {
            throw ConfigError("cache artifact was computed for a different input spec "
                              "(digest mismatch)");
        }

        const auto& entries = j.at("entries");
        if (!entries.is_array() || entries.size() != d * d) {
            throw ConfigError("malformed artifact: entries must hold dimension^2 numbers");
        }
        spectral::CMatrix c;
        c.entries = SymMatrix(d);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t k = 0; k <= i; ++k) {
                const double lower = entries[i * d + k].get<double>();
                const double upper = entries[k * d + i].get<double>();
                if (!std::isfinite(lower) || lower != upper) {
                    throw ConfigError("malformed artifact: entries are not a finite "
                                      "symmetric matrix");
                }
                c.entries.at(i, k) = lower;
            }
        }

        c.meta.model_id = j.at("model_id").get<std::string>();
        c.meta.spec_digest = spec_digest;
        const auto& e = j.at("estimator");
        c.meta.estimator = e.at("kind").get<std::string>();
        if (c.meta.estimator == "monte_carlo") {
            c.meta.samples = e.at("samples").get<std::uint64_t>();
            c.meta.seed = e.at("seed").get<std::uint64_t>();
        } else if (c.meta.estimator == "quadrature") {
            c.meta.points_per_dim = e.at("points_per_dim").get<std::uint64_t>();
            c.meta.nodes = e.at("nodes").get<std::uint64_t>();
        } else {
            throw ConfigError("malformed artifact: unknown estimator kind");
        }
        c.meta.workers = j.at("workers").get<unsigned>();
        c.meta.model_evaluations = j.at("evaluation_counts").at("model").get<std::uint64_t>();
        c.meta.gradient_evaluations =
            j.at("evaluation_counts").at("gradient").get<std::uint64_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed artifact: ") + e.what());
    }
}

}  // namespace dershap::report
