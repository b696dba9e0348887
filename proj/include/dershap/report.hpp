#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dershap/inputs.hpp"
#include "dershap/spectral.hpp"

namespace dershap::report {

/// One method's scores over the inputs. `column` doubles as the CSV
/// header and must be unique within a run (e.g. "activity_m8").
struct MethodResult {
    std::string method;
    std::string column;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    std::vector<double> raw;
    std::vector<double> normalized;
    bool degenerate = false;
    bool clamped = false;
};

/// Everything one `analyze` invocation produced. Serialization is
/// deterministic: identical runs give byte-identical JSON apart from
/// elapsed_seconds.
struct RunResult {
    std::string model_id;
    std::size_t dimension = 0;
    std::vector<std::string> variables;
    nlohmann::ordered_json inputs;     // from inputs_to_json
    std::string estimator;             // "monte_carlo" or "quadrature"
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
    std::uint64_t points_per_dim = 0;
    std::uint64_t nodes = 0;
    unsigned workers = 1;
    std::string gradient_backend;      // "ad", "fd", or "external"
    double fd_increment = 0.0;         // meaningful for fd and external
    std::uint64_t model_evaluations = 0;
    std::uint64_t gradient_evaluations = 0;
    double elapsed_seconds = 0.0;
    std::vector<MethodResult> methods;
};

nlohmann::ordered_json inputs_to_json(const inputs::InputSpec& spec);

nlohmann::ordered_json to_json(const RunResult& r);

/// One row per input: name plus each method's normalized score.
std::string to_csv(const RunResult& r);

/// Grouped bar chart of normalized scores, 800×400, one bar per
/// (input, method) with a 3-decimal value label. Self-contained SVG.
std::string to_svg(const RunResult& r);

/// Writes via a temp file in the same directory plus rename, so readers
/// never observe a half-written artifact.
void write_file_atomic(const std::string& path, std::string_view content);

/// Cache artifact for an estimated C matrix. Entries are serialized as
/// the full row-major matrix; JSON shortest-round-trip numbers make the
/// save/load cycle bit-exact.
nlohmann::ordered_json cmatrix_to_json(const spectral::CMatrix& c,
                                       std::uint64_t model_digest);

/// Rejects artifacts whose model or input-spec digest does not match the
/// requesting configuration; a stale or foreign C matrix is worse than a
/// recomputed one.
spectral::CMatrix cmatrix_from_json(const nlohmann::ordered_json& j,
                                    std::uint64_t expected_model_digest,
                                    std::uint64_t expected_spec_digest);

}  // namespace dershap::report
