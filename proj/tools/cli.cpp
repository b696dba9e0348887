// Command-line front end: analyze models, validate the numerical
// invariants, and cache expensive C-matrix estimates.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dershap/digest.hpp"
#include "dershap/errors.hpp"
#include "dershap/expr.hpp"
#include "dershap/gradients.hpp"
#include "dershap/inputs.hpp"
#include "dershap/measures.hpp"
#include "dershap/models.hpp"
#include "dershap/oracles.hpp"
#include "dershap/report.hpp"
#include "dershap/rng.hpp"
#include "dershap/spectral.hpp"

namespace {

using nlohmann::ordered_json;
using namespace dershap;

// ---------------------------------------------------------------------------
// Configuration

struct RunFlags {
    std::string spec_file;
    std::string model;
    std::string expr_text;
    std::string vars_csv;
    std::string external_cmd;
    std::string estimator = "mc";
    std::uint64_t samples = 10000;
    std::size_t points = 8;
    std::uint64_t seed = 1;
    std::string methods_csv;
    std::size_t m = 0;  // 0: default to d
    std::size_t k = 0;  // 0: default to d
    double fd_h = 0.0;  // 0: backend default
    std::string out_dir = ".";
    std::string format = "csv,json,svg";
    std::string c_cache;
    unsigned workers = 1;

    CLI::Option* o_model = nullptr;
    CLI::Option* o_expr = nullptr;
    CLI::Option* o_vars = nullptr;
    CLI::Option* o_external = nullptr;
    CLI::Option* o_estimator = nullptr;
    CLI::Option* o_samples = nullptr;
    CLI::Option* o_points = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_methods = nullptr;
    CLI::Option* o_m = nullptr;
    CLI::Option* o_k = nullptr;
    CLI::Option* o_fd_h = nullptr;
    CLI::Option* o_out = nullptr;
    CLI::Option* o_format = nullptr;
    CLI::Option* o_workers = nullptr;
};

void add_run_options(CLI::App* sub, RunFlags& f) {
    sub->add_option("--spec", f.spec_file, "JSON config file; flags override its fields");
    f.o_model = sub->add_option("--model", f.model, "built-in model id");
    f.o_expr = sub->add_option("--expr", f.expr_text, "model as an expression over --vars");
    f.o_vars = sub->add_option("--vars", f.vars_csv, "comma-separated input names");
    f.o_external =
        sub->add_option("--external-cmd", f.external_cmd, "model as a line-protocol subprocess");
    f.o_estimator =
        sub->add_option("--estimator", f.estimator, "mc or quad")->check(CLI::IsMember({"mc", "quad"}));
    f.o_samples = sub->add_option("--samples", f.samples, "Monte Carlo sample count");
    f.o_points = sub->add_option("--points", f.points, "quadrature points per dimension");
    f.o_seed = sub->add_option("--seed", f.seed, "sample stream seed");
    f.o_methods = sub->add_option("--methods", f.methods_csv,
                                  "comma list of dgsm, dgsm_abs, activity, dershap, "
                                  "dershap_truncated; name(N) sets its rank");
    f.o_m = sub->add_option("--m", f.m, "activity score rank (default: dimension)");
    f.o_k = sub->add_option("--k", f.k, "truncation rank (default: dimension)");
    f.o_fd_h = sub->add_option("--fd-h", f.fd_h, "finite-difference increment; forces the fd backend");
    f.o_out = sub->add_option("--out", f.out_dir, "output directory");
    f.o_format = sub->add_option("--format", f.format, "any of csv,json,svg");
    f.o_workers = sub->add_option("--workers", f.workers, "worker threads for estimation");
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        std::string item = s.substr(start, comma - start);
        // trim spaces
        while (!item.empty() && item.front() == ' ') item.erase(item.begin());
        while (!item.empty() && item.back() == ' ') item.pop_back();
        if (!item.empty()) out.push_back(std::move(item));
        start = comma + 1;
    }
    return out;
}

struct MethodRequest {
    std::string name;
    std::size_t rank = 0;  // activity m or truncation k; 0 = default
};

std::vector<MethodRequest> parse_methods(const std::vector<std::string>& items) {
    std::vector<MethodRequest> out;
    for (const std::string& item : items) {
        MethodRequest r;
        auto open = item.find('(');
        if (open == std::string::npos) {
            r.name = item;
        } else {
            if (item.back() != ')') {
                throw ConfigError("malformed method '" + item + "', expected name(N)");
            }
            r.name = item.substr(0, open);
            std::string arg = item.substr(open + 1, item.size() - open - 2);
            try {
                r.rank = std::stoul(arg);
            } catch (const std::exception&) {
                throw ConfigError("malformed method rank in '" + item + "'");
            }
        }
        if (r.name != "dgsm" && r.name != "dgsm_abs" && r.name != "activity" &&
            r.name != "dershap" && r.name != "dershap_truncated") {
            throw ConfigError("unknown method '" + r.name +
                              "' (known: dgsm, dgsm_abs, activity, dershap, dershap_truncated)");
        }
        out.push_back(std::move(r));
    }
    if (out.empty()) throw ConfigError("method list is empty");
    return out;
}

inputs::InputSpec inputs_from_json(const ordered_json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "independent") {
            std::vector<inputs::Marginal> ms;
            for (const auto& mj : j.at("marginals")) {
                const std::string mkind = mj.at("kind").get<std::string>();
                if (mkind == "uniform") {
                    ms.push_back(inputs::Marginal::uniform(mj.at("lower").get<double>(),
                                                           mj.at("upper").get<double>()));
                } else if (mkind == "normal") {
                    ms.push_back(inputs::Marginal::normal(mj.at("mean").get<double>(),
                                                          mj.at("stddev").get<double>()));
                } else {
                    throw ConfigError("unknown marginal kind '" + mkind + "'");
                }
            }
            return inputs::InputSpec::independent(std::move(ms));
        }
        if (kind == "correlated_normal") {
            std::vector<double> mean = j.at("mean").get<std::vector<double>>();
            const auto& rows = j.at("covariance");
            Matrix cov(mean.size(), mean.size());
            if (!rows.is_array() || rows.size() != mean.size()) {
                throw ConfigError("covariance must be a square matrix matching mean length");
            }
            for (std::size_t i = 0; i < mean.size(); ++i) {
                const auto& row = rows[i];
                if (!row.is_array() || row.size() != mean.size()) {
                    throw ConfigError("covariance must be a square matrix matching mean length");
                }
                for (std::size_t c = 0; c < mean.size(); ++c) cov(i, c) = row[c].get<double>();
            }
            return inputs::InputSpec::correlated_normal(std::move(mean), std::move(cov));
        }
        throw ConfigError("unknown inputs kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad inputs object in config: ") + e.what());
    }
}

/// Merged view of the config file and command-line flags (flags win).
struct RunConfig {
    std::string model;
    std::string expr_text;
    std::vector<std::string> vars;
    std::string external_cmd;
    std::optional<inputs::InputSpec> inputs;  // config file only
    std::string estimator = "mc";
    std::uint64_t samples = 10000;
    std::size_t points = 8;
    std::uint64_t seed = 1;
    std::vector<MethodRequest> methods;
    std::size_t m = 0;
    std::size_t k = 0;
    double fd_h = 0.0;
    bool fd_forced = false;
    std::string out_dir = ".";
    std::vector<std::string> formats;
    unsigned workers = 1;
};

RunConfig merge_config(const RunFlags& f) {
    ordered_json file = ordered_json::object();
    if (!f.spec_file.empty()) {
        std::ifstream in(f.spec_file);
        if (!in) throw ConfigError("could not open config file '" + f.spec_file + "'");
        try {
            in >> file;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("could not parse config file '" + f.spec_file + "': " + e.what());
        }
        if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
        static const char* known[] = {"model", "expr",    "vars", "external_cmd", "inputs",
                                      "estimator", "samples", "points", "seed", "methods",
                                      "m",     "k",       "fd_h", "out",          "format",
                                      "workers"};
        for (const auto& [key, value] : file.items()) {
            (void)value;
            bool ok = false;
            for (const char* k : known) ok = ok || key == k;
            if (!ok) throw ConfigError("unknown config key '" + key + "'");
        }
    }

    RunConfig c;
    try {
        if (file.contains("model")) c.model = file["model"].get<std::string>();
        if (file.contains("expr")) c.expr_text = file["expr"].get<std::string>();
        if (file.contains("vars")) c.vars = file["vars"].get<std::vector<std::string>>();
        if (file.contains("external_cmd"))
            c.external_cmd = file["external_cmd"].get<std::string>();
        if (file.contains("inputs")) c.inputs = inputs_from_json(file["inputs"]);
        if (file.contains("estimator")) c.estimator = file["estimator"].get<std::string>();
        if (file.contains("samples")) c.samples = file["samples"].get<std::uint64_t>();
        if (file.contains("points")) c.points = file["points"].get<std::size_t>();
        if (file.contains("seed")) c.seed = file["seed"].get<std::uint64_t>();
        if (file.contains("methods")) {
            if (file["methods"].is_string()) {
                c.methods = parse_methods(split_csv(file["methods"].get<std::string>()));
            } else {
                c.methods = parse_methods(file["methods"].get<std::vector<std::string>>());
            }
        }
        if (file.contains("m")) c.m = file["m"].get<std::size_t>();
        if (file.contains("k")) c.k = file["k"].get<std::size_t>();
        if (file.contains("fd_h")) {
            c.fd_h = file["fd_h"].get<double>();
            c.fd_forced = true;
        }
        if (file.contains("out")) c.out_dir = file["out"].get<std::string>();
        if (file.contains("format")) c.formats = split_csv(file["format"].get<std::string>());
        if (file.contains("workers")) c.workers = file["workers"].get<unsigned>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config file field: ") + e.what());
    }

    if (f.o_model->count()) c.model = f.model;
    if (f.o_expr->count()) c.expr_text = f.expr_text;
    if (f.o_vars->count()) c.vars = split_csv(f.vars_csv);
    if (f.o_external->count()) c.external_cmd = f.external_cmd;
    if (f.o_estimator->count()) c.estimator = f.estimator;
    if (f.o_samples->count()) c.samples = f.samples;
    if (f.o_points->count()) c.points = f.points;
    if (f.o_seed->count()) c.seed = f.seed;
    if (f.o_methods->count()) c.methods = parse_methods(split_csv(f.methods_csv));
    if (f.o_m->count()) c.m = f.m;
    if (f.o_k->count()) c.k = f.k;
    if (f.o_fd_h->count()) {
        c.fd_h = f.fd_h;
        c.fd_forced = true;
    }
    if (f.o_out->count()) c.out_dir = f.out_dir;
    if (f.o_format->count() || c.formats.empty()) c.formats = split_csv(f.format);
    if (f.o_workers->count()) c.workers = f.workers;

    if (c.estimator != "mc" && c.estimator != "quad") {
        throw ConfigError("estimator must be mc or quad, got '" + c.estimator + "'");
    }
    if (c.methods.empty()) {
        c.methods = {{"dgsm", 0}, {"activity", 0}, {"dershap", 0}};
    }
    for (const std::string& fmt : c.formats) {
        if (fmt != "csv" && fmt != "json" && fmt != "svg") {
            throw ConfigError("unknown output format '" + fmt + "'");
        }
    }
    if (c.workers < 1) throw ConfigError("workers must be at least 1");
    return c;
}

// ---------------------------------------------------------------------------
// Model resolution

struct ResolvedModel {
    std::string id;
    std::size_t dimension = 0;
    std::vector<std::string> variables;
    std::optional<inputs::InputSpec> spec;
    std::shared_ptr<const gradients::ValueModel> value_model;
    std::unique_ptr<gradients::GradientProvider> provider;
    std::string backend;  // "ad", "fd", "external"
    double fd_increment = 0.0;
    std::uint64_t digest = 0;
};

ResolvedModel resolve_model(const RunConfig& c) {
    int sources = (!c.model.empty()) + (!c.expr_text.empty()) + (!c.external_cmd.empty());
    if (sources == 0) {
        throw ConfigError("no model given; use --model, --expr, or --external-cmd");
    }
    if (sources > 1) {
        throw ConfigError("give exactly one of --model, --expr, --external-cmd");
    }

    ResolvedModel r;
    Fnv1a64 digest;

    if (!c.model.empty()) {
        const models::BuiltinModel* b = models::find_builtin(c.model);
        if (b == nullptr) {
            std::string known;
            for (const auto& m : models::builtin_catalog()) {
                if (!known.empty()) known += ", ";
                known += m.id;
            }
            throw ConfigError("unknown model '" + c.model + "' (known: " + known + ")");
        }
        r.id = b->id;
        r.dimension = b->dimension;
        r.variables = b->variables;
        r.spec = c.inputs ? *c.inputs : b->default_spec;
        r.value_model = b->make_value_model();
        digest.update(std::string_view("builtin:"));
        digest.update(std::string_view(b->id));
        digest.update(static_cast<std::uint64_t>(b->dimension));
        if (b->expression && !c.fd_forced) {
            r.provider = std::make_unique<gradients::AdExpressionProvider>(*b->expression);
            r.backend = "ad";
        } else {
            double h = c.fd_h > 0.0 ? c.fd_h : gradients::FiniteDifferenceProvider::kDefaultIncrement;
            r.provider = std::make_unique<gradients::FiniteDifferenceProvider>(r.value_model, h);
            r.backend = "fd";
            r.fd_increment = h;
        }
    } else if (!c.expr_text.empty()) {
        if (c.vars.empty()) {
            throw ConfigError("--expr requires --vars with the input names");
        }
        expr::ExprAst ast = expr::ExprAst::parse(c.expr_text, c.vars);
        r.id = "expr";
        r.dimension = ast.arity();
        r.variables = c.vars;
        r.spec = c.inputs ? *c.inputs : inputs::InputSpec::unit_uniform(r.dimension);
        r.value_model = std::make_shared<gradients::ExprValueModel>(ast);
        digest.update(std::string_view("expr:"));
        digest.update(std::string_view(c.expr_text));
        for (const std::string& v : c.vars) digest.update(std::string_view(v));
        if (!c.fd_forced) {
            r.provider = std::make_unique<gradients::AdExpressionProvider>(std::move(ast));
            r.backend = "ad";
        } else {
            double h = c.fd_h > 0.0 ? c.fd_h : gradients::FiniteDifferenceProvider::kDefaultIncrement;
            r.provider = std::make_unique<gradients::FiniteDifferenceProvider>(r.value_model, h);
            r.backend = "fd";
            r.fd_increment = h;
        }
    } else {
        std::size_t d = 0;
        if (!c.vars.empty()) {
            d = c.vars.size();
        } else if (c.inputs) {
            d = c.inputs->dimension();
        } else {
            throw ConfigError("--external-cmd needs --vars or an inputs object to fix the dimension");
        }
        r.id = "external";
        r.dimension = d;
        if (!c.vars.empty()) {
            r.variables = c.vars;
        } else {
            for (std::size_t i = 0; i < d; ++i) r.variables.push_back("x" + std::to_string(i));
        }
        r.spec = c.inputs ? *c.inputs : inputs::InputSpec::unit_uniform(d);
        r.value_model = std::make_shared<gradients::ExternalValueModel>(c.external_cmd, d);
        double h = c.fd_h > 0.0 ? c.fd_h : gradients::FiniteDifferenceProvider::kDefaultIncrement;
        r.provider = std::make_unique<gradients::FiniteDifferenceProvider>(r.value_model, h);
        r.backend = "external";
        r.fd_increment = h;
        digest.update(std::string_view("external:"));
        digest.update(std::string_view(c.external_cmd));
        digest.update(static_cast<std::uint64_t>(d));
    }

    if (r.spec->dimension() != r.dimension) {
        throw ConfigError("inputs dimension " + std::to_string(r.spec->dimension()) +
                          " does not match model dimension " + std::to_string(r.dimension));
    }
    if (c.vars.size() > 0 && c.vars.size() != r.dimension) {
        throw ConfigError("--vars lists " + std::to_string(c.vars.size()) + " names for a " +
                          std::to_string(r.dimension) + "-input model");
    }
    r.digest = digest.value();
    return r;
}

// ---------------------------------------------------------------------------
// analyze

int cmd_analyze(const RunFlags& flags) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = merge_config(flags);
    ResolvedModel model = resolve_model(cfg);
    const std::size_t d = model.dimension;

    bool need_c = false;
    bool need_abs = false;
    for (const MethodRequest& mr : cfg.methods) {
        if (mr.name == "dgsm_abs") need_abs = true;
        else need_c = true;
    }
    if (need_abs && cfg.estimator == "quad") {
        throw ConfigError("dgsm_abs averages |gradient| over random samples and is Monte "
                          "Carlo only; use --estimator mc");
    }

    std::optional<spectral::CMatrix> c;
    if (need_c) {
        if (!flags.c_cache.empty()) {
            std::ifstream in(flags.c_cache);
            if (!in) throw ConfigError("could not open cache file '" + flags.c_cache + "'");
            ordered_json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("malformed artifact: " + std::string(e.what()));
            }
            c = report::cmatrix_from_json(j, model.digest, model.spec->digest());
            if (c->dim() != d) throw ConfigError("malformed artifact: dimension mismatch");
        } else if (cfg.estimator == "mc") {
            c = spectral::estimate_c_mc(*model.provider, *model.spec, cfg.samples, cfg.seed,
                                        cfg.workers);
        } else {
            c = spectral::estimate_c_quadrature(*model.provider, *model.spec, cfg.points,
                                                cfg.workers);
        }
        c->meta.model_id = model.id;
    }

    std::optional<spectral::EigenDecomp> eig;
    auto eig_of_c = [&]() -> const spectral::EigenDecomp& {
        if (!eig) eig = spectral::eigendecompose(c->entries);
        return *eig;
    };

    report::RunResult run;
    run.model_id = model.id;
    run.dimension = d;
    run.variables = model.variables;
    run.inputs = report::inputs_to_json(*model.spec);
    run.gradient_backend = model.backend;
    run.fd_increment = model.fd_increment;
    run.workers = cfg.workers;
    if (c) {
        run.estimator = c->meta.estimator;
        run.samples = c->meta.samples;
        run.seed = c->meta.seed;
        run.points_per_dim = c->meta.points_per_dim;
        run.nodes = c->meta.nodes;
        run.workers = c->meta.workers;
    } else {
        run.estimator = "monte_carlo";
        run.samples = cfg.samples;
        run.seed = cfg.seed;
    }

    for (const MethodRequest& mr : cfg.methods) {
        report::MethodResult res;
        res.method = mr.name;
        if (mr.name == "dgsm") {
            res.column = "dgsm";
            res.raw = measures::dgsm(c->entries);
            auto norm = measures::normalize(res.raw);
            res.normalized = std::move(norm.values);
            res.degenerate = norm.degenerate;
        } else if (mr.name == "dgsm_abs") {
            res.column = "dgsm_abs";
            res.raw = measures::dgsm_abs(*model.provider, *model.spec, cfg.samples, cfg.seed,
                                         cfg.workers);
            res.params["samples"] = cfg.samples;
            res.params["seed"] = cfg.seed;
            auto norm = measures::normalize(res.raw);
            res.normalized = std::move(norm.values);
            res.degenerate = norm.degenerate;
        } else if (mr.name == "activity") {
            std::size_t m = mr.rank ? mr.rank : (cfg.m ? cfg.m : d);
            res.column = "activity_m" + std::to_string(m);
            res.raw = measures::activity_scores(eig_of_c(), m);
            res.params["m"] = m;
            // Eigen-rank truncation can leave roundoff-negative scores.
            auto norm = measures::normalize_clamped(res.raw);
            res.normalized = std::move(norm.values);
            res.degenerate = norm.degenerate;
            res.clamped = norm.clamped;
        } else if (mr.name == "dershap") {
            res.column = "dershap";
            measures::ShapleyVector sv = measures::dershap(c->entries);
            res.raw = std::move(sv.values);
            res.params["source_digest"] = [&] {
                char buf[17];
                std::snprintf(buf, sizeof buf, "%016llx",
                              static_cast<unsigned long long>(sv.source_digest));
                return std::string(buf);
            }();
            auto norm = measures::normalize(res.raw);
            res.normalized = std::move(norm.values);
            res.degenerate = norm.degenerate;
        } else {  // dershap_truncated
            std::size_t k = mr.rank ? mr.rank : (cfg.k ? cfg.k : d);
            res.column = "dershap_trunc_k" + std::to_string(k);
            measures::TruncatedShapley ts = measures::dershap_truncated(c->entries, k);
            res.raw = std::move(ts.values);
            res.params["k"] = k;
            res.params["epsilon"] = ts.epsilon;
            res.params["error_bound"] = ts.bound;
            auto norm = measures::normalize_clamped(res.raw);
            res.normalized = std::move(norm.values);
            res.degenerate = norm.degenerate;
            res.clamped = norm.clamped;
        }
        for (const report::MethodResult& prev : run.methods) {
            if (prev.column == res.column) {
                throw ConfigError("duplicate method column '" + res.column + "'");
            }
        }
        run.methods.push_back(std::move(res));
    }

    // Every model call in analyze flows through the gradient provider, whose
    // counter already includes the stencil evaluations of an fd backend;
    // adding the wrapped model's own counter would double-count them.
    run.model_evaluations = model.provider->counter().model_evaluations();
    run.gradient_evaluations = model.provider->counter().gradient_evaluations();
    run.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::filesystem::create_directories(cfg.out_dir);
    auto path = [&](const char* name) { return (std::filesystem::path(cfg.out_dir) / name).string(); };

    std::printf("model=%s dimension=%zu estimator=%s backend=%s\n", run.model_id.c_str(), d,
                run.estimator.c_str(), run.gradient_backend.c_str());
    for (const report::MethodResult& m : run.methods) {
        std::printf("%s:", m.column.c_str());
        for (double v : m.normalized) std::printf(" %.6g", v);
        std::printf("%s\n", m.degenerate ? " (degenerate)" : "");
    }
    for (const std::string& fmt : cfg.formats) {
        if (fmt == "json") {
            report::write_file_atomic(path("report.json"), report::to_json(run).dump(2) + "\n");
            std::printf("wrote %s\n", path("report.json").c_str());
        } else if (fmt == "csv") {
            report::write_file_atomic(path("report.csv"), report::to_csv(run));
            std::printf("wrote %s\n", path("report.csv").c_str());
        } else {
            report::write_file_atomic(path("chart.svg"), report::to_svg(run));
            std::printf("wrote %s\n", path("chart.svg").c_str());
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// cache

int cmd_cache(const std::string& op, const std::string& path, const RunFlags& flags) {
    RunConfig cfg = merge_config(flags);
    ResolvedModel model = resolve_model(cfg);

    if (op == "save") {
        spectral::CMatrix c =
            cfg.estimator == "mc"
                ? spectral::estimate_c_mc(*model.provider, *model.spec, cfg.samples, cfg.seed,
                                          cfg.workers)
                : spectral::estimate_c_quadrature(*model.provider, *model.spec, cfg.points,
                                                  cfg.workers);
        c.meta.model_id = model.id;
        report::write_file_atomic(path, report::cmatrix_to_json(c, model.digest).dump(2) + "\n");
        std::printf("wrote %s (model=%s dimension=%zu estimator=%s)\n", path.c_str(),
                    c.meta.model_id.c_str(), c.dim(), c.meta.estimator.c_str());
        return 0;
    }

    std::ifstream in(path);
    if (!in) throw ConfigError("could not open cache file '" + path + "'");
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed artifact: " + std::string(e.what()));
    }
    spectral::CMatrix c = report::cmatrix_from_json(j, model.digest, model.spec->digest());
    std::printf("loaded %s: model=%s dimension=%zu estimator=%s trace=%.12g digest=%016llx\n",
                path.c_str(), c.meta.model_id.c_str(), c.dim(), c.meta.estimator.c_str(),
                c.entries.trace(), static_cast<unsigned long long>(c.entries_digest()));
    return 0;
}

// ---------------------------------------------------------------------------
// validate

struct SuiteReport {
    std::string name;
    int passed = 0;
    int total = 0;

    void check(bool ok, const std::string& detail) {
        ++total;
        passed += ok ? 1 : 0;
        std::printf("%s %s %s\n", ok ? "ok" : "FAIL", name.c_str(), detail.c_str());
    }
    int finish() const {
        std::printf("suite %s: %d/%d passed\n", name.c_str(), passed, total);
        return passed == total ? 0 : 1;
    }
};

SymMatrix random_psd(std::size_t d, std::uint64_t seed) {
    CounterRng rng(seed);
    Matrix g(d, d);
    std::uint64_t slot = 0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            g(i, j) = 2.0 * rng.uniform01(slot++) - 1.0;
        }
    }
    SymMatrix c(d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += g(i, k) * g(j, k);
            c.at(i, j) = acc / static_cast<double>(d);
        }
    }
    return c;
}

std::string fmt_sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

int suite_shapley_oracle() {
    SuiteReport rep{"shapley_oracle"};
    std::uint64_t seed = 20260821;
    for (int t = 0; t < 200; ++t) {
        const std::size_t d = 2 + static_cast<std::size_t>(t % 9);
        SymMatrix c = random_psd(d, seed++);
        measures::ShapleyVector closed = measures::dershap(c);
        oracles::ExactShapley exact = oracles::shapley_exact(c.abs());
        double max_diff = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            max_diff = std::max(max_diff, std::fabs(closed.values[i] - exact.values[i]));
        }
        rep.check(max_diff <= 1e-10, "case=" + std::to_string(t) + " d=" + std::to_string(d) +
                                         " max_abs_diff=" + fmt_sci(max_diff));
    }
    return rep.finish();
}

int suite_truncation() {
    SuiteReport rep{"truncation"};
    std::uint64_t seed = 977001;
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 8;
        SymMatrix c = random_psd(d, seed++);
        measures::ShapleyVector full = measures::dershap(c);
        for (std::size_t k = 1; k <= d; ++k) {
            measures::TruncatedShapley tr = measures::dershap_truncated(c, k);
            double l2 = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                double diff = full.values[i] - tr.values[i];
                l2 += diff * diff;
            }
            l2 = std::sqrt(l2);
            rep.check(l2 <= tr.bound + 1e-12,
                      "case=" + std::to_string(t) + " k=" + std::to_string(k) +
                          " l2=" + fmt_sci(l2) + " bound=" + fmt_sci(tr.bound));
        }
    }
    return rep.finish();
}

int suite_gradients() {
    SuiteReport rep{"gradients"};
    for (const models::BuiltinModel& b : models::builtin_catalog()) {
        if (!b.expression) continue;
        gradients::AdExpressionProvider ad(*b.expression);
        auto value = std::make_shared<gradients::ExprValueModel>(*b.expression);
        gradients::FiniteDifferenceProvider fd(value, 1e-5, /*central=*/true);
        inputs::Sampler sampler(b.default_spec, 7);
        std::vector<double> scratch(sampler.scratch_size());
        std::vector<double> x(b.dimension), ga(b.dimension), gf(b.dimension);
        double max_rel = 0.0;
        for (std::uint64_t p = 0; p < 100; ++p) {
            sampler.row(p, x, scratch);
            ad.gradient_at(x, ga);
            fd.gradient_at(x, gf);
            double scale = 1.0;
            for (double v : ga) scale = std::max(scale, std::fabs(v));
            for (std::size_t i = 0; i < b.dimension; ++i) {
                max_rel = std::max(max_rel, std::fabs(ga[i] - gf[i]) / scale);
            }
        }
        rep.check(max_rel <= 1e-4, b.id + " points=100 max_rel=" + fmt_sci(max_rel));
    }
    return rep.finish();
}

int suite_bounds() {
    SuiteReport rep{"bounds"};

    // Componentwise-linear identity and the uniform bounds, on models with
    // closed-form ANOVA so the Monte Carlo side is the only noise source.
    for (const char* id : {"linear", "bilinear", "additive_sine"}) {
        const models::BuiltinModel& b = *models::find_builtin(id);
        gradients::AdExpressionProvider ad(*b.expression);
        spectral::CMatrix c = spectral::estimate_c_quadrature(ad, b.default_spec, 12);
        std::vector<double> v = measures::dgsm(c.entries);
        auto value = b.make_value_model();
        oracles::SobolEstimate sob = oracles::sobol_estimate(*value, b.default_spec, 20000, 11);

        if (b.componentwise_linear) {
            auto checks = measures::check_linear_identity(sob.total, sob.se_total, v, sob.sigma2,
                                                          sob.se_sigma2);
            for (const auto& ch : checks) {
                rep.check(ch.pass, std::string(id) + " identity i=" + std::to_string(ch.index) +
                                       " lhs=" + fmt_sci(ch.lhs) + " rhs=" + fmt_sci(ch.rhs));
            }
        }
        auto poincare = measures::check_poincare_bound(sob.total, sob.se_total, v, sob.sigma2,
                                                       sob.se_sigma2, b.default_spec);
        for (const auto& ch : poincare) {
            rep.check(ch.pass, std::string(id) + " poincare i=" + std::to_string(ch.index) +
                                   " lhs=" + fmt_sci(ch.lhs) + " rhs=" + fmt_sci(ch.rhs));
        }
        spectral::EigenDecomp eig = spectral::eigendecompose(c.entries);
        for (std::size_t m = 1; m <= b.dimension; ++m) {
            auto spectral_checks = measures::check_spectral_bound(
                sob.total, sob.se_total, eig, m, sob.sigma2, sob.se_sigma2, b.default_spec);
            for (const auto& ch : spectral_checks) {
                rep.check(ch.pass, std::string(id) + " spectral m=" + std::to_string(m) +
                                       " i=" + std::to_string(ch.index) + " lhs=" +
                                       fmt_sci(ch.lhs) + " rhs=" + fmt_sci(ch.rhs));
            }
        }
    }

    // Normal marginals exercise the Gaussian distribution constant.
    {
        const models::BuiltinModel& b = *models::find_builtin("linear");
        inputs::InputSpec normal_spec = inputs::InputSpec::standard_normal(2);
        gradients::AdExpressionProvider ad(*b.expression);
        spectral::CMatrix c = spectral::estimate_c_mc(ad, normal_spec, 20000, 13);
        auto value = b.make_value_model();
        oracles::SobolEstimate sob = oracles::sobol_estimate(*value, normal_spec, 20000, 17);
        spectral::EigenDecomp eig = spectral::eigendecompose(c.entries);
        auto checks = measures::check_spectral_bound(sob.total, sob.se_total, eig, 2, sob.sigma2,
                                                     sob.se_sigma2, normal_spec);
        for (const auto& ch : checks) {
            rep.check(ch.pass, "linear_normal spectral m=2 i=" + std::to_string(ch.index) +
                                   " lhs=" + fmt_sci(ch.lhs) + " rhs=" + fmt_sci(ch.rhs));
        }
    }
    return rep.finish();
}

int cmd_validate(const std::string& suite) {
    if (suite == "shapley_oracle") return suite_shapley_oracle();
    if (suite == "bounds") return suite_bounds();
    if (suite == "truncation") return suite_truncation();
    if (suite == "gradients") return suite_gradients();
    throw ConfigError("unknown suite '" + suite +
                      "' (known: shapley_oracle, bounds, truncation, gradients)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Derivative-based sensitivity analysis: DGSM, activity scores, and "
                 "derivative Shapley values"};
    app.require_subcommand(1);

    RunFlags analyze_flags;
    CLI::App* analyze = app.add_subcommand("analyze", "estimate C and compute sensitivity methods");
    add_run_options(analyze, analyze_flags);
    analyze->add_option("--c-cache", analyze_flags.c_cache,
                        "reuse a cached C matrix instead of estimating");

    std::string suite;
    CLI::App* validate = app.add_subcommand("validate", "run a numerical invariant suite");
    validate->add_option("suite", suite, "shapley_oracle | bounds | truncation | gradients")
        ->required();

    RunFlags cache_flags;
    std::string cache_op, cache_path;
    CLI::App* cache = app.add_subcommand("cache", "save or load a C-matrix artifact");
    cache->add_option("op", cache_op, "save | load")
        ->required()
        ->check(CLI::IsMember({"save", "load"}));
    cache->add_option("path", cache_path, "artifact path")->required();
    add_run_options(cache, cache_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(analyze_flags);
        if (validate->parsed()) return cmd_validate(suite);
        return cmd_cache(cache_op, cache_path, cache_flags);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const BudgetError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const EvalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
