// Command-line front end. Exit codes: 0 success, 1 usage/IO/parse error,
// 2 domain-level failure (hypothesis violated, object not found).

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pwsc/bifurcation.hpp"
#include "pwsc/error.hpp"
#include "pwsc/fixtures.hpp"
#include "pwsc/io.hpp"
#include "pwsc/orbits.hpp"

namespace {

using pwsc::RunManifest;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDomain = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Context {
    RunManifest manifest;
    std::string manifest_path;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

void emit(Context& ctx, const std::string& path, const std::string& text) {
    pwsc::write_file(path, text);
    ctx.manifest.outputs.push_back(path);
}

void finish(Context& ctx) {
    ctx.manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.start).count();
    const std::string text = ctx.manifest.to_json().dump(2) + "\n";
    std::string path = ctx.manifest_path;
    if (path.empty() && !ctx.manifest.outputs.empty()) path = ctx.manifest.outputs.front() + ".manifest.json";
    if (path.empty()) {
        std::cerr << text;
    } else {
        pwsc::write_file(path, text);
    }
}

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw UsageError(std::string(name) + " must be finite");
}

pwsc::SystemDefinition load(Context& ctx, const std::string& path) {
    ctx.manifest.input = path;
    return pwsc::load_system(path);
}

void print_json(const json& j, const std::string& out, Context& ctx) {
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!out.empty()) emit(ctx, out, text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and bifurcation analysis of piecewise-smooth Lienard fast/slow systems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pwsc::kVersion);
    Context ctx;
    app.add_option("--manifest", ctx.manifest_path, "Write the run manifest here (default: next to the first output)");

    std::string input;
    std::string json_out;

    auto* validate = app.add_subcommand("validate", "Check the standing hypotheses of a system file");
    double x_lo = -10.0, x_hi = 10.0;
    validate->add_option("system", input, "System INI file")->required();
    validate->add_option("--x-min", x_lo, "Lower end of the sampling window");
    validate->add_option("--x-max", x_hi, "Upper end of the sampling window");
    validate->add_option("--json", json_out, "Also write the report here");

    auto* classify = app.add_subcommand("classify", "Classify the corner (or fold) bifurcation");
    bool fold = false;
    classify->add_option("system", input, "System INI file")->required();
    classify->add_flag("--fold", fold, "Classify the Hopf bifurcation near the fold instead of the corner");
    classify->add_option("--json", json_out, "Also write the report here");

    auto* simulate = app.add_subcommand("simulate", "Integrate one trajectory");
    std::optional<double> lambda;
    double x0 = 0.0, y0 = 0.0, t_max = 100.0, rtol = 1e-9, atol = 1e-12;
    bool backward = false;
    std::string out, events_out;
    simulate->add_option("system", input, "System INI file")->required();
    simulate->add_option("--lambda", lambda, "Bifurcation parameter (default: value in the file)");
    simulate->add_option("--x0", x0, "Initial x");
    simulate->add_option("--y0", y0, "Initial y");
    simulate->add_option("--t-max", t_max, "Integration length in fast time");
    simulate->add_option("--rtol", rtol, "Relative tolerance");
    simulate->add_option("--atol", atol, "Absolute tolerance");
    simulate->add_flag("--backward", backward, "Integrate in reverse time");
    simulate->add_option("--out", out, "Trajectory CSV")->required();
    simulate->add_option("--events", events_out, "Event CSV");

    auto* sweep = app.add_subcommand("sweep", "Attracting-cycle amplitude over a lambda range");
    double l_min = 0.0, l_max = 0.0;
    int steps = 50;
    bool refine = false;
    unsigned threads = 0;
    sweep->add_option("system", input, "System INI file")->required();
    sweep->add_option("--lambda-min", l_min, "Start of the range")->required();
    sweep->add_option("--lambda-max", l_max, "End of the range")->required();
    sweep->add_option("--steps", steps, "Number of grid intervals");
    sweep->add_flag("--refine", refine, "Resolve the 10%-90% explosion window");
    sweep->add_option("--threads", threads, "Worker threads (default: PWSC_THREADS or all cores)");
    sweep->add_option("--out", out, "Sweep CSV")->required();
    sweep->add_option("--summary", json_out, "Summary JSON (default: printed only)");

    auto* shadow = app.add_subcommand("shadow-check", "Compare a left-half-plane excursion with the shadow system");
    double yc = 0.0;
    std::string left_piece;
    shadow->add_option("system", input, "System INI file")->required();
    shadow->add_option("--yc", yc, "Entry height on the splitting line")->required();
    shadow->add_option("--lambda", lambda, "Bifurcation parameter (default: value in the file)");
    shadow->add_option("--left-piece", left_piece, "Replacement left piece for a modified shadow");
    shadow->add_option("--out", out, "Shadow CSV")->required();

    auto* bistab = app.add_subcommand("bistability", "Look for coexisting equilibrium and cycles at a frozen lambda");
    bistab->add_option("system", input, "System INI file")->required();
    bistab->add_option("--lambda", lambda, "Bifurcation parameter (default: value in the file)");
    bistab->add_option("--json", json_out, "Also write the report here");

    auto* fixtures = app.add_subcommand("fixtures", "List the bundled systems");
    std::string write_dir;
    fixtures->add_option("--write", write_dir, "Write <name>.ini files into this directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    ctx.manifest.command = app.get_subcommands().front()->get_name();
    try {
        if (validate->parsed()) {
            const auto sys = load(ctx, input);
            ctx.manifest.parameters = {{"x_min", x_lo}, {"x_max", x_hi}};
            if (!(x_lo < 0.0 && 0.0 < x_hi)) throw UsageError("window must satisfy x_min < 0 < x_max");
            const auto report = pwsc::validate(sys, {x_lo, x_hi});
            print_json(report.to_json(), json_out, ctx);
            if (const auto* f = report.first_failure()) {
                std::cerr << "hypothesis failed: " << f->name << (f->detail.empty() ? "" : ": " + f->detail) << "\n";
                finish(ctx);
                return kDomain;
            }
        } else if (classify->parsed()) {
            const auto sys = load(ctx, input);
            ctx.manifest.parameters = {{"fold", fold}};
            const auto report = fold ? pwsc::classify_fold(sys) : pwsc::classify_corner(sys);
            print_json(report.to_json(), json_out, ctx);
        } else if (simulate->parsed()) {
            auto sys = load(ctx, input);
            if (lambda) sys = sys.with_lambda(*lambda);
            require_finite(x0, "--x0");
            require_finite(y0, "--y0");
            require_finite(sys.lambda, "--lambda");
            if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw UsageError("--t-max must be finite and >= 0");
            ctx.manifest.parameters = {{"lambda", sys.lambda}, {"x0", x0},     {"y0", y0},        {"t_max", t_max},
                                       {"rtol", rtol},        {"atol", atol}, {"backward", backward}};
            pwsc::IntegratorConfig cfg;
            cfg.rtol = rtol;
            cfg.atol = atol;
            const auto mode = backward ? pwsc::TimeDirection::Backward : pwsc::TimeDirection::Forward;
            const auto traj = pwsc::integrate(sys, {x0, y0}, 0.0, backward ? -t_max : t_max, cfg, {}, mode);
            std::ostringstream csv;
            pwsc::write_trajectory_csv(csv, traj);
            emit(ctx, out, csv.str());
            if (!events_out.empty()) {
                std::ostringstream ev;
                pwsc::write_events_csv(ev, traj);
                emit(ctx, events_out, ev.str());
            }
            if (!traj.ok()) {
                std::cerr << "integration stopped: " << pwsc::termination_name(traj.termination) << ": "
                          << traj.message << "\n";
                finish(ctx);
                return kDomain;
            }
        } else if (sweep->parsed()) {
            const auto sys = load(ctx, input);
            require_finite(l_min, "--lambda-min");
            require_finite(l_max, "--lambda-max");
            if (!(l_min < l_max)) throw UsageError("empty lambda range: --lambda-min must be below --lambda-max");
            if (steps < 1) throw UsageError("--steps must be positive");
            ctx.manifest.parameters = {
                {"lambda_min", l_min}, {"lambda_max", l_max}, {"steps", steps}, {"refine", refine}};
            pwsc::SweepOptions opt;
            opt.threads = threads;
            const auto result = pwsc::sweep_amplitude(sys, l_min, l_max, steps, refine, opt);
            std::ostringstream csv;
            pwsc::write_sweep_csv(csv, result);
            emit(ctx, out, csv.str());
            print_json(result.summary(), json_out, ctx);
        } else if (shadow->parsed()) {
            const auto sys = load(ctx, input);
            const double lam = lambda.value_or(sys.lambda);
            require_finite(yc, "--yc");
            require_finite(lam, "--lambda");
            if (!(yc > 0.0)) throw UsageError("--yc must be positive (the field must point left at (0, yc))");
            ctx.manifest.parameters = {{"yc", yc}, {"lambda", lam}, {"left_piece", left_piece}};
            const auto sh = left_piece.empty() ? pwsc::make_shadow(sys)
                                               : pwsc::make_shadow(sys, pwsc::Expression::parse(left_piece));
            const auto cmp = pwsc::shadow_compare(sys, sh, yc, lam);
            std::ostringstream csv;
            pwsc::write_shadow_csv(csv, cmp);
            emit(ctx, out, csv.str());
            print_json(cmp.summary(), "", ctx);
        } else if (bistab->parsed()) {
            const auto sys = load(ctx, input);
            const double lam = lambda.value_or(sys.lambda);
            require_finite(lam, "--lambda");
            ctx.manifest.parameters = {{"lambda", lam}};
            print_json(pwsc::detect_bistability(sys, lam).to_json(), json_out, ctx);
        } else if (fixtures->parsed()) {
            json list = json::array();
            for (const auto& f : pwsc::fixtures()) {
                list.push_back({{"name", f.name}, {"description", f.description}});
                if (!write_dir.empty())
                    emit(ctx, (std::filesystem::path(write_dir) / (f.name + ".ini")).string(), f.ini);
            }
            std::cout << list.dump(2) << "\n";
        }
        finish(ctx);
        return kOk;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const pwsc::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kUsage;
    } catch (const pwsc::HypothesisError& e) {
        std::cerr << "hypothesis violated: " << e.what() << "\n";
        return kDomain;
    } catch (const pwsc::NotFoundError& e) {
        std::cerr << "not found: " << e.what() << "\n";
        return kDomain;
    } catch (const pwsc::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kDomain;
    } catch (const pwsc::IntegrationError& e) {
        std::cerr << "integration error: " << e.what() << "\n";
        return kDomain;
    } catch (const pwsc::Error& e) {
        // Remaining library errors are I/O failures.
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
}
