#include "tdslab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <stdexcept>

namespace tdslab::cli {

namespace {

std::string short_real(real v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15Lg", v);
    return buf;
}

std::string tag(real v) {
    std::string s = format_real(v);
    for (char& ch : s)
        if (ch == '.' || ch == '+' || ch == '-') ch = '_';
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

void write_dat(const std::filesystem::path& path, const std::vector<std::pair<real, real>>& rows) {
    std::string s;
    for (const auto& [t, v] : rows) s += format_real(t) + ' ' + format_real(v) + '\n';
    write_text(path, s);
}

void write_history_dat(const std::filesystem::path& path, const HistoryFn& h) {
    std::vector<std::pair<real, real>> rows;
    for (const Knot1& k : h.knots()) rows.emplace_back(k.t, k.v);
    write_dat(path, rows);
}

void write_channel_dats(const std::filesystem::path& dir, const SolutionBundle& sol, const std::vector<real>& grid) {
    static const char* names[] = {"x1", "x2", "z1", "z2"};
    std::vector<std::pair<real, real>> ch[5];
    for (real t : grid) {
        const Vec4 s = sol.state(t);
        for (int i = 0; i < 4; ++i) ch[i].emplace_back(t, s[i]);
        ch[4].emplace_back(t, sol.norm(t));
    }
    for (int i = 0; i < 4; ++i) write_dat(dir / (std::string(names[i]) + ".dat"), ch[i]);
    write_dat(dir / "norm.dat", ch[4]);
}

int exit_for(Outcome o) {
    switch (o) {
        case Outcome::pass: return exit_pass;
        case Outcome::fail: return exit_fail;
        case Outcome::inconclusive: return exit_inconclusive;
    }
    return exit_fail;
}

int combine(const std::vector<VerificationReport>& reps) {
    bool fail = false, open = false;
    for (const VerificationReport& r : reps) {
        fail = fail || r.outcome == Outcome::fail;
        open = open || r.outcome == Outcome::inconclusive;
    }
    return fail ? exit_fail : open ? exit_inconclusive : exit_pass;
}

std::vector<real> parse_list(const std::vector<std::string>& v, std::vector<real> fallback) {
    if (v.empty()) return fallback;
    std::vector<real> out;
    for (const std::string& s : v) out.push_back(parse_real(s));
    return out;
}

void print_report(std::ostream& out, const std::string& name, const VerificationReport& r,
                  const std::filesystem::path& path) {
    out << name << ": " << outcome_name(r.outcome) << " (" << path.string() << ")\n";
}

}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig c;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) c.out_dir = env;
    return c;
}

void RunConfig::apply(const KeyValueDoc& doc) {
    for (const auto& [key, value] : doc.entries()) {
        if (key == "rel_tol")
            rel_tol = parse_real(value);
        else if (key == "abs_tol")
            abs_tol = parse_real(value);
        else if (key == "dwell_min")
            dwell_min = parse_real(value);
        else if (key == "cap")
            cap = parse_real(value);
        else if (key == "delta0")
            delta0 = parse_real(value);
        else if (key == "seed")
            seed = std::stoull(value);
        else if (key == "out_dir")
            out_dir = value;
        else
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

void RunConfig::validate() const {
    if (!(rel_tol > 0) || !(abs_tol > 0)) throw std::invalid_argument("config: tolerances must be positive");
    if (!(dwell_min > 0)) throw std::invalid_argument("config: dwell_min must be positive");
    if (!(cap >= 1e6L)) throw std::invalid_argument("config: cap must be at least 1e6");
    if (!(delta0 > 0)) throw std::invalid_argument("config: delta0 must be positive");
    if (out_dir.empty()) throw std::invalid_argument("config: out_dir must not be empty");
}

StepControl RunConfig::ctrl() const {
    StepControl c;
    c.rel_tol = rel_tol;
    c.abs_tol = abs_tol;
    return c;
}

EscapeOptions RunConfig::escape() const {
    EscapeOptions e;
    e.dwell_min = dwell_min;
    e.cap = cap;
    e.ctrl = ctrl();
    return e;
}

Lemma1Options RunConfig::lemma1() const {
    Lemma1Options l;
    l.escape = escape();
    l.ctrl = ctrl();
    l.delta0 = delta0;
    return l;
}

CheckOptions RunConfig::check() const {
    CheckOptions o;
    o.seed = seed;
    o.lemma1 = lemma1();
    o.witness_dir = out_dir;
    return o;
}

std::vector<real> output_grid(const SolutionBundle& sol, real spacing) {
    if (!(spacing > 0)) throw std::invalid_argument("output_grid: spacing must be positive");
    const real T = sol.horizon();
    std::vector<real> g;
    const auto n = static_cast<long>(std::ceil(T / spacing - 1e-9L));
    for (long i = 0; i < n; ++i) g.push_back(i * spacing);
    g.push_back(T);
    for (real b : sol.breakpoints())
        if (b > 0 && b < T) g.push_back(b);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

std::string trajectory_csv(const SolutionBundle& sol, const std::vector<real>& grid) {
    std::string s = "t,x1,x2,z1,z2,norm\n";
    for (real t : grid) {
        const Vec4 x = sol.state(t);
        s += format_real(t);
        for (real v : x) s += ',' + format_real(v);
        s += ',' + format_real(sol.norm(t)) + '\n';
    }
    return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Desk-scale laboratory for a delay system that is GAS but not UGA", "tdslab"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, rel_tol, abs_tol, dwell_min, cap, delta0, seed, out_dir;
    bool plot = false;
    app.add_option("--config", config_path, "key = value file with run settings");
    app.add_option("--rel-tol", rel_tol, "relative tolerance");
    app.add_option("--abs-tol", abs_tol, "absolute tolerance");
    app.add_option("--dwell-min", dwell_min, "decision interval of the escape search");
    app.add_option("--cap", cap, "norm cap of the escape search");
    app.add_option("--delta0", delta0, "initial mollification ramp length");
    app.add_option("--seed", seed, "seed for random samples");
    app.add_option("--out-dir", out_dir, std::string("output directory (default $") + kOutDirEnv + " or tdslab_out)");
    app.add_flag("--plot", plot, "also write two-column .dat files");

    std::string c_str, M_str, T_str, init_dir, horizon_str, csv_path, spacing_str, suite = "all", n_str;
    bool dde = false;
    std::vector<std::string> M_list, T_list;

    CLI::App* constants_cmd = app.add_subcommand("constants", "print the stability constants");
    constants_cmd->add_option("--c", c_str, "speed constant")->required();

    CLI::App* escape_cmd = app.add_subcommand("escape", "search a destabilizing switching signal");

    CLI::App* lemma1_cmd = app.add_subcommand("lemma1", "build an initial state with |x(1)| >= 2M");
    lemma1_cmd->add_option("--M", M_str, "transient size")->required();
    lemma1_cmd->add_option("--horizon", horizon_str, "horizon of the exported trajectory (default 1)");

    CLI::App* uga_cmd = app.add_subcommand("uga", "build an initial state with |X(T)| >= 1");
    uga_cmd->add_option("--T", T_str, "time at which the norm is still at least 1")->required();

    CLI::App* sim_cmd = app.add_subcommand("simulate", "simulate a serialized initial state");
    sim_cmd->add_option("--init", init_dir, "directory with x1.hist, x2.hist, z1.hist, z2.hist")->required();
    sim_cmd->add_option("--c", c_str, "speed constant")->required();
    sim_cmd->add_option("--horizon", horizon_str, "final time")->required();
    sim_cmd->add_option("--csv", csv_path, "CSV path (default <out-dir>/trajectory.csv)");
    sim_cmd->add_option("--spacing", spacing_str, "output spacing (default horizon / 1000)");
    sim_cmd->add_flag("--dde", dde, "integrate all four channels with delayed lookups");

    CLI::App* verify_cmd = app.add_subcommand("verify", "run verification suites and write reports");
    verify_cmd->add_option("--suite", suite, "les, gas, brs, uga, cross, flow or all")
        ->check(CLI::IsMember({"les", "gas", "brs", "uga", "cross", "flow", "all"}));
    verify_cmd->add_option("--M", M_list, "transient sizes for brs (default 10 1000 1000000)");
    verify_cmd->add_option("--T", T_list, "times for uga (default 3 5)");
    verify_cmd->add_option("--n", n_str, "sample count for les and cross (default 100 and 20)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_pass;
    } catch (const CLI::ParseError& e) {
        err << "tdslab: " << e.what() << '\n';
        return exit_usage;
    }

    RunConfig cfg;
    try {
        cfg = RunConfig::defaults();
        if (!config_path.empty()) cfg.apply(KeyValueDoc::read_file(config_path));
        if (!rel_tol.empty()) cfg.rel_tol = parse_real(rel_tol);
        if (!abs_tol.empty()) cfg.abs_tol = parse_real(abs_tol);
        if (!dwell_min.empty()) cfg.dwell_min = parse_real(dwell_min);
        if (!cap.empty()) cfg.cap = parse_real(cap);
        if (!delta0.empty()) cfg.delta0 = parse_real(delta0);
        if (!seed.empty()) cfg.seed = std::stoull(seed);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        cfg.validate();
    } catch (const std::exception& e) {
        err << "tdslab: " << e.what() << '\n';
        return exit_usage;
    }
    const std::filesystem::path& dir = cfg.out_dir;
    const StepControl ctrl = cfg.ctrl();

    const auto constants_main = [&]() -> int {
        const StabilityConstants k = constants(parse_real(c_str));
        out << "c = " << format_real(k.c) << '\n';
        out << "P0 = " << short_real(k.P0.p11) << ' ' << short_real(k.P0.p12) << " / " << short_real(k.P0.p12) << ' '
            << short_real(k.P0.p22) << '\n';
        out << "P1 = " << short_real(k.P1.p11) << ' ' << short_real(k.P1.p12) << " / " << short_real(k.P1.p12) << ' '
            << short_real(k.P1.p22) << '\n';
        out << "lambda_bar = " << format_real(k.lambda_bar) << '\n';
        out << "lambda0 = " << format_real(k.lambda0) << '\n';
        out << "alpha_lo = " << format_real(k.alpha_lo) << '\n';
        out << "alpha_hi = " << format_real(k.alpha_hi) << '\n';
        out << "k = " << format_real(k.k) << '\n';
        out << "mu = " << format_real(k.mu) << '\n';
        return exit_pass;
    };

    const auto escape_main = [&]() -> int {
        const EscapeCertificate cert = escape_search(cfg.escape());
        const real c = calibrate_c(cert, ctrl);
        const auto path = dir / "escape.cert";
        std::filesystem::create_directories(dir);
        cert.write_file(path);
        out << "method = " << cert.method << '\n';
        out << "T_esc = " << format_real(cert.T_esc) << '\n';
        out << "c = " << format_real(c) << '\n';
        out << "switches = " << cert.u.switches().size() << '\n';
        out << "escape_signature = " << (cert.escape_signature() ? "true" : "false") << '\n';
        out << "certificate = " << path.string() << '\n';
        return cert.escape_signature() ? exit_pass : exit_fail;
    };

    const auto lemma1_main = [&]() -> int {
        const real M = parse_real(M_str);
        const real horizon = horizon_str.empty() ? 1 : parse_real(horizon_str);
        const Lemma1Artifacts art = lemma1_construct(M, cfg.lemma1());
        const auto base = dir / ("lemma1_M" + tag(M));
        art.write_dir(base);
        const InitialState x0 = art.initial_state(HistoryFn::constant(1));
        x0.write_dir(base / "initial");
        const SolutionBundle sol = simulate(x0, Params{art.c}, horizon, ctrl);
        const std::vector<real> grid = output_grid(sol, horizon / 1000);
        write_text(base / "trajectory.csv", trajectory_csv(sol, grid));
        if (plot) {
            write_history_dat(base / "plot" / "z10.dat", art.z10);
            write_history_dat(base / "plot" / "u_K.dat", art.u_K);
            write_channel_dats(base / "plot", sol, grid);
        }
        out << "c = " << format_real(art.c) << '\n';
        out << "tau_bar = " << format_real(art.tau_bar) << '\n';
        out << "tau_M = " << format_real(art.tau_M) << '\n';
        out << "achieved = " << format_real(art.achieved) << '\n';
        out << "initial_norm = " << format_real(x0.norm()) << '\n';
        out << "artifacts = " << base.string() << '\n';
        return art.achieved >= 2 * M && x0.norm() <= 2 ? exit_pass : exit_fail;
    };

    const auto uga_main = [&]() -> int {
        const real T = parse_real(T_str);
        const VerificationReport r = check_uga_violation(T, ctrl, cfg.check());
        const auto path = dir / ("uga_T" + tag(T) + ".report");
        r.write_file(path);
        out << r.to_text();
        print_report(out, "uga", r, path);
        return exit_for(r.outcome);
    };

    const auto simulate_main = [&]() -> int {
        const InitialState x0 = InitialState::read_dir(init_dir);
        const real c = parse_real(c_str), horizon = parse_real(horizon_str);
        const real spacing = spacing_str.empty() ? horizon / 1000 : parse_real(spacing_str);
        const Params p{c};
        p.validate();
        const SolutionBundle sol = dde ? simulate_dde(x0, p, horizon, ctrl) : simulate(x0, p, horizon, ctrl);
        const std::vector<real> grid = output_grid(sol, spacing);
        const std::filesystem::path path = csv_path.empty() ? dir / "trajectory.csv" : std::filesystem::path(csv_path);
        write_text(path, trajectory_csv(sol, grid));
        if (plot) write_channel_dats(path.parent_path() / "plot", sol, grid);
        out << "rows = " << grid.size() << '\n';
        out << "csv = " << path.string() << '\n';
        return exit_pass;
    };

    const auto verify_main = [&]() -> int {
        const bool all = suite == "all";
        const CheckOptions opts = cfg.check();
        std::optional<EscapeCertificate> cert;
        const auto need_cert = [&]() -> const EscapeCertificate& {
            if (!cert) cert = escape_search(cfg.escape());
            return *cert;
        };
        std::vector<VerificationReport> reps;
        const auto emit = [&](const std::string& name, VerificationReport r) {
            const auto path = dir / (name + ".report");
            r.write_file(path);
            print_report(out, name, r, path);
            reps.push_back(std::move(r));
        };
        std::filesystem::create_directories(dir);
        if (all || suite == "cross") {
            const int n = n_str.empty() ? 20 : std::stoi(n_str);
            emit("cross", check_cross(calibrate_c(need_cert(), ctrl), n, 5, ctrl, opts));
        }
        if (all || suite == "flow") emit("flow", check_flow_properties(10, ctrl, opts));
        if (all || suite == "les") {
            const int n = n_str.empty() ? 100 : std::stoi(n_str);
            emit("les", check_les(calibrate_c(need_cert(), ctrl), n, ctrl, opts));
        }
        if (all || suite == "brs") {
            CheckOptions o = opts;
            o.cert = &need_cert();
            for (real M : parse_list(M_list, {10, 1e3L, 1e6L}))
                emit("brs_M" + tag(M), check_brs_violation(M, ctrl, o));
        }
        if (all || suite == "uga") {
            CheckOptions o = opts;
            o.cert = &need_cert();
            for (real T : parse_list(T_list, {3, 5})) emit("uga_T" + tag(T), check_uga_violation(T, ctrl, o));
        }
        if (all || suite == "gas") {
            UgaOptions uo;
            uo.lemma1 = cfg.lemma1();
            for (real T : parse_list(T_list, {3})) {
                const UgaWitness w = uga_adversary(T, need_cert(), uo);
                VerificationReport r = check_gas(w.x0, w.c, 1e-3L, ctrl, opts);
                const std::string name = "gas_T" + tag(T);
                w.x0.write_dir(dir / name / "initial");
                r.params.set("T", T);
                r.witnesses.push_back(name + "/initial");
                emit(name, std::move(r));
            }
        }
        return combine(reps);
    };

    try {
        if (*constants_cmd) return constants_main();
        if (*escape_cmd) return escape_main();
        if (*lemma1_cmd) return lemma1_main();
        if (*uga_cmd) return uga_main();
        if (*sim_cmd) return simulate_main();
        if (*verify_cmd) return verify_main();
    } catch (const ConstructionError& e) {
        err << "tdslab: " << e.what() << '\n';
        return exit_fail;
    } catch (const IntegrationError& e) {
        err << "tdslab: " << e.what() << '\n';
        return exit_fail;
    } catch (const std::exception& e) {
        err << "tdslab: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}

}  // namespace tdslab::cli
