#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "frac/harness.hpp"

using namespace frac;

namespace {

struct Output {
    std::string out;
    std::string format = "json";

    void emit(const std::string& text) const {
        if (out.empty()) {
            std::cout << text;
            return;
        }
        std::ofstream f(out);
        if (!f) throw ParseError("cannot write " + out);
        f << text;
    }
};

void add_output(CLI::App* cmd, Output& o) {
    cmd->add_option("--out", o.out, "write to file instead of stdout");
    cmd->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

// Flat record for the single-quantity subcommands.
std::string render(const ojson& j, const std::string& format) {
    if (format == "json") return j.dump(2) + "\n";
    std::ostringstream o;
    o << "key,value\n" << std::setprecision(17);
    for (const auto& [k, v] : j.items()) o << k << ',' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
    return o.str();
}

ojson result_json(const std::string& command, const MinimizeResult& r) {
    ojson j;
    j["command"] = command;
    j["value"] = detail::num(r.value);
    j["iterations"] = r.iterations;
    j["residual"] = detail::num(r.residual);
    j["converged"] = r.converged;
    j["method"] = r.method;
    return j;
}

// Slot named in a "missing context slot" error, mapped to the reference that fills it.
unsigned need_for(const std::string& msg) {
    static const std::vector<std::pair<std::string, unsigned>> slots{
        {"ref_lambda_ball_p", Refs::LamBallP}, {"ref_lambda_ball", Refs::LamBall}, {"ref_cap_ball", Refs::CapBall},
        {"ref_local_lambda", Refs::Local},     {"ref_local_cap", Refs::Local},     {"ref_lambda_b2", Refs::LamB2},
        {"s_lambda_limit", Refs::SLim},        {"lambda_conformal", Refs::Conf},   {"sobolev_S", Refs::Sob}};
    const std::string tag = "missing context slot: ";
    auto at = msg.find(tag);
    if (at == std::string::npos) return 0;
    std::string slot = msg.substr(at + tag.size());
    for (const auto& [name, flag] : slots)
        if (slot == name) return flag;
    return 0;
}

ConstArgs parse_args(const std::string& text) {
    ConstArgs a;
    if (text.empty()) return a;
    for (const auto& kv : detail::split(text, ',')) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError("--args expects k=v pairs, got '" + kv + "'");
        a[detail::trim(kv.substr(0, eq))] = detail::parse_number(kv.substr(eq + 1), kv.substr(0, eq));
    }
    return a;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> g;
    for (const auto& t : detail::split(text, ',')) g.push_back(detail::parse_number(t, "--grid"));
    return g;
}

// Lets spacings be written as fractions such as 1/64.
const CLI::Validator fraction(
    [](std::string& v) {
        try {
            v = detail::csv_num(detail::parse_number(v, "spacing"));
        } catch (const ParseError& e) {
            return std::string(e.what());
        }
        return std::string();
    },
    "NUMBER|a/b");

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fractional principal frequencies, capacities and capacitary inradius on uniform lattices"};
    app.set_help_flag("--help", "print this help message and exit");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Output o;

    std::string shape, sigma, env, e_spec, omega_spec, name, args, suite = "all", config, param, grid, target;
    double s = 0.5, p = 2, q = 2, h = 1.0 / 64, gamma = 0.1, r = 0.5, R = 1.0, ratio = 2.0;
    int dim = 1, near_band = 2;
    std::optional<std::uint64_t> seed;
    bool timing = false;

    auto common = [&](CLI::App* c) {
        add_output(c, o);
        c->add_option("--near-band", near_band, "near-field quadrature band")->check(CLI::PositiveNumber);
    };

    auto* lam = app.add_subcommand("lambda", "principal frequency lambda^s_{p,q}");
    lam->add_option("--shape", shape)->required();
    lam->add_option("--s", s)->required();
    lam->add_option("--p", p)->required();
    lam->add_option("--q", q)->required();
    lam->add_option("--h", h)->required()->transform(fraction);
    common(lam);

    auto* cap = app.add_subcommand("cap", "relative capacity cap_{s,p}(sigma; env)");
    cap->add_option("--sigma", sigma)->required();
    cap->add_option("--env", env)->required();
    cap->add_option("--s", s)->required();
    cap->add_option("--p", p)->required();
    cap->add_option("--h", h)->required()->transform(fraction);
    common(cap);

    auto* per = app.add_subcommand("perimeter", "fractional perimeter P_s");
    per->add_option("--shape", shape)->required();
    per->add_option("--s", s)->required();
    per->add_option("--h", h)->required()->transform(fraction);
    common(per);

    auto* che = app.add_subcommand("cheeger", "Cheeger constant h_s(E; Omega)");
    che->add_option("--e", e_spec)->required();
    che->add_option("--omega", omega_spec)->required();
    che->add_option("--s", s)->required();
    che->add_option("--h", h)->required()->transform(fraction);
    common(che);

    auto* tor = app.add_subcommand("torsion", "torsion function of B_r in B_R");
    tor->add_option("--r", r)->required();
    tor->add_option("--R", R)->required();
    tor->add_option("--s", s)->required();
    tor->add_option("--p", p)->required();
    tor->add_option("--h", h)->required()->transform(fraction);
    tor->add_option("--dim", dim)->check(CLI::Range(1, 2));
    common(tor);

    auto* inr = app.add_subcommand("inradius", "capacitary inradius bracket (r_lower, r_upper)");
    inr->add_option("--shape", shape)->required();
    inr->add_option("--s", s)->required();
    inr->add_option("--p", p)->required();
    inr->add_option("--gamma", gamma)->required();
    inr->add_option("--h", h)->required()->transform(fraction);
    common(inr);

    auto* con = app.add_subcommand("const", "evaluate a named constant");
    con->add_option("--name", name)->required();
    con->add_option("--args", args, "k=v,... (ratio, gamma, eps, delta, measure, r, y, R)");
    con->add_option("--dim", dim)->check(CLI::Range(1, 2));
    con->add_option("--s", s);
    con->add_option("--p", p);
    con->add_option("--q", q);
    con->add_option("--h", h, "spacing for numerically computed reference quantities")->transform(fraction);
    common(con);

    auto* ver = app.add_subcommand("verify", "run verification suites");
    ver->add_option("--suite", suite)->required();
    ver->add_option("--config", config);
    ver->add_option("--seed", seed);
    ver->add_flag("--timing", timing, "record runtime_ms per check");
    add_output(ver, o);

    auto* swp = app.add_subcommand("sweep", "tabulate a quantity over a parameter grid");
    swp->add_option("--param", param)->required();
    swp->add_option("--grid", grid)->required();
    swp->add_option("--target", target)->required();
    swp->add_option("--config", config);
    swp->add_option("--shape", shape, "domain for lambda-type targets")->default_val("interval:0,1");
    swp->add_option("--dim", dim)->check(CLI::Range(1, 2));
    swp->add_option("--s", s);
    swp->add_option("--p", p);
    swp->add_option("--q", q);
    swp->add_option("--gamma", gamma);
    swp->add_option("--ratio", ratio);
    add_output(swp, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        SolverOptions opt;
        opt.near_band = near_band;
        if (lam->parsed()) {
            auto om = build_domain(parse_shape(shape), h);
            FracParams P(om.box.dim, s, p, q);
            auto res = frequency(om, P, opt);
            auto j = result_json("lambda", res);
            j["alpha"] = P.alpha();
            o.emit(render(j, o.format));
        } else if (cap->parsed()) {
            auto E = build_domain(parse_shape(env), h);
            Mask sg = rasterize(parse_shape(sigma), E.box);
            FracParams P(E.box.dim, s, p, p);
            o.emit(render(result_json("cap", capacity(sg, E, P, opt)), o.format));
        } else if (per->parsed()) {
            ojson j;
            j["command"] = "perimeter";
            j["value"] = detail::num(frac_perimeter(build_domain(parse_shape(shape), h), s, near_band));
            o.emit(render(j, o.format));
        } else if (che->parsed()) {
            auto om = build_domain(parse_shape(omega_spec), h);
            Mask E = rasterize(parse_shape(e_spec), om.box);
            auto res = cheeger(E, om, s, opt);
            auto j = result_json("cheeger", res);
            j["level_set_cells"] = count(res.level_set);
            o.emit(render(j, o.format));
        } else if (tor->parsed()) {
            FracParams P(dim, s, p, p);
            auto V = torsion(r, R, P, h, opt);
            auto t = torsion_identity(V, r, P, near_band);
            auto j = result_json("torsion", V);
            j["integral"] = detail::num(t.integral);
            j["energy"] = detail::num(t.energy);
            j["rel_gap"] = detail::num(t.rel_gap);
            j["min_value"] = detail::num(t.min_value);
            o.emit(render(j, o.format));
        } else if (inr->parsed()) {
            auto om = build_domain(parse_shape(shape), h);
            FracParams P(om.box.dim, s, p, p);
            InradiusConfig ic;
            ic.solver = opt;
            auto res = capacitary_inradius(om, P, gamma, ic);
            ojson j;
            j["command"] = "inradius";
            j["r_lower"] = detail::num(res.r_lower);
            j["r_upper"] = detail::num(res.r_upper);
            j["upper_is_heuristic"] = res.upper_is_heuristic;
            j["witness_center"] = ojson::array({res.witness.center[0], res.witness.center[1]});
            j["witness_radius"] = res.witness.radius;
            j["samples"] = res.samples;
            j["centers"] = res.centers;
            j["budget_exhausted"] = res.budget_exhausted;
            o.emit(render(j, o.format));
        } else if (con->parsed()) {
            FracParams P(dim, s, p, q, std::nullopt, true);
            Refs refs(near_band);
            ConstArgs a = parse_args(args);
            unsigned need = 0;
            double v = 0;
            // fill reference slots on demand
            for (;;) {
                try {
                    v = eval_constant(name, refs.context(P, h, need), a);
                    break;
                } catch (const DomainError& e) {
                    unsigned more = need_for(e.what());
                    if (!more || (need & more)) throw;
                    need |= more;
                }
            }
            ojson j;
            j["command"] = "const";
            j["name"] = name;
            j["value"] = detail::num(v);
            o.emit(render(j, o.format));
        } else if (ver->parsed()) {
            HarnessConfig cfg = config.empty() ? HarnessConfig{} : load_config(config);
            if (seed) cfg.seed = *seed;
            cfg.timing = timing;
            auto rep = run_suite(suite, cfg);
            o.emit(o.format == "csv" ? report_csv(rep) : report_json_string(rep));
            return rep.all_pass() ? 0 : 1;
        } else if (swp->parsed()) {
            HarnessConfig cfg = config.empty() ? HarnessConfig{} : load_config(config);
            SweepBase base;
            base.params = FracParams(dim, s, p, q, std::nullopt, true);
            base.shape = shape;
            base.gamma = gamma;
            base.ratio = ratio;
            auto t = sweep(param, parse_grid(grid), target, cfg, base);
            o.emit(o.format == "csv" ? sweep_csv(t) : to_json(t).dump(2) + "\n");
        }
    } catch (const std::exception& e) {
        std::cerr << "frac: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
