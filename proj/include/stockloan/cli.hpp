#pragma once

// Command-line front end: stockloan roots|price|fee|sweep|verify.
// Exit codes: 0 success, 1 verification failure, 2 inadmissible parameters,
// 64 usage error. Machine-readable output uses 12 significant digits,
// human-readable output 6.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stockloan/config.hpp"
#include "stockloan/fee.hpp"
#include "stockloan/verification.hpp"

namespace stockloan {

namespace cli_detail {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitInadmissible = 2;
constexpr int kExitUsage = 64;

inline std::string human(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string machine(double v) { return detail::format_g(v, 12); }

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<long> paths;
    std::optional<double> dt;
};

inline ContractSpec load_spec(const std::string& path, const Overrides& ov) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    ContractSpec spec = parse_contract_spec(ss.str());
    if (const char* env = std::getenv("STOCKLOAN_SEED"))
        spec.mc.seed = detail::parse_u64("STOCKLOAN_SEED", env);
    if (ov.seed)
        spec.mc.seed = *ov.seed;
    if (ov.paths)
        spec.mc.n_paths = *ov.paths;
    if (ov.dt)
        spec.mc.dt = *ov.dt;
    return spec;
}

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    int n = 0;
};

inline Range parse_range(const std::string& text) {
    Range r;
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw ConfigError("--range expects lo:hi:n, got '" + text + "'");
    r.lo = detail::parse_double("range.lo", text.substr(0, c1));
    r.hi = detail::parse_double("range.hi", text.substr(c1 + 1, c2 - c1 - 1));
    r.n = static_cast<int>(detail::parse_long("range.n", text.substr(c2 + 1)));
    if (r.n < 1 || !(r.hi >= r.lo))
        throw ConfigError("--range expects lo <= hi and n >= 1");
    return r;
}

inline int cmd_roots(const ContractSpec& spec, std::ostream& out, std::ostream& err) {
    spec.market.validate();
    spec.loan.validate();
    const ParameterRegime regime = classify_regime(spec.market, spec.loan);
    if (!regime.admissible()) {
        err << "inadmissible parameters: " << regime.detail << "\n";
        return kExitInadmissible;
    }
    const CharacteristicRoots roots = compute_roots(spec.market, spec.loan.gamma);
    out << "regime  = " << to_string(regime.tag) << "\n"
        << "mu      = " << human(roots.mu) << "\n"
        << "Delta   = " << human(roots.delta_disc) << "\n"
        << "lambda1 = " << human(roots.lambda1) << "\n"
        << "lambda2 = " << human(roots.lambda2) << "\n";
    return kExitOk;
}

inline const char* region_name(const ValueFunction& f, double x) {
    if (x <= f.terms().a)
        return "terminated";
    if (x < f.exercise_level())
        return "continuation";
    if (f.terms().cap && x >= *f.terms().cap)
        return "capped-tail";
    return "exercise";
}

inline int cmd_price(const ContractSpec& spec, double x, TailMode mode, bool verify_mc,
                     std::ostream& out, std::ostream& err) {
    spec.market.validate();
    spec.loan.validate();
    const ParameterRegime regime = classify_regime(spec.market, spec.loan);
    if (!regime.admissible()) {
        err << "inadmissible parameters: " << regime.detail << "\n";
        return kExitInadmissible;
    }
    const CharacteristicRoots roots = compute_roots(spec.market, spec.loan.gamma);
    const BoundarySolution bs = solve_boundary(roots, spec.loan);
    const ValueFunction f(spec.market, spec.loan, roots, bs, mode);
    const double value = f(x);
    out << "x      = " << human(x) << "\n"
        << "value  = " << human(value) << "\n"
        << "region = " << region_name(f, x) << "\n"
        << "kind   = " << to_string(f.kind()) << "\n"
        << "b      = " << human(bs.b) << "\n";
    if (f.terms().cap)
        out << "cap    = " << human(*f.terms().cap) << "\n";
    if (!verify_mc)
        return kExitOk;

    StoppingRule rule{spec.loan.a, bs.b, spec.loan.cap, spec.loan.margin, spec.loan.q};
    const MCEstimate est = estimate_rule_value(rule, x, spec.market, spec.loan.gamma, spec.mc);
    const double diff = std::fabs(est.mean - value);
    const bool ok = diff <= 3.0 * est.std_error || diff <= 1e-12 * spec.loan.q;
    out << "mc.mean   = " << machine(est.mean) << "\n"
        << "mc.stderr = " << machine(est.std_error) << "\n"
        << "mc.paths  = " << est.n_paths << "\n"
        << "mc.seed = " << est.seed << "\n"
        << "mc.censored = " << est.n_censored << "\n"
        << "mc.within_3_sigma = " << (ok ? "yes" : "no") << "\n";
    return ok ? kExitOk : kExitVerifyFail;
}

inline int cmd_fee(const ContractSpec& spec, std::ostream& out, std::ostream& err) {
    const ContractQuote quote = negotiate(spec.loan, spec.market, spec.s0);
    if (!quote.ok) {
        err << "quote failed: " << quote.error << "\n";
        return kExitInadmissible;
    }
    out << "case = " << to_string(quote.fee.fee_case) << "\n"
        << "c    = " << human(quote.fee.c) << "\n"
        << "b    = " << human(quote.fee.b) << "\n"
        << "q-c  = " << human(spec.loan.q - quote.fee.c) << "\n";
    if (quote.fee.fee_case == FeeCase::Active)
        out << "audit: S0 - q + c = " << human(spec.s0 - spec.loan.q + quote.fee.c)
            << " = f(S0) = " << human(quote.fee.value_s0) << "\n";
    return kExitOk;
}

struct SweepRow {
    double varied = 0.0;
    double b = std::numeric_limits<double>::quiet_NaN();
    double f_s0 = std::numeric_limits<double>::quiet_NaN();
    double c = std::numeric_limits<double>::quiet_NaN();
    double q_minus_c = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
};

enum class Direction { NonIncreasing, NonDecreasing, Mixed, Empty };

inline Direction column_direction(const std::vector<SweepRow>& rows, double SweepRow::*col,
                                  double tol) {
    bool up_ok = true, down_ok = true;
    const double* prev = nullptr;
    double prev_v = 0.0;
    for (const auto& r : rows) {
        if (!r.ok || std::isnan(r.*col))
            continue;
        const double v = r.*col;
        if (prev) {
            if (v > prev_v + tol)
                down_ok = false;
            if (v < prev_v - tol)
                up_ok = false;
        }
        prev_v = v;
        prev = &prev_v;
    }
    if (!prev)
        return Direction::Empty;
    if (down_ok && up_ok)
        return Direction::NonIncreasing; // constant counts as both; report one
    if (down_ok)
        return Direction::NonIncreasing;
    if (up_ok)
        return Direction::NonDecreasing;
    return Direction::Mixed;
}

inline const char* to_string(Direction d) {
    switch (d) {
    case Direction::NonIncreasing: return "nonincreasing";
    case Direction::NonDecreasing: return "nondecreasing";
    case Direction::Mixed: return "mixed";
    default: return "empty";
    }
}

inline int cmd_sweep(const ContractSpec& spec, const std::string& vary, const Range& range,
                     const std::string& out_file, std::ostream& out, std::ostream& err) {
    if (vary != "a" && vary != "s0" && vary != "k" && vary != "L")
        throw ConfigError("--vary expects one of a|s0|k|L");

    std::vector<SweepRow> rows;
    rows.reserve(static_cast<std::size_t>(range.n));
    for (int i = 0; i < range.n; ++i) {
        const double v = range.n == 1
                             ? range.lo
                             : range.lo + (range.hi - range.lo) * i / (range.n - 1.0);
        ContractSpec s = spec;
        if (vary == "a")
            s.loan.a = v;
        else if (vary == "s0")
            s.s0 = v;
        else if (vary == "k")
            s.loan.margin = v;
        else
            s.loan.cap = v;
        SweepRow row;
        row.varied = v;
        const ContractQuote quote = negotiate(s.loan, s.market, s.s0);
        if (quote.ok) {
            row.ok = true;
            row.b = quote.fee.b;
            row.f_s0 = quote.fee.value_s0;
            row.c = quote.fee.c;
            row.q_minus_c = s.loan.q - quote.fee.c;
        } else {
            err << "sweep: skipping " << vary << "=" << machine(v) << ": " << quote.error
                << "\n";
        }
        rows.push_back(row);
    }

    std::ostringstream csv;
    csv << vary << ",b,f_s0,c,q_minus_c\n";
    for (const auto& r : rows)
        csv << machine(r.varied) << ',' << machine(r.b) << ',' << machine(r.f_s0) << ','
            << machine(r.c) << ',' << machine(r.q_minus_c) << '\n';

    std::ostream* summary = &out;
    if (!out_file.empty()) {
        std::ofstream f(out_file);
        if (!f)
            throw ConfigError("cannot open output file '" + out_file + "'");
        f << csv.str();
    } else {
        out << csv.str();
        summary = &err;
    }

    const double tol = 1e-9 * spec.loan.q;
    if (vary == "a") {
        *summary << "sweep.b.direction = " << to_string(column_direction(rows, &SweepRow::b, tol))
                 << "\n"
                 << "sweep.f_s0.direction = "
                 << to_string(column_direction(rows, &SweepRow::f_s0, tol)) << "\n"
                 << "sweep.c.direction = "
                 << to_string(column_direction(rows, &SweepRow::c, tol)) << "\n";
    } else if (vary == "s0") {
        *summary << "sweep.q_minus_c.direction = "
                 << to_string(column_direction(rows, &SweepRow::q_minus_c, tol)) << "\n";
    } else {
        *summary << "sweep.c.direction = "
                 << to_string(column_direction(rows, &SweepRow::c, tol)) << "\n"
                 << "sweep.b.direction = "
                 << to_string(column_direction(rows, &SweepRow::b, tol)) << "\n";
    }
    return kExitOk;
}

inline int cmd_verify(const ContractSpec& spec, std::ostream& out, std::ostream& err) {
    VerificationReport rep;
    try {
        rep = run_verification(spec.market, spec.loan, spec.s0, spec.mc);
    } catch (const InvalidParams& e) {
        err << "inadmissible parameters: " << e.what() << "\n";
        return kExitInadmissible;
    }
    out << "verify.regime = " << to_string(rep.regime.tag) << "\n"
        << "verify.lambda1 = " << machine(rep.roots.lambda1) << "\n"
        << "verify.lambda2 = " << machine(rep.roots.lambda2) << "\n"
        << "verify.b = " << machine(rep.boundary.b) << "\n"
        << "verify.value_s0 = " << machine(rep.value_s0) << "\n";
    for (const auto& c : rep.checks) {
        if (!c.applicable) {
            out << "check." << c.name << " = n/a\n";
            if (!c.note.empty())
                out << "check." << c.name << ".note = " << c.note << "\n";
            continue;
        }
        out << "check." << c.name << " = " << (c.pass ? "pass" : "fail") << "\n"
            << "check." << c.name << ".stat = " << machine(c.stat) << "\n"
            << "check." << c.name << ".bound = " << machine(c.bound) << "\n";
        if (!c.note.empty())
            out << "check." << c.name << ".note = " << c.note << "\n";
    }
    const bool ok = rep.all_pass();
    out << "verify.result = " << (ok ? "pass" : "fail") << "\n";
    return ok ? kExitOk : kExitVerifyFail;
}

} // namespace cli_detail

// Entry point shared by the binary and the tests; `args` excludes argv[0].
inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
    using namespace cli_detail;

    CLI::App app{"Perpetual stock-loan valuation with automatic termination, cap and margin",
                 "stockloan"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;
    std::uint64_t seed_val = 0;
    long paths_val = 0;
    double dt_val = 0.0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "contract description file")->required();
        sub->add_option("--seed", seed_val, "override mc.seed");
        sub->add_option("--paths", paths_val, "override mc.n_paths");
        sub->add_option("--dt", dt_val, "override mc.dt");
    };

    CLI::App* roots = app.add_subcommand("roots", "characteristic roots and regime");
    add_common(roots);

    CLI::App* price = app.add_subcommand("price", "contract value at a price level");
    add_common(price);
    double at_x = std::numeric_limits<double>::quiet_NaN();
    std::string mode_str = "printed";
    bool price_verify = false;
    price->add_option("--at", at_x, "evaluate at this discounted price (default s0)");
    price->add_option("--mode", mode_str, "x >= L branch: printed|exercise-payoff")
        ->check(CLI::IsMember({"printed", "exercise-payoff"}));
    price->add_flag("--verify", price_verify, "cross-check against the Monte Carlo oracle");

    CLI::App* fee = app.add_subcommand("fee", "fair service fee quote");
    add_common(fee);

    CLI::App* sweep = app.add_subcommand("sweep", "CSV sweep over one parameter");
    add_common(sweep);
    std::string vary, range_str, out_file;
    sweep->add_option("--vary", vary, "parameter to vary: a|s0|k|L")->required();
    sweep->add_option("--range", range_str, "lo:hi:n")->required();
    sweep->add_option("--out", out_file, "write CSV here instead of stdout");

    CLI::App* verify = app.add_subcommand("verify", "run the verification battery");
    add_common(verify);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitUsage;
    }

    for (auto* sub : {roots, price, fee, sweep, verify}) {
        if (sub->parsed()) {
            if (sub->count("--seed"))
                ov.seed = seed_val;
            if (sub->count("--paths"))
                ov.paths = paths_val;
            if (sub->count("--dt"))
                ov.dt = dt_val;
        }
    }

    try {
        const ContractSpec spec = load_spec(config_path, ov);
        if (roots->parsed())
            return cmd_roots(spec, out, err);
        if (price->parsed()) {
            const double x = std::isnan(at_x) ? spec.s0 : at_x;
            const TailMode mode =
                mode_str == "printed" ? TailMode::Printed : TailMode::ExercisePayoff;
            return cmd_price(spec, x, mode, price_verify, out, err);
        }
        if (fee->parsed())
            return cmd_fee(spec, out, err);
        if (sweep->parsed())
            return cmd_sweep(spec, vary, parse_range(range_str), out_file, out, err);
        if (verify->parsed())
            return cmd_verify(spec, out, err);
        err << "no subcommand\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return kExitInadmissible;
    }
}

} // namespace stockloan
