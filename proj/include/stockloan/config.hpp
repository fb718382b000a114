#pragma once

// Contract description document: one `section.key = value` pair per line,
// `#` comments, strict schema (unknown or duplicate keys rejected). Values
// round-trip losslessly through serialize/parse.

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "stockloan/errors.hpp"
#include "stockloan/mc.hpp"
#include "stockloan/model.hpp"

namespace stockloan {

struct ContractSpec {
    MarketParams market;
    LoanTerms loan;
    double s0 = 0.0;
    SimConfig mc;
};

namespace detail {

// Locale-independent float formatting with `digits` significant digits.
inline std::string format_g(double v, int digits) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, digits);
    return std::string(buf, res.ptr);
}

// Shortest representation that parses back to the same double.
inline std::string format_exact(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad numeric value for " + std::string(key) + ": '" +
                          std::string(v) + "'");
    return out;
}

inline std::uint64_t parse_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad integer value for " + std::string(key) + ": '" +
                          std::string(v) + "'");
    return out;
}

inline long parse_long(std::string_view key, std::string_view v) {
    long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad integer value for " + std::string(key) + ": '" +
                          std::string(v) + "'");
    return out;
}

} // namespace detail

inline ContractSpec parse_contract_spec(std::string_view text) {
    std::map<std::string, std::string, std::less<>> kv;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos
                                                     ? std::string_view::npos
                                                     : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line.front() == '#')
            continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " is not 'key = value'");
        const std::string key{detail::trim(line.substr(0, eq))};
        const std::string val{detail::trim(line.substr(eq + 1))};
        if (key.empty() || val.empty())
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " has an empty key or value");
        if (!kv.emplace(key, val).second)
            throw ConfigError("config: duplicate key '" + key + "'");
    }

    ContractSpec spec;
    auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end())
            return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto require = [&](const char* key) -> std::string {
        auto v = take(key);
        if (!v)
            throw ConfigError(std::string("config: missing required key '") + key + "'");
        return *v;
    };

    spec.market.r = detail::parse_double("market.r", require("market.r"));
    spec.market.sigma = detail::parse_double("market.sigma", require("market.sigma"));
    spec.market.delta = detail::parse_double("market.delta", require("market.delta"));
    spec.loan.q = detail::parse_double("loan.q", require("loan.q"));
    spec.loan.gamma = detail::parse_double("loan.gamma", require("loan.gamma"));
    spec.loan.a = detail::parse_double("loan.a", require("loan.a"));
    if (auto v = take("loan.L"))
        spec.loan.cap = detail::parse_double("loan.L", *v);
    if (auto v = take("loan.k"))
        spec.loan.margin = detail::parse_double("loan.k", *v);
    spec.s0 = detail::parse_double("s0", require("s0"));
    if (auto v = take("mc.n_paths"))
        spec.mc.n_paths = detail::parse_long("mc.n_paths", *v);
    if (auto v = take("mc.dt"))
        spec.mc.dt = detail::parse_double("mc.dt", *v);
    if (auto v = take("mc.horizon"))
        spec.mc.horizon = detail::parse_double("mc.horizon", *v);
    if (auto v = take("mc.seed"))
        spec.mc.seed = detail::parse_u64("mc.seed", *v);

    if (!kv.empty())
        throw ConfigError("config: unknown key '" + kv.begin()->first + "'");
    return spec;
}

inline std::string serialize_contract_spec(const ContractSpec& spec) {
    std::ostringstream os;
    os << "market.r = " << detail::format_exact(spec.market.r) << '\n'
       << "market.sigma = " << detail::format_exact(spec.market.sigma) << '\n'
       << "market.delta = " << detail::format_exact(spec.market.delta) << '\n'
       << "loan.q = " << detail::format_exact(spec.loan.q) << '\n'
       << "loan.gamma = " << detail::format_exact(spec.loan.gamma) << '\n'
       << "loan.a = " << detail::format_exact(spec.loan.a) << '\n';
    if (spec.loan.cap)
        os << "loan.L = " << detail::format_exact(*spec.loan.cap) << '\n';
    os << "loan.k = " << detail::format_exact(spec.loan.margin) << '\n'
       << "s0 = " << detail::format_exact(spec.s0) << '\n'
       << "mc.n_paths = " << spec.mc.n_paths << '\n'
       << "mc.dt = " << detail::format_exact(spec.mc.dt) << '\n'
       << "mc.horizon = " << detail::format_exact(spec.mc.horizon) << '\n'
       << "mc.seed = " << spec.mc.seed << '\n';
    return os.str();
}

} // namespace stockloan
