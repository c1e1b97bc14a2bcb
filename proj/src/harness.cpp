#include "pevo/harness.hpp"

#include "pevo/errors.hpp"
#include "pevo/symbol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace pevo {

namespace {

constexpr double kOracleTolerance = 1e-10; // dense-oracle agreement for a PASS

[[noreturn]] void bad_config(const std::string& msg) { throw ConfigError("config: " + msg); }

// ---------------------------------------------------------------- formatting

// %.12g with a locale-independent backend and -0 folded to 0: the CSV/JSON
// byte streams must not depend on the process locale or the sign of a zero.
std::string fmt12(double v) {
    if (v == 0.0) return "0";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

std::string fmt6(double v) {
    if (v == 0.0) return "0";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
    return std::string(buf, res.ptr);
}

// pixel coordinates: fixed two decimals keeps the documents compact
std::string fmt_px(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
}

// ------------------------------------------------------------ config parsing

Experiment experiment_from_name(const std::string& name) {
    if (name == "threshold") return Experiment::threshold;
    if (name == "simulate") return Experiment::simulate;
    if (name == "growth") return Experiment::growth;
    if (name == "bounded") return Experiment::bounded;
    if (name == "datum-decay") return Experiment::datum_decay;
    if (name == "oracle-check") return Experiment::oracle_check;
    bad_config("unknown experiment '" + name +
               "' (valid: threshold, simulate, growth, bounded, datum-decay, oracle-check)");
}

double need_number(const json& j, const std::string& where) {
    if (!j.is_number()) bad_config(where + " must be a number");
    return j.get<double>();
}

int need_int(const json& j, const std::string& where) {
    if (!j.is_number_integer()) bad_config(where + " must be an integer");
    return j.get<int>();
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (allowed.find(it.key()) == allowed.end())
            bad_config("unknown field '" + it.key() + "' " + where);
}

ModelOperator parse_operator(const json& j) {
    if (!j.is_object()) bad_config("operator must be an object");
    check_keys(j, {"p", "a_p", "lower"}, "in operator");
    ModelOperator op;
    if (!j.contains("p")) bad_config("operator.p is required");
    op.p = need_int(j["p"], "operator.p");
    if (op.p < 2) bad_config("operator.p = " + std::to_string(op.p) + " must be >= 2");
    if (j.contains("a_p")) op.a_p = need_number(j["a_p"], "operator.a_p");
    if (op.a_p == 0.0) bad_config("operator.a_p must be nonzero");
    if (!j.contains("lower")) bad_config("operator.lower is required (array of coefficients)");
    const json& low = j["lower"];
    if (!low.is_array()) bad_config("operator.lower must be an array");
    for (const json& c : low) {
        if (!c.is_object()) bad_config("operator.lower entries must be objects");
        check_keys(c, {"j", "sigma", "A", "real_part"}, "in operator.lower");
        LowerCoeff lc;
        if (c.contains("j")) lc.j = need_int(c["j"], "operator.lower.j");
        if (c.contains("sigma")) lc.sigma = need_number(c["sigma"], "operator.lower.sigma");
        if (c.contains("A")) lc.A = need_number(c["A"], "operator.lower.A");
        if (lc.j < 1 || lc.j > op.p)
            bad_config("coefficient index j = " + std::to_string(lc.j) + " outside [1, p = " +
                       std::to_string(op.p) + "]");
        if (!(lc.sigma >= 0.0 && lc.sigma <= 1.0))
            bad_config("coefficient sigma = " + std::to_string(lc.sigma) + " outside [0, 1]");
        if (!(lc.A >= 0.0))
            bad_config("coefficient A = " + std::to_string(lc.A) + " must be >= 0");
        if (c.contains("real_part")) {
            const json& rp = c["real_part"];
            if (!rp.is_array()) bad_config("real_part must be an array of numbers");
            for (const json& v : rp)
                lc.real_part.push_back(need_number(v, "operator.lower.real_part"));
        }
        for (const LowerCoeff& prev : op.lower)
            if (prev.j == lc.j)
                bad_config("duplicate coefficient index j = " + std::to_string(lc.j));
        op.lower.push_back(std::move(lc));
    }
    return op;
}

void apply_template(const json& j, WavePacketRun& t, bool allow_p) {
    if (!j.is_object()) bad_config("template must be an object");
    check_keys(j,
               {"p", "lambda", "theta1", "theta_h", "theta", "rho0", "t_star", "dt", "cap_config",
                "cutoff_factor"},
               "in template");
    if (j.contains("p")) {
        if (!allow_p) bad_config("template.p is derived from operator.p; remove it");
        t.p = need_int(j["p"], "template.p");
    }
    if (j.contains("lambda")) t.lambda = need_number(j["lambda"], "template.lambda");
    if (j.contains("theta1")) t.theta1 = need_number(j["theta1"], "template.theta1");
    if (j.contains("theta_h")) t.theta_h = need_number(j["theta_h"], "template.theta_h");
    if (j.contains("theta")) t.theta = need_number(j["theta"], "template.theta");
    if (j.contains("rho0")) t.rho0 = need_number(j["rho0"], "template.rho0");
    if (j.contains("t_star")) t.t_star = need_number(j["t_star"], "template.t_star");
    if (j.contains("dt")) t.dt = need_number(j["dt"], "template.dt");
    if (j.contains("cap_config")) t.cap_config = need_int(j["cap_config"], "template.cap_config");
    if (j.contains("cutoff_factor"))
        t.cutoff_factor = need_number(j["cutoff_factor"], "template.cutoff_factor");
}

json template_json(const WavePacketRun& t) {
    return json{{"cap_config", t.cap_config}, {"cutoff_factor", t.cutoff_factor},
                {"dt", t.dt},                 {"lambda", t.lambda},
                {"p", t.p},                   {"rho0", t.rho0},
                {"t_star", t.t_star},         {"theta", t.theta},
                {"theta1", t.theta1},         {"theta_h", t.theta_h}};
}

json operator_json(const ModelOperator& op) {
    json lower = json::array();
    for (const LowerCoeff& c : op.lower)
        lower.push_back(json{{"A", c.A}, {"j", c.j}, {"real_part", c.real_part},
                             {"sigma", c.sigma}});
    return json{{"a_p", op.a_p}, {"lower", std::move(lower)}, {"p", op.p}};
}

// ------------------------------------------------------- record serialisation

std::string class_name(ThresholdClass c) {
    switch (c) {
    case ThresholdClass::no_effect: return "no_effect";
    case ThresholdClass::restricts: return "restricts";
    case ThresholdClass::not_wp: return "not_wp";
    }
    throw ContractError("class_name: unknown threshold class");
}

ThresholdClass class_from_name(const std::string& s) {
    if (s == "no_effect") return ThresholdClass::no_effect;
    if (s == "restricts") return ThresholdClass::restricts;
    if (s == "not_wp") return ThresholdClass::not_wp;
    throw ContractError("parse_record: unknown threshold class '" + s + "'");
}

// log E entries may be the -inf sentinel, which JSON lacks; null stands in.
json log_array(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) {
        if (std::isfinite(x))
            a.push_back(x);
        else
            a.push_back(nullptr);
    }
    return a;
}

std::vector<double> log_array_back(const json& a) {
    std::vector<double> v;
    for (const json& x : a)
        v.push_back(x.is_null() ? -std::numeric_limits<double>::infinity() : x.get<double>());
    return v;
}

json run_json(const NuRun& r) {
    return json{{"lambda_rate", r.lambda_rate},
                {"length", r.length},
                {"log_E", log_array(r.report.log_E)},
                {"log_E0", r.log_E0},
                {"log_Et", r.log_Et},
                {"n", r.n},
                {"nu", r.nu},
                {"times", r.report.times}};
}

NuRun run_from_json(const json& j) {
    NuRun r;
    r.nu = j.at("nu").get<double>();
    r.n = j.at("n").get<std::int64_t>();
    r.length = j.at("length").get<double>();
    r.log_E0 = j.at("log_E0").get<double>();
    r.log_Et = j.at("log_Et").get<double>();
    r.lambda_rate = j.at("lambda_rate").get<double>();
    r.report.times = j.at("times").get<std::vector<double>>();
    r.report.log_E = log_array_back(j.at("log_E"));
    r.report.E0_log = r.log_E0;
    return r;
}

json datum_json(const DatumDecayRun& r) {
    return json{{"B_log", r.B_log}, {"E0_log", r.E0_log}, {"E0_pos_log", r.E0_pos_log},
                {"nu", r.nu}};
}

DatumDecayRun datum_from_json(const json& j) {
    DatumDecayRun r;
    r.nu = j.at("nu").get<double>();
    r.E0_log = j.at("E0_log").get<double>();
    r.E0_pos_log = j.at("E0_pos_log").get<double>();
    r.B_log = j.at("B_log").get<double>();
    return r;
}

json threshold_json(const ThresholdReport& t) {
    json per = json::array();
    for (const TermThreshold& row : t.per_j)
        per.push_back(json{{"class", class_name(row.cls)},
                           {"j", row.j},
                           {"term", row.term},
                           {"theta_bound", row.theta_bound}});
    return json{{"argmax_j", t.argmax_j},
                {"class", class_name(t.cls)},
                {"per_j", std::move(per)},
                {"theta_bound", t.theta_bound},
                {"xi", t.xi}};
}

ThresholdReport threshold_from_json(const json& j) {
    ThresholdReport t;
    t.xi = j.at("xi").get<double>();
    t.argmax_j = j.at("argmax_j").get<int>();
    t.cls = class_from_name(j.at("class").get<std::string>());
    t.theta_bound = j.at("theta_bound").get<double>();
    for (const json& row : j.at("per_j"))
        t.per_j.push_back(TermThreshold{row.at("j").get<int>(), row.at("term").get<double>(),
                                        class_from_name(row.at("class").get<std::string>()),
                                        row.at("theta_bound").get<double>()});
    return t;
}

const json& need_key(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end())
        throw ContractError(std::string("parse_record: missing key '") + key + "'");
    return *it;
}

// ------------------------------------------------------------------ file io

void write_atomic(const fs::path& path, const std::string& bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out.good())
            throw ContractError("write_atomic: cannot write '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------- svg plots

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> pts; // finite data points only
};

constexpr double kPX0 = 48.0, kPY0 = 16.0, kPX1 = 608.0, kPY1 = 346.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct AxisMap {
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    double px(double x) const { return kPX0 + (kPX1 - kPX0) * (x - xmin) / (xmax - xmin); }
    double py(double y) const { return kPY1 - (kPY1 - kPY0) * (y - ymin) / (ymax - ymin); }
};

std::string svg_plot(const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, const std::vector<Series>& series, bool markers,
                     const std::string& annotation, const PowerLawFit* fit) {
    std::string s =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 640 400\""
        " font-family=\"monospace\" font-size=\"12\">\n"
        "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n"
        "<rect x=\"48\" y=\"16\" width=\"560\" height=\"330\" fill=\"none\" stroke=\"#444\"/>\n";
    s += "<text x=\"328\" y=\"12\" text-anchor=\"middle\">" + title + "</text>\n";
    s += "<text x=\"328\" y=\"382\" text-anchor=\"middle\">" + xlabel + "</text>\n";
    s += "<text x=\"14\" y=\"181\" text-anchor=\"middle\" transform=\"rotate(-90 14 181)\">" +
         ylabel + "</text>\n";

    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    bool any = false;
    for (const Series& sr : series)
        for (const auto& [x, y] : sr.pts) {
            if (!any) {
                xmin = xmax = x;
                ymin = ymax = y;
                any = true;
            }
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!any) {
        s += "<text x=\"328\" y=\"181\" text-anchor=\"middle\">no data</text>\n</svg>\n";
        return s;
    }

    AxisMap m;
    const double xpad = (xmax > xmin) ? 0.05 * (xmax - xmin) : 1.0;
    const double ypad = (ymax > ymin) ? 0.05 * (ymax - ymin) : 1.0;
    m.xmin = xmin - xpad;
    m.xmax = xmax + xpad;
    m.ymin = ymin - ypad;
    m.ymax = ymax + ypad;

    // data extent at the frame corners
    s += "<text x=\"48\" y=\"360\">" + fmt6(xmin) + "</text>\n";
    s += "<text x=\"608\" y=\"360\" text-anchor=\"end\">" + fmt6(xmax) + "</text>\n";
    s += "<text x=\"44\" y=\"346\" text-anchor=\"end\">" + fmt6(ymin) + "</text>\n";
    s += "<text x=\"44\" y=\"24\" text-anchor=\"end\">" + fmt6(ymax) + "</text>\n";

    if (fit) {
        const double ya = fit->intercept + fit->slope * m.xmin;
        const double yb = fit->intercept + fit->slope * m.xmax;
        s += "<line x1=\"" + fmt_px(m.px(m.xmin)) + "\" y1=\"" + fmt_px(m.py(ya)) + "\" x2=\"" +
             fmt_px(m.px(m.xmax)) + "\" y2=\"" + fmt_px(m.py(yb)) +
             "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    }

    for (size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % (sizeof kPalette / sizeof kPalette[0])];
        std::string points;
        for (const auto& [x, y] : series[i].pts) {
            if (!points.empty()) points += ' ';
            points += fmt_px(m.px(x)) + "," + fmt_px(m.py(y));
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
        if (markers)
            for (const auto& [x, y] : series[i].pts)
                s += "<circle cx=\"" + fmt_px(m.px(x)) + "\" cy=\"" + fmt_px(m.py(y)) +
                     "\" r=\"3\" fill=\"" + color + "\"/>\n";
        if (!series[i].label.empty())
            s += "<text x=\"600\" y=\"" + fmt_px(34.0 + 14.0 * static_cast<double>(i)) +
                 "\" text-anchor=\"end\" fill=\"" + color + "\">" + series[i].label + "</text>\n";
    }
    if (!annotation.empty()) s += "<text x=\"56\" y=\"34\">" + annotation + "</text>\n";
    s += "</svg>\n";
    return s;
}

// ------------------------------------------------------------- oracle check

OracleStats check_oracles(int n, int trials, std::uint64_t seed) {
    const Grid g = make_grid(n, 10.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    OracleStats st;
    st.n = n;
    st.trials = trials;
    const size_t nn = static_cast<size_t>(n);
    for (int t = 0; t < trials; ++t) {
        SampledSymbol sym;
        sym.grid = g;
        sym.terms.resize(1);
        sym.terms[0].xprof.resize(nn);
        sym.terms[0].xiprof.resize(nn);
        for (auto& z : sym.terms[0].xprof) z = cplx(u(rng), u(rng));
        for (auto& z : sym.terms[0].xiprof) z = cplx(u(rng), u(rng));
        Field f = make_field(g);
        for (auto& z : f.v) z = cplx(u(rng), u(rng));

        const Field got = apply(sym, f);
        const std::vector<cplx> M = dense_matrix(sym);
        double num = 0.0, den = 0.0;
        for (size_t r = 0; r < nn; ++r) {
            cplx y = 0.0;
            for (size_t c = 0; c < nn; ++c) y += M[r * nn + c] * f.v[c];
            num += std::norm(got.v[r] - y);
            den += std::norm(y);
        }
        if (!(den > 0.0))
            throw NumericError("oracle check: dense product vanished on trial " +
                               std::to_string(t));
        st.max_rel_error = std::max(st.max_rel_error, std::sqrt(num / den));
    }
    return st;
}

} // namespace

// ----------------------------------------------------------------- public api

std::string experiment_name(Experiment e) {
    switch (e) {
    case Experiment::threshold: return "threshold";
    case Experiment::simulate: return "simulate";
    case Experiment::growth: return "growth";
    case Experiment::bounded: return "bounded";
    case Experiment::datum_decay: return "datum-decay";
    case Experiment::oracle_check: return "oracle-check";
    }
    throw ContractError("experiment_name: unknown enum value");
}

std::string git_blob_sha1(const std::string& content) {
    std::string msg = "blob " + std::to_string(content.size());
    msg.push_back('\0');
    msg += content;

    const std::uint64_t bit_len = static_cast<std::uint64_t>(msg.size()) * 8u;
    msg.push_back(static_cast<char>(0x80));
    while (msg.size() % 64 != 56) msg.push_back('\0');
    for (int i = 7; i >= 0; --i)
        msg.push_back(static_cast<char>((bit_len >> (8 * i)) & 0xffu));

    const auto rotl = [](std::uint32_t v, int b) { return (v << b) | (v >> (32 - b)); };
    std::uint32_t h[5] = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u, 0xc3d2e1f0u};
    for (size_t off = 0; off < msg.size(); off += 64) {
        std::uint32_t w[80];
        for (int t = 0; t < 16; ++t)
            w[t] = (static_cast<std::uint32_t>(static_cast<unsigned char>(msg[off + 4 * t])) << 24) |
                   (static_cast<std::uint32_t>(static_cast<unsigned char>(msg[off + 4 * t + 1])) << 16) |
                   (static_cast<std::uint32_t>(static_cast<unsigned char>(msg[off + 4 * t + 2])) << 8) |
                   static_cast<std::uint32_t>(static_cast<unsigned char>(msg[off + 4 * t + 3]));
        for (int t = 16; t < 80; ++t) w[t] = rotl(w[t - 3] ^ w[t - 8] ^ w[t - 14] ^ w[t - 16], 1);

        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int t = 0; t < 80; ++t) {
            std::uint32_t f, k;
            if (t < 20) {
                f = (b & c) | (~b & d);
                k = 0x5a827999u;
            } else if (t < 40) {
                f = b ^ c ^ d;
                k = 0x6ed9eba1u;
            } else if (t < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8f1bbcdcu;
            } else {
                f = b ^ c ^ d;
                k = 0xca62c1d6u;
            }
            const std::uint32_t tmp = rotl(a, 5) + f + e + k + w[t];
            e = d;
            d = c;
            c = rotl(b, 30);
            b = a;
            a = tmp;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }

    std::string hex;
    hex.reserve(40);
    for (std::uint32_t v : h)
        for (int shift = 28; shift >= 0; shift -= 4)
            hex.push_back("0123456789abcdef"[(v >> shift) & 0xfu]);
    return hex;
}

ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& expected_experiment) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const std::exception& e) {
        bad_config(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) bad_config("top level must be an object");
    if (!doc.contains("experiment") || !doc["experiment"].is_string())
        bad_config("an 'experiment' string is required");
    const std::string name = doc["experiment"].get<std::string>();
    ExperimentConfig cfg;
    cfg.experiment = experiment_from_name(name);
    if (!expected_experiment.empty() && name != expected_experiment)
        bad_config("experiment '" + name + "' does not match the '" + expected_experiment +
                   "' subcommand");

    std::set<std::string> allowed = {"experiment", "out", "seed"};
    const bool wants_op = cfg.experiment == Experiment::threshold ||
                          cfg.experiment == Experiment::simulate ||
                          cfg.experiment == Experiment::growth ||
                          cfg.experiment == Experiment::bounded;
    const bool wants_nus = cfg.experiment == Experiment::simulate ||
                           cfg.experiment == Experiment::growth ||
                           cfg.experiment == Experiment::bounded ||
                           cfg.experiment == Experiment::datum_decay;
    switch (cfg.experiment) {
    case Experiment::threshold: allowed.insert("operator"); break;
    case Experiment::simulate:
        allowed.insert({"operator", "nus", "template", "record_count"});
        break;
    case Experiment::growth:
        allowed.insert({"operator", "nus", "template", "record_count", "slope_tolerance"});
        break;
    case Experiment::bounded:
        allowed.insert({"operator", "nus", "template", "record_count", "ratio_limit"});
        break;
    case Experiment::datum_decay:
        allowed.insert({"nus", "template", "slope_tolerance"});
        break;
    case Experiment::oracle_check: allowed.insert({"oracle_n", "oracle_trials"}); break;
    }
    check_keys(doc, allowed, "for experiment '" + name + "'");

    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned())
            bad_config("seed must be a nonnegative integer");
        cfg.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("out")) {
        if (!doc["out"].is_string()) bad_config("out must be a string");
        cfg.out_dir = doc["out"].get<std::string>();
    }

    if (wants_op) {
        if (!doc.contains("operator"))
            bad_config("experiment '" + name + "' requires an operator");
        cfg.op = parse_operator(doc["operator"]);
        cfg.has_operator = true;
        cfg.tmpl.p = cfg.op.p;
    }

    if (wants_nus) {
        if (!doc.contains("nus")) bad_config("experiment '" + name + "' requires 'nus'");
        const json& arr = doc["nus"];
        if (!arr.is_array() || arr.empty()) bad_config("nus must be a nonempty array of numbers");
        for (const json& v : arr) {
            if (!v.is_number()) bad_config("nus must contain only numbers");
            cfg.nus.push_back(v.get<double>());
        }
        if (cfg.experiment == Experiment::simulate && cfg.nus.size() != 1)
            bad_config("simulate takes exactly one frequency in nus, got " +
                       std::to_string(cfg.nus.size()));
        if (cfg.experiment != Experiment::simulate && cfg.nus.size() < 3)
            bad_config("nus: at least 3 frequencies required for a power-law fit, got " +
                       std::to_string(cfg.nus.size()));
    }

    if (doc.contains("template"))
        apply_template(doc["template"], cfg.tmpl,
                       /*allow_p=*/cfg.experiment == Experiment::datum_decay);

    if (doc.contains("record_count"))
        cfg.record_count = need_int(doc["record_count"], "record_count");
    if (cfg.record_count < 2)
        bad_config("record_count = " + std::to_string(cfg.record_count) +
                   " must be at least 2 (both endpoints are measured)");

    if (cfg.experiment == Experiment::datum_decay) cfg.slope_tolerance = 0.1;
    if (doc.contains("slope_tolerance"))
        cfg.slope_tolerance = need_number(doc["slope_tolerance"], "slope_tolerance");
    if (!(cfg.slope_tolerance > 0.0)) bad_config("slope_tolerance must be positive");

    if (doc.contains("ratio_limit"))
        cfg.ratio_limit = need_number(doc["ratio_limit"], "ratio_limit");
    if (!(cfg.ratio_limit >= 1.0))
        bad_config("ratio_limit = " + std::to_string(cfg.ratio_limit) + " must be >= 1");

    if (doc.contains("oracle_n")) cfg.oracle_n = need_int(doc["oracle_n"], "oracle_n");
    if (cfg.oracle_n < 16 || cfg.oracle_n > 1024 || (cfg.oracle_n & (cfg.oracle_n - 1)) != 0)
        bad_config("oracle_n = " + std::to_string(cfg.oracle_n) +
                   " must be a power of two in [16, 1024] (dense reference bound)");
    if (doc.contains("oracle_trials"))
        cfg.oracle_trials = need_int(doc["oracle_trials"], "oracle_trials");
    if (cfg.oracle_trials < 1) bad_config("oracle_trials must be >= 1");

    // physics preconditions, checked before any expensive work
    try {
        if (cfg.experiment == Experiment::threshold || cfg.experiment == Experiment::growth ||
            cfg.experiment == Experiment::bounded) {
            const ThresholdReport th = xi_threshold(cfg.op);
            if (cfg.experiment == Experiment::bounded && !(th.xi < 1.0 / cfg.tmpl.theta))
                bad_config("bounded needs the threshold xi = " + std::to_string(th.xi) +
                           " strictly below 1/theta = " + std::to_string(1.0 / cfg.tmpl.theta) +
                           "; this operator/datum pair is outside the tame regime");
        }
        if (wants_nus) {
            for (double nu : cfg.nus) {
                (void)prepare_run(cfg.tmpl, nu);
                const Grid g = experiment_grid(nu, cfg.tmpl.p, cfg.tmpl.rho0);
                for (const LowerCoeff& c : cfg.op.lower)
                    if (!c.real_part.empty() &&
                        static_cast<std::int64_t>(c.real_part.size()) != g.n)
                        bad_config("real_part of coefficient j = " + std::to_string(c.j) +
                                   " has " + std::to_string(c.real_part.size()) +
                                   " samples; the nu = " + fmt6(nu) + " grid has " +
                                   std::to_string(g.n) + " nodes");
            }
        }
    } catch (const ContractError& e) {
        bad_config(e.what());
    }
    if (cfg.has_operator && cfg.experiment != Experiment::simulate)
        for (const LowerCoeff& c : cfg.op.lower)
            if (!c.real_part.empty())
                bad_config("real_part profiles are grid-bound; only simulate supports them");

    return cfg;
}

json canonical_config(const ExperimentConfig& cfg) {
    json j;
    j["experiment"] = experiment_name(cfg.experiment);
    j["seed"] = cfg.seed;
    if (cfg.has_operator) j["operator"] = operator_json(cfg.op);
    switch (cfg.experiment) {
    case Experiment::threshold: break;
    case Experiment::simulate:
        j["nus"] = cfg.nus;
        j["template"] = template_json(cfg.tmpl);
        j["record_count"] = cfg.record_count;
        break;
    case Experiment::growth:
        j["nus"] = cfg.nus;
        j["template"] = template_json(cfg.tmpl);
        j["record_count"] = cfg.record_count;
        j["slope_tolerance"] = cfg.slope_tolerance;
        break;
    case Experiment::bounded:
        j["nus"] = cfg.nus;
        j["template"] = template_json(cfg.tmpl);
        j["record_count"] = cfg.record_count;
        j["ratio_limit"] = cfg.ratio_limit;
        break;
    case Experiment::datum_decay:
        j["nus"] = cfg.nus;
        j["template"] = template_json(cfg.tmpl);
        j["slope_tolerance"] = cfg.slope_tolerance;
        break;
    case Experiment::oracle_check:
        j["oracle_n"] = cfg.oracle_n;
        j["oracle_trials"] = cfg.oracle_trials;
        break;
    }
    return j;
}

std::string record_json(const RunRecord& rec) {
    json j;
    j["schema"] = rec.schema;
    j["experiment"] = rec.experiment;
    j["config"] = rec.config;
    j["config_hash"] = rec.config_hash;
    j["verdict"] = rec.verdict;
    if (rec.has_threshold) j["threshold"] = threshold_json(rec.threshold);
    if (!rec.runs.empty()) {
        json runs = json::array();
        for (const NuRun& r : rec.runs) runs.push_back(run_json(r));
        j["runs"] = std::move(runs);
    }
    if (!rec.datum_runs.empty()) {
        json runs = json::array();
        for (const DatumDecayRun& r : rec.datum_runs) runs.push_back(datum_json(r));
        j["datum_runs"] = std::move(runs);
    }
    if (rec.has_fit)
        j["fit"] = json{{"intercept", rec.fit.intercept},
                        {"max_residual", rec.fit.max_residual},
                        {"slope", rec.fit.slope},
                        {"target", rec.fit_target}};
    if (rec.has_lambda_flag) j["lambda_nondecreasing"] = rec.lambda_nondecreasing;
    if (rec.has_bounded)
        j["bounded"] = json{{"q_max", rec.bounded.q_max},
                            {"q_min", rec.bounded.q_min},
                            {"ratio_limit", rec.bounded.ratio_limit},
                            {"top_increasing", rec.bounded.top_increasing}};
    if (rec.has_datum_bound) j["bound_ok"] = rec.datum_bound_ok;
    if (rec.has_oracle)
        j["oracle"] = json{{"max_rel_error", rec.oracle.max_rel_error},
                           {"n", rec.oracle.n},
                           {"trials", rec.oracle.trials}};
    return j.dump() + "\n";
}

RunRecord parse_record(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ContractError(std::string("parse_record: invalid JSON: ") + e.what());
    }
    try {
        RunRecord rec;
        rec.schema = need_key(j, "schema").get<std::string>();
        if (rec.schema != "pevo-record/1")
            throw ContractError("parse_record: unsupported schema '" + rec.schema + "'");
        rec.experiment = need_key(j, "experiment").get<std::string>();
        rec.config = need_key(j, "config");
        rec.config_hash = need_key(j, "config_hash").get<std::string>();
        rec.verdict = need_key(j, "verdict").get<std::string>();
        if (j.contains("threshold")) {
            rec.has_threshold = true;
            rec.threshold = threshold_from_json(j["threshold"]);
        }
        if (j.contains("runs"))
            for (const json& r : j["runs"]) rec.runs.push_back(run_from_json(r));
        if (j.contains("datum_runs"))
            for (const json& r : j["datum_runs"]) rec.datum_runs.push_back(datum_from_json(r));
        if (j.contains("fit")) {
            rec.has_fit = true;
            rec.fit.slope = j["fit"].at("slope").get<double>();
            rec.fit.intercept = j["fit"].at("intercept").get<double>();
            rec.fit.max_residual = j["fit"].at("max_residual").get<double>();
            rec.fit_target = j["fit"].at("target").get<double>();
        }
        if (j.contains("lambda_nondecreasing")) {
            rec.has_lambda_flag = true;
            rec.lambda_nondecreasing = j["lambda_nondecreasing"].get<bool>();
        }
        if (j.contains("bounded")) {
            rec.has_bounded = true;
            rec.bounded.q_max = j["bounded"].at("q_max").get<double>();
            rec.bounded.q_min = j["bounded"].at("q_min").get<double>();
            rec.bounded.ratio_limit = j["bounded"].at("ratio_limit").get<double>();
            rec.bounded.top_increasing = j["bounded"].at("top_increasing").get<bool>();
        }
        if (j.contains("bound_ok")) {
            rec.has_datum_bound = true;
            rec.datum_bound_ok = j["bound_ok"].get<bool>();
        }
        if (j.contains("oracle")) {
            rec.has_oracle = true;
            rec.oracle.n = j["oracle"].at("n").get<int>();
            rec.oracle.trials = j["oracle"].at("trials").get<int>();
            rec.oracle.max_rel_error = j["oracle"].at("max_rel_error").get<double>();
        }
        return rec;
    } catch (const json::exception& e) {
        throw ContractError(std::string("parse_record: malformed record: ") + e.what());
    }
}

bool operator==(const RunRecord& a, const RunRecord& b) {
    return record_json(a) == record_json(b);
}

bool operator!=(const RunRecord& a, const RunRecord& b) { return !(a == b); }

std::string render_csv(const RunRecord& rec) {
    std::string out = "nu,t,log_E,log_E0,lambda_rate\n";
    for (const NuRun& r : rec.runs) {
        for (size_t k = 0; k < r.report.times.size(); ++k) {
            const double t = r.report.times[k];
            const double le = r.report.log_E[k];
            const double rate = t > 0.0 ? (le - r.log_E0) / t : 0.0;
            out += fmt12(r.nu) + ',' + fmt12(t) + ',' + fmt12(le) + ',' + fmt12(r.log_E0) + ',' +
                   fmt12(rate) + '\n';
        }
    }
    for (const DatumDecayRun& r : rec.datum_runs)
        out += fmt12(r.nu) + ",0," + fmt12(r.E0_log) + ',' + fmt12(r.E0_log) + ",0\n";
    return out;
}

std::string render_rates_svg(const RunRecord& rec) {
    Series sr;
    std::string ylabel = "log Lambda";
    if (!rec.datum_runs.empty()) {
        ylabel = "log(-log E0)";
        sr.label = "-log E0";
        for (const DatumDecayRun& r : rec.datum_runs)
            if (r.E0_log < 0.0) sr.pts.emplace_back(std::log(r.nu), std::log(-r.E0_log));
    } else {
        sr.label = "Lambda";
        for (const NuRun& r : rec.runs)
            if (r.lambda_rate > 0.0) sr.pts.emplace_back(std::log(r.nu), std::log(r.lambda_rate));
    }
    std::string annotation;
    if (rec.has_fit)
        annotation = "slope " + fmt6(rec.fit.slope) + " (target " + fmt6(rec.fit_target) + ")";
    else if (rec.has_bounded && rec.bounded.q_min > 0.0)
        annotation = "Q max/min " + fmt6(rec.bounded.q_max / rec.bounded.q_min) + " (limit " +
                     fmt6(rec.bounded.ratio_limit) + ")";
    return svg_plot(rec.experiment + ": rate power law", "log nu", ylabel, {sr},
                    /*markers=*/true, annotation, rec.has_fit ? &rec.fit : nullptr);
}

std::string render_energy_svg(const RunRecord& rec) {
    std::vector<Series> series;
    for (const NuRun& r : rec.runs) {
        Series sr;
        sr.label = "nu=" + fmt6(r.nu);
        for (size_t k = 0; k < r.report.times.size(); ++k)
            if (std::isfinite(r.report.log_E[k]))
                sr.pts.emplace_back(r.report.times[k], r.report.log_E[k]);
        series.push_back(std::move(sr));
    }
    return svg_plot(rec.experiment + ": energy trajectories", "t", "log E", series,
                    /*markers=*/false, "", nullptr);
}

RunRecord run_experiment(const ExperimentConfig& cfg, const std::string& partial_dir,
                         const RunLogger& log) {
    RunRecord rec;
    rec.experiment = experiment_name(cfg.experiment);
    rec.config = canonical_config(cfg);
    rec.config_hash = git_blob_sha1(rec.config.dump());

    if (!partial_dir.empty()) fs::create_directories(partial_dir);
    const auto note = [&](const std::string& line) {
        if (log) log(line);
    };
    const auto persist_run = [&](const NuRun& r) {
        if (!partial_dir.empty())
            write_atomic(fs::path(partial_dir) / ("nu_" + fmt12(r.nu) + ".json"),
                         run_json(r).dump() + "\n");
        note("nu = " + fmt12(r.nu) + "  n = " + std::to_string(r.n) +
             "  Lambda = " + fmt12(r.lambda_rate));
    };
    const auto persist_datum = [&](const DatumDecayRun& r) {
        if (!partial_dir.empty())
            write_atomic(fs::path(partial_dir) / ("nu_" + fmt12(r.nu) + ".json"),
                         datum_json(r).dump() + "\n");
        note("nu = " + fmt12(r.nu) + "  log E0 = " + fmt12(r.E0_log));
    };

    switch (cfg.experiment) {
    case Experiment::threshold: {
        rec.threshold = xi_threshold(cfg.op);
        rec.has_threshold = true;
        rec.verdict = "PASS";
        note("xi = " + fmt12(rec.threshold.xi) + " (" + class_name(rec.threshold.cls) + ")");
        break;
    }
    case Experiment::simulate: {
        NuRun r = packet_run(cfg.op, cfg.nus.front(), cfg.tmpl, cfg.record_count);
        persist_run(r);
        rec.runs.push_back(std::move(r));
        rec.verdict = "PASS";
        break;
    }
    case Experiment::growth: {
        GrowthResult res =
            growth_experiment(cfg.op, cfg.nus, cfg.tmpl, cfg.record_count, persist_run);
        rec.runs = std::move(res.runs);
        rec.has_threshold = true;
        rec.threshold = res.threshold;
        rec.has_fit = true;
        rec.fit = res.fit;
        rec.fit_target = res.threshold.xi;
        rec.has_lambda_flag = true;
        rec.lambda_nondecreasing = res.lambda_nondecreasing;
        rec.verdict =
            std::abs(rec.fit.slope - rec.fit_target) <= cfg.slope_tolerance ? "PASS" : "FAIL";
        note("slope = " + fmt12(rec.fit.slope) + " vs xi = " + fmt12(rec.fit_target));
        break;
    }
    case Experiment::bounded: {
        BoundednessResult res = boundedness_experiment(cfg.op, cfg.nus, cfg.tmpl,
                                                       cfg.ratio_limit, cfg.record_count,
                                                       persist_run);
        rec.runs = std::move(res.runs);
        rec.has_threshold = true;
        rec.threshold = xi_threshold(cfg.op);
        rec.has_bounded = true;
        rec.bounded =
            BoundedStats{res.q_max, res.q_min, res.ratio_limit, res.top_increasing};
        rec.verdict = res.pass ? "PASS" : "FAIL";
        note("Q in [" + fmt12(res.q_min) + ", " + fmt12(res.q_max) + "]");
        break;
    }
    case Experiment::datum_decay: {
        DatumDecayResult res = datum_decay_experiment(cfg.nus, cfg.tmpl, persist_datum);
        rec.datum_runs = std::move(res.runs);
        rec.has_fit = true;
        rec.fit = res.fit;
        rec.fit_target = 1.0 / cfg.tmpl.theta;
        rec.has_datum_bound = true;
        rec.datum_bound_ok = res.bound_ok;
        const bool slope_ok = std::abs(rec.fit.slope - rec.fit_target) <= cfg.slope_tolerance;
        rec.verdict = (slope_ok && res.bound_ok) ? "PASS" : "FAIL";
        note("slope = " + fmt12(rec.fit.slope) + " vs 1/theta = " + fmt12(rec.fit_target));
        break;
    }
    case Experiment::oracle_check: {
        rec.oracle = check_oracles(cfg.oracle_n, cfg.oracle_trials, cfg.seed);
        rec.has_oracle = true;
        rec.verdict = rec.oracle.max_rel_error <= kOracleTolerance ? "PASS" : "FAIL";
        note("max relative error = " + fmt12(rec.oracle.max_rel_error));
        break;
    }
    }
    return rec;
}

std::string emit_outputs(const RunRecord& rec, const std::string& out_root) {
    if (rec.config_hash.size() < 12)
        throw ContractError("emit_outputs: record carries no config hash");
    const fs::path dir = fs::path(out_root) / rec.config_hash.substr(0, 12);
    fs::create_directories(dir);
    write_atomic(dir / "record.json", record_json(rec));
    write_atomic(dir / "data.csv", render_csv(rec));
    write_atomic(dir / "rates.svg", render_rates_svg(rec));
    write_atomic(dir / "energy.svg", render_energy_svg(rec));
    return dir.string();
}

std::string resolve_out_dir(const char* env_value, const std::string& cli_value,
                            const std::string& config_value) {
    if (env_value != nullptr && *env_value != '\0') return env_value;
    if (!cli_value.empty()) return cli_value;
    if (!config_value.empty()) return config_value;
    return "out";
}

} // namespace pevo
