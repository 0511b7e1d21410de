#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "epcag/ap_solver.hpp"
#include "epcag/dichotomy.hpp"
#include "epcag/errors.hpp"
#include "epcag/grid_solution.hpp"
#include "epcag/ivp.hpp"
#include "epcag/logistic.hpp"
#include "epcag/problem.hpp"
#include "epcag/sequence_diagnostics.hpp"
#include "epcag/switching_sequence.hpp"
#include "epcag/trig_polynomial.hpp"

namespace epcag::io {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kProblemSchema = "epcag-problem/1";
inline constexpr const char* kReportSchema = "epcag-report/1";

// --- Strict traversal -------------------------------------------------------
// Every lookup carries a JSON-pointer-style path so a rejected document names
// the offending key exactly.

namespace detail {

inline std::string join(const std::string& path, const std::string& key) {
    return path + "/" + key;
}

inline void expect_object(const ordered_json& j, const std::string& path) {
    if (!j.is_object()) throw ValidationError(path, "object expected");
}

inline void check_keys(const ordered_json& j, const std::string& path,
                       const std::set<std::string>& required,
                       const std::set<std::string>& optional) {
    expect_object(j, path);
    for (const auto& item : j.items()) {
        if (!required.count(item.key()) && !optional.count(item.key()))
            throw ValidationError(join(path, item.key()), "unknown key");
    }
    for (const auto& key : required)
        if (!j.contains(key)) throw ValidationError(join(path, key), "missing key");
}

inline double as_number(const ordered_json& j, const std::string& path) {
    if (!j.is_number()) throw ValidationError(path, "number expected");
    return j.get<double>();
}

inline long as_integer(const ordered_json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ValidationError(path, "integer expected");
    return j.get<long>();
}

inline std::string as_string(const ordered_json& j, const std::string& path) {
    if (!j.is_string()) throw ValidationError(path, "string expected");
    return j.get<std::string>();
}

} // namespace detail

/// Rejects any key outside required + optional and any missing required key,
/// reporting the exact pointer path.
inline void require_keys(const ordered_json& j, const std::string& path,
                         const std::set<std::string>& required,
                         const std::set<std::string>& optional) {
    detail::check_keys(j, path, required, optional);
}

// --- Matrices and vectors ---------------------------------------------------

/// Accepts a plain number (1 x 1), a flat numeric array (column vector),
/// or an array of equally long rows.
inline Eigen::MatrixXd parse_matrix(const ordered_json& j, const std::string& path) {
    if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
    if (!j.is_array() || j.empty()) throw ValidationError(path, "matrix rows expected");
    if (j[0].is_number()) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), 1);
        for (std::size_t k = 0; k < j.size(); ++k)
            m(static_cast<Eigen::Index>(k), 0) =
                detail::as_number(j[k], detail::join(path, std::to_string(k)));
        return m;
    }
    const std::size_t rows = j.size();
    if (!j[0].is_array() || j[0].empty())
        throw ValidationError(detail::join(path, "0"), "row array expected");
    const std::size_t cols = j[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string rp = detail::join(path, std::to_string(r));
        if (!j[r].is_array() || j[r].size() != cols)
            throw ValidationError(rp, "rows must have equal length");
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                detail::as_number(j[r][c], detail::join(rp, std::to_string(c)));
    }
    return m;
}

inline Eigen::VectorXd parse_vector(const ordered_json& j, const std::string& path) {
    if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
    if (!j.is_array() || j.empty()) throw ValidationError(path, "numeric array expected");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k)
        v(static_cast<Eigen::Index>(k)) =
            detail::as_number(j[k], detail::join(path, std::to_string(k)));
    return v;
}

inline ordered_json matrix_json(const Eigen::MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline ordered_json vector_json(const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
}

// --- Trig polynomials -------------------------------------------------------

inline TrigPolynomial parse_trig(const ordered_json& j, const std::string& path) {
    detail::check_keys(j, path, {"const"}, {"terms"});
    TrigPolynomial t(parse_matrix(j["const"], detail::join(path, "const")));
    if (j.contains("terms")) {
        const auto& terms = j["terms"];
        const std::string tp = detail::join(path, "terms");
        if (!terms.is_array()) throw ValidationError(tp, "array expected");
        for (std::size_t k = 0; k < terms.size(); ++k) {
            const std::string ep = detail::join(tp, std::to_string(k));
            detail::check_keys(terms[k], ep, {"omega"}, {"cos", "sin"});
            const double omega = detail::as_number(terms[k]["omega"], detail::join(ep, "omega"));
            if (omega <= 0.0) throw ValidationError(detail::join(ep, "omega"), "must be > 0");
            Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(t.rows(), t.cols());
            Eigen::MatrixXd c = terms[k].contains("cos")
                                    ? parse_matrix(terms[k]["cos"], detail::join(ep, "cos"))
                                    : zero;
            Eigen::MatrixXd s = terms[k].contains("sin")
                                    ? parse_matrix(terms[k]["sin"], detail::join(ep, "sin"))
                                    : zero;
            if (c.rows() != t.rows() || c.cols() != t.cols() || s.rows() != t.rows() ||
                s.cols() != t.cols())
                throw ValidationError(ep, "term shape differs from the constant part");
            t.add_term(omega, std::move(c), std::move(s));
        }
    }
    return t;
}

inline ordered_json trig_json(const TrigPolynomial& t) {
    ordered_json j;
    j["const"] = matrix_json(t.constant_term());
    if (!t.terms().empty()) {
        ordered_json terms = ordered_json::array();
        for (const auto& term : t.terms()) {
            ordered_json e;
            e["omega"] = term.omega;
            e["cos"] = matrix_json(term.cos_coeff);
            e["sin"] = matrix_json(term.sin_coeff);
            terms.push_back(std::move(e));
        }
        j["terms"] = std::move(terms);
    }
    return j;
}

// --- Switching sequences ----------------------------------------------------

inline SwitchingSequence parse_theta(const ordered_json& j, const std::string& path) {
    detail::expect_object(j, path);
    if (!j.contains("kind")) throw ValidationError(detail::join(path, "kind"), "missing key");
    const std::string kind = detail::as_string(j["kind"], detail::join(path, "kind"));
    if (kind == "uniform") {
        detail::check_keys(j, path, {"kind", "gap"}, {"offset"});
        const double gap = detail::as_number(j["gap"], detail::join(path, "gap"));
        if (gap <= 0.0) throw ValidationError(detail::join(path, "gap"), "must be > 0");
        const double offset =
            j.contains("offset") ? detail::as_number(j["offset"], detail::join(path, "offset"))
                                 : 0.0;
        return SwitchingSequence::uniform(gap, offset);
    }
    if (kind == "perturbed") {
        detail::check_keys(j, path, {"kind", "amplitude", "omega"}, {});
        const double amp =
            detail::as_number(j["amplitude"], detail::join(path, "amplitude"));
        const double omega = detail::as_number(j["omega"], detail::join(path, "omega"));
        return SwitchingSequence::perturbed(amp, omega);
    }
    if (kind == "explicit") {
        detail::check_keys(j, path, {"kind", "base_index", "values"}, {});
        const long base = detail::as_integer(j["base_index"], detail::join(path, "base_index"));
        const auto& vals = j["values"];
        const std::string vp = detail::join(path, "values");
        if (!vals.is_array() || vals.size() < 2)
            throw ValidationError(vp, "at least two values expected");
        std::vector<double> values;
        values.reserve(vals.size());
        for (std::size_t k = 0; k < vals.size(); ++k)
            values.push_back(detail::as_number(vals[k], detail::join(vp, std::to_string(k))));
        return SwitchingSequence::explicit_window(base, std::move(values));
    }
    throw ValidationError(detail::join(path, "kind"),
                          "one of uniform / perturbed / explicit expected");
}

inline ordered_json theta_json(const SwitchingSequence& s) {
    ordered_json j;
    switch (s.kind()) {
    case SwitchingSequence::Kind::uniform:
        j["kind"] = "uniform";
        j["gap"] = s.descriptor_gap();
        j["offset"] = s.descriptor_offset();
        break;
    case SwitchingSequence::Kind::perturbed:
        j["kind"] = "perturbed";
        j["amplitude"] = s.descriptor_amplitude();
        j["omega"] = s.descriptor_omega();
        break;
    case SwitchingSequence::Kind::explicit_window: {
        j["kind"] = "explicit";
        j["base_index"] = s.lo_index();
        ordered_json vals = ordered_json::array();
        for (double v : s.window(s.lo_index(), s.hi_index())) vals.push_back(v);
        j["values"] = std::move(vals);
        break;
    }
    }
    return j;
}

// --- Nonlinearity catalog ----------------------------------------------------

inline InnerKind parse_inner_kind(const ordered_json& j, const std::string& path) {
    const std::string s = detail::as_string(j, path);
    if (s == "linear") return InnerKind::linear;
    if (s == "saturated") return InnerKind::saturated;
    if (s == "product") return InnerKind::product;
    throw ValidationError(path, "one of linear / saturated / product expected");
}

inline const char* inner_kind_name(InnerKind k) {
    switch (k) {
    case InnerKind::linear: return "linear";
    case InnerKind::saturated: return "saturated";
    case InnerKind::product: return "product";
    }
    return "linear";
}

inline Nonlinearity parse_f(const ordered_json& j, const std::string& path) {
    detail::expect_object(j, path);
    if (!j.contains("kind")) throw ValidationError(detail::join(path, "kind"), "missing key");
    const std::string kind = detail::as_string(j["kind"], detail::join(path, "kind"));
    const std::string cp = detail::join(path, "coefficients");
    if (kind == "affine" || kind == "saturated") {
        detail::check_keys(j, path, {"kind", "coefficients"}, {"forcing"});
        const auto& cj = j["coefficients"];
        if (!cj.is_array() || cj.empty()) throw ValidationError(cp, "one matrix per argument");
        std::vector<Eigen::MatrixXd> coeffs;
        coeffs.reserve(cj.size());
        for (std::size_t k = 0; k < cj.size(); ++k)
            coeffs.push_back(parse_matrix(cj[k], detail::join(cp, std::to_string(k))));
        TrigPolynomial g =
            j.contains("forcing")
                ? parse_trig(j["forcing"], detail::join(path, "forcing"))
                : TrigPolynomial(Eigen::MatrixXd::Zero(coeffs.front().rows(), 1));
        if (g.cols() != 1)
            throw ValidationError(detail::join(path, "forcing"), "column vector required");
        return kind == "affine" ? Nonlinearity::affine(std::move(coeffs), std::move(g))
                                : Nonlinearity::saturated(std::move(coeffs), std::move(g));
    }
    if (kind == "product_logistic") {
        detail::check_keys(j, path, {"kind", "coefficients"}, {"scale", "inner"});
        const auto& cj = j["coefficients"];
        if (!cj.is_array() || cj.empty()) throw ValidationError(cp, "one number per argument");
        std::vector<double> coeffs;
        coeffs.reserve(cj.size());
        for (std::size_t k = 0; k < cj.size(); ++k)
            coeffs.push_back(detail::as_number(cj[k], detail::join(cp, std::to_string(k))));
        const double scale =
            j.contains("scale") ? detail::as_number(j["scale"], detail::join(path, "scale"))
                                : -1.0;
        const InnerKind inner = j.contains("inner")
                                    ? parse_inner_kind(j["inner"], detail::join(path, "inner"))
                                    : InnerKind::linear;
        return Nonlinearity::product_logistic(coeffs, scale, inner);
    }
    throw ValidationError(detail::join(path, "kind"),
                          "one of affine / saturated / product_logistic expected");
}

inline ordered_json f_json(const Nonlinearity& f) {
    ordered_json j;
    switch (f.kind()) {
    case NonlinearityKind::affine: j["kind"] = "affine"; break;
    case NonlinearityKind::saturated: j["kind"] = "saturated"; break;
    case NonlinearityKind::product_logistic: j["kind"] = "product_logistic"; break;
    }
    ordered_json coeffs = ordered_json::array();
    if (f.kind() == NonlinearityKind::product_logistic) {
        for (const auto& c : f.coefficients()) coeffs.push_back(c(0, 0));
        j["coefficients"] = std::move(coeffs);
        j["scale"] = f.scale();
        j["inner"] = inner_kind_name(f.inner_kind());
    } else {
        for (const auto& c : f.coefficients()) coeffs.push_back(matrix_json(c));
        j["coefficients"] = std::move(coeffs);
        j["forcing"] = trig_json(f.forcing());
    }
    return j;
}

// --- Dichotomy --------------------------------------------------------------

inline DichotomyData parse_dichotomy(const ordered_json& j, const std::string& path) {
    detail::check_keys(j, path, {"P"}, {"K1", "sigma1", "K2", "sigma2", "one_sided"});
    DichotomyData d;
    d.P = parse_matrix(j["P"], detail::join(path, "P"));
    if (d.P.rows() != d.P.cols())
        throw ValidationError(detail::join(path, "P"), "square matrix required");
    auto num = [&](const char* key, double fallback) {
        return j.contains(key) ? detail::as_number(j[key], detail::join(path, key)) : fallback;
    };
    d.K1 = num("K1", 0.0);
    d.sigma1 = num("sigma1", 1.0);
    d.K2 = num("K2", 0.0);
    d.sigma2 = num("sigma2", 1.0);
    if (d.K1 < 0.0 || d.K2 < 0.0)
        throw ValidationError(path, "envelope amplitudes must be >= 0");
    if (d.sigma1 <= 0.0 || d.sigma2 <= 0.0)
        throw ValidationError(path, "decay rates must be > 0");
    if (j.contains("one_sided")) {
        const std::string op = detail::join(path, "one_sided");
        detail::check_keys(j["one_sided"], op, {"K", "sigma"}, {});
        const double k = detail::as_number(j["one_sided"]["K"], detail::join(op, "K"));
        const double s = detail::as_number(j["one_sided"]["sigma"], detail::join(op, "sigma"));
        if (k < 1.0) throw ValidationError(detail::join(op, "K"), "must be >= 1");
        if (s <= 0.0) throw ValidationError(detail::join(op, "sigma"), "must be > 0");
        d.one_sided = {k, s};
    }
    return d;
}

inline ordered_json dichotomy_json(const DichotomyData& d) {
    ordered_json j;
    j["P"] = matrix_json(d.P);
    j["K1"] = d.K1;
    j["sigma1"] = d.sigma1;
    j["K2"] = d.K2;
    j["sigma2"] = d.sigma2;
    if (d.one_sided) {
        j["one_sided"]["K"] = d.one_sided->first;
        j["one_sided"]["sigma"] = d.one_sided->second;
    }
    return j;
}

// --- Initial data -----------------------------------------------------------

inline InitialData parse_initial(const ordered_json& j, const std::string& path) {
    detail::check_keys(j, path, {"history"}, {"start_index"});
    const long start = j.contains("start_index")
                           ? detail::as_integer(j["start_index"],
                                                detail::join(path, "start_index"))
                           : 0;
    const auto& hj = j["history"];
    const std::string hp = detail::join(path, "history");
    if (!hj.is_array() || hj.empty())
        throw ValidationError(hp, "one state per node, oldest first");
    std::vector<Eigen::VectorXd> history;
    history.reserve(hj.size());
    for (std::size_t k = 0; k < hj.size(); ++k)
        history.push_back(parse_vector(hj[k], detail::join(hp, std::to_string(k))));
    return InitialData(start, std::move(history));
}

inline ordered_json initial_json(const InitialData& init) {
    ordered_json j;
    j["start_index"] = init.start_index();
    ordered_json h = ordered_json::array();
    for (long i = init.lo(); i <= init.start_index(); ++i) h.push_back(vector_json(init.at(i)));
    j["history"] = std::move(h);
    return j;
}

// --- Whole problems ----------------------------------------------------------

inline std::vector<long> parse_deviations(const ordered_json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ValidationError(path, "integer array expected");
    std::vector<long> devs;
    devs.reserve(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) {
        const long p = detail::as_integer(j[k], detail::join(path, std::to_string(k)));
        if (p < 0) throw ValidationError(detail::join(path, std::to_string(k)), "must be >= 0");
        devs.push_back(p);
    }
    return devs;
}

inline Problem parse_problem(const ordered_json& root) {
    for (const char* key : {"A", "f", "deviations", "theta"})
        if (!root.contains(key)) throw ValidationError(std::string("/") + key, "missing key");
    TrigPolynomial a = parse_trig(root["A"], "/A");
    Nonlinearity f = parse_f(root["f"], "/f");
    std::vector<long> devs = parse_deviations(root["deviations"], "/deviations");
    SwitchingSequence theta = parse_theta(root["theta"], "/theta");
    std::optional<DichotomyData> dich;
    if (root.contains("dichotomy")) dich = parse_dichotomy(root["dichotomy"], "/dichotomy");
    return Problem(std::move(a), std::move(f), std::move(devs), std::move(theta),
                   std::move(dich));
}

inline LogisticProblem parse_logistic(const ordered_json& j, const std::string& path) {
    detail::check_keys(j, path, {"a", "f", "H", "deviations"}, {"N0"});
    TrigPolynomial a = parse_trig(j["a"], detail::join(path, "a"));
    const std::string fp = detail::join(path, "f");
    detail::check_keys(j["f"], fp, {"coefficients"}, {"inner"});
    const auto& cj = j["f"]["coefficients"];
    const std::string cp = detail::join(fp, "coefficients");
    if (!cj.is_array() || cj.empty()) throw ValidationError(cp, "one number per argument");
    std::vector<double> coeffs;
    coeffs.reserve(cj.size());
    for (std::size_t k = 0; k < cj.size(); ++k)
        coeffs.push_back(detail::as_number(cj[k], detail::join(cp, std::to_string(k))));
    const InnerKind inner = j["f"].contains("inner")
                                ? parse_inner_kind(j["f"]["inner"], detail::join(fp, "inner"))
                                : InnerKind::linear;
    const double box = detail::as_number(j["H"], detail::join(path, "H"));
    std::vector<long> devs = parse_deviations(j["deviations"], detail::join(path, "deviations"));
    SwitchingSequence theta = SwitchingSequence::uniform(1.0);
    return LogisticProblem(std::move(a), std::move(coeffs), inner, std::move(devs), box,
                           std::move(theta));
}

inline ordered_json problem_json(const Problem& p) {
    ordered_json j;
    j["schema"] = kProblemSchema;
    j["A"] = trig_json(p.A);
    j["f"] = f_json(p.f);
    ordered_json devs = ordered_json::array();
    for (long d : p.deviations) devs.push_back(d);
    j["deviations"] = std::move(devs);
    j["theta"] = theta_json(p.theta);
    if (p.dichotomy) j["dichotomy"] = dichotomy_json(*p.dichotomy);
    return j;
}

inline ordered_json logistic_json(const LogisticProblem& lp) {
    ordered_json j;
    j["a"] = trig_json(lp.a);
    ordered_json coeffs = ordered_json::array();
    for (const auto& c : lp.f.coefficients()) coeffs.push_back(c(0, 0));
    j["f"]["coefficients"] = std::move(coeffs);
    j["f"]["inner"] = inner_kind_name(lp.f.inner_kind());
    j["H"] = lp.H;
    ordered_json devs = ordered_json::array();
    for (long d : lp.deviations) devs.push_back(d);
    j["deviations"] = std::move(devs);
    return j;
}

// --- Report fragments ---------------------------------------------------------

inline ordered_json doubles_json(const std::vector<double>& v) {
    ordered_json a = ordered_json::array();
    for (double x : v) a.push_back(x);
    return a;
}

inline ordered_json solve_report_json(const SolveReport& r) {
    ordered_json j;
    j["dichotomy"] = dichotomy_json(r.dichotomy);
    j["margin"] = r.margin;
    j["iterations"] = r.iterations;
    j["update_norms"] = doubles_json(r.update_norms);
    j["ratios"] = doubles_json(r.ratios);
    j["final_update"] = r.final_update;
    j["fixed_point_gap"] = r.fixed_point_gap;
    j["residual"] = r.residual;
    j["tail_bound"] = r.tail_bound;
    j["t_cut"] = r.t_cut;
    j["sup_core"] = r.sup_core;
    j["sup_forcing"] = r.sup_forcing;
    j["worst_condition"] = r.worst_condition;
    j["node_window"] = {r.i_lo, r.i_hi};
    return j;
}

inline ordered_json uniqueness_json(const UniquenessReport& r) {
    ordered_json j;
    j["M"] = r.M;
    j["theta_bar"] = r.theta_bar;
    j["small_gain"] = r.product;
    j["pass"] = r.pass;
    return j;
}

inline ordered_json stability_json(const StabilityReport& r) {
    ordered_json j;
    j["K"] = r.K;
    j["sigma"] = r.sigma;
    j["a"] = r.a;
    j["delta"] = r.delta;
    j["theta_bar"] = r.theta_bar;
    j["tau"] = r.tau;
    j["zeta"] = r.zeta;
    j["L"] = r.L;
    j["M"] = r.M;
    j["small_gain"] = r.small_gain;
    j["conditions"] = {{"C6", r.c6}, {"C7", r.c7}, {"C8", r.c8}, {"C9", r.c9}};
    j["trials"] = r.trials;
    if (r.trials > 0) {
        j["trial_margins"] = doubles_json(r.trial_margins);
        j["worst_margin"] = r.worst_margin;
        j["worst_trial"] = r.worst_trial;
        j["envelope_ok"] = r.envelope_ok;
    }
    return j;
}

inline ordered_json existence_json(const ExistenceReport& r) {
    ordered_json j;
    j["mean"] = r.mean;
    j["K"] = r.K;
    j["sigma"] = r.sigma;
    j["kernel_fitted"] = r.kernel_fitted;
    j["mu"] = r.mu;
    j["lipschitz"] = r.lipschitz;
    j["H"] = r.H;
    j["amplitude"] = r.amplitude;
    j["contraction"] = r.contraction;
    j["amplitude_ok"] = r.amplitude_ok;
    j["contraction_ok"] = r.contraction_ok;
    j["pass"] = r.pass;
    return j;
}

inline ordered_json logistic_run_json(const LogisticRun& r) {
    ordered_json j;
    j["start"] = r.start;
    j["iterations"] = r.iterations;
    j["updates"] = doubles_json(r.updates);
    j["ratios"] = doubles_json(r.ratios);
    j["final_update"] = r.final_update;
    j["sup"] = r.sup;
    j["monotone_nonincreasing"] = r.monotone_nonincreasing;
    return j;
}

inline ordered_json logistic_report_json(const LogisticReport& r) {
    ordered_json j;
    j["conditions"] = existence_json(r.conditions);
    j["from_zero"] = logistic_run_json(r.from_zero);
    j["from_top"] = logistic_run_json(r.from_top);
    j["zero_solution"] = r.zero_solution;
    j["start_gap"] = r.start_gap;
    j["fixed_point_gap"] = r.fixed_point_gap;
    j["residual"] = r.residual;
    j["tail_bound"] = r.tail_bound;
    j["t_cut"] = r.t_cut;
    j["node_window"] = {r.i_lo, r.i_hi};
    return j;
}

inline ordered_json gap_stats_json(const GapStats& g) {
    ordered_json j;
    j["min_gap"] = g.min_gap;
    j["max_gap"] = g.max_gap;
    j["max_points"] = g.max_points;
    j["l0"] = g.l0;
    return j;
}

inline ordered_json almost_periods_json(const AlmostPeriodReport& r) {
    ordered_json j;
    j["epsilon"] = r.epsilon;
    j["periods"] = doubles_json(r.periods);
    j["max_gap"] = r.max_gap;
    j["relatively_dense"] = r.relatively_dense;
    j["density_bound"] = r.density_bound;
    j["range"] = {r.range_lo, r.range_hi};
    return j;
}

inline ordered_json match_witness_json(const MatchWitness& w) {
    ordered_json j;
    j["equivalent"] = w.equivalent;
    j["epsilon"] = w.epsilon;
    j["max_multiplicity"] = w.max_multiplicity;
    j["max_deviation"] = w.max_deviation;
    j["pairs"] = w.pairs.size();
    return j;
}

// --- CSV ----------------------------------------------------------------------

namespace detail {

inline void append_number(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    out += buf;
}

} // namespace detail

/// Dense samples restricted to the core window, one row per sample:
/// t, x_1..x_n, interval_index. A switching time appears once, attributed to
/// the interval it opens (the interval map is right-continuous); only the
/// final emitted interval keeps its right endpoint.
inline void write_solution_csv(std::ostream& os, const GridSolution& sol) {
    std::string line = "t";
    for (int k = 1; k <= sol.dim(); ++k) line += ",x_" + std::to_string(k);
    line += ",interval_index\n";
    os << line;
    const auto& seq = sol.sequence();
    auto in_range = [&](long i) {
        return i >= sol.node_lo() && i < sol.node_hi() && sol.has_dense(i) &&
               seq.at(i + 1) >= sol.core_lo() && seq.at(i) <= sol.core_hi();
    };
    double last_t = -kInf;
    for (long i = sol.node_lo(); i < sol.node_hi(); ++i) {
        if (!in_range(i)) continue;
        const auto& d = sol.dense(i);
        const bool keep_end = !in_range(i + 1);
        for (int k = 0; k < sol.samples_per_interval(); ++k) {
            if (k + 1 == sol.samples_per_interval() && !keep_end) break;
            const double t = sol.sample_time(i, k);
            if (t < sol.core_lo() || t > sol.core_hi()) continue;
            if (t <= last_t) continue;
            last_t = t;
            line.clear();
            detail::append_number(line, t);
            const auto& v = d[static_cast<std::size_t>(k)];
            for (Eigen::Index c = 0; c < v.size(); ++c) {
                line += ',';
                detail::append_number(line, v(c));
            }
            line += ',' + std::to_string(i) + '\n';
            os << line;
        }
    }
}

struct CsvSolution {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
    std::vector<long> interval;
};

/// Reads back the writer's layout: header, then t, x_1..x_n, interval_index.
inline CsvSolution read_solution_csv(std::istream& is) {
    CsvSolution out;
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("csv", "empty file");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> fields;
        const char* p = line.c_str();
        char* end = nullptr;
        for (;;) {
            const double v = std::strtod(p, &end);
            if (end == p) throw ValidationError("csv", "malformed row: " + line);
            fields.push_back(v);
            if (*end != ',') break;
            p = end + 1;
        }
        if (fields.size() < 3) throw ValidationError("csv", "malformed row: " + line);
        out.t.push_back(fields.front());
        Eigen::VectorXd v(static_cast<Eigen::Index>(fields.size() - 2));
        for (std::size_t k = 1; k + 1 < fields.size(); ++k)
            v(static_cast<Eigen::Index>(k - 1)) = fields[k];
        out.x.push_back(std::move(v));
        out.interval.push_back(static_cast<long>(fields.back()));
    }
    return out;
}

} // namespace epcag::io
