#ifndef MIRFS_IO_HPP
#define MIRFS_IO_HPP

/** @file
 * File formats: model files (JSON), observation data and
 * simulated paths (CSV), and report serialization (JSON / CSV).
 *
 * Model file:
 *
 *     {
 *       "family": "gaussian_hmm",          // discrete_hmm | gaussian_hmm | switching_ar1
 *       "D": 2, "q": 2, "d": 1,
 *       "parameters": [
 *         {"name": "mu1", "target": "means[0]", "lower": -10, "upper": 10},
 *         {"name": "mu2", "target": "means[1]", "lower": -10, "upper": null}
 *       ],
 *       "family_parameters": {
 *         "transition": [[0.9, 0.1], [0.2, 0.8]],
 *         "means": [-1.0, 1.0],
 *         "sigmas": [1.0, 1.0]
 *       },
 *       "initial_law": "stationary"         // or {"fixed": [0.5, 0.5]}
 *     }
 *
 * A null bound is infinite. Unknown keys anywhere are rejected.
 */

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "builtin_models.hpp"
#include "error.hpp"
#include "estimation.hpp"
#include "likelihood.hpp"
#include "model.hpp"
#include "simulation.hpp"

namespace mirfs {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const Json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown field '" + key + "' in " + where);
}

inline const Json& require(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing field '" + key + "' in " + where);
  return obj.at(key);
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ConfigError(what + " must be a non-empty array of arrays");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(what + " rows must all have the same length");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& v = row.at(static_cast<std::size_t>(c));
      if (!v.is_number()) throw ConfigError(what + " entries must be numbers");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

inline Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " entries must be numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline double bound_from_json(const Json& j, double infinite, const std::string& what) {
  if (j.is_null()) return infinite;
  if (!j.is_number()) throw ConfigError(what + " must be a number or null");
  return j.get<double>();
}

inline Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline Json bound_to_json(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// -- model file -------------------------------------------------------------

inline BuiltinSpec spec_from_json(const Json& j) {
  detail::reject_unknown_keys(j, {"family", "D", "q", "d", "parameters", "family_parameters",
                                  "initial_law"},
                              "model file");
  BuiltinSpec spec;
  spec.family = parse_family(detail::require(j, "family", "model file").get<std::string>());
  const auto n_states = detail::require(j, "D", "model file").get<std::size_t>();
  const auto q = detail::require(j, "q", "model file").get<std::size_t>();
  const auto d = detail::require(j, "d", "model file").get<std::size_t>();
  if (d != 1) throw ConfigError("built-in families have observation dimension d = 1");

  const Json& fp = detail::require(j, "family_parameters", "model file");
  std::set<std::string> allowed{"transition"};
  switch (spec.family) {
    case Family::discrete_hmm: allowed.insert("emission"); break;
    case Family::gaussian_hmm: allowed.insert({"means", "sigmas"}); break;
    case Family::switching_ar1: allowed.insert({"ar", "intercepts", "sigmas"}); break;
  }
  detail::reject_unknown_keys(fp, allowed, "family_parameters of " + family_name(spec.family));
  for (const auto& key : allowed)
    if (!fp.contains(key)) throw ConfigError("missing family parameter '" + key + "'");
  spec.transition = detail::matrix_from_json(fp.at("transition"), "transition");
  if (fp.contains("emission")) spec.emission = detail::matrix_from_json(fp.at("emission"), "emission");
  if (fp.contains("means")) spec.means = detail::vector_from_json(fp.at("means"), "means");
  if (fp.contains("sigmas")) spec.sigmas = detail::vector_from_json(fp.at("sigmas"), "sigmas");
  if (fp.contains("ar")) spec.ar = detail::vector_from_json(fp.at("ar"), "ar");
  if (fp.contains("intercepts"))
    spec.intercepts = detail::vector_from_json(fp.at("intercepts"), "intercepts");
  if (static_cast<std::size_t>(spec.transition.rows()) != n_states)
    throw ConfigError("D = " + std::to_string(n_states) + " does not match transition matrix");

  const Json& params = detail::require(j, "parameters", "model file");
  if (!params.is_array()) throw ConfigError("parameters must be an array");
  for (const auto& p : params) {
    detail::reject_unknown_keys(p, {"name", "target", "lower", "upper"}, "parameter entry");
    FreeParameter fp_entry;
    fp_entry.name = detail::require(p, "name", "parameter entry").get<std::string>();
    fp_entry.target = parse_slot(detail::require(p, "target", "parameter entry").get<std::string>());
    const double inf = std::numeric_limits<double>::infinity();
    fp_entry.bounds.lower = detail::bound_from_json(detail::require(p, "lower", "parameter entry"),
                                                    -inf, "lower");
    fp_entry.bounds.upper = detail::bound_from_json(detail::require(p, "upper", "parameter entry"),
                                                    inf, "upper");
    spec.parameters.push_back(std::move(fp_entry));
  }
  if (spec.parameters.size() != q)
    throw ConfigError("q = " + std::to_string(q) + " but " + std::to_string(spec.parameters.size()) +
                      " parameters are listed");

  if (j.contains("initial_law")) {
    const Json& law = j.at("initial_law");
    if (law.is_string()) {
      if (law.get<std::string>() != "stationary")
        throw ConfigError("initial_law must be \"stationary\" or {\"fixed\": [...]}");
    } else {
      detail::reject_unknown_keys(law, {"fixed"}, "initial_law");
      spec.initial_law.kind = InitialLaw::Kind::fixed;
      spec.initial_law.fixed = detail::vector_from_json(detail::require(law, "fixed", "initial_law"),
                                                        "initial_law.fixed");
    }
  }
  return spec;
}

inline Json spec_to_json(const BuiltinSpec& spec) {
  Json j;
  j["family"] = family_name(spec.family);
  j["D"] = spec.transition.rows();
  j["q"] = spec.parameters.size();
  j["d"] = 1;
  Json params = Json::array();
  for (const auto& p : spec.parameters)
    params.push_back({{"name", p.name},
                      {"target", slot_name(p.target)},
                      {"lower", detail::bound_to_json(p.bounds.lower)},
                      {"upper", detail::bound_to_json(p.bounds.upper)}});
  j["parameters"] = params;
  Json fp;
  fp["transition"] = detail::to_json(spec.transition);
  switch (spec.family) {
    case Family::discrete_hmm: fp["emission"] = detail::to_json(spec.emission); break;
    case Family::gaussian_hmm:
      fp["means"] = detail::to_json(spec.means);
      fp["sigmas"] = detail::to_json(spec.sigmas);
      break;
    case Family::switching_ar1:
      fp["ar"] = detail::to_json(spec.ar);
      fp["intercepts"] = detail::to_json(spec.intercepts);
      fp["sigmas"] = detail::to_json(spec.sigmas);
      break;
  }
  j["family_parameters"] = fp;
  if (spec.initial_law.kind == InitialLaw::Kind::fixed)
    j["initial_law"] = {{"fixed", detail::to_json(spec.initial_law.fixed)}};
  else
    j["initial_law"] = "stationary";
  return j;
}

inline std::shared_ptr<const BuiltinModel> load_model(const std::string& path) {
  Json j;
  try {
    j = Json::parse(detail::read_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
  try {
    return builtin_model(spec_from_json(j));
  } catch (const Json::exception& e) {
    throw ConfigError("invalid model file '" + path + "': " + e.what());
  }
}

// -- CSV data -------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

}  // namespace detail

/// Reads observations from CSV with header columns obs_1..obs_d. Columns
/// named `index` or `state` are ignored; anything else is an error.
inline ObservationSequence read_observations(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("data file is empty");
  const auto header = detail::split_csv_line(line);
  std::vector<int> obs_column(header.size(), -1);
  std::size_t d = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h == "index" || h == "state") continue;
    if (h.rfind("obs_", 0) != 0) throw ConfigError("unexpected data column '" + h + "'");
    const std::size_t k = std::stoul(h.substr(4));
    if (k < 1) throw ConfigError("observation columns are numbered from obs_1");
    obs_column[c] = static_cast<int>(k - 1);
    d = std::max(d, k);
  }
  if (d == 0) throw ConfigError("data file has no obs_ columns");
  ObservationSequence data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ConfigError("data line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    std::vector<double> v(d);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (obs_column[c] < 0) continue;
      char* end = nullptr;
      const double x = std::strtod(cells[c].c_str(), &end);
      if (cells[c].empty() || *end != '\0' || !std::isfinite(x))
        throw ConfigError("data line " + std::to_string(line_no) + ": cannot parse '" + cells[c] +
                          "'");
      v[static_cast<std::size_t>(obs_column[c])] = x;
    }
    data.emplace_back(std::move(v));
  }
  if (data.empty()) throw ConfigError("data file has no observations");
  return data;
}

inline ObservationSequence read_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  return read_observations(in);
}

/// CSV with columns index,state,obs_1..obs_d.
inline void write_path(std::ostream& out, const SimulatedPath& path) {
  const std::size_t d = path.observations.empty() ? 1 : path.observations.front().size();
  out << "index,state";
  for (std::size_t k = 1; k <= d; ++k) out << ",obs_" << k;
  out << "\n";
  for (std::size_t i = 0; i < path.observations.size(); ++i) {
    out << i << "," << path.states[i];
    for (double v : path.observations[i].value) out << "," << detail::fmt17(v);
    out << "\n";
  }
}

inline void write_observations(std::ostream& out, const ObservationSequence& data) {
  const std::size_t d = data.empty() ? 1 : data.front().size();
  for (std::size_t k = 1; k <= d; ++k) out << (k > 1 ? "," : "") << "obs_" << k;
  out << "\n";
  for (const auto& xi : data) {
    for (std::size_t k = 0; k < xi.size(); ++k) out << (k ? "," : "") << detail::fmt17(xi[k]);
    out << "\n";
  }
}

// -- reports ----------------------------------------------------------------------

inline Json to_json(const EvalReport& r) {
  Json j;
  j["loglik"] = r.loglik;
  j["n_obs"] = r.n_obs;
  j["order"] = r.order;
  if (r.order >= 1) j["score"] = detail::to_json(r.score);
  if (r.order >= 2) {
    j["hessian"] = detail::to_json(r.hessian);
    j["observed_info"] = detail::to_json(r.observed_info);
    j["hessian_asymmetry"] = r.hessian_asymmetry;
  }
  return j;
}

/// step,g0[,g1_a...][,g2_a_b for a <= b]; row for step 0 is the initial term.
inline void write_increments(std::ostream& out, const std::vector<IncrementRow>& rows,
                             unsigned order, std::size_t q) {
  out << "step,g0";
  if (order >= 1)
    for (std::size_t a = 1; a <= q; ++a) out << ",g1_" << a;
  if (order >= 2)
    for (std::size_t a = 1; a <= q; ++a)
      for (std::size_t b = a; b <= q; ++b) out << ",g2_" << a << "_" << b;
  out << "\n";
  for (const auto& row : rows) {
    out << row.step << "," << detail::fmt17(row.g0);
    if (order >= 1)
      for (Eigen::Index a = 0; a < row.g1.size(); ++a) out << "," << detail::fmt17(row.g1(a));
    if (order >= 2)
      for (Eigen::Index a = 0; a < row.g2.rows(); ++a)
        for (Eigen::Index b = a; b < row.g2.cols(); ++b) out << "," << detail::fmt17(row.g2(a, b));
    out << "\n";
  }
}

inline Json to_json(const FitResult& r) {
  Json j;
  j["parameter_names"] = r.theta_hat.names;
  j["theta_hat"] = detail::to_json(r.theta_hat.values);
  j["loglik"] = r.loglik;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["reason"] = r.reason;
  j["grad_norm"] = r.grad_norm;
  j["observed_info_at_mle"] = detail::to_json(r.observed_info_at_mle);
  j["std_errors"] = detail::to_json(r.std_errors);  // NaN serializes as null
  return j;
}

inline void write_trace(std::ostream& out, const FitResult& r) {
  out << "iteration,loglik,score_norm,newton_step";
  for (std::size_t a = 1; a <= r.theta_hat.size(); ++a) out << ",theta_" << a;
  out << "\n";
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    const auto& it = r.trace[k];
    out << k << "," << detail::fmt17(it.loglik) << "," << detail::fmt17(it.score_norm) << ","
        << (it.newton_step ? 1 : 0);
    for (Eigen::Index a = 0; a < it.theta.size(); ++a) out << "," << detail::fmt17(it.theta(a));
    out << "\n";
  }
}

inline Json to_json(const ErgodicReport& r) {
  Json j;
  j["seed"] = r.seed;
  j["replications"] = r.replications;
  j["parameter_names"] = r.theta_true.names;
  j["theta_true"] = detail::to_json(r.theta_true.values);
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json jr;
    jr["n"] = row.n;
    jr["loglik_per_obs"] = {{"mean", row.loglik_per_obs.mean},
                            {"std_error", row.loglik_per_obs.std_error}};
    Json score = Json::array();
    for (const auto& e : row.score_per_obs)
      score.push_back({{"mean", e.mean}, {"std_error", e.std_error}});
    jr["score_per_obs"] = score;
    jr["score_rms_per_obs"] = row.score_rms_per_obs;
    jr["info_per_obs"] = detail::to_json(row.info_per_obs);
    jr["info_per_obs_se"] = detail::to_json(row.info_per_obs_se);
    jr["score_outer_per_obs"] = detail::to_json(row.outer_per_obs);
    jr["score_outer_per_obs_se"] = detail::to_json(row.outer_per_obs_se);
    jr["identity_gap"] = detail::to_json(row.identity_gap);
    jr["identity_gap_se"] = detail::to_json(row.identity_gap_se);
    jr["identity_within_3se"] = row.identity_within_3se;
    rows.push_back(std::move(jr));
  }
  j["rows"] = rows;
  Json slopes = Json::array();
  for (std::size_t i = 0; i < r.pairwise_slopes.size(); ++i)
    slopes.push_back({{"n_from", r.rows[i].n},
                      {"n_to", r.rows[i + 1].n},
                      {"slope", r.pairwise_slopes[i]}});
  j["score_slopes"] = slopes;
  j["score_slope_fit"] = r.score_slope;
  return j;
}

}  // namespace mirfs

#endif  // MIRFS_IO_HPP
