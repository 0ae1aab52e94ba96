#pragma once

// JSON model files and reports. Model files use schema 1:
//   p, n, h, phi                  dimensions and metric matrices (expression strings)
//   nlc_base, gamma_base          "canonical" / "berwald" (default) or "zero"
//   nlc, gamma                    component overrides keyed "M[i][a][b]", "Gv[k][b][a][i][g]", ...
//                                 indices 1-based in storage order
//   chart_change                  t_forward, t_inverse, x_forward, x_inverse expression lists
//   sampler                       points, seed, box [lo, hi], atol, rtol
// Reports use ordered keys so identical inputs give identical bytes.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "jetgeom/calculus.hpp"
#include "jetgeom/connection.hpp"
#include "jetgeom/invariants.hpp"
#include "jetgeom/model.hpp"
#include "jetgeom/parse.hpp"
#include "jetgeom/sampling.hpp"
#include "jetgeom/verify.hpp"
#include "json.hpp"

namespace jetgeom {

using Json = nlohmann::ordered_json;

struct ModelFile {
  std::string name;
  JetModel metric;
  std::optional<NonlinearConnection> nlc;  // empty: canonical
  std::optional<GammaConnection> gamma;    // empty: Berwald
  std::optional<ChartChange> chart;
  SampleConfig sampler;
  std::string hash;
};

inline std::string fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace detail {

inline Expr parse_field(const Json& j, Dims d, const std::string& where) {
  if (j.is_number()) return Expr(j.get<double>());
  if (!j.is_string()) throw ValidationError(where + ": expected an expression string");
  try {
    return parse(j.get<std::string>(), d);
  } catch (const ParseError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

inline ExprArray parse_matrix(const Json& j, int size, Dims d, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != size) throw ValidationError(where + " must be a " +
                                                                                  std::to_string(size) + "x" +
                                                                                  std::to_string(size) + " matrix");
  ExprArray m({size, size});
  for (int r = 0; r < size; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != size) throw ValidationError(where + " row has wrong length");
    for (int c = 0; c < size; ++c)
      m(r, c) = parse_field(j[r][c], d, where + "[" + std::to_string(r + 1) + "][" + std::to_string(c + 1) + "]");
  }
  return m;
}

inline std::vector<Expr> parse_list(const Json& j, int size, Dims d, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != size)
    throw ValidationError(where + " must list " + std::to_string(size) + " expressions");
  std::vector<Expr> out;
  for (int k = 0; k < size; ++k) out.push_back(parse_field(j[k], d, where + "[" + std::to_string(k + 1) + "]"));
  return out;
}

// "Name[1][2]" -> ("Name", {0, 1})
inline std::pair<std::string, std::vector<int>> parse_key(const std::string& key) {
  static const std::regex whole(R"(^([A-Za-z]+)((\[[0-9]+\])+)$)");
  static const std::regex part(R"(\[([0-9]+)\])");
  std::smatch m;
  if (!std::regex_match(key, m, whole)) throw ValidationError("malformed component key " + key);
  std::vector<int> idx;
  std::string rest = m[2];
  for (auto it = std::sregex_iterator(rest.begin(), rest.end(), part); it != std::sregex_iterator(); ++it)
    idx.push_back(std::stoi((*it)[1]) - 1);
  return {m[1], idx};
}

inline void set_component(ExprArray& a, const std::vector<int>& idx, const Expr& e, const std::string& key) {
  if (idx.size() != a.rank()) throw ValidationError(key + ": expected " + std::to_string(a.rank()) + " indices");
  for (std::size_t s = 0; s < idx.size(); ++s)
    if (idx[s] < 0 || idx[s] >= a.shape()[s]) throw ValidationError(key + ": index out of range");
  a.at(idx) = e;
}

}  // namespace detail

inline ModelFile parse_model(const Json& doc, const std::string& fallback_name = "model") {
  if (!doc.is_object()) throw ValidationError("model file must be a JSON object");
  if (doc.contains("schema") && doc["schema"] != 1) throw ValidationError("unsupported model schema");
  auto dim = [&](const char* k) {
    if (!doc.contains(k) || !doc[k].is_number_integer()) throw ValidationError(std::string("missing integer ") + k);
    return doc[k].get<int>();
  };
  ModelFile mf;
  mf.name = doc.value("name", fallback_name);
  const Dims d{dim("p"), dim("n")};
  if (d.p < 1 || d.n < 1) throw ValidationError("dimensions must be positive");
  if (!doc.contains("h") || !doc.contains("phi")) throw ValidationError("h and phi are required");
  mf.metric = {d, detail::parse_matrix(doc["h"], d.p, d, "h"), detail::parse_matrix(doc["phi"], d.n, d, "phi")};
  mf.metric.validate();
  auto cd = christoffel(mf.metric);

  const std::string nlc_base = doc.value("nlc_base", "canonical");
  const std::string gamma_base = doc.value("gamma_base", "berwald");
  if (nlc_base != "canonical" && nlc_base != "zero") throw ValidationError("nlc_base must be canonical or zero");
  if (gamma_base != "berwald" && gamma_base != "zero") throw ValidationError("gamma_base must be berwald or zero");
  if (nlc_base == "zero" || doc.contains("nlc")) {
    auto nlc = nlc_base == "zero" ? NonlinearConnection::zero(d) : canonical_nlc(cd);
    const Json entries = doc.value("nlc", Json::object());
    for (const auto& [key, val] : entries.items()) {
      auto [name, idx] = detail::parse_key(key);
      if (name != "M" && name != "N") throw ValidationError("unknown nlc component " + key);
      detail::set_component(name == "M" ? nlc.M : nlc.N, idx, detail::parse_field(val, d, key), key);
    }
    mf.nlc = nlc;
  }
  if (gamma_base == "zero" || doc.contains("gamma")) {
    auto g = gamma_base == "zero" ? GammaConnection::zero(d) : berwald(cd);
    const Json entries = doc.value("gamma", Json::object());
    for (const auto& [key, val] : entries.items()) {
      auto [name, idx] = detail::parse_key(key);
      std::optional<Family> fam;
      for (auto f : kFamilies)
        if (name == family_name(f)) fam = f;
      if (!fam) throw ValidationError("unknown connection family " + name);
      detail::set_component(g[*fam], idx, detail::parse_field(val, d, key), key);
    }
    mf.gamma = g;
  }
  if (doc.contains("chart_change")) {
    const auto& c = doc["chart_change"];
    ChartChange ch{d, detail::parse_list(c.at("t_forward"), d.p, d, "t_forward"),
                   detail::parse_list(c.at("t_inverse"), d.p, d, "t_inverse"),
                   detail::parse_list(c.at("x_forward"), d.n, d, "x_forward"),
                   detail::parse_list(c.at("x_inverse"), d.n, d, "x_inverse")};
    ch.validate();
    mf.chart = ch;
  }
  if (doc.contains("sampler")) {
    const auto& s = doc["sampler"];
    mf.sampler.points = s.value("points", mf.sampler.points);
    mf.sampler.seed = s.value("seed", mf.sampler.seed);
    if (s.contains("box")) {
      if (!s["box"].is_array() || s["box"].size() != 2) throw ValidationError("sampler.box must be [lo, hi]");
      mf.sampler.lo = s["box"][0].get<double>();
      mf.sampler.hi = s["box"][1].get<double>();
    }
    mf.sampler.atol = s.value("atol", mf.sampler.atol);
    mf.sampler.rtol = s.value("rtol", mf.sampler.rtol);
    if (mf.sampler.points < 1 || !(mf.sampler.lo < mf.sampler.hi)) throw ValidationError("invalid sampler");
  }
  mf.hash = "fnv1a64:" + fnv1a64(doc.dump());
  return mf;
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file " + path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("model file is not valid JSON: ") + e.what());
  }
  std::string stem = path.substr(path.find_last_of('/') + 1);
  stem = stem.substr(0, stem.find('.'));
  return parse_model(doc, stem);
}

// ---------------------------------------------------------------------------
// Report pieces

inline Json to_json(const CheckResult& r) {
  Json j;
  j["id"] = r.id;
  j["family"] = r.family;
  j["max_residual"] = std::isfinite(r.max_residual) ? Json(r.max_residual) : Json(nullptr);
  j["worst_point"] = r.worst_point;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline std::string index_key(const std::vector<int>& idx) {
  std::string s;
  for (int i : idx) s += "[" + std::to_string(i + 1) + "]";
  return s;
}

/// Structurally nonzero components keyed by 1-based index.
inline Json to_json(const ExprArray& a) {
  Json comps = Json::object();
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!a.flat(k).is_zero()) comps[index_key(a.unflatten(k))] = render(a.flat(k));
  return comps;
}

inline Json to_json(const DTensor& t) {
  Json j;
  Json sig = Json::array();
  for (const auto& s : t.signature()) sig.push_back(s.name());
  j["signature"] = sig;
  j["components"] = to_json(t.components());
  return j;
}

/// True when some component is nonzero at a sample point.
inline bool sampled_nonzero(const ExprArray& a, const std::vector<Binding>& pts, double atol) {
  std::vector<Expr> live;
  for (const auto& e : a.data())
    if (!e.is_zero()) live.push_back(e);
  return !live.empty() && max_abs(live, pts).max_abs > atol;
}

inline Json provenance(const ModelFile& mf, const SampleConfig& cfg) {
  Json p;
  p["model"] = mf.name;
  p["model_hash"] = mf.hash;
  p["seed"] = cfg.seed;
  Json s;
  s["points"] = cfg.points;
  s["box"] = Json::array({cfg.lo, cfg.hi});
  s["atol"] = cfg.atol;
  s["rtol"] = cfg.rtol;
  p["sampler"] = s;
  return p;
}

inline Json summarize(const std::vector<CheckResult>& rs) {
  Json s;
  int passed = 0;
  for (const auto& r : rs) passed += r.pass ? 1 : 0;
  s["total"] = rs.size();
  s["passed"] = passed;
  s["failed"] = static_cast<int>(rs.size()) - passed;
  return s;
}

}  // namespace jetgeom
