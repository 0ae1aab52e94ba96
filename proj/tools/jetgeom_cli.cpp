#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jetgeom/io.hpp"
#include "jetgeom/prolong.hpp"
#include "jetgeom/verify.hpp"

using namespace jetgeom;

namespace {

struct Options {
  std::string model;
  std::optional<std::uint64_t> seed;
  std::optional<int> points;
  double tol = 1e-6;
  bool json = false;
  bool table = false;
  std::string family;
  std::string field;
  std::string at;
};

struct Output {
  Json tables = Json::object();
  std::vector<CheckResult> checks;
  Json extra = Json::object();
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

Json family_entry(const std::string& name, const DTensor& t, const VerifyContext& ctx) {
  Json j;
  j["name"] = name;
  j["nonzero"] = sampled_nonzero(t.components(), ctx.points, ctx.sampler.atol);
  auto body = to_json(t);
  j["signature"] = body["signature"];
  j["components"] = body["components"];
  return j;
}

Json family_list(const std::vector<TableCell>& cells, const VerifyContext& ctx, const std::string& filter) {
  Json arr = Json::array();
  for (const auto& c : cells)
    if (filter.empty() || c.name == filter) arr.push_back(family_entry(c.name, c.value, ctx));
  return arr;
}

Json vertical_json(const ExprArray& Xv) {
  Json j = Json::object();
  for (std::size_t k = 0; k < Xv.size(); ++k) j[index_key(Xv.unflatten(k))] = render(Xv.flat(k));
  return j;
}

Binding parse_point(const std::string& text, Dims d) {
  Binding b(d);
  for (const auto& item : split(text, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("--at expects name=value pairs");
    std::string name = item.substr(0, eq);
    auto v = parse(name, d);
    if (v.op() != Op::variable) throw ValidationError("--at: " + name + " is not a coordinate");
    try {
      b.set(v.variable(), std::stod(item.substr(eq + 1)));
    } catch (const std::logic_error&) {
      throw ValidationError("--at: bad number for " + name);
    }
  }
  return b;
}

Output run_command(const std::string& cmd, const ModelFile& mf, const VerifyContext& ctx, const Options& opt) {
  const Dims d = ctx.dims();
  Output out;
  const std::string& fam = opt.family;
  if (cmd == "christoffel") {
    auto cd = christoffel(mf.metric);
    auto mc = metric_curvature(cd);
    out.tables["H"] = to_json(cd.H);
    out.tables["gamma"] = to_json(cd.gamma);
    out.tables["Hcurv"] = to_json(mc.Hcurv);
    out.tables["r"] = to_json(mc.r);
  } else if (cmd == "nlc") {
    out.tables["M"] = to_json(ctx.nlc.M);
    out.tables["N"] = to_json(ctx.nlc.N);
    auto R = nlc_curvature(ctx.nlc);
    out.tables["R_tt"] = to_json(R.Rtt);
    out.tables["R_tm"] = to_json(R.Rtm);
    out.tables["R_mm"] = to_json(R.Rmm);
    out.checks = check_brackets(ctx.nlc, ctx.points, ctx.tol);
  } else if (cmd == "berwald") {
    out.extra["berwald"] = ctx.berwald;
    for (auto f : kFamilies)
      if (fam.empty() || fam == family_name(f)) out.tables[family_name(f)] = to_json(ctx.g[f]);
  } else if (cmd == "torsion") {
    out.tables["families"] = family_list(torsion_table(ctx.g, ctx.nlc).families, ctx, fam);
    out.checks = torsion_suite(ctx);
  } else if (cmd == "curvature") {
    out.tables["families"] = family_list(curvature_table(ctx.g, ctx.nlc).families, ctx, fam);
    out.checks = curvature_suite(ctx);
  } else if (cmd == "deflection") {
    auto def = deflection(ctx.g, ctx.nlc);
    Json arr = Json::array();
    for (const auto& [name, t] : {std::pair<std::string, const DTensor&>{"Dbar", def.Dbar}, {"D", def.D}, {"d", def.d}})
      if (fam.empty() || fam == name) arr.push_back(family_entry(name, t, ctx));
    out.tables["families"] = arr;
    out.checks = deflection_suite(ctx);
  } else if (cmd == "ricci") {
    out.checks = ricci_suite(ctx);
  } else if (cmd == "bianchi") {
    out.checks = bianchi_suite(ctx);
  } else if (cmd == "prolong") {
    if (opt.field.empty()) throw ValidationError("prolong needs --field with p + n comma-separated components");
    auto comps = split(opt.field, ',');
    if (static_cast<int>(comps.size()) != d.p + d.n)
      throw ValidationError("--field needs " + std::to_string(d.p + d.n) + " components");
    auto X = BaseVectorField::zero(d);
    for (int a = 0; a < d.p; ++a) X.Xt[a] = parse(comps[a], d);
    for (int i = 0; i < d.n; ++i) X.Xm[i] = parse(comps[d.p + i], d);
    X.validate();
    auto P = olver_prolong(X);
    auto Y = geometric_prolong(X, ctx.g, ctx.nlc);
    out.tables["olver"] = vertical_json(P.Xv);
    out.tables["geometric"] = vertical_json(Y.Xv);
    if (!opt.at.empty()) {
      Binding b = parse_point(opt.at, d);
      Json vals = Json::object();
      Tape tp(P.Xv.data()), ty(Y.Xv.data());
      auto vp = tp(b), vy = ty(b);
      for (std::size_t k = 0; k < vp.size(); ++k)
        vals[index_key(P.Xv.unflatten(k))] = Json::array({vp[k], vy[k]});
      out.tables["values_olver_geometric"] = vals;
    }
    out.checks.push_back(check_prolongation_relation(X, ctx.g, ctx.nlc, ctx.points, ctx.exact_tol));
    if (ctx.berwald) {
      std::vector<Expr> res;
      auto B = berwald_prolong(X, christoffel(mf.metric));
      for (std::size_t k = 0; k < B.size(); ++k) res.push_back(Y.Xv.flat(k) - B.flat(k));
      out.checks.push_back(residual_check("prolong.berwald", "Y", res, ctx.points, ctx.exact_tol));
    }
  } else if (cmd == "transform") {
    ChartChange change = ctx.chart ? *ctx.chart : random_quadratic_change(d, detail::mix_seed(ctx.sampler.seed, 1));
    JetChange jc(change);
    Json chart;
    auto list = [](const std::vector<Expr>& es) {
      Json a = Json::array();
      for (const auto& e : es) a.push_back(render(e));
      return a;
    };
    chart["source"] = ctx.chart ? "model" : "random_quadratic";
    chart["t_forward"] = list(change.t_forward);
    chart["t_inverse"] = list(change.t_inverse);
    chart["x_forward"] = list(change.x_forward);
    chart["x_inverse"] = list(change.x_inverse);
    out.tables["chart_change"] = chart;
    auto nlc2 = transform_nlc(ctx.nlc, jc);
    out.tables["M"] = to_json(nlc2.M);
    out.tables["N"] = to_json(nlc2.N);
    auto g2 = transform_gamma(ctx.g, jc);
    for (auto f : kFamilies)
      if (fam.empty() || fam == family_name(f)) out.tables[family_name(f)] = to_json(g2[f]);
    VerifyContext c2 = ctx;
    c2.chart = change;
    out.checks = frames_suite(c2);
  } else if (cmd == "verify") {
    Json per = Json::object();
    for (const auto& s : suites()) {
      auto rs = s.run(ctx);
      per[s.name] = summarize(rs);
      out.checks.insert(out.checks.end(), rs.begin(), rs.end());
    }
    out.extra["suites"] = per;
    bool tz = true, cz = true;
    for (const auto& c : torsion_table(ctx.g, ctx.nlc).families) tz = tz && !sampled_nonzero(c.value.components(), ctx.points, ctx.sampler.atol);
    for (const auto& c : curvature_table(ctx.g, ctx.nlc).families) cz = cz && !sampled_nonzero(c.value.components(), ctx.points, ctx.sampler.atol);
    out.extra["torsion_zero"] = tz;
    out.extra["curvature_zero"] = cz;
  }
  if (!fam.empty() && cmd != "prolong") {
    std::vector<CheckResult> kept;
    for (const auto& r : out.checks)
      if (r.family == fam) kept.push_back(r);
    out.checks = kept;
  }
  return out;
}

void print_table(const std::string& cmd, const Json& report) {
  std::cout << "jetgeom " << cmd << "  model " << report["provenance"]["model"].get<std::string>() << "  seed "
            << report["provenance"]["seed"].get<std::uint64_t>() << "\n";
  for (const auto& [name, tab] : report["tables"].items()) {
    if (name == "families") {
      for (const auto& f : tab) {
        std::cout << "  " << f["name"].get<std::string>() << (f["nonzero"].get<bool>() ? "  nonzero" : "  zero") << "\n";
        for (const auto& [k, v] : f["components"].items()) std::cout << "    " << k << " = " << v.get<std::string>() << "\n";
      }
      continue;
    }
    std::cout << "  " << name << "\n";
    for (const auto& [k, v] : tab.items()) std::cout << "    " << k << " = " << v.dump() << "\n";
  }
  for (const auto& c : report["checks"]) {
    std::ostringstream res;
    if (c["max_residual"].is_null())
      res << "error";
    else
      res << std::scientific << std::setprecision(2) << c["max_residual"].get<double>();
    std::cout << (c["pass"].get<bool>() ? "  PASS " : "  FAIL ") << std::left << std::setw(44)
              << c["id"].get<std::string>() << " " << res.str() << "\n";
  }
  const auto& s = report["summary"];
  std::cout << "  " << s["passed"].get<int>() << "/" << s["total"].get<int>() << " checks passed\n";
}

int fail_validation(const std::string& msg, bool json) {
  Json j;
  j["schema"] = 1;
  j["error"] = "validation";
  j["message"] = msg;
  if (json)
    std::cout << j.dump(2) << "\n";
  else
    std::cerr << j.dump() << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Torsion, curvature, identity checks and prolongations on 1-jet spaces"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"christoffel", "Christoffel symbols and metric curvature of (h, phi)"},
      {"nlc", "nonlinear connection, its curvature and the bracket identities"},
      {"berwald", "components of the Gamma-linear connection"},
      {"torsion", "the twelve torsion families and their checks"},
      {"curvature", "the eighteen curvature families and their checks"},
      {"deflection", "deflection tensors and their identities"},
      {"ricci", "Ricci identities for seeded random d-vector fields"},
      {"bianchi", "Bianchi identities grouped by block pattern"},
      {"prolong", "jet prolongation of a vector field on T x M"},
      {"transform", "connection components after a chart change"},
      {"verify", "the full identity battery"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("model", opt.model, "model file (JSON)")->required();
    sub->add_option("--seed", opt.seed, "sampling seed (default: JETGEOM_SEED, then the model's sampler)");
    sub->add_option("--points", opt.points, "number of sample points");
    sub->add_option("--tol", opt.tol, "residual tolerance")->capture_default_str();
    auto* j = sub->add_flag("--json", opt.json, "JSON report");
    auto* t = sub->add_flag("--table", opt.table, "text report (default)");
    j->excludes(t);
    sub->add_option("--family", opt.family, "restrict tables and checks to one family");
    if (name == "prolong") {
      sub->add_option("--field", opt.field, "comma-separated components X^a, then X^i")->required();
      sub->add_option("--at", opt.at, "evaluate at a point, e.g. t1=0.2,x1=0.5,x1_1=1");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    ModelFile mf = load_model(opt.model);
    SampleConfig cfg = mf.sampler;
    if (const char* env = std::getenv("JETGEOM_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::logic_error&) {
        throw ValidationError("JETGEOM_SEED is not an unsigned integer");
      }
    }
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.points) {
      if (*opt.points < 1) throw ValidationError("--points must be positive");
      cfg.points = *opt.points;
    }
    VerifyContext ctx = make_context(mf.metric, mf.nlc, mf.gamma, cfg, opt.tol);
    ctx.chart = mf.chart;
    Output out = run_command(cmd, mf, ctx, opt);

    Json report;
    report["schema"] = 1;
    report["command"] = cmd;
    report["provenance"] = provenance(mf, cfg);
    report["provenance"]["tolerance"] = opt.tol;
    for (const auto& [k, v] : out.extra.items()) report[k] = v;
    report["tables"] = out.tables;
    Json checks = Json::array();
    for (const auto& r : out.checks) checks.push_back(to_json(r));
    report["checks"] = checks;
    report["summary"] = summarize(out.checks);
    if (opt.json)
      std::cout << report.dump(2) << "\n";
    else
      print_table(cmd, report);
    return all_pass(out.checks) ? 0 : 1;
  } catch (const ValidationError& e) {
    return fail_validation(e.what(), opt.json);
  } catch (const ParseError& e) {
    return fail_validation(e.what(), opt.json);
  } catch (const DomainError& e) {
    return fail_validation(e.what(), opt.json);
  }
}
