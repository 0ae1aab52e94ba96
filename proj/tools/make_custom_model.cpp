// Writes the fully custom model: flat metrics, and a nonlinear connection and
// Gamma-linear connection whose every component is a seeded random
// low-degree polynomial in all jet coordinates.
//
//   make_custom_model [seed] > models/custom.json

#include <cstdlib>
#include <iostream>
#include <string>

#include "jetgeom/io.hpp"

using namespace jetgeom;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
  const Dims d{2, 2};
  Rng rng(seed);
  const auto vars = coordinates(d);
  auto poly = [&] { return render(random_polynomial(vars, rng, 2, 2, 0.125)); };

  Json doc;
  doc["schema"] = 1;
  doc["name"] = "custom";
  doc["p"] = d.p;
  doc["n"] = d.n;
  doc["h"] = Json::array({Json::array({"1", "0"}), Json::array({"0", "1"})});
  doc["phi"] = Json::array({Json::array({"1", "0"}), Json::array({"0", "1"})});
  doc["nlc_base"] = "zero";
  doc["gamma_base"] = "zero";
  auto nlc = NonlinearConnection::zero(d);
  Json jn = Json::object();
  for (const auto* part : {"M", "N"}) {
    const ExprArray& a = std::string(part) == "M" ? nlc.M : nlc.N;
    for (std::size_t k = 0; k < a.size(); ++k) jn[part + index_key(a.unflatten(k))] = poly();
  }
  doc["nlc"] = jn;
  auto g = GammaConnection::zero(d);
  Json jg = Json::object();
  for (auto f : kFamilies)
    for (std::size_t k = 0; k < g[f].size(); ++k) jg[family_name(f) + index_key(g[f].unflatten(k))] = poly();
  doc["gamma"] = jg;
  doc["sampler"] = {{"points", 25}, {"seed", 20240917}, {"box", Json::array({-1.0, 1.0})}, {"atol", 1e-9}, {"rtol", 1e-6}};
  std::cout << doc.dump(2) << "\n";
}
