#include <doctest.h>

#include <string>

#include "sar/io.hpp"

using namespace sar;
using nlohmann::json;

TEST_CASE("format_double keeps 17 significant digits") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(2.0) == "2");
  CHECK(std::stod(io::format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("system JSON round trip") {
  const json j = {{"a", {{-1.0, 0.5}, {0.0, -2.0}}}, {"f_gain", {{0.1, 0.0}, {0.0, 0.2}}},
                  {"c", {{1.0, 0.0}, {0.0, 1.0}}},   {"sigma", 0.4},
                  {"sector_slopes", {1.0, 2.0}},     {"deriv_bounds", {1.0, 2.0}},
                  {"nonlinearity", "tanh_bank"}};
  const LureSystem sys = io::system_from_json(j);
  CHECK(sys.a(0, 1) == 0.5);
  CHECK(sys.sigma == 0.4);
  CHECK(sys.nonlinearity(Vector{{1.0, 0.0}})[0] == doctest::Approx(std::tanh(1.0)));
  const LureSystem again = io::system_from_json(io::to_json(sys));
  CHECK(again.a == sys.a);
  CHECK(again.f_gain == sys.f_gain);
  CHECK(again.sector_slopes == sys.sector_slopes);
  CHECK(again.nonlinearity_name == "tanh_bank");
}

TEST_CASE("malformed systems are rejected") {
  json j = {{"a", {{-1.0}}}, {"f_gain", {{0.0}}}, {"c", {{1.0}}}, {"sigma", 0.1}, {"sector_slopes", {1.0}},
            {"deriv_bounds", {1.0}}};
  CHECK_NOTHROW(io::system_from_json(j));
  json missing = j;
  missing.erase("c");
  CHECK_THROWS_AS(io::system_from_json(missing), Error);
  json ragged = j;
  ragged["a"] = {{-1.0, 2.0}, {3.0}};
  CHECK_THROWS_AS(io::system_from_json(ragged), Error);
  json text = j;
  text["sigma"] = "big";
  CHECK_THROWS_AS(io::system_from_json(text), Error);
  json negative = j;
  negative["sector_slopes"] = {-0.5};
  CHECK_THROWS_AS(io::system_from_json(negative), Error);
  json unknown = j;
  unknown["nonlinearity"] = "mystery";
  CHECK_THROWS_AS(io::system_from_json(unknown), Error);
}

TEST_CASE("net and params JSON") {
  const ShallowNet net{Matrix{{1.0, 2.0}}, Vector{{0.5}}, Matrix{{3.0}}, Vector{{-1.0}}};
  const ShallowNet back = io::net_from_json(io::to_json(net));
  CHECK(back.w1 == net.w1);
  CHECK(back.b2 == net.b2);

  ml::Params p;
  p.i_app = 40.0;
  const ml::Params q = io::params_from_json(io::to_json(p));
  CHECK(q.i_app == 40.0);
  CHECK(q.v2 == 18.0);
  CHECK(io::params_from_json({{"g_ca", 4.4}}).g_ca == 4.4);
  CHECK_THROWS_AS(io::params_from_json({{"gca", 4.4}}), Error);
  CHECK_THROWS_AS(io::params_from_json({{"cap", 0.0}}), Error);
}

TEST_CASE("certificate JSON fields") {
  Certificate c;
  c.sigma = 0.7;
  c.nu = 0.3;
  c.lambda = Vector{{0.0}};
  c.tau = Vector{{0.01}};
  c.margin = -0.02;
  c.feasible = true;
  const json j = io::to_json(c);
  for (const char* key : {"sigma", "nu", "lambda", "tau", "margin", "feasible"}) CHECK(j.contains(key));
  CHECK(j["feasible"].get<bool>());
}

TEST_CASE("CSV layouts") {
  SdePath p;
  p.times = {0.0, 0.5};
  p.states = Matrix{{1.0, 2.0}, {0.1, 0.2}};
  CHECK(io::path_csv(p, {"V", "N"}) == "t,V,N\n0,1,2\n0.5,0.10000000000000001,0.20000000000000001\n");
  const std::vector<io::Column> extra{{"V_filt", {1.0, 0.5}}};
  CHECK(io::path_csv(p, {"V", "N"}, extra).rfind("t,V,N,V_filt\n", 0) == 0);
  CHECK_THROWS_AS(io::path_csv(p, {"V"}), Error);

  Moments m{{0.0}, Matrix{{1.0, 2.0}}, Matrix{{0.0, 0.5}}};
  CHECK(io::moments_csv(m) == "t,m1,m2,se1,se2\n0,1,2,0,0.5\n");

  std::vector<SweepPoint> sweep(1);
  sweep[0].sigma = 0.5;
  sweep[0].cert.margin = -1.0;
  sweep[0].cert.feasible = true;
  CHECK(io::sweep_csv(sweep) == "sigma,margin,feasible\n0.5,-1,1\n");
}
