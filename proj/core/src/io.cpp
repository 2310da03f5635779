#include "sar/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sar::io {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw Error(std::string(what) + ": expected an array of rows");
  if (j.empty()) return Matrix(0, 0);
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw Error(std::string(what) + ": ragged or non-array row");
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw Error(std::string(what) + ": non-numeric entry");
      m(static_cast<Index>(i), static_cast<Index>(k)) = j[i][k].get<double>();
    }
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw Error(std::string(what) + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(std::string(what) + ": non-numeric entry");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_json_file(const std::filesystem::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json to_json(const LureSystem& sys) {
  return {{"a", matrix_to_json(sys.a)},
          {"f_gain", matrix_to_json(sys.f_gain)},
          {"c", matrix_to_json(sys.c)},
          {"sigma", sys.sigma},
          {"sector_slopes", vector_to_json(sys.sector_slopes)},
          {"deriv_bounds", vector_to_json(sys.deriv_bounds)},
          {"nonlinearity", sys.nonlinearity_name},
          {"nonlinearity_params", sys.nonlinearity_params}};
}

LureSystem system_from_json(const json& j) {
  if (!j.is_object()) throw Error("system: expected a JSON object");
  for (const char* key : {"a", "f_gain", "c", "sigma", "sector_slopes", "deriv_bounds"})
    if (!j.contains(key)) throw Error(std::string("system: missing field '") + key + "'");
  if (!j["sigma"].is_number()) throw Error("system: sigma must be a number");
  LureSystem sys;
  sys.a = matrix_from_json(j["a"], "a");
  sys.f_gain = matrix_from_json(j["f_gain"], "f_gain");
  sys.c = matrix_from_json(j["c"], "c");
  sys.sigma = j["sigma"].get<double>();
  sys.sector_slopes = vector_from_json(j["sector_slopes"], "sector_slopes");
  sys.deriv_bounds = vector_from_json(j["deriv_bounds"], "deriv_bounds");
  // An empty f_gain with nonlinearities present means F = 0.
  if (sys.f_gain.size() == 0 && sys.c.rows() > 0) sys.f_gain = Matrix::Zero(sys.a.rows(), sys.c.rows());
  sys.nonlinearity_name = j.value("nonlinearity", std::string("zero"));
  sys.nonlinearity_params = j.value("nonlinearity_params", json::object());

  ValidateOptions vo;
  vo.probe_componentwise = false;  // probed after binding
  const auto structural = validate(sys, vo);
  for (const auto& v : structural)
    if (v.severity == Severity::kError) throw Error("system: " + v.what);
  bind_nonlinearity(sys);
  const auto full = validate(sys);
  for (const auto& v : full)
    if (v.severity == Severity::kError) throw Error("system: " + v.what);
  return sys;
}

json to_json(const Certificate& cert) {
  return {{"sigma", cert.sigma},
          {"nu", cert.nu},
          {"lambda", vector_to_json(cert.lambda)},
          {"tau", vector_to_json(cert.tau)},
          {"margin", cert.margin},
          {"feasible", cert.feasible},
          {"iterations", cert.iterations},
          {"iteration_cap_hit", cert.iteration_cap_hit}};
}

json to_json(const ShallowNet& net) {
  return {{"w1", matrix_to_json(net.w1)},
          {"b1", vector_to_json(net.b1)},
          {"w2", matrix_to_json(net.w2)},
          {"b2", vector_to_json(net.b2)}};
}

ShallowNet net_from_json(const json& j) {
  if (!j.is_object()) throw Error("net: expected a JSON object");
  for (const char* key : {"w1", "b1", "w2", "b2"})
    if (!j.contains(key)) throw Error(std::string("net: missing field '") + key + "'");
  ShallowNet net{matrix_from_json(j["w1"], "w1"), vector_from_json(j["b1"], "b1"), matrix_from_json(j["w2"], "w2"),
                 vector_from_json(j["b2"], "b2")};
  net.check();
  return net;
}

json to_json(const SectorEmbedding& emb) {
  json j = to_json(emb.system);
  j["offset"] = vector_to_json(emb.offset);
  j["kappa"] = emb.kappa;
  j["n_phys"] = emb.n_phys;
  j["padding"] = emb.p;
  return j;
}

namespace {

struct ParamField {
  const char* name;
  double ml::Params::*member;
};

constexpr ParamField kParamFields[] = {
    {"cap", &ml::Params::cap},       {"v1", &ml::Params::v1},         {"v2", &ml::Params::v2},
    {"v3", &ml::Params::v3},         {"v4", &ml::Params::v4},         {"phi", &ml::Params::phi},
    {"v_leak", &ml::Params::v_leak}, {"v_ca", &ml::Params::v_ca},     {"v_k", &ml::Params::v_k},
    {"g_leak", &ml::Params::g_leak}, {"g_ca", &ml::Params::g_ca},     {"g_k", &ml::Params::g_k},
    {"i_app", &ml::Params::i_app},
};

}  // namespace

json to_json(const ml::Params& p) {
  json j = json::object();
  for (const auto& f : kParamFields) j[f.name] = p.*(f.member);
  return j;
}

ml::Params params_from_json(const json& j, ml::Params base) {
  if (!j.is_object()) throw Error("params: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& f : kParamFields) {
      if (key != f.name) continue;
      if (!value.is_number()) throw Error("params: '" + key + "' must be a number");
      base.*(f.member) = value.get<double>();
      known = true;
    }
    if (!known) throw Error("params: unknown field '" + key + "'");
  }
  base.check();
  return base;
}

std::vector<std::string> state_names(Index n) {
  std::vector<std::string> names;
  for (Index i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

std::string path_csv(const SdePath& path, const std::vector<std::string>& names, std::span<const Column> extra) {
  if (static_cast<Index>(names.size()) != path.states.cols()) throw Error("path_csv: name count mismatch");
  for (const auto& c : extra)
    if (c.values.size() != path.times.size()) throw Error("path_csv: column '" + c.name + "' has wrong length");
  std::ostringstream out;
  out << 't';
  for (const auto& n : names) out << ',' << n;
  for (const auto& c : extra) out << ',' << c.name;
  out << '\n';
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    out << format_double(path.times[i]);
    for (Index k = 0; k < path.states.cols(); ++k) out << ',' << format_double(path.states(static_cast<Index>(i), k));
    for (const auto& c : extra) out << ',' << format_double(c.values[i]);
    out << '\n';
  }
  return out.str();
}

std::string moments_csv(const Moments& m) {
  std::ostringstream out;
  const Index n = m.value.cols();
  out << 't';
  for (Index k = 1; k <= n; ++k) out << ",m" << k;
  for (Index k = 1; k <= n; ++k) out << ",se" << k;
  out << '\n';
  for (std::size_t i = 0; i < m.times.size(); ++i) {
    const auto r = static_cast<Index>(i);
    out << format_double(m.times[i]);
    for (Index k = 0; k < n; ++k) out << ',' << format_double(m.value(r, k));
    for (Index k = 0; k < n; ++k) out << ',' << format_double(m.std_err(r, k));
    out << '\n';
  }
  return out.str();
}

std::string sweep_csv(std::span<const SweepPoint> sweep) {
  std::ostringstream out;
  out << "sigma,margin,feasible\n";
  for (const auto& pt : sweep)
    out << format_double(pt.sigma) << ',' << format_double(pt.cert.margin) << ',' << (pt.cert.feasible ? 1 : 0)
        << '\n';
  return out.str();
}

}  // namespace sar::io
