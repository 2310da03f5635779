#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sar/lure_model.hpp"
#include "sar/morris_lecar.hpp"
#include "sar/sde_sim.hpp"
#include "sar/shallow_net.hpp"
#include "sar/stability_cert.hpp"

namespace sar::io {

using nlohmann::json;

// "%.17g"
std::string format_double(double v);

json matrix_to_json(const Matrix& m);  // row-major nested arrays
Matrix matrix_from_json(const json& j, const char* what);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j, const char* what);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

json to_json(const LureSystem& sys);
// Parses, validates and binds the named nonlinearity. Throws sar::Error on
// malformed or invalid input.
LureSystem system_from_json(const json& j);

json to_json(const Certificate& cert);
json to_json(const ShallowNet& net);
ShallowNet net_from_json(const json& j);
json to_json(const SectorEmbedding& emb);

json to_json(const ml::Params& p);
// Fields absent from j keep the values in `base`.
ml::Params params_from_json(const json& j, ml::Params base = {});

struct Column {
  std::string name;
  std::vector<double> values;
};

// Header "t,<names...>,<extra...>", one row per sample.
std::string path_csv(const SdePath& path, const std::vector<std::string>& names,
                     std::span<const Column> extra = {});
std::string moments_csv(const Moments& m);
std::string sweep_csv(std::span<const SweepPoint> sweep);

// Default state names x1..xn.
std::vector<std::string> state_names(Index n);

}  // namespace sar::io
