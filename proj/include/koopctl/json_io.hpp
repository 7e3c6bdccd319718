#pragma once

#include <string>

#include <json.hpp>

#include "koopctl/types.hpp"

namespace koopctl {

// ordered_json keeps insertion order, so serialized artifacts are
// byte-stable across reruns.
using json = nlohmann::ordered_json;

// Shared JSON matrix container:
//   {"rows": r, "cols": c, "data": [row-major doubles]}
json mat_to_json(const Mat& m);
Mat json_to_mat(const json& j);

json vec_to_json(const Vec& v);
Vec json_to_vec(const json& j);

void save_json(const std::string& path, const json& j);
json load_json(const std::string& path);

// Shortest decimal representation that round-trips through IEEE-754 doubles.
std::string format_double(double x);

}  // namespace koopctl
