#include "koopctl/json_io.hpp"

#include <charconv>
#include <fstream>

#include "koopctl/errors.hpp"

namespace koopctl {

json mat_to_json(const Mat& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    j["data"] = std::move(data);
    return j;
}

Mat json_to_mat(const json& j) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
        throw IoError("matrix JSON must have rows/cols/data fields");
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw IoError("matrix JSON data length does not match rows*cols");
    Mat m(rows, cols);
    size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data.at(k++).get<double>();
    return m;
}

json vec_to_json(const Vec& v) {
    std::vector<double> data(v.data(), v.data() + v.size());
    return json(data);
}

Vec json_to_vec(const json& j) {
    if (!j.is_array()) throw IoError("vector JSON must be an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<size_t>(i)).get<double>();
    return v;
}

void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("JSON parse error in " + path + ": " + e.what());
    }
    return j;
}

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

}  // namespace koopctl
