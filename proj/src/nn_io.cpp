#include <cstdio>
#include <cstdlib>

#include "json_util.hpp"
#include "quant/nn.hpp"

namespace quant::nn {

namespace detail {

std::string hexfloat(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hexfloat(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) fail("checkpoint: bad float '" + s + "'");
    return v;
}

}  // namespace detail

using nlohmann::json;

static json mat_jobj(const Mat& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    json vals = json::array();
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            vals.push_back(detail::hexfloat(m(r, c)));
    j["data"] = std::move(vals);
    return j;
}

static Mat mat_unjobj(const json& j) {
    Mat m(j.at("rows").get<Index>(), j.at("cols").get<Index>());
    const auto& vals = j.at("data");
    require(static_cast<Index>(vals.size()) == m.size(), "checkpoint: matrix size mismatch");
    size_t k = 0;
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            m(r, c) = detail::parse_hexfloat(vals[k++].get<std::string>());
    return m;
}

json vec_jobj(const Vec& v) {
    json vals = json::array();
    for (Index i = 0; i < v.size(); ++i) vals.push_back(detail::hexfloat(v[i]));
    return vals;
}

Vec vec_unjobj(const json& j) {
    Vec v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i)
        v[i] = detail::parse_hexfloat(j[static_cast<size_t>(i)].get<std::string>());
    return v;
}

json mlp_jobj(const Mlp<double>& net) {
    json j;
    j["format_version"] = 1;
    json layers = json::array();
    for (const auto& l : net.layers) {
        json lj;
        lj["w"] = mat_jobj(l.w);
        lj["b"] = vec_jobj(l.b);
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    return j;
}

Mlp<double> mlp_unjobj(const json& j) {
    if (j.at("format_version").get<int>() != 1)
        fail("checkpoint: unsupported mlp format version");
    Mlp<double> net;
    for (const auto& lj : j.at("layers")) {
        Layer<double> l;
        l.w = mat_unjobj(lj.at("w"));
        l.b = vec_unjobj(lj.at("b"));
        require(l.w.rows() == l.b.size(), "checkpoint: layer shape mismatch");
        net.layers.push_back(std::move(l));
    }
    require(!net.layers.empty(), "checkpoint: empty network");
    for (size_t i = 1; i < net.layers.size(); ++i)
        require(net.layers[i].w.cols() == net.layers[i - 1].w.rows(),
                "checkpoint: layers do not compose");
    return net;
}

std::string mlp_to_json(const Mlp<double>& net) { return mlp_jobj(net).dump(); }

Mlp<double> mlp_from_json(const std::string& text) {
    return mlp_unjobj(json::parse(text));
}

}  // namespace quant::nn
