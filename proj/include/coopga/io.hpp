#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cooperative.hpp"

namespace coopga {

using json = nlohmann::json;

inline constexpr const char* kSystemSchema = "coopga.system/1";

namespace io {

inline json read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

inline Eigen::VectorXd to_vector(const json& j)
{
    if (!j.is_array()) throw ConfigError("expected a number array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

inline Eigen::Vector3d to_vec3(const json& j)
{
    if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json from_vector(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

template <class Derived>
json from_matrix(const Eigen::MatrixBase<Derived>& m)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
        a.push_back(r);
    }
    return a;
}

inline json from_multivector(const Multivector& m)
{
    json a = json::array();
    for (double v : m.c) a.push_back(v);
    return a;
}

inline Multivector to_multivector_coeffs(const json& j)
{
    if (!j.is_array() || j.size() != 32) throw ConfigError("expected 32 multivector coefficients");
    Multivector m;
    for (int i = 0; i < 32; ++i) m.c[i] = j[i].get<double>();
    return m;
}

// {translation: [x,y,z], rotation: [b23, b13, b12]} -> T(translation) R(rotation)
inline Multivector parse_pose(const json& j)
{
    if (j.is_null()) return Multivector(1.0);
    Eigen::Vector3d t = j.contains("translation") ? to_vec3(j["translation"]) : Eigen::Vector3d::Zero();
    Eigen::Vector3d r = j.contains("rotation") ? to_vec3(j["rotation"]) : Eigen::Vector3d::Zero();
    return exp_translator(t) * exp_rotor(r);
}

inline json pose_json(const Multivector& m)
{
    Vector7d b = log_coords(m);
    return {{"translation", {b[4], b[5], b[6]}}, {"rotation", {b[0], b[1], b[2]}}};
}

inline Joint parse_joint(const json& j)
{
    std::string name = j.value("name", "");
    Joint out;
    if (j.contains("bivector")) {
        Eigen::VectorXd b = to_vector(j["bivector"]);
        if (b.size() != 6) throw ConfigError("joint '" + name + "': bivector needs 6 coefficients");
        Vector7d c;
        c << b[0], b[1], b[2], 0.0, b[3], b[4], b[5];
        out = Joint::from_bivector(name, c);
    } else {
        std::string type = j.value("type", "revolute");
        Eigen::Vector3d axis = to_vec3(j.at("axis"));
        if (type == "revolute") {
            Eigen::Vector3d origin = j.contains("origin") ? to_vec3(j["origin"]) : Eigen::Vector3d::Zero();
            out = Joint::revolute(name, axis, origin);
        } else if (type == "prismatic") {
            out = Joint::prismatic(name, axis);
        } else {
            throw ConfigError("joint '" + name + "': unknown type '" + type + "'");
        }
    }
    if (j.contains("limits")) {
        out.lower = j["limits"].at(0).get<double>();
        out.upper = j["limits"].at(1).get<double>();
    }
    return out;
}

inline KinematicChain parse_chain(const json& j)
{
    KinematicChain c;
    c.name = j.value("name", "");
    c.base = parse_pose(j.value("base_pose", json()));
    c.ee_offset = parse_pose(j.value("ee_offset", json()));
    for (const auto& jj : j.at("joints")) c.joints.push_back(parse_joint(jj));
    return c;
}

inline CooperativeSystem parse_system(const json& j, std::optional<PrimitiveKind> kind_override = std::nullopt)
{
    std::string schema = j.value("schema", "");
    if (schema != kSystemSchema) throw ConfigError("unsupported system schema '" + schema + "'");
    PrimitiveKind kind = kind_override ? *kind_override : primitive_kind_from_string(j.at("primitive"));
    std::vector<KinematicChain> chains;
    for (const auto& c : j.at("chains")) chains.push_back(parse_chain(c));
    CooperativeSystem sys(j.value("name", ""), kind, std::move(chains));
    if (j.contains("limits_enforced") && j["limits_enforced"].get<bool>())
        for (auto& c : sys.chains) c.enforce_limits = true;
    if (j.contains("nominal")) {
        Eigen::VectorXd q = to_vector(j["nominal"]);
        if (q.size() != sys.dof()) throw ConfigError("nominal configuration has wrong length");
        sys.nominal = q;
    }
    return sys;
}

inline CooperativeSystem load_system(const std::string& path,
                                     std::optional<PrimitiveKind> kind_override = std::nullopt)
{
    return parse_system(read_file(path), kind_override);
}

inline json system_json(const CooperativeSystem& sys)
{
    json chains = json::array();
    for (const auto& c : sys.chains) {
        json joints = json::array();
        for (const auto& jt : c.joints) {
            json jj{{"name", jt.name},
                    {"bivector",
                     {jt.axis[0], jt.axis[1], jt.axis[2], jt.axis[4], jt.axis[5], jt.axis[6]}}};
            if (std::isfinite(jt.lower) || std::isfinite(jt.upper)) jj["limits"] = {jt.lower, jt.upper};
            joints.push_back(jj);
        }
        chains.push_back({{"name", c.name},
                          {"base_pose", pose_json(c.base)},
                          {"joints", joints},
                          {"ee_offset", pose_json(c.ee_offset)}});
    }
    return {{"schema", kSystemSchema},
            {"name", sys.name},
            {"primitive", to_string(sys.kind)},
            {"chains", chains},
            {"nominal", from_vector(sys.nominal)}};
}

inline json params_json(const PrimitiveParams& p)
{
    json j{{"kind", to_string(p.kind)}, {"center", from_vector(p.center)}};
    switch (p.kind) {
    case PrimitiveKind::PointPair:
        j["radius"] = p.radius;
        j["direction"] = from_vector(p.direction);
        j["endpoints"] = {from_vector(p.endpoints[0]), from_vector(p.endpoints[1])};
        break;
    case PrimitiveKind::Line: j["direction"] = from_vector(p.direction); break;
    case PrimitiveKind::Circle:
        j["radius"] = p.radius;
        j["normal"] = from_vector(p.normal);
        break;
    case PrimitiveKind::Plane:
        j["normal"] = from_vector(p.normal);
        j["distance"] = p.distance;
        break;
    case PrimitiveKind::Sphere: j["radius"] = p.radius; break;
    default: break;
    }
    return j;
}

inline PrimitiveParams parse_params(const json& j)
{
    PrimitiveParams p;
    p.kind = primitive_kind_from_string(j.at("kind").get<std::string>());
    p.center = to_vec3(j.at("center"));
    if (j.contains("radius")) p.radius = j["radius"].get<double>();
    if (j.contains("normal")) p.normal = to_vec3(j["normal"]);
    if (j.contains("direction")) p.direction = to_vec3(j["direction"]);
    if (j.contains("distance")) p.distance = j["distance"].get<double>();
    if (j.contains("endpoints")) {
        p.endpoints[0] = to_vec3(j["endpoints"].at(0));
        p.endpoints[1] = to_vec3(j["endpoints"].at(1));
    }
    return p;
}

}  // namespace io
}  // namespace coopga
