#pragma once

#include <functional>
#include <random>

#include <coopga/coopga.hpp>
#include <coopga/verify.hpp>

namespace oracle {

using coopga::Multivector;

inline std::string data_path(const std::string& rel) { return std::string(COOPGA_DATA_DIR) + "/" + rel; }

using coopga::verify::fd_multivector;
using coopga::verify::fd_vector;
using coopga::verify::perturb;
using coopga::verify::random_bivector;
using coopga::verify::random_multivector;
using coopga::verify::random_vec3;
using coopga::verify::rel_err;

// Chain of three prismatic joints (x, y, z) based at p: its end effector can go anywhere.
inline coopga::KinematicChain point_robot(const std::string& name, const Eigen::Vector3d& p)
{
    coopga::KinematicChain c;
    c.name = name;
    c.base = coopga::translator(p);
    const char* ax[] = {"x", "y", "z"};
    for (int k = 0; k < 3; ++k)
        c.joints.push_back(coopga::Joint::prismatic(name + "_" + ax[k], Eigen::Vector3d::Unit(k)));
    return c;
}

inline coopga::CooperativeSystem point_robots(coopga::PrimitiveKind kind, const std::vector<Eigen::Vector3d>& at)
{
    std::vector<coopga::KinematicChain> chains;
    for (std::size_t i = 0; i < at.size(); ++i) chains.push_back(point_robot("p" + std::to_string(i), at[i]));
    return coopga::CooperativeSystem("points", kind, std::move(chains));
}

// the defining points of the unit primitive of each kind
inline std::vector<Eigen::Vector3d> unit_points(coopga::PrimitiveKind k)
{
    using V = Eigen::Vector3d;
    switch (k) {
    case coopga::PrimitiveKind::Point: return {V(0, 0, 0)};
    case coopga::PrimitiveKind::PointPair: return {V(0, -1, 0), V(0, 1, 0)};
    case coopga::PrimitiveKind::Line: return {V(0, 0, 0), V(0, 1, 0)};
    case coopga::PrimitiveKind::Circle: return {V(1, 0, 0), V(0, 1, 0), V(-1, 0, 0)};
    case coopga::PrimitiveKind::Plane: return {V(0, 0, 0), V(1, 0, 0), V(0, 1, 0)};
    case coopga::PrimitiveKind::Sphere: return {V(1, 0, 0), V(0, 1, 0), V(-1, 0, 0), V(0, 0, 1)};
    }
    return {};
}

}  // namespace oracle
