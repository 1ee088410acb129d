#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace coopga {

class DegenerateInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegeneratePrimitive : public std::runtime_error {
public:
    DegeneratePrimitive(const std::string& kind, double measure)
        : std::runtime_error(message(kind, measure)), kind_(kind), measure_(measure)
    {
    }
    const std::string& kind() const { return kind_; }
    double measure() const { return measure_; }

private:
    static std::string message(const std::string& kind, double measure)
    {
        std::ostringstream os;
        os << "degenerate " << kind << " (measure " << measure << ")";
        return os.str();
    }

    std::string kind_;
    double measure_;
};

class RotationSingularity : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AntipodalNormals : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class JointLimit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularTaskInertia : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularManipulability : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularMass : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotConverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// malformed teleoperation message
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace coopga
