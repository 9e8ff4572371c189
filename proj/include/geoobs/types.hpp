#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace geoobs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Chart coordinates of a configuration.
struct Point {
    Vec coords;

    Point() = default;
    explicit Point(Vec c) : coords(std::move(c)) {}
    Point(std::initializer_list<double> values) : coords(static_cast<Eigen::Index>(values.size())) {
        Eigen::Index i = 0;
        for (double v : values) coords[i++] = v;
    }

    [[nodiscard]] Eigen::Index size() const { return coords.size(); }
    [[nodiscard]] bool finite() const { return coords.allFinite(); }
    double operator[](Eigen::Index i) const { return coords[i]; }
};

/// Tangent vector: base point plus chart components.
struct Tangent {
    Point base;
    Vec components;

    Tangent() = default;
    Tangent(Point b, Vec c) : base(std::move(b)), components(std::move(c)) {}

    [[nodiscard]] Eigen::Index size() const { return components.size(); }
    [[nodiscard]] bool finite() const { return base.finite() && components.allFinite(); }
};

inline Tangent zero_tangent(const Point& at) { return {at, Vec::Zero(at.size())}; }

enum class ErrorKind {
    InvalidArgument,
    Domain,
    DegenerateMetric,
    ChartExit,
    LogDivergence,
    InjectivityViolation,
    DegeneratePlane,
    InadmissibleRegion,
    BoundInapplicable,
    OutsideContractionRegion,
};

const char* to_string(ErrorKind kind);

/// Every geometric and simulation failure is reported through this type.
class GeometryError : public std::runtime_error {
public:
    GeometryError(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const { return kind_; }

    /// Last valid state for chart exits.
    std::optional<Tangent> last_valid;
    /// Offending geodesic distance for injectivity violations.
    std::optional<double> distance;

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

} // namespace geoobs
