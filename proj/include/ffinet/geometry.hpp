#pragma once

#include <cmath>
#include <numbers>

namespace ffinet {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }

    double norm() const { return std::hypot(x, y); }
};

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double theta) {
    const double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(theta, two_pi);
    if (r <= -std::numbers::pi) r += two_pi;
    if (r > std::numbers::pi) r -= two_pi;
    return r;
}

// Rotation by theta applied to v.
inline Vec2 rotate(const Vec2& v, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Rotation by -theta (i.e. R^T v): expresses v in the frame oriented at theta.
inline Vec2 rotate_into(const Vec2& v, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * v.x + s * v.y, -s * v.x + c * v.y};
}

// Local frame of a scene element: origin at its current position, x-axis
// along its heading.
struct AgentFrame {
    Vec2 origin;
    double heading = 0.0;  // radians, wrapped to (-pi, pi]

    Vec2 to_local(const Vec2& p) const { return rotate_into(p - origin, heading); }
    Vec2 to_world(const Vec2& p) const { return rotate(p, heading) + origin; }
};

// Receiver-frame displacement and heading difference between two elements.
struct RelativeGeometry {
    Vec2 delta_p;          // sender position expressed in the receiver's frame
    double delta_theta = 0.0;  // wrapped to (-pi, pi]
    double distance = 0.0;     // == |delta_p|
};

inline RelativeGeometry relative_geometry(const AgentFrame& receiver, const AgentFrame& sender) {
    RelativeGeometry rel;
    rel.delta_p = rotate_into(sender.origin - receiver.origin, receiver.heading);
    rel.delta_theta = wrap_angle(sender.heading - receiver.heading);
    rel.distance = rel.delta_p.norm();
    return rel;
}

}  // namespace ffinet
