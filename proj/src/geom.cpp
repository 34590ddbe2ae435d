#include "rnadesign/geom.hpp"

#include "rnadesign/rng.hpp"

namespace rnadesign {

Mat3 axis_angle_rotation(const Vec3& axis, double theta) {
    const Vec3 u = unit_or_zero(axis);
    const double c = std::cos(theta), s = std::sin(theta), t = 1.0 - c;
    return Mat3{{{t * u[0] * u[0] + c, t * u[0] * u[1] - s * u[2], t * u[0] * u[2] + s * u[1]},
                 {t * u[0] * u[1] + s * u[2], t * u[1] * u[1] + c, t * u[1] * u[2] - s * u[0]},
                 {t * u[0] * u[2] - s * u[1], t * u[1] * u[2] + s * u[0], t * u[2] * u[2] + c}}};
}

Mat3 random_rotation(RngStream& rng) {
    Vec3 axis;
    double n;
    do {
        axis = {rng.normal(), rng.normal(), rng.normal()};
        n = norm(axis);
    } while (n < 1e-8);
    return axis_angle_rotation(axis, rng.uniform(0.0, 2.0 * M_PI));
}

}  // namespace rnadesign
