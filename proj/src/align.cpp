#include "rnadesign/align.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace rnadesign {

namespace {

Vec3 centroid(const Coords& pts) {
    Vec3 c = {0, 0, 0};
    for (const auto& p : pts) c = c + p;
    return (1.0 / static_cast<double>(pts.size())) * c;
}

void check_pair(const Coords& a, const Coords& b, const char* op) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(op) + ": coordinate counts differ");
    if (a.size() < 3) throw std::invalid_argument(std::string(op) + ": need at least 3 points");
}

}  // namespace

Mat3 kabsch_rotation(const Coords& a, const Coords& b) {
    check_pair(a, b, "kabsch_rotation");
    const Vec3 ca = centroid(a), cb = centroid(b);
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Vec3 pa = a[i] - ca, pb = b[i] - cb;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) h(r, c) += pa[r] * pb[c];
    }
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
    const double d = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
    s(2, 2) = d;
    const Eigen::Matrix3d r = v * s * u.transpose();
    Mat3 out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[i][j] = r(i, j);
    return out;
}

double kabsch_rmsd(const Coords& a, const Coords& b) {
    check_pair(a, b, "kabsch_rmsd");
    const Mat3 rot = kabsch_rotation(a, b);
    const Vec3 ca = centroid(a), cb = centroid(b);
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Vec3 d = mat_apply(rot, a[i] - ca) - (b[i] - cb);
        ss += dot(d, d);
    }
    return std::sqrt(ss / static_cast<double>(a.size()));
}

double tm_d0(std::size_t n) {
    const double d0 = 0.6 * std::sqrt(static_cast<double>(n) - 0.5) - 2.5;
    return d0 > 0.3 ? d0 : 0.3;
}

double tm_score(const Coords& a, const Coords& b) {
    check_pair(a, b, "tm_score");
    const Mat3 rot = kabsch_rotation(a, b);
    const Vec3 ca = centroid(a), cb = centroid(b);
    const double d0 = tm_d0(a.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Vec3 d = mat_apply(rot, a[i] - ca) - (b[i] - cb);
        const double ratio = norm(d) / d0;
        s += 1.0 / (1.0 + ratio * ratio);
    }
    return s / static_cast<double>(a.size());
}

}  // namespace rnadesign
