#include "jrnet/face.hpp"

#include "jrnet/config.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace jrnet {

// iBUG 68-point annotation groups used throughout this module.
namespace idx {
constexpr int jaw_begin = 0, jaw_end = 17;
constexpr int brow_l_begin = 17, brow_l_end = 22;
constexpr int brow_r_begin = 22, brow_r_end = 27;
constexpr int brow_inner_l = 21, brow_inner_r = 22;
constexpr int eye_l_begin = 36, eye_l_end = 42;
constexpr int eye_r_begin = 42, eye_r_end = 48;
constexpr int lip_corner_l = 48, lip_corner_r = 54;
constexpr int lip_inner_top = 62, lip_inner_bottom = 66;
} // namespace idx

const std::array<const char*, 6> kFaceFeatureNames = {
    "brow_left_y", "brow_right_y", "brow_inner_dx", "lip_corner_dx", "lip_gap_dy", "lip_corner_y"};
const std::array<const char*, 6> kHeadFeatureNames = {"head_tx", "head_ty", "head_tz",
                                                      "head_roll", "head_pitch", "head_yaw"};

void ShapeModel::validate() const {
    if (num_components() < 1) throw std::runtime_error("shape model needs at least one component");
    if (stddevs.size() != num_components())
        throw std::runtime_error("shape model stddev count mismatch");
    const int k = num_components();
    for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) {
            double dot = (components[i].reshaped().array() * components[j].reshaped().array()).sum();
            double expect = i == j ? 1.0 : 0.0;
            if (std::abs(dot - expect) > 1e-8)
                throw std::runtime_error("shape model components are not orthonormal");
        }
    }
}

namespace {

Eigen::Vector2d eye_center(const Landmarks2d& pts, int begin, int end) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (int i = begin; i < end; ++i) c += pts.row(i).transpose();
    return c / (end - begin);
}

// Stylized frontal 68-landmark layout, unit inter-ocular distance,
// x right, y up, z toward the camera.
Points3d stylized_mean_shape() {
    Points3d m = Points3d::Zero();
    using std::cos;
    using std::sin;
    const double pi = std::numbers::pi;

    // jaw contour: half-ellipse from left ear over the chin to right ear
    for (int t = 0; t < 17; ++t) {
        double ang = pi - t * pi / 16.0;
        m.row(idx::jaw_begin + t) << 0.95 * cos(ang), 0.15 - 1.2 * sin(ang), -0.25 + 0.3 * sin(ang);
    }
    // eyebrows: flat arcs above the eyes
    for (int t = 0; t < 5; ++t) {
        double u = t / 4.0; // 0 outer .. 1 inner
        double arch = 0.06 * sin(pi * (0.25 + 0.5 * u));
        m.row(idx::brow_l_begin + t) << -0.85 + 0.60 * u, 0.22 + arch, 0.05;
        m.row(idx::brow_r_begin + t) << 0.25 + 0.60 * (1.0 - u), 0.22 + arch, 0.05;
    }
    // right brow runs inner->outer in the annotation scheme; flip
    for (int t = 0; t < 5; ++t) m(idx::brow_r_begin + t, 0) = 0.25 + 0.60 * (t / 4.0);

    // nose bridge and nostril line
    const double bridge_y[4] = {0.10, -0.02, -0.14, -0.25};
    const double bridge_z[4] = {0.10, 0.14, 0.18, 0.22};
    for (int t = 0; t < 4; ++t) m.row(27 + t) << 0.0, bridge_y[t], bridge_z[t];
    const double nostril_x[5] = {-0.15, -0.075, 0.0, 0.075, 0.15};
    for (int t = 0; t < 5; ++t)
        m.row(31 + t) << nostril_x[t], -0.32, 0.10 + 0.03 * (1.0 - std::abs(nostril_x[t]) / 0.15);

    // eyes: ellipses centered at (+-0.5, 0)
    const double eye_ang[6] = {pi, 2 * pi / 3, pi / 3, 0.0, -pi / 3, -2 * pi / 3};
    for (int t = 0; t < 6; ++t) {
        double ex = 0.17 * cos(eye_ang[t]), ey = 0.07 * sin(eye_ang[t]);
        m.row(idx::eye_l_begin + t) << -0.5 + ex, ey, 0.02;
        m.row(idx::eye_r_begin + t) << 0.5 - ex, ey, 0.02; // mirrored: 42 is the inner corner
    }

    // outer lip loop (48 left corner, 51 top center, 57 bottom center)
    const double out_x[12] = {-0.28, -0.19, -0.08, 0.0, 0.08, 0.19, 0.28, 0.19, 0.08, 0.0, -0.08, -0.19};
    const double out_y[12] = {-0.55, -0.49, -0.47, -0.48, -0.47, -0.49, -0.55, -0.61, -0.64, -0.65, -0.64, -0.61};
    for (int t = 0; t < 12; ++t) m.row(48 + t) << out_x[t], out_y[t], 0.05;
    // inner lip loop (60 left corner, 62 top center, 66 bottom center)
    const double in_x[8] = {-0.22, -0.09, 0.0, 0.09, 0.22, 0.09, 0.0, -0.09};
    const double in_y[8] = {-0.55, -0.525, -0.525, -0.525, -0.55, -0.575, -0.575, -0.575};
    for (int t = 0; t < 8; ++t) m.row(60 + t) << in_x[t], in_y[t], 0.04;

    return m;
}

// Raw (pre-orthonormalization) deformation modes.
std::vector<Points3d> stylized_modes(const Points3d& mean) {
    std::vector<Points3d> modes(5, Points3d::Zero());

    // 1: brow raise
    for (int i = idx::brow_l_begin; i < idx::brow_r_end; ++i) modes[0](i, 1) = 1.0;
    for (int i = idx::eye_l_begin; i < idx::eye_r_end; ++i) modes[0](i, 1) = 0.15;

    // 2: brow furrow (inner brow corners pulled together and down)
    for (int t = 0; t < 5; ++t) {
        double w = t / 4.0; // strongest at the inner end
        modes[1](idx::brow_l_begin + t, 0) = 0.8 * w;
        modes[1](idx::brow_l_begin + t, 1) = -0.3 * w;
        modes[1](idx::brow_r_begin + t, 0) = -0.8 * (1.0 - w);
        modes[1](idx::brow_r_begin + t, 1) = -0.3 * (1.0 - w);
    }
    // right brow indices ascend outward; rebuild with matching weights
    for (int t = 0; t < 5; ++t) {
        double w = 1.0 - t / 4.0;
        modes[1](idx::brow_r_begin + t, 0) = -0.8 * w;
        modes[1](idx::brow_r_begin + t, 1) = -0.3 * w;
    }

    // 3: mouth open (lower lip and jaw drop)
    for (int i = 55; i <= 59; ++i) modes[2](i, 1) = -1.0;
    for (int i = 65; i <= 67; ++i) modes[2](i, 1) = -0.9;
    for (int i = 5; i <= 11; ++i) modes[2](i, 1) = -0.5 * (1.0 - std::abs(i - 8) / 4.0) - 0.2;
    modes[2](idx::lip_corner_l, 1) = -0.3;
    modes[2](idx::lip_corner_r, 1) = -0.3;

    // 4: smile (lip corners out and up)
    for (int i : {idx::lip_corner_l, 60}) {
        modes[3](i, 0) = -0.8;
        modes[3](i, 1) = 0.5;
    }
    for (int i : {idx::lip_corner_r, 64}) {
        modes[3](i, 0) = 0.8;
        modes[3](i, 1) = 0.5;
    }
    for (int i : {49, 59, 61, 67}) {
        modes[3](i, 0) = -0.4;
        modes[3](i, 1) = 0.25;
    }
    for (int i : {53, 55, 63, 65}) {
        modes[3](i, 0) = 0.4;
        modes[3](i, 1) = 0.25;
    }

    // 5: pucker (mouth narrows, lips push forward)
    for (int i = 48; i < 68; ++i) {
        modes[4](i, 0) = -0.6 * mean(i, 0) / 0.28;
        modes[4](i, 2) = 0.3;
    }

    return modes;
}

} // namespace

ShapeModel default_shape_model() {
    ShapeModel model;
    model.mean_shape = stylized_mean_shape();
    auto raw = stylized_modes(model.mean_shape);

    // Gram-Schmidt over flattened 204-vectors
    std::vector<Eigen::VectorXd> basis;
    for (const Points3d& mode : raw) {
        Eigen::VectorXd v = mode.reshaped();
        for (const Eigen::VectorXd& b : basis) v -= b.dot(v) * b;
        double n = v.norm();
        if (n < 1e-12) throw std::runtime_error("degenerate deformation mode");
        basis.push_back(v / n);
    }
    for (const Eigen::VectorXd& b : basis) {
        Points3d comp;
        comp.reshaped() = b;
        model.components.push_back(comp);
    }
    model.stddevs = Eigen::VectorXd(5);
    model.stddevs << 0.08, 0.05, 0.12, 0.08, 0.04;
    model.validate();
    return model;
}

ShapeModel load_shape_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open shape model: " + path.string());
    std::string magic;
    int k = 0, n = 0;
    in >> magic >> k >> n;
    if (magic != "shapemodel" || k < 1 || n != kNumLandmarks)
        throw std::runtime_error("malformed shape model header: " + path.string());
    ShapeModel model;
    auto read_points = [&](Points3d& pts) {
        for (int i = 0; i < kNumLandmarks; ++i)
            for (int j = 0; j < 3; ++j)
                if (!(in >> pts(i, j)))
                    throw std::runtime_error("truncated shape model: " + path.string());
    };
    read_points(model.mean_shape);
    model.stddevs = Eigen::VectorXd(k);
    for (int i = 0; i < k; ++i)
        if (!(in >> model.stddevs(i)))
            throw std::runtime_error("truncated shape model: " + path.string());
    model.components.resize(k);
    for (int i = 0; i < k; ++i) read_points(model.components[i]);
    model.validate();
    return model;
}

void save_shape_model(const std::filesystem::path& path, const ShapeModel& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write shape model: " + path.string());
    out << "shapemodel " << model.num_components() << ' ' << kNumLandmarks << '\n';
    auto write_points = [&](const Points3d& pts) {
        for (int i = 0; i < kNumLandmarks; ++i)
            out << format_double(pts(i, 0)) << ' ' << format_double(pts(i, 1)) << ' '
                << format_double(pts(i, 2)) << '\n';
    };
    write_points(model.mean_shape);
    for (int i = 0; i < model.num_components(); ++i) out << format_double(model.stddevs(i)) << '\n';
    for (const Points3d& c : model.components) write_points(c);
}

Points3d synthesize_shape(const ShapeModel& model, const Eigen::VectorXd& alphas) {
    if (alphas.size() != model.num_components())
        throw std::runtime_error("alphas length does not match component count");
    Points3d shape = model.mean_shape;
    for (int k = 0; k < model.num_components(); ++k)
        shape += alphas(k) * model.stddevs(k) * model.components[k];
    return shape;
}

Landmarks2d project(const AffineCamera& camera, const Points3d& points) {
    Eigen::Matrix<double, kNumLandmarks, 4> homo;
    homo.leftCols<3>() = points;
    homo.col(3).setOnes();
    return homo * camera.matrix.transpose();
}

AffineCamera fit_affine_camera(const Landmarks2d& image_points, const Points3d& model_points) {
    // normalization (translate centroids to origin, fix RMS radius)
    Eigen::RowVector2d c2 = image_points.colwise().mean();
    Eigen::RowVector3d c3 = model_points.colwise().mean();
    Landmarks2d x2 = image_points.rowwise() - c2;
    Points3d x3 = model_points.rowwise() - c3;

    double rms2 = std::sqrt(x2.rowwise().squaredNorm().mean());
    double rms3 = std::sqrt(x3.rowwise().squaredNorm().mean());
    if (rms3 < 1e-12) throw std::runtime_error("degenerate landmark configuration");
    double s2 = rms2 < 1e-12 ? 1.0 : std::numbers::sqrt2 / rms2;
    double s3 = std::sqrt(3.0) / rms3;
    x2 *= s2;
    x3 *= s3;

    // the 2D configuration must span the plane
    Eigen::Matrix2d scatter = x2.transpose() * x2;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(scatter);
    if (es.eigenvalues()(0) < 1e-12 * std::max(es.eigenvalues()(1), 1e-300))
        throw std::runtime_error("degenerate landmark configuration");

    Eigen::Matrix<double, kNumLandmarks, 4> design;
    design.leftCols<3>() = x3;
    design.col(3).setOnes();
    Eigen::ColPivHouseholderQR<Eigen::Matrix<double, kNumLandmarks, 4>> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < 4) throw std::runtime_error("degenerate landmark configuration");

    Eigen::Matrix<double, 4, 2> rows = qr.solve(x2);

    // denormalize: A = T2^-1 * [A~; 0 0 0 1] * T3
    Eigen::Matrix<double, 3, 4> a_norm;
    a_norm.topRows<2>() = rows.transpose();
    a_norm.row(2) << 0, 0, 0, 1;

    Eigen::Matrix3d t2inv = Eigen::Matrix3d::Identity();
    t2inv(0, 0) = t2inv(1, 1) = 1.0 / s2;
    t2inv(0, 2) = c2(0);
    t2inv(1, 2) = c2(1);

    Eigen::Matrix4d t3 = Eigen::Matrix4d::Identity() * s3;
    t3(3, 3) = 1.0;
    t3.block<3, 1>(0, 3) = -s3 * c3.transpose();

    AffineCamera camera;
    camera.matrix = (t2inv * a_norm * t3).topRows<2>();
    return camera;
}

FitResult fit_camera_and_shape(const Landmarks2d& landmarks, const ShapeModel& model,
                               const FitOptions& options) {
    const int k = model.num_components();
    FitResult result;
    result.alphas = Eigen::VectorXd::Zero(k);

    auto rms_residual = [&](const AffineCamera& cam, const Eigen::VectorXd& alphas) {
        Landmarks2d proj = project(cam, synthesize_shape(model, alphas));
        return std::sqrt((proj - landmarks).rowwise().squaredNorm().mean());
    };

    double prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        Points3d shape = synthesize_shape(model, result.alphas);
        result.camera = fit_affine_camera(landmarks, shape);

        // ridge-regularized coefficients for the fixed camera
        Eigen::Matrix<double, 2, 3> lin = result.camera.matrix.leftCols<3>();
        Landmarks2d base = project(result.camera, model.mean_shape);
        Eigen::VectorXd rhs = (landmarks - base).reshaped<Eigen::RowMajor>();
        Eigen::MatrixXd design(2 * kNumLandmarks, k);
        for (int c = 0; c < k; ++c) {
            Eigen::Matrix<double, kNumLandmarks, 2> dproj =
                (model.stddevs(c) * model.components[c]) * lin.transpose();
            design.col(c) = dproj.reshaped<Eigen::RowMajor>();
        }
        Eigen::MatrixXd gram = design.transpose() * design;
        gram.diagonal().array() += options.ridge_lambda;
        result.alphas = gram.ldlt().solve(design.transpose() * rhs);

        double res = rms_residual(result.camera, result.alphas);
        result.residual_history.push_back(res);
        if (std::abs(prev - res) < options.tol_px) {
            prev = res;
            break;
        }
        prev = res;
    }
    result.residual_px = result.residual_history.back();
    return result;
}

HeadPose decompose_pose(const AffineCamera& camera) {
    Eigen::Matrix<double, 2, 3> block = camera.matrix.leftCols<3>();
    double n0 = block.row(0).norm();
    double n1 = block.row(1).norm();
    if (n0 < 1e-12 || n1 < 1e-12) throw std::runtime_error("rank-deficient affine camera");

    Eigen::Vector3d r0 = block.row(0).transpose() / n0;
    Eigen::Vector3d r1 = block.row(1).transpose() / n1;
    Eigen::Vector3d r1o = r1 - r1.dot(r0) * r0;
    if (r1o.norm() < 1e-9) throw std::runtime_error("rank-deficient affine camera");
    r1o.normalize();
    Eigen::Vector3d r2 = r0.cross(r1o);

    Eigen::Matrix3d rot;
    rot.row(0) = r0.transpose();
    rot.row(1) = r1o.transpose();
    rot.row(2) = r2.transpose();

    HeadPose pose;
    pose.scale = 0.5 * (n0 + n1);
    // R = Rz(roll) * Rx(pitch) * Ry(yaw)
    pose.pitch = std::asin(std::clamp(rot(2, 1), -1.0, 1.0));
    pose.yaw = std::atan2(-rot(2, 0), rot(2, 2));
    pose.roll = std::atan2(-rot(0, 1), rot(1, 1));
    pose.translation << camera.matrix(0, 3), camera.matrix(1, 3), 1.0 / pose.scale;
    return pose;
}

AffineCamera compose_camera(const HeadPose& pose) {
    double cr = std::cos(pose.roll), sr = std::sin(pose.roll);
    double cp = std::cos(pose.pitch), sp = std::sin(pose.pitch);
    double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
    Eigen::Matrix3d rz, rx, ry;
    rz << cr, -sr, 0, sr, cr, 0, 0, 0, 1;
    rx << 1, 0, 0, 0, cp, -sp, 0, sp, cp;
    ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
    Eigen::Matrix3d rot = rz * rx * ry;

    AffineCamera camera;
    camera.matrix.leftCols<3>() = pose.scale * rot.topRows<2>();
    camera.matrix(0, 3) = pose.translation.x();
    camera.matrix(1, 3) = pose.translation.y();
    return camera;
}

Landmarks2d frontalize(const ShapeModel& model, const Eigen::VectorXd& alphas) {
    Points3d shape = synthesize_shape(model, alphas);
    Landmarks2d frontal = shape.leftCols<2>();

    Eigen::Vector2d left = eye_center(frontal, idx::eye_l_begin, idx::eye_l_end);
    Eigen::Vector2d right = eye_center(frontal, idx::eye_r_begin, idx::eye_r_end);
    double iod = (right - left).norm();
    if (iod < 1e-12) throw std::runtime_error("degenerate fitted shape: zero inter-ocular distance");
    Eigen::RowVector2d mid = 0.5 * (left + right).transpose();
    frontal = (frontal.rowwise() - mid) / iod;
    return frontal;
}

Eigen::Matrix<double, 6, 1> face_features(const Landmarks2d& frontal) {
    Eigen::Matrix<double, 6, 1> f;
    double brow_l = 0.0, brow_r = 0.0;
    for (int i = idx::brow_l_begin; i < idx::brow_l_end; ++i) brow_l += frontal(i, 1);
    for (int i = idx::brow_r_begin; i < idx::brow_r_end; ++i) brow_r += frontal(i, 1);
    f(0) = brow_l / 5.0;
    f(1) = brow_r / 5.0;
    f(2) = std::abs(frontal(idx::brow_inner_l, 0) - frontal(idx::brow_inner_r, 0));
    f(3) = std::abs(frontal(idx::lip_corner_l, 0) - frontal(idx::lip_corner_r, 0));
    f(4) = std::abs(frontal(idx::lip_inner_top, 1) - frontal(idx::lip_inner_bottom, 1));
    f(5) = 0.5 * (frontal(idx::lip_corner_l, 1) + frontal(idx::lip_corner_r, 1));
    return f;
}

Eigen::Matrix<double, 6, 1> head_features(const HeadPose& pose) {
    Eigen::Matrix<double, 6, 1> h;
    h << pose.translation.x(), pose.translation.y(), pose.translation.z(), pose.roll, pose.pitch,
        pose.yaw;
    return h;
}

} // namespace jrnet
