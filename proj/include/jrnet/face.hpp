#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <vector>

namespace jrnet {

inline constexpr int kNumLandmarks = 68;

using Landmarks2d = Eigen::Matrix<double, kNumLandmarks, 2>;
using Points3d = Eigen::Matrix<double, kNumLandmarks, 3>;

/// PCA-style linear shape model: shape(alpha) = mean + sum_k alpha_k * stddev_k * component_k.
/// Components are orthonormal as flattened 204-vectors.
struct ShapeModel {
    Points3d mean_shape;
    std::vector<Points3d> components;
    Eigen::VectorXd stddevs;

    int num_components() const { return static_cast<int>(components.size()); }
    /// Throws unless components are mutually orthonormal (Gram = I +- 1e-8).
    void validate() const;
};

/// Small bundled model: five orthonormalized geometric deformation modes
/// (brow raise, brow furrow, mouth open, smile, pucker) on a stylized
/// 68-landmark layout with unit inter-ocular distance.
ShapeModel default_shape_model();

ShapeModel load_shape_model(const std::filesystem::path& path);
void save_shape_model(const std::filesystem::path& path, const ShapeModel& model);

struct LandmarkFrame {
    Landmarks2d points_2d = Landmarks2d::Zero();
    double timestamp_s = 0.0;
    bool valid = true;
};

/// 2x4 affine camera: x_img = M * [X Y Z 1]^T.
struct AffineCamera {
    Eigen::Matrix<double, 2, 4> matrix = Eigen::Matrix<double, 2, 4>::Zero();
};

/// Rigid head parameters recovered from an affine camera. translation.z()
/// is the inverse projection scale (an affine stand-in for depth).
struct HeadPose {
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double roll = 0.0, pitch = 0.0, yaw = 0.0; // radians
    double scale = 1.0;
};

Points3d synthesize_shape(const ShapeModel& model, const Eigen::VectorXd& alphas);

Landmarks2d project(const AffineCamera& camera, const Points3d& points);

struct FitOptions {
    double ridge_lambda = 1e-3;
    int max_iterations = 60; // alternation contracts by ~0.65 per round
    double tol_px = 1e-6;    // stop when the residual change drops below this
};

struct FitResult {
    AffineCamera camera;
    Eigen::VectorXd alphas;
    double residual_px = 0.0; // RMS reprojection residual
    std::vector<double> residual_history;
};

/// Normalized linear least-squares estimate of the 2x4 affine camera from
/// 2D-3D correspondences. Throws on degenerate (rank-deficient) input.
AffineCamera fit_affine_camera(const Landmarks2d& image_points, const Points3d& model_points);

/// Alternating least squares: camera given shape, then ridge-regularized
/// shape coefficients given camera.
FitResult fit_camera_and_shape(const Landmarks2d& landmarks, const ShapeModel& model,
                               const FitOptions& options = {});

HeadPose decompose_pose(const AffineCamera& camera);
/// Inverse of decompose_pose, used by the synthetic renderer and tests.
AffineCamera compose_camera(const HeadPose& pose);

/// Re-projects the fitted shape through the canonical frontal camera and
/// normalizes so the inter-ocular distance is exactly 1 with the eye
/// midpoint at the origin. Output is therefore in inter-ocular units.
Landmarks2d frontalize(const ShapeModel& model, const Eigen::VectorXd& alphas);

/// Six geometric expression features from a frontalized frame:
/// [left brow y, right brow y, inner brow x-distance, lip corner x-distance,
///  inter-lip y-distance, mean lip corner y].
Eigen::Matrix<double, 6, 1> face_features(const Landmarks2d& frontal);
extern const std::array<const char*, 6> kFaceFeatureNames;

/// [tx, ty, tz, roll, pitch, yaw].
Eigen::Matrix<double, 6, 1> head_features(const HeadPose& pose);
extern const std::array<const char*, 6> kHeadFeatureNames;

} // namespace jrnet
