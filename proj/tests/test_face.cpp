#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jrnet/face.hpp"
#include "jrnet/ingest.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace jrnet;
namespace fs = std::filesystem;

namespace {

constexpr double deg = std::numbers::pi / 180.0;

AffineCamera simple_camera(double scale, double tx = 320.0, double ty = 240.0) {
    HeadPose pose;
    pose.scale = scale;
    pose.translation << tx, ty, 1.0 / scale;
    return compose_camera(pose);
}

} // namespace

TEST_CASE("bundled model is orthonormal and has unit inter-ocular distance") {
    ShapeModel model = default_shape_model();
    CHECK(model.num_components() == 5);
    model.validate(); // throws unless Gram = I +- 1e-8

    Eigen::Vector3d left = Eigen::Vector3d::Zero(), right = Eigen::Vector3d::Zero();
    for (int i = 36; i < 42; ++i) left += model.mean_shape.row(i).transpose();
    for (int i = 42; i < 48; ++i) right += model.mean_shape.row(i).transpose();
    CHECK(((right - left) / 6.0).norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("shape model file round-trip") {
    ShapeModel model = default_shape_model();
    fs::path dir = fs::temp_directory_path() / "jrnet_test_face";
    fs::create_directories(dir);
    save_shape_model(dir / "model.txt", model);
    ShapeModel back = load_shape_model(dir / "model.txt");
    CHECK((back.mean_shape - model.mean_shape).norm() == doctest::Approx(0.0));
    CHECK((back.stddevs - model.stddevs).norm() == doctest::Approx(0.0));
    for (int k = 0; k < model.num_components(); ++k)
        CHECK((back.components[k] - model.components[k]).norm() == doctest::Approx(0.0));
}

TEST_CASE("synthesize_shape: zero alphas give the mean, e1 adds one mode") {
    ShapeModel model = default_shape_model();
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
    CHECK((synthesize_shape(model, zero) - model.mean_shape).norm() == doctest::Approx(0.0));

    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(5);
    e1(0) = 1.0;
    Points3d expect = model.mean_shape + model.stddevs(0) * model.components[0];
    CHECK((synthesize_shape(model, e1) - expect).norm() == doctest::Approx(0.0));

    Eigen::VectorXd wrong = Eigen::VectorXd::Zero(4);
    CHECK_THROWS(synthesize_shape(model, wrong));
}

TEST_CASE("camera fit reproduces an exact mean-shape projection") {
    ShapeModel model = default_shape_model();
    AffineCamera cam = simple_camera(120.0);
    Landmarks2d projected = project(cam, model.mean_shape);

    FitResult fit = fit_camera_and_shape(projected, model);
    Landmarks2d refit = project(fit.camera, synthesize_shape(model, fit.alphas));
    CHECK((refit - projected).rowwise().norm().maxCoeff() < 1e-9);
    CHECK(fit.alphas.norm() < 1e-6);
    CHECK(fit.residual_px < 1e-9);
}

TEST_CASE("alpha round-trip: project a random expression, refit, recover") {
    ShapeModel model = default_shape_model();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dist(-1.5, 1.5);
    FitOptions exact;
    exact.ridge_lambda = 0.0; // noiseless recovery check
    exact.max_iterations = 100;
    exact.tol_px = 1e-13;
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::VectorXd alphas(5);
        for (int k = 0; k < 5; ++k) alphas(k) = dist(rng);
        HeadPose pose;
        pose.scale = 100.0;
        pose.translation << 320.0, 240.0, 0.01;
        pose.yaw = 10 * deg;
        pose.pitch = -5 * deg;
        Landmarks2d observed = project(compose_camera(pose), synthesize_shape(model, alphas));
        FitResult fit = fit_camera_and_shape(observed, model, exact);
        CHECK((fit.alphas - alphas).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("fit residual history is non-increasing") {
    ShapeModel model = default_shape_model();
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.5);
    Eigen::VectorXd alphas(5);
    alphas << 0.8, -0.5, 1.2, 0.3, -0.2;
    Landmarks2d observed = project(simple_camera(100.0), synthesize_shape(model, alphas));
    for (int i = 0; i < kNumLandmarks; ++i) {
        observed(i, 0) += noise(rng);
        observed(i, 1) += noise(rng);
    }
    FitResult fit = fit_camera_and_shape(observed, model);
    for (std::size_t i = 1; i < fit.residual_history.size(); ++i)
        CHECK(fit.residual_history[i] <= fit.residual_history[i - 1] + 1e-9);
}

TEST_CASE("collinear landmarks are rejected as degenerate") {
    ShapeModel model = default_shape_model();
    Landmarks2d collinear;
    for (int i = 0; i < kNumLandmarks; ++i) collinear.row(i) << i * 2.0, i * 3.0 + 1.0;
    CHECK_THROWS_WITH(fit_camera_and_shape(collinear, model),
                      doctest::Contains("degenerate"));
}

TEST_CASE("decompose_pose: scaled identity camera") {
    AffineCamera cam = simple_camera(7.0, 1.5, -2.0);
    HeadPose pose = decompose_pose(cam);
    CHECK(pose.scale == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(pose.roll == doctest::Approx(0.0));
    CHECK(pose.pitch == doctest::Approx(0.0));
    CHECK(pose.yaw == doctest::Approx(0.0));
    CHECK(pose.translation.x() == doctest::Approx(1.5));
    CHECK(pose.translation.y() == doctest::Approx(-2.0));
    CHECK(pose.translation.z() == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("compose/decompose round-trip across the working angle range") {
    for (double roll : {-70.0, -25.0, 0.0, 40.0, 75.0})
        for (double pitch : {-75.0, -30.0, 0.0, 30.0, 75.0})
            for (double yaw : {-75.0, -20.0, 0.0, 55.0, 79.0}) {
                HeadPose in;
                in.roll = roll * deg;
                in.pitch = pitch * deg;
                in.yaw = yaw * deg;
                in.scale = 50.0;
                in.translation << 10.0, -4.0, 1.0 / 50.0;
                HeadPose out = decompose_pose(compose_camera(in));
                CHECK(out.roll == doctest::Approx(in.roll).epsilon(1e-9));
                CHECK(out.pitch == doctest::Approx(in.pitch).epsilon(1e-9));
                CHECK(out.yaw == doctest::Approx(in.yaw).epsilon(1e-9));
                CHECK(out.scale == doctest::Approx(50.0).epsilon(1e-9));
            }
}

TEST_CASE("zero camera block is rejected") {
    AffineCamera cam;
    cam.matrix.setZero();
    CHECK_THROWS_WITH(decompose_pose(cam), doctest::Contains("rank-deficient"));
}

TEST_CASE("frontalize pins the inter-ocular distance to 1") {
    ShapeModel model = default_shape_model();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd alphas(5);
        for (int k = 0; k < 5; ++k) alphas(k) = dist(rng);
        Landmarks2d frontal = frontalize(model, alphas);
        Eigen::Vector2d left = Eigen::Vector2d::Zero(), right = Eigen::Vector2d::Zero();
        for (int i = 36; i < 42; ++i) left += frontal.row(i).transpose();
        for (int i = 42; i < 48; ++i) right += frontal.row(i).transpose();
        CHECK(((right - left) / 6.0).norm() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("yaw-rotated expression frontalizes to the frontal rendering") {
    ShapeModel model = default_shape_model();
    Eigen::VectorXd alphas(5);
    alphas << 0.5, -0.3, 1.0, 0.7, 0.0;

    HeadPose pose;
    pose.scale = 100.0;
    pose.yaw = 20 * deg;
    pose.translation << 320.0, 240.0, 0.01;
    Landmarks2d observed = project(compose_camera(pose), synthesize_shape(model, alphas));

    FitResult fit = fit_camera_and_shape(observed, model);
    HeadPose recovered = decompose_pose(fit.camera);
    CHECK(recovered.yaw == doctest::Approx(20 * deg).epsilon(0.025)); // within 0.5 degrees

    Landmarks2d frontal_fit = frontalize(model, fit.alphas);
    Landmarks2d frontal_true = frontalize(model, alphas);
    // 1 px at scale 100 is 0.01 inter-ocular units
    CHECK((frontal_fit - frontal_true).rowwise().norm().maxCoeff() < 0.01);
}

TEST_CASE("mouth-open ramp raises the lip-gap feature monotonically") {
    ShapeModel model = default_shape_model();
    LandmarkProgram prog;
    Wave ramp;
    ramp.kind = WaveKind::ramp;
    ramp.amplitude = 2.0;
    ramp.t_start = 0.0;
    ramp.t_end = 4.0;
    prog.alpha_waves.push_back({2, ramp}); // mouth-open mode
    SynthLandmarks out = synth_landmarks(4.0, 25.0, prog, model, 1);

    double prev = -1.0;
    for (std::size_t i = 0; i < out.true_face_features.size(); ++i) {
        double gap = out.true_face_features[i](4);
        CHECK(gap >= prev - 1e-12);
        prev = gap;
    }
    CHECK(out.true_face_features.back()(4) > out.true_face_features.front()(4) + 0.05);

    // the fitted pipeline tracks the generator curve
    for (std::size_t i = 0; i < out.frames.size(); i += 20) {
        FitResult fit = fit_camera_and_shape(out.frames[i].points_2d, model);
        double gap = face_features(frontalize(model, fit.alphas))(4);
        CHECK(gap == doctest::Approx(out.true_face_features[i](4)).epsilon(0.02));
    }
}

TEST_CASE("pure head translation leaves face features unchanged") {
    ShapeModel model = default_shape_model();
    Eigen::VectorXd alphas(5);
    alphas << 0.3, 0.2, 0.6, -0.4, 0.1;
    Points3d shape = synthesize_shape(model, alphas);

    FitResult base = fit_camera_and_shape(project(simple_camera(100.0, 320, 240), shape), model);
    FitResult moved = fit_camera_and_shape(project(simple_camera(100.0, 410, 150), shape), model);

    Eigen::Matrix<double, 6, 1> f0 = face_features(frontalize(model, base.alphas));
    Eigen::Matrix<double, 6, 1> f1 = face_features(frontalize(model, moved.alphas));
    CHECK((f1 - f0).cwiseAbs().maxCoeff() < 1e-6);

    HeadPose p0 = decompose_pose(base.camera);
    HeadPose p1 = decompose_pose(moved.camera);
    CHECK(p1.translation.x() - p0.translation.x() == doctest::Approx(90.0).epsilon(1e-6));
    CHECK(p1.translation.y() - p0.translation.y() == doctest::Approx(-90.0).epsilon(1e-6));
}

TEST_CASE("face features of the neutral mean shape match the frozen fixture") {
    ShapeModel model = default_shape_model();
    Eigen::Matrix<double, 6, 1> f =
        face_features(frontalize(model, Eigen::VectorXd::Zero(5)));
    // regression fixture computed once from the bundled model
    CHECK(f(0) == doctest::Approx(0.27114367152874802).epsilon(1e-12));
    CHECK(f(1) == doctest::Approx(0.27114367152874802).epsilon(1e-12));
    CHECK(f(2) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f(3) == doctest::Approx(0.56).epsilon(1e-12));
    CHECK(f(4) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(f(5) == doctest::Approx(-0.55).epsilon(1e-12));
}
