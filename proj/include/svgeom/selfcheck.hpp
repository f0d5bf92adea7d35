#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <svgeom/camera.hpp>
#include <svgeom/colormap.hpp>
#include <svgeom/geometry_tensor.hpp>
#include <svgeom/heightmap.hpp>
#include <svgeom/io/binary.hpp>
#include <svgeom/io/docs.hpp>
#include <svgeom/io/png.hpp>
#include <svgeom/io/text.hpp>
#include <svgeom/losses.hpp>
#include <svgeom/nn/attention.hpp>
#include <svgeom/nn/pac.hpp>
#include <svgeom/nn/reference.hpp>
#include <svgeom/robust_loss.hpp>
#include <svgeom/ssim.hpp>
#include <svgeom/warp.hpp>

namespace svgeom {

struct CheckResult {
    std::string name;
    bool ok = false;
    std::string detail; // non-empty on failure
};

namespace selfcheck_detail {

// Deterministic by construction: every check seeds its own generator, so
// results do not depend on check order or wall clock.
class Rand {
  public:
    explicit Rand(unsigned seed) : gen_(seed) {}
    double operator()(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }

  private:
    std::mt19937 gen_;
};

inline Intrinsics poly_intrinsics() {
    Intrinsics k;
    k.model = CameraModel::polynomial;
    k.width = 1280;
    k.height = 966;
    k.cx = 640.0;
    k.cy = 483.0;
    k.a = {339.749, -31.988, 48.275, -7.201};
    return k;
}

inline std::vector<Intrinsics> all_models() {
    std::vector<Intrinsics> models;
    models.push_back(poly_intrinsics());
    Intrinsics k;
    k.width = 1280;
    k.height = 966;
    k.cx = 640.0;
    k.cy = 483.0;
    k.model = CameraModel::ucm;
    k.f = 350.0;
    k.xi = 0.8;
    models.push_back(k);
    k.model = CameraModel::eucm;
    k.xi = 0.0;
    k.alpha = 0.6;
    k.beta = 1.2;
    models.push_back(k);
    k.model = CameraModel::double_sphere;
    k.xi = -0.2;
    k.alpha = 0.6;
    k.beta = 1.0;
    models.push_back(k);
    k.model = CameraModel::stereographic;
    k.f = 300.0;
    models.push_back(k);
    k.model = CameraModel::rectilinear;
    k.width = 640;
    k.height = 480;
    k.cx = 320.0;
    k.cy = 240.0;
    k.f = 500.0;
    models.push_back(k);
    return models;
}

inline Camera small_rect_camera() {
    Intrinsics k;
    k.model = CameraModel::rectilinear;
    k.width = 64;
    k.height = 48;
    k.cx = 32.0;
    k.cy = 24.0;
    k.f = 40.0;
    return Camera(k);
}

inline std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace selfcheck_detail

/// Run the built-in oracle battery: projection round trips, model-reduction
/// limits, loss closed forms, warp identities, kernel brute-force matches,
/// grid examples, and file-format round trips. With `perturb` set, one
/// golden value is deliberately shifted so callers can confirm that failures
/// surface with the check's name attached.
inline std::vector<CheckResult> run_selfchecks(bool perturb = false) {
    namespace sd = selfcheck_detail;
    std::vector<CheckResult> results;
    const auto run = [&](const std::string &name, const std::function<std::string()> &body) {
        CheckResult r;
        r.name = name;
        try {
            r.detail = body();
            r.ok = r.detail.empty();
        } catch (const std::exception &err) {
            r.ok = false;
            r.detail = err.what();
        }
        results.push_back(std::move(r));
    };

    // -- projection round trips, one check per model -------------------------
    for (const Intrinsics &k : sd::all_models()) {
        run(std::string("camera_round_trip_") + to_string(k.model), [k]() -> std::string {
            sd::Rand rand(11u);
            const Camera cam(k);
            const double tol = k.model == CameraModel::polynomial ? 1e-5 : 1e-6;
            double worst = 0.0;
            int done = 0;
            while (done < 1000) {
                const double u = rand(0.0, k.width);
                const double v = rand(0.0, k.height);
                const double rho = std::hypot(u - k.cx, v - k.cy);
                if (rho >= 0.999 * cam.rho_max())
                    continue;
                const ProjectedPixel back = cam.project(cam.unproject(u, v));
                if (!back.valid)
                    return "round trip lost pixel " + sd::fmt(u) + "," + sd::fmt(v);
                worst = std::max(worst, std::hypot(back.u - u, back.v - v));
                ++done;
            }
            if (worst >= tol)
                return "worst round-trip error " + sd::fmt(worst) + " px";
            return "";
        });
    }

    // -- closed-form models collapse to the pinhole when their extra
    //    parameters vanish ---------------------------------------------------
    run("model_reduction_identities", []() -> std::string {
        Intrinsics k;
        k.width = 1280;
        k.height = 966;
        k.cx = 640.0;
        k.cy = 483.0;
        k.f = 123.0;
        k.model = CameraModel::rectilinear;
        const Camera rect(k);
        k.model = CameraModel::ucm;
        k.xi = 0.0;
        const Camera ucm(k);
        k.model = CameraModel::eucm;
        k.alpha = 0.0;
        k.beta = 1.7;
        const Camera eucm(k);
        k.model = CameraModel::double_sphere;
        k.alpha = 0.0;
        k.beta = 1.0;
        const Camera ds(k);
        for (double theta = 0.01; theta <= 1.3; theta += 0.01) {
            const double want = rect.radial_forward(theta);
            for (const Camera *cam : {&ucm, &eucm, &ds}) {
                const double got = cam->radial_forward(theta);
                if (std::abs(got - want) > 1e-12 * want)
                    return "mismatch at theta " + sd::fmt(theta);
            }
        }
        return "";
    });

    // -- table-based polynomial inversion agrees with Newton ------------------
    run("polynomial_lut_inverse", []() -> std::string {
        sd::Rand rand(12u);
        const Camera cam(sd::poly_intrinsics());
        const RootLut lut(cam);
        double worst = 0.0;
        for (int i = 0; i < 500; ++i) {
            const double rho = rand(0.0, cam.rho_max());
            worst = std::max(worst, std::abs(lut(rho) - cam.radial_inverse(rho)));
        }
        if (worst >= 1e-5)
            return "worst angle disagreement " + sd::fmt(worst) + " rad";
        return "";
    });

    // -- robust loss closed forms and gradient --------------------------------
    run("robust_loss_special_cases", []() -> std::string {
        const double inf = std::numeric_limits<double>::infinity();
        for (double c : {0.5, 1.0, 2.0})
            for (double xi = -3.0; xi <= 3.0; xi += 0.25) {
                const double z = xi / c;
                const struct {
                    double alpha, want;
                } cases[] = {
                    {2.0, 0.5 * z * z},
                    {0.0, std::log1p(0.5 * z * z)},
                    {-2.0, 2.0 * z * z / (z * z + 4.0)},
                    {-inf, -std::expm1(-0.5 * z * z)},
                };
                for (const auto &cs : cases)
                    if (std::abs(robust_loss(xi, {cs.alpha, c}) - cs.want) > 1e-10)
                        return "alpha " + sd::fmt(cs.alpha) + " at xi " + sd::fmt(xi);
            }
        return "";
    });
    run("robust_loss_gradient", []() -> std::string {
        const double inf = std::numeric_limits<double>::infinity();
        const double h = 1e-5;
        for (double alpha : {-2.0, 0.0, 1.0, 2.0, -inf})
            for (double c : {0.7, 1.0})
                for (double xi = -3.0; xi <= 3.0; xi += 0.25) {
                    if (std::abs(xi) < 1e-12)
                        continue;
                    const RobustParams p{alpha, c};
                    const double fd = (robust_loss(xi + h, p) - robust_loss(xi - h, p)) / (2 * h);
                    const double an = robust_loss_grad(xi, p);
                    if (std::abs(an - fd) > 1e-5 * std::max(std::abs(fd), 1e-3))
                        return "alpha " + sd::fmt(alpha) + " xi " + sd::fmt(xi);
                }
        return "";
    });
    run("robust_loss_spot_value", [perturb]() -> std::string {
        const double expected = std::sqrt(2.0) - 1.0 + (perturb ? 1e-6 : 0.0);
        const double got = robust_loss(1.0, {1.0, 1.0});
        if (std::abs(got - expected) > 1e-12)
            return "got " + sd::fmt(got) + ", expected " + sd::fmt(expected);
        return "";
    });

    // -- equation-level spot values -------------------------------------------
    run("loss_spot_values", []() -> std::string {
        if (std::abs(mtl_loss(2.0, 4.0, {1.0, 1.0}) - (3.0 + 2.0 * std::log(2.0))) > 1e-9)
            return "task-uncertainty spot value";
        ImageBuffer uniform(3, 3, 4, 0.25f);
        LabelMap labels(3, 3, 1, 1);
        if (std::abs(cross_entropy(uniform, labels) - std::log(4.0)) > 1e-9)
            return "uniform-posterior cross entropy";
        ImageBuffer s(2, 1);
        s(1, 0) = 1.0f;
        const DistanceMap direct = sigmoid_to_distance(s, DistanceCoding::direct);
        const DistanceMap inverse = sigmoid_to_distance(s, DistanceCoding::inverse);
        if (direct(0, 0) != 0.1f || direct(1, 0) != 100.0f)
            return "direct coding endpoints";
        if (inverse(0, 0) != 100.0f || inverse(1, 0) != 0.1f)
            return "inverse coding endpoints";
        return "";
    });
    run("ssim_self_identity", []() -> std::string {
        sd::Rand rand(13u);
        ImageBuffer img(16, 12, 3);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 12; ++y)
                for (int x = 0; x < 16; ++x)
                    img(x, y, c) = static_cast<float>(rand(0.0, 1.0));
        const Image<float> s = ssim(img, img);
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 16; ++x)
                if (s(x, y) != 1.0f)
                    return "self-similarity not exactly one";
        return "";
    });

    // -- identity warp reconstructs the source on the valid mask --------------
    run("identity_warp_reconstruction", []() -> std::string {
        sd::Rand rand(14u);
        const Camera cam = sd::small_rect_camera();
        const int w = cam.intrinsics().width, h = cam.intrinsics().height;
        ImageBuffer src(w, h, 3);
        DistanceMap dist(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                dist(x, y) = static_cast<float>(rand(2.0, 10.0));
                for (int c = 0; c < 3; ++c)
                    src(x, y, c) = static_cast<float>(rand(0.05, 1.0));
            }
        const SampleGrid grid = reproject(lift(dist, cam), Pose(), cam);
        const ImageBuffer recon = bilinear_sample(src, grid);
        const EgoMask mask = ego_mask(grid, w, h);
        int covered = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!mask(x, y))
                    continue;
                ++covered;
                for (int c = 0; c < 3; ++c)
                    if (recon(x, y, c) != src(x, y, c))
                        return "pixel changed under the identity pose";
            }
        if (covered < w * h * 9 / 10)
            return "identity warp covered too little of the image";
        return "";
    });

    // -- nn kernels against their naive references ----------------------------
    run("nn_kernels_vs_reference", []() -> std::string {
        sd::Rand rand(15u);
        const auto features = [&](int w, int h, int c) {
            FeatureMap f(w, h, c);
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        f(x, y, ch) = rand(-1.0, 1.0);
            return f;
        };
        const auto matrix = [&](int r, int c, double s) {
            Eigen::MatrixXd m(r, c);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    m(i, j) = rand(-s, s);
            return m;
        };
        for (int trial = 0; trial < 3; ++trial) {
            const int d_in = 1 + trial;
            const FeatureMap x = features(4 + trial, 4, d_in);
            const FeatureMap guide = features(4 + trial, 4, 2);
            PacFilter f;
            f.k = 3;
            f.sigma = 0.7 + 0.3 * trial;
            for (int i = 0; i < 9; ++i)
                f.weights.push_back(matrix(2, d_in, 0.8));
            f.bias = Eigen::VectorXd::Zero(2);
            const FeatureMap conv = pixel_adaptive_conv(x, guide, f);
            const FeatureMap conv_ref = pixel_adaptive_conv_reference(x, guide, f);
            for (int o = 0; o < 2; ++o)
                for (int j = 0; j < x.height(); ++j)
                    for (int i = 0; i < x.width(); ++i)
                        if (std::abs(conv(i, j, o) - conv_ref(i, j, o)) > 1e-12)
                            return "pixel-adaptive convolution mismatch";

            AttentionParams pw;
            pw.radius = 1;
            pw.phi = matrix(2, d_in, 0.8);
            pw.psi = matrix(2, d_in, 0.8);
            pw.chi = matrix(2, d_in, 0.8);
            pw.zeta_w = matrix(2, 2, 0.3);
            pw.zeta_b = Eigen::VectorXd::Zero(2);
            if (!(pairwise_attention(x, pw) == pairwise_attention_reference(x, pw)))
                return "pairwise attention mismatch";

            AttentionParams pt = pw;
            pt.zeta_w = matrix(2 * 9, 2 * 10, 0.1);
            pt.zeta_b = Eigen::VectorXd::Zero(2 * 9);
            if (!(patchwise_attention(x, pt) == patchwise_attention_reference(x, pt)))
                return "patchwise attention mismatch";
        }
        return "";
    });

    // -- height grid worked examples ------------------------------------------
    run("heightmap_examples", []() -> std::string {
        const HeightGrid proto(0.5, 2.0);
        HeightGrid a = proto, b = proto;
        a.height(3, 3) = 1.0f;
        a.count(3, 3) = 1;
        a.known(3, 3) = 1;
        b.height(3, 3) = 2.0f;
        b.count(3, 3) = 3;
        b.known(3, 3) = 1;
        if (fuse_cameras({a, b}).height(3, 3) != 1.75f)
            return "count-weighted fusion";
        HeightGrid spiky = proto;
        for (int iy = 0; iy < spiky.cells; ++iy)
            for (int ix = 0; ix < spiky.cells; ++ix)
                spiky.known(ix, iy) = 1;
        spiky.height(4, 4) = 5.0f;
        if (spatial_smooth(spiky).height(4, 4) != 0.0f)
            return "median spike rejection";
        HeightGrid now = proto, prev = proto;
        now.height(2, 2) = 2.0f;
        now.known(2, 2) = 1;
        prev.height(2, 2) = 0.0f;
        prev.known(2, 2) = 1;
        FusionState state;
        state.previous = prev;
        if (temporal_smooth(now, state).height(2, 2) != 1.0f)
            return "temporal blend";
        return "";
    });
    run("heightmap_flat_ground", []() -> std::string {
        const Camera cam = sd::small_rect_camera();
        const double mount = 1.2;
        std::vector<Eigen::Vector3d> pts;
        for (int y = 0; y < cam.intrinsics().height; ++y)
            for (int x = 0; x < cam.intrinsics().width; ++x) {
                const Eigen::Vector3d ray = cam.unproject(x + 0.5, y + 0.5);
                if (ray.y() < 0.05)
                    continue;
                const float d = static_cast<float>(mount / ray.y());
                const Eigen::Vector3d p = static_cast<double>(d) * ray;
                pts.emplace_back(p.z(), -p.x(), mount - p.y());
            }
        const HeightGrid grid = spatial_smooth(project_to_grid(pts, HeightGrid()));
        int covered = 0, good = 0;
        for (int iy = 0; iy < grid.cells; ++iy)
            for (int ix = 0; ix < grid.cells; ++ix) {
                if (!grid.known(ix, iy))
                    continue;
                ++covered;
                if (std::abs(grid.height(ix, iy)) <= 0.05f)
                    ++good;
            }
        if (covered < 100)
            return "scene covered too few cells";
        if (good < 0.99 * covered)
            return "only " + sd::fmt(100.0 * good / covered) + "% of cells near zero";
        return "";
    });

    // -- geometry tensor invariants through the file format --------------------
    run("tensor_invariants", []() -> std::string {
        Intrinsics k;
        k.model = CameraModel::polynomial;
        k.width = 64;
        k.height = 48;
        k.cx = 32.0;
        k.cy = 24.0;
        k.a = {20.0, 0.0, 0.0, 0.0}; // linear profile: rho = 20 * theta
        k.fov_deg = 245.0;
        const Camera cam(k);
        const GeometryTensor<float> tensor =
            assemble_tensor<float>(cam, k.width + 1, k.height + 1);
        const auto tmp = std::filesystem::temp_directory_path() /
                         ("svgeom-selfcheck-tensor-" + std::to_string(::getpid()) + ".cgt");
        save_tensor(tensor, tmp.string());
        const Image<float> loaded = load_tensor(tmp.string());
        std::filesystem::remove(tmp);
        if (!(loaded == tensor))
            return "tensor file round trip";
        const int ix = 32, iy = 24; // node on the principal point
        if (loaded(ix, iy, kCcX) != 0.0f || loaded(ix, iy, kCcY) != 0.0f)
            return "centered coordinates at the principal point";
        if (loaded(0, 0, kNcX) != -1.0f || loaded(64, 0, kNcX) != 1.0f)
            return "normalized coordinate span";
        // linear radial profile: incidence is the centered coordinate over the slope
        if (std::abs(loaded(60, 24, kAX) - 1.4f) > 1e-4f)
            return "incidence map value";
        return "";
    });

    // -- every writer/reader pair round-trips ----------------------------------
    run("io_round_trips", []() -> std::string {
        sd::Rand rand(16u);
        namespace fs = std::filesystem;
        const fs::path dir =
            fs::temp_directory_path() / ("svgeom-selfcheck-io-" + std::to_string(::getpid()));
        fs::create_directories(dir);
        std::string problem;
        try {
            Rig rig;
            RigCamera cam;
            cam.intrinsics = sd::poly_intrinsics();
            cam.extrinsics = Pose(Eigen::Quaterniond(0.8, 0.0, 0.6, 0.0),
                                  Eigen::Vector3d(1.5, 0.0, 1.2));
            rig.cameras["front"] = cam;
            save_calibration(rig, (dir / "rig.json").string());
            const Rig rig2 = load_calibration((dir / "rig.json").string());
            const auto &k2 = rig2.cameras.at("front").intrinsics;
            if (k2.a != cam.intrinsics.a || k2.cx != cam.intrinsics.cx)
                problem = "calibration round trip";

            const std::vector<Pose> poses{
                Pose(Eigen::Quaterniond(0.8, 0.0, 0.6, 0.0), Eigen::Vector3d(0.1, -0.2, 0.3))};
            save_poses(poses, (dir / "poses.txt").string());
            const auto poses2 = load_poses((dir / "poses.txt").string());
            if (poses2.size() != 1 ||
                (poses2[0].translation() - poses[0].translation()).norm() != 0.0)
                problem = "pose round trip";

            DistanceMap dist(17, 9);
            for (int y = 0; y < 9; ++y)
                for (int x = 0; x < 17; ++x)
                    dist(x, y) = static_cast<float>(rand(0.1, 200.0));
            save_distance_png(dist, (dir / "d.png").string());
            const DistanceMap dist2 = load_distance_png((dir / "d.png").string());
            for (int y = 0; y < 9; ++y)
                for (int x = 0; x < 17; ++x)
                    if (std::abs(dist2(x, y) - dist(x, y)) > 1.0 / 512.0)
                        problem = "distance quantization";

            LabelDoc labels;
            labels.labels = LabelMap(11, 7);
            for (int y = 0; y < 7; ++y)
                for (int x = 0; x < 11; ++x)
                    labels.labels(x, y) = static_cast<std::uint8_t>((x + y) % 3);
            labels.classes = {"road", "car", "sky"};
            labels.dynamic = {1};
            save_labels(labels, (dir / "m.png").string());
            const LabelDoc labels2 = load_labels((dir / "m.png").string());
            if (!(labels2.labels == labels.labels) || labels2.dynamic != labels.dynamic)
                problem = "label round trip";

            HeightGrid grid(0.5, 2.0);
            grid.height(1, 2) = 0.75f;
            grid.known(1, 2) = 1;
            grid.count(1, 2) = 1;
            save_grid(grid, (dir / "g.svhg").string());
            const HeightGrid grid2 = load_grid((dir / "g.svhg").string());
            if (!(grid2.height == grid.height) || !(grid2.known == grid.known))
                problem = "grid round trip";

            const LossReport report{0.125, 0.25, 0.5, 1.0, 2.0, 3.0};
            const std::string text = format_loss_report(report);
            if (format_loss_report(parse_loss_report(text)) != text)
                problem = "loss report reformat";
        } catch (...) {
            fs::remove_all(dir);
            throw;
        }
        fs::remove_all(dir);
        return problem;
    });

    return results;
}

/// Render results the way the command-line front end prints them.
inline std::string format_selfcheck_report(const std::vector<CheckResult> &results) {
    std::ostringstream out;
    int passed = 0;
    for (const CheckResult &r : results) {
        if (r.ok) {
            out << "ok " << r.name << "\n";
            ++passed;
        } else {
            out << "FAIL " << r.name << ": " << r.detail << "\n";
        }
    }
    out << "selfcheck: " << passed << "/" << results.size() << " passed\n";
    return out.str();
}

} // namespace svgeom
