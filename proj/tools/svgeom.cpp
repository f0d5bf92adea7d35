// svgeom — command-line front end for the surround-view geometry library.
//
// Subcommands:
//   cgt        assemble a camera geometry tensor and write it as a .cgt file
//   warp       resample a source image into the target frame via distance + pose
//   loss       evaluate the self-supervised losses for one target frame
//   heightmap  fuse per-camera distance maps into a ground height grid
//   selfcheck  run the built-in oracle battery
//
// All diagnostics go to stderr; results go to stdout or the requested files.
// Exit status is 0 exactly when the command succeeded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <svgeom/camera.hpp>
#include <svgeom/colormap.hpp>
#include <svgeom/geometry_tensor.hpp>
#include <svgeom/heightmap.hpp>
#include <svgeom/io/binary.hpp>
#include <svgeom/io/docs.hpp>
#include <svgeom/io/png.hpp>
#include <svgeom/io/text.hpp>
#include <svgeom/losses.hpp>
#include <svgeom/selfcheck.hpp>
#include <svgeom/warp.hpp>

namespace {

using namespace svgeom;

Camera rig_camera(const Rig &rig, const std::string &name) {
    const auto it = rig.cameras.find(name);
    if (it == rig.cameras.end()) {
        std::string names;
        for (const auto &[n, c] : rig.cameras)
            names += (names.empty() ? "" : ", ") + n;
        throw std::runtime_error("no camera named '" + name + "' in the rig (have: " + names +
                                 ")");
    }
    return Camera(it->second.intrinsics);
}

bool ends_with(const std::string &s, const std::string &suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// 16-bit PNG for .png paths, raw float tensor container otherwise.
DistanceMap load_distance_any(const std::string &path) {
    if (ends_with(path, ".png"))
        return load_distance_png(path);
    Image<float> t = load_tensor(path);
    if (t.channels() != 1)
        throw std::runtime_error(path + ": expected a single-channel distance map, got " +
                                 std::to_string(t.channels()) + " channels");
    return t;
}

void require_sensor_size(const char *what, int w, int h, const Camera &cam,
                         const std::string &name) {
    const Intrinsics &k = cam.intrinsics();
    if (w != k.width || h != k.height)
        throw std::runtime_error(std::string(what) + " is " + std::to_string(w) + "x" +
                                 std::to_string(h) + " but camera '" + name + "' has a " +
                                 std::to_string(k.width) + "x" + std::to_string(k.height) +
                                 " sensor");
}

Image<float> extract_plane(const Image<float> &tensor, int channel) {
    Image<float> plane(tensor.width(), tensor.height());
    for (int y = 0; y < tensor.height(); ++y)
        for (int x = 0; x < tensor.width(); ++x)
            plane(x, y) = tensor(x, y, channel);
    return plane;
}

// Color-mapped preview plus a small sidecar recording the mapped value range.
void write_preview(const Image<float> &plane, const std::string &path) {
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (int y = 0; y < plane.height(); ++y)
        for (int x = 0; x < plane.width(); ++x)
            if (std::isfinite(plane(x, y))) {
                lo = std::min(lo, plane(x, y));
                hi = std::max(hi, plane(x, y));
            }
    if (!(lo <= hi))
        lo = hi = 0.0f;
    write_png8(path, render_colormap(plane, lo, hi));
    char buf[96];
    std::snprintf(buf, sizeof(buf), "min %.9g\nmax %.9g\n", static_cast<double>(lo),
                  static_cast<double>(hi));
    std::ofstream range(path + ".range.txt", std::ios::binary);
    range << buf;
    if (!range)
        throw std::runtime_error("cannot write " + path + ".range.txt");
}

std::string mask_path_for(const std::string &out) {
    if (ends_with(out, ".png"))
        return out.substr(0, out.size() - 4) + ".mask.png";
    return out + ".mask.png";
}

// ---------------------------------------------------------------------------

struct CgtArgs {
    std::string calib, camera, out, png_prefix;
    int width = 0, height = 0;
};

int run_cgt(const CgtArgs &a) {
    const Rig rig = load_calibration(a.calib);
    const Camera cam = rig_camera(rig, a.camera);
    const GeometryTensor<float> tensor = assemble_tensor<float>(cam, a.width, a.height);
    save_tensor(tensor, a.out);
    if (!a.png_prefix.empty()) {
        static const char *kNames[6] = {"ccx", "ccy", "ax", "ay", "ncx", "ncy"};
        for (int c = 0; c < 6; ++c)
            write_preview(extract_plane(tensor, c),
                          a.png_prefix + "_" + kNames[c] + ".png");
    }
    return 0;
}

struct WarpArgs {
    std::string calib, camera, dist, pose, src, out;
};

int run_warp(const WarpArgs &a) {
    const Rig rig = load_calibration(a.calib);
    const Camera cam = rig_camera(rig, a.camera);
    const DistanceMap dist = load_distance_any(a.dist);
    require_sensor_size("distance map", dist.width(), dist.height(), cam, a.camera);
    const ImageBuffer src = load_image_png(a.src);
    require_sensor_size("source image", src.width(), src.height(), cam, a.camera);
    const std::vector<Pose> poses = load_poses(a.pose);
    if (poses.empty())
        throw std::runtime_error(a.pose + ": pose file holds no poses");

    const SampleGrid grid = reproject(lift(dist, cam), poses.front(), cam);
    const ImageBuffer recon = bilinear_sample(src, grid);
    const EgoMask mask = ego_mask(grid, src.width(), src.height());
    save_image_png(recon, a.out);

    Image<std::uint8_t> mask_img(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            mask_img(x, y) = mask(x, y) ? 255 : 0;
    write_png8(mask_path_for(a.out), mask_img);
    return 0;
}

struct LossArgs {
    std::string calib, camera, target, dist, pose, labels_target, posteriors, weights, out;
    std::vector<std::string> sources, dist_sources, labels_sources;
    double alpha = 0.0, c = 0.0;
    bool has_alpha = false, has_c = false;
};

int run_loss(const LossArgs &a) {
    const Rig rig = load_calibration(a.calib);
    const Camera cam = rig_camera(rig, a.camera);
    const int w = cam.intrinsics().width, h = cam.intrinsics().height;

    WeightsDoc cfg;
    if (!a.weights.empty())
        cfg = load_weights(a.weights);
    if (a.has_alpha)
        cfg.robust.alpha = a.alpha;
    if (a.has_c)
        cfg.robust.c = a.c;

    const ImageBuffer target = load_image_png(a.target);
    require_sensor_size("target image", target.width(), target.height(), cam, a.camera);
    const DistanceMap dist = load_distance_any(a.dist);
    require_sensor_size("distance map", dist.width(), dist.height(), cam, a.camera);
    const std::vector<Pose> poses = load_poses(a.pose);
    if (poses.size() < a.sources.size())
        throw std::runtime_error("pose file holds " + std::to_string(poses.size()) +
                                 " poses for " + std::to_string(a.sources.size()) + " sources");
    if (!a.dist_sources.empty() && a.dist_sources.size() != a.sources.size())
        throw std::runtime_error("need one source distance map per source image");
    const bool with_labels = !a.labels_target.empty();
    if (with_labels && a.labels_sources.size() != a.sources.size())
        throw std::runtime_error("need one source label map per source image");

    const PointCloud cloud = lift(dist, cam);

    std::vector<Image<float>> maps;
    std::vector<EgoMask> masks;
    std::vector<SampleGrid> grids;
    for (size_t i = 0; i < a.sources.size(); ++i) {
        const ImageBuffer src = load_image_png(a.sources[i]);
        require_sensor_size("source image", src.width(), src.height(), cam, a.camera);
        if (src.channels() != target.channels())
            throw std::runtime_error(a.sources[i] + ": channel count differs from the target");
        grids.push_back(reproject(cloud, poses[i], cam));
        const ImageBuffer recon = bilinear_sample(src, grids.back());
        masks.push_back(ego_mask(grids.back(), w, h));
        maps.push_back(reconstruction_map(target, recon, masks.back(), cfg.weights, cfg.robust));
    }
    const auto [min_map, union_mask] = min_reconstruction(maps, masks);

    // Dynamic-object suppression: per-source masks are applied only on
    // motion-flagged pairs within the configured budget, then combined.
    std::optional<EgoMask> mu;
    LabelDoc target_labels;
    if (with_labels) {
        target_labels = load_labels(a.labels_target);
        require_sensor_size("target labels", target_labels.labels.width(),
                            target_labels.labels.height(), cam, a.camera);
        std::vector<EgoMask> mus;
        std::vector<bool> flags;
        for (size_t i = 0; i < a.sources.size(); ++i) {
            const LabelDoc src_labels = load_labels(a.labels_sources[i]);
            require_sensor_size("source labels", src_labels.labels.width(),
                                src_labels.labels.height(), cam, a.camera);
            const LabelMap warped = nearest_sample(src_labels.labels, grids[i]);
            mus.push_back(dynamic_mask(target_labels.labels, warped, target_labels.dynamic));
            flags.push_back(motion_flagged(target_labels.labels, warped, target_labels.dynamic));
        }
        const std::vector<bool> apply = apply_fraction(flags, cfg.weights.epsilon_frac);
        EgoMask combined(w, h, 1, 1);
        bool any = false;
        for (size_t i = 0; i < mus.size(); ++i) {
            if (!apply[i])
                continue;
            any = true;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    combined(x, y) = combined(x, y) && mus[i](x, y) ? 1 : 0;
        }
        if (any)
            mu = std::move(combined);
    }

    LossReport report;
    report.l_r = average_masked(min_map, union_mask, mu ? &*mu : nullptr);
    report.l_s = smoothness(dist, target);
    if (!a.dist_sources.empty()) {
        double sum = 0.0;
        for (size_t i = 0; i < a.dist_sources.size(); ++i) {
            const DistanceMap src_dist = load_distance_any(a.dist_sources[i]);
            require_sensor_size("source distance map", src_dist.width(), src_dist.height(), cam,
                                a.camera);
            const ImageBuffer warped = bilinear_sample(src_dist, grids[i]);
            sum += distance_consistency(dist, warped, masks[i]);
        }
        report.l_dc = sum / static_cast<double>(a.dist_sources.size());
    }
    report.l_tot = total_distance_loss(report.l_r, report.l_s, report.l_dc, cfg.weights);

    if (!a.posteriors.empty()) {
        if (!with_labels)
            throw std::runtime_error("--posteriors needs --labels-target for the ground truth");
        const ImageBuffer post = load_tensor(a.posteriors);
        require_sensor_size("posterior tensor", post.width(), post.height(), cam, a.camera);
        report.l_ce = cross_entropy(post, target_labels.labels);
        report.mtl = mtl_loss(report.l_tot, *report.l_ce, cfg.uncertainty);
    }

    const std::string text = format_loss_report(report);
    std::cout << text;
    if (!a.out.empty())
        save_loss_report(report, a.out);
    return 0;
}

struct HeightmapArgs {
    std::string calib, out, png;
    std::vector<std::string> dists; // name=path
    double cell = 0.05, range = 10.0;
};

int run_heightmap(const HeightmapArgs &a) {
    const Rig rig = load_calibration(a.calib);
    const HeightGrid proto(a.cell, a.range);
    std::vector<HeightGrid> grids;
    for (const std::string &spec : a.dists) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            throw std::runtime_error("--dist expects name=path, got '" + spec + "'");
        const std::string name = spec.substr(0, eq);
        const std::string path = spec.substr(eq + 1);
        const auto it = rig.cameras.find(name);
        if (it == rig.cameras.end())
            throw std::runtime_error("no camera named '" + name + "' in the rig");
        const Camera cam(it->second.intrinsics);
        const DistanceMap dist = load_distance_any(path);
        require_sensor_size("distance map", dist.width(), dist.height(), cam, name);
        const PointCloud cloud = lift(dist, cam);
        std::vector<Eigen::Vector3d> pts;
        for (int y = 0; y < cloud.height(); ++y)
            for (int x = 0; x < cloud.width(); ++x)
                if (cloud.valid(x, y))
                    pts.push_back(it->second.extrinsics.apply(
                        {cloud.x(x, y), cloud.y(x, y), cloud.z(x, y)}));
        grids.push_back(project_to_grid(pts, proto));
    }
    const HeightGrid fused = spatial_smooth(fuse_cameras(grids));
    save_grid(fused, a.out);
    if (!a.png.empty()) {
        // Unknown cells render black by mapping them to a non-finite value.
        Image<float> plane(fused.cells, fused.cells);
        for (int y = 0; y < fused.cells; ++y)
            for (int x = 0; x < fused.cells; ++x)
                plane(x, y) = fused.known(x, y) ? fused.height(x, y)
                                                : std::numeric_limits<float>::quiet_NaN();
        write_preview(plane, a.png);
    }
    return 0;
}

int run_selfcheck(bool perturb) {
    const std::vector<CheckResult> results = run_selfchecks(perturb);
    std::cout << format_selfcheck_report(results);
    return std::all_of(results.begin(), results.end(),
                       [](const CheckResult &r) { return r.ok; })
               ? 0
               : 1;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"surround-view geometry toolkit"};
    app.require_subcommand(1);

    CgtArgs cgt_args;
    CLI::App *cgt = app.add_subcommand("cgt", "assemble a camera geometry tensor");
    cgt->add_option("--calib", cgt_args.calib, "rig calibration JSON")->required();
    cgt->add_option("--camera", cgt_args.camera, "camera name in the rig")->required();
    cgt->add_option("--width", cgt_args.width, "output width in nodes")->required();
    cgt->add_option("--height", cgt_args.height, "output height in nodes")->required();
    cgt->add_option("--out", cgt_args.out, "output tensor file (.cgt)")->required();
    cgt->add_option("--png", cgt_args.png_prefix, "write per-channel preview PNGs with this prefix");

    WarpArgs warp_args;
    CLI::App *warp = app.add_subcommand("warp", "reconstruct the target view from a source image");
    warp->add_option("--calib", warp_args.calib, "rig calibration JSON")->required();
    warp->add_option("--camera", warp_args.camera, "camera name in the rig")->required();
    warp->add_option("--dist", warp_args.dist, "target distance map (.png or tensor)")->required();
    warp->add_option("--pose", warp_args.pose, "pose file, first entry maps target to source")->required();
    warp->add_option("--src", warp_args.src, "source image PNG")->required();
    warp->add_option("--out", warp_args.out, "reconstructed image PNG (mask written alongside)")->required();

    LossArgs loss_args;
    CLI::App *loss = app.add_subcommand("loss", "evaluate self-supervised losses for one frame");
    loss->add_option("--calib", loss_args.calib, "rig calibration JSON")->required();
    loss->add_option("--camera", loss_args.camera, "camera name in the rig")->required();
    loss->add_option("--target", loss_args.target, "target image PNG")->required();
    loss->add_option("--source", loss_args.sources, "source image PNG (repeatable)")->required();
    loss->add_option("--dist", loss_args.dist, "target distance map")->required();
    loss->add_option("--pose", loss_args.pose, "pose file, one entry per source")->required();
    loss->add_option("--dist-source", loss_args.dist_sources,
                     "source distance map, one per source, enables the consistency term");
    loss->add_option("--labels-target", loss_args.labels_target, "target label map PNG");
    loss->add_option("--labels-source", loss_args.labels_sources,
                     "source label map PNG, one per source");
    loss->add_option("--posteriors", loss_args.posteriors,
                     "class posterior tensor, enables the cross-entropy and combined terms");
    loss->add_option("--weights", loss_args.weights, "weights JSON");
    CLI::Option *alpha_opt = loss->add_option("--alpha", loss_args.alpha, "robust penalty shape");
    CLI::Option *c_opt = loss->add_option("--c", loss_args.c, "robust penalty scale");
    loss->add_option("--out", loss_args.out, "also write the report to this file");

    HeightmapArgs hm_args;
    CLI::App *hm = app.add_subcommand("heightmap", "fuse distance maps into a ground height grid");
    hm->add_option("--calib", hm_args.calib, "rig calibration JSON")->required();
    hm->add_option("--dist", hm_args.dists, "camera=distance-map pair (repeatable)")->required();
    hm->add_option("--out", hm_args.out, "output grid file (.svhg)")->required();
    hm->add_option("--png", hm_args.png, "write a color-mapped preview PNG");
    hm->add_option("--cell", hm_args.cell, "cell size in meters");
    hm->add_option("--range", hm_args.range, "grid half-extent in meters");

    bool perturb = false;
    CLI::App *selfcheck = app.add_subcommand("selfcheck", "run the built-in oracle battery");
    selfcheck->add_flag("--perturb", perturb, "shift one golden value to demonstrate detection");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }

    try {
        if (*cgt)
            return run_cgt(cgt_args);
        if (*warp)
            return run_warp(warp_args);
        if (*loss) {
            loss_args.has_alpha = alpha_opt->count() > 0;
            loss_args.has_c = c_opt->count() > 0;
            return run_loss(loss_args);
        }
        if (*hm)
            return run_heightmap(hm_args);
        if (*selfcheck)
            return run_selfcheck(perturb);
    } catch (const std::exception &e) {
        std::cerr << "svgeom: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
