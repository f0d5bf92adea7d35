#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>

#include <unistd.h>

#include <svgeom/io/binary.hpp>
#include <svgeom/io/docs.hpp>
#include <svgeom/io/png.hpp>
#include <svgeom/io/text.hpp>

#include "testutil.hpp"

using namespace svgeom;
namespace fs = std::filesystem;

namespace {

// Scratch directory per test case, removed on scope exit.
struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("svgeom-test-io-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string &name) const { return (path / name).string(); }
};

void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    REQUIRE(out.good());
}

std::string read_bytes(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string thrown_message(const std::function<void()> &fn) {
    try {
        fn();
    } catch (const std::exception &e) {
        return e.what();
    }
    FAIL("expected an exception");
    return {};
}

Rig two_camera_rig() {
    Rig rig;
    RigCamera front;
    front.intrinsics = testutil::automotive_poly();
    front.extrinsics = Pose(Eigen::Quaterniond(-0.5, 0.5, -0.5, 0.5).normalized(),
                            Eigen::Vector3d(1.9, 0.0, 1.2));
    rig.cameras["front"] = front;
    RigCamera wide;
    wide.intrinsics = testutil::make_double_sphere();
    wide.extrinsics = Pose(Eigen::Quaterniond(1.0, 0.0, 0.0, 0.0), Eigen::Vector3d(0.0, 0.9, 1.0));
    rig.cameras["wide"] = wide;
    return rig;
}

} // namespace

// ---------------------------------------------------------------------------
// calibration documents

TEST_CASE("calibration documents round trip every field") {
    TempDir dir;
    const std::string path = dir / "rig.json";
    const Rig rig = two_camera_rig();
    save_calibration(rig, path);
    const Rig back = load_calibration(path);

    REQUIRE(back.cameras.size() == 2);
    const Intrinsics &front = back.cameras.at("front").intrinsics;
    CHECK(front.model == CameraModel::polynomial);
    CHECK(front.width == 1280);
    CHECK(front.height == 966);
    CHECK(front.cx == 640.0);
    CHECK(front.cy == 483.0);
    CHECK(front.a == rig.cameras.at("front").intrinsics.a);

    const Intrinsics &wide = back.cameras.at("wide").intrinsics;
    CHECK(wide.model == CameraModel::double_sphere);
    CHECK(wide.f == rig.cameras.at("wide").intrinsics.f);
    CHECK(wide.xi == rig.cameras.at("wide").intrinsics.xi);
    CHECK(wide.alpha == rig.cameras.at("wide").intrinsics.alpha);

    const Pose &pose = back.cameras.at("front").extrinsics;
    CHECK((pose.translation() - Eigen::Vector3d(1.9, 0.0, 1.2)).norm() == 0.0);
    CHECK(pose.rotation().coeffs().isApprox(
        rig.cameras.at("front").extrinsics.rotation().coeffs(), 1e-15));
}

TEST_CASE("calibration schema violations are reported with field paths") {
    TempDir dir;
    const std::string path = dir / "rig.json";

    SECTION("a polynomial camera needs all four coefficients") {
        write_text(path, R"({"format":"svgeom-rig","version":1,"cameras":{"front":{
            "model":"polynomial","width":64,"height":48,"cx":32,"cy":24,
            "a":[20.0,0.0,0.0]}}})");
        const std::string msg = thrown_message([&] { load_calibration(path); });
        CHECK(msg.find(".cameras.front.a") != std::string::npos);
    }
    SECTION("unknown keys are rejected, naming the offender") {
        write_text(path, R"({"format":"svgeom-rig","version":1,"cameras":{"front":{
            "model":"rectilinear","width":64,"height":48,"cx":32,"cy":24,"f":40.0,
            "skew":0.1}}})");
        const std::string msg = thrown_message([&] { load_calibration(path); });
        CHECK(msg.find("skew") != std::string::npos);
        CHECK(msg.find(".cameras.front") != std::string::npos);
    }
    SECTION("model-specific fields may not leak across models") {
        write_text(path, R"({"format":"svgeom-rig","version":1,"cameras":{"front":{
            "model":"rectilinear","width":64,"height":48,"cx":32,"cy":24,"f":40.0,
            "xi":0.5}}})");
        const std::string msg = thrown_message([&] { load_calibration(path); });
        CHECK(msg.find("xi") != std::string::npos);
    }
    SECTION("unknown model names are rejected") {
        write_text(path, R"({"format":"svgeom-rig","version":1,"cameras":{"front":{
            "model":"orthographic","width":64,"height":48,"cx":32,"cy":24}}})");
        const std::string msg = thrown_message([&] { load_calibration(path); });
        CHECK(msg.find("orthographic") != std::string::npos);
    }
    SECTION("future versions are refused") {
        write_text(path, R"({"format":"svgeom-rig","version":2,"cameras":{}})");
        const std::string msg = thrown_message([&] { load_calibration(path); });
        CHECK(msg.find("version") != std::string::npos);
    }
    SECTION("wrong format tag is refused") {
        write_text(path, R"({"format":"svgeom-weights","version":1,"cameras":{}})");
        CHECK_THROWS(load_calibration(path));
    }
    SECTION("intrinsics that fail camera validation are rejected with context") {
        // decreasing radial profile: rho'(theta) < 0 immediately
        write_text(path, R"({"format":"svgeom-rig","version":1,"cameras":{"front":{
            "model":"polynomial","width":64,"height":48,"cx":32,"cy":24,
            "a":[-20.0,0.0,0.0,0.0]}}})");
        const std::string msg = thrown_message([&] { load_calibration(path); });
        CHECK(msg.find(".cameras.front") != std::string::npos);
    }
    SECTION("a minimal pinhole document parses") {
        write_text(path, R"({"format":"svgeom-rig","version":1,"cameras":{"cam":{
            "model":"rectilinear","width":64,"height":48,"cx":32,"cy":24,"f":40.0}}})");
        const Rig rig = load_calibration(path);
        CHECK(rig.cameras.at("cam").intrinsics.f == 40.0);
        // missing extrinsics default to the identity
        CHECK(rig.cameras.at("cam").extrinsics.translation().norm() == 0.0);
    }
}

// ---------------------------------------------------------------------------
// weights documents

TEST_CASE("weights documents round trip and validate") {
    TempDir dir;
    const std::string path = dir / "weights.json";

    WeightsDoc doc;
    doc.weights.beta = 0.25;
    doc.weights.gamma = 0.5;
    doc.weights.tau = 0.7;
    doc.weights.epsilon_frac = 0.5;
    doc.robust.alpha = -2.0;
    doc.robust.c = 0.3;
    doc.uncertainty.sigma1 = 1.5;
    doc.uncertainty.sigma2 = 0.75;
    save_weights(doc, path);
    const WeightsDoc back = load_weights(path);
    CHECK(back.weights.beta == doc.weights.beta);
    CHECK(back.weights.gamma == doc.weights.gamma);
    CHECK(back.weights.tau == doc.weights.tau);
    CHECK(back.weights.epsilon_frac == doc.weights.epsilon_frac);
    CHECK(back.robust.alpha == doc.robust.alpha);
    CHECK(back.robust.c == doc.robust.c);
    CHECK(back.uncertainty.sigma1 == doc.uncertainty.sigma1);
    CHECK(back.uncertainty.sigma2 == doc.uncertainty.sigma2);

    SECTION("absent fields fall back to the defaults") {
        write_text(path, R"({"format":"svgeom-weights","version":1,"tau":0.9})");
        const WeightsDoc partial = load_weights(path);
        CHECK(partial.weights.tau == 0.9);
        CHECK(partial.weights.beta == LossWeights{}.beta);
        CHECK(partial.robust.alpha == RobustParams{}.alpha);
    }
    SECTION("unknown fields are rejected") {
        write_text(path, R"({"format":"svgeom-weights","version":1,"lambda":0.5})");
        const std::string msg = thrown_message([&] { load_weights(path); });
        CHECK(msg.find("lambda") != std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// distance maps as 16-bit PNGs

TEST_CASE("distance maps quantize to 1/256 m steps in 16-bit PNGs") {
    TempDir dir;
    const std::string path = dir / "d.png";

    SECTION("one meter is exactly code 256") {
        DistanceMap d(3, 2, 1, 1.0f);
        save_distance_png(d, path);
        const PngData raw = read_png(path);
        REQUIRE(raw.bit_depth == 16);
        CHECK(raw.data16(0, 0) == 256);
        const DistanceMap back = load_distance_png(path);
        CHECK(back(0, 0) == 1.0f);
    }
    SECTION("random distances survive within half a code") {
        std::mt19937 rng(20240901u);
        std::uniform_real_distribution<double> dist(0.01, 250.0);
        DistanceMap d(31, 17);
        for (int y = 0; y < d.height(); ++y)
            for (int x = 0; x < d.width(); ++x)
                d(x, y) = static_cast<float>(dist(rng));
        save_distance_png(d, path);
        const DistanceMap back = load_distance_png(path);
        for (int y = 0; y < d.height(); ++y)
            for (int x = 0; x < d.width(); ++x)
                CHECK(std::abs(back(x, y) - d(x, y)) <= 1.0 / 512.0);
    }
    SECTION("nonpositive and non-finite distances become the invalid code") {
        DistanceMap d(4, 1);
        d(0, 0) = -3.0f;
        d(1, 0) = 0.0f;
        d(2, 0) = std::numeric_limits<float>::quiet_NaN();
        d(3, 0) = 2.0f;
        save_distance_png(d, path);
        const DistanceMap back = load_distance_png(path);
        CHECK(back(0, 0) == 0.0f);
        CHECK(back(1, 0) == 0.0f);
        CHECK(back(2, 0) == 0.0f);
        CHECK(back(3, 0) == 2.0f);
    }
    SECTION("8-bit files are refused") {
        Image<std::uint8_t> gray(2, 2, 1, 7);
        write_png8(path, gray);
        CHECK_THROWS(load_distance_png(path));
    }
}

// ---------------------------------------------------------------------------
// images as 8-bit PNGs

TEST_CASE("image PNGs are idempotent after the first quantization") {
    TempDir dir;
    std::mt19937 rng(20240901u);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    ImageBuffer img(19, 11, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                img(x, y, c) = static_cast<float>(uni(rng));

    const std::string first = dir / "a.png";
    const std::string second = dir / "b.png";
    save_image_png(img, first);
    const ImageBuffer once = load_image_png(first);
    REQUIRE(once.channels() == 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                CHECK(std::abs(once(x, y, c) - img(x, y, c)) <= 1.0 / 510.0);

    save_image_png(once, second);
    CHECK(read_bytes(first) == read_bytes(second));
    const ImageBuffer twice = load_image_png(second);
    CHECK(twice == once);
}

// ---------------------------------------------------------------------------
// label maps with sidecars

TEST_CASE("label maps round trip with their class legend") {
    TempDir dir;
    const std::string path = dir / "labels.png";

    LabelDoc doc;
    doc.labels = LabelMap(9, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 9; ++x)
            doc.labels(x, y) = static_cast<std::uint8_t>((x * 7 + y) % 4);
    doc.classes = {"road", "car", "person", "sky"};
    doc.dynamic = {1, 2};
    save_labels(doc, path);
    CHECK(fs::exists(label_sidecar_path(path)));

    const LabelDoc back = load_labels(path);
    CHECK(back.labels == doc.labels);
    CHECK(back.classes == doc.classes);
    CHECK(back.dynamic == doc.dynamic);

    SECTION("indices beyond the legend are rejected on save") {
        doc.labels(0, 0) = 4;
        CHECK_THROWS(save_labels(doc, path));
    }
    SECTION("dynamic indices beyond the legend are rejected on load") {
        write_text(label_sidecar_path(path),
                   R"({"format":"svgeom-labels","version":1,
                       "classes":["road","car","person","sky"],"dynamic":[9]})");
        CHECK_THROWS(load_labels(path));
    }
    SECTION("a missing sidecar is an error") {
        fs::remove(label_sidecar_path(path));
        CHECK_THROWS(load_labels(path));
    }
}

// ---------------------------------------------------------------------------
// float tensor container

TEST_CASE("tensor files round trip exactly and check their header") {
    TempDir dir;
    const std::string path = dir / "t.cgt";

    std::mt19937 rng(20240901u);
    std::uniform_real_distribution<double> uni(-10.0, 10.0);
    Image<float> tensor(13, 7, 6);
    for (int c = 0; c < 6; ++c)
        for (int y = 0; y < 7; ++y)
            for (int x = 0; x < 13; ++x)
                tensor(x, y, c) = static_cast<float>(uni(rng));
    save_tensor(tensor, path);
    CHECK(load_tensor(path) == tensor);

    SECTION("a wrong magic is reported as a foreign file") {
        std::string bytes = read_bytes(path);
        bytes[0] = 'X';
        write_text(path, bytes);
        const std::string msg = thrown_message([&] { load_tensor(path); });
        CHECK(msg.find("not a") != std::string::npos);
    }
    SECTION("future container versions are refused") {
        std::string bytes = read_bytes(path);
        bytes[4] = 2; // little-endian version word follows the magic
        write_text(path, bytes);
        const std::string msg = thrown_message([&] { load_tensor(path); });
        CHECK(msg.find("version") != std::string::npos);
    }
    SECTION("truncated files are refused") {
        std::string bytes = read_bytes(path);
        bytes.resize(bytes.size() - 5);
        write_text(path, bytes);
        CHECK_THROWS(load_tensor(path));
    }
}

TEST_CASE("matrices ride the tensor container") {
    TempDir dir;
    const std::string path = dir / "m.svgt";
    // float-representable entries so the float32 payload is lossless
    Eigen::MatrixXd m(3, 5);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 5; ++c)
            m(r, c) = 0.25 * (r * 5 + c) - 1.5;
    save_matrix(m, path);
    const Eigen::MatrixXd back = load_matrix(path);
    REQUIRE(back.rows() == 3);
    REQUIRE(back.cols() == 5);
    CHECK(back == m);
}

// ---------------------------------------------------------------------------
// height grid container

TEST_CASE("height grids round trip through their container") {
    TempDir dir;
    const std::string path = dir / "g.svhg";

    HeightGrid grid(0.25, 1.0);
    grid.height(2, 3) = 0.75f;
    grid.known(2, 3) = 1;
    grid.count(2, 3) = 5;
    grid.height(7, 7) = -0.5f;
    grid.known(7, 7) = 1;
    grid.count(7, 7) = 2;
    save_grid(grid, path);

    const HeightGrid back = load_grid(path);
    CHECK(back.cell_size == grid.cell_size);
    CHECK(back.range == grid.range);
    CHECK(back.cells == grid.cells);
    CHECK(back.height == grid.height);
    CHECK(back.known == grid.known);
    // per-cell observation counts collapse to presence on reload
    CHECK(back.count(2, 3) == 1);
    CHECK(back.count(0, 0) == 0);
}

// ---------------------------------------------------------------------------
// pose text files

TEST_CASE("pose files round trip exactly") {
    TempDir dir;
    const std::string path = dir / "poses.txt";

    std::mt19937 rng(20240901u);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<Pose> poses;
    for (int i = 0; i < 5; ++i) {
        Eigen::Quaterniond q(uni(rng), uni(rng), uni(rng), uni(rng));
        q.normalize();
        poses.emplace_back(q, Eigen::Vector3d(uni(rng), uni(rng), uni(rng)));
    }
    save_poses(poses, path);
    const std::vector<Pose> back = load_poses(path);
    REQUIRE(back.size() == poses.size());
    for (size_t i = 0; i < poses.size(); ++i) {
        // %.17g round-trips each component; re-normalization on load may
        // still flip the last quaternion bit
        CHECK((back[i].rotation().coeffs() - poses[i].rotation().coeffs()).norm() <= 1e-15);
        CHECK(back[i].translation() == poses[i].translation());
    }

    SECTION("short lines are rejected with their line number") {
        write_text(path, "svgeom-poses 1\n1 0 0 0 0 0\n");
        const std::string msg = thrown_message([&] { load_poses(path); });
        CHECK(msg.find(":2") != std::string::npos);
    }
    SECTION("trailing tokens are rejected") {
        write_text(path, "svgeom-poses 1\n1 0 0 0 0 0 0 7\n");
        CHECK_THROWS(load_poses(path));
    }
    SECTION("a wrong header is rejected") {
        write_text(path, "poses 1\n1 0 0 0 0 0 0\n");
        CHECK_THROWS(load_poses(path));
    }
    SECTION("an empty pose list is preserved") {
        save_poses({}, path);
        CHECK(load_poses(path).empty());
    }
}

// ---------------------------------------------------------------------------
// loss reports

TEST_CASE("loss reports reformat to identical text") {
    LossReport report;
    report.l_r = 0.03125;
    report.l_s = 1.25e-4;
    report.l_dc = 0.75;
    report.l_tot = 0.0389375;
    SECTION("without the optional terms") {}
    SECTION("with the optional terms") {
        report.l_ce = 1.3862943611198906;
        report.mtl = 2.5;
    }
    const std::string text = format_loss_report(report);
    const LossReport back = parse_loss_report(text);
    CHECK(format_loss_report(back) == text);
    CHECK(back.l_ce.has_value() == report.l_ce.has_value());

    TempDir dir;
    const std::string path = dir / "report.txt";
    save_loss_report(report, path);
    const LossReport from_file = load_loss_report(path);
    CHECK(format_loss_report(from_file) == text);
}

TEST_CASE("loss report parsing rejects malformed input") {
    CHECK_THROWS(parse_loss_report("loss-report 1\nl_r 0\n"));
    const std::string msg = thrown_message(
        [] { parse_loss_report("svgeom-loss-report 1\nl_r 0\nl_s 0\nl_dc 0\nl_tot 0\nbogus 1\n"); });
    CHECK(msg.find("bogus") != std::string::npos);
    CHECK_THROWS(parse_loss_report("svgeom-loss-report 1\nl_r 0\nl_s 0\nl_tot 0\n"));
}
