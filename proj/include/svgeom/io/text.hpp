#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <svgeom/pose.hpp>

namespace svgeom {

// ---- pose files --------------------------------------------------------
//
//   svgeom-poses 1
//   qw qx qy qz tx ty tz        (one line per frame pair)
//
// Doubles are printed with enough digits to round-trip exactly.

inline void save_poses(const std::vector<Pose> &poses, const std::string &path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("poses: cannot open " + path + " for writing");
    out << "svgeom-poses 1\n";
    char line[256];
    for (const Pose &p : poses) {
        const auto &q = p.rotation();
        const auto &t = p.translation();
        std::snprintf(line, sizeof(line), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                      q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z());
        out << line;
    }
    if (!out)
        throw std::runtime_error("poses: short write to " + path);
}

inline std::vector<Pose> load_poses(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("poses: cannot open " + path);
    std::string header;
    std::getline(in, header);
    if (header != "svgeom-poses 1")
        throw std::runtime_error("poses: " + path + " has an unsupported header");
    std::vector<Pose> poses;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::istringstream fields(line);
        double qw, qx, qy, qz, tx, ty, tz;
        if (!(fields >> qw >> qx >> qy >> qz >> tx >> ty >> tz))
            throw std::runtime_error("poses: " + path + ":" + std::to_string(lineno) +
                                     ": expected 7 numbers");
        std::string extra;
        if (fields >> extra)
            throw std::runtime_error("poses: " + path + ":" + std::to_string(lineno) +
                                     ": trailing content");
        poses.emplace_back(Eigen::Quaterniond(qw, qx, qy, qz), Eigen::Vector3d(tx, ty, tz));
    }
    return poses;
}

// ---- loss reports --------------------------------------------------------
//
//   svgeom-loss-report 1
//   l_r <value>   l_s, l_dc, l_tot likewise; l_ce and mtl only when computed
//
// Values carry 9 significant digits so reports are stable regression
// artifacts: formatting a parsed report reproduces the bytes.

struct LossReport {
    double l_r = 0.0;
    double l_s = 0.0;
    double l_dc = 0.0;
    double l_tot = 0.0;
    std::optional<double> l_ce;
    std::optional<double> mtl;
};

inline std::string format_loss_report(const LossReport &report) {
    std::string out = "svgeom-loss-report 1\n";
    char line[64];
    const auto emit = [&](const char *name, double value) {
        std::snprintf(line, sizeof(line), "%s %.9g\n", name, value);
        out += line;
    };
    emit("l_r", report.l_r);
    emit("l_s", report.l_s);
    emit("l_dc", report.l_dc);
    emit("l_tot", report.l_tot);
    if (report.l_ce)
        emit("l_ce", *report.l_ce);
    if (report.mtl)
        emit("mtl", *report.mtl);
    return out;
}

inline LossReport parse_loss_report(const std::string &text) {
    std::istringstream in(text);
    std::string header;
    std::getline(in, header);
    if (header != "svgeom-loss-report 1")
        throw std::runtime_error("loss report: unsupported header");
    LossReport report;
    bool seen_l_r = false, seen_l_s = false, seen_l_dc = false, seen_l_tot = false;
    std::string name;
    double value;
    while (in >> name >> value) {
        if (name == "l_r") {
            report.l_r = value;
            seen_l_r = true;
        } else if (name == "l_s") {
            report.l_s = value;
            seen_l_s = true;
        } else if (name == "l_dc") {
            report.l_dc = value;
            seen_l_dc = true;
        } else if (name == "l_tot") {
            report.l_tot = value;
            seen_l_tot = true;
        } else if (name == "l_ce") {
            report.l_ce = value;
        } else if (name == "mtl") {
            report.mtl = value;
        } else {
            throw std::runtime_error("loss report: unknown field " + name);
        }
    }
    if (!(seen_l_r && seen_l_s && seen_l_dc && seen_l_tot))
        throw std::runtime_error("loss report: missing required fields");
    return report;
}

inline void save_loss_report(const LossReport &report, const std::string &path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("loss report: cannot open " + path + " for writing");
    out << format_loss_report(report);
    if (!out)
        throw std::runtime_error("loss report: short write to " + path);
}

inline LossReport load_loss_report(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("loss report: cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_loss_report(buffer.str());
}

} // namespace svgeom
