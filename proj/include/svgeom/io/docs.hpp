#pragma once

#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include <svgeom/camera.hpp>
#include <svgeom/io/png.hpp>
#include <svgeom/losses.hpp>
#include <svgeom/pose.hpp>

namespace svgeom {

/// One rig camera: how it projects and where it sits. The extrinsic pose
/// maps camera-frame points into the vehicle frame.
struct RigCamera {
    Intrinsics intrinsics;
    Pose extrinsics;
};

/// A whole surround-view rig keyed by camera name ("front", "left", ...).
struct Rig {
    std::map<std::string, RigCamera> cameras;
};

/// Loss configuration bundle read from a weights document.
struct WeightsDoc {
    LossWeights weights;
    RobustParams robust;
    UncertaintyParams uncertainty;
};

/// Class-index map plus its legend, including which classes are dynamic.
struct LabelDoc {
    LabelMap labels;
    std::vector<std::string> classes;
    std::set<int> dynamic;
};

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void doc_error(const std::string &path, const std::string &what) {
    throw std::runtime_error(path + ": " + what);
}

inline void reject_unknown(const json &obj, const std::vector<std::string> &allowed,
                           const std::string &path) {
    for (const auto &item : obj.items())
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            doc_error(path, "unknown key '" + item.key() + "'");
}

inline const json &require_field(const json &obj, const char *key, const std::string &path) {
    auto it = obj.find(key);
    if (it == obj.end())
        doc_error(path, std::string("missing field '") + key + "'");
    return *it;
}

inline double require_number(const json &obj, const char *key, const std::string &path) {
    const json &v = require_field(obj, key, path);
    if (!v.is_number())
        doc_error(path + "." + key, "expected a number");
    return v.get<double>();
}

inline int require_int(const json &obj, const char *key, const std::string &path) {
    const json &v = require_field(obj, key, path);
    if (!v.is_number_integer())
        doc_error(path + "." + key, "expected an integer");
    return v.get<int>();
}

inline std::string require_string(const json &obj, const char *key, const std::string &path) {
    const json &v = require_field(obj, key, path);
    if (!v.is_string())
        doc_error(path + "." + key, "expected a string");
    return v.get<std::string>();
}

inline std::vector<double> require_numbers(const json &obj, const char *key, size_t count,
                                           const std::string &path) {
    const json &v = require_field(obj, key, path);
    if (!v.is_array() || v.size() != count)
        doc_error(path + "." + key, "expected " + std::to_string(count) + " numbers");
    std::vector<double> out;
    for (const auto &e : v) {
        if (!e.is_number())
            doc_error(path + "." + key, "expected " + std::to_string(count) + " numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

inline json parse_file(const std::string &path, const char *format, int version) {
    std::ifstream in(path);
    if (!in)
        doc_error(path, "cannot open");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error &err) {
        doc_error(path, err.what());
    }
    if (!doc.is_object())
        doc_error(path, "expected a JSON object");
    if (require_string(doc, "format", path) != format)
        doc_error(path + ".format", std::string("expected '") + format + "'");
    if (require_int(doc, "version", path) != version)
        doc_error(path + ".version", "unsupported version");
    return doc;
}

inline void write_file(const json &doc, const std::string &path) {
    std::ofstream out(path);
    if (!out)
        doc_error(path, "cannot open for writing");
    out << doc.dump(2) << "\n";
    if (!out)
        doc_error(path, "short write");
}

} // namespace detail

// ---- rig calibration ------------------------------------------------------

inline Rig load_calibration(const std::string &path) {
    using detail::json;
    const json doc = detail::parse_file(path, "svgeom-rig", 1);
    detail::reject_unknown(doc, {"format", "version", "cameras"}, path);
    const json &cams = detail::require_field(doc, "cameras", path);
    if (!cams.is_object() || cams.empty())
        detail::doc_error(path + ".cameras", "expected at least one camera");

    Rig rig;
    for (const auto &entry : cams.items()) {
        const std::string cpath = path + ".cameras." + entry.key();
        const json &c = entry.value();
        if (!c.is_object())
            detail::doc_error(cpath, "expected an object");

        Intrinsics k;
        const std::string model = detail::require_string(c, "model", cpath);
        const std::optional<CameraModel> parsed = camera_model_from_string(model);
        if (!parsed)
            detail::doc_error(cpath + ".model", "unknown model '" + model + "'");
        k.model = *parsed;

        std::vector<std::string> allowed = {"model",  "width", "height",    "cx",
                                            "cy",     "fov_deg", "extrinsics"};
        switch (k.model) {
        case CameraModel::polynomial:
            allowed.push_back("a");
            break;
        case CameraModel::ucm:
            allowed.insert(allowed.end(), {"f", "xi"});
            break;
        case CameraModel::eucm:
            allowed.insert(allowed.end(), {"f", "alpha", "beta"});
            break;
        case CameraModel::rectilinear:
        case CameraModel::stereographic:
            allowed.push_back("f");
            break;
        case CameraModel::double_sphere:
            allowed.insert(allowed.end(), {"f", "xi", "alpha"});
            break;
        }
        detail::reject_unknown(c, allowed, cpath);

        k.width = detail::require_int(c, "width", cpath);
        k.height = detail::require_int(c, "height", cpath);
        k.cx = detail::require_number(c, "cx", cpath);
        k.cy = detail::require_number(c, "cy", cpath);
        if (c.contains("fov_deg"))
            k.fov_deg = detail::require_number(c, "fov_deg", cpath);
        switch (k.model) {
        case CameraModel::polynomial: {
            const auto a = detail::require_numbers(c, "a", 4, cpath);
            std::copy(a.begin(), a.end(), k.a.begin());
            break;
        }
        case CameraModel::ucm:
            k.f = detail::require_number(c, "f", cpath);
            k.xi = detail::require_number(c, "xi", cpath);
            break;
        case CameraModel::eucm:
            k.f = detail::require_number(c, "f", cpath);
            k.alpha = detail::require_number(c, "alpha", cpath);
            k.beta = detail::require_number(c, "beta", cpath);
            break;
        case CameraModel::rectilinear:
        case CameraModel::stereographic:
            k.f = detail::require_number(c, "f", cpath);
            break;
        case CameraModel::double_sphere:
            k.f = detail::require_number(c, "f", cpath);
            k.xi = detail::require_number(c, "xi", cpath);
            k.alpha = detail::require_number(c, "alpha", cpath);
            break;
        }

        RigCamera cam;
        cam.intrinsics = k;
        try {
            // absent extrinsics mean the camera frame is the vehicle frame
            if (c.contains("extrinsics")) {
                const json &ext = c.at("extrinsics");
                if (!ext.is_object())
                    detail::doc_error(cpath + ".extrinsics", "expected an object");
                detail::reject_unknown(ext, {"q", "t"}, cpath + ".extrinsics");
                const auto q = detail::require_numbers(ext, "q", 4, cpath + ".extrinsics");
                const auto t = detail::require_numbers(ext, "t", 3, cpath + ".extrinsics");
                cam.extrinsics = Pose(Eigen::Quaterniond(q[0], q[1], q[2], q[3]),
                                      Eigen::Vector3d(t[0], t[1], t[2]));
            }
            const Camera probe(k); // runs the full range/monotonicity validation
            (void)probe;
        } catch (const std::exception &err) {
            detail::doc_error(cpath, err.what());
        }
        rig.cameras.emplace(entry.key(), std::move(cam));
    }
    return rig;
}

inline void save_calibration(const Rig &rig, const std::string &path) {
    using detail::json;
    json cams = json::object();
    for (const auto &[name, cam] : rig.cameras) {
        const Intrinsics &k = cam.intrinsics;
        json c;
        c["model"] = to_string(k.model);
        c["width"] = k.width;
        c["height"] = k.height;
        c["cx"] = k.cx;
        c["cy"] = k.cy;
        if (k.fov_deg)
            c["fov_deg"] = *k.fov_deg;
        switch (k.model) {
        case CameraModel::polynomial:
            c["a"] = k.a;
            break;
        case CameraModel::ucm:
            c["f"] = k.f;
            c["xi"] = k.xi;
            break;
        case CameraModel::eucm:
            c["f"] = k.f;
            c["alpha"] = k.alpha;
            c["beta"] = k.beta;
            break;
        case CameraModel::rectilinear:
        case CameraModel::stereographic:
            c["f"] = k.f;
            break;
        case CameraModel::double_sphere:
            c["f"] = k.f;
            c["xi"] = k.xi;
            c["alpha"] = k.alpha;
            break;
        }
        const auto &q = cam.extrinsics.rotation();
        const auto &t = cam.extrinsics.translation();
        c["extrinsics"] = {{"q", {q.w(), q.x(), q.y(), q.z()}}, {"t", {t.x(), t.y(), t.z()}}};
        cams[name] = std::move(c);
    }
    json doc = {{"format", "svgeom-rig"}, {"version", 1}, {"cameras", std::move(cams)}};
    detail::write_file(doc, path);
}

// ---- loss weights -----------------------------------------------------------

inline WeightsDoc load_weights(const std::string &path) {
    using detail::json;
    const json doc = detail::parse_file(path, "svgeom-weights", 1);
    detail::reject_unknown(doc,
                           {"format", "version", "beta", "gamma", "tau", "epsilon_frac",
                            "alpha", "c", "sigma1", "sigma2"},
                           path);
    WeightsDoc w;
    const auto number = [&](const char *key, double fallback) {
        return doc.contains(key) ? detail::require_number(doc, key, path) : fallback;
    };
    w.weights.beta = number("beta", w.weights.beta);
    w.weights.gamma = number("gamma", w.weights.gamma);
    w.weights.tau = number("tau", w.weights.tau);
    w.weights.epsilon_frac = number("epsilon_frac", w.weights.epsilon_frac);
    w.robust.alpha = number("alpha", w.robust.alpha);
    w.robust.c = number("c", w.robust.c);
    w.uncertainty.sigma1 = number("sigma1", w.uncertainty.sigma1);
    w.uncertainty.sigma2 = number("sigma2", w.uncertainty.sigma2);
    return w;
}

inline void save_weights(const WeightsDoc &w, const std::string &path) {
    detail::json doc = {{"format", "svgeom-weights"},
                        {"version", 1},
                        {"beta", w.weights.beta},
                        {"gamma", w.weights.gamma},
                        {"tau", w.weights.tau},
                        {"epsilon_frac", w.weights.epsilon_frac},
                        {"alpha", w.robust.alpha},
                        {"c", w.robust.c},
                        {"sigma1", w.uncertainty.sigma1},
                        {"sigma2", w.uncertainty.sigma2}};
    detail::write_file(doc, path);
}

// ---- label maps with legend sidecar -----------------------------------------

inline std::string label_sidecar_path(const std::string &png_path) {
    return png_path + ".json";
}

inline void save_labels(const LabelDoc &doc, const std::string &png_path) {
    if (doc.labels.channels() != 1)
        throw std::invalid_argument("save_labels: label maps have a single channel");
    for (int y = 0; y < doc.labels.height(); ++y)
        for (int x = 0; x < doc.labels.width(); ++x)
            if (doc.labels(x, y) >= static_cast<size_t>(doc.classes.size()))
                throw std::invalid_argument("save_labels: label index outside the class table");
    for (int cls : doc.dynamic)
        if (cls < 0 || cls >= static_cast<int>(doc.classes.size()))
            throw std::invalid_argument("save_labels: dynamic class outside the class table");
    write_png8(png_path, doc.labels);
    detail::json side = {{"format", "svgeom-labels"},
                         {"version", 1},
                         {"classes", doc.classes},
                         {"dynamic", doc.dynamic}};
    detail::write_file(side, label_sidecar_path(png_path));
}

inline LabelDoc load_labels(const std::string &png_path) {
    using detail::json;
    const std::string side_path = label_sidecar_path(png_path);
    const json side = detail::parse_file(side_path, "svgeom-labels", 1);
    detail::reject_unknown(side, {"format", "version", "classes", "dynamic"}, side_path);

    LabelDoc doc;
    const json &classes = detail::require_field(side, "classes", side_path);
    if (!classes.is_array() || classes.empty())
        detail::doc_error(side_path + ".classes", "expected a non-empty array");
    for (const auto &c : classes) {
        if (!c.is_string())
            detail::doc_error(side_path + ".classes", "expected strings");
        doc.classes.push_back(c.get<std::string>());
    }
    const json &dyn = detail::require_field(side, "dynamic", side_path);
    if (!dyn.is_array())
        detail::doc_error(side_path + ".dynamic", "expected an array");
    for (const auto &d : dyn) {
        if (!d.is_number_integer())
            detail::doc_error(side_path + ".dynamic", "expected class indices");
        const int cls = d.get<int>();
        if (cls < 0 || cls >= static_cast<int>(doc.classes.size()))
            detail::doc_error(side_path + ".dynamic", "class index out of range");
        doc.dynamic.insert(cls);
    }

    const PngData png = read_png(png_path);
    if (png.bit_depth != 8 || png.channels != 1)
        throw std::runtime_error("load_labels: " + png_path + " is not an 8-bit index map");
    doc.labels = png.data8;
    for (int y = 0; y < doc.labels.height(); ++y)
        for (int x = 0; x < doc.labels.width(); ++x)
            if (doc.labels(x, y) >= static_cast<size_t>(doc.classes.size()))
                throw std::runtime_error("load_labels: " + png_path +
                                         " holds an index outside the class table");
    return doc;
}

} // namespace svgeom
