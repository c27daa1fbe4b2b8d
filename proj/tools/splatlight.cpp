// Command-line front end: LUT baking, training, rendering, relighting
// sweeps, evaluation, and environment-map utilities.
//
// Every subcommand exits 0 on success; any failure prints a single
// diagnostic line to stderr and exits nonzero.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "splatlight/brdf.hpp"
#include "splatlight/dataset.hpp"
#include "splatlight/envmap.hpp"
#include "splatlight/metrics.hpp"
#include "splatlight/render_scene.hpp"
#include "splatlight/trainer.hpp"

namespace {

using namespace splatlight;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

RotationAxis parse_axis(const std::string& s) {
    if (s == "x" || s == "X") return RotationAxis::X;
    if (s == "y" || s == "Y") return RotationAxis::Y;
    if (s == "z" || s == "Z") return RotationAxis::Z;
    throw std::runtime_error("axis must be one of x, y, z (got '" + s + "')");
}

// Loads a LUT file, or regenerates the default table when the file is
// missing (writing it back so the next run finds it). An empty path means
// the in-process default table.
BrdfLut resolve_lut(const std::string& path) {
    if (path.empty()) return default_brdf_lut();
    if (fs::exists(path)) return load_brdf_lut(path);
    const BrdfLut& lut = default_brdf_lut();
    save_brdf_lut(lut, path);
    return lut;
}

// Lights decoded by the trainer are degree 4; lower-degree files are
// accepted and zero-padded.
ShCoeffs pad_light_sh(const ShCoeffs& sh) {
    if (sh.degree > kLightShDegree)
        throw std::runtime_error("light: SH degree " + std::to_string(sh.degree) +
                                 " exceeds the supported degree " +
                                 std::to_string(kLightShDegree));
    ShCoeffs out = ShCoeffs::zeros(kLightShDegree);
    std::copy(sh.c.begin(), sh.c.end(), out.c.begin());
    return out;
}

// Camera source: either a cameras.txt file or a dataset directory holding
// one. A single-row file doubles as an explicit pose and needs no id.
Camera resolve_camera(const std::string& source, const std::string& id) {
    fs::path p(source);
    if (fs::is_directory(p)) p /= "cameras.txt";
    const auto cams = load_cameras_txt(p.string());
    if (cams.empty()) throw std::runtime_error("camera: no cameras listed in " + p.string());
    if (id.empty()) {
        if (cams.size() == 1) return cams.front().second;
        throw std::runtime_error("camera: --camera-id is required when " + p.string() +
                                 " lists " + std::to_string(cams.size()) + " cameras");
    }
    for (const auto& [cid, cam] : cams)
        if (cid == id) return cam;
    throw std::runtime_error("camera: unknown camera id '" + id + "' in " + p.string());
}

size_t image_index(const TrainerState& st, const std::string& id) {
    for (size_t i = 0; i < st.image_ids.size(); ++i)
        if (st.image_ids[i] == id) return i;
    throw std::runtime_error("unknown image id '" + id + "' in checkpoint");
}

// Decodes the same per-image appearance the trainer used for this view, so
// renders under a trained light reproduce training renders bit-exactly.
AppearanceOutput trained_appearance(const TrainerState& st, const std::string& id) {
    return appearance_forward(st.mlp, st.embeddings.row(image_index(st, id)));
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

// Maps save natively as PFM; a .png suffix gets display encoding (gamma
// 1/2.2, clamped), the inverse of what load_map applies to PNG input.
void save_map_auto(const EquirectMap& map, const std::string& path) {
    ensure_parent_dir(path);
    const std::string ext = fs::path(path).extension().string();
    if (ext == ".png") {
        ImageRGB img(map.width, map.height);
        for (size_t i = 0; i < map.px.size(); ++i) {
            const Vec3& v = map.px[i];
            img.px[i] = {std::pow(std::clamp(v.x, 0.0, 1.0), 1.0 / 2.2),
                         std::pow(std::clamp(v.y, 0.0, 1.0), 1.0 / 2.2),
                         std::pow(std::clamp(v.z, 0.0, 1.0), 1.0 / 2.2)};
        }
        save_png(img, path);
    } else {
        save_map_pfm(map, path);
    }
}

// ---------------------------------------------------------------------------
// bake-lut
// ---------------------------------------------------------------------------

struct BakeLutOpts {
    std::string out;
    int resolution = 64;
    int samples = 1024;
    uint64_t seed = 0;
};

void run_bake_lut(const BakeLutOpts& o) {
    ensure_parent_dir(o.out);
    save_brdf_lut(bake_brdf_lut(o.resolution, o.samples, o.seed), o.out);
    std::cout << "bake-lut: wrote " << o.resolution << "x" << o.resolution
              << " table (" << o.samples << " samples/cell) to " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitOpts {
    std::string data;
    std::string out;
    std::string config;
    std::string resume;
    std::string lut;
};

void run_fit(const FitOpts& o) {
    TrainConfig cfg;
    if (!o.config.empty()) cfg = parse_train_config(o.config);
    cfg.validate();
    const Dataset ds = load_dataset(o.data);
    TrainerState st = o.resume.empty() ? init_trainer(cfg, ds)
                                       : load_trainer_checkpoint(cfg, o.resume);
    if (!o.lut.empty()) st.lut = resolve_lut(o.lut);
    fs::create_directories(o.out);
    const LossBreakdown last = fit(st, ds, o.out);
    std::cout.precision(10);
    std::cout << "fit: " << st.iteration << " iterations, "
              << st.scene.foreground.size() << " foreground + " << st.scene.sky.size()
              << " sky gaussians, final total loss " << last.total << ", checkpoint "
              << (fs::path(o.out) / "final").string() << "\n";
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct RenderOpts {
    std::string checkpoint;
    std::string cameras;
    std::string camera_id;
    std::string light_id;
    std::string light_sh;
    std::string light_envmap;
    double rotation = 0.0;
    std::string axis = "y";
    std::string sky = "auto";  // auto | trained | white
    std::string sky_id;
    std::string layer = "full";  // full | foreground | sky
    std::string out;
    std::string lut;
    unsigned threads = 1;
};

ColorMode parse_layer(const std::string& s) {
    if (s == "full") return ColorMode::Full;
    if (s == "foreground" || s == "fg") return ColorMode::ForegroundOnly;
    if (s == "sky") return ColorMode::SkyOnly;
    throw std::runtime_error("layer must be one of full, foreground, sky (got '" + s + "')");
}

void run_render(const RenderOpts& o) {
    const int light_sources =
        int(!o.light_id.empty()) + int(!o.light_sh.empty()) + int(!o.light_envmap.empty());
    if (light_sources != 1)
        throw std::runtime_error(
            "render: specify exactly one of --light-id, --light-sh, --light-envmap");

    TrainerState st = load_trainer_checkpoint(TrainConfig{}, o.checkpoint);
    st.lut = resolve_lut(o.lut);
    const Camera cam = resolve_camera(o.cameras, o.camera_id);

    ShCoeffs light;
    if (!o.light_id.empty()) {
        light = trained_appearance(st, o.light_id).light;
    } else if (!o.light_sh.empty()) {
        light = pad_light_sh(load_sh_text(o.light_sh));
    } else {
        EquirectMap map = load_map(o.light_envmap);
        if (o.rotation != 0.0) map = rotate_map(map, o.rotation, parse_axis(o.axis));
        light = map_to_sh(map, kLightShDegree);
    }

    // Sky color: a trained image's decoded sky SH, or fixed white. "auto"
    // follows the light: trained sky with a trained light, white otherwise.
    const std::string sky_record = o.sky_id.empty() ? o.light_id : o.sky_id;
    bool white_sky;
    if (o.sky == "white") {
        white_sky = true;
    } else if (o.sky == "trained") {
        if (sky_record.empty())
            throw std::runtime_error("render: --sky trained needs --light-id or --sky-id");
        white_sky = false;
    } else if (o.sky == "auto") {
        white_sky = sky_record.empty();
    } else {
        throw std::runtime_error("render: sky must be one of auto, trained, white (got '" +
                                 o.sky + "')");
    }
    ShCoeffs sky_sh = ShCoeffs::zeros(kSkyShDegree);
    if (!white_sky) sky_sh = trained_appearance(st, sky_record).sky;

    RasterConfig rcfg;
    rcfg.num_threads = o.threads;
    const RenderOutput ro = render_scene(st.scene, cam, light, sky_sh, st.lut, rcfg,
                                         ShadingConfig{}, parse_layer(o.layer), white_sky);

    ensure_parent_dir(o.out);
    save_png(ro.color, o.out + ".png");
    save_pfm(ro.depth, o.out + "_depth.pfm");
    save_png(render_albedo_map(st.scene, cam, rcfg), o.out + "_albedo.png");
    save_png(render_normal_map(st.scene, cam, rcfg), o.out + "_normal.png");
    std::cout << "render: wrote " << o.out << ".png (+ _depth.pfm, _albedo.png, _normal.png)\n";
}

// ---------------------------------------------------------------------------
// relight: render one view under an environment map swept over rotations,
// sky fixed to white.
// ---------------------------------------------------------------------------

struct RelightOpts {
    std::string checkpoint;
    std::string cameras;
    std::string camera_id;
    std::string envmap;
    int rotations = 8;
    std::string axis = "y";
    std::string out;
    std::string lut;
    unsigned threads = 1;
};

void run_relight(const RelightOpts& o) {
    if (o.rotations < 1) throw std::runtime_error("relight: --rotations must be >= 1");
    TrainerState st = load_trainer_checkpoint(TrainConfig{}, o.checkpoint);
    st.lut = resolve_lut(o.lut);
    const Camera cam = resolve_camera(o.cameras, o.camera_id);
    const EquirectMap map = load_map(o.envmap);
    const RotationAxis axis = parse_axis(o.axis);

    RasterConfig rcfg;
    rcfg.num_threads = o.threads;
    fs::create_directories(o.out);

    std::ofstream angles((fs::path(o.out) / "rotations.csv").string());
    angles.precision(17);
    angles << "index,angle_radians\n";
    const ShCoeffs sky_sh = ShCoeffs::zeros(kSkyShDegree);
    for (int k = 0; k < o.rotations; ++k) {
        const double angle = 2.0 * kPi * k / o.rotations;
        const EquirectMap rotated = (k == 0) ? map : rotate_map(map, angle, axis);
        const ShCoeffs light = map_to_sh(rotated, kLightShDegree);
        const RenderOutput ro = render_scene(st.scene, cam, light, sky_sh, st.lut, rcfg,
                                             ShadingConfig{}, ColorMode::Full,
                                             /*white_sky=*/true);
        char name[32];
        std::snprintf(name, sizeof(name), "rot_%03d.png", k);
        save_png(ro.color, (fs::path(o.out) / name).string());
        angles << k << "," << angle << "\n";
    }
    std::cout << "relight: wrote " << o.rotations << " rotations to " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// eval: masked metrics over a test set, sky fixed to white.
// ---------------------------------------------------------------------------

struct EvalOpts {
    std::string checkpoint;
    std::string data;
    std::string lights;  // defaults to <data>/lights
    std::string out;
    std::string lut;
    unsigned threads = 1;
};

// Test-set layout matches the training layout (cameras.txt, images/,
// masks_sky/, masks_occluder/) except that points.txt is not needed.
std::vector<DatasetView> load_eval_views(const std::string& dir) {
    auto cams = load_cameras_txt((fs::path(dir) / "cameras.txt").string());
    std::sort(cams.begin(), cams.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<DatasetView> views;
    for (const auto& [id, cam] : cams) {
        DatasetView v;
        v.id = id;
        v.camera = cam;
        const fs::path img = fs::path(dir) / "images" / (id + ".png");
        if (!fs::exists(img))
            throw std::runtime_error("eval: missing image " + img.string());
        v.image = load_png(img.string());
        if (v.image.width != cam.width || v.image.height != cam.height)
            throw std::runtime_error("eval: image size disagrees with camera for " +
                                     img.string());
        auto read_mask = [&](const char* subdir) {
            const fs::path p = fs::path(dir) / subdir / (id + ".png");
            if (!fs::exists(p)) return ImageGray(cam.width, cam.height);
            ImageGray m = detail::png_to_mask(load_png(p.string()));
            if (m.width != cam.width || m.height != cam.height)
                throw std::runtime_error("eval: mask size disagrees with camera for " +
                                         p.string());
            return m;
        };
        v.sky_mask = read_mask("masks_sky");
        v.occluder_mask = read_mask("masks_occluder");
        views.push_back(std::move(v));
    }
    return views;
}

// Per-view light: <id>.sh (SH text), else <id>.pfm / <id>.png (environment
// map), else the trained light when the id matches a training view.
ShCoeffs resolve_view_light(const fs::path& lights_dir, const std::string& id,
                            const TrainerState& st) {
    const fs::path sh_file = lights_dir / (id + ".sh");
    if (fs::exists(sh_file)) return pad_light_sh(load_sh_text(sh_file.string()));
    for (const char* ext : {".pfm", ".png"}) {
        const fs::path map_file = lights_dir / (id + ext);
        if (fs::exists(map_file)) return map_to_sh(load_map(map_file.string()), kLightShDegree);
    }
    for (size_t i = 0; i < st.image_ids.size(); ++i)
        if (st.image_ids[i] == id) return appearance_forward(st.mlp, st.embeddings.row(i)).light;
    throw std::runtime_error("eval: no light paired with view '" + id + "' (looked for " +
                             (lights_dir / (id + ".sh")).string() +
                             ", .pfm, .png, and trained ids)");
}

void run_eval(const EvalOpts& o) {
    TrainerState st = load_trainer_checkpoint(TrainConfig{}, o.checkpoint);
    st.lut = resolve_lut(o.lut);
    const std::vector<DatasetView> views = load_eval_views(o.data);
    if (views.empty()) throw std::runtime_error("eval: test set has no views");
    const fs::path lights_dir = o.lights.empty() ? fs::path(o.data) / "lights"
                                                 : fs::path(o.lights);

    RasterConfig rcfg;
    rcfg.num_threads = o.threads;
    const ShCoeffs sky_sh = ShCoeffs::zeros(kSkyShDegree);

    // All metrics are computed before the report file is opened so a failed
    // pairing or render never leaves a partial CSV behind.
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (const DatasetView& v : views) {
        const ShCoeffs light = resolve_view_light(lights_dir, v.id, st);
        const RenderOutput ro = render_scene(st.scene, v.camera, light, sky_sh, st.lut,
                                             rcfg, ShadingConfig{}, ColorMode::Full,
                                             /*white_sky=*/true);
        ImageGray excl(v.camera.width, v.camera.height);
        for (size_t p = 0; p < excl.px.size(); ++p)
            excl.px[p] = (v.sky_mask.px[p] > 0.5 || v.occluder_mask.px[p] > 0.5) ? 1.0 : 0.0;
        rows.emplace_back(v.id, masked_metrics(ro.color, v.image, excl));
    }

    MetricsReport avg;
    for (const auto& [id, m] : rows) {
        avg.psnr += m.psnr;
        avg.ssim += m.ssim;
        avg.mse += m.mse;
        avg.mae += m.mae;
    }
    const double n = double(rows.size());
    avg.psnr /= n;
    avg.ssim /= n;
    avg.mse /= n;
    avg.mae /= n;

    ensure_parent_dir(o.out);
    std::ofstream csv(o.out);
    if (!csv) throw std::runtime_error("eval: cannot open for writing: " + o.out);
    csv.precision(12);
    csv << "image_id,psnr,ssim,mse,mae\n";
    auto write_row = [&](const std::string& id, const MetricsReport& m) {
        csv << id << "," << m.psnr << "," << m.ssim << "," << m.mse << "," << m.mae << "\n";
    };
    for (const auto& [id, m] : rows) write_row(id, m);
    write_row("avg", avg);
    if (!csv) throw std::runtime_error("eval: write failed: " + o.out);
    std::cout.precision(6);
    std::cout << "eval: " << rows.size() << " views, avg psnr " << avg.psnr << " dB, avg ssim "
              << avg.ssim << ", report " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// Environment-map utilities
// ---------------------------------------------------------------------------

struct MapToShOpts {
    std::string in;
    std::string out;
    int degree = 4;
};

void run_envmap_to_sh(const MapToShOpts& o) {
    const ShCoeffs sh = map_to_sh(load_map(o.in), o.degree);
    ensure_parent_dir(o.out);
    save_sh_text(sh, o.out);
    std::cout << "envmap-to-sh: degree " << o.degree << " coefficients written to " << o.out
              << "\n";
}

struct ShToMapOpts {
    std::string in;
    std::string out;
    int width = 256;
    int height = 128;
};

void run_sh_to_envmap(const ShToMapOpts& o) {
    save_map_auto(sh_to_map(load_sh_text(o.in), o.width, o.height), o.out);
    std::cout << "sh-to-envmap: wrote " << o.width << "x" << o.height << " map to " << o.out
              << "\n";
}

struct RotateMapOpts {
    std::string in;
    std::string out;
    double angle = 0.0;
    std::string axis = "y";
};

void run_rotate_envmap(const RotateMapOpts& o) {
    save_map_auto(rotate_map(load_map(o.in), o.angle, parse_axis(o.axis)), o.out);
    std::cout << "rotate-envmap: rotated by " << o.angle << " rad about " << o.axis << " to "
              << o.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "splatlight: relightable Gaussian-splatting pipeline (training, rendering, "
        "relighting, evaluation)"};
    app.require_subcommand(1);

    BakeLutOpts bake;
    auto* cb = app.add_subcommand("bake-lut", "Bake the split-sum BRDF table to a binary file");
    cb->add_option("--out", bake.out, "Output LUT path")->required();
    cb->add_option("--resolution", bake.resolution, "Table resolution per axis")
        ->capture_default_str();
    cb->add_option("--samples", bake.samples, "Monte-Carlo samples per cell")
        ->capture_default_str();
    cb->add_option("--seed", bake.seed, "Sampling seed")->capture_default_str();
    cb->callback([&] { run_bake_lut(bake); });

    FitOpts fito;
    auto* cf = app.add_subcommand("fit", "Fit a scene to a dataset directory");
    cf->add_option("--data", fito.data, "Dataset directory (cameras.txt, images/, points.txt)")
        ->required();
    cf->add_option("--out", fito.out, "Output directory for checkpoints and loss.csv")
        ->required();
    cf->add_option("--config", fito.config, "Training config file (defaults when omitted)");
    cf->add_option("--resume", fito.resume,
                   "Checkpoint prefix to resume from; must use the config of the original "
                   "run (the position-rate schedule depends on the total iteration count)");
    cf->add_option("--lut", fito.lut,
                   "BRDF LUT file; regenerated there automatically when missing "
                   "(in-process default table when omitted)");
    cf->callback([&] { run_fit(fito); });

    RenderOpts ro;
    auto* cr = app.add_subcommand("render", "Render a checkpoint from a camera under a light");
    cr->add_option("--checkpoint", ro.checkpoint, "Checkpoint prefix (.ply/.meta/.tensors)")
        ->required();
    cr->add_option("--cameras", ro.cameras,
                   "Camera source: cameras.txt file, dataset directory, or a single-row "
                   "pose file")
        ->required();
    cr->add_option("--camera-id", ro.camera_id,
                   "Camera id in the camera source (optional for a single-row file)");
    cr->add_option("--light-id", ro.light_id, "Trained image id whose decoded light to use");
    cr->add_option("--light-sh", ro.light_sh, "SH text file with the light (degree <= 4)");
    cr->add_option("--light-envmap", ro.light_envmap, "Environment map (PFM or PNG)");
    cr->add_option("--rotation", ro.rotation, "Envmap rotation in radians")
        ->capture_default_str();
    cr->add_option("--axis", ro.axis, "Envmap rotation axis: x, y, or z")
        ->capture_default_str();
    cr->add_option("--sky", ro.sky,
                   "Sky colors: auto (trained with --light-id, else white), trained, white")
        ->capture_default_str();
    cr->add_option("--sky-id", ro.sky_id,
                   "Trained image id for the sky colors (defaults to --light-id)");
    cr->add_option("--layer", ro.layer, "Layer to write: full, foreground, sky")
        ->capture_default_str();
    cr->add_option("--out", ro.out,
                   "Output prefix; writes <out>.png, <out>_depth.pfm, <out>_albedo.png, "
                   "<out>_normal.png")
        ->required();
    cr->add_option("--lut", ro.lut,
                   "BRDF LUT file; regenerated there automatically when missing");
    cr->add_option("--threads", ro.threads, "Rasterizer threads")->capture_default_str();
    cr->callback([&] { run_render(ro); });

    RelightOpts rl;
    auto* crl = app.add_subcommand(
        "relight", "Render a view under an environment map swept over rotations (white sky)");
    crl->add_option("--checkpoint", rl.checkpoint, "Checkpoint prefix")->required();
    crl->add_option("--cameras", rl.cameras, "Camera source (file or dataset directory)")
        ->required();
    crl->add_option("--camera-id", rl.camera_id, "Camera id in the camera source");
    crl->add_option("--envmap", rl.envmap, "Environment map (PFM or PNG)")->required();
    crl->add_option("--rotations", rl.rotations, "Number of evenly spaced rotations")
        ->capture_default_str();
    crl->add_option("--axis", rl.axis, "Rotation axis: x, y, or z")->capture_default_str();
    crl->add_option("--out", rl.out, "Output directory (rot_###.png + rotations.csv)")
        ->required();
    crl->add_option("--lut", rl.lut,
                    "BRDF LUT file; regenerated there automatically when missing");
    crl->add_option("--threads", rl.threads, "Rasterizer threads")->capture_default_str();
    crl->callback([&] { run_relight(rl); });

    EvalOpts ev;
    auto* ce = app.add_subcommand(
        "eval", "Masked metrics (psnr/ssim/mse/mae) over a test set, sky fixed to white");
    ce->add_option("--checkpoint", ev.checkpoint, "Checkpoint prefix")->required();
    ce->add_option("--data", ev.data,
                   "Test-set directory (cameras.txt, images/, optional masks_sky/ and "
                   "masks_occluder/; points.txt not needed)")
        ->required();
    ce->add_option("--lights", ev.lights,
                   "Directory pairing each view id with a light: <id>.sh, <id>.pfm, or "
                   "<id>.png; trained lights fill in for training ids "
                   "(default <data>/lights)");
    ce->add_option("--out", ev.out, "Output CSV path")->required();
    ce->add_option("--lut", ev.lut,
                   "BRDF LUT file; regenerated there automatically when missing");
    ce->add_option("--threads", ev.threads, "Rasterizer threads")->capture_default_str();
    ce->callback([&] { run_eval(ev); });

    MapToShOpts m2s;
    auto* cm2s = app.add_subcommand("envmap-to-sh",
                                    "Project an environment map onto SH coefficients");
    cm2s->add_option("--in", m2s.in, "Input map (PFM or PNG)")->required();
    cm2s->add_option("--out", m2s.out, "Output SH text file")->required();
    cm2s->add_option("--degree", m2s.degree, "SH degree (0-4)")->capture_default_str();
    cm2s->callback([&] { run_envmap_to_sh(m2s); });

    ShToMapOpts s2m;
    auto* cs2m = app.add_subcommand("sh-to-envmap",
                                    "Render SH coefficients to an environment map");
    cs2m->add_option("--in", s2m.in, "Input SH text file")->required();
    cs2m->add_option("--out", s2m.out, "Output map (.pfm, or .png display-encoded)")
        ->required();
    cs2m->add_option("--width", s2m.width, "Map width")->capture_default_str();
    cs2m->add_option("--height", s2m.height, "Map height")->capture_default_str();
    cs2m->callback([&] { run_sh_to_envmap(s2m); });

    RotateMapOpts rot;
    auto* crot = app.add_subcommand("rotate-envmap", "Rotate an environment map about an axis");
    crot->add_option("--in", rot.in, "Input map (PFM or PNG)")->required();
    crot->add_option("--out", rot.out, "Output map (.pfm, or .png display-encoded)")
        ->required();
    crot->add_option("--angle", rot.angle, "Rotation angle in radians")->required();
    crot->add_option("--axis", rot.axis, "Rotation axis: x, y, or z")->capture_default_str();
    crot->callback([&] { run_rotate_envmap(rot); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << "splatlight: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "splatlight: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
