// sonofield command-line front end.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sonofield/audio_mask.hpp"
#include "sonofield/collocation.hpp"
#include "sonofield/dataset.hpp"
#include "sonofield/error.hpp"
#include "sonofield/ffat.hpp"
#include "sonofield/mc_bem.hpp"
#include "sonofield/neural_field.hpp"
#include "sonofield/rng.hpp"
#include "sonofield/service.hpp"

using namespace sonofield;
using nlohmann::json;

namespace {

bool g_json = false;

std::string fmt_double(double x) {
    if (std::isnan(x)) return "NaN";
    if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    std::string s = buf;
    if (s.find_first_of(".en") == std::string::npos) s += ".0";
    return s;
}

std::string human(const json& v) {
    if (v.is_number_float()) return fmt_double(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string s;
        for (const json& x : v) s += (s.empty() ? "" : ",") + human(x);
        return s;
    }
    return v.dump();
}

// JSON has no infinity; non-finite numbers are emitted as strings.
json sanitize(const json& v) {
    if (v.is_number_float() && !std::isfinite(v.get<double>())) return fmt_double(v.get<double>());
    if (v.is_structured()) {
        json out = v;
        for (auto it = out.begin(); it != out.end(); ++it) *it = sanitize(*it);
        return out;
    }
    return v;
}

void emit(const json& result) {
    if (g_json) {
        std::cout << sanitize(result).dump() << '\n';
        return;
    }
    std::string line;
    for (auto it = result.begin(); it != result.end(); ++it)
        line += (line.empty() ? "" : ", ") + it.key() + ": " + human(it.value());
    std::cout << line << '\n';
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const char* b = cell.c_str();
        char* e = nullptr;
        const double x = std::strtod(b, &e);
        if (e == b || *e != '\0') throw UsageError(what + ": '" + cell + "' is not a number");
        out.push_back(x);
    }
    return out;
}

Vec3 parse_vec3(const std::string& s, const std::string& what) {
    const auto v = parse_list(s, what);
    if (v.size() != 3) throw UsageError(what + " expects x,y,z");
    return {v[0], v[1], v[2]};
}

SamplerKind parse_sampler(const std::string& s) {
    if (s == "poisson") return SamplerKind::poisson;
    if (s == "uniform") return SamplerKind::uniform;
    throw UsageError("sampler must be 'poisson' or 'uniform'");
}

struct SceneArgs {
    std::string scene;
    std::vector<std::string> params;
    std::string v;
    std::string neumann;

    void add(CLI::App* app) {
        app->add_option("--scene", scene, "scene id");
        app->add_option("--param", params, "fixed scene parameter key=value (repeatable)");
        app->add_option("--v", v, "condition vector, comma separated, each in [0,1]");
        app->add_option("--neumann", neumann, "per-triangle Neumann override file");
    }
    [[nodiscard]] SceneSpec spec() const {
        if (scene.empty()) throw UsageError("--scene is required");
        SceneSpec s{scene, {}, std::nullopt};
        for (const std::string& kv : params) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("--param expects key=value, got '" + kv + "'");
            s.params[kv.substr(0, eq)] = parse_list(kv.substr(eq + 1), "--param " + kv.substr(0, eq)).at(0);
        }
        if (!neumann.empty()) s.neumann_file = neumann;
        return s;
    }
    [[nodiscard]] SceneInstance build() const {
        const SceneSpec s = spec();
        std::vector<double> cv = parse_list(v, "--v");
        if (cv.empty()) cv.assign(scene_condition_labels(s).size(), 0.5);
        return build_scene(s, cv);
    }
};

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte-Carlo BEM acoustic transfer and neural transfer fields"};
    app.require_subcommand(1);
    app.add_flag("--json", g_json, "machine-readable output");
    bool quiet = false;
    app.add_flag("--quiet", quiet, "suppress warnings");

    std::function<void()> run;

    // mesh-info
    auto* mesh_info = app.add_subcommand("mesh-info", "summarize a mesh file or scene mesh");
    std::string mesh_path;
    SceneArgs mi_scene;
    mesh_info->add_option("--mesh", mesh_path, "mesh file (v/f text format)");
    mi_scene.add(mesh_info);
    mesh_info->callback([&] {
        run = [&] {
            const TriMesh mesh = mesh_path.empty() ? mi_scene.build().mesh : load_mesh(mesh_path);
            emit({{"triangles", mesh.num_triangles()},
                  {"vertices", mesh.vertices().size()},
                  {"area", mesh.total_area()},
                  {"volume", mesh.signed_volume()},
                  {"bounding_radius", mesh.bounding_radius()},
                  {"min_quality", mesh.min_aspect_quality()}});
        };
    });

    // sample
    auto* sample = app.add_subcommand("sample", "sample boundary points");
    SceneArgs sa_scene;
    std::size_t sa_count = 2000;
    std::string sa_sampler = "poisson", sa_out;
    std::uint64_t sa_seed = 0;
    sa_scene.add(sample);
    sample->add_option("--samples", sa_count, "number of points")->check(CLI::PositiveNumber);
    sample->add_option("--sampler", sa_sampler, "poisson or uniform");
    sample->add_option("--seed", sa_seed, "random seed");
    sample->add_option("--out", sa_out, "CSV output");
    sample->callback([&] {
        run = [&] {
            const SceneInstance sc = sa_scene.build();
            const BoundarySamples s = sample_surface(sc.mesh, sc.neumann, sa_count, parse_sampler(sa_sampler), sa_seed);
            if (!sa_out.empty()) write_samples_csv(s, sa_out);
            emit({{"samples", s.size()}, {"disk_radius", s.disk_radius}, {"poisson_radius", s.poisson_radius}});
        };
    });

    // solve
    auto* solve = app.add_subcommand("solve", "solve the boundary problem for a scene");
    SceneArgs so_scene;
    double so_freq = 0;
    std::size_t so_samples = 2000;
    std::string so_sampler = "poisson", so_out;
    std::uint64_t so_seed = 0;
    bool so_colloc = false;
    so_scene.add(solve);
    solve->add_option("--freq", so_freq, "frequency in Hz")->required();
    solve->add_option("--samples", so_samples, "boundary samples M")->check(CLI::PositiveNumber);
    solve->add_option("--sampler", so_sampler, "poisson or uniform");
    solve->add_option("--seed", so_seed, "random seed");
    solve->add_flag("--collocation", so_colloc, "use centroid collocation instead of Monte-Carlo");
    solve->add_option("--out", so_out, "solved field output");
    solve->callback([&] {
        run = [&] {
            const SceneInstance sc = so_scene.build();
            const auto t0 = std::chrono::steady_clock::now();
            SolvedBoundaryField f;
            if (so_colloc) {
                if (so_freq < sc.f_min || so_freq > sc.f_max) throw UsageError("--freq outside the scene's range");
                f = collocation_solve(sc.mesh, sc.neumann, Wavenumber::from_frequency(so_freq).value());
            } else {
                f = solve_scene(sc, so_freq, {so_samples, parse_sampler(so_sampler), so_seed, {}});
            }
            if (!so_out.empty()) save_field(f, so_out);
            emit({{"nodes", f.size()},
                  {"k", f.k},
                  {"iterations", f.iterations},
                  {"residual", f.residual},
                  {"converged", f.converged},
                  {"seconds", elapsed(t0)}});
            if (!f.converged) throw NumericError("GMRES did not converge");
        };
    });

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a solved field at exterior points");
    std::string ev_field, ev_points;
    std::vector<std::string> ev_point;
    eval->add_option("--field", ev_field, "solved field file")->required();
    eval->add_option("--point", ev_point, "x,y,z (repeatable)");
    eval->add_option("--points", ev_points, "file with one x,y,z per line");
    eval->callback([&] {
        run = [&] {
            const SolvedBoundaryField f = load_field(ev_field);
            std::vector<Vec3> xs;
            for (const std::string& p : ev_point) xs.push_back(parse_vec3(p, "--point"));
            if (!ev_points.empty()) {
                std::ifstream in(ev_points);
                if (!in) throw DataError("cannot open " + ev_points);
                std::string line;
                while (std::getline(in, line))
                    if (line.find_first_not_of(" \t\r") != std::string::npos) xs.push_back(parse_vec3(line, ev_points));
            }
            if (xs.empty()) throw UsageError("no evaluation points given");
            const std::vector<Complex> p = eval_exterior(f, xs);
            json re = json::array(), im = json::array(), mag = json::array();
            for (const Complex& c : p) {
                re.push_back(c.real());
                im.push_back(c.imag());
                mag.push_back(std::abs(c));
            }
            emit({{"abs", mag}, {"re", re}, {"im", im}});
        };
    });

    // ffat
    auto* ffat = app.add_subcommand("ffat", "build an FFAT map from a solved field, a model, or the analytic oracle");
    std::string ff_field, ff_model, ff_out, ff_pgm, ff_origin;
    SceneArgs ff_scene;
    double ff_radius = 0, ff_freq = 0;
    int ff_w = 64, ff_h = 32, ff_channel = 0;
    bool ff_analytic = false;
    ffat->add_option("--field", ff_field, "solved field file");
    ffat->add_option("--model", ff_model, "trained model file");
    ff_scene.add(ffat);
    ffat->add_flag("--analytic", ff_analytic, "closed-form map for scenes with an oracle");
    ffat->add_option("--freq", ff_freq, "frequency in Hz (model/analytic)");
    ffat->add_option("--radius", ff_radius, "map radius (default 2x the scene reference radius)");
    ffat->add_option("--origin", ff_origin, "map origin x,y,z for --field");
    ffat->add_option("--width", ff_w, "map width")->check(CLI::Range(2, 4096));
    ffat->add_option("--height", ff_h, "map height")->check(CLI::Range(2, 4096));
    ffat->add_option("--channel", ff_channel, "model output channel");
    ffat->add_option("--out", ff_out, "map output (.ffat text)");
    ffat->add_option("--pgm", ff_pgm, "grayscale preview");
    ffat->callback([&] {
        run = [&] {
            FfatMap map;
            if (!ff_model.empty()) {
                const NeuralTransferField nf = NeuralTransferField::load(ff_model);
                const double r = ff_radius > 0 ? ff_radius : 0.5 * (nf.meta().r_min + nf.meta().r_max);
                map = nf.predict_map(parse_list(ff_scene.v, "--v"), ff_freq, r, ff_w, ff_h, ff_channel);
            } else if (!ff_field.empty()) {
                const SolvedBoundaryField f = load_field(ff_field);
                MapFrame frame{ff_origin.empty() ? Vec3::Zero() : parse_vec3(ff_origin, "--origin"), 0.0};
                if (!ff_scene.scene.empty()) {
                    const SceneInstance sc = ff_scene.build();
                    frame = {sc.origin, sc.reference_radius};
                }
                if (frame.reference_radius <= 0) {
                    for (const Vec3& p : f.samples.points)
                        frame.reference_radius = std::max(frame.reference_radius, (p - frame.origin).norm());
                }
                const double r = ff_radius > 0 ? ff_radius : 2.0 * frame.reference_radius;
                map = make_ffat_map(field_evaluator(f), frame, r, ff_w, ff_h, f.k * kSpeedOfSound / (2 * std::numbers::pi));
            } else if (ff_analytic) {
                const SceneInstance sc = ff_scene.build();
                if (!sc.oracle) throw UsageError("scene '" + ff_scene.scene + "' has no analytic oracle");
                const MapFrame frame{sc.origin, sc.reference_radius};
                const double r = ff_radius > 0 ? ff_radius : 2.0 * sc.reference_radius;
                map = make_ffat_map(oracle_evaluator(*sc.oracle, Wavenumber::from_frequency(ff_freq).value()), frame, r,
                                    ff_w, ff_h, ff_freq);
            } else {
                throw UsageError("one of --field, --model or --analytic is required");
            }
            if (!ff_out.empty()) save_ffat(map, ff_out);
            if (!ff_pgm.empty()) write_pgm(map, ff_pgm);
            double lo = map.values.front(), hi = lo;
            for (double x : map.values) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            emit({{"width", map.width}, {"height", map.height}, {"radius", map.radius}, {"min", lo}, {"max", hi}});
        };
    });

    // metrics
    auto* metrics = app.add_subcommand("metrics", "SNR and SSIM between two FFAT maps");
    std::string me_ref, me_test;
    metrics->add_option("--ref", me_ref, "reference map")->required();
    metrics->add_option("--test", me_test, "test map")->required();
    metrics->callback([&] {
        run = [&] {
            const FfatMap a = load_ffat(me_ref), b = load_ffat(me_test);
            emit({{"snr", snr(a, b)}, {"ssim", ssim(a, b)}});
        };
    });

    // dataset
    auto* dataset = app.add_subcommand("dataset", "generate a training dataset");
    SceneArgs ds_scene;
    GenerateOptions ds_opts;
    std::string ds_out, ds_sampler = "poisson";
    ds_scene.add(dataset);
    dataset->add_option("--configs", ds_opts.configs, "number of (v, f) configurations C")->check(CLI::PositiveNumber);
    dataset->add_option("--points", ds_opts.points_per_config, "listener points per configuration P")
        ->check(CLI::PositiveNumber);
    dataset->add_option("--samples", ds_opts.solver.samples, "boundary samples M")->check(CLI::PositiveNumber);
    dataset->add_option("--sampler", ds_sampler, "poisson or uniform");
    dataset->add_option("--seed", ds_opts.seed, "random seed");
    dataset->add_option("--out", ds_out, "output directory")->required();
    dataset->callback([&] {
        run = [&] {
            ds_opts.solver.sampler = parse_sampler(ds_sampler);
            if (!quiet && !g_json)
                ds_opts.progress = [](std::size_t done, std::size_t total) {
                    std::cerr << "\rconfig " << done << "/" << total << std::flush;
                    if (done == total) std::cerr << '\n';
                };
            const auto t0 = std::chrono::steady_clock::now();
            const DatasetManifest m = generate_dataset(ds_scene.spec(), ds_opts, ds_out);
            emit({{"records", m.records},
                  {"configs_written", m.configs_written},
                  {"configs_skipped", m.configs_skipped},
                  {"records_hash", m.records_hash},
                  {"seconds", elapsed(t0)}});
        };
    });

    // train
    auto* trainc = app.add_subcommand("train", "train a neural transfer field");
    std::string tr_data, tr_out, tr_grids;
    TrainConfig tc;
    trainc->add_option("--dataset", tr_data, "dataset directory")->required();
    trainc->add_option("--steps", tc.steps, "optimizer steps");
    trainc->add_option("--batch", tc.batch, "batch size");
    trainc->add_option("--lr", tc.lr, "initial learning rate");
    trainc->add_option("--weight-decay", tc.weight_decay, "decoupled weight decay on grids and weights");
    trainc->add_option("--seed", tc.seed, "random seed");
    trainc->add_option("--grids", tr_grids, "grid resolutions, comma separated");
    trainc->add_option("--octaves", tc.encoding.pe_octaves, "positional-encoding octaves");
    trainc->add_option("--width", tc.shape.hidden_width, "hidden width");
    trainc->add_option("--layers", tc.shape.hidden_layers, "hidden layers");
    trainc->add_flag("--hashed", tc.encoding.hashed, "hash large grid levels");
    trainc->add_option("--out", tr_out, "model output")->required();
    trainc->callback([&] {
        run = [&] {
            if (tc.steps == 0) throw UsageError("--steps must be positive");
            if (tc.batch == 0) throw UsageError("--batch must be positive");
            if (!tr_grids.empty()) {
                tc.encoding.grid_resolutions.clear();
                for (double x : parse_list(tr_grids, "--grids")) tc.encoding.grid_resolutions.push_back(static_cast<int>(x));
            }
            const Dataset d = load_dataset(tr_data);
            if (!quiet && !g_json)
                tc.on_step = [&](std::size_t step, double loss) {
                    if (step % 500 == 0 || step + 1 == tc.steps)
                        std::cerr << "step " << step << " loss " << loss << '\n';
                };
            const auto t0 = std::chrono::steady_clock::now();
            const NeuralTransferField f = train(d, tc);
            f.save(tr_out);
            emit({{"steps", f.meta().steps_trained},
                  {"final_loss", f.meta().epoch_loss.empty() ? 0.0 : f.meta().epoch_loss.back()},
                  {"parameters", f.params().size()},
                  {"seconds", elapsed(t0)}});
        };
    });

    // predict
    auto* predict = app.add_subcommand("predict", "query a trained field");
    std::string pr_model, pr_v;
    double pr_theta = 0, pr_phi = 0, pr_r = 0, pr_f = 0;
    predict->add_option("--model", pr_model, "model file")->required();
    predict->add_option("--v", pr_v, "condition vector");
    predict->add_option("--theta", pr_theta, "azimuth in [-pi, pi]")->required();
    predict->add_option("--phi", pr_phi, "polar angle in [0, pi]")->required();
    predict->add_option("--r", pr_r, "radius")->required();
    predict->add_option("--freq", pr_f, "frequency in Hz")->required();
    predict->callback([&] {
        run = [&] {
            const NeuralTransferField f = NeuralTransferField::load(pr_model);
            if (!f.trained()) throw UsageError("model has not been trained");
            emit({{"p", f.forward(pr_theta, pr_phi, pr_r, parse_list(pr_v, "--v"), pr_f)}});
        };
    });

    // mask
    auto* mask = app.add_subcommand("mask", "render listener audio through a transfer mask");
    std::string ma_model, ma_audio, ma_traj, ma_out;
    int ma_bins = 64, ma_channel = 0;
    double ma_fmax = 0;
    bool ma_linear = false;
    mask->add_option("--model", ma_model, "model file")->required();
    mask->add_option("--audio", ma_audio, "16-bit PCM mono wav")->required();
    mask->add_option("--trajectory", ma_traj, "CSV rows v...,theta,phi,r")->required();
    mask->add_option("--out", ma_out, "output wav")->required();
    mask->add_option("--bins", ma_bins, "mask bins")->check(CLI::PositiveNumber);
    mask->add_option("--fmax", ma_fmax, "mask band limit in Hz (default min(8000, model f_max))");
    mask->add_option("--channel", ma_channel, "model output channel");
    mask->add_flag("--linear", ma_linear, "interpolate between mask bins");
    mask->callback([&] {
        run = [&] {
            const NeuralTransferField f = NeuralTransferField::load(ma_model);
            const Audio in = read_wav(ma_audio);
            const Spectrogram spec = stft(in.samples, in.sample_rate);
            Trajectory traj = load_trajectory_csv(ma_traj, f.conditions());
            const bool resampled = traj.size() != spec.frames;
            traj = resample_trajectory(traj, spec.frames);
            const double fmax = ma_fmax > 0 ? ma_fmax : std::min(8000.0, f.meta().f_max);
            const auto t0 = std::chrono::steady_clock::now();
            const TransferMask m = build_mask(f, traj, spec.frames, ma_bins, fmax, ma_channel);
            const double mask_s = elapsed(t0);
            const Audio out{in.sample_rate,
                            apply_mask(spec, m, ma_linear ? MaskExpansion::linear : MaskExpansion::nearest)};
            write_wav(out, ma_out);
            emit({{"frames", spec.frames}, {"resampled", resampled}, {"mask_seconds", mask_s}});
        };
    });

    // serve
    auto* servec = app.add_subcommand("serve", "HTTP query service");
    std::vector<std::string> sv_models;
    std::string sv_ui, sv_host = "127.0.0.1";
    int sv_port = -1;
    servec->add_option("--model", sv_models, "model file (repeatable; id is the file stem)")->required();
    servec->add_option("--port", sv_port, "port (default $SONOFIELD_PORT or 8080)");
    servec->add_option("--host", sv_host, "bind address");
    servec->add_option("--ui", sv_ui, "static explorer assets served under /ui");
    servec->callback([&] {
        run = [&] {
            std::vector<std::filesystem::path> paths(sv_models.begin(), sv_models.end());
            const ServiceState state = ServiceState::from_files(paths);
            ServeOptions o;
            o.host = sv_host;
            o.port = sv_port >= 0 ? sv_port : default_port();
            if (!sv_ui.empty()) o.ui_dir = sv_ui;
            o.on_ready = [](int port, const std::function<void()>&) {
                std::cerr << "listening on port " << port << std::endl;
            };
            serve(state, o);
        };
    });

    // bench
    auto* bench = app.add_subcommand("bench", "time solver and inference paths");
    std::string be_model;
    int be_reps = 5;
    bench->add_option("--model", be_model, "model file (default: untrained default architecture)");
    bench->add_option("--reps", be_reps, "repetitions (median reported)")->check(CLI::PositiveNumber);
    bench->callback([&] {
        run = [&] {
            auto median_time = [&](const std::function<void()>& fn) {
                std::vector<double> t;
                for (int i = 0; i < be_reps; ++i) {
                    const auto t0 = std::chrono::steady_clock::now();
                    fn();
                    t.push_back(elapsed(t0));
                }
                std::sort(t.begin(), t.end());
                return t[t.size() / 2];
            };
            std::optional<NeuralTransferField> nf;
            if (!be_model.empty()) {
                nf = NeuralTransferField::load(be_model);
            } else {
                FieldMeta meta;
                meta.scene = {"pulsating_sphere", {}, std::nullopt};
                meta.labels = {"radius"};
                meta.f_min = 10;
                meta.f_max = 8000;
                meta.steps_trained = 1;
                const EncodingConfig enc;
                const MlpShape shape;
                nf.emplace(enc, shape, meta, init_params(enc, shape, 1, 1));
            }
            const std::vector<double> v(nf->conditions(), 0.5);
            const double f_mid = 0.5 * (nf->meta().f_min + nf->meta().f_max);
            const double r_mid = 0.5 * (nf->meta().r_min + nf->meta().r_max);
            const double t_map = median_time([&] { (void)nf->predict_map(v, f_mid, r_mid); });
            const std::size_t frames = 30 * 22050 / 512 + 1;
            Trajectory traj(frames, TrajectoryPoint{v, {0.3, 1.2, r_mid}});
            const double fmax = std::min(8000.0, nf->meta().f_max);
            const double t_mask = median_time([&] { (void)build_mask(*nf, traj, frames, 64, fmax); });
            const SceneInstance sc = build_scene({"pulsating_sphere", {}, std::nullopt}, std::vector<double>{0.5});
            const double f_solve = 0.5 * (sc.f_min + sc.f_max);
            const double t_solve = median_time([&] { (void)solve_scene(sc, f_solve, {2000, SamplerKind::poisson, 1, {}}); });
            emit({{"predict_map_ms", 1e3 * t_map},
                  {"mask_30s_ms", 1e3 * t_mask},
                  {"mask_frames", frames},
                  {"solve_m2000_s", t_solve}});
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    if (quiet) set_warnings_enabled(false);
    try {
        run();
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
