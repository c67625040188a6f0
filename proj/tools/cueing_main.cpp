#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "cueing/cleanse.hpp"
#include "cueing/gradcheck_suite.hpp"
#include "cueing/image_ops.hpp"
#include "cueing/manifest.hpp"
#include "cueing/metrics.hpp"
#include "cueing/model.hpp"
#include "cueing/render.hpp"
#include "cueing/synth.hpp"
#include "cueing/train.hpp"

namespace fs = std::filesystem;
using namespace cueing;

namespace {

struct ModelFlags {
    ModelConfig cfg;

    void attach(CLI::App* cmd) {
        cmd->add_option("--tokens", cfg.tokens, "Token count T (4, 16, 64, 256 or 1024)")
            ->capture_default_str();
        cmd->add_option("--width", cfg.width, "Input width")->capture_default_str();
        cmd->add_option("--height", cfg.height, "Input height")->capture_default_str();
        cmd->add_option("--channels", cfg.channels, "Token-conv kernels")->capture_default_str();
        cmd->add_option("--pool", cfg.pool_h, "Pooled token extent p (d = p*p)")
            ->capture_default_str();
        cmd->add_option("--layers", cfg.layers, "Encoder layers")->capture_default_str();
        cmd->add_option("--heads", cfg.heads, "Attention heads")->capture_default_str();
        cmd->add_flag("--symmetric-qk", cfg.symmetric_qk,
                      "Share the query projection for keys (symmetric scores)");
        cmd->add_flag("--plain-channel-attention", cfg.plain_channel_attention,
                      "One learned logit per channel instead of the pooled MLP");
    }

    ModelConfig resolved() const {
        ModelConfig c = cfg;
        c.pool_w = c.pool_h;
        c.validate();
        return c;
    }
};

// Echo the effective settings (defaults + config file + flags) for provenance.
void write_effective_config(CLI::App* cmd, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "effective_config.txt");
    out << "# effective configuration for `cueing " << cmd->get_name() << "`\n";
    for (const CLI::Option* opt : cmd->get_options()) {
        if (opt->get_name().rfind("--", 0) != 0) continue;
        std::string name = opt->get_name().substr(2);
        if (name == "help" || name == "config") continue;
        std::string value = opt->count() ? opt->results()[0]
                                         : opt->get_default_str();
        if (opt->get_expected_min() == 0) value = opt->count() ? "true" : "false";
        if (value.empty()) value = "<unset>";
        out << name << "=" << value << "\n";
    }
}

void write_history(const TrainResult& result, const std::string& path) {
    std::ofstream out(path);
    out << "# epoch mean_bce\n";
    out.precision(9);
    for (const EpochStats& e : result.history) out << e.epoch << " " << e.mean_loss << "\n";
}

GazeMap predict_frame(const CueingModel& model, const Frame& frame, double sigma,
                      Interp interp) {
    auto points = model.forward(frame.image);
    const ModelConfig& cfg = model.config();
    return upsample_points(points, cfg.tokens, cfg.height, cfg.width, sigma, interp);
}

double resolve_sigma(double sigma_flag, int width) {
    return sigma_flag >= 0.0 ? sigma_flag : default_render_sigma(width);
}

int64_t peak_rss_kb() {
    struct rusage usage {};
    getrusage(RUSAGE_SELF, &usage);
    return static_cast<int64_t>(usage.ru_maxrss);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CUEING gaze-prediction pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Plain key=value config file (flags override it)");
    app.get_config_ptr()->configurable(true);

    // ---- synth -----------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    SynthSpec synth_spec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--frames", synth_spec.n_frames, "Frame count")->capture_default_str();
    synth->add_option("--width", synth_spec.width, "Frame width")->capture_default_str();
    synth->add_option("--height", synth_spec.height, "Frame height")->capture_default_str();
    synth->add_option("--objects-min", synth_spec.objects_min, "Min objects per frame")
        ->capture_default_str();
    synth->add_option("--objects-max", synth_spec.objects_max, "Max objects per frame")
        ->capture_default_str();
    synth->add_option("--distractor-prob", synth_spec.distractor_blob_prob,
                      "Probability of a gaze blob outside every box")
        ->capture_default_str();
    synth->add_option("--seed", synth_spec.seed, "RNG seed")->required();

    // ---- cleanse ---------------------------------------------------------
    auto* cleanse = app.add_subcommand("cleanse", "Mask images and gaze maps by bounding boxes");
    std::string cleanse_manifest, cleanse_out;
    int cleanse_threads = 1;
    cleanse->add_option("--manifest", cleanse_manifest, "Input manifest")->required();
    cleanse->add_option("--out", cleanse_out, "Output directory")->required();
    cleanse->add_option("--threads", cleanse_threads, "Parallel workers")->capture_default_str();

    // ---- train / finetune --------------------------------------------------
    struct TrainFlags {
        std::string manifest, out, init;
        TrainConfig cfg;
        std::string freeze = "none";
        double fraction = 0.02;
        ModelFlags model;
    };
    TrainFlags tf, ff;

    auto attach_train = [&](CLI::App* cmd, TrainFlags& f, bool finetune) {
        cmd->add_option("--manifest", f.manifest, "Training manifest")->required();
        cmd->add_option("--out", f.out, "Output directory")->required();
        cmd->add_option("--seed", f.cfg.seed, "RNG seed")->required();
        cmd->add_option("--epochs", f.cfg.epochs, "Training epochs")->capture_default_str();
        cmd->add_option("--batch", f.cfg.batch_size, "Batch size")->capture_default_str();
        cmd->add_option("--lr", f.cfg.adam.lr, "Adam learning rate")->capture_default_str();
        cmd->add_option("--beta1", f.cfg.adam.beta1, "Adam beta1")->capture_default_str();
        cmd->add_option("--beta2", f.cfg.adam.beta2, "Adam beta2")->capture_default_str();
        cmd->add_option("--adam-eps", f.cfg.adam.eps, "Adam epsilon")->capture_default_str();
        cmd->add_option("--freeze", f.freeze,
                        "Freeze mask: none | attention | all_except_linear")
            ->capture_default_str();
        cmd->add_flag("--drop-empty-gaze", f.cfg.drop_empty_gaze,
                      "Skip frames whose gaze map is entirely zero");
        cmd->add_option("--eval-every", f.cfg.eval_every,
                        "Evaluate on the training set every N epochs (0 = off)")
            ->capture_default_str();
        if (finetune) {
            cmd->add_option("--init", f.init, "Checkpoint to fine-tune")->required();
            cmd->add_option("--fraction", f.fraction, "Subset fraction to sample")
                ->capture_default_str();
        } else {
            cmd->add_option("--init", f.init, "Optional checkpoint to continue from");
            f.model.attach(cmd);
        }
    };

    auto* train_cmd = app.add_subcommand("train", "Train from scratch (or --init)");
    attach_train(train_cmd, tf, false);
    auto* finetune_cmd =
        app.add_subcommand("finetune", "Fine-tune a checkpoint on a sampled subset");
    attach_train(finetune_cmd, ff, true);

    // ---- eval --------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint against a manifest");
    std::string eval_manifest, eval_ckpt, eval_out, eval_auc = "object";
    double eval_sigma = -1.0;
    bool eval_bicubic = false;
    int eval_threads = 1;
    eval_cmd->add_option("--manifest", eval_manifest, "Evaluation manifest")->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
    eval_cmd->add_option("--out", eval_out, "Output directory")->required();
    eval_cmd->add_option("--sigma", eval_sigma, "Render sigma in pixels (default W/64)");
    eval_cmd->add_flag("--bicubic", eval_bicubic, "Bicubic point upsampling");
    eval_cmd->add_option("--auc-variant", eval_auc, "AUC variant: object | pixel")
        ->capture_default_str();
    eval_cmd->add_option("--threads", eval_threads, "Parallel workers")->capture_default_str();

    // ---- predict -------------------------------------------------------------
    auto* predict_cmd = app.add_subcommand("predict", "Write a predicted gaze PNG per frame");
    std::string pred_manifest, pred_ckpt, pred_out;
    double pred_sigma = -1.0;
    bool pred_bicubic = false;
    predict_cmd->add_option("--manifest", pred_manifest, "Input manifest")->required();
    predict_cmd->add_option("--checkpoint", pred_ckpt, "Model checkpoint")->required();
    predict_cmd->add_option("--out", pred_out, "Output directory")->required();
    predict_cmd->add_option("--sigma", pred_sigma, "Render sigma in pixels (default W/64)");
    predict_cmd->add_flag("--bicubic", pred_bicubic, "Bicubic point upsampling");

    // ---- render ---------------------------------------------------------------
    auto* render_cmd = app.add_subcommand("render", "Overlay gaze maps onto the images");
    std::string render_manifest, render_out, render_maps;
    double render_alpha = 0.5;
    render_cmd->add_option("--manifest", render_manifest, "Input manifest")->required();
    render_cmd->add_option("--out", render_out, "Output directory")->required();
    render_cmd->add_option("--maps", render_maps,
                           "Directory of maps mirroring the image paths (default: the "
                           "manifest's gaze maps)");
    render_cmd->add_option("--alpha", render_alpha, "Heatmap opacity")->capture_default_str();

    // ---- complexity --------------------------------------------------------------
    auto* cx_cmd = app.add_subcommand("complexity", "Print parameter count and per-stage GMACs");
    ModelFlags cx_model;
    cx_model.attach(cx_cmd);

    // ---- gradcheck ----------------------------------------------------------------
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference verification suite");
    uint64_t gc_seed = 0;
    gc_cmd->add_option("--seed", gc_seed, "RNG seed")->required();

    // ---- bench ----------------------------------------------------------------------
    auto* bench_cmd = app.add_subcommand("bench", "Single-image inference benchmark");
    std::string bench_ckpt;
    int bench_iters = 20;
    uint64_t bench_seed = 0;
    bench_cmd->add_option("--checkpoint", bench_ckpt, "Model checkpoint")->required();
    bench_cmd->add_option("--iters", bench_iters, "Timed iterations")->capture_default_str();
    bench_cmd->add_option("--seed", bench_seed, "Seed for the random test image")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            write_effective_config(synth, synth_out);
            auto manifest = synth_dataset(synth_spec, synth_out);
            std::cout << "wrote " << manifest.entries.size() << " frames under " << synth_out
                      << "\n";
        } else if (cleanse->parsed()) {
            write_effective_config(cleanse, cleanse_out);
            auto manifest = load_manifest(cleanse_manifest);
            auto report = cleanse_dataset(manifest, cleanse_out, cleanse_threads);
            std::cout << "cleansed " << report.frames_total << " frames; "
                      << report.frames_zero_gaze << " with all-zero masked gaze\n";
        } else if (train_cmd->parsed() || finetune_cmd->parsed()) {
            const bool is_finetune = finetune_cmd->parsed();
            TrainFlags& f = is_finetune ? ff : tf;
            CLI::App* cmd = is_finetune ? finetune_cmd : train_cmd;
            f.cfg.freeze = parse_freeze_mask(f.freeze);
            write_effective_config(cmd, f.out);

            auto manifest = load_manifest(f.manifest);
            std::unique_ptr<CueingModel> model;
            if (!f.init.empty()) {
                model = load_checkpoint(f.init);
            } else {
                model = std::make_unique<CueingModel>(f.model.resolved(), f.cfg.seed);
            }
            if (is_finetune)
                manifest = sample_finetune_subset(manifest, f.fraction, f.cfg.seed);

            std::ofstream eval_log;
            EpochCallback on_epoch;
            if (f.cfg.eval_every > 0) {
                eval_log.open(fs::path(f.out) / "eval_history.txt");
                eval_log << "# epoch kl cc\n";
                on_epoch = [&](int epoch, CueingModel& m) {
                    auto rep = evaluate(m, manifest);
                    eval_log << epoch << " " << rep.kl_mean << " "
                             << (rep.cc_mean ? std::to_string(*rep.cc_mean) : "undefined")
                             << "\n";
                };
            }

            auto result = train(*model, manifest, f.cfg, on_epoch);
            save_checkpoint(*model, (fs::path(f.out) / "checkpoint.ckpt").string());
            write_history(result, (fs::path(f.out) / "loss_history.txt").string());
            std::cout << "trained " << result.steps << " steps over " << result.frames_used
                      << " frames";
            if (result.frames_dropped > 0)
                std::cout << " (" << result.frames_dropped << " empty-gaze frames dropped)";
            std::cout << "; final mean BCE " << std::setprecision(6)
                      << result.history.back().mean_loss << "\n";
        } else if (eval_cmd->parsed()) {
            write_effective_config(eval_cmd, eval_out);
            auto manifest = load_manifest(eval_manifest);
            auto model = load_checkpoint(eval_ckpt);
            EvalParams params;
            params.sigma = eval_sigma;
            params.interp = eval_bicubic ? Interp::Bicubic : Interp::Bilinear;
            params.threads = eval_threads;
            if (eval_auc == "pixel")
                params.auc_variant = AucVariant::PixelRoc;
            else if (eval_auc != "object")
                throw std::invalid_argument("--auc-variant must be 'object' or 'pixel'");
            auto report = evaluate(*model, manifest, params);
            write_report(report, (fs::path(eval_out) / "report.txt").string(),
                         (fs::path(eval_out) / "frames.jsonl").string());
            std::cout << format_report(report);
        } else if (predict_cmd->parsed()) {
            write_effective_config(predict_cmd, pred_out);
            auto manifest = load_manifest(pred_manifest);
            auto model = load_checkpoint(pred_ckpt);
            const ModelConfig& cfg = model->config();
            double sigma = resolve_sigma(pred_sigma, cfg.width);
            Interp interp = pred_bicubic ? Interp::Bicubic : Interp::Bilinear;
            for (size_t i = 0; i < manifest.entries.size(); ++i) {
                Frame frame = load_frame(manifest, i, cfg.width, cfg.height);
                GazeMap map = predict_frame(*model, frame, sigma, interp);
                fs::path out_path = fs::path(pred_out) / manifest.entries[i].image_path;
                fs::create_directories(out_path.parent_path());
                save_gaze_map(map, out_path.string());
            }
            std::cout << "wrote " << manifest.entries.size() << " prediction maps under "
                      << pred_out << "\n";
        } else if (render_cmd->parsed()) {
            write_effective_config(render_cmd, render_out);
            if (render_alpha < 0.0 || render_alpha > 1.0)
                throw std::invalid_argument("--alpha must lie in [0,1]");
            auto manifest = load_manifest(render_manifest);
            for (size_t i = 0; i < manifest.entries.size(); ++i) {
                Frame frame = load_frame(manifest, i);
                GazeMap map = frame.gaze;
                if (!render_maps.empty()) {
                    fs::path map_path = fs::path(render_maps) / manifest.entries[i].image_path;
                    map = load_gaze_png(map_path.string());
                    if (map.w != frame.image.w || map.h != frame.image.h)
                        map = resize_bilinear(map, frame.image.h, frame.image.w);
                }
                Image composite = overlay(frame.image, map, static_cast<float>(render_alpha));
                fs::path out_path = fs::path(render_out) / manifest.entries[i].image_path;
                fs::create_directories(out_path.parent_path());
                save_image_png(composite, out_path.string());
            }
            std::cout << "wrote " << manifest.entries.size() << " overlays under " << render_out
                      << "\n";
        } else if (cx_cmd->parsed()) {
            CueingModel model(cx_model.resolved(), 0);
            auto rep = model.count_flops();
            std::cout << "trainable parameters: " << model.count_params() << "\n";
            std::cout << "per-stage complexity (single image "
                      << model.config().width << "x" << model.config().height << "):\n";
            for (const auto& s : rep.stages)
                std::cout << "  " << std::left << std::setw(20) << s.name << std::right
                          << std::setw(12) << s.macs << " MACs  ("
                          << std::fixed << std::setprecision(4) << s.macs * 1e-9 << " GMAC)\n";
            std::cout << "total: " << rep.total << " MACs (" << std::fixed
                      << std::setprecision(4) << rep.total_gmacs() << " GMAC)\n";
        } else if (gc_cmd->parsed()) {
            if (!run_gradcheck_suite(gc_seed, std::cout)) return 1;
        } else if (bench_cmd->parsed()) {
            auto model = load_checkpoint(bench_ckpt);
            const ModelConfig& cfg = model->config();
            Rng rng(bench_seed);
            Image img(cfg.height, cfg.width);
            for (float& v : img.data) v = static_cast<float>(rng.uniform());

            model->forward(img);  // warm-up
            std::vector<double> times_ms;
            for (int i = 0; i < bench_iters; ++i) {
                auto t0 = std::chrono::steady_clock::now();
                model->forward(img);
                auto t1 = std::chrono::steady_clock::now();
                times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            }
            std::sort(times_ms.begin(), times_ms.end());
            double mean = 0.0;
            for (double t : times_ms) mean += t;
            mean /= static_cast<double>(times_ms.size());
            auto pct = [&](double p) {
                size_t idx = static_cast<size_t>(p * (times_ms.size() - 1));
                return times_ms[idx];
            };
            std::cout << std::fixed << std::setprecision(3);
            std::cout << "single-image forward over " << bench_iters << " iterations ("
                      << cfg.width << "x" << cfg.height << ", T=" << cfg.tokens << ")\n";
            std::cout << "  mean " << mean << " ms   p50 " << pct(0.50) << " ms   p95 "
                      << pct(0.95) << " ms\n";
            std::cout << "  peak RSS " << peak_rss_kb() / 1024.0 << " MB\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
