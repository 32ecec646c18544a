// SPDX-License-Identifier: Apache-2.0
//
// fovseg command-line interface: synth, train, infer, fovmap, goldstd, eval.
// Every command writes its fully resolved configuration and a run manifest
// next to its outputs. Exit codes: 0 success, 2 usage / missing inputs,
// 1 runtime failure.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fovseg/checkpoint.hpp"
#include "fovseg/eval.hpp"
#include "fovseg/kernels.hpp"
#include "fovseg/parallel.hpp"
#include "fovseg/runconfig.hpp"
#include "fovseg/synth.hpp"
#include "fovseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace fovseg;

namespace {

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
}

struct RunManifest {
    std::string command;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    std::vector<std::string> outputs;

    void add(const std::string& path) { outputs.push_back(path); }
    void write(const std::string& dir) {
        std::ofstream os(fs::path(dir) / "run_manifest.txt", std::ios::trunc);
        os << "# fovseg run manifest (informational; excluded from reproducibility checks)\n";
        os << "version " << kVersion << "\n";
        os << "command " << command << "\n";
        os << "kernels " << kernels::active() << "\n";
        os << "wall_seconds "
           << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << "\n";
        for (const auto& o : outputs) os << "output " << o << "\n";
    }
};

PatchSpec patch_spec_from_config(const RunConfig& cfg) {
    PatchSpec spec;
    spec.fovs = parse_int_list(cfg.get_string("fovs", "16,32,64"));
    spec.out_size = static_cast<int>(cfg.get_long("out_size", 0));
    spec.lowres_rate = cfg.get_double("lowres_rate", 0.125);
    spec.border = cfg.get_string("border", "reflect") == "zero" ? BorderMode::kZero
                                                                : BorderMode::kReflect;
    spec.validate();
    return spec;
}

void patch_spec_to_config(const PatchSpec& spec, RunConfig& cfg) {
    cfg.set("fovs", join_ints(spec.fovs));
    cfg.set("out_size", static_cast<long>(spec.out_size));
    cfg.set("lowres_rate", spec.lowres_rate);
    cfg.set("border", spec.border == BorderMode::kZero ? "zero" : "reflect");
}

struct Model {
    std::unique_ptr<FoveationNet> fov;
    std::unique_ptr<SegNet> seg;
    PatchSpec spec;
    RunConfig train_cfg;
};

// Rebuilds the networks from a training output directory and loads weights.
Model load_model(const std::string& model_dir, const std::string& which) {
    Model m;
    m.train_cfg = RunConfig::load((fs::path(model_dir) / "train_config.txt").string());
    m.spec = patch_spec_from_config(m.train_cfg);
    const int channels = static_cast<int>(m.train_cfg.get_long("channels", 1));
    const int classes = static_cast<int>(m.train_cfg.get_long("classes", 2));
    const std::uint64_t seed = m.train_cfg.get_u64("seed", 1);
    m.fov = std::make_unique<FoveationNet>(channels, m.spec.d(),
                                           RngStream::derive(seed, "init").next_u64());
    SegConfig scfg;
    scfg.in_channels = channels;
    scfg.widths = parse_int_list(m.train_cfg.get_string("widths", "16,32,64"));
    scfg.classes = classes;
    scfg.out_size = m.spec.s();
    m.seg = std::make_unique<SegNet>(scfg, RngStream::derive(seed, "init").next_u64());
    const std::string ckpt =
        (fs::path(model_dir) / ("checkpoint_" + which + ".fsck")).string();
    load_checkpoint(ckpt, {&m.fov->params(), &m.seg->params()});
    return m;
}

InferMode parse_infer_mode(const std::string& text, int* fixed_d) {
    if (text == "mean") return InferMode::kMean;
    if (text == "argmax" || text == "gsm" || text == "mode") return InferMode::kArgmax;
    if (text == "random") return InferMode::kRandom;
    if (text == "average") return InferMode::kAverage;
    if (text == "ensemble") return InferMode::kEnsemble;
    if (text.rfind("fixed-", 0) == 0) {
        *fixed_d = std::stoi(text.substr(6));
        return InferMode::kFixed;
    }
    throw ConfigError("unknown inference mode: " + text);
}

// ---- synth ------------------------------------------------------------------

int cmd_synth(RunConfig cfg) {
    const std::string out_dir = cfg.get_string("out");
    SynthConfig scfg;
    scfg.n_images = static_cast<int>(cfg.get_long("n_images", 10));
    scfg.size = static_cast<int>(cfg.get_long("size", 256));
    scfg.seed = cfg.get_u64("seed", 1);
    scfg.bar_period = static_cast<int>(cfg.get_long("bar_period", 48));
    const std::string image_format = cfg.get_string("image_format", "png");
    FOV_CONFIG_REQUIRE(image_format == "png" || image_format == "ftr",
                       "synth: image_format must be png or ftr");
    cfg.set("image_format", image_format);
    cfg.set("n_images", static_cast<long>(scfg.n_images));
    cfg.set("size", static_cast<long>(scfg.size));
    cfg.set("seed", scfg.seed);
    cfg.set("bar_period", static_cast<long>(scfg.bar_period));

    ensure_dir(out_dir);
    RunManifest manifest;
    manifest.command = "synth";
    if (image_format == "ftr")
        write_synth_dataset_tiled(scfg, out_dir);
    else
        write_synth_dataset(scfg, out_dir);
    cfg.save((fs::path(out_dir) / "synth_config.txt").string());
    manifest.add("manifest.txt");
    manifest.add("synth_config.txt");
    manifest.write(out_dir);
    return 0;
}

// ---- train ------------------------------------------------------------------

int cmd_train(RunConfig cfg) {
    const std::string out_dir = cfg.get_string("out");
    const std::string data_manifest = cfg.get_string("data");

    TrainConfig tcfg;
    tcfg.mode = cfg.get_string("mode", "mean");
    tcfg.images_per_batch = static_cast<int>(cfg.get_long("images_per_batch", 2));
    tcfg.locations_per_image = static_cast<int>(cfg.get_long("locations_per_image", 4));
    tcfg.iterations = cfg.get_long("iterations", 2000);
    tcfg.lr0 = cfg.get_double("lr0", 2e-5);
    tcfg.lr_power = cfg.get_double("lr_power", 0.9);
    tcfg.adam.beta1 = cfg.get_double("beta1", 0.9);
    tcfg.adam.beta2 = cfg.get_double("beta2", 0.999);
    tcfg.adam.eps = cfg.get_double("adam_eps", 1e-8);
    tcfg.adam.weight_decay = cfg.get_double("weight_decay", 0.0);
    tcfg.seed = cfg.get_u64("seed", 1);
    tcfg.patch = patch_spec_from_config(cfg);
    tcfg.tau.floor = cfg.get_double("tau_floor", 0.10);
    tcfg.tau.rate = cfg.get_double("tau_rate", 0.0);
    tcfg.val_interval = cfg.get_long("val_interval", 100);
    tcfg.threads = static_cast<int>(cfg.get_long("threads", default_thread_count()));

    Dataset train_data = load_dataset(data_manifest, "train", tcfg.patch);
    Dataset val_data = load_dataset(data_manifest, "val", tcfg.patch);
    FOV_CONFIG_REQUIRE(!train_data.items.empty(), "no training items in " + data_manifest);
    const int channels = train_data.items.front().image->channels();

    const std::uint64_t init_seed = RngStream::derive(tcfg.seed, "init").next_u64();
    FoveationNet fov(channels, tcfg.patch.d(), init_seed);
    SegConfig scfg;
    scfg.in_channels = channels;
    scfg.widths = parse_int_list(cfg.get_string("widths", "16,32,64"));
    scfg.classes = train_data.classes;
    scfg.out_size = tcfg.patch.s();
    SegNet seg(scfg, init_seed);

    // Resolved config.
    cfg.set("mode", tcfg.mode);
    cfg.set("images_per_batch", static_cast<long>(tcfg.images_per_batch));
    cfg.set("locations_per_image", static_cast<long>(tcfg.locations_per_image));
    cfg.set("iterations", tcfg.iterations);
    cfg.set("lr0", tcfg.lr0);
    cfg.set("lr_power", tcfg.lr_power);
    cfg.set("beta1", tcfg.adam.beta1);
    cfg.set("beta2", tcfg.adam.beta2);
    cfg.set("adam_eps", tcfg.adam.eps);
    cfg.set("weight_decay", tcfg.adam.weight_decay);
    cfg.set("seed", tcfg.seed);
    cfg.set("tau_floor", tcfg.tau.floor);
    cfg.set("tau_rate", tcfg.tau.rate);
    cfg.set("val_interval", tcfg.val_interval);
    cfg.set("threads", static_cast<long>(tcfg.threads));
    cfg.set("widths", join_ints(scfg.widths));
    cfg.set("channels", static_cast<long>(channels));
    cfg.set("classes", static_cast<long>(train_data.classes));
    patch_spec_to_config(tcfg.patch, cfg);

    ensure_dir(out_dir);
    cfg.save((fs::path(out_dir) / "train_config.txt").string());

    RunManifest manifest;
    manifest.command = "train";
    Trainer trainer(fov, seg, tcfg);
    const TrainResult result = trainer.fit(train_data, val_data, out_dir);

    std::cout << "trained " << tcfg.iterations << " iterations, mode " << tcfg.mode
              << ", best val mIoU "
              << (result.best_iteration >= 0 ? std::to_string(result.best_val_miou) : "n/a")
              << "\n";
    manifest.add("train_config.txt");
    manifest.add("runlog.csv");
    manifest.add("checkpoint_best.fsck");
    manifest.add("checkpoint_last.fsck");
    manifest.write(out_dir);
    return 0;
}

// ---- infer ------------------------------------------------------------------

int cmd_infer(RunConfig cfg) {
    const std::string out_dir = cfg.get_string("out");
    const std::string model_dir = cfg.get_string("model");
    const std::string image_path = cfg.get_string("image");
    const std::string labels_path = cfg.get_string("labels", "");
    const std::string which = cfg.get_string("checkpoint", "best");

    Model m = load_model(model_dir, which);
    InferOptions opts;
    const std::string mode =
        cfg.get_string("mode", m.train_cfg.get_string("mode", "mean"));
    opts.mode = parse_infer_mode(mode, &opts.fixed_d);
    opts.fov_grid_rate = cfg.get_double("fov_grid_rate", 1.0);
    opts.seed = cfg.get_u64("seed", 1);
    opts.threads = static_cast<int>(cfg.get_long("threads", default_thread_count()));

    cfg.set("mode", mode);
    cfg.set("checkpoint", which);
    cfg.set("fov_grid_rate", opts.fov_grid_rate);
    cfg.set("seed", opts.seed);
    cfg.set("threads", static_cast<long>(opts.threads));

    auto image = open_image_source(image_path);
    const auto result = segment_image(*image, m.fov.get(), *m.seg, m.spec, opts);

    ensure_dir(out_dir);
    RunManifest manifest;
    manifest.command = "infer";
    save_label_png_indexed((fs::path(out_dir) / "prediction.png").string(), result.prediction);
    manifest.add("prediction.png");
    if (!labels_path.empty()) {
        const LabelMap truth = load_label_png(labels_path);
        const int classes = static_cast<int>(m.train_cfg.get_long("classes", 2));
        const ClassScores scores = compute_scores(result.prediction, truth, classes);
        write_scores_csv((fs::path(out_dir) / "scores.csv").string(), scores);
        std::cout << "mIoU " << scores.miou << "\n";
        manifest.add("scores.csv");
    }
    cfg.save((fs::path(out_dir) / "infer_config.txt").string());
    manifest.add("infer_config.txt");
    manifest.write(out_dir);
    return 0;
}

// ---- fovmap -----------------------------------------------------------------

int cmd_fovmap(RunConfig cfg) {
    const std::string out_dir = cfg.get_string("out");
    const std::string model_dir = cfg.get_string("model");
    const std::string image_path = cfg.get_string("image");
    const std::string which = cfg.get_string("checkpoint", "best");
    const double grid_rate = cfg.get_double("fov_grid_rate", 1.0);

    Model m = load_model(model_dir, which);
    const ImageTensor image = load_image(image_path);
    const ImageTensor lowres = make_lowres(image, m.spec.lowres_rate * grid_rate);
    const PatchDistribution dist = m.fov->forward_dist(lowres);
    const FoveationMap map = foveation_map(dist, m.spec.fovs);

    cfg.set("checkpoint", which);
    cfg.set("fov_grid_rate", grid_rate);

    ensure_dir(out_dir);
    RunManifest manifest;
    manifest.command = "fovmap";
    save_map_png16((fs::path(out_dir) / "fovmap.png").string(), map.h, map.w, map.values);
    save_map_f64((fs::path(out_dir) / "fovmap.f64").string(), map.h, map.w, map.values);
    cfg.save((fs::path(out_dir) / "fovmap_config.txt").string());
    manifest.add("fovmap.png");
    manifest.add("fovmap.f64");
    manifest.add("fovmap_config.txt");
    manifest.write(out_dir);
    return 0;
}

// ---- eval -------------------------------------------------------------------

int cmd_eval(RunConfig cfg) {
    const std::string out_dir = cfg.get_string("out");
    const std::string model_dir = cfg.get_string("model");
    const std::string data_manifest = cfg.get_string("data");
    const std::string split = cfg.get_string("split", "val");
    const std::string which = cfg.get_string("checkpoint", "best");

    Model m = load_model(model_dir, which);
    InferOptions opts;
    const std::string mode =
        cfg.get_string("mode", m.train_cfg.get_string("mode", "mean"));
    opts.mode = parse_infer_mode(mode, &opts.fixed_d);
    opts.fov_grid_rate = cfg.get_double("fov_grid_rate", 1.0);
    opts.seed = cfg.get_u64("seed", 1);
    opts.threads = static_cast<int>(cfg.get_long("threads", default_thread_count()));

    cfg.set("mode", mode);
    cfg.set("split", split);
    cfg.set("checkpoint", which);
    cfg.set("fov_grid_rate", opts.fov_grid_rate);
    cfg.set("seed", opts.seed);
    cfg.set("threads", static_cast<long>(opts.threads));

    const Dataset data = load_dataset(data_manifest, split, m.spec);
    FOV_CONFIG_REQUIRE(!data.items.empty(), "no items in split '" + split + "'");

    ensure_dir(out_dir);
    RunManifest manifest;
    manifest.command = "eval";
    std::ofstream summary(fs::path(out_dir) / "summary.csv", std::ios::trunc);
    summary.precision(17);
    summary << "image,miou\n";
    double total = 0.0;
    for (const auto& item : data.items) {
        const auto result = segment_image(*item.image, m.fov.get(), *m.seg, m.spec, opts);
        const auto scores = compute_scores(result.prediction, *item.labels, data.classes);
        write_scores_csv((fs::path(out_dir) / ("scores_" + item.id + ".csv")).string(), scores);
        manifest.add("scores_" + item.id + ".csv");
        summary << item.id << "," << scores.miou << "\n";
        total += scores.miou;
    }
    const double mean_miou = total / static_cast<double>(data.items.size());
    summary << "mean," << mean_miou << "\n";
    std::cout << "split " << split << " mean mIoU " << mean_miou << "\n";
    cfg.save((fs::path(out_dir) / "eval_config.txt").string());
    manifest.add("summary.csv");
    manifest.add("eval_config.txt");
    manifest.write(out_dir);
    return 0;
}

// ---- goldstd ----------------------------------------------------------------

int cmd_goldstd(RunConfig cfg) {
    const std::string out_dir = cfg.get_string("out");
    const std::string data_manifest = cfg.get_string("data");
    const std::string split = cfg.get_string("split", "val");
    const std::string model_dir = cfg.get_string("model", "");
    const std::string which = cfg.get_string("checkpoint", "best");
    std::vector<std::string> baseline_dirs;
    {
        std::stringstream ss(cfg.get_string("baselines"));
        std::string tok;
        while (std::getline(ss, tok, ',')) baseline_dirs.push_back(tok);
    }
    FOV_CONFIG_REQUIRE(!baseline_dirs.empty(), "goldstd: needs --baselines");

    std::vector<Model> baselines;
    baselines.reserve(baseline_dirs.size());
    for (const auto& dir : baseline_dirs) baselines.push_back(load_model(dir, which));
    const PatchSpec spec = baselines.front().spec;
    FOV_CONFIG_REQUIRE(baselines.size() == static_cast<std::size_t>(spec.d()),
                       "goldstd: need exactly one baseline model per FoV");

    std::optional<Model> ours;
    if (!model_dir.empty()) ours.emplace(load_model(model_dir, which));

    const int threads = static_cast<int>(cfg.get_long("threads", default_thread_count()));
    cfg.set("split", split);
    cfg.set("checkpoint", which);
    cfg.set("threads", static_cast<long>(threads));

    const Dataset data = load_dataset(data_manifest, split, spec);
    FOV_CONFIG_REQUIRE(!data.items.empty(), "no items in split '" + split + "'");

    ensure_dir(out_dir);
    RunManifest manifest;
    manifest.command = "goldstd";
    std::ofstream mse_csv(fs::path(out_dir) / "map_mse.csv", std::ios::trunc);
    mse_csv.precision(17);
    mse_csv << "image,mse\n";
    double total_mse = 0.0;
    long n_mse = 0;
    for (const auto& item : data.items) {
        const int stride_lr =
            std::max(1, static_cast<int>(std::lround(spec.fovs.front() * spec.lowres_rate)));
        const TileGrid grid = make_tile_grid(item.image->height(), item.image->width(), spec,
                                             stride_lr);
        std::vector<SegNet*> nets;
        for (auto& b : baselines) nets.push_back(b.seg.get());
        const auto miou_maps = baseline_tile_miou(*item.image, *item.labels, nets, spec, threads);
        const FoveationMap gold = gold_standard_map(miou_maps, spec.fovs, grid.rows(), grid.cols());
        const FoveationMap gold_argmax =
            gold_standard_argmax_map(miou_maps, spec.fovs, grid.rows(), grid.cols());
        save_map_png16((fs::path(out_dir) / ("gold_" + item.id + ".png")).string(), gold.h,
                       gold.w, gold.values);
        save_map_f64((fs::path(out_dir) / ("gold_" + item.id + ".f64")).string(), gold.h, gold.w,
                     gold.values);
        save_map_png16((fs::path(out_dir) / ("gold_argmax_" + item.id + ".png")).string(),
                       gold_argmax.h, gold_argmax.w, gold_argmax.values);
        manifest.add("gold_" + item.id + ".png");
        manifest.add("gold_" + item.id + ".f64");
        manifest.add("gold_argmax_" + item.id + ".png");
        if (ours) {
            const PatchDistribution dist = ours->fov->forward_dist(*item.lowres);
            const FoveationMap fmap =
                foveation_map_on_grid(dist, spec.fovs, grid, spec.lowres_rate);
            save_map_png16((fs::path(out_dir) / ("fovmap_" + item.id + ".png")).string(), fmap.h,
                           fmap.w, fmap.values);
            save_map_f64((fs::path(out_dir) / ("fovmap_" + item.id + ".f64")).string(), fmap.h,
                         fmap.w, fmap.values);
            const double mse = map_mse(fmap, gold);
            mse_csv << item.id << "," << mse << "\n";
            total_mse += mse;
            ++n_mse;
            manifest.add("fovmap_" + item.id + ".png");
            manifest.add("fovmap_" + item.id + ".f64");
        }
    }
    if (n_mse > 0) {
        mse_csv << "mean," << total_mse / static_cast<double>(n_mse) << "\n";
        std::cout << "mean map MSE " << total_mse / static_cast<double>(n_mse) << "\n";
    }
    cfg.save((fs::path(out_dir) / "goldstd_config.txt").string());
    manifest.add("map_mse.csv");
    manifest.add("goldstd_config.txt");
    manifest.write(out_dir);
    return 0;
}

struct FlagSpec {
    std::string key;
    std::string help;
};

// Generic bridge: every flag value lands in the RunConfig; --config preloads.
void add_config_flags(CLI::App* cmd, std::shared_ptr<RunConfig> cfg,
                      std::shared_ptr<std::string> config_path,
                      const std::vector<FlagSpec>& flags) {
    cmd->add_option("--config", *config_path, "load a resolved key=value config file");
    for (const auto& f : flags) {
        cmd->add_option_function<std::string>(
            "--" + f.key, [cfg, key = f.key](const std::string& v) { cfg->set(key, v); },
            f.help);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"foveated segmentation toolkit"};
    app.require_subcommand(1);

    std::string kernels_choice = "auto";
    app.add_option("--kernels", kernels_choice, "kernel variant: auto|scalar|avx2");

    struct Cmd {
        std::string name;
        std::string description;
        std::vector<FlagSpec> flags;
        int (*run)(RunConfig);
    };
    const std::vector<Cmd> commands = {
        {"synth",
         "generate the synthetic two-regime dataset",
         {{"out", "output directory"},
          {"n_images", "number of images (default 10)"},
          {"size", "image side in pixels (default 256)"},
          {"seed", "master seed"},
          {"bar_period", "full period of the coarse bars"},
          {"image_format", "png|ftr (tiled raw) image storage"}},
         cmd_synth},
        {"train",
         "train jointly or in a baseline mode",
         {{"out", "output directory"},
          {"data", "dataset manifest"},
          {"mode", "mean|gsm|mode|fixed-<d>|random|average"},
          {"iterations", "total iterations T"},
          {"images_per_batch", "L images per minibatch"},
          {"locations_per_image", "B locations per image"},
          {"lr0", "initial learning rate"},
          {"lr_power", "poly schedule power"},
          {"beta1", "Adam beta1"},
          {"beta2", "Adam beta2"},
          {"adam_eps", "Adam epsilon"},
          {"weight_decay", "L2 weight decay"},
          {"seed", "master seed"},
          {"fovs", "comma-separated FoV sides"},
          {"out_size", "patch pixel side S (0 = smallest FoV)"},
          {"lowres_rate", "low-resolution rate"},
          {"border", "reflect|zero"},
          {"widths", "segmentation net widths"},
          {"tau_floor", "GSM temperature floor"},
          {"tau_rate", "GSM annealing rate (0 = 1/T)"},
          {"val_interval", "validation cadence in iterations"},
          {"threads", "worker threads"}},
         cmd_train},
        {"infer",
         "segment one image with a trained model",
         {{"out", "output directory"},
          {"model", "training output directory"},
          {"image", "input image"},
          {"labels", "optional ground-truth labels"},
          {"mode", "mean|argmax|fixed-<d>|random|average|ensemble"},
          {"checkpoint", "best|last"},
          {"fov_grid_rate", "distribution grid rate in (0,1]"},
          {"seed", "seed for random mode"},
          {"threads", "worker threads"}},
         cmd_infer},
        {"fovmap",
         "write the foveation map for an image",
         {{"out", "output directory"},
          {"model", "training output directory"},
          {"image", "input image"},
          {"checkpoint", "best|last"},
          {"fov_grid_rate", "distribution grid rate in (0,1]"}},
         cmd_fovmap},
        {"goldstd",
         "gold-standard maps from fixed-patch baselines (+ MSE vs a model)",
         {{"out", "output directory"},
          {"data", "dataset manifest"},
          {"split", "dataset split"},
          {"baselines", "comma-separated fixed-patch model directories"},
          {"model", "optional foveated model directory for MSE"},
          {"checkpoint", "best|last"},
          {"threads", "worker threads"}},
         cmd_goldstd},
        {"eval",
         "score a dataset split with a trained model",
         {{"out", "output directory"},
          {"model", "training output directory"},
          {"data", "dataset manifest"},
          {"split", "dataset split"},
          {"mode", "inference mode"},
          {"checkpoint", "best|last"},
          {"fov_grid_rate", "distribution grid rate in (0,1]"},
          {"seed", "seed for random mode"},
          {"threads", "worker threads"}},
         cmd_eval},
    };

    struct Pending {
        std::shared_ptr<RunConfig> cfg;
        std::shared_ptr<std::string> config_path;
        CLI::App* sub;
        int (*run)(RunConfig);
    };
    std::vector<Pending> pending;
    for (const auto& c : commands) {
        auto cfg = std::make_shared<RunConfig>();
        auto config_path = std::make_shared<std::string>();
        CLI::App* sub = app.add_subcommand(c.name, c.description);
        add_config_flags(sub, cfg, config_path, c.flags);
        pending.push_back({cfg, config_path, sub, c.run});
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        kernels::select(kernels_choice);
        for (const auto& p : pending) {
            if (!p.sub->parsed()) continue;
            RunConfig cfg;
            if (!p.config_path->empty()) cfg = RunConfig::load(*p.config_path);
            for (const auto& [k, v] : p.cfg->entries()) cfg.set(k, v);  // flags override file
            return p.run(std::move(cfg));
        }
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 1;
    } catch (const TrainingError& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
